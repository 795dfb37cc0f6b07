"""``swapcalc`` command-line entry point.

Each command writes one CSV (header row, LF endings, 17 significant digits)
and a JSON manifest next to it holding the resolved configuration, the run
time and a sha256 checksum of every file written.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from . import config as cfgmod
from .algebra import ABSM, STANDARD
from .chain import ChainSpec, SourceStats, beta_sequence, link_metrics, p_sequence
from .errors import SwapcalcError, UndefinedFidelityError, ValidationError
from .fock import (
    bell_mapping_residuals,
    chain_trace,
    loss_equivalence_check,
    monte_carlo_cross_check,
    noon_outcomes,
    random_truncated_state,
    sequence_trace,
)
from .repeater import (
    BalancedChainSpec,
    allowed_emission_probability,
    build_imbalanced_chain,
    closed_form_fidelity,
    db_to_eta,
    elementary_gain,
    loss_to_distance_km,
    optimal_link_count,
    three_pair_ratio,
)
from .type2 import CascadedConfig, Type2Spec, absm_gain, max_efficiency, lagrange_operating_point, cascaded_operating_point, worked_example

EXIT_OK, EXIT_VALIDATION, EXIT_VERIFY = 0, 1, 2

COLUMNS = {
    "fidelity-chain": ("ell", "sigma", "fidelity", "gain"),
    "link-efficiency": ("total_loss_dB", "distance_km", "ell_opt", "eta_tilde", "protocol"),
    "imbalance-map": ("chain", "ell", "sigma", "loss2_dB", "loss3_dB", "eta2", "eta3", "fidelity",
                      "three_pair_ratio", "three_pair_dominant"),
    "type2-report": ("variant", "sigma", "loss2_dB", "loss5_dB", "lambda23", "lambda54", "p12", "p34", "p56",
                     "b", "w", "pi0", "pi_hat", "eta_hat", "gain"),
    "verify": ("check", "passed", "max_error", "tolerance"),
}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            if len(r) != len(columns):
                raise AssertionError("row width does not match the column contract")
            fh.write(",".join(fmt(v) for v in r) + "\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered map over a worker pool; results keep the input order."""
    n = threads or os.cpu_count() or 1
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _safe_fidelity(spec: ChainSpec) -> float:
    try:
        return link_metrics(spec, method="transfer").fidelity
    except UndefinedFidelityError:
        return math.nan


# --- commands -------------------------------------------------------------

def cmd_fidelity_chain(cfg: dict) -> tuple[list, str]:
    c = cfg["fidelity_chain"]
    ells = [int(round(x)) for x in cfgmod.grid(cfg, "fidelity_chain", "ell").values()]

    def row(ell):
        try:
            g = elementary_gain(c["fidelity"], ell, c["eta"], c["eta_r"])
        except SwapcalcError:
            g = math.nan
        out = []
        for rule in (STANDARD, ABSM):
            f = closed_form_fidelity(BalancedChainSpec(ell, c["eta"], c["eta_r"], c["p"], rule))
            out.append((ell, rule.sigma, f, g))
        return out

    rows = list(itertools.chain.from_iterable(_pmap(row, ells, cfg["run"]["threads"])))
    return rows, ""


def cmd_link_efficiency(cfg: dict) -> tuple[list, str]:
    c = cfg["link_efficiency"]
    losses = list(cfgmod.grid(cfg, "link_efficiency", "loss_db").values())

    def row(db):
        out = []
        for rule in (STANDARD, ABSM):
            ell, eff = optimal_link_count(db, c["fidelity"], c["eta_r"], c["eta_d"], c["ell_max"], rule, c["model"])
            out.append((db, loss_to_distance_km(db), ell, eff, rule.name))
        out.append((db, loss_to_distance_km(db), 0, db_to_eta(db), "repeaterless"))
        return out

    rows = list(itertools.chain.from_iterable(_pmap(row, losses, cfg["run"]["threads"])))
    return rows, ""


def cmd_imbalance_map(cfg: dict) -> tuple[list, str]:
    c = cfg["imbalance_map"]
    fr = cfgmod.grid(cfg, "imbalance_map", "split").values()
    total = c["combined_loss_db"]
    p = c["p"]
    cells = []
    for kind in c["chains"]:
        ells = [1] if kind in ("I", "II") else c["ells"]
        for ell in ells:
            for rule in (STANDARD, ABSM):
                for f in fr:
                    cells.append((kind, ell, rule, float(f)))

    def row(cell):
        kind, ell, rule, f = cell
        link_db = total / 2.0 if kind == "II" else total
        l2, l3 = f * link_db, (1.0 - f) * link_db
        e2, e3 = db_to_eta(l2), db_to_eta(l3)
        if kind == "I":
            spec = ChainSpec.build([p, p], (1.0, e2, e3, 1.0), rule)
        elif kind == "II":
            spec = ChainSpec.build([p] * 3, (1.0, e2, e3, e3, e2, 1.0), rule)
        else:
            spec = build_imbalanced_chain(kind, ell, e2, e3, c["eta_r"], p, rule)
        fid = _safe_fidelity(spec)
        ratio = three_pair_ratio(p, fid) if not math.isnan(fid) else math.nan
        return (kind, ell, rule.sigma, l2, l3, e2, e3, fid, ratio, bool(ratio > c["three_pair_threshold"]))

    return _pmap(row, cells, cfg["run"]["threads"]), ""


def cmd_type2_report(cfg: dict) -> tuple[list, str]:
    c = cfg["type2"]
    df = c["delta_f"]
    xs = list(cfgmod.grid(cfg, "type2", "split_db").values())
    variants = [("plain", None)]
    if c["cascaded"]["enabled"]:
        variants.append(("cascaded", CascadedConfig(c["cascaded"]["M"], c["cascaded"]["eta_r"])))
    cells = [(v, casc, rule, a, b) for v, casc in variants for rule in (STANDARD, ABSM) for a in xs for b in xs]

    def row(cell):
        v, casc, rule, a, b = cell
        spec = Type2Spec.from_split(a, b, c["bsm_loss_db"], rule=rule, alpha_receiver=c["alpha_receiver"], cascaded=casc)
        if casc is None:
            op = lagrange_operating_point(spec, df)
            eb = max_efficiency(spec, df)
        else:
            op, eb = cascaded_operating_point(spec, df)
        l23, l54 = spec.lambdas
        return (v, rule.sigma, a, b, l23, l54, op.p12, op.p34, op.p56, op.b, op.w, eb.pi0, eb.pi_hat,
                eb.eta_hat_AB, absm_gain(spec))

    rows = _pmap(row, cells, cfg["run"]["threads"])
    lines = [f"delta_f = {df}"]
    for v, _ in variants:
        sel = [r for r in rows if r[0] == v and r[1] == 1.0]
        best = max(sel, key=lambda r: r[12])
        lines.append(f"{v}: max pi_hat = {best[12]:.4g} at loss2 = {best[2]:g} dB, loss5 = {best[3]:g} dB")
    centre = Type2Spec.from_split(c["bsm_loss_db"] / 2, c["bsm_loss_db"] / 2, c["bsm_loss_db"])
    lines.append(f"balanced-centre ABSM gain = {absm_gain(centre):.4g}")
    if c["worked_example"]:
        ex = c["example"]
        w = worked_example(ex["combined_loss_db"], ex["fidelity"], c["cascaded"]["M"], c["cascaded"]["eta_r"])
        lines.append("reduction vs balanced single-swap link, fully imbalanced:")
        lines.append(f"  plain double swap      {w.plain_db:.1f} dB")
        lines.append(f"  cascaded, standard BSM {w.cascaded_standard_db:.1f} dB")
        lines.append(f"  cascaded, ABSM         {w.cascaded_absm_db:.1f} dB")
    return rows, "\n".join(lines)


def _random_spec(rng: np.random.Generator, n: int, rule) -> ChainSpec:
    etas = [1.0] + list(rng.uniform(0.0, 1.0, size=2 * n - 2)) + [1.0]
    ps = [SourceStats.exact(float(x)) for x in rng.uniform(0.01, 0.25, size=n)]
    return ChainSpec(tuple(ps), tuple(etas), rule)


def _perturbed(spec: ChainSpec, delta: float) -> ChainSpec:
    if delta == 0.0:
        return spec
    etas = list(spec.channel_eta)
    for i in range(1, len(etas) - 1):
        etas[i] = min(1.0, max(0.0, etas[i] + delta))
    return ChainSpec(spec.sources, tuple(etas), spec.rule)


def run_checks(cfg: dict) -> list[tuple[str, bool, float, float]]:
    """The oracle verification suite; one ``(name, passed, error, tol)`` per check."""
    c = cfg["verify"]
    tol = c["tol"]
    rng = np.random.default_rng(cfg["run"]["seed"])
    specs = [_random_spec(rng, n, rule) for n in (2, 3) for rule in (STANDARD, ABSM) for _ in range(c["draws"])]
    delta = c["perturb_eta"]

    seq_err = ab_err = 0.0
    for spec in specs:
        model = _perturbed(spec, delta)
        cache: dict = {}
        for nu in itertools.product(range(3), repeat=spec.n_sources):
            t = sequence_trace(spec, nu, cache)
            seq_err = max(seq_err, abs(t - p_sequence(model, nu) * beta_sequence(model, nu)))
        o = chain_trace(spec)
        m = link_metrics(model)
        ab_err = max(ab_err, abs(o.eta_AB - m.eta_AB), abs(o.eta_bar_AB - m.eta_bar_AB))
    out = [("per_sequence_oracle", seq_err <= tol, seq_err, tol), ("eta_ab_oracle", ab_err <= tol, ab_err, tol)]

    loss_ok = all(
        loss_equivalence_check(random_truncated_state(rng), float(rng.uniform(0.0, 1.0)), 1e-12)
        for _ in range(c["loss_states"])
    )
    out.append(("loss_equivalence", loss_ok, 0.0 if loss_ok else math.inf, 1e-12))
    bm = max(bell_mapping_residuals().values())
    out.append(("bell_mapping", bm <= 1e-12, bm, 1e-12))
    nn = noon_outcomes((1, 1)).get((1, 1), 0.0)
    out.append(("noon_correlation", nn <= 1e-12, nn, 1e-12))

    mc_spec = _random_spec(rng, 2, STANDARD)
    est, se = monte_carlo_cross_check(mc_spec, c["mc_samples"], seed=cfg["run"]["seed"])
    ref = link_metrics(_perturbed(mc_spec, delta)).eta_bar_chain
    z = abs(est - ref) / se if se > 0 else (0.0 if est == ref else math.inf)
    out.append(("monte_carlo", z <= 5.0, z, 5.0))
    return out


def cmd_verify(cfg: dict) -> tuple[list, str]:
    rows = run_checks(cfg)
    text = "\n".join(f"{'PASS' if ok else 'FAIL'} {name} (error {err:.3g}, tolerance {t:.3g})" for name, ok, err, t in rows)
    return rows, text


COMMAND_FUNCS = {
    "fidelity-chain": cmd_fidelity_chain,
    "link-efficiency": cmd_link_efficiency,
    "imbalance-map": cmd_imbalance_map,
    "type2-report": cmd_type2_report,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swapcalc", description="Entanglement-swapping chain calculator.")
    ap.add_argument("--version", action="version", version=f"swapcalc {__version__}")
    ap.add_argument("command", choices=cfgmod.COMMANDS)
    ap.add_argument("--config", type=Path, help="TOML scenario file")
    ap.add_argument("--out", type=Path, help="CSV path (default: <command>.csv)")
    ap.add_argument("--seed", type=int, help="RNG seed for Monte Carlo and random draws")
    ap.add_argument("--threads", type=int, help="worker count, 0 for all cores")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted config key, value as TOML literal; repeatable")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"run.threads={args.threads}")
    try:
        cfg = cfgmod.load(args.config, overrides)
    except ValidationError as exc:
        print(f"swapcalc: config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    out = args.out or Path(f"{args.command}.csv")
    t0 = time.perf_counter()
    try:
        rows, text = COMMAND_FUNCS[args.command](cfg)
    except ValidationError as exc:
        print(f"swapcalc: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, COLUMNS[args.command], rows)
    files = {out.name: sha256(out)}
    if text:
        summary = out.with_suffix(".txt")
        summary.write_text(text + "\n", encoding="utf-8", newline="\n")
        files[summary.name] = sha256(summary)
        print(text)
    manifest = {
        "tool_version": __version__,
        "command": args.command,
        "config": cfg,
        "duration_s": time.perf_counter() - t0,
        "outputs": dict(sorted(files.items())),
    }
    out.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if args.command == "verify" and not all(r[1] for r in rows):
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
