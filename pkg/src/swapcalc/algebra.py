"""Commutative algebra of source tags used to track cross-BSM correlations.

Each entangled-pair source ``k`` carries a generator ``sigma_k``. Generators
commute and square to a protocol-dependent scalar: 3 for the standard BSM
protocol, 0 for the alternating-basis (ABSM) protocol. Elements are stored as
squarefree polynomials keyed by a bitmask of the generators present.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

MAX_SOURCES = 64


@dataclass(frozen=True)
class SigmaRule:
    """Reduction rule ``sigma_k**2 -> sigma_squared``."""

    sigma_squared: float

    def __post_init__(self):
        if self.sigma_squared not in (3.0, 0.0):
            raise ValueError(f"sigma_squared must be 3 or 0, got {self.sigma_squared!r}")

    @property
    def sigma(self) -> float:
        """The closed-form protocol parameter (1 standard, 0 ABSM)."""
        return self.sigma_squared / 3.0

    @property
    def name(self) -> str:
        return "standard" if self.sigma_squared == 3.0 else "absm"

    @classmethod
    def from_name(cls, name: str) -> "SigmaRule":
        key = name.strip().lower()
        if key in ("standard", "std", "sigma1", "1"):
            return STANDARD
        if key in ("absm", "alternating", "sigma0", "0"):
            return ABSM
        raise ValueError(f"unknown protocol {name!r}")


STANDARD = SigmaRule(3.0)
ABSM = SigmaRule(0.0)


def _bit(k: int) -> int:
    if not isinstance(k, int) or k < 1 or k > MAX_SOURCES:
        raise ValueError(f"source index must be an int in [1, {MAX_SOURCES}], got {k!r}")
    return 1 << (k - 1)


class AlgebraElement:
    """Immutable squarefree polynomial in the source generators.

    ``terms`` maps a bitmask (bit ``k-1`` set when ``sigma_k`` is present) to a
    real coefficient. Zero coefficients are never stored.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[int, float] | None = None):
        clean = {}
        if terms:
            for mono, c in terms.items():
                if mono < 0:
                    raise ValueError("monomial keys are non-negative bitmasks")
                c = float(c)
                if c != 0.0:
                    clean[int(mono)] = c
        self._terms = clean

    @property
    def terms(self) -> dict[int, float]:
        return dict(self._terms)

    def monomials(self) -> Iterable[tuple[frozenset[int], float]]:
        """Yield ``(set of source indices, coefficient)`` pairs."""
        for mono, c in sorted(self._terms.items()):
            idx = frozenset(i + 1 for i in range(mono.bit_length()) if mono >> i & 1)
            yield idx, c

    def coefficient(self, sources: Iterable[int] = ()) -> float:
        mono = 0
        for k in sources:
            mono |= _bit(k)
        return self._terms.get(mono, 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = scalar(other)
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        out = dict(self._terms)
        for mono, c in other._terms.items():
            out[mono] = out.get(mono, 0.0) + c
        return AlgebraElement(out)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = scalar(other)
        return self + (-other)

    def scale(self, c: float) -> "AlgebraElement":
        return AlgebraElement({m: c * v for m, v in self._terms.items()})

    def mul(self, other: "AlgebraElement", rule: SigmaRule) -> "AlgebraElement":
        return mul(self, other, rule)

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = scalar(other)
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def isclose(self, other: "AlgebraElement", rel: float = 1e-12, abs_: float = 1e-15) -> bool:
        keys = set(self._terms) | set(other._terms)
        for m in keys:
            a = self._terms.get(m, 0.0)
            b = other._terms.get(m, 0.0)
            if abs(a - b) > max(abs_, rel * max(abs(a), abs(b))):
                return False
        return True

    def __repr__(self):
        if not self._terms:
            return "AlgebraElement(0)"
        parts = []
        for idx, c in self.monomials():
            tag = "*".join(f"s{k}" for k in sorted(idx))
            parts.append(f"{c!r}" + (f"*{tag}" if tag else ""))
        return "AlgebraElement(" + " + ".join(parts) + ")"


def scalar(c: float) -> AlgebraElement:
    return AlgebraElement({0: c})


def sigma(k: int) -> AlgebraElement:
    return AlgebraElement({_bit(k): 1.0})


def mul(x: AlgebraElement, y: AlgebraElement, rule: SigmaRule) -> AlgebraElement:
    """Distributed product with every repeated generator reduced by ``rule``."""
    s = rule.sigma_squared
    out: dict[int, float] = {}
    for mx, cx in x._terms.items():
        for my, cy in y._terms.items():
            shared = mx & my
            c = cx * cy
            if shared:
                if s == 0.0:
                    continue
                c *= s ** bin(shared).count("1")
            key = mx ^ my
            out[key] = out.get(key, 0.0) + c
    return AlgebraElement(out)


def product(factors: Iterable[AlgebraElement], rule: SigmaRule) -> AlgebraElement:
    acc = scalar(1.0)
    for f in factors:
        acc = mul(acc, f, rule)
        if acc.is_zero():
            break
    return acc


def functional_L(x: AlgebraElement) -> float:
    """Evaluate at every generator equal to 1 (sum of coefficients)."""
    return sum(x._terms.values())


def functional_sigma_zero(x: AlgebraElement) -> float:
    """Evaluate at every generator equal to 0 (the scalar coefficient)."""
    return x._terms.get(0, 0.0)
