import os
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swapcalc import _kernels_py, kernels
from swapcalc.chain import ChainSpec, reference_metrics

ckernels = pytest.importorskip("swapcalc._ckernels")

triples = st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)).map(
    lambda t: tuple(x / (sum(t) or 1.0) for x in t)
)


@st.composite
def kernel_inputs(draw):
    n = draw(st.integers(1, 9))
    probs = draw(st.lists(triples, min_size=n, max_size=n))
    eta = [1.0] + draw(st.lists(st.floats(0, 1), min_size=2 * n - 2, max_size=2 * n - 2)) + [1.0]
    return probs, eta, draw(st.sampled_from([3.0, 0.0]))


@given(kernel_inputs())
def test_compiled_and_python_kernels_are_bitwise_identical(args):
    assert ckernels.chain_sums(*args) == _kernels_py.chain_sums(*args)


@given(st.integers(2, 6), st.data())
def test_kernel_matches_generic_algebra_sum(n, data):
    from swapcalc.algebra import SigmaRule
    from swapcalc.chain import SourceStats

    ps = data.draw(st.lists(st.floats(0, 8 / 27), min_size=n, max_size=n))
    eta = [1.0] + data.draw(st.lists(st.floats(0, 1), min_size=2 * n - 2, max_size=2 * n - 2)) + [1.0]
    s = data.draw(st.sampled_from([3.0, 0.0]))
    spec = ChainSpec(tuple(SourceStats.exact(p) for p in ps), tuple(eta), SigmaRule(s))
    ref = reference_metrics(spec)
    a, b, c, _ = _kernels_py.chain_sums([src.triple for src in spec.sources], eta, s)
    assert a == pytest.approx(ref.eta_bar_chain, rel=1e-12, abs=1e-300)
    assert b == pytest.approx(ref.eta_bar_AB, rel=1e-12, abs=1e-300)
    assert c == pytest.approx(ref.eta_AB, rel=1e-12, abs=1e-300)


def test_compiled_backend_selected_by_default():
    assert kernels.BACKEND == "cython"


@pytest.mark.parametrize("flag", ["1", "true", "yes"])
def test_environment_forces_python_fallback(flag):
    env = dict(os.environ, SWAPCALC_PURE_PYTHON=flag)
    out = subprocess.run([sys.executable, "-c", "import swapcalc; print(swapcalc.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_visited_count_reflects_pruning():
    probs = [(0.8, 0.15, 0.05)] * 4
    eta = [1.0] + [0.5] * 6 + [1.0]
    visited = _kernels_py.chain_sums(probs, eta, 3.0)[3]
    assert 0 < visited < 3 ** 4 + 3 ** 3 + 3 ** 2 + 3
