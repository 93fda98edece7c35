import numpy as np
import pytest

from degfusion import _kernels
from degfusion.reference import PARIS_NOMINAL, paris_grid


def _impl_pairs():
    pairs = {"numpy": _kernels._numpy_impls()}
    try:
        pairs["numba"] = _kernels._numba_impls()
    except ImportError:
        pass
    return pairs


def test_backend_selected():
    assert _kernels.backend_name() in ("numba", "numpy")


def test_scalar_backends_agree():
    pts = paris_grid().points
    x = PARIS_NOMINAL
    results = {}
    for name, (scalar, _) in _impl_pairs().items():
        vals, fail = scalar(x[0], x[1], x[2], x[3], x[4], x[5], pts, 0.5, 5.0)
        assert fail == 0
        results[name] = vals
    if len(results) == 2:
        np.testing.assert_allclose(results["numba"], results["numpy"],
                                   rtol=1e-12, atol=0.0)


def test_batch_backends_agree(rng):
    pts = paris_grid().points
    X = PARIS_NOMINAL[None, :] * rng.uniform(0.97, 1.03, (40, 6))
    results = {}
    for name, (_, batch) in _impl_pairs().items():
        out, fail, row = batch(np.ascontiguousarray(X), pts, 0.5, 5.0)
        assert (fail, row) == (0, -1)
        results[name] = out
    if len(results) == 2:
        np.testing.assert_allclose(results["numba"], results["numpy"],
                                   rtol=1e-12, atol=0.0)


def test_failure_index_consistent_across_backends():
    pts = paris_grid().points
    bad = PARIS_NOMINAL.copy()
    bad[1] = 12.0  # runaway exponent
    X = np.vstack([PARIS_NOMINAL, bad])
    outcomes = set()
    for name, (scalar, batch) in _impl_pairs().items():
        _, fail = scalar(bad[0], bad[1], bad[2], bad[3], bad[4], bad[5],
                         pts, 0.5, 5.0)
        assert fail > 0
        _, bfail, brow = batch(np.ascontiguousarray(X), pts, 0.5, 5.0)
        outcomes.add((fail, bfail, brow))
    assert len(outcomes) == 1
    assert next(iter(outcomes))[2] == 1


def test_bad_backend_env_rejected(monkeypatch):
    monkeypatch.setenv(_kernels.BACKEND_ENV, "fortran")
    from degfusion.errors import ConfigurationError

    with pytest.raises(ConfigurationError):
        _kernels._select_backend()
