import numpy as np
import pytest

from seqate import _kernels

try:
    from seqate import _core  # noqa: F401
    HAVE_CORE = True
except ImportError:  # pragma: no cover
    HAVE_CORE = False

needs_core = pytest.mark.skipif(not HAVE_CORE, reason="compiled core not built")

SPECS = [
    (_kernels.CONSTANT, 0.5, 0.0),
    (_kernels.CONSTANT, 0.23, 0.0),
    (_kernels.WEI_LINEAR, 0.0, 0.01),
    (_kernels.WEI_LINEAR, 0.0, 0.3),
    (_kernels.EFRON, 0.7, 0.0),
    (_kernels.EFRON, 0.95, 0.0),
]


@needs_core
@pytest.mark.parametrize("spec", SPECS)
def test_backends_agree_bitwise(spec):
    u = np.random.default_rng(1).random((40, 700))
    p_c, k_c = _kernels.assign_batch(*spec, u, backend="cython")
    p_py, k_py = _kernels.assign_batch(*spec, u, backend="python")
    assert np.array_equal(p_c, p_py)
    assert np.array_equal(k_c, k_py)


@needs_core
@pytest.mark.parametrize("eta", [0.5, 0.7, 0.9])
def test_efron_chain_backends_agree(eta):
    u = np.random.default_rng(2).random(50_000)
    assert np.array_equal(_kernels.efron_chain(eta, u, backend="cython"),
                          _kernels.efron_chain(eta, u, backend="python"))


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_core)])
def test_assignment_follows_draw_rule(backend):
    u = np.random.default_rng(3).random((5, 200))
    p, k = _kernels.assign_batch(_kernels.EFRON, 0.7, 0.0, u, backend=backend)
    assert np.array_equal(k.astype(bool), u < p)
    d = np.cumsum(2 * k.astype(np.int64) - 1, axis=1)
    prev = np.concatenate([np.zeros((5, 1), dtype=np.int64), d[:, :-1]], axis=1)
    expected = np.where(prev < 0, 0.7, np.where(prev > 0, 1 - 0.7, 0.5))
    np.testing.assert_allclose(p, expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_core)])
def test_wei_kernel_rule(backend):
    u = np.random.default_rng(4).random((3, 300))
    p, k = _kernels.assign_batch(_kernels.WEI_LINEAR, 0.0, 0.01, u, backend=backend)
    assert np.all(p[:, 0] == 0.5)
    d = np.cumsum(2 * k.astype(np.int64) - 1, axis=1)[:, :-1]
    i = np.arange(1, 300)
    np.testing.assert_allclose(p[:, 1:], np.clip((1 - d / i) / 2, 0.01, 0.99), atol=1e-15)


def test_backend_selection():
    assert _kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")
    with pytest.raises(ValueError):
        _kernels.assign_batch(_kernels.CONSTANT, 0.5, 0.0, np.zeros(3))


def test_pure_python_override_gives_same_run(tmp_path):
    import json
    import os
    import subprocess
    import sys

    outs = {}
    for flag in ("", "1"):
        env = dict(os.environ, SEQATE_PURE_PYTHON=flag)
        out = tmp_path / f"o{flag or 'default'}"
        code = ("from seqate import _kernels, cli; print(_kernels.BACKEND); "
                f"cli.main(['run', '--n', '300', '--reps', '60', '--out', {str(out)!r}])")
        res = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                             capture_output=True, text=True)
        outs[flag] = (res.stdout.split()[0], (out / "summary.json").read_text())
    assert outs["1"][0] == "python"
    assert outs[""][0] == _kernels.BACKEND
    assert json.loads(outs["1"][1]) == json.loads(outs[""][1])
