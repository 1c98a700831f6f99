import os
import subprocess
import sys

import numpy as np
import pytest

from fracbound import _jit, _kernels

pytestmark = pytest.mark.skipif(not _jit.HAS_NUMBA, reason="numba not installed")


@pytest.fixture
def both():
    def run(fn, *args):
        try:
            _jit.set_backend("numpy")
            a = fn(*args)
            _jit.set_backend("numba")
            b = fn(*args)
        finally:
            _jit.set_backend("numba")
        return a, b
    return run


@pytest.mark.parametrize("seed", range(4))
def test_edt_agrees(both, seed):
    obst = np.random.default_rng(seed).random((37, 53)) < 0.05
    obst[0, 0] = True
    a, b = both(_kernels.edt_squared, obst)
    assert np.array_equal(a, b)


def test_edt_brute_force():
    rng = np.random.default_rng(7)
    obst = rng.random((15, 12)) < 0.1
    obst[3, 4] = True
    J, I = np.indices(obst.shape)
    pts = np.argwhere(obst)
    brute = ((J[..., None] - pts[:, 0]) ** 2 + (I[..., None] - pts[:, 1]) ** 2).min(axis=-1)
    assert np.array_equal(_kernels.edt_squared(obst), brute)


@pytest.mark.parametrize("conn", [4, 8])
def test_label_agrees_up_to_renaming(both, conn):
    fg = np.random.default_rng(1).random((40, 40)) < 0.5
    a, b = both(_kernels.label, fg, conn)
    assert np.array_equal(a == 0, b == 0)
    pairs = set(zip(a[fg], b[fg]))
    assert len(pairs) == len(np.unique(a[fg])) == len(np.unique(b[fg]))


def test_label_against_scipy():
    from scipy import ndimage
    fg = np.random.default_rng(2).random((30, 30)) < 0.55
    _, n8 = ndimage.label(fg, structure=np.ones((3, 3)))
    assert len(np.unique(_kernels.label(fg, 8)[fg])) == n8


def test_pair_energy_agrees(both):
    rng = np.random.default_rng(3)
    u = rng.standard_normal((20, 20))
    member = rng.random(u.shape) < 0.7
    w = rng.random((9, 9))
    a, b = both(_kernels.pair_energy, u, member, w)
    assert b == pytest.approx(a, rel=1e-12)


def test_set_backend_validation():
    with pytest.raises(ValueError):
        _jit.set_backend("cuda")


def test_environment_switch():
    code = "from fracbound import _jit; print(_jit.backend())"
    env = dict(os.environ, FRACBOUND_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
