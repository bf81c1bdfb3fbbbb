import os
import subprocess
import sys

import numpy as np
import pytest

from gauss_sing import _backend
from gauss_sing.kernels import KernelSpec, kernel_values
from gauss_sing.operators import GaussianBump, apply_bump

compiled = pytest.mark.skipif(_backend.compiled_backend is None, reason="compiled extension not built")


@compiled
@pytest.mark.parametrize("beta,kind", [((1,), "alt"), ((3,), "general"), ((1, 0), "k1"), ((2, 1), "alt"),
                                       ((1, 0, 1), "alt")])
def test_kernel_batch_agrees(beta, kind, rng):
    spec = KernelSpec.from_hermite(beta)
    d = spec.dim
    X, Z = rng.normal(size=(12, d)), rng.normal(scale=0.4, size=(12, d))
    a = kernel_values(spec, X, Z, kind=kind, backend="compiled")
    b = kernel_values(spec, X, Z, kind=kind, backend="python")
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-14)
    assert a[2].all() and b[2].all()


@compiled
@pytest.mark.parametrize("beta", [(1,), (2,), (0, 1)])
def test_bump_batch_agrees(beta, rng):
    spec = KernelSpec.from_hermite(beta)
    d = spec.dim
    bump = GaussianBump(np.full(d, 0.2), 0.3)
    X = rng.normal(size=(8, d))
    a, _ = apply_bump(spec, bump, X, backend="compiled")
    b, _ = apply_bump(spec, bump, X, backend="python")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_get():
    assert _backend.get("python") is _backend.python_backend
    assert _backend.get() is _backend.active
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_environment_forces_python():
    env = dict(os.environ, GAUSS_SING_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "import gauss_sing; print(gauss_sing.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@compiled
def test_compiled_is_default():
    env = {k: v for k, v in os.environ.items() if k != "GAUSS_SING_BACKEND"}
    out = subprocess.run([sys.executable, "-c", "import gauss_sing; print(gauss_sing.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "compiled"
