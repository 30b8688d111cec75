import numpy as np
import pytest

from gelflow import fem, kernels
from gelflow.mesh import gen_ellipse_mesh

IMPLS = kernels.implementations()


def test_backend_selected():
    assert kernels.BACKEND in IMPLS
    assert "numpy" in IMPLS


@pytest.mark.skipif(len(IMPLS) < 2, reason="compiled extension not built")
def test_backends_agree():
    m = gen_ellipse_mesh(0.4, 0.2, 4, 16)
    rule, phi1, _, dphi2 = fem._tables()
    x, t = m.vertices, m.triangles
    ref = IMPLS["numpy"]
    for name, impl in IMPLS.items():
        assert np.allclose(kernels.p2_stiffness(x, t, rule.weights, dphi2, impl=impl),
                           kernels.p2_stiffness(x, t, rule.weights, dphi2, impl=ref), rtol=0, atol=1e-13), name
        assert np.allclose(kernels.p2p1_divergence(x, t, rule.weights, dphi2, phi1, impl=impl),
                           kernels.p2p1_divergence(x, t, rule.weights, dphi2, phi1, impl=ref), atol=1e-14)
        assert np.allclose(kernels.p1_mass(x, t, impl=impl), kernels.p1_mass(x, t, impl=ref), atol=1e-16)
        assert np.allclose(kernels.p1_stiffness(x, t, impl=impl), kernels.p1_stiffness(x, t, impl=ref),
                           atol=1e-14)


def test_pure_python_fallback_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, GELFLOW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from gelflow import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
