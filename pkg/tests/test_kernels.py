import os
import subprocess
import sys

import numpy as np
import pytest

from scalefree import _kernels_py, kernels

compiled = pytest.importorskip("scalefree._kernels", reason="compiled extension not built")


def _bank_inputs(rng, M=5, G=40, K=3):
    logw = rng.normal(size=(M, G))
    logw -= np.log(np.exp(logw).sum(axis=1, keepdims=True))
    return logw, np.exp2(rng.integers(-10, 10, size=M).astype(float)), rng.normal(size=(G, K))


class TestParity:
    def test_bank_softmax_mix(self, rng):
        logw, radii, z = _bank_inputs(rng)
        a_out, b_out = np.empty((5, 40, 3)), np.empty((5, 40, 3))
        pa = _kernels_py.bank_log_softmax_mix(logw, radii, z, a_out)
        pb = compiled.bank_log_softmax_mix(logw.copy(), radii, z, b_out)
        np.testing.assert_allclose(pb, pa, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(b_out, a_out, rtol=1e-12, atol=1e-12)

    def test_bank_update(self, rng):
        logw, radii, z = _bank_inputs(rng)
        logsm = np.empty((5, 40, 3))
        _kernels_py.bank_log_softmax_mix(logw, radii, z, logsm)
        wa, wb = logw.copy(), logw.copy()
        na = _kernels_py.bank_update(wa, logsm, 1)
        nb = compiled.bank_update(wb, logsm, 1)
        np.testing.assert_allclose(nb, na, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(wb, wa, rtol=1e-12, atol=1e-12)

    def test_spectral(self, rng):
        mu = np.abs(rng.normal(size=30))
        yc, kc = rng.normal(size=30), rng.normal(size=30)
        lam = np.exp2(np.arange(-40, 41, dtype=float))
        np.testing.assert_allclose(compiled.spectral_ridge_predict(mu, yc, kc, lam),
                                   _kernels_py.spectral_ridge_predict(mu, yc, kc, lam), rtol=1e-11, atol=1e-300)


def test_env_var_selects_fallback():
    env = dict(os.environ, SCALEFREE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from scalefree import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_default_backend_is_compiled():
    if os.environ.get("SCALEFREE_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "cython"
