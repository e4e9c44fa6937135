"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.special import logsumexp


def bank_log_softmax_mix(logw, radii, z, logsm_out):
    """Mixture class probabilities of a bank of quadrature posteriors.

    ``logw[m, g]`` is the normalized log posterior of node ``g`` in bank
    member ``m``, whose scores are ``radii[m] * z[g]``. Writes per-node log
    class probabilities into ``logsm_out`` and returns ``probs[m, k]``.
    """
    scores = radii[:, None, None] * z[None, :, :]
    logsm_out[...] = scores - logsumexp(scores, axis=2, keepdims=True)
    return np.einsum("mg,mgk->mk", np.exp(logw), np.exp(logsm_out))


def bank_update(logw, logsm, y):
    """In-place Bayes update on class ``y``; returns each member's log predictive mass."""
    logw += logsm[:, :, y]
    norm = logsumexp(logw, axis=1)
    logw -= norm[:, None]
    return norm


def spectral_ridge_predict(mu, ycoef, kcoef, lambdas):
    """sum_i ycoef_i * kcoef_i / (lambda + mu_i), for every lambda."""
    return (1.0 / (lambdas[:, None] + mu[None, :])) @ (ycoef * kcoef)
