import numpy as np
import pytest


def random_spd(rng, dim, lam_low=0.5, lam_high=2.0):
    """Random SPD matrix with eigenvalues in [lam_low, lam_high].

    Keeps the condition number small so projection tolerances near 1e-8
    are meaningful.
    """
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = rng.uniform(lam_low, lam_high, size=dim)
    return (q * lam) @ q.T


def random_full_rank(rng, p, m):
    """Random p x m matrix of full row rank (resampled until comfortably so)."""
    while True:
        r = rng.standard_normal((p, m))
        sv = np.linalg.svd(r, compute_uv=False)
        if sv[-1] > 1e-3 * sv[0]:
            return r


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
