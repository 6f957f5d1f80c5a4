"""Distribution-shift measures between two GMM futures.

Three measures, all over mixtures of Gaussians on flattened trajectories:
a weight-sorted mode-matched L2 with a configurable exponent on each pair
norm, a Monte-Carlo KL divergence sampled from the first mixture, and the
2nd-order Wasserstein distance built from closed-form Gaussian pair costs
and an exact transport plan over the mode weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ScoringError
from .prediction import GaussianMode, GmmPrediction
from .transport import TransportPlan, solve_transport

_ASYM_TOL = 1e-9
_EIG_FLOOR = -1e-6
_NEG_CLAMP = -1e-9


def sqrt_psd(sigma: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-1e-6, 0) are treated as roundoff and clamped to 0;
    anything lower, or meaningful asymmetry, is rejected.
    """
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise DataError(f"matrix must be square, got {sigma.shape}")
    scale = max(1.0, float(np.abs(sigma).max()))
    if float(np.abs(sigma - sigma.T).max()) > _ASYM_TOL * scale:
        raise DataError("matrix is not symmetric")
    w, V = np.linalg.eigh((sigma + sigma.T) / 2.0)
    if float(w.min()) < _EIG_FLOOR * scale:
        raise DataError(f"matrix is not PSD: eigenvalue {w.min()}")
    w = np.clip(w, 0.0, None)
    root = (V * np.sqrt(w)) @ V.T
    return (root + root.T) / 2.0


def gaussian_w2_cost(m1: GaussianMode, m2: GaussianMode) -> float:
    """Squared Wasserstein-2 between two Gaussians:
    ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)."""
    if m1.dim != m2.dim:
        raise DataError(f"mode dimensions differ: {m1.dim} vs {m2.dim}")
    if np.array_equal(m1.mean, m2.mean) and np.array_equal(m1.cov, m2.cov):
        return 0.0  # identical modes cost exactly zero, no roundoff
    delta = m1.mean - m2.mean
    s1_root = sqrt_psd(m1.cov)
    cross = sqrt_psd(s1_root @ m2.cov @ s1_root)
    value = float(delta @ delta + np.trace(m1.cov) + np.trace(m2.cov) - 2.0 * np.trace(cross))
    if value < 0:
        if value < _NEG_CLAMP * max(1.0, abs(float(np.trace(m1.cov) + np.trace(m2.cov)))):
            raise ScoringError(f"gaussian W2 cost is significantly negative: {value}")
        value = 0.0
    return value


def cost_matrix(g1: GmmPrediction, g2: GmmPrediction) -> np.ndarray:
    """Pairwise Gaussian W2 costs, sharing each left mode's root."""
    if g1.dim != g2.dim:
        raise DataError(f"mixture dimensions differ: {g1.dim} vs {g2.dim}")
    roots = [sqrt_psd(m.cov) for m in g1.modes]
    M = np.empty((len(g1.modes), len(g2.modes)))
    for i, (m1, root) in enumerate(zip(g1.modes, roots)):
        for j, m2 in enumerate(g2.modes):
            if np.array_equal(m1.mean, m2.mean) and np.array_equal(m1.cov, m2.cov):
                M[i, j] = 0.0  # identical modes cost exactly zero
                continue
            delta = m1.mean - m2.mean
            cross = sqrt_psd(root @ m2.cov @ root)
            value = float(
                delta @ delta + np.trace(m1.cov) + np.trace(m2.cov) - 2.0 * np.trace(cross)
            )
            M[i, j] = max(value, 0.0)
    return M


def w2_gmm(g1: GmmPrediction, g2: GmmPrediction) -> float:
    """Optimal-transport W2 between mixtures, on the squared scale."""
    plan = w2_plan(g1, g2)
    return plan.objective


def w2_plan(g1: GmmPrediction, g2: GmmPrediction) -> TransportPlan:
    M = cost_matrix(g1, g2)
    return solve_transport(M, g1.weights(), g2.weights())


def w2_gmm_distance(g1: GmmPrediction, g2: GmmPrediction) -> float:
    """Square root of w2_gmm, for distance-scale reporting."""
    return math.sqrt(max(w2_gmm(g1, g2), 0.0))


@dataclass
class KldEstimate:
    value: float
    n_samples: int
    underflow_count: int  # samples where the reference density vanished


def _log_density_batch(g: GmmPrediction, x: np.ndarray) -> np.ndarray:
    """(N,) log mixture density at each row of x, via log-sum-exp."""
    n = x.shape[0]
    terms = np.full((len(g.modes), n), -np.inf)
    for k, m in enumerate(g.modes):
        if m.weight <= 0:
            continue
        sign, logdet = np.linalg.slogdet(m.cov)
        if sign <= 0:
            raise ScoringError(
                "KLD needs strictly positive-definite covariances; "
                f"a mode of agent {g.agent_id!r} is singular"
            )
        inv = np.linalg.inv(m.cov)
        diff = x - m.mean
        q = np.einsum("ni,ij,nj->n", diff, inv, diff)
        log_norm = -0.5 * (m.dim * math.log(2.0 * math.pi) + logdet)
        terms[k] = math.log(m.weight) + log_norm - 0.5 * q
    peak = terms.max(axis=0)
    out = np.full(n, -np.inf)
    finite = np.isfinite(peak)
    if np.any(finite):
        shifted = np.exp(terms[:, finite] - peak[finite])
        out[finite] = peak[finite] + np.log(shifted.sum(axis=0))
    return out


def kld_gmm_detailed(
    g1: GmmPrediction, g2: GmmPrediction, n_samples: int = 2000, seed: int = 0
) -> KldEstimate:
    """Monte-Carlo KL(g1 || g2) with samples drawn from g1."""
    if n_samples < 1:
        raise DataError(f"n_samples must be >= 1, got {n_samples}")
    if g1.dim != g2.dim:
        raise DataError(f"mixture dimensions differ: {g1.dim} vs {g2.dim}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(g1.modes), size=n_samples, p=g1.weights())
    z = rng.standard_normal((n_samples, g1.dim))
    x = np.empty_like(z)
    for k, m in enumerate(g1.modes):
        mask = picks == k
        if not np.any(mask):
            continue
        w, V = np.linalg.eigh((m.cov + m.cov.T) / 2.0)
        transform = V * np.sqrt(np.clip(w, 0.0, None))
        x[mask] = m.mean + z[mask] @ transform.T
    lp1 = _log_density_batch(g1, x)
    lp2 = _log_density_batch(g2, x)
    underflow = int(np.sum(lp2 == -np.inf))
    if underflow:
        return KldEstimate(value=math.inf, n_samples=n_samples, underflow_count=underflow)
    diffs = lp1 - lp2
    return KldEstimate(value=float(diffs.sum() / n_samples), n_samples=n_samples, underflow_count=0)


def kld_gmm(g1: GmmPrediction, g2: GmmPrediction, n_samples: int = 2000, seed: int = 0) -> float:
    """Scalar Monte-Carlo KL(g1 || g2); may be negative from sampling noise
    and is returned unclamped."""
    return kld_gmm_detailed(g1, g2, n_samples, seed).value


def l2_topk(g1: GmmPrediction, g2: GmmPrediction, exponent: float = 0.5) -> float:
    """Mode-matched mean-distance sum.

    Modes are sorted by descending weight (stable on ties); the shorter
    mixture is padded by repeating its last sorted mode. Each matched pair
    contributes the Euclidean norm of the mean difference raised to
    ``exponent``.
    """
    if g1.dim != g2.dim:
        raise DataError(f"mixture dimensions differ: {g1.dim} vs {g2.dim}")
    a = _sorted_means(g1)
    b = _sorted_means(g2)
    K = max(len(a), len(b))
    while len(a) < K:
        a.append(a[-1])
    while len(b) < K:
        b.append(b[-1])
    total = 0.0
    for mu1, mu2 in zip(a, b):
        total += float(np.linalg.norm(mu1 - mu2)) ** exponent
    return total


def _sorted_means(g: GmmPrediction) -> list[np.ndarray]:
    order = sorted(range(len(g.modes)), key=lambda i: (-g.modes[i].weight, i))
    return [g.modes[i].mean for i in order]
