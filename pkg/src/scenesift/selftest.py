"""Analytic checks for the shift measures, runnable from the CLI.

Each check has a closed-form expected value, so a failure means the
numerics are broken rather than that an input was unusual.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .prediction import GaussianMode, GmmPrediction
from .shift import gaussian_w2_cost, kld_gmm, l2_topk, w2_gmm
from .transport import solve_transport


def _mode(weight: float, mean, cov) -> GaussianMode:
    return GaussianMode(weight=weight, mean=np.asarray(mean, dtype=float),
                        cov=np.asarray(cov, dtype=float))


def _gmm(modes: list[GaussianMode]) -> GmmPrediction:
    return GmmPrediction(agent_id="self-test", modes=modes)


def _random_gmm(rng: np.random.Generator, k: int, dim: int) -> GmmPrediction:
    weights = rng.random(k) + 0.1
    weights /= weights.sum()
    modes = []
    for w in weights:
        a = rng.standard_normal((dim, dim))
        modes.append(_mode(float(w), rng.standard_normal(dim) * 3.0, a @ a.T + np.eye(dim)))
    return _gmm(modes)


def _checks() -> list[tuple[str, Callable[[], None]]]:
    def unit_cost() -> None:
        m1 = _mode(1.0, [0.0, 0.0], np.eye(2))
        m2 = _mode(1.0, [3.0, 4.0], np.eye(2))
        assert abs(gaussian_w2_cost(m1, m2) - 25.0) < 1e-9

    def diagonal_cost() -> None:
        m1 = _mode(1.0, [0.0, 0.0], np.diag([4.0, 1.0]))
        m2 = _mode(1.0, [0.0, 0.0], np.diag([1.0, 1.0]))
        assert abs(gaussian_w2_cost(m1, m2) - 1.0) < 1e-9

    def self_distance() -> None:
        rng = np.random.default_rng(11)
        for _ in range(20):
            g = _random_gmm(rng, int(rng.integers(1, 5)), int(rng.integers(2, 8)))
            assert w2_gmm(g, g) == 0.0

    def symmetry() -> None:
        rng = np.random.default_rng(12)
        for _ in range(20):
            dim = int(rng.integers(2, 6))
            g1 = _random_gmm(rng, int(rng.integers(1, 4)), dim)
            g2 = _random_gmm(rng, int(rng.integers(1, 4)), dim)
            assert abs(w2_gmm(g1, g2) - w2_gmm(g2, g1)) < 1e-8

    def transport_marginals() -> None:
        rng = np.random.default_rng(13)
        for _ in range(50):
            m, n = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            cost = rng.random((m, n))
            p = rng.random(m) + 0.1
            q = rng.random(n) + 0.1
            pi1, pi2 = p / p.sum(), q / q.sum()
            plan = solve_transport(cost, pi1, pi2)
            row_err, col_err = plan.residuals(pi1, pi2)
            assert max(row_err, col_err) < 1e-8

    def kld_analytic() -> None:
        # KL(N(0,1) || N(1,1)) = 1/2 in nats.
        g1 = _gmm([_mode(1.0, [0.0], [[1.0]])])
        g2 = _gmm([_mode(1.0, [1.0], [[1.0]])])
        n = 50_000
        estimate = kld_gmm(g1, g2, n_samples=n, seed=5)
        se = math.sqrt(0.5 / n)  # variance of the log-ratio is delta^2 = 1
        assert abs(estimate - 0.5) < 4.0 * se + 1e-3

    def kld_self() -> None:
        rng = np.random.default_rng(14)
        g = _random_gmm(rng, 3, 4)
        assert kld_gmm(g, g, n_samples=500, seed=6) == 0.0

    def l2_literal() -> None:
        g1 = _gmm([_mode(1.0, [0.0, 0.0], np.eye(2))])
        g2 = _gmm([_mode(1.0, [7.0, 24.0], np.eye(2))])
        assert abs(l2_topk(g1, g2) - 5.0) < 1e-12

    return [
        ("gaussian-cost-unit-covariance", unit_cost),
        ("gaussian-cost-commuting-diagonals", diagonal_cost),
        ("mixture-self-distance-zero", self_distance),
        ("mixture-distance-symmetry", symmetry),
        ("transport-marginal-feasibility", transport_marginals),
        ("sampled-divergence-analytic-gaussian", kld_analytic),
        ("sampled-divergence-self-zero", kld_self),
        ("mean-shift-literal", l2_literal),
    ]


def run_self_test(echo: Callable[[str], None] = print) -> int:
    """Run every check; returns the number of failures."""
    failures = 0
    for name, check in _checks():
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - report and keep going
            failures += 1
            echo(f"FAIL {name}: {exc}")
        else:
            echo(f"PASS {name}")
    return failures
