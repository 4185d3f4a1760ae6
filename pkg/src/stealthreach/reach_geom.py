"""Geometric (Minkowski-sum) outer bounds on the attack/noise reachable sets.

Each driven recursion xi' = A xi + B mu with an ellipsoidally bounded input
unrolls into a sum of independent per-step ellipsoids E(A^k B Q0 B^T A^k^T);
the limit set is outer-approximated by truncating the series once the terms'
determinant and trace mass have both decayed below a relative tolerance and
fitting one ellipsoid around the finite Minkowski sum.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ellipsoids import Ellipsoid, minkowski_sum_many
from .errors import MaxTermsExceeded, UnstableClosedLoop, UnstableF
from .plant import PlantModel, spectral_radius
from .reach_common import (
    METHOD_GEOMETRIC,
    TARGET_ATTACK_ERROR,
    TARGET_ATTACK_STATE,
    TARGET_NOISE,
    ReachBound,
    total_state_bound,
)


@dataclass(frozen=True)
class GeomSumConfig:
    """Truncation rule for the limiting sums.

    Terms stop at the first index where both sqrt(det Q_k / det Q_first)
    and trace(Q_k)/trace(Q_first) fall below tail_tol; the trace guard
    matters because rank-deficient terms have zero determinant while still
    carrying mass.
    """

    tail_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.tail_tol < 1.0:
            raise ValueError(f"tail_tol must be in (0,1), got {self.tail_tol}")
        if self.max_terms < 1:
            raise ValueError(f"max_terms must be >= 1, got {self.max_terms}")


def _truncated_terms(term_at, cfg: GeomSumConfig) -> list[np.ndarray]:
    """Collect term_at(k) for k = 0.. until the decay rule fires."""
    first = term_at(0)
    d_ref = float(np.linalg.det(first))
    t_ref = float(np.trace(first))
    if t_ref <= 0.0:
        return [first]
    terms = [first]
    for k in range(1, cfg.max_terms):
        Qk = term_at(k)
        det_ratio = math.sqrt(max(float(np.linalg.det(Qk)), 0.0) / d_ref) if d_ref > 0.0 else 0.0
        trace_ratio = float(np.trace(Qk)) / t_ref
        if det_ratio < cfg.tail_tol and trace_ratio < cfg.tail_tol:
            return terms
        terms.append(Qk)
    raise MaxTermsExceeded(
        f"term decay rule not met within {cfg.max_terms} terms (tail_tol={cfg.tail_tol:g})"
    )


def _fold(terms: list[np.ndarray], method_target: str, diag: dict) -> ReachBound:
    E = minkowski_sum_many([Ellipsoid((Q + Q.T) / 2.0) for Q in terms])
    return ReachBound(
        shape=E,
        method=METHOD_GEOMETRIC,
        target=method_target,
        volume=E.volume,
        terms_used=len(terms),
        diagnostics=diag,
    )


def noise_terms(model: PlantModel, vbar: float, count: int) -> list[np.ndarray]:
    """First `count` terms vbar F^k R1 F^k^T (for convergence experiments)."""
    out, Fk = [], np.eye(model.n)
    for _ in range(count):
        out.append(vbar * Fk @ model.R1 @ Fk.T)
        Fk = model.F @ Fk
    return out


def noise_reach_geom(model: PlantModel, vbar: float, cfg: GeomSumConfig | None = None) -> ReachBound:
    """Outer bound of the truncated-noise reachable set (shared by state and
    estimation error, which follow the same recursion from zero)."""
    cfg = cfg or GeomSumConfig()
    if spectral_radius(model.F) >= 1.0:
        raise UnstableF("noise reach sum needs rho(F) < 1")
    powers = {0: np.eye(model.n)}

    def term(k):
        if k not in powers:
            powers[k] = model.F @ powers[k - 1]
        Fk = powers[k]
        return vbar * Fk @ model.R1 @ Fk.T

    return _fold(_truncated_terms(term, cfg), TARGET_NOISE, {"vbar": vbar})


def attack_error_reach_geom(model: PlantModel, alpha: float, cfg: GeomSumConfig | None = None) -> ReachBound:
    """Outer bound of the attack-driven estimation error: terms
    alpha F^k (L Sigma L^T) F^k^T."""
    cfg = cfg or GeomSumConfig()
    if spectral_radius(model.F) >= 1.0:
        raise UnstableF("attack error reach sum needs rho(F) < 1")
    core = model.L @ model.Sigma @ model.L.T
    powers = {0: np.eye(model.n)}

    def term(k):
        if k not in powers:
            powers[k] = model.F @ powers[k - 1]
        Fk = powers[k]
        return alpha * Fk @ core @ Fk.T

    return _fold(_truncated_terms(term, cfg), TARGET_ATTACK_ERROR, {"alpha": alpha})


def attack_state_terms(model: PlantModel, alpha: float, count: int) -> list[np.ndarray]:
    """First `count` terms alpha H_k L Sigma L^T H_k^T, H_k = Acl^k - F^k, k >= 1."""
    core = model.L @ model.Sigma @ model.L.T
    out = []
    Ak, Fk = np.eye(model.n), np.eye(model.n)
    for _ in range(count):
        Ak, Fk = model.closed_loop @ Ak, model.F @ Fk
        H = Ak - Fk
        out.append(alpha * H @ core @ H.T)
    return out


def attack_state_reach_geom(model: PlantModel, alpha: float, cfg: GeomSumConfig | None = None) -> ReachBound:
    """Outer bound of the attack-driven state: terms alpha H_k L Sigma L^T H_k^T
    with H_k = (F + G K)^k - F^k, starting at k = 1 where H_1 = G K."""
    cfg = cfg or GeomSumConfig()
    if spectral_radius(model.F) >= 1.0:
        raise UnstableF("attack state reach sum needs rho(F) < 1")
    if spectral_radius(model.closed_loop) >= 1.0:
        raise UnstableClosedLoop("attack state reach sum needs rho(F + G K) < 1")
    core = model.L @ model.Sigma @ model.L.T
    acl_powers = {1: model.closed_loop.copy()}
    f_powers = {1: model.F.copy()}

    def term(j):  # j = 0 maps to k = 1
        k = j + 1
        if k not in acl_powers:
            acl_powers[k] = model.closed_loop @ acl_powers[k - 1]
            f_powers[k] = model.F @ f_powers[k - 1]
        H = acl_powers[k] - f_powers[k]
        return alpha * H @ core @ H.T

    return _fold(_truncated_terms(term, cfg), TARGET_ATTACK_STATE, {"alpha": alpha})


def total_state_bound_geom(noise_bound: ReachBound, attack_bound: ReachBound) -> ReachBound:
    return total_state_bound(noise_bound, attack_bound, METHOD_GEOMETRIC)


def reach_bounds_geom(model: PlantModel, alpha: float, vbar: float,
                      cfg: GeomSumConfig | None = None):
    """All three geometric bounds plus the total-state combination."""
    noise = noise_reach_geom(model, vbar, cfg)
    att_err = attack_error_reach_geom(model, alpha, cfg)
    att_state = attack_state_reach_geom(model, alpha, cfg)
    total = total_state_bound_geom(noise, att_state)
    return noise, att_err, att_state, total
