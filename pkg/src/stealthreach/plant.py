"""Stochastic LTI plant, steady-state Kalman filter, and closed-loop simulation.

The model is x' = F x + G u + v, y = C x + eta, with static estimate
feedback u = K xhat and a steady-state filter xhat' = F xhat + G u + L r.
Sensor attacks enter additively on the measurement; the simulator also
integrates the noise/attack superposition split of the state and the
estimation error.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .ellipsoids import sym_sqrt
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NotDetectable,
    UnstableClosedLoop,
    UnstableF,
    UnstableFilter,
)
from .seeding import stream


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def _as_matrix(M, rows, cols, name):
    M = np.asarray(M, dtype=float)
    if M.shape != (rows, cols):
        raise DimensionMismatch(f"{name} has shape {M.shape}, expected ({rows}, {cols})")
    return M


def _pbh_detectable(F: np.ndarray, C: np.ndarray) -> bool:
    """PBH rank test on eigenvalues with modulus >= 1."""
    n = F.shape[0]
    for lam in np.linalg.eigvals(F):
        if abs(lam) >= 1.0 - 1e-10:
            test = np.vstack([lam * np.eye(n) - F, C.astype(complex)])
            if np.linalg.matrix_rank(test, tol=1e-10) < n:
                return False
    return True


class KalmanSolution(NamedTuple):
    P: np.ndarray
    L: np.ndarray
    residual: float
    iterations: int


def solve_steady_state_kalman(F, C, R1, R2, tol: float = 1e-12, max_iter: int = 100_000) -> KalmanSolution:
    """Steady-state predictor-form filter gain and error covariance.

    Iterates P <- F P F^T + R1 - F P C^T (C P C^T + R2)^+ C P F^T from
    P0 = R1 to the fixed point, then L = F P C^T (C P C^T + R2)^+.
    The final update size is returned as a diagnostic residual.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    p = np.asarray(C).shape[0]
    C = _as_matrix(C, p, n, "C")
    R1 = _as_matrix(R1, n, n, "R1")
    R2 = _as_matrix(R2, p, p, "R2")
    if not _pbh_detectable(F, C):
        raise NotDetectable("(F, C) fails the PBH detectability test")

    P = (R1 + R1.T) / 2.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        S = C @ P @ C.T + R2
        gain_term = F @ P @ C.T @ np.linalg.pinv(S, hermitian=True)
        P_next = F @ P @ F.T + R1 - gain_term @ C @ P @ F.T
        P_next = (P_next + P_next.T) / 2.0
        residual = float(np.max(np.abs(P_next - P)))
        P = P_next
        if residual <= tol:
            break
    else:
        raise NoConvergence(f"Riccati iteration residual {residual:.3e} after {max_iter} iterations")
    S = C @ P @ C.T + R2
    L = F @ P @ C.T @ np.linalg.pinv(S, hermitian=True)
    return KalmanSolution(P=P, L=L, residual=residual, iterations=it)


@dataclass(frozen=True)
class PlantModel:
    """Validated plant + filter + controller with derived covariances.

    Stability requirements: rho(F) < 1, rho(F + G K) < 1, rho(F - L C) < 1.
    Sigma is the steady-state residual covariance C P C^T + R2 from the
    Riccati fixed point (even when the observer gain is user-supplied;
    the gap to the optimal gain is reported in diagnostics, not an error).
    """

    F: np.ndarray
    G: np.ndarray
    C: np.ndarray
    K: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    L: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    SigmaSqrt: np.ndarray
    SigmaInv: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("F", "G", "C", "K", "R1", "R2", "L", "P", "Sigma", "SigmaSqrt", "SigmaInv"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def closed_loop(self) -> np.ndarray:
        return self.F + self.G @ self.K

    @property
    def filter_matrix(self) -> np.ndarray:
        return self.F - self.L @ self.C


def build_model(F, G, C, K, R1, R2, L=None) -> PlantModel:
    """Validate matrices, solve the filter Riccati equation, derive Sigma.

    When L is omitted it is the optimal steady-state gain; a supplied L is
    used in the dynamics while P and Sigma still come from the Riccati
    fixed point (discrepancy reported as diagnostics['gain_gap']).
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise DimensionMismatch(f"F must be square, got {F.shape}")
    n = F.shape[0]
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != n:
        raise DimensionMismatch(f"G has shape {G.shape}, expected ({n}, m)")
    m = G.shape[1]
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[1] != n:
        raise DimensionMismatch(f"C has shape {C.shape}, expected (p, {n})")
    p = C.shape[0]
    K = _as_matrix(K, m, n, "K")
    R1 = _as_matrix(R1, n, n, "R1")
    R2 = _as_matrix(R2, p, p, "R2")

    rho_f = spectral_radius(F)
    if rho_f >= 1.0:
        raise UnstableF(f"spectral radius of F is {rho_f:.4f} >= 1")
    rho_cl = spectral_radius(F + G @ K)
    if rho_cl >= 1.0:
        raise UnstableClosedLoop(f"spectral radius of F + G K is {rho_cl:.4f} >= 1")

    sol = solve_steady_state_kalman(F, C, R1, R2)
    gain_gap = 0.0
    if L is None:
        L_used = sol.L
    else:
        L_used = _as_matrix(L, n, p, "L")
        gain_gap = float(np.max(np.abs(L_used - sol.L)))
    rho_filt = spectral_radius(F - L_used @ C)
    if rho_filt >= 1.0:
        raise UnstableFilter(f"spectral radius of F - L C is {rho_filt:.4f} >= 1")

    Sigma = C @ sol.P @ C.T + R2
    Sigma = (Sigma + Sigma.T) / 2.0
    eigmin = float(np.linalg.eigvalsh(Sigma)[0])
    if eigmin > 0.0:
        SigmaInv = np.linalg.inv(Sigma)
    else:
        SigmaInv = np.linalg.pinv(Sigma, hermitian=True)
    return PlantModel(
        F=F, G=G, C=C, K=K, R1=R1, R2=R2, L=L_used, P=sol.P,
        Sigma=Sigma, SigmaSqrt=sym_sqrt(Sigma), SigmaInv=SigmaInv,
        diagnostics={
            "riccati_residual": sol.residual,
            "riccati_iterations": sol.iterations,
            "gain_gap": gain_gap,
            "rho_F": rho_f,
            "rho_closed_loop": rho_cl,
            "rho_filter": rho_filt,
        },
    )


@dataclass(frozen=True)
class SimConfig:
    """Simulation run shape: horizon steps 1..N, attack from step k*.

    attack_start=None means attack-free.  With truncate_noise=True the
    system-noise draws are rejection-sampled to v^T R1^-1 v <= vbar.
    """

    horizon: int
    attack_start: int | None = None
    master_seed: int = 0
    trials: int = 1
    initial_state: np.ndarray | None = None
    truncate_noise: bool = False
    vbar: float | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DimensionMismatch(f"horizon must be >= 1, got {self.horizon}")
        if self.trials < 1:
            raise DimensionMismatch(f"trials must be >= 1, got {self.trials}")
        if self.attack_start is not None and not 1 <= self.attack_start <= self.horizon:
            raise DimensionMismatch(
                f"attack_start must be in [1, {self.horizon}] or None, got {self.attack_start}"
            )
        if self.truncate_noise and (self.vbar is None or self.vbar <= 0.0):
            raise DimensionMismatch("truncate_noise=True requires a positive vbar")


@dataclass(frozen=True)
class SimTrace:
    """Per-step record of one batch of simulated trials.

    Arrays are (trials, horizon, dim) for vectors and (trials, horizon) for
    scalars; step index k runs 1..horizon.  Pre-attack rows have delta = 0
    and carry the whole state in the noise-driven columns (x_v = x, e_v = e,
    x_delta = e_delta = 0); from k* onward the four split recursions are
    integrated alongside the true dynamics.
    """

    x: np.ndarray
    xhat: np.ndarray
    e: np.ndarray
    r: np.ndarray
    z: np.ndarray
    alarm: np.ndarray
    delta: np.ndarray
    delta_bar: np.ndarray | None
    x_v: np.ndarray
    x_delta: np.ndarray
    e_v: np.ndarray
    e_delta: np.ndarray
    attack_start: int | None
    alpha: float | None

    @property
    def trials(self) -> int:
        return self.x.shape[0]

    @property
    def horizon(self) -> int:
        return self.x.shape[1]

    def attacked_slice(self) -> slice:
        """Column slice of the attacked steps (empty when attack-free)."""
        if self.attack_start is None:
            return slice(self.horizon, self.horizon)
        return slice(self.attack_start - 1, self.horizon)

    def alarm_rate(self, attacked_only: bool = False) -> float:
        cols = self.attacked_slice() if attacked_only else slice(None)
        block = self.alarm[:, cols]
        return float(block.mean()) if block.size else 0.0

    def to_csv(self, path, metadata: dict | None = None) -> None:
        """Write rows trial,k,x*,e*,xv*,xd*,z,alarm,d* (metadata as # comments)."""
        n = self.x.shape[2]
        p = self.r.shape[2]
        header = (
            ["trial", "k"]
            + [f"x{i+1}" for i in range(n)]
            + [f"e{i+1}" for i in range(n)]
            + [f"xv{i+1}" for i in range(n)]
            + [f"xd{i+1}" for i in range(n)]
            + ["z", "alarm"]
            + [f"d{i+1}" for i in range(p)]
        )
        with open(path, "w") as fh:
            for key, value in (metadata or {}).items():
                fh.write(f"# {key}={value}\n")
            fh.write(",".join(header) + "\n")
            for t in range(self.trials):
                for k in range(self.horizon):
                    row = (
                        [str(t), str(k + 1)]
                        + [f"{v:.17g}" for v in self.x[t, k]]
                        + [f"{v:.17g}" for v in self.e[t, k]]
                        + [f"{v:.17g}" for v in self.x_v[t, k]]
                        + [f"{v:.17g}" for v in self.x_delta[t, k]]
                        + [f"{self.z[t, k]:.17g}", str(int(self.alarm[t, k]))]
                        + [f"{v:.17g}" for v in self.delta[t, k]]
                    )
                    fh.write(",".join(row) + "\n")


def _draw_system_noise(rng, count, chol, vbar):
    """Standard-normal block mapped through chol(R1), rejection-truncated in
    whitened coordinates where the quadratic form is exactly the squared norm."""
    n = chol.shape[0]
    zed = rng.standard_normal((count, n))
    if vbar is not None:
        bad = np.einsum("ij,ij->i", zed, zed) > vbar
        while bad.any():
            zed[bad] = rng.standard_normal((int(bad.sum()), n))
            bad = np.einsum("ij,ij->i", zed, zed) > vbar
    return zed @ chol.T


def _chol_or_zero(M):
    if np.max(np.abs(M)) == 0.0:
        return None
    return np.linalg.cholesky(M)


def simulate(model: PlantModel, cfg: SimConfig, attack=None, alpha: float | None = None) -> SimTrace:
    """Run cfg.trials closed-loop trajectories, attack injected from k*.

    Each trial consumes its own counter-based stream keyed by
    (master_seed, trial): first the system-noise block (with rejection
    redraw rounds when truncated), then the measurement-noise block, then
    the attack magnitude/direction block.  Output is therefore bit-identical
    for a given (model, cfg, attack) regardless of how trials are scheduled.

    When an attack policy is given, the injected sensor attack is
    delta = -C e - eta + SigmaSqrt @ dbar with dbar drawn from the policy.
    """
    n, p = model.n, model.p
    T, N = cfg.trials, cfg.horizon
    kstar = cfg.attack_start if attack is not None else None
    if attack is not None and cfg.attack_start is None:
        raise DimensionMismatch("attack policy given but cfg.attack_start is None")

    x0 = np.zeros(n) if cfg.initial_state is None else np.asarray(cfg.initial_state, dtype=float)
    if x0.shape != (n,):
        raise DimensionMismatch(f"initial_state has shape {x0.shape}, expected ({n},)")

    chol_r1 = _chol_or_zero(model.R1)
    chol_r2 = _chol_or_zero(model.R2)
    vbar = cfg.vbar if cfg.truncate_noise else None
    n_att = 0 if kstar is None else N - kstar + 1

    vs = np.zeros((T, N, n))
    etas = np.zeros((T, N, p))
    dbars = np.zeros((T, n_att, p)) if n_att else None
    for t in range(T):
        rng = stream(cfg.master_seed, t)
        if chol_r1 is not None:
            vs[t] = _draw_system_noise(rng, N, chol_r1, vbar)
        if chol_r2 is not None:
            etas[t] = rng.standard_normal((N, p)) @ chol_r2.T
        if n_att:
            dbars[t] = attack.sample_block(rng, n_att)

    F_T, G_T, C_T, K_T, L_T = model.F.T, model.G.T, model.C.T, model.K.T, model.L.T
    Acl_T = model.closed_loop.T
    GK_T = (model.G @ model.K).T
    LS_T = (model.L @ model.SigmaSqrt).T
    S_T = model.SigmaSqrt.T
    SigInv = model.SigmaInv

    out = {
        name: np.zeros((T, N, n))
        for name in ("x", "xhat", "e", "x_v", "x_delta", "e_v", "e_delta")
    }
    r_out = np.zeros((T, N, p))
    delta_out = np.zeros((T, N, p))
    z_out = np.zeros((T, N))
    alarm_out = np.zeros((T, N), dtype=bool)
    dbar_out = np.zeros((T, N, p)) if n_att else None

    x = np.tile(x0, (T, 1))
    xhat = x.copy()
    xv = ev = xd = ed = None
    for k in range(1, N + 1):
        i = k - 1
        eta_k = etas[:, i]
        v_k = vs[:, i]
        e = x - xhat
        attacked = kstar is not None and k >= kstar
        if attacked and k == kstar:
            xv, ev = x.copy(), e.copy()
            xd, ed = np.zeros((T, n)), np.zeros((T, n))
        if attacked:
            dbar_k = dbars[:, k - kstar]
            delta_k = -(e @ C_T) - eta_k + dbar_k @ S_T
            dbar_out[:, i] = dbar_k
        else:
            delta_k = np.zeros((T, p))
        r = e @ C_T + eta_k + delta_k
        z = np.einsum("ij,jk,ik->i", r, SigInv, r)

        out["x"][:, i] = x
        out["xhat"][:, i] = xhat
        out["e"][:, i] = e
        out["x_v"][:, i] = xv if attacked else x
        out["e_v"][:, i] = ev if attacked else e
        if attacked:
            out["x_delta"][:, i] = xd
            out["e_delta"][:, i] = ed
        r_out[:, i] = r
        delta_out[:, i] = delta_k
        z_out[:, i] = z
        if alpha is not None:
            alarm_out[:, i] = z > alpha

        u = xhat @ K_T
        x_next = x @ F_T + u @ G_T + v_k
        xhat_next = xhat @ F_T + u @ G_T + r @ L_T
        if attacked:
            ev_next = ev @ F_T + v_k
            ed_next = ed @ F_T - dbar_k @ LS_T
            xv_next = xv @ Acl_T - ev @ GK_T + v_k
            xd_next = xd @ Acl_T - ed @ GK_T
            xv, ev, xd, ed = xv_next, ev_next, xd_next, ed_next
        x, xhat = x_next, xhat_next

    return SimTrace(
        x=out["x"], xhat=out["xhat"], e=out["e"], r=r_out, z=z_out,
        alarm=alarm_out, delta=delta_out, delta_bar=dbar_out,
        x_v=out["x_v"], x_delta=out["x_delta"], e_v=out["e_v"], e_delta=out["e_delta"],
        attack_start=kstar, alpha=alpha,
    )
