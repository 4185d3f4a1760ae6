"""Convex-optimization outer bounds via a log-det semidefinite program.

For a stable recursion xi' = A xi + B mu with input constraint
mu^T R mu <= 1 and a decay scalar a in (0,1), any P > 0 satisfying the
block matrix inequality

    [[ a P - A^T P A ,  -A^T P B          ]
     [ -B^T P A      ,  (1-a) R - B^T P B ]]  >= 0

certifies the invariant ellipsoid { xi : xi^T P xi <= 1 }.  Minimizing
-log det P over that cone gives the minimum-volume certificate for the
given a; a one-dimensional outer search picks a.

The solver is a primal interior-point path follower: Newton steps on
t * (-log det P) - log det(block(P)) with t increased geometrically.
Every accepted solution is returned with its block-matrix minimum
eigenvalue so callers can re-verify feasibility independently.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ellipsoids import Ellipsoid
from .errors import AllInfeasible, DimensionMismatch, Infeasible, NoConvergence
from .plant import PlantModel, spectral_radius
from .reach_common import (
    METHOD_LMI,
    TARGET_ATTACK_ERROR,
    TARGET_ATTACK_STATE,
    TARGET_NOISE,
    ReachBound,
    total_state_bound,
)


@dataclass(frozen=True)
class LmiProblem:
    """One instance of the block-LMI volume minimization."""

    A: np.ndarray
    B: np.ndarray
    R: np.ndarray
    a: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        R = np.asarray(self.R, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"B has shape {B.shape}, expected ({A.shape[0]}, q)")
        if R.shape != (B.shape[1], B.shape[1]):
            raise DimensionMismatch(f"R has shape {R.shape}, expected ({B.shape[1]}, {B.shape[1]})")
        if not 0.0 < self.a < 1.0:
            raise DimensionMismatch(f"decay scalar a must be in (0,1), got {self.a}")
        for name, arr in (("A", A), ("B", B), ("R", R)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def _sym_basis(n: int) -> list[np.ndarray]:
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = 1.0
            E[j, i] = 1.0
            basis.append(E)
    return basis


def _pack(P: np.ndarray, n: int) -> np.ndarray:
    return np.array([P[i, j] for i in range(n) for j in range(i, n)])


def _unpack(p: np.ndarray, n: int) -> np.ndarray:
    P = np.zeros((n, n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            P[i, j] = p[k]
            P[j, i] = p[k]
            k += 1
    return P


def block_matrix(P: np.ndarray, prob: LmiProblem) -> np.ndarray:
    A, B, R, a = prob.A, prob.B, prob.R, prob.a
    top = a * P - A.T @ P @ A
    off = -A.T @ P @ B
    bot = (1.0 - a) * R - B.T @ P @ B
    M = np.block([[top, off], [off.T, bot]])
    return (M + M.T) / 2.0


def _strictly_feasible_start(prob: LmiProblem) -> np.ndarray | None:
    """eps * W with a W - A^T W A = I, eps shrunk until strictly inside."""
    A = prob.A
    n = A.shape[0]
    lhs = prob.a * np.eye(n * n) - np.kron(A.T, A.T)
    try:
        Wv = np.linalg.solve(lhs, np.eye(n).reshape(-1))
    except np.linalg.LinAlgError:
        return None
    W = Wv.reshape(n, n)
    W = (W + W.T) / 2.0
    if np.linalg.eigvalsh(W)[0] <= 0.0:
        return None
    margin = 1e-10 * (1.0 + float(np.linalg.norm(prob.R)))
    eps = 1.0
    for _ in range(300):
        P0 = eps * W
        if (np.linalg.eigvalsh(block_matrix(P0, prob))[0] > margin
                and np.linalg.eigvalsh(P0)[0] > 0.0):
            return P0
        eps *= 0.5
    return None


def solve_logdet_sdp(prob: LmiProblem, gap_tol: float = 1e-10) -> tuple[np.ndarray, dict]:
    """Minimize -log det P over the block-LMI cone at fixed a.

    Returns (P, diagnostics) where diagnostics carries the re-verified
    block minimum eigenvalue and Newton iteration count.  Raises Infeasible
    when a <= rho(A)^2 (no P > 0 can satisfy the top-left block) or when no
    strictly feasible start exists.
    """
    rho2 = spectral_radius(prob.A) ** 2
    if prob.a <= rho2 + 1e-12:
        raise Infeasible(f"a={prob.a:.4f} <= rho(A)^2={rho2:.4f}")
    P0 = _strictly_feasible_start(prob)
    if P0 is None:
        raise Infeasible(f"no strictly feasible start found at a={prob.a:.4f}")

    n = prob.A.shape[0]
    q = prob.B.shape[1]
    basis = _sym_basis(n)
    mdim = len(basis)
    zero_R = LmiProblem(prob.A, prob.B, np.zeros_like(prob.R), prob.a)
    Mi = [block_matrix(E, zero_R) for E in basis]  # linear part of the block map

    def phi(pvec: np.ndarray, t: float) -> float:
        P = _unpack(pvec, n)
        try:
            np.linalg.cholesky(P)
            np.linalg.cholesky(block_matrix(P, prob))
        except np.linalg.LinAlgError:
            return math.inf
        _, ldP = np.linalg.slogdet(P)
        _, ldM = np.linalg.slogdet(block_matrix(P, prob))
        return -t * ldP - ldM

    pvec = _pack(P0, n)
    t = 1.0
    barrier_rows = n + (n + q)
    newton_iters = 0
    while barrier_rows / t > gap_tol:
        for _ in range(100):
            P = _unpack(pvec, n)
            Mb = block_matrix(P, prob)
            Pinv = np.linalg.inv(P)
            Minv = np.linalg.inv(Mb)
            PiE = [Pinv @ E for E in basis]
            MiM = [Minv @ M_ for M_ in Mi]
            grad = np.array(
                [-t * np.trace(PiE[i]) - np.trace(MiM[i]) for i in range(mdim)]
            )
            hess = np.empty((mdim, mdim))
            for i in range(mdim):
                for j in range(i, mdim):
                    hess[i, j] = t * np.trace(PiE[i] @ PiE[j]) + np.trace(MiM[i] @ MiM[j])
                    hess[j, i] = hess[i, j]
            try:
                step_dir = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                break
            decrement = float(-grad @ step_dir)
            if decrement / 2.0 < 1e-12:
                break
            f0 = phi(pvec, t)
            step = 1.0
            while step > 1e-14:
                trial = pvec + step * step_dir
                if phi(trial, t) < f0 - 0.25 * step * decrement:
                    pvec = trial
                    break
                step *= 0.5
            else:
                break
            newton_iters += 1
            if newton_iters > 5000:
                raise NoConvergence("interior-point Newton iteration cap exceeded")
        t *= 10.0

    P = _unpack(pvec, n)
    P = (P + P.T) / 2.0
    min_eig = float(np.linalg.eigvalsh(block_matrix(P, prob))[0])
    return P, {"lmi_min_eig": min_eig, "iterations": newton_iters, "a": prob.a}


def _neg_logdet(P: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(P)
    return -ld if sign > 0 else math.inf


def min_volume_over_a(A, B, R, target: str = "bound",
                      grid_step: float = 0.02, refine_reltol: float = 1e-3) -> ReachBound:
    """Outer search over the decay scalar: coarse grid then golden refinement.

    Grid points below rho(A)^2 are infeasible by construction and skipped
    silently; AllInfeasible is raised when nothing on the grid works.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    R = np.asarray(R, dtype=float)

    cache: dict[float, tuple[np.ndarray, dict] | None] = {}

    def solve_at(a: float):
        key = round(a, 12)
        if key not in cache:
            try:
                cache[key] = solve_logdet_sdp(LmiProblem(A, B, R, a))
            except Infeasible:
                cache[key] = None
        return cache[key]

    best_a, best_obj = None, math.inf
    grid = np.arange(grid_step, 1.0, grid_step)
    for a in grid:
        out = solve_at(float(a))
        if out is None:
            continue
        obj = _neg_logdet(out[0])
        if obj < best_obj:
            best_a, best_obj = float(a), obj
    if best_a is None:
        raise AllInfeasible("no feasible decay scalar on the grid")

    lo = max(best_a - grid_step, 1e-6)
    hi = min(best_a + grid_step, 1.0 - 1e-9)

    def objective(a: float) -> float:
        out = solve_at(a)
        return math.inf if out is None else _neg_logdet(out[0])

    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - gr * (hi - lo)
    d = lo + gr * (hi - lo)
    fc, fd = objective(c), objective(d)
    while (hi - lo) > refine_reltol * max(best_a, 1e-6):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - gr * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + gr * (hi - lo)
            fd = objective(d)
    candidates = [(objective(a), a) for a in (best_a, c, d) if math.isfinite(objective(a))]
    _, a_star = min(candidates)
    P, diag = solve_at(a_star)
    E = Ellipsoid(np.linalg.inv(P))
    return ReachBound(
        shape=E, method=METHOD_LMI, target=target, volume=E.volume,
        a_star=a_star, diagnostics=diag,
    )


def reach_bounds_lmi(model: PlantModel, alpha: float, vbar: float,
                     grid_step: float = 0.02):
    """The three invariant-ellipsoid bounds plus the total-state combination.

    Instances: (noise) A=F, B=I, R=R1^-1/vbar; (attack error) A=F,
    B=-L SigmaSqrt, R=I/alpha; (attack state) A=F+GK, B=-GK, with the
    attack-error solution as the input-constraint matrix.
    """
    n, p = model.n, model.p
    noise = min_volume_over_a(
        model.F, np.eye(n), np.linalg.inv(model.R1) / vbar,
        target=TARGET_NOISE, grid_step=grid_step,
    )
    att_err = min_volume_over_a(
        model.F, -model.L @ model.SigmaSqrt, np.eye(p) / alpha,
        target=TARGET_ATTACK_ERROR, grid_step=grid_step,
    )
    att_state = min_volume_over_a(
        model.closed_loop, -model.G @ model.K, att_err.quad_matrix,
        target=TARGET_ATTACK_STATE, grid_step=grid_step,
    )
    total = total_state_bound_lmi(noise, att_state)
    return noise, att_err, att_state, total


def total_state_bound_lmi(noise_bound: ReachBound, attack_bound: ReachBound) -> ReachBound:
    return total_state_bound(noise_bound, attack_bound, METHOD_LMI)
