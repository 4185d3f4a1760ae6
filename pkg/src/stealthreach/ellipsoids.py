"""Origin-centered ellipsoid algebra.

An ellipsoid is represented by its shape matrix Q (symmetric PSD):
the set { x : x^T Q^-1 x <= 1 }, with degenerate directions collapsing
when Q is singular.  All operations are pure functions; Ellipsoid values
are immutable and safe to share between threads.
"""

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import (
    BothDegenerate,
    DimensionMismatch,
    EmptyTermList,
    NonSymmetric,
    NotPSD,
)

SYM_TOL = 1e-10
PSD_TOL = 1e-10
RANGE_TOL = 1e-9


def _check_symmetric(M: np.ndarray, tol: float = SYM_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected square matrix, got shape {M.shape}")
    if np.max(np.abs(M - M.T)) > tol:
        raise NonSymmetric(f"asymmetry {np.max(np.abs(M - M.T)):.3e} exceeds {tol:.1e}")
    return (M + M.T) / 2.0


def sym_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via spectral decomposition.

    Eigenvalues in [-1e-10, 0) are treated as round-off and clamped to 0;
    anything more negative raises NotPSD.
    """
    M = _check_symmetric(M)
    w, V = np.linalg.eigh(M)
    if w[0] < -PSD_TOL:
        raise NotPSD(f"eigenvalue {w[0]:.3e} below -{PSD_TOL:.1e}")
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.T
    return (S + S.T) / 2.0


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n: pi^(n/2) / Gamma(n/2 + 1)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class Ellipsoid:
    """Origin-centered ellipsoid { x : x^T Q^-1 x <= 1 } with shape matrix Q."""

    Q: np.ndarray

    def __post_init__(self):
        Q = _check_symmetric(self.Q)
        w = np.linalg.eigvalsh(Q)
        if w[0] < -PSD_TOL:
            raise NotPSD(f"eigenvalue {w[0]:.3e} below -{PSD_TOL:.1e}")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def zero(cls, n: int) -> "Ellipsoid":
        return cls(np.zeros((n, n)))

    @classmethod
    def ball(cls, radius: float, n: int) -> "Ellipsoid":
        return cls(radius * radius * np.eye(n))

    @property
    def volume(self) -> float:
        return volume(self)

    def is_degenerate(self, rel: float = 1e-12) -> bool:
        w = np.linalg.eigvalsh(self.Q)
        return w[0] <= rel * max(w[-1], 0.0)

    def membership(self, x: np.ndarray) -> float:
        """Quadratic membership value x^T Q^+ x; inf when x leaves range(Q)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"point dim {x.shape[-1]} vs ellipsoid dim {self.dim}")
        w, V = np.linalg.eigh(self.Q)
        cutoff = max(w[-1], 0.0) * 1e-12
        live = w > cutoff
        proj = x @ V
        m = np.zeros(x.shape[0])
        if live.any():
            m += np.sum(proj[:, live] ** 2 / w[live], axis=1)
        if (~live).any():
            resid = np.sqrt(np.sum(proj[:, ~live] ** 2, axis=1))
            norms = np.linalg.norm(x, axis=1)
            m = np.where(resid > RANGE_TOL * (1.0 + norms), np.inf, m)
        return m if m.shape[0] > 1 else float(m[0])

    def boundary_points(self, num: int = 200) -> np.ndarray:
        """Points on the boundary (2-D only), for plotting."""
        if self.dim != 2:
            raise DimensionMismatch("boundary_points is 2-D only")
        theta = np.linspace(0.0, 2.0 * math.pi, num)
        circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return circle @ sym_sqrt(self.Q).T

    def to_dict(self) -> dict:
        return {"dim": self.dim, "Q": self.Q.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Ellipsoid":
        Q = np.asarray(d["Q"], dtype=float)
        if Q.shape != (d["dim"], d["dim"]):
            raise DimensionMismatch(f"Q shape {Q.shape} vs declared dim {d['dim']}")
        return cls(Q)


def linear_image(E: Ellipsoid, M: np.ndarray) -> Ellipsoid:
    """Image of E under x -> M x, an ellipsoid with shape M Q M^T."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[1] != E.dim:
        raise DimensionMismatch(f"map shape {M.shape} vs ellipsoid dim {E.dim}")
    Q = M @ E.Q @ M.T
    return Ellipsoid((Q + Q.T) / 2.0)


def volume(E: Ellipsoid) -> float:
    """unit-ball-volume(n) * sqrt(det Q); zero for singular Q."""
    sign, logdet = np.linalg.slogdet(E.Q)
    if sign <= 0:
        return 0.0
    return unit_ball_volume(E.dim) * math.exp(0.5 * logdet)


def contains(E: Ellipsoid, x: np.ndarray, slack: float = 0.0) -> bool:
    """Membership test x^T Q^+ x <= 1 + slack, with range check for singular Q."""
    m = E.membership(np.asarray(x, dtype=float))
    if np.ndim(m) > 0:
        raise DimensionMismatch("contains expects a single point; use membership for batches")
    return bool(m <= 1.0 + slack)


def _logdet_or_inf(Q: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(Q)
    return logdet if sign > 0 else math.inf


def _pair_shape(Q1: np.ndarray, Q2: np.ndarray, beta_reltol: float) -> np.ndarray:
    """Minimum-volume member of Q(beta) = (1+1/beta) Q1 + (1+beta) Q2, beta > 0.

    Golden section on log det localizes the minimum; because the objective is
    flat there, value comparisons bottom out near sqrt(eps), so a bisection on
    the analytic derivative polishes beta to full precision (the optimum must
    agree under operand swap, which maps beta to 1/beta).
    """

    def shape_at(b: float) -> np.ndarray:
        return (1.0 + 1.0 / b) * Q1 + (1.0 + b) * Q2

    def f(log_beta: float) -> float:
        return _logdet_or_inf(shape_at(math.exp(log_beta)))

    def dfdlog(log_beta: float) -> float:
        b = math.exp(log_beta)
        Q = shape_at(b)
        try:
            Qinv = np.linalg.inv(Q)
        except np.linalg.LinAlgError:
            return math.nan
        return float(np.trace(Qinv @ (b * Q2 - Q1 / b)))

    lo, hi = math.log(1e-9), math.log(1e9)
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - gr * (hi - lo)
    d = lo + gr * (hi - lo)
    fc, fd = f(c), f(d)
    while (hi - lo) > max(beta_reltol, 1e-7):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - gr * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + gr * (hi - lo)
            fd = f(d)
    # derivative bisection in a window around the golden bracket
    blo, bhi = lo - 1e-5, hi + 1e-5
    glo, ghi = dfdlog(blo), dfdlog(bhi)
    if math.isfinite(glo) and math.isfinite(ghi) and glo < 0.0 < ghi:
        for _ in range(80):
            mid = 0.5 * (blo + bhi)
            if not blo < mid < bhi:  # bracket at float resolution
                break
            gm = dfdlog(mid)
            if not math.isfinite(gm):
                break
            if gm < 0.0:
                blo = mid
            else:
                bhi = mid
        lo, hi = blo, bhi
    b = math.exp(0.5 * (lo + hi))
    Q = shape_at(b)
    return (Q + Q.T) / 2.0


def minkowski_sum_pair(E1: Ellipsoid, E2: Ellipsoid, strict: bool = False) -> Ellipsoid:
    """Minimum-volume outer ellipsoid of the Minkowski sum of two ellipsoids.

    Searches the classical parametric family (1+1/beta) Q1 + (1+beta) Q2 by
    golden section on log det; every member is a superset of the true sum.
    A zero summand acts as the identity.  Both summands zero returns the
    zero ellipsoid unless strict=True.
    """
    if E1.dim != E2.dim:
        raise DimensionMismatch(f"dims {E1.dim} vs {E2.dim}")
    t1, t2 = float(np.trace(E1.Q)), float(np.trace(E2.Q))
    if t1 <= 0.0 and t2 <= 0.0:
        if strict:
            raise BothDegenerate("both summands are zero ellipsoids")
        return Ellipsoid.zero(E1.dim)
    if t1 <= 0.0:
        return E2
    if t2 <= 0.0:
        return E1
    return Ellipsoid(_pair_shape(E1.Q, E2.Q, beta_reltol=1e-12))


def _fan_directions(n: int, count: int | None) -> np.ndarray:
    """Unit direction fan: 72 half-circle directions for n=2, 2n^2 otherwise."""
    if n == 2:
        count = 72 if count is None else count
        theta = np.arange(count) * math.pi / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    count = 2 * n * n if count is None else count
    dirs = [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros(n)
            e[i] = e[j] = 1.0
            dirs.append(e / math.sqrt(2.0))
            e2 = np.zeros(n)
            e2[i], e2[j] = 1.0, -1.0
            dirs.append(e2 / math.sqrt(2.0))
    rng = np.random.Generator(np.random.Philox(key=12345))
    while len(dirs) < count:
        g = rng.standard_normal(n)
        dirs.append(g / np.linalg.norm(g))
    return np.asarray(dirs[:count])


def _weighted_shape(Qs: list[np.ndarray], w: np.ndarray) -> np.ndarray:
    Q = sum(Qi / wi for Qi, wi in zip(Qs, w))
    return (Q + Q.T) / 2.0


def _refine_weights(Qs: list[np.ndarray], w: np.ndarray, iters: int = 500) -> np.ndarray | None:
    """Fixed-point polish of the simplex weights toward min log det sum(Q_i/w_i).

    Stationarity requires w_i proportional to sqrt(tr(Q(w)^-1 Q_i)); iterating
    that map converges rapidly and every iterate stays a valid outer bound.
    """
    w = np.maximum(w, 1e-150)
    w = w / w.sum()
    for _ in range(iters):
        Qc = _weighted_shape(Qs, w)
        try:
            Qinv = np.linalg.inv(Qc)
        except np.linalg.LinAlgError:
            return None
        traces = np.array([max(float(np.trace(Qinv @ Qi)), 0.0) for Qi in Qs])
        if not np.all(np.isfinite(traces)):
            return None
        w_new = np.sqrt(np.maximum(traces, 1e-300))
        w_new /= w_new.sum()
        if np.max(np.abs(w_new - w)) < 1e-14:
            return w_new
        w = w_new
    return w


def minkowski_sum_many(
    terms: list[Ellipsoid],
    strategy: str = "best",
    directions: int | None = None,
) -> Ellipsoid:
    """Outer ellipsoid of an N-fold Minkowski sum.

    Candidates all come from the guaranteed-outer weighted family
    Q(w) = sum_i Q_i / w_i with simplex weights w:

    * direction fan: for each unit l the support-tight weights
      w_i = sqrt(l^T Q_i l) / sum_j sqrt(l^T Q_j l), with near-degenerate
      terms floored at 1e-14 of the largest to avoid division blow-up;
    * weight polish: fixed-point refinement of the best fan weights;
    * pairwise fold: sequential minkowski_sum_pair over the list.

    strategy="fan" or "pairwise" selects a single candidate; "best"
    (default) returns the minimum-volume of all of them, so the result is
    never worse than the pairwise fold.
    """
    if not terms:
        raise EmptyTermList("minkowski_sum_many needs at least one term")
    n = terms[0].dim
    for E in terms:
        if E.dim != n:
            raise DimensionMismatch(f"mixed dims {n} and {E.dim}")
    live = [E for E in terms if float(np.trace(E.Q)) > 0.0]
    if not live:
        return Ellipsoid.zero(n)
    if len(live) == 1:
        return live[0]
    if strategy == "pairwise":
        return reduce(minkowski_sum_pair, live)

    Qs = [E.Q for E in live]
    best_logdet = math.inf
    best_Q = None
    best_w = None
    for l in _fan_directions(n, directions):
        s = np.sqrt(np.maximum(np.array([l @ Qi @ l for Qi in Qs]), 0.0))
        if s.max() <= 0.0:  # every term flat along l: no usable weights
            continue
        s = np.maximum(s, 1e-14 * s.max())
        w = s / s.sum()
        Qc = _weighted_shape(Qs, w)
        ld = _logdet_or_inf(Qc)
        if ld < best_logdet:
            best_logdet, best_Q, best_w = ld, Qc, w
    if best_Q is None:  # every candidate singular: sum is degenerate
        best_Q = _weighted_shape(Qs, np.full(len(Qs), 1.0 / len(Qs)))

    if strategy == "best":
        if best_w is not None:
            w = _refine_weights(Qs, best_w)
            if w is not None:
                Qc = _weighted_shape(Qs, w)
                if _logdet_or_inf(Qc) < best_logdet:
                    best_logdet, best_Q = _logdet_or_inf(Qc), Qc
        folded = reduce(minkowski_sum_pair, live)
        if _logdet_or_inf(folded.Q) < best_logdet:
            return folded
    return Ellipsoid(best_Q)
