"""State and adjoint integration, switching functions, optimality residuals.

Trajectories are integrated with the classical fourth-order Runge-Kutta
scheme on a grid that contains every control breakpoint, and are stored
together with one-sided node derivatives so that they can be evaluated
densely as piecewise cubic Hermite interpolants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .control import PiecewiseConstantControl
from .errors import ExpressionError, IntegrationError
from .expr import grad_x
from .polytope import inclusion_defect
from .problem import AffineProblem

DEFAULT_N = 4096
MERGE_TOL = 1e-15


# -------------------------------------------------------------------------- grids


def uniform_grid(T: float, N: int = DEFAULT_N) -> np.ndarray:
    if N < 1:
        raise ValueError("grid needs at least one interval")
    return np.linspace(0.0, float(T), int(N) + 1)


def make_grid(T: float, N: int = DEFAULT_N, breakpoints=(), base=None) -> np.ndarray:
    """Base nodes (uniform by default) augmented with the given breakpoints.

    Base nodes always survive; a breakpoint closer than ``MERGE_TOL * T`` to an
    existing node is absorbed by it.
    """
    nodes = uniform_grid(T, N) if base is None else np.asarray(base, dtype=float)
    extra = np.asarray(breakpoints, dtype=float).reshape(-1)
    if len(extra) == 0:
        return nodes
    merged = np.unique(np.concatenate([nodes, extra]))
    tol = MERGE_TOL * float(T)
    is_base = np.isin(merged, nodes)
    keep = np.ones(len(merged), dtype=bool)
    for i in range(1, len(merged)):
        if merged[i] - merged[i - 1] <= tol:
            # drop whichever is not a base node (prefer dropping the later one)
            if is_base[i] and not is_base[i - 1]:
                keep[i - 1] = False
            else:
                keep[i] = False
    return merged[keep]


# ------------------------------------------------------------------ grid functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-linear function of t, allowed to jump at grid nodes.

    ``left[i]`` is the value at ``t[i]+`` and ``right[i]`` the value at
    ``t[i+1]-`` for interval i.
    """

    t: np.ndarray  # (N+1,)
    left: np.ndarray  # (N, k)
    right: np.ndarray  # (N, k)

    @classmethod
    def from_nodes(cls, t, values) -> "GridFunction":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        return cls(np.asarray(t, dtype=float), values[:-1].copy(), values[1:].copy())

    @classmethod
    def constant(cls, t, c) -> "GridFunction":
        t = np.asarray(t, dtype=float)
        c = np.atleast_1d(np.asarray(c, dtype=float))
        vals = np.tile(c, (len(t) - 1, 1))
        return cls(t, vals, vals.copy())

    @classmethod
    def from_callable(cls, t, f: Callable) -> "GridFunction":
        """Sample ``f`` (vectorized in t, returning (K,) or (K, k)) at the nodes."""
        t = np.asarray(t, dtype=float)
        return cls.from_nodes(t, np.asarray(f(t), dtype=float))

    @property
    def dim(self) -> int:
        return self.left.shape[1]

    def _index(self, tq, side):
        tq = np.asarray(tq, dtype=float)
        if side == "right":
            i = np.searchsorted(self.t, tq, side="right") - 1
        else:
            i = np.searchsorted(self.t, tq, side="left") - 1
        return np.clip(i, 0, len(self.left) - 1)

    def __call__(self, tq, side: str = "right") -> np.ndarray:
        """Value at ``tq`` (scalar or array); ``side`` picks the limit at jumps."""
        tq_arr = np.asarray(tq, dtype=float)
        i = self._index(tq_arr, side)
        h = self.t[i + 1] - self.t[i]
        s = ((tq_arr - self.t[i]) / h)[..., None]
        return self.left[i] + s * (self.right[i] - self.left[i])

    def resample(self, t_new) -> "GridFunction":
        t_new = np.asarray(t_new, dtype=float)
        if len(t_new) == len(self.t) and np.array_equal(t_new, self.t):
            return self
        left = self(t_new[:-1], side="right")
        right = self(t_new[1:], side="left")
        return GridFunction(t_new, left, right)

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.left + self.right)

    def l1_norm(self) -> float:
        h = np.diff(self.t)
        return float(np.sum(0.5 * h * (np.linalg.norm(self.left, axis=1) + np.linalg.norm(self.right, axis=1))))

    def sup_norm(self) -> float:
        return float(max(np.linalg.norm(self.left, axis=1).max(), np.linalg.norm(self.right, axis=1).max()))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        t = np.union1d(self.t, other.t)
        a, b = self.resample(t), other.resample(t)
        return GridFunction(t, a.left - b.left, a.right - b.right)

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.t, self.left * c, self.right * c)


@dataclass(frozen=True, eq=False)
class ResidualTuple:
    """Perturbation ``z = (xi, eta, pi, zeta, rho)``; ``None`` components are zero."""

    xi: GridFunction | None = None
    eta: np.ndarray | None = None
    pi: GridFunction | None = None
    zeta: np.ndarray | None = None
    rho: GridFunction | None = None

    def grid_nodes(self) -> np.ndarray | None:
        ts = [g.t for g in (self.xi, self.pi, self.rho) if g is not None]
        if not ts:
            return None
        out = ts[0]
        for t in ts[1:]:
            out = np.union1d(out, t)
        return out

    def resample(self, t) -> "ResidualTuple":
        def rs(g):
            return None if g is None else g.resample(t)

        return ResidualTuple(rs(self.xi), self.eta, rs(self.pi), self.zeta, rs(self.rho))

    def components(self) -> dict:
        """Norm of each component as it enters the image-space metric."""
        return {
            "xi_l1": 0.0 if self.xi is None else self.xi.l1_norm(),
            "eta": 0.0 if self.eta is None else float(np.linalg.norm(self.eta)),
            "pi_l1": 0.0 if self.pi is None else self.pi.l1_norm(),
            "zeta": 0.0 if self.zeta is None else float(np.linalg.norm(self.zeta)),
            "rho_sup": 0.0 if self.rho is None else self.rho.sup_norm(),
        }

    def norm(self) -> float:
        return float(sum(self.components().values()))

    def is_zero(self) -> bool:
        return self.norm() == 0.0

    def __sub__(self, other: "ResidualTuple") -> "ResidualTuple":
        def gsub(a, b):
            if a is None and b is None:
                return None
            if b is None:
                return a
            if a is None:
                return b.scaled(-1.0)
            return a - b

        def vsub(a, b):
            if a is None and b is None:
                return None
            return (0.0 if a is None else np.asarray(a)) - (0.0 if b is None else np.asarray(b))

        return ResidualTuple(
            gsub(self.xi, other.xi), vsub(self.eta, other.eta), gsub(self.pi, other.pi),
            vsub(self.zeta, other.zeta), gsub(self.rho, other.rho),
        )


# ------------------------------------------------------------------- trajectories


def _hermite(y0, y1, d0, d1, h, s):
    s2, s3 = s * s, s * s * s
    val = (
        (2 * s3 - 3 * s2 + 1) * y0
        + (s3 - 2 * s2 + s) * h * d0
        + (-2 * s3 + 3 * s2) * y1
        + (s3 - s2) * h * d1
    )
    der = (
        (6 * s2 - 6 * s) * y0
        + (3 * s2 - 4 * s + 1) * h * d0
        + (-6 * s2 + 6 * s) * y1
        + (3 * s2 - 2 * s) * h * d1
    ) / h
    return val, der


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node values plus one-sided node derivatives (dense cubic Hermite output)."""

    t: np.ndarray  # (N+1,)
    values: np.ndarray  # (N+1, n)
    dleft: np.ndarray  # (N, n) derivative at t[i]+
    dright: np.ndarray  # (N, n) derivative at t[i+1]-

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def dense(self, tq, side: str = "right"):
        """(values, derivatives) at query times; ``tq`` scalar or 1-D array."""
        tq = np.asarray(tq, dtype=float)
        scalar = tq.ndim == 0
        tq1 = np.atleast_1d(tq)
        if side == "right":
            i = np.searchsorted(self.t, tq1, side="right") - 1
        else:
            i = np.searchsorted(self.t, tq1, side="left") - 1
        i = np.clip(i, 0, len(self.dleft) - 1)
        h = (self.t[i + 1] - self.t[i])[:, None]
        s = ((tq1 - self.t[i]) / h[:, 0])[:, None]
        val, der = _hermite(self.values[i], self.values[i + 1], self.dleft[i], self.dright[i], h, s)
        if scalar:
            return val[0], der[0]
        return val, der

    def __call__(self, tq):
        return self.dense(tq)[0]

    def midpoint_values(self) -> np.ndarray:
        h = np.diff(self.t)[:, None]
        return 0.5 * (self.values[:-1] + self.values[1:]) + h * (self.dleft - self.dright) / 8.0

    def on_grid(self, t_new) -> "Trajectory":
        """Re-express on another grid using the dense output."""
        t_new = np.asarray(t_new, dtype=float)
        if len(t_new) == len(self.t) and np.array_equal(t_new, self.t):
            return self
        mids = 0.5 * (t_new[:-1] + t_new[1:])
        i = np.clip(np.searchsorted(self.t, mids, side="right") - 1, 0, len(self.dleft) - 1)
        h = (self.t[i + 1] - self.t[i])[:, None]
        y0, y1, d0, d1 = self.values[i], self.values[i + 1], self.dleft[i], self.dright[i]
        sl = ((t_new[:-1] - self.t[i]) / h[:, 0])[:, None]
        sr = ((t_new[1:] - self.t[i]) / h[:, 0])[:, None]
        vl, dl = _hermite(y0, y1, d0, d1, h, sl)
        vr, dr = _hermite(y0, y1, d0, d1, h, sr)
        values = np.vstack([vl, vr[-1:]])
        return Trajectory(t_new, values, dl, dr)

    def l1_norm(self) -> float:
        h = np.diff(self.t)
        nv = np.linalg.norm(self.values, axis=1)
        return float(np.sum(0.5 * h * (nv[:-1] + nv[1:])))

    def derivative_l1_norm(self) -> float:
        h = np.diff(self.t)
        return float(np.sum(0.5 * h * (np.linalg.norm(self.dleft, axis=1) + np.linalg.norm(self.dright, axis=1))))

    def w11_norm(self) -> float:
        return self.l1_norm() + self.derivative_l1_norm()

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        t = np.union1d(self.t, other.t)
        a, b = self.on_grid(t), other.on_grid(t)
        return Trajectory(t, a.values - b.values, a.dleft - b.dleft, a.dright - b.dright)

    @classmethod
    def zeros(cls, t, n) -> "Trajectory":
        t = np.asarray(t, dtype=float)
        return cls(t, np.zeros((len(t), n)), np.zeros((len(t) - 1, n)), np.zeros((len(t) - 1, n)))


@dataclass(frozen=True, eq=False)
class SwitchingProfile:
    t: np.ndarray  # (N+1,)
    sigma: np.ndarray  # (N+1, m)
    evaluator: Callable | None = field(default=None, repr=False)
    zero_set: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.sigma.shape[1]

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def dense(self, tq) -> np.ndarray:
        """sigma at query times: dense trajectory output when available, else linear."""
        if self.evaluator is not None:
            return self.evaluator(tq)
        tq = np.asarray(tq, dtype=float)
        cols = [np.interp(tq, self.t, self.sigma[:, j]) for j in range(self.m)]
        return np.stack(cols, axis=-1)

    @classmethod
    def from_function(cls, t, f: Callable) -> "SwitchingProfile":
        """Profile of an explicit function ``f(t) -> (K, m)`` (vectorized in t)."""
        t = np.asarray(t, dtype=float)

        def ev(tq):
            out = np.asarray(f(np.asarray(tq, dtype=float)), dtype=float)
            if np.ndim(tq) == 0:
                return out.reshape(-1)
            return out.reshape(len(np.atleast_1d(tq)), -1)

        return cls(t, ev(t), ev)


# ---------------------------------------------------------- vectorized problem data


def _fields(prob: AffineProblem, t, X, U):
    """f(t, x, u) for K points: t (K,), X (K, n), U (K, m) -> (K, n)."""
    Xt = X.T
    out = np.empty((len(t), prob.n))
    for i in range(prob.n):
        fi = prob.a[i].values(t, Xt)
        for j in range(prob.m):
            fi = fi + prob.B[i][j].values(t, Xt) * U[:, j]
        out[:, i] = fi
    return out


def _costate_coefficients(prob: AffineProblem, t, X, U):
    """A = df/dx (K, n, n) and g = dw/dx + sum_j u_j ds_j/dx (K, n)."""
    Xt = X.T
    K = len(t)
    A = np.zeros((K, prob.n, prob.n))
    for i in range(prob.n):
        if prob.a[i].depends_on_x:
            A[:, i, :] += prob.a[i].gradients(t, Xt).T
        for j in range(prob.m):
            if prob.B[i][j].depends_on_x:
                A[:, i, :] += prob.B[i][j].gradients(t, Xt).T * U[:, j:j + 1]
    g = np.zeros((K, prob.n))
    if prob.w.depends_on_x:
        g += prob.w.gradients(t, Xt).T
    for j in range(prob.m):
        if prob.s[j].depends_on_x:
            g += prob.s[j].gradients(t, Xt).T * U[:, j:j + 1]
    return A, g


def _sigma_values(prob: AffineProblem, t, X, P):
    """B(t,x)^T p + s(t,x) for K points -> (K, m)."""
    Xt = X.T
    out = np.empty((len(t), prob.m))
    for j in range(prob.m):
        sj = prob.s[j].values(t, Xt)
        for i in range(prob.n):
            sj = sj + prob.B[i][j].values(t, Xt) * P[:, i]
        out[:, j] = sj
    return out


def _scalar_field(prob: AffineProblem):
    a, B, n, m = prob.a, prob.B, prob.n, prob.m

    def f(t, xs, u):
        out = []
        for i in range(n):
            fi = a[i].raw(t, xs)
            for j in range(m):
                fi = fi + B[i][j].raw(t, xs) * u[j]
            out.append(fi)
        return out

    return f


# -------------------------------------------------------------------- integrators


def _residual_samples(g: GridFunction | None, t, k):
    """(left, mid, right) samples of an optional grid function on grid t."""
    N = len(t) - 1
    if g is None:
        z = np.zeros((N, k))
        return z, z, z
    g = g.resample(t)
    return g.left, g.midpoints(), g.right


def solve_state(
    prob: AffineProblem,
    u: PiecewiseConstantControl,
    xi: GridFunction | None = None,
    eta=None,
    *,
    grid=None,
    N: int = DEFAULT_N,
) -> Trajectory:
    """Integrate ``x' = f(t, x, u) + xi``, ``x(0) = x0 + eta`` with classical RK4."""
    t = make_grid(prob.T, N, u.breakpoints, base=grid)
    h = np.diff(t)
    Ui = u.interval_values(t)
    xl, xm, xr = _residual_samples(xi, t, prob.n)
    x0 = prob.x0 + (0.0 if eta is None else np.asarray(eta, dtype=float))
    n = prob.n
    tm = t[:-1] + 0.5 * h

    if not prob.state_depends_on_x:
        zeros = np.zeros((len(h), n))
        k1 = _fields(prob, t[:-1], zeros, Ui) + xl
        k2 = _fields(prob, tm, zeros, Ui) + xm
        k4 = _fields(prob, t[1:], zeros, Ui) + xr
        incr = h[:, None] / 6.0 * (k1 + 4.0 * k2 + k4)
        X = np.vstack([x0, x0 + np.cumsum(incr, axis=0)])
        if not np.all(np.isfinite(X)):
            bad = int(np.argmax(~np.all(np.isfinite(X), axis=1)))
            raise IntegrationError("state became non-finite", time=float(t[bad]))
        return Trajectory(t, X, k1, k4)

    f = _scalar_field(prob)
    X = np.empty((len(t), n))
    X[0] = x0
    x = [float(v) for v in x0]
    for i in range(len(h)):
        hi, ti, ui = float(h[i]), float(t[i]), Ui[i]
        try:
            k1 = [a + b for a, b in zip(f(ti, x, ui), xl[i])]
            x2 = [a + 0.5 * hi * b for a, b in zip(x, k1)]
            k2 = [a + b for a, b in zip(f(ti + 0.5 * hi, x2, ui), xm[i])]
            x3 = [a + 0.5 * hi * b for a, b in zip(x, k2)]
            k3 = [a + b for a, b in zip(f(ti + 0.5 * hi, x3, ui), xm[i])]
            x4 = [a + hi * b for a, b in zip(x, k3)]
            k4 = [a + b for a, b in zip(f(ti + hi, x4, ui), xr[i])]
            x = [a + hi / 6.0 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(x, k1, k2, k3, k4)]
        except (ExpressionError, OverflowError, ZeroDivisionError):
            raise IntegrationError("state became non-finite", time=float(t[i + 1])) from None
        if not all(np.isfinite(x)) or max(abs(v) for v in x) > 1e300:
            raise IntegrationError("state became non-finite", time=float(t[i + 1]))
        X[i + 1] = x
    try:
        dl = _fields(prob, t[:-1], X[:-1], Ui) + xl
        dr = _fields(prob, t[1:], X[1:], Ui) + xr
    except ExpressionError as exc:
        raise IntegrationError(f"state derivative not finite: {exc}") from None
    return Trajectory(t, X, dl, dr)


def terminal_costate(prob: AffineProblem, xT) -> np.ndarray:
    return grad_x(prob.l, prob.T, xT)


def solve_adjoint(
    prob: AffineProblem,
    x: Trajectory,
    u: PiecewiseConstantControl,
    pi: GridFunction | None = None,
    zeta=None,
) -> Trajectory:
    """Integrate ``p' = -grad_x H(t, x, p, u) + pi`` backward from ``p(T) = grad l + zeta``.

    The equation is linear in p, so each RK4 step is assembled as an affine map
    ``p_i = M_i p_{i+1} + c_i`` with the x-dependent coefficients evaluated in
    one vectorized pass at the node and midpoint stage times.
    """
    t = x.t
    h = np.diff(t)
    N, n = len(h), prob.n
    Ui = u.interval_values(t)
    pl, pm, pr = _residual_samples(pi, t, n)
    tm = t[:-1] + 0.5 * h
    try:
        A_l, g_l = _costate_coefficients(prob, t[:-1], x.values[:-1], Ui)
        A_m, g_m = _costate_coefficients(prob, tm, x.midpoint_values(), Ui)
        A_r, g_r = _costate_coefficients(prob, t[1:], x.values[1:], Ui)
    except ExpressionError as exc:
        raise IntegrationError(f"adjoint coefficients not finite: {exc}") from None

    # p' = L p + q with L = -A^T, q = -g + pi
    L1, q1 = -np.transpose(A_r, (0, 2, 1)), -g_r + pr  # at t_{i+1}
    L2, q2 = -np.transpose(A_m, (0, 2, 1)), -g_m + pm
    L3, q3 = -np.transpose(A_l, (0, 2, 1)), -g_l + pl  # at t_i
    hs = -h[:, None, None]  # backward step
    hv = -h[:, None]

    def mm(a, b):
        return np.matmul(a, b) if b.ndim == 3 else np.einsum("kij,kj->ki", a, b)

    M1, c1 = L1, q1
    M2, c2 = L2 + 0.5 * hs * mm(L2, M1), 0.5 * hv * mm(L2, c1) + q2
    M3, c3 = L2 + 0.5 * hs * mm(L2, M2), 0.5 * hv * mm(L2, c2) + q2
    M4, c4 = L3 + hs * mm(L3, M3), hv * mm(L3, c3) + q3
    M = np.eye(n)[None] + hs / 6.0 * (M1 + 2 * M2 + 2 * M3 + M4)
    c = hv / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)

    pT = terminal_costate(prob, x.values[-1]) + (0.0 if zeta is None else np.asarray(zeta, dtype=float))
    P = np.empty((N + 1, n))
    P[-1] = pT
    if n == 1:
        m_list = M[:, 0, 0].tolist()
        c_list = c[:, 0].tolist()
        p = float(pT[0])
        out = [0.0] * (N + 1)
        out[N] = p
        for i in range(N - 1, -1, -1):
            p = m_list[i] * p + c_list[i]
            out[i] = p
        P[:, 0] = out
    else:
        p = pT
        for i in range(N - 1, -1, -1):
            p = M[i] @ p + c[i]
            P[i] = p
    finite = np.all(np.isfinite(P), axis=1)
    if not np.all(finite):
        bad = int(np.flatnonzero(~finite).max())
        raise IntegrationError("adjoint became non-finite", time=float(t[bad]))
    dl = np.einsum("kij,kj->ki", L3, P[:-1]) + q3
    dr = np.einsum("kij,kj->ki", L1, P[1:]) + q1
    return Trajectory(t, P, dl, dr)


def switching_function(prob: AffineProblem, x: Trajectory, p: Trajectory) -> SwitchingProfile:
    """``sigma(t) = B(t, x)^T p + s(t, x)`` at the nodes, with a dense evaluator."""
    if not (len(p.t) == len(x.t) and np.array_equal(p.t, x.t)):
        p = p.on_grid(x.t)
    sigma = _sigma_values(prob, x.t, x.values, p.values)

    def evaluator(tq):
        tq = np.asarray(tq, dtype=float)
        tq1 = np.atleast_1d(tq)
        X = x.dense(tq1)[0]
        P = p.dense(tq1)[0]
        out = _sigma_values(prob, tq1, X, P)
        return out[0] if tq.ndim == 0 else out

    return SwitchingProfile(x.t, sigma, evaluator)


def switching_for_control(prob, u, z: ResidualTuple | None = None, *, grid=None, N=DEFAULT_N):
    """Solve state and adjoint for u (under residuals z) and return (x, p, profile)."""
    z = z or ResidualTuple()
    x = solve_state(prob, u, z.xi, z.eta, grid=grid, N=N)
    p = solve_adjoint(prob, x, u, z.pi, z.zeta)
    return x, p, switching_function(prob, x, p)


# ---------------------------------------------------------------- inclusion check


@dataclass
class InclusionReport:
    defects: list  # five per-row maximum defects
    tol: float

    ROWS = ("state", "initial", "adjoint", "terminal", "stationarity")

    @property
    def row_passed(self) -> list:
        return [d <= self.tol for d in self.defects]

    @property
    def passed(self) -> bool:
        return all(self.row_passed)

    @property
    def max_defect(self) -> float:
        return float(max(self.defects))

    def failed_rows(self) -> list:
        return [i + 1 for i, ok in enumerate(self.row_passed) if not ok]

    def as_dict(self) -> dict:
        return {name: float(d) for name, d in zip(self.ROWS, self.defects)}


def stationarity_defect(prob, t, sigma_nodes, u: PiecewiseConstantControl, rho: GridFunction | None) -> float:
    """Largest violation of ``rho - sigma in N_U(u)`` at both ends of every interval."""
    Ui = u.interval_values(t)
    cl, cr = sigma_nodes[:-1].copy(), sigma_nodes[1:].copy()
    if rho is not None:
        r = rho.resample(t)
        cl -= r.left
        cr -= r.right
    return max(inclusion_defect(cl, Ui, prob.U), inclusion_defect(cr, Ui, prob.U))


def verify_inclusion(
    prob: AffineProblem,
    x: Trajectory,
    p: Trajectory,
    u: PiecewiseConstantControl,
    z: ResidualTuple | None = None,
    tol: float = 1e-8,
) -> InclusionReport:
    """Check ``z in Phi(x, p, u)`` row by row on the trajectory grid."""
    z = z or ResidualTuple()
    t = x.t
    if not (len(p.t) == len(t) and np.array_equal(p.t, t)):
        p = p.on_grid(t)
    eta = 0.0 if z.eta is None else np.asarray(z.eta, dtype=float)
    zeta = 0.0 if z.zeta is None else np.asarray(z.zeta, dtype=float)
    x_re = solve_state(prob, u, z.xi, z.eta, grid=t)
    x_re = x_re.on_grid(t)
    d1 = float(np.abs(x_re.values - x.values).max())
    d2 = float(np.linalg.norm(x.values[0] - prob.x0 - eta))
    p_re = solve_adjoint(prob, x, u, z.pi, z.zeta)
    d3 = float(np.abs(p_re.values - p.values).max())
    d4 = float(np.linalg.norm(p.values[-1] - terminal_costate(prob, x.values[-1]) - zeta))
    sigma = _sigma_values(prob, t, x.values, p.values)
    d5 = stationarity_defect(prob, t, sigma, u, z.rho)
    return InclusionReport([d1, d2, d3, d4, d5], tol)


@dataclass(frozen=True, eq=False)
class Solution:
    """A triple ``y = (x, p, u)`` together with its switching profile."""

    x: Trajectory
    p: Trajectory
    u: PiecewiseConstantControl
    profile: SwitchingProfile | None = None


def solution_for_control(prob, u, z: ResidualTuple | None = None, *, grid=None, N=DEFAULT_N) -> Solution:
    x, p, prof = switching_for_control(prob, u, z, grid=grid, N=N)
    return Solution(x, p, u, prof)
