"""Bang-bang controls from switching functions, and the forward-backward sweep.

The sweep alternates state solve, adjoint solve and pointwise minimization of
``<sigma - rho, v>`` over the vertices. Undamped Picard iteration can cycle on
perturbed problems whose switching function is flat near the switch (the
perturbed fixed point then has ``sigma - rho`` vanishing on a whole interval).
When a cycle or a stall is detected the sweep falls back to switching-time
localization: the vertex sequence is frozen and the switching times are solved
from the continuity conditions ``<sigma(tau_j) - rho(tau_j), v_{j+1} - v_j> = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, root

from .control import PiecewiseConstantControl, eval_control, l1_distance
from .dynamics import (
    DEFAULT_N,
    GridFunction,
    ResidualTuple,
    SwitchingProfile,
    Trajectory,
    make_grid,
    switching_for_control,
    verify_inclusion,
)
from .errors import SweepError, TieError
from .polytope import TIE_TOL, ControlPolytope, tie_mask, vertex_scores
from .problem import AffineProblem

log = logging.getLogger(__name__)

__all__ = [
    "eval_control", "pointwise_minimizer", "SweepOptions", "SweepResult", "fb_sweep_solve",
]

TIE = -1
MAX_DEPTH = 30


@dataclass
class SweepOptions:
    max_iters: int = 50
    tol: float = 1e-10  # on ||u_{k+1} - u_k||_1
    root_tol: float = 1e-12  # switching-time bisection width
    tie_tol: float = TIE_TOL
    tie_policy: str = "freeze"  # "freeze" or "error"
    localize: bool = True
    N: int = DEFAULT_N

    def __post_init__(self):
        if not (self.tol > 0 and self.root_tol > 0 and self.tie_tol > 0):
            raise ValueError("sweep tolerances must be positive")
        if self.tie_policy not in ("freeze", "error"):
            raise ValueError("tie_policy must be 'freeze' or 'error'")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class SweepResult:
    x: Trajectory
    p: Trajectory
    u: PiecewiseConstantControl
    iterations: int
    profile: SwitchingProfile
    localized: bool = False
    history: list = field(default_factory=list)  # ||u_{k+1} - u_k||_1 per iteration


# --------------------------------------------------------------- pointwise argmin


class _Minimizer:
    def __init__(self, profile, rho, U, root_tol, tie_tol):
        self.profile = profile
        self.rho = None if rho is None else rho.resample(profile.t)
        self.U = U
        self.root_tol = root_tol
        self.tie_tol = tie_tol

    def cost(self, tq):
        c = self.profile.dense(tq)
        if self.rho is not None:
            c = c - self.rho(tq)
        return c

    def classify(self, tq):
        mask = tie_mask(vertex_scores(self.cost(tq), self.U), self.tie_tol)
        idx = int(np.argmax(mask)) if mask.sum() == 1 else TIE
        return idx, mask

    def bisect(self, a, b, i_left, i_right):
        """Switch time in (a, b) where the preference moves from i_left to i_right."""
        d = self.U.vertices[i_right] - self.U.vertices[i_left]
        lo, hi = a, b
        while hi - lo > self.root_tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if float(self.cost(mid) @ d) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi), hi

    def resolve(self, a, b, left, right, out, depth=0):
        (il, ml), (ir, mr) = left, right
        if il != TIE and ir != TIE:
            if il == ir:
                out.append((a, il))
                return
            if b - a <= self.root_tol or depth >= MAX_DEPTH:
                out.append((a, il))
                out.append((0.5 * (a + b), ir))
                return
            r, hi = self.bisect(a, b, il, ir)
            out.append((a, il))
            nxt = self.classify(hi)
            if nxt[0] in (ir, TIE) or hi >= b:
                out.append((r, ir))
            else:
                self.resolve(r, b, nxt, right, out, depth + 1)
            return
        if il == TIE and ir != TIE and mr is not None and ml[ir]:
            out.append((a, ir))
            return
        if ir == TIE and il != TIE and ml is not None and mr[il]:
            out.append((a, il))
            return
        if il == TIE and ir == TIE:
            # stationarity is checked at nodes, so a tie at both ends ties the interval
            out.append((a, TIE))
            return
        mid = 0.5 * (a + b)
        if depth >= MAX_DEPTH or b - a <= self.root_tol:
            pick = ir if ir != TIE else il
            out.append((a, pick))
            return
        m = self.classify(mid)
        self.resolve(a, mid, left, m, out, depth + 1)
        self.resolve(mid, b, m, right, out, depth + 1)


def pointwise_minimizer(
    profile: SwitchingProfile,
    rho: GridFunction | None,
    U: ControlPolytope,
    *,
    root_tol: float = 1e-12,
    tie_tol: float = TIE_TOL,
    tie_policy: str = "error",
    previous: PiecewiseConstantControl | None = None,
) -> PiecewiseConstantControl:
    """Vertex-valued control minimizing ``<sigma(t) - rho(t), v>`` pointwise.

    Switching times inside grid intervals are refined by bisection. Intervals on
    which the minimizer is tied are either reported (``tie_policy="error"``) or
    filled with the previous control (``"freeze"``).
    """
    mz = _Minimizer(profile, rho, U, root_tol, tie_tol)
    t = profile.t
    cl = profile.sigma[:-1]
    cr = profile.sigma[1:]
    if mz.rho is not None:
        cl = cl - mz.rho.left
        cr = cr - mz.rho.right
    ml = tie_mask(vertex_scores(cl, U), tie_tol)
    mr = tie_mask(vertex_scores(cr, U), tie_tol)
    il = np.where(ml.sum(axis=1) == 1, np.argmax(ml, axis=1), TIE)
    ir = np.where(mr.sum(axis=1) == 1, np.argmax(mr, axis=1), TIE)

    segments: list = []
    simple = (il == ir) & (il != TIE)
    for i in range(len(t) - 1):
        if simple[i]:
            segments.append((float(t[i]), int(il[i])))
        else:
            mz.resolve(float(t[i]), float(t[i + 1]), (int(il[i]), ml[i]), (int(ir[i]), mr[i]), segments)
    return _assemble(segments, profile.T, U, mz, tie_policy, previous, root_tol)


def _assemble(segments, T, U, mz, tie_policy, previous, root_tol):
    # merge consecutive equal labels
    merged: list = []
    for start, lab in segments:
        if merged and merged[-1][1] == lab:
            continue
        if merged and start <= merged[-1][0]:
            merged[-1] = (merged[-1][0], lab)
            continue
        merged.append((start, lab))
    ends = [s for s, _ in merged[1:]] + [T]

    starts, values = [], []
    for (start, lab), end in zip(merged, ends):
        if lab != TIE:
            starts.append(start)
            values.append(U.vertices[lab])
            continue
        if end - start <= root_tol:
            continue  # measure-zero tie, absorbed by the neighbours
        if tie_policy == "error" or previous is None:
            raise TieError(
                f"pointwise minimizer is not unique on [{start:.6g}, {end:.6g}] "
                "(singular arc suspected)",
                interval=(start, end),
            )
        p_starts, p_vals = previous.restricted(start, end)
        starts.extend(p_starts)
        values.extend(np.asarray(pv, dtype=float) for pv in p_vals)
    if not starts:
        raise TieError("pointwise minimizer is tied on the whole horizon", interval=(0.0, T))
    starts[0] = 0.0
    return PiecewiseConstantControl.from_segments(starts, np.array(values), T)


# ------------------------------------------------------------------------- sweep


def _base_grid(prob: AffineProblem, z: ResidualTuple, N: int) -> np.ndarray:
    nodes = z.grid_nodes()
    return make_grid(prob.T, N, () if nodes is None else nodes)


def _structure(u: PiecewiseConstantControl, U: ControlPolytope):
    idx = tuple(U.vertex_index(v) for v in u.values)
    return None if None in idx else idx


def _build(structure, taus, U, T):
    taus = np.clip(np.asarray(taus, dtype=float), 0.0, T)
    starts = np.concatenate([[0.0], taus])
    ends = np.concatenate([taus, [T]])
    keep = ends - starts > 0
    if not np.any(keep):
        keep[-1] = True
    st = starts[keep]
    st[0] = 0.0
    return PiecewiseConstantControl.from_segments(st, U.vertices[list(np.array(structure)[keep])], T)


def _switch_residuals(prob, z, structure, taus, grid, N):
    u = _build(structure, taus, prob.U, prob.T)
    _, _, prof = switching_for_control(prob, u, z, grid=grid, N=N)
    res = []
    for j, tau in enumerate(np.clip(taus, 0.0, prob.T)):
        c = prof.dense(float(tau))
        if z.rho is not None:
            c = c - 0.5 * (z.rho(tau, side="left") + z.rho(tau, side="right"))
        d = prob.U.vertices[structure[j + 1]] - prob.U.vertices[structure[j]]
        res.append(float(c @ d))
    return np.array(res)


def _localize(prob, z, structure, taus0, opts, grid):
    T = prob.T
    k = len(structure) - 1
    if k == 1:
        f = lambda tau: _switch_residuals(prob, z, structure, [tau], grid, opts.N)[0]
        fa, fb = f(0.0), f(T)
        if fa == 0.0 or fb == 0.0 or np.sign(fa) == np.sign(fb):
            return None
        tau = brentq(f, 0.0, T, xtol=opts.root_tol, rtol=4 * np.finfo(float).eps, maxiter=200)
        return _build(structure, [tau], prob.U, T)

    def f_vec(taus):
        if np.any(np.diff(taus) <= 0) or taus[0] <= 0 or taus[-1] >= T:
            return np.full(k, 1e3)
        return _switch_residuals(prob, z, structure, taus, grid, opts.N)

    sol = root(f_vec, np.asarray(taus0, dtype=float), method="hybr", options={"xtol": 1e-13})
    if not sol.success:
        return None
    return _build(structure, sol.x, prob.U, T)


def fb_sweep_solve(
    prob: AffineProblem,
    z: ResidualTuple | None = None,
    u_init: PiecewiseConstantControl | None = None,
    opts: SweepOptions | None = None,
) -> SweepResult:
    """Solve ``z in Phi(x, p, u)`` for a vertex-valued piecewise-constant u."""
    opts = opts or SweepOptions()
    z = z or ResidualTuple()
    if u_init is None:
        u_init = PiecewiseConstantControl.constant(prob.U.vertices[0], prob.T)
    grid = _base_grid(prob, z, opts.N)
    u = u_init
    iterates = [u]
    history = []
    cycled = False
    for k in range(1, opts.max_iters + 1):
        x, p, prof = switching_for_control(prob, u, z, grid=grid, N=opts.N)
        u_new = pointwise_minimizer(
            prof, z.rho, prob.U, root_tol=opts.root_tol, tie_tol=opts.tie_tol,
            tie_policy=opts.tie_policy, previous=u,
        )
        d = l1_distance(u_new, u)
        history.append(d)
        log.debug("sweep iteration %d: ||du||_1 = %.3e", k, d)
        if d <= opts.tol:
            if d > 0.0:
                x, p, prof = switching_for_control(prob, u_new, z, grid=grid, N=opts.N)
            return SweepResult(x, p, u_new, k, prof, False, history)
        if any(l1_distance(u_new, old) <= opts.tol for old in iterates[:-1]):
            cycled = True
            log.debug("sweep cycle detected at iteration %d", k)
            iterates.append(u_new)
            break
        iterates.append(u_new)
        u = u_new

    if opts.localize:
        result = _localize_from(prob, z, iterates, opts, grid, history)
        if result is not None:
            return result
    reason = "cycle detected" if cycled else f"no fixed point after {opts.max_iters} iterations"
    last = history[-1] if history else None
    raise SweepError(
        f"forward-backward sweep failed: {reason}; last ||u_k+1 - u_k||_1 = {last:.3e}",
        last_distance=last,
        iterations=len(history),
    )


def _localize_from(prob, z, iterates, opts, grid, history):
    seen = []
    for u in reversed(iterates[-6:]):
        s = _structure(u, prob.U)
        if s is None or len(s) < 2 or s in [c[0] for c in seen]:
            continue
        seen.append((s, u.switch_times))
    # fewer switches first: the simplest consistent structure wins
    seen.sort(key=lambda c: len(c[0]))
    for structure, taus0 in seen:
        try:
            cand = _localize(prob, z, structure, taus0, opts, grid)
        except (SweepError, TieError, ValueError) as exc:
            log.debug("localization of %s failed: %s", structure, exc)
            continue
        if cand is None:
            continue
        x, p, prof = switching_for_control(prob, cand, z, grid=grid, N=opts.N)
        try:
            check = pointwise_minimizer(
                prof, z.rho, prob.U, root_tol=opts.root_tol, tie_tol=opts.tie_tol,
                tie_policy="freeze", previous=cand,
            )
        except TieError:
            continue
        d = l1_distance(check, cand)
        if d <= max(opts.tol, 1e3 * opts.root_tol):
            report = verify_inclusion(prob, x, p, cand, z, tol=1e-7)
            if report.passed:
                history.append(d)
                return SweepResult(x, p, cand, len(history), prof, True, history)
    return None


def reference_solution(prob: AffineProblem, *, N: int = DEFAULT_N, opts: SweepOptions | None = None,
                       analytic: bool = True):
    """Reference extremal for z = 0.

    Builtin problems have the closed-form minimizer ``(x, p, u) = (0, 0, 0)``;
    other problems are solved by the sweep.
    """
    from .dynamics import Solution, switching_function, uniform_grid

    if analytic and prob.is_builtin:
        t = uniform_grid(prob.T, N)
        u = PiecewiseConstantControl.constant(np.zeros(prob.m), prob.T)
        x = Trajectory.zeros(t, prob.n)
        p = Trajectory.zeros(t, prob.n)
        return Solution(x, p, u, switching_function(prob, x, p))
    opts = opts or SweepOptions(N=N)
    res = fb_sweep_solve(prob, None, None, opts)
    return Solution(res.x, res.p, res.u, res.profile)
