"""Zero sets of the switching function, the structural control metric d*, and d_Y / d_Z."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .control import PiecewiseConstantControl, disagreement_set, l1_distance
from .dynamics import ResidualTuple, SwitchingProfile, Trajectory
from .errors import NonIsolatedZeroError

MERGE_TOL = 1e-9


@dataclass
class ZeroSet:
    times: list = field(default_factory=list)
    provenance: list = field(default_factory=list)  # per time: list of (direction, local order)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    @property
    def is_empty(self) -> bool:
        return not self.times

    def directions(self, i: int) -> list:
        return [np.asarray(e) for e, _ in self.provenance[i]]

    def as_dict(self) -> list:
        return [
            {"time": float(s), "directions": [list(map(float, e)) for e, _ in prov],
             "orders": [o for _, o in prov]}
            for s, prov in zip(self.times, self.provenance)
        ]


def _bisect_root(g, a, b, ga, tol):
    lo, hi = a, b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = g(mid)
        if gm == 0.0:
            return mid
        if np.sign(gm) == np.sign(ga):
            lo, ga = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def zero_set(
    profile: SwitchingProfile,
    E,
    tol: float = 1e-10,
    merge_tol: float = MERGE_TOL,
    min_span: float | None = None,
) -> ZeroSet:
    """Zeros of ``<sigma, e>`` over all edge directions e.

    Sign changes are refined by bisection on the dense profile; touching zeros
    are found by minimizing ``|<sigma, e>|`` around small local minima. A run
    of near-zero nodes longer than ``min_span`` (default 1% of T) is reported
    as a non-isolated zero.
    """
    t = profile.t
    T = profile.T
    scale = max(1.0, float(np.abs(profile.sigma).max()))
    thr = tol * scale
    span = 0.01 * T if min_span is None else min_span
    root_tol = 1e-14 * max(1.0, T)
    found: list = []  # (time, direction)

    done_dirs: list = []
    for e in np.atleast_2d(np.asarray(E, dtype=float)):
        # <sigma, -e> has the same zeros as <sigma, e>; compute once per line
        twin = next((d for d in done_dirs if np.allclose(d, -e, atol=1e-12)), None)
        if twin is not None:
            found.extend((s, tuple(e)) for s, d in list(found) if np.allclose(d, twin))
            continue
        done_dirs.append(e)
        g_nodes = profile.sigma @ e

        def g(tq, e=e):
            return float(np.asarray(profile.dense(tq)) @ e)

        near = np.abs(g_nodes) <= thr
        i = 0
        N = len(t)
        handled = np.zeros(N, dtype=bool)
        while i < N:
            if not near[i]:
                i += 1
                continue
            j = i
            while j + 1 < N and near[j + 1]:
                j += 1
            if j > i + 1 and t[j] - t[i] > span:
                raise NonIsolatedZeroError(
                    f"<sigma, e> vanishes on [{t[i]:.6g}, {t[j]:.6g}] for e = {e.tolist()}"
                )
            k = i + int(np.argmin(np.abs(g_nodes[i:j + 1])))
            found.append((float(t[k]), tuple(e)))
            handled[max(i - 1, 0):j + 2] = True
            i = j + 1
        for i in range(N - 1):
            if handled[i] and handled[i + 1]:
                continue
            if g_nodes[i] * g_nodes[i + 1] < 0.0:
                found.append((_bisect_root(g, float(t[i]), float(t[i + 1]), g_nodes[i], root_tol), tuple(e)))
        # touching zeros strictly between nodes
        a = np.abs(g_nodes)
        for i in range(1, N - 1):
            if handled[i] or not (a[i] <= a[i - 1] and a[i] <= a[i + 1]) or a[i] > 1e-3 * scale:
                continue
            if g_nodes[i - 1] * g_nodes[i] < 0 or g_nodes[i] * g_nodes[i + 1] < 0:
                continue
            res = minimize_scalar(
                lambda s: abs(g(s)), bounds=(float(t[i - 1]), float(t[i + 1])),
                method="bounded", options={"xatol": 1e-13},
            )
            if res.fun <= thr:
                found.append((float(res.x), tuple(e)))

    found.sort(key=lambda item: item[0])
    zs = ZeroSet()
    for s, e in found:
        if zs.times and s - zs.times[-1] <= merge_tol:
            if all(tuple(d) != e for d, _ in zs.provenance[-1]):
                zs.provenance[-1].append((e, None))
            continue
        zs.times.append(min(max(s, 0.0), T))
        zs.provenance.append([(e, None)])
    return zs


def sigma_eps(Z, eps: float, T: float) -> list[tuple[float, float]]:
    """``[0, T]`` minus the closed eps-neighbourhoods of Z, as closed intervals.

    Closure convention: the removed neighbourhoods are treated as open, so
    boundary points ``s +- eps`` are kept; zero-length pieces are dropped.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    times = sorted(float(s) for s in Z)
    out = []
    cursor = 0.0
    for s in times:
        lo, hi = s - eps, s + eps
        if lo > cursor:
            out.append((cursor, min(lo, T)))
        cursor = max(cursor, hi)
        if cursor >= T:
            break
    if cursor < T:
        out.append((cursor, T))
    return [(a, b) for a, b in out if b > a or (eps == 0 and b >= a)]


def _dist_to_set(t: float, times: np.ndarray) -> float:
    return float(np.min(np.abs(times - t)))


def dstar(u1: PiecewiseConstantControl, u2: PiecewiseConstantControl, Z, T: float | None = None) -> float:
    """Smallest eps such that the controls agree a.e. outside ``Z + [-eps, eps]``.

    With Z empty: 0 if the controls agree a.e., otherwise T.
    """
    T = u1.T if T is None else float(T)
    D = disagreement_set(u1, u2)
    if not D:
        return 0.0
    times = np.array(sorted(float(s) for s in Z))
    if len(times) == 0:
        return T
    eps = 0.0
    for a, b in D:
        cands = [a, b]
        mids = 0.5 * (times[:-1] + times[1:])
        cands.extend(m for m in mids if a < m < b)
        eps = max(eps, max(_dist_to_set(c, times) for c in cands))
    return float(eps)


def coverage_radius(Z, T: float) -> float:
    """``max_{t in [0,T]} dist(t, Z)``: an upper bound for d* when Z is non-empty."""
    times = np.array(sorted(float(s) for s in Z))
    cands = [0.0, T] + list(0.5 * (times[:-1] + times[1:]))
    return float(max(_dist_to_set(c, times) for c in cands))


@dataclass
class YDistance:
    x_l1: float
    x_dot_l1: float
    p_l1: float
    p_dot_l1: float
    dstar: float
    u_l1: float

    @property
    def total(self) -> float:
        return self.x_l1 + self.x_dot_l1 + self.p_l1 + self.p_dot_l1 + self.dstar

    def as_dict(self) -> dict:
        d = dict(vars(self))
        d["total"] = self.total
        return d


def dY(y1, y2, Z, T: float | None = None) -> YDistance:
    """``||x1-x2||_{1,1} + ||p1-p2||_{1,1} + d*(u1, u2)``; y's carry ``x``, ``p``, ``u``."""
    dx: Trajectory = y1.x - y2.x
    dp: Trajectory = y1.p - y2.p
    return YDistance(
        x_l1=dx.l1_norm(),
        x_dot_l1=dx.derivative_l1_norm(),
        p_l1=dp.l1_norm(),
        p_dot_l1=dp.derivative_l1_norm(),
        dstar=dstar(y1.u, y2.u, Z, T),
        u_l1=l1_distance(y1.u, y2.u),
    )


def dZ(z1: ResidualTuple, z2: ResidualTuple | None = None) -> float:
    """``||xi||_1 + |eta| + ||pi||_1 + |zeta| + ||rho||_inf`` of ``z1 - z2``."""
    diff = z1 if z2 is None else z1 - z2
    return diff.norm()
