"""Piecewise-constant controls on [0, T]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VALUE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewiseConstantControl:
    """Right-continuous step function: ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: np.ndarray  # (k+1,), 0 = tau_0 < ... < tau_k = T
    values: np.ndarray  # (k, m)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(bp) < 2 or len(vals) != len(bp) - 1:
            raise ValueError("need k+1 breakpoints for k values")
        if bp[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value, T: float) -> "PiecewiseConstantControl":
        return cls(np.array([0.0, float(T)]), np.atleast_1d(np.asarray(value, dtype=float))[None, :])

    @classmethod
    def from_segments(cls, starts, values, T: float) -> "PiecewiseConstantControl":
        """Build from interval start times (first must be 0) and their values."""
        return cls(np.append(np.asarray(starts, dtype=float), float(T)), values).simplified()

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def switch_times(self) -> np.ndarray:
        return self.breakpoints[1:-1]

    def __call__(self, t):
        return eval_control(self, t)

    def interval_values(self, t_nodes: np.ndarray) -> np.ndarray:
        """Value on each grid interval, sampled at the interval midpoint."""
        t_nodes = np.asarray(t_nodes, dtype=float)
        mids = 0.5 * (t_nodes[:-1] + t_nodes[1:])
        idx = np.searchsorted(self.breakpoints, mids, side="right") - 1
        return self.values[np.clip(idx, 0, len(self.values) - 1)]

    def simplified(self, tol: float = VALUE_TOL) -> "PiecewiseConstantControl":
        """Merge neighbouring intervals carrying equal values."""
        keep = [0]
        for i in range(1, len(self.values)):
            if np.any(np.abs(self.values[i] - self.values[keep[-1]]) > tol):
                keep.append(i)
        bp = np.append(self.breakpoints[keep], self.T)
        return PiecewiseConstantControl(bp, self.values[keep])

    def shifted(self, c) -> "PiecewiseConstantControl":
        return PiecewiseConstantControl(self.breakpoints, self.values + np.asarray(c, dtype=float))

    def is_vertex_valued(self, U, tol: float = VALUE_TOL) -> bool:
        return all(U.vertex_index(v, tol) is not None for v in self.values)

    def snapped(self, U, tol: float = 1e-9) -> "PiecewiseConstantControl":
        """Replace values within tol of a vertex by that vertex exactly."""
        vals = self.values.copy()
        for i, v in enumerate(vals):
            k = U.vertex_index(v, tol)
            if k is not None:
                vals[i] = U.vertices[k]
        return PiecewiseConstantControl(self.breakpoints, vals)

    def restricted(self, a: float, b: float):
        """(starts, values) of the pieces overlapping [a, b), clipped to it."""
        bp = self.breakpoints
        i0 = int(np.clip(np.searchsorted(bp, a, side="right") - 1, 0, len(self.values) - 1))
        starts, vals = [a], [self.values[i0]]
        for i in range(i0 + 1, len(self.values)):
            if bp[i] >= b:
                break
            starts.append(float(bp[i]))
            vals.append(self.values[i])
        return starts, vals

    def equals(self, other: "PiecewiseConstantControl", tol: float = 1e-12) -> bool:
        a, b = self.simplified(), other.simplified()
        return (
            a.breakpoints.shape == b.breakpoints.shape
            and np.allclose(a.breakpoints, b.breakpoints, atol=tol, rtol=0)
            and np.allclose(a.values, b.values, atol=tol, rtol=0)
        )


def eval_control(u: PiecewiseConstantControl, t) -> np.ndarray:
    """Right-continuous lookup; ``t = T`` returns the last value."""
    idx = np.searchsorted(u.breakpoints, t, side="right") - 1
    idx = np.clip(idx, 0, len(u.values) - 1)
    return u.values[idx].copy()


def common_breakpoints(*controls: PiecewiseConstantControl) -> np.ndarray:
    return np.unique(np.concatenate([c.breakpoints for c in controls]))


def difference_pieces(u1: PiecewiseConstantControl, u2: PiecewiseConstantControl):
    """Breakpoints of the common refinement and ``u1 - u2`` on each piece."""
    bp = common_breakpoints(u1, u2)
    return bp, u1.interval_values(bp) - u2.interval_values(bp)


def l1_distance(u1: PiecewiseConstantControl, u2: PiecewiseConstantControl) -> float:
    """Exact ``int_0^T |u1 - u2| dt`` (Euclidean norm pointwise)."""
    bp, diff = difference_pieces(u1, u2)
    return float(np.sum(np.diff(bp) * np.linalg.norm(diff, axis=1)))


def disagreement_set(u1, u2, tol: float = VALUE_TOL) -> list[tuple[float, float]]:
    """Maximal intervals where the controls differ by more than tol in some component."""
    bp, diff = difference_pieces(u1, u2)
    out: list[tuple[float, float]] = []
    for i, d in enumerate(diff):
        if np.any(np.abs(d) > tol):
            a, b = float(bp[i]), float(bp[i + 1])
            if out and out[-1][1] == a:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out
