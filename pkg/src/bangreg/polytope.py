"""Control polytopes given by vertices and edges.

Only V-representations are supported. Edge directions are stored with both
signs so that zero-set and growth tests over ``<sigma, e>`` need no sign
bookkeeping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import PolytopeError

MAX_BOX_DIM = 12
TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ControlPolytope:
    vertices: np.ndarray  # (k, m)
    edges: tuple  # pairs of vertex indices
    edge_dirs: np.ndarray  # (d, m) unit vectors, closed under negation
    kind: str = "general"
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    _neighbors: tuple = field(default=(), repr=False)

    def __post_init__(self):
        nbrs = [[] for _ in range(len(self.vertices))]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "_neighbors", tuple(tuple(sorted(x)) for x in nbrs))

    @property
    def m(self) -> int:
        return self.vertices.shape[1]

    @property
    def is_box(self) -> bool:
        return self.kind == "box"

    def neighbors(self, i: int) -> tuple:
        return self._neighbors[i]

    def diameter(self) -> float:
        v = self.vertices
        return float(max(np.linalg.norm(a - b) for a in v for b in v))

    def vertex_index(self, u, tol: float = 1e-12) -> int | None:
        """Index of the vertex equal to ``u`` (componentwise within tol), else None."""
        u = np.asarray(u, dtype=float)
        hits = np.flatnonzero(np.all(np.abs(self.vertices - u) <= tol, axis=1))
        return int(hits[0]) if len(hits) else None

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        if self.is_box:
            return bool(np.all(u >= self.lo - tol) and np.all(u <= self.hi + tol))
        # convex-combination feasibility by least squares on the simplex weights
        from scipy.optimize import nnls

        a = np.vstack([self.vertices.T, np.ones(len(self.vertices))])
        b = np.concatenate([u, [1.0]])
        _, resid = nnls(a, b)
        return resid <= tol * max(1.0, float(np.abs(b).max()))

    def to_dict(self) -> dict:
        if self.is_box:
            return {"box": {"lo": self.lo.tolist(), "hi": self.hi.tolist()}}
        return {"simplex": self.vertices.tolist()}


def _unique_directions(vectors) -> np.ndarray:
    dirs = []
    for v in vectors:
        e = np.asarray(v, dtype=float)
        e = e / np.linalg.norm(e)
        for s in (e, -e):
            if not any(np.allclose(s, d, atol=1e-12, rtol=0) for d in dirs):
                dirs.append(s)
    return np.array(dirs)


def make_box(lo, hi) -> ControlPolytope:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.ndim != 1:
        raise PolytopeError("lo and hi must be vectors of the same length")
    m = len(lo)
    if m == 0:
        raise PolytopeError("box dimension must be at least 1")
    if m > MAX_BOX_DIM:
        raise PolytopeError(f"box dimension {m} exceeds {MAX_BOX_DIM}")
    if not np.all(lo < hi):
        raise PolytopeError("box requires lo < hi componentwise")
    corners = list(itertools.product((0, 1), repeat=m))
    vertices = np.array([[hi[i] if c[i] else lo[i] for i in range(m)] for c in corners])
    edges = tuple(
        (a, b)
        for a, b in itertools.combinations(range(len(corners)), 2)
        if sum(x != y for x, y in zip(corners[a], corners[b])) == 1
    )
    edge_dirs = _unique_directions(np.eye(m))
    return ControlPolytope(vertices, edges, edge_dirs, kind="box", lo=lo, hi=hi)


def make_simplex(vertices) -> ControlPolytope:
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2 or len(v) < 2:
        raise PolytopeError("a simplex needs at least two vertices")
    diffs = v[1:] - v[0]
    if np.linalg.matrix_rank(diffs, tol=1e-10) < len(v) - 1:
        raise PolytopeError("simplex vertices are affinely dependent")
    if v.shape[1] == 1:
        return make_box([v.min()], [v.max()])
    edges = tuple(itertools.combinations(range(len(v)), 2))
    edge_dirs = _unique_directions([v[j] - v[i] for i, j in edges])
    return ControlPolytope(v, edges, edge_dirs, kind="simplex")


def polytope_from_dict(spec: dict) -> ControlPolytope:
    if "box" in spec:
        return make_box(spec["box"]["lo"], spec["box"]["hi"])
    if "simplex" in spec:
        return make_simplex(spec["simplex"])
    raise PolytopeError("control set must be given as {'box': ...} or {'simplex': ...}")


def vertex_scores(c, U: ControlPolytope) -> np.ndarray:
    """``<c, v>`` for every vertex; ``c`` may be (m,) or (K, m)."""
    return np.asarray(c, dtype=float) @ U.vertices.T


def tie_mask(scores: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Boolean mask of vertices whose score is within tolerance of the minimum."""
    lo = scores.min(axis=-1, keepdims=True)
    return scores - lo <= tie_tol * (1.0 + np.abs(lo))


def support_argmin(c, U: ControlPolytope, tie_tol: float = TIE_TOL):
    """Vertex minimizing ``<c, v>`` and a flag telling whether the minimum is tied."""
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise PolytopeError("cost vector must be finite")
    scores = vertex_scores(c, U)
    i = int(np.argmin(scores))
    tie = int(tie_mask(scores, tie_tol).sum()) > 1
    return U.vertices[i].copy(), tie


def _project_onto_cone(y: np.ndarray, gens: np.ndarray) -> np.ndarray:
    """Exact Euclidean projection of y onto cone(gens) by enumerating faces.

    Each face gives a candidate through least squares; the projection is the
    candidate satisfying the optimality conditions ``<y - p, g> <= 0`` for
    every generator, picked by smallest violation so that tiny inputs are
    handled without absolute thresholds.
    """
    m = len(y)
    scale = np.linalg.norm(gens, axis=1)
    best, best_v = np.zeros(m), float(np.max(gens @ y / scale, initial=0.0))
    for r in range(1, min(m, len(gens)) + 1):
        for idx in itertools.combinations(range(len(gens)), r):
            g = gens[list(idx)].T  # (m, r)
            if np.linalg.matrix_rank(g, tol=1e-12) < r:
                continue
            lam, *_ = np.linalg.lstsq(g, y, rcond=None)
            if np.any(lam < 0.0):
                continue
            p = g @ lam
            v = float(np.max(gens @ (y - p) / scale, initial=0.0))
            if v < best_v:
                best, best_v = p, v
    return best


def min_normal_shift(sigma, u, U: ControlPolytope) -> np.ndarray:
    """Smallest ``rho`` with ``rho - sigma`` in the normal cone of U at vertex u."""
    sigma = np.asarray(sigma, dtype=float)
    u = np.asarray(u, dtype=float)
    i = U.vertex_index(u)
    if i is None:
        raise PolytopeError(f"{u.tolist()} is not a vertex of the control set")
    if U.is_box:
        at_hi = np.isclose(u, U.hi, rtol=0, atol=1e-12)
        return np.where(at_hi, np.maximum(sigma, 0.0), np.minimum(sigma, 0.0))
    if U.m > 3:
        raise PolytopeError("normal-cone projection supports non-box sets only for m <= 3")
    # rho = -P_K(-sigma) with K the tangent cone spanned by edges leaving u
    gens = np.array([U.vertices[j] - U.vertices[i] for j in U.neighbors(i)])
    return -_project_onto_cone(-sigma, gens)


def box_shift_array(sigma: np.ndarray, u: np.ndarray, U: ControlPolytope) -> np.ndarray:
    """Vectorized :func:`min_normal_shift` for rows of ``sigma`` and ``u``."""
    if U.is_box:
        at_hi = np.isclose(u, U.hi, rtol=0, atol=1e-12)
        return np.where(at_hi, np.maximum(sigma, 0.0), np.minimum(sigma, 0.0))
    return np.array([min_normal_shift(s, v, U) for s, v in zip(sigma, u)])


def inclusion_defect(c, u, U: ControlPolytope) -> float:
    """How far ``-c`` is from ``N_U(u)``: ``max(0, -min_v <c, v - u>)``."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    worst = (c @ U.vertices.T - np.sum(c * u, axis=1, keepdims=True)).min(axis=1)
    return float(max(0.0, -worst.min()))
