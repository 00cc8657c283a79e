"""Affine optimal control problems and their Hamiltonian.

A problem is

    minimize   l(x(T)) + int_0^T [ w(t,x) + <s(t,x), u> ] dt
    subject to x' = a(t,x) + B(t,x) u,  x(0) = x0,  u(t) in U,

with every data function given as an :class:`~bangreg.expr.Expression`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ProblemError
from .expr import Dual, Expression, parse, to_text
from .polytope import ControlPolytope, make_box, polytope_from_dict

BUILTINS = ("example4-quadratic", "example4-gaussian")


@dataclass(frozen=True, eq=False)
class AffineProblem:
    n: int
    m: int
    T: float
    x0: np.ndarray
    U: ControlPolytope
    a: tuple  # n expressions
    B: tuple  # n rows of m expressions
    w: Expression
    s: tuple  # m expressions
    l: Expression
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.T > 0:
            raise ProblemError("horizon T must be positive")
        if len(self.x0) != self.n:
            raise ProblemError(f"x0 has length {len(self.x0)}, expected {self.n}")
        if self.U.m != self.m:
            raise ProblemError(f"control set has dimension {self.U.m}, expected {self.m}")
        if len(self.a) != self.n or len(self.B) != self.n:
            raise ProblemError("a and B must have n rows")
        if any(len(row) != self.m for row in self.B) or len(self.s) != self.m:
            raise ProblemError("B rows and s must have m entries")
        for e in self.expressions():
            if e.n != self.n:
                raise ProblemError("all expressions must use the problem's state dimension")
        if self.l.depends_on_t:
            raise ProblemError("terminal cost l must depend on x only")

    def expressions(self):
        yield from self.a
        for row in self.B:
            yield from row
        yield self.w
        yield from self.s
        yield self.l

    @property
    def state_depends_on_x(self) -> bool:
        return any(e.depends_on_x for e in self.a) or any(
            e.depends_on_x for row in self.B for e in row
        )

    @property
    def is_builtin(self) -> bool:
        return self.name in BUILTINS

    def to_dict(self) -> dict:
        if self.is_builtin:
            return {"builtin": self.name, "params": dict(self.params)}
        return {
            "n": self.n,
            "m": self.m,
            "T": self.T,
            "x0": self.x0.tolist(),
            "U": self.U.to_dict(),
            "a": [to_text(e) for e in self.a],
            "B": [[to_text(e) for e in row] for row in self.B],
            "w": to_text(self.w),
            "s": [to_text(e) for e in self.s],
            "l": to_text(self.l),
        }


def make_problem(
    *, n, m, T, x0, U, a, B, w, s, l="0", name="custom", params=None
) -> AffineProblem:
    """Build a problem from expression strings (or already parsed expressions)."""

    def ex(v):
        return v if isinstance(v, Expression) else parse(str(v), n)

    if not isinstance(U, ControlPolytope):
        U = polytope_from_dict(U)
    B_rows = tuple(tuple(ex(v) for v in row) for row in B)
    return AffineProblem(
        n=int(n),
        m=int(m),
        T=float(T),
        x0=np.asarray(x0, dtype=float).reshape(-1),
        U=U,
        a=tuple(ex(v) for v in a),
        B=B_rows,
        w=ex(w),
        s=tuple(ex(v) for v in s),
        l=ex(l),
        name=name,
        params=dict(params or {}),
    )


def builtin(name: str, params: dict | None = None) -> AffineProblem:
    """Problems of the form min int alpha(x) + t^nu u, x' = u, x(0)=0, u in [0,1]."""
    params = dict(params or {})
    if name not in BUILTINS:
        raise ProblemError(f"unknown builtin problem {name!r}; choose from {BUILTINS}")
    nu = params.get("nu", 2)
    T = params.get("T", 1.0)
    if not nu >= 1:
        raise ProblemError("nu must be at least 1")
    if not T > 0:
        raise ProblemError("T must be positive")
    nu_text = str(int(nu)) if float(nu).is_integer() else repr(float(nu))
    w = "x1^2" if name == "example4-quadratic" else "1 - exp(-x1^2)"
    return make_problem(
        n=1, m=1, T=T, x0=[0.0], U=make_box([0.0], [1.0]),
        a=["0"], B=[["1"]], w=w, s=[f"t^{nu_text}"], l="0",
        name=name, params={"nu": nu, "T": T},
    )


def problem_from_dict(spec: dict) -> AffineProblem:
    if "builtin" in spec:
        return builtin(spec["builtin"], spec.get("params"))
    missing = [k for k in ("n", "m", "T", "x0", "U", "a", "B", "w", "s") if k not in spec]
    if missing:
        raise ProblemError(f"problem definition is missing fields: {', '.join(missing)}")
    return make_problem(
        n=spec["n"], m=spec["m"], T=spec["T"], x0=spec["x0"], U=spec["U"],
        a=spec["a"], B=spec["B"], w=spec["w"], s=spec["s"], l=spec.get("l", "0"),
    )


@dataclass
class CertificationConstants:
    """Constants of the growth and regularity conditions (None when not estimated)."""

    nu: float | None = None
    mu: float | None = None
    tau: float | None = None
    gamma0: float | None = None
    alpha0: float | None = None
    gamma: float | None = None
    gamma1: float | None = None
    kappa0: float | None = None
    kappa1: float | None = None
    rho1: float | None = None
    delta: float | None = None

    def check(self, T: float) -> list[str]:
        """Violations of the internal consistency relations between constants."""
        issues = []
        for name, value in vars(self).items():
            if value is not None and not value > 0 and name not in ("gamma1",):
                issues.append(f"{name} must be positive (got {value})")
        if self.gamma1 is not None and self.gamma1 < 0:
            issues.append("gamma1 must be non-negative")
        if None not in (self.kappa0, self.mu, self.delta, self.nu):
            want = min(self.mu, self.delta / T**self.nu)
            if not np.isclose(self.kappa0, want, rtol=1e-12, atol=0):
                issues.append("kappa0 != min(mu, delta / T^nu)")
        if None not in (self.kappa0, self.kappa1, self.nu) and not self.kappa0 * self.kappa1**self.nu > 1:
            issues.append("kappa0 * kappa1^nu must exceed 1")
        if None not in (self.rho1, self.kappa1, self.nu) and not self.rho1 < (T / self.kappa1) ** self.nu:
            issues.append("rho1 must be below (T / kappa1)^nu")
        return issues


def _point(prob: AffineProblem, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if len(x) != prob.n:
        raise ProblemError(f"state has length {len(x)}, expected {prob.n}")
    return x


def _hamiltonian_value(prob, t, xs, u, p):
    h = prob.w.raw(t, xs)
    for j in range(prob.m):
        h = h + prob.s[j].raw(t, xs) * u[j]
    for i in range(prob.n):
        fi = prob.a[i].raw(t, xs)
        for j in range(prob.m):
            fi = fi + prob.B[i][j].raw(t, xs) * u[j]
        h = h + p[i] * fi
    return h


def hamiltonian(prob: AffineProblem, t, x, u, p) -> float:
    """``H = w + <s, u> + <p, a + B u>`` at one point."""
    x = _point(prob, x)
    u = np.asarray(u, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    return float(_hamiltonian_value(prob, float(t), [float(v) for v in x], u, p))


def grad_x_hamiltonian(prob: AffineProblem, t, x, u, p) -> np.ndarray:
    """Exact x-gradient of the Hamiltonian via dual arithmetic."""
    x = _point(prob, x)
    u = np.asarray(u, dtype=float).reshape(-1)
    p = np.asarray(p, dtype=float).reshape(-1)
    xs = [Dual.variable(float(v), i, prob.n) for i, v in enumerate(x)]
    h = _hamiltonian_value(prob, float(t), xs, u, p)
    if not isinstance(h, Dual):
        return np.zeros(prob.n)
    return np.asarray(h.partials, dtype=float)


def dynamics(prob: AffineProblem, t, x, u) -> np.ndarray:
    """``f(t, x, u) = a(t, x) + B(t, x) u`` at one point."""
    xs = [float(v) for v in _point(prob, x)]
    u = np.asarray(u, dtype=float).reshape(-1)
    out = np.empty(prob.n)
    for i in range(prob.n):
        fi = prob.a[i].raw(float(t), xs)
        for j in range(prob.m):
            fi = fi + prob.B[i][j].raw(float(t), xs) * u[j]
        out[i] = fi
    return out
