"""Perturbation experiments: (y, z) pairs with z in Phi(y), distances, and Hölder fits."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bangbang import SweepOptions, fb_sweep_solve, reference_solution
from .certify import overwrite
from .control import PiecewiseConstantControl
from .dynamics import (
    DEFAULT_N,
    GridFunction,
    ResidualTuple,
    Solution,
    make_grid,
    switching_for_control,
    verify_inclusion,
)
from .errors import ConfigError, IntegrationError, SweepError, TieError
from .metrics import dY, dZ, zero_set
from .polytope import box_shift_array, min_normal_shift
from .problem import AffineProblem

log = logging.getLogger(__name__)

FAMILY_KINDS = (
    "constant-rho", "sinusoidal-rho", "needle-control", "initial-offset-eta",
    "terminal-offset-zeta", "state-residual-xi", "adjoint-residual-pi", "mixed",
)
INTEGRATOR_TOL = 1e-10
FIT_FLOOR = 100 * INTEGRATOR_TOL  # rungs with d_Z below this are not fitted
INCLUSION_TOL = 1e-7


@dataclass
class PerturbationSpec:
    family: str = "constant-rho"
    ladder: tuple = tuple(np.geomspace(1e-4, 1e-1, 16))
    seeds: tuple = (0,)

    def __post_init__(self):
        if self.family not in FAMILY_KINDS:
            raise ConfigError(f"unknown perturbation family {self.family!r}; expected one of {FAMILY_KINDS}")
        lad = np.asarray(self.ladder, dtype=float)
        if lad.size == 0:
            raise ConfigError("magnitude ladder is empty")
        if np.any(lad <= 0) or np.any(np.diff(lad) <= 0):
            raise ConfigError("magnitude ladder must be positive and strictly increasing")
        if len(self.seeds) == 0:
            raise ConfigError("at least one seed is required")
        self.ladder = tuple(float(v) for v in lad)
        self.seeds = tuple(int(s) for s in self.seeds)

    @classmethod
    def geometric(cls, family, lo, hi, rungs, seeds=(0,)) -> "PerturbationSpec":
        return cls(family, tuple(np.geomspace(lo, hi, rungs)), tuple(seeds))


@dataclass
class ExperimentRow:
    magnitude: float
    d_Z: float
    u_l1: float
    dstar: float
    d_Y: float
    iterations: int
    inclusion_defect: float
    family: str = ""
    seed: int = 0
    hyp_ii: bool = True  # ||u - u_hat||_1 <= a
    hyp_iii: bool = True  # d_Z <= b
    valid: bool = True

    @property
    def usable(self) -> bool:
        """Counted in fits: valid and above the integrator noise floor."""
        return self.valid and self.d_Z >= FIT_FLOOR

    @staticmethod
    def columns() -> list:
        return [f.name for f in fields(ExperimentRow)]

    def values(self) -> list:
        return [getattr(self, c) for c in self.columns()]


# ------------------------------------------------------------------ pairs


def _rho_for(prob, t, sigma, u):
    Ui = u.interval_values(t)
    sl, sr = sigma[:-1], sigma[1:]
    if prob.U.is_box:
        return box_shift_array(sl, Ui, prob.U), box_shift_array(sr, Ui, prob.U)
    left = np.array([min_normal_shift(s, v, prob.U) for s, v in zip(sl, Ui)])
    right = np.array([min_normal_shift(s, v, prob.U) for s, v in zip(sr, Ui)])
    return left, right


def inverse_pair(prob: AffineProblem, u: PiecewiseConstantControl, y_hat=None, *, N: int = DEFAULT_N,
                 tol: float = 1e-8):
    """(y, z) with z in Phi(y) built from a control.

    State and adjoint are solved exactly for u, so only the stationarity
    residual rho is non-zero; it is the smallest normal shift making the
    inclusion hold at every node.
    """
    bps = [u.breakpoints] if y_hat is None else [u.breakpoints, y_hat.u.breakpoints]
    grid = make_grid(prob.T, N, np.concatenate(bps))
    x, p, prof = switching_for_control(prob, u, grid=grid)
    left, right = _rho_for(prob, prof.t, prof.sigma, u)
    z = ResidualTuple(rho=GridFunction(prof.t, left, right))
    rep = verify_inclusion(prob, x, p, u, z, tol=tol)
    if not rep.passed:
        raise IntegrationError(f"inverse pair fails inclusion rows {rep.failed_rows()} "
                               f"(max defect {rep.max_defect:.3g})")
    return Solution(x, p, u, prof), z


def forward_pair(prob: AffineProblem, z: ResidualTuple, opts: SweepOptions | None = None):
    """Solve ``z in Phi(y)`` for y by the sweep; returns the sweep result."""
    return fb_sweep_solve(prob, z, None, opts or SweepOptions())


# ------------------------------------------------------------------ families


def _unit(rng, k):
    v = rng.normal(size=k)
    return v / np.linalg.norm(v)


def _rho_direction(prob, y_hat):
    # push the switching function towards a sign change
    sig = np.atleast_1d(y_hat.profile.dense(0.5 * prob.T)).astype(float)
    d = np.where(sig >= 0, 1.0, -1.0)
    return d / np.linalg.norm(d)


def build_residual(prob: AffineProblem, family: str, c: float, rng, y_hat, N: int = DEFAULT_N) -> ResidualTuple:
    """Residual tuple of image-space size c for the given family."""
    T = prob.T
    t = np.linspace(0.0, T, N + 1)
    if family == "constant-rho":
        return ResidualTuple(rho=GridFunction.constant(t, c * _rho_direction(prob, y_hat)))
    if family == "sinusoidal-rho":
        f, ph = rng.uniform(0.5, 3.0), rng.uniform(0, 2 * np.pi)
        d = _rho_direction(prob, y_hat)
        wave = np.sin(2 * np.pi * f * t / T + ph)
        wave = wave / np.abs(wave).max()
        return ResidualTuple(rho=GridFunction.from_nodes(t, c * np.outer(wave, d)))
    if family == "initial-offset-eta":
        return ResidualTuple(eta=c * np.abs(_unit(rng, prob.n)))
    if family == "terminal-offset-zeta":
        return ResidualTuple(zeta=c * _unit(rng, prob.n))
    if family == "state-residual-xi":
        return ResidualTuple(xi=GridFunction.constant(t, (c / T) * _unit(rng, prob.n)))
    if family == "adjoint-residual-pi":
        return ResidualTuple(pi=GridFunction.constant(t, (c / T) * _unit(rng, prob.n)))
    if family == "mixed":
        parts = [build_residual(prob, k, c / 5, rng, y_hat, N) for k in (
            "constant-rho", "initial-offset-eta", "terminal-offset-zeta", "state-residual-xi",
            "adjoint-residual-pi")]
        return ResidualTuple(parts[3].xi, parts[1].eta, parts[4].pi, parts[2].zeta, parts[0].rho)
    raise ConfigError(f"family {family!r} has no residual builder")


# ------------------------------------------------------------------ fits


@dataclass
class HolderFit:
    theta: float
    kappa: float
    residual: float
    n: int


def holder_fit(rows, min_rows: int = 6, min_decades: float = 2.0) -> HolderFit:
    """Least-squares fit ``log d_Y = theta log d_Z + log kappa`` over usable rows."""
    use = [r for r in rows if r.usable and r.d_Y > 0]
    if len(use) < min_rows:
        raise ValueError(f"need at least {min_rows} usable rows with d_Y > 0, got {len(use)}")
    X = np.log10([r.d_Z for r in use])
    if X.max() - X.min() < min_decades * (1 - 1e-9):
        raise ValueError(f"d_Z spans {X.max() - X.min():.2f} decades; need {min_decades}")
    Y = np.log10([r.d_Y for r in use])
    (slope, icpt), res, *_ = np.polyfit(X, Y, 1, full=True)
    resid = float(np.sqrt(res[0] / len(use))) if len(res) else 0.0
    return HolderFit(float(slope), float(10.0**icpt), resid, len(use))


def uniform_constant(num, den, exponent) -> float:
    """Smallest C with ``num <= C den^exponent`` row-wise."""
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    return float(np.max(num / den**exponent)) if len(num) else 0.0


@dataclass
class ExperimentResult:
    rows: list
    fit: HolderFit | None
    summary: dict = field(default_factory=dict)


def _row(prob, spec, c, seed, rng, y_hat, Z, a, b, N, opts) -> ExperimentRow:
    if spec.family == "needle-control":
        width = min(c, prob.T)
        start = float(rng.uniform(0.0, prob.T - width))
        here = y_hat.u(start)
        others = [v for v in prob.U.vertices if not np.allclose(v, here)]
        u = overwrite(y_hat.u, start, start + width, others[rng.integers(len(others))])
        y, z = inverse_pair(prob, u, y_hat, N=N, tol=INCLUSION_TOL)
        iters = 0
    else:
        z = build_residual(prob, spec.family, c, rng, y_hat, N)
        y = forward_pair(prob, z, opts)
        iters = y.iterations
    rep = verify_inclusion(prob, y.x, y.p, y.u, z, tol=INCLUSION_TOL)
    dz = dZ(z)
    dy = dY(y, y_hat, Z, prob.T)
    row = ExperimentRow(
        magnitude=float(c), d_Z=dz, u_l1=dy.u_l1, dstar=dy.dstar, d_Y=dy.total,
        iterations=int(iters), inclusion_defect=rep.max_defect, family=spec.family, seed=int(seed),
        hyp_ii=bool(dy.u_l1 <= a * (1 + 1e-12)), hyp_iii=bool(dz <= b * (1 + 1e-12)),
    )
    row.valid = rep.passed and row.hyp_ii and row.hyp_iii
    return row


def run_experiment(prob: AffineProblem, spec: PerturbationSpec, y_hat=None, constants=None, Z=None,
                   *, a: float | None = None, b: float | None = None, N: int = DEFAULT_N,
                   opts: SweepOptions | None = None, on_failure: str = "raise") -> ExperimentResult:
    """One row per rung per seed, hypothesis flags, Hölder fit and uniform constants.

    ``a`` defaults to alpha0 and ``b`` to rho1 from the constants when present;
    Z defaults to the zero set of the reference switching function. With
    ``on_failure="flag"`` a rung whose sweep fails (for instance because the
    perturbed solution has a singular arc) becomes an invalid row with NaN
    distances instead of aborting the run.
    """
    if on_failure not in ("raise", "flag"):
        raise ValueError("on_failure must be 'raise' or 'flag'")
    y_hat = y_hat or reference_solution(prob, N=N)
    if Z is None:
        Z = zero_set(y_hat.profile, prob.U.edge_dirs)
    nu = getattr(constants, "nu", None) or 1.0
    a = a if a is not None else (getattr(constants, "alpha0", None) or 0.1 * prob.T * prob.U.diameter())
    b = b if b is not None else (getattr(constants, "rho1", None) or float("inf"))
    opts = opts or SweepOptions(N=N)
    rows = []
    for seed in spec.seeds:
        for k, c in enumerate(spec.ladder):
            rng = np.random.default_rng([seed, k])
            try:
                rows.append(_row(prob, spec, c, seed, rng, y_hat, Z, a, b, N, opts))
            except (SweepError, TieError, IntegrationError) as exc:
                if on_failure == "raise":
                    raise
                log.warning("rung %g (seed %d) failed: %s", c, seed, exc)
                nan = float("nan")
                rows.append(ExperimentRow(float(c), nan, nan, nan, nan, -1, nan, spec.family, int(seed),
                                          False, False, False))
    usable = [r for r in rows if r.usable]
    try:
        fit = holder_fit(rows)
    except ValueError as exc:
        log.warning("no Hölder fit: %s", exc)
        fit = None
    expo = 1.0 / nu**2
    dzs = [r.d_Z for r in usable]
    summary = {
        "nu": nu, "exponent": expo, "a": a, "b": b,
        "n_rows": len(rows), "n_usable": len(usable), "n_flagged": sum(not r.valid for r in rows),
        "n_failed": sum(r.iterations < 0 for r in rows),
        "theta_hat": None if fit is None else fit.theta,
        "kappa_hat": None if fit is None else fit.kappa,
        "fit_residual": None if fit is None else fit.residual,
        "kappa_star": uniform_constant([r.d_Y for r in usable], dzs, expo),
        "C_l1": uniform_constant([r.u_l1 for r in usable], dzs, 1.0 / nu),
        "C_dstar": uniform_constant([r.dstar for r in usable], dzs, expo),
    }
    if fit is not None:
        summary["theorem_consistent"] = bool(summary["kappa_star"] <= 10 * fit.kappa)
    return ExperimentResult(rows, fit, summary)


def rows_as_dicts(rows) -> list:
    return [asdict(r) for r in rows]
