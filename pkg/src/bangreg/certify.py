"""Numerical certification of the growth and switching-regularity conditions.

Everything here is empirical: local orders are fitted on samples, the growth
constants are minima over a sampled family of controls, and the lemma checks
are verified on grids. Reports say so explicitly.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .bangbang import pointwise_minimizer, reference_solution
from .control import PiecewiseConstantControl, disagreement_set, l1_distance
from .dynamics import DEFAULT_N, SwitchingProfile, make_grid, switching_for_control
from .errors import CertificationError
from .metrics import ZeroSet, sigma_eps, zero_set
from .problem import AffineProblem, CertificationConstants

log = logging.getLogger(__name__)

EMPIRICAL = "empirical over family F"
FIT_WINDOW = (1e-4, 1.0)  # relative to tau
FIT_SAMPLES = 64
SMALL = 1e-12  # samples of |<sigma, e>| below this are not fitted
FAMILIES = ("needle", "multi", "near_zero")


# ------------------------------------------------------------------ local order


@dataclass
class LocalOrder:
    nu: float
    mu: float
    mu_fit: float
    residual: float
    n_samples: int


def _window_samples(profile: SwitchingProfile, s, e, tau, fit_window=FIT_WINDOW, n=FIT_SAMPLES):
    T = profile.T
    d = np.geomspace(fit_window[0] * tau, fit_window[1] * tau, n)
    pts = np.concatenate([s + d[s + d <= T], s - d[s - d >= 0.0]])
    if len(pts) == 0:
        return pts, pts
    g = np.abs(np.atleast_2d(profile.dense(pts)) @ np.asarray(e, dtype=float))
    return np.abs(pts - s), g


def tighten_mu(dist, g, nu: float) -> float:
    """Largest mu with ``g >= mu * dist^nu`` on all samples."""
    keep = dist > 0
    return float(np.min(g[keep] / dist[keep] ** nu))


def estimate_local_order(profile, s: float, e, tau: float, fit_window=FIT_WINDOW) -> LocalOrder:
    """Fit ``|<sigma(t), e>| ~ mu |t - s|^nu`` near the zero s.

    The slope of the log-log least-squares fit gives nu; mu is then the
    largest constant for which the inequality holds on every window sample.
    """
    if tau <= 0:
        raise CertificationError("tau must be positive")
    dist, g = _window_samples(profile, s, e, tau, fit_window)
    ok = g > SMALL
    if ok.sum() < 8:
        raise CertificationError(
            f"only {int(ok.sum())} usable samples near s = {s:.6g}; need at least 8"
        )
    X, Y = np.log(dist[ok]), np.log(g[ok])
    (slope, intercept), res, *_ = np.polyfit(X, Y, 1, full=True)
    resid = float(np.sqrt(res[0] / ok.sum())) if len(res) else 0.0
    return LocalOrder(float(slope), tighten_mu(dist[ok], g[ok], slope), float(np.exp(intercept)), resid,
                      int(ok.sum()))


def default_tau(Z, T: float) -> float:
    times = sorted(float(s) for s in Z)
    tau = 0.5 * T
    if len(times) > 1:
        tau = min(tau, 0.5 * float(np.min(np.diff(times))))
    return tau


# ------------------------------------------------------------------ assumption 3


@dataclass
class A3Report:
    passed: bool
    worst_margin: float
    details: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return asdict(self)


def check_assumption3(profile, Z: ZeroSet, nu: float, mu: float, tau: float, rtol: float = 1e-9) -> A3Report:
    """Verify ``|<sigma(t), e>| >= mu |t - s|^nu`` on ``[s - tau, s + tau]`` for every zero.

    Samples are the grid nodes inside the window plus log-spaced offsets that
    resolve the neighbourhood of s. Margins within rtol of the bound count as
    equality.
    """
    if Z.is_empty:
        return A3Report(True, float("inf"), [])
    T = profile.T
    details, worst, passed = [], float("inf"), True
    d_log = np.geomspace(FIT_WINDOW[0] * tau, tau, FIT_SAMPLES)
    for i, s in enumerate(Z.times):
        inside = profile.t[(profile.t >= s - tau) & (profile.t <= s + tau)]
        pts = np.unique(np.concatenate([inside, s + d_log, s - d_log]))
        pts = pts[(pts >= 0.0) & (pts <= T) & (pts != s)]
        sig = np.atleast_2d(profile.dense(pts))
        for e in Z.directions(i):
            g = np.abs(sig @ e)
            bound = mu * np.abs(pts - s) ** nu
            margin = g - bound
            k = int(np.argmin(margin))
            ok = bool(np.all(margin >= -rtol * bound))
            passed &= ok
            worst = min(worst, float(margin[k]))
            details.append({"s": float(s), "e": e.tolist(), "passed": ok,
                            "worst_margin": float(margin[k]), "t_worst": float(pts[k])})
    return A3Report(passed, worst, details)


# ------------------------------------------------------------------ samplers


def overwrite(u: PiecewiseConstantControl, a: float, b: float, v) -> PiecewiseConstantControl:
    """u with the value v on [a, b)."""
    bp = np.unique(np.concatenate([u.breakpoints, [a, b]]))
    bp = bp[(bp >= 0.0) & (bp <= u.T)]
    vals = u.interval_values(bp)
    mids = 0.5 * (bp[:-1] + bp[1:])
    vals[(mids >= a) & (mids < b)] = v
    return PiecewiseConstantControl.from_segments(bp[:-1], vals, u.T)


@dataclass
class ControlSampler:
    """Random vertex-valued perturbations of u_hat with ``||u - u_hat||_1 <= alpha0``.

    Families: single needles at random places, multi-pulse combinations, and
    needles attached to the zeros of the reference switching function.
    """

    u_hat: PiecewiseConstantControl
    U: object
    alpha0: float
    zeros: tuple = ()
    families: tuple = FAMILIES
    seed: int = 0
    min_fraction: float = 1e-3  # smallest L1 size relative to alpha0

    def __post_init__(self):
        bad = set(self.families) - set(FAMILIES)
        if bad:
            raise ValueError(f"unknown sampler families {sorted(bad)}")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")

    @property
    def T(self) -> float:
        return self.u_hat.T

    def _vertex(self, rng, t):
        cur = self.u_hat(t)
        V = self.U.vertices
        others = [v for v in V if np.linalg.norm(v - cur) > 1e-12]
        return others[rng.integers(len(others))] if others else cur

    def _size(self, rng):
        return float(np.exp(rng.uniform(np.log(self.min_fraction * self.alpha0), np.log(self.alpha0))))

    def _needle(self, rng, u, a, size):
        v = self._vertex(rng, a)
        width = size / max(float(np.linalg.norm(v - self.u_hat(a))), 1e-300)
        return overwrite(u, a, min(a + width, self.T), v)

    def _one(self, rng, family):
        T = self.T
        size = self._size(rng)
        if family == "near_zero" and len(self.zeros):
            s = float(self.zeros[rng.integers(len(self.zeros))])
            width = size / self.U.diameter()
            if rng.random() < 0.5 and s > 0:
                a = max(0.0, s - width)
            else:
                a = min(s, T - width)
            return self._needle(rng, self.u_hat, max(a, 0.0), size)
        if family == "multi":
            k = int(rng.integers(2, 6))
            u = self.u_hat
            for part in rng.dirichlet(np.ones(k)) * size:
                u = self._needle(rng, u, float(rng.uniform(0.0, T)), part)
            return u
        return self._needle(rng, self.u_hat, float(rng.uniform(0.0, T)), size)

    def sample(self, n: int) -> list:
        """n controls, cycling through the families; degenerate draws are redrawn."""
        rng = np.random.default_rng(self.seed)
        out, tries = [], 0
        while len(out) < n:
            tries += 1
            if tries > 20 * n + 100:
                raise CertificationError("sampler keeps producing degenerate controls")
            u = self._one(rng, self.families[len(out) % len(self.families)])
            d = l1_distance(u, self.u_hat)
            if 0.0 < d <= self.alpha0 * (1 + 1e-12):
                out.append(u)
        return out


# ------------------------------------------------------------------ growth checks


def _controls(sampler, n_samples):
    if isinstance(sampler, ControlSampler):
        return sampler.sample(n_samples)
    return list(sampler)[:n_samples] if n_samples else list(sampler)


def _pairing(prob, u, u_hat, N, sigma_ref=None):
    """``int <sigma[u], u - u_hat>`` (Simpson per interval) and ``||u - u_hat||_1``.

    With sigma_ref the integrand uses ``sigma[u] - sigma_ref`` instead.
    """
    grid = make_grid(prob.T, N, np.concatenate([u.breakpoints, u_hat.breakpoints]))
    _, _, prof = switching_for_control(prob, u, grid=grid)
    t = prof.t
    mids = 0.5 * (t[:-1] + t[1:])
    sl, sm, sr = prof.sigma[:-1], np.atleast_2d(prof.dense(mids)), prof.sigma[1:]
    if sigma_ref is not None:
        sl = sl - np.atleast_2d(sigma_ref.dense(t[:-1]))
        sm = sm - np.atleast_2d(sigma_ref.dense(mids))
        sr = sr - np.atleast_2d(sigma_ref.dense(t[1:]))
    dv = u.interval_values(t) - u_hat.interval_values(t)
    h = np.diff(t)
    integrand = np.einsum("km,km->k", sl + 4 * sm + sr, dv) / 6.0
    num = float(np.sum(h * integrand))
    l1 = float(np.sum(h * np.linalg.norm(dv, axis=1)))
    scale = float(np.abs(prof.sigma).max()) if prof.sigma.size else 1.0
    floor = 1e-12 * max(scale, 1.0) * l1  # roundoff level of the pairing
    if -floor <= num < 0.0:
        num = 0.0
    return num, l1


@dataclass
class GrowthReport:
    constant: float  # gamma0_hat for growth, gamma1_hat for EH70
    ratios: list
    worst_index: int
    worst_control: dict
    violations: list
    n_samples: int
    label: str = EMPIRICAL

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "constant": self.constant, "n_samples": self.n_samples, "passed": self.passed,
            "min_ratio": float(min(self.ratios)) if self.ratios else None,
            "worst_control": self.worst_control, "violations": self.violations[:10],
            "n_violations": len(self.violations), "label": self.label,
        }


def _control_dict(u: PiecewiseConstantControl) -> dict:
    return {"breakpoints": u.breakpoints.tolist(), "values": u.values.tolist()}


def check_growth(prob: AffineProblem, u_hat, nu: float, sampler, n_samples: int = 500,
                 N: int = DEFAULT_N) -> GrowthReport:
    """Minimum of ``int <sigma[u], u - u_hat> / ||u - u_hat||_1^(nu+1)`` over sampled u.

    Each sample gets a fresh state/adjoint solve. Negative numerators are
    violations of the growth condition.
    """
    us = _controls(sampler, n_samples)
    ratios, violations = [], []
    for i, u in enumerate(us):
        num, l1 = _pairing(prob, u, u_hat, N)
        if l1 == 0.0:
            continue
        ratios.append(num / l1 ** (nu + 1))
        if num < 0.0:
            violations.append({"index": i, "numerator": num, "l1": l1})
    if not ratios:
        raise CertificationError("no non-degenerate samples")
    k = int(np.argmin(ratios))
    return GrowthReport(float(ratios[k]), ratios, k, _control_dict(us[k]), violations, len(ratios))


def check_EH70(prob: AffineProblem, u_hat, nu: float, sampler, n_samples: int = 500,
               N: int = DEFAULT_N, sigma_hat: SwitchingProfile | None = None) -> GrowthReport:
    """``gamma1_hat = max(0, -min int <sigma[u] - sigma[u_hat], v> / ||v||_1^(nu+1))``, v = u - u_hat."""
    if sigma_hat is None:
        _, _, sigma_hat = switching_for_control(prob, u_hat, N=N)
    us = _controls(sampler, n_samples)
    ratios = []
    for u in us:
        num, l1 = _pairing(prob, u, u_hat, N, sigma_ref=sigma_hat)
        if l1 > 0.0:
            ratios.append(num / l1 ** (nu + 1))
    if not ratios:
        raise CertificationError("no non-degenerate samples")
    k = int(np.argmin(ratios))
    return GrowthReport(max(0.0, -float(ratios[k])), ratios, k, _control_dict(us[k]), [], len(ratios))


# ------------------------------------------------------------------ lemma checks


def _samples_on(intervals, t_grid):
    pts = [t_grid[(t_grid >= a) & (t_grid <= b)] for a, b in intervals]
    pts.append(np.array([x for ab in intervals for x in ab]))
    return np.unique(np.concatenate(pts)) if intervals else np.array([])


def _min_edge_value(profile, pts, E):
    if len(pts) == 0:
        return float("inf")
    sig = np.atleast_2d(profile.dense(pts))
    return float(np.min(np.abs(sig @ np.asarray(E, dtype=float).T)))


@dataclass
class Lemma2Report:
    kappa0: float
    delta: float
    passed: bool
    eps: list
    margins: list

    def as_dict(self) -> dict:
        return asdict(self)


def lemma2_check(profile, Z, E, nu: float, mu: float | None, tau: float, T: float | None = None,
                 eps_grid=None) -> Lemma2Report:
    """``kappa0 = min(mu, delta / T^nu)`` and ``|<sigma, e>| >= kappa0 eps^nu`` on Sigma(eps).

    delta is the infimum of ``|<sigma, e>|`` over e and ``t`` in Sigma(tau);
    with no zeros mu plays no role.
    """
    T = profile.T if T is None else float(T)
    eps_grid = np.geomspace(0.01, T, 16) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    delta = _min_edge_value(profile, _samples_on(sigma_eps(Z, tau, T), profile.t), E)
    cands = [delta / T**nu]
    if len(list(Z)) and mu is not None:
        cands.append(mu)
    kappa0 = float(min(cands))
    margins = []
    for eps in eps_grid:
        g = _min_edge_value(profile, _samples_on(sigma_eps(Z, eps, T), profile.t), E)
        margins.append(float(g - kappa0 * eps**nu) if np.isfinite(g) else float("inf"))
    passed = all(m >= 0.0 for m in margins)
    return Lemma2Report(kappa0, float(delta), passed, eps_grid.tolist(), margins)


def lemma3_constants(kappa0: float, nu: float, T: float) -> tuple[float, float]:
    """Default ``kappa1 = 1.1 kappa0^(-1/nu)`` and ``rho1 = 0.9 (T / kappa1)^nu``."""
    kappa1 = 1.1 * kappa0 ** (-1.0 / nu)
    return kappa1, 0.9 * (T / kappa1) ** nu


def random_perturbations(T: float, m: int, rho1: float, count: int, seed: int = 0) -> list:
    """Vectorized callables ``rho(t) -> (K, m)`` with sup norm at most rho1."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        amp = rho1 * rng.uniform(0.1, 1.0) * rng.choice([-1.0, 1.0], size=m)
        kind = i % 3
        if kind == 0:
            out.append(lambda t, amp=amp: np.outer(np.ones_like(np.atleast_1d(t)), amp))
        elif kind == 1:
            f, ph = rng.uniform(0.5, 5.0), rng.uniform(0, 2 * np.pi)
            out.append(lambda t, amp=amp, f=f, ph=ph: np.outer(np.sin(2 * np.pi * f * np.atleast_1d(t) / T + ph), amp))
        else:
            knots = np.linspace(0.0, T, 9)
            vals = rng.uniform(-1.0, 1.0, size=(9, m)) * np.abs(amp)
            out.append(lambda t, k=knots, v=vals: np.stack(
                [np.interp(np.atleast_1d(t), k, v[:, j]) for j in range(v.shape[1])], axis=-1))
    return out


@dataclass
class Lemma3Report:
    passed: bool
    kappa1: float
    rho1: float
    cases: list

    def as_dict(self) -> dict:
        return asdict(self)


def lemma3_check(prob: AffineProblem, u_hat, sigma_hat: SwitchingProfile, nu: float, kappa1: float,
                 rho1: float, perturbations, Z) -> Lemma3Report:
    """Controls of perturbed profiles agree with u_hat on ``Sigma(kappa1 ||rho||^(1/nu))``.

    Agreement is required up to a set of measure at most one grid step.
    """
    t = sigma_hat.t
    h = float(np.max(np.diff(t)))
    fine = np.unique(np.concatenate([t, 0.5 * (t[:-1] + t[1:])]))
    cases, passed = [], True
    for k, rho in enumerate(perturbations):
        size = float(np.max(np.linalg.norm(np.atleast_2d(rho(fine)), axis=-1)))
        if size > rho1 * (1 + 1e-12):
            raise CertificationError(f"perturbation {k} has sup norm {size:.6g} above rho1 = {rho1:.6g}")
        prof = SwitchingProfile.from_function(
            t, lambda tq, rho=rho: np.atleast_2d(sigma_hat.dense(tq)) + np.atleast_2d(rho(tq)))
        u = pointwise_minimizer(prof, None, prob.U, tie_policy="freeze", previous=u_hat)
        r = kappa1 * size ** (1.0 / nu)
        rigid = sigma_eps(Z, r, prob.T)
        bad, where = 0.0, None
        for a, b in disagreement_set(u, u_hat):
            for c, d in rigid:
                lo, hi = max(a, c), min(b, d)
                if hi > lo:
                    bad += hi - lo
                    where = where if where is not None else lo
        ok = bad <= h
        passed &= ok
        cases.append({"index": k, "sup_norm": size, "radius": r, "bad_measure": bad,
                      "offending_t": where, "passed": ok})
    return Lemma3Report(passed, kappa1, rho1, cases)


# ------------------------------------------------------------------ full report


@dataclass
class CertifyOptions:
    nu: float | None = None  # pinned growth order
    tau: float | None = None
    alpha0: float | None = None
    n_samples: int = 500
    n_lemma3: int = 20
    seed: int = 0
    families: tuple = FAMILIES
    N: int = DEFAULT_N
    growth: bool = True


@dataclass
class CertificationReport:
    constants: CertificationConstants
    zeros: ZeroSet
    local_orders: list
    nu_estimate: float | None
    assumption3: A3Report
    growth: GrowthReport | None
    eh70: GrowthReport | None
    lemma2: Lemma2Report
    lemma3: Lemma3Report | None
    issues: list
    elapsed: float

    @property
    def passed(self) -> bool:
        return (
            self.assumption3.passed
            and (self.growth is None or self.growth.passed)
            and self.lemma2.passed
            and (self.lemma3 is None or self.lemma3.passed)
            and not self.issues
        )

    def summary_lines(self) -> list:
        def word(ok):
            return "pass" if ok else "fail"

        lines = [f"Assumption 3: {word(self.assumption3.passed)}"]
        if self.growth is not None:
            lines.append(f"Assumption 2 ({EMPIRICAL}): {word(self.growth.passed)}")
        lines.append(f"Lemma 2: {word(self.lemma2.passed)}")
        if self.lemma3 is not None:
            lines.append(f"Lemma 3: {word(self.lemma3.passed)}")
        return lines

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "summary": self.summary_lines(),
            "constants": asdict(self.constants),
            "nu_estimate": self.nu_estimate,
            "zeros": self.zeros.as_dict(),
            "local_orders": self.local_orders,
            "assumption3": self.assumption3.as_dict(),
            "growth": None if self.growth is None else self.growth.as_dict(),
            "eh70": None if self.eh70 is None else self.eh70.as_dict(),
            "lemma2": self.lemma2.as_dict(),
            "lemma3": None if self.lemma3 is None else self.lemma3.as_dict(),
            "issues": self.issues,
            "elapsed_s": self.elapsed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def certify(prob: AffineProblem, reference=None, options: CertifyOptions | None = None) -> CertificationReport:
    """Estimate every certification constant for the reference solution and run all checks."""
    opts = options or CertifyOptions()
    start = time.perf_counter()
    ref = reference or reference_solution(prob, N=opts.N)
    profile = ref.profile
    T = prob.T
    E = prob.U.edge_dirs
    Z = zero_set(profile, E)
    tau = opts.tau or default_tau(Z, T)

    orders, fits = [], []
    for i, s in enumerate(Z.times):
        prov = []
        for e in Z.directions(i):
            lo = estimate_local_order(profile, s, e, tau)
            fits.append((s, e, lo))
            prov.append((tuple(e.tolist()), lo.nu))
            orders.append({"s": float(s), "e": e.tolist(), "nu_hat": lo.nu, "mu_hat": lo.mu,
                           "fit_residual": lo.residual})
        Z.provenance[i] = prov
    nu_est = float(max(1, round(max(lo.nu for *_, lo in fits)))) if fits else None
    nu = float(opts.nu) if opts.nu is not None else (nu_est or 1.0)
    mu = None
    if fits:
        # mu belongs to the estimated order; a pinned order is tested against it
        mu = min(tighten_mu(*_window_samples(profile, s, e, tau), nu_est) for s, e, _ in fits)
    a3 = check_assumption3(profile, Z, nu, mu if mu is not None else 1.0, tau)

    alpha0 = opts.alpha0 or 0.1 * T * prob.U.diameter()
    growth = eh70 = None
    if opts.growth:
        sampler = ControlSampler(ref.u, prob.U, alpha0, tuple(Z.times), opts.families, opts.seed)
        us = sampler.sample(opts.n_samples)
        growth = check_growth(prob, ref.u, nu, us, N=opts.N)
        eh70 = check_EH70(prob, ref.u, nu, us, N=opts.N, sigma_hat=profile)

    l2 = lemma2_check(profile, Z, E, nu, mu, tau, T)
    l3 = None
    kappa1 = rho1 = None
    if l2.kappa0 > 0:
        kappa1, rho1 = lemma3_constants(l2.kappa0, nu, T)
        perts = random_perturbations(T, prob.m, rho1, opts.n_lemma3, opts.seed)
        l3 = lemma3_check(prob, ref.u, profile, nu, kappa1, rho1, perts, Z)

    consts = CertificationConstants(
        nu=nu, mu=mu, tau=tau, alpha0=alpha0,
        gamma0=None if growth is None else growth.constant,
        gamma1=None if eh70 is None else eh70.constant,
        kappa0=l2.kappa0, kappa1=kappa1, rho1=rho1, delta=l2.delta,
    )
    issues = [i for i in consts.check(T) if not (i.startswith("gamma0") and growth is not None)]
    if nu_est is not None and opts.nu is not None and opts.nu < nu_est:
        issues.append(f"pinned nu = {opts.nu:g} is below the fitted order {nu_est:g}")
    return CertificationReport(consts, Z, orders, nu_est, a3, growth, eh70, l2, l3, issues,
                               time.perf_counter() - start)
