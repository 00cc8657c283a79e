import json

import numpy as np
import pytest

from bangreg.certify import (
    CertifyOptions,
    ControlSampler,
    certify,
    check_assumption3,
    check_EH70,
    check_growth,
    estimate_local_order,
    lemma2_check,
    lemma3_check,
    lemma3_constants,
    random_perturbations,
)
from bangreg.control import PiecewiseConstantControl as PCC
from bangreg.control import l1_distance
from bangreg.dynamics import SwitchingProfile, uniform_grid
from bangreg.errors import CertificationError
from bangreg.metrics import ZeroSet, zero_set
from bangreg.problem import builtin

E1 = np.array([[1.0], [-1.0]])


def _profile(f, N=400):
    return SwitchingProfile.from_function(uniform_grid(1.0, N), lambda s: np.atleast_1d(f(s)))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_local_order_of_monomials(k):
    lo = estimate_local_order(_profile(lambda s: s**k), 0.0, [1.0], 0.5)
    assert lo.nu == pytest.approx(k, abs=0.02)
    assert lo.mu == pytest.approx(1.0, rel=1e-3)


def test_local_order_of_a_simple_crossing():
    lo = estimate_local_order(_profile(lambda s: np.sin(s - 0.5)), 0.5, [1.0], 0.3)
    assert lo.nu == pytest.approx(1.0, abs=0.02)
    assert lo.mu >= 0.95


def test_local_order_needs_samples():
    with pytest.raises(CertificationError):
        estimate_local_order(_profile(lambda s: 0.0 * s), 0.0, [1.0], 0.5)


def test_assumption3():
    prof = _profile(lambda s: s**2)
    Z = zero_set(prof, E1)
    assert check_assumption3(prof, Z, 2, 0.99, 0.5).passed
    assert not check_assumption3(prof, Z, 1, 0.99, 0.5).passed
    assert check_assumption3(prof, ZeroSet(), 2, 1.0, 0.5).passed


def test_needle_growth_ratio_closed_form(quad1, ref1):
    # u = 1 on [0, W]: numerator W^2/2 + 2W^2 - 4W^3/3, so the ratio is 1/2 + 2(1 - 2W/3)
    us = [PCC.from_segments([0.0, W], [[1.0], [0.0]], 1.0) for W in (0.01, 0.05, 0.1)]
    rep = check_growth(quad1, ref1.u, 1, us)
    np.testing.assert_allclose(rep.ratios, [0.5 + 2 * (1 - 2 * W / 3) for W in (0.01, 0.05, 0.1)], rtol=1e-8)
    assert rep.passed and rep.constant == pytest.approx(0.5 + 2 * (1 - 0.2 / 3), rel=1e-8)


def test_sampler_respects_the_ball(ref2, quad2):
    s = ControlSampler(ref2.u, quad2.U, 0.1, (0.0,), seed=3)
    us = s.sample(60)
    assert len(us) == 60
    assert all(0.0 < l1_distance(u, ref2.u) <= 0.1 * (1 + 1e-12) for u in us)
    assert [u.values.tolist() for u in ControlSampler(ref2.u, quad2.U, 0.1, (0.0,), seed=3).sample(60)] == \
        [u.values.tolist() for u in us]


def test_growth_and_eh70_on_reference(quad2, ref2):
    us = ControlSampler(ref2.u, quad2.U, 0.1, (0.0,), seed=1).sample(60)
    g = check_growth(quad2, ref2.u, 2, us)
    assert g.passed and g.constant > 0
    e = check_EH70(quad2, ref2.u, 2, us, sigma_hat=ref2.profile)
    assert e.constant == 0.0


def test_lemma2():
    prof = _profile(lambda s: s**2)
    Z = zero_set(prof, E1)
    rep = lemma2_check(prof, Z, E1, 2, 1.0, 0.5)
    assert rep.delta == pytest.approx(0.25)
    assert rep.kappa0 == pytest.approx(0.25)
    assert rep.passed and min(rep.margins) >= 0.0
    # eps beyond the horizon leaves nothing to check
    assert lemma2_check(prof, Z, E1, 2, 1.0, 0.5, eps_grid=[2.0]).margins == [float("inf")]


def test_lemma2_without_zeros():
    prof = _profile(lambda s: 1.0 + 0.0 * s)
    rep = lemma2_check(prof, ZeroSet(), E1, 1, None, 0.5)
    assert rep.kappa0 == pytest.approx(1.0) and rep.passed


def test_lemma3(quad2, ref2):
    kappa1, rho1 = lemma3_constants(0.25, 2, 1.0)
    assert kappa1 == pytest.approx(2.2)
    perts = random_perturbations(1.0, 1, rho1, 12, seed=4)
    Z = zero_set(ref2.profile, E1)
    rep = lemma3_check(quad2, ref2.u, ref2.profile, 2, kappa1, rho1, perts, Z)
    assert rep.passed and len(rep.cases) == 12
    with pytest.raises(CertificationError):
        lemma3_check(quad2, ref2.u, ref2.profile, 2, kappa1, rho1 / 10, perts[:1], Z)


def test_certify_report(quad2, ref2):
    rep = certify(quad2, ref2, CertifyOptions(n_samples=30, n_lemma3=6))
    assert rep.passed
    assert rep.nu_estimate == 2.0
    assert rep.summary_lines()[0] == "Assumption 3: pass"
    data = json.loads(rep.to_json())
    assert data["constants"]["kappa0"] == pytest.approx(0.25)


def test_pinned_order_below_fit_fails(quad2, ref2):
    rep = certify(quad2, ref2, CertifyOptions(nu=1, growth=False, n_lemma3=4))
    assert not rep.assumption3.passed
    assert not rep.passed
    assert "Assumption 3: fail" in rep.summary_lines()


def test_gaussian_case_certifies():
    prob = builtin("example4-gaussian", {"nu": 1})
    rep = certify(prob, options=CertifyOptions(n_samples=20, n_lemma3=4))
    assert rep.passed and rep.nu_estimate == 1.0


def test_growth_constant_is_monotone_in_the_family(quad1, ref1):
    sampler = ControlSampler(ref1.u, quad1.U, 0.1, (0.0,), seed=5)
    small = sampler.sample(20)
    extra = ControlSampler(ref1.u, quad1.U, 0.1, (0.0,), seed=6).sample(20)
    g_small = check_growth(quad1, ref1.u, 1, small).constant
    g_big = check_growth(quad1, ref1.u, 1, small + extra).constant
    assert g_big <= g_small
