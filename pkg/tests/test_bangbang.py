import numpy as np
import pytest

from bangreg.bangbang import fb_sweep_solve, pointwise_minimizer, reference_solution
from bangreg.control import PiecewiseConstantControl as PCC
from bangreg.control import l1_distance
from bangreg.dynamics import GridFunction, ResidualTuple, SwitchingProfile, uniform_grid
from bangreg.errors import TieError
from bangreg.polytope import make_box
from bangreg.problem import builtin


U1 = make_box([0], [1])


def _profile(f, N=400, T=1.0):
    t = uniform_grid(T, N)
    return SwitchingProfile.from_function(t, lambda s: np.atleast_1d(f(s)))


def test_minimizer_switches_where_sigma_crosses_rho():
    prof = _profile(lambda s: s**2)
    rho = GridFunction.constant(prof.t, [0.04])
    u = pointwise_minimizer(prof, rho, U1)
    np.testing.assert_allclose(u.switch_times, [0.2], atol=1e-11)
    assert u(0.1)[0] == 1.0 and u(0.5)[0] == 0.0


def test_minimizer_without_rho_is_zero():
    u = pointwise_minimizer(_profile(lambda s: s**2), None, U1)
    assert l1_distance(u, PCC.constant([0.0], 1.0)) == 0.0


def test_flat_switching_function_is_a_tie():
    prof = _profile(lambda s: 0.0 * s + 0.04)
    rho = GridFunction.constant(prof.t, [0.04])
    with pytest.raises(TieError):
        pointwise_minimizer(prof, rho, U1, tie_policy="error")


def test_sweep_from_wrong_start_reaches_reference(quad2):
    res = fb_sweep_solve(quad2, u_init=PCC.constant([1.0], 1.0))
    assert l1_distance(res.u, PCC.constant([0.0], 1.0)) == 0.0


def test_sweep_started_at_reference_stops_at_once(quad2):
    res = fb_sweep_solve(quad2, u_init=PCC.constant([0.0], 1.0))
    assert res.iterations == 1 and res.history == [0.0]


def _switch(nu, c):
    prob = builtin("example4-quadratic", {"nu": nu})
    t = uniform_grid(1.0, 400)
    res = fb_sweep_solve(prob, ResidualTuple(rho=GridFunction.constant(t, [c])))
    assert len(res.u.switch_times) == 1
    return float(res.u.switch_times[0])


@pytest.mark.parametrize("c", [1e-3, 1e-2, 0.05, 0.1])
def test_constant_rho_switch_time_nu2(c):
    # u = 1 on [0, tau) gives sigma(tau) = 2 tau - tau^2, so tau = 1 - sqrt(1 - c)
    tau = _switch(2, c)
    assert tau == pytest.approx(1.0 - np.sqrt(1.0 - c), abs=1e-9)
    assert tau <= np.sqrt(c)


def test_constant_rho_switch_time_nu1():
    c = 0.05
    tau = _switch(1, c)
    assert 3 * tau - 2 * tau**2 == pytest.approx(c, abs=1e-9)
    assert tau <= c


def test_switch_time_increases_with_rho():
    taus = [_switch(2, c) for c in (1e-3, 1e-2, 1e-1)]
    assert np.all(np.diff(taus) > 0)


@pytest.mark.parametrize("nu", [1, 2])
def test_analytic_reference_matches_sweep(nu):
    prob = builtin("example4-gaussian", {"nu": nu})
    a = reference_solution(prob)
    b = reference_solution(prob, analytic=False)
    assert l1_distance(a.u, b.u) == 0.0
    assert np.abs(a.profile.sigma - b.profile.sigma).max() <= 1e-12
