import numpy as np
import pytest

from bangreg.errors import ProblemError
from bangreg.expr import to_text
from bangreg.problem import (
    CertificationConstants,
    builtin,
    dynamics,
    grad_x_hamiltonian,
    hamiltonian,
    make_problem,
    problem_from_dict,
)


def test_builtin_expressions():
    q = builtin("example4-quadratic", {"nu": 2, "T": 1})
    assert to_text(q.s[0]) == to_text(make_problem(n=1, m=1, T=1, x0=[0], U={"box": {"lo": [0], "hi": [1]}},
                                                  a=["0"], B=[["1"]], w="0", s=["t^2"]).s[0])
    g = builtin("example4-gaussian", {"nu": 1, "T": 1})
    assert to_text(g.w) == to_text(make_problem(n=1, m=1, T=1, x0=[0], U={"box": {"lo": [0], "hi": [1]}},
                                                a=["0"], B=[["1"]], w="1 - exp(-x1^2)", s=["t"]).w)


@pytest.mark.parametrize("name,params", [("nosuch", {}), ("example4-quadratic", {"nu": 0.5}),
                                         ("example4-quadratic", {"T": -1})])
def test_builtin_errors(name, params):
    with pytest.raises(ProblemError):
        builtin(name, params)


def test_hamiltonian_values():
    q = builtin("example4-quadratic", {"nu": 2})
    assert hamiltonian(q, 0.3, [0.0], [0.0], [0.0]) == 0.0
    assert hamiltonian(q, 1.0, [2.0], [1.0], [3.0]) == pytest.approx(8.0)
    assert hamiltonian(q, 0.5, [3.0], [0.0], [0.0]) == pytest.approx(9.0)


def test_hamiltonian_gradient():
    q = builtin("example4-quadratic", {"nu": 2})
    assert grad_x_hamiltonian(q, 0.2, [0.0], [1.0], [5.0])[0] == 0.0
    assert grad_x_hamiltonian(q, 0.2, [3.0], [0.0], [0.0])[0] == pytest.approx(6.0)
    p = make_problem(n=1, m=1, T=1, x0=[0], U={"box": {"lo": [0], "hi": [1]}}, a=["0"], B=[["x1"]], w="0", s=["0"])
    g = grad_x_hamiltonian(p, 0.0, [5.0], [1.0], [2.0])[0]
    h = 1e-6
    fd = (hamiltonian(p, 0.0, [5 + h], [1.0], [2.0]) - hamiltonian(p, 0.0, [5 - h], [1.0], [2.0])) / (2 * h)
    assert g == pytest.approx(2.0) and fd == pytest.approx(2.0, rel=1e-8)


def test_dynamics_and_dict_round_trip():
    p = make_problem(n=2, m=1, T=2, x0=[1, 0], U={"box": {"lo": [-1], "hi": [1]}},
                     a=["x2", "-x1"], B=[["0"], ["1"]], w="x1^2", s=["0"], l="x1")
    np.testing.assert_allclose(dynamics(p, 0.0, [1.0, 2.0], [0.5]), [2.0, -0.5])
    q = problem_from_dict(p.to_dict())
    np.testing.assert_allclose(dynamics(q, 0.0, [1.0, 2.0], [0.5]), [2.0, -0.5])


def test_terminal_cost_must_not_depend_on_time():
    with pytest.raises(ProblemError):
        make_problem(n=1, m=1, T=1, x0=[0], U={"box": {"lo": [0], "hi": [1]}}, a=["0"], B=[["1"]],
                     w="0", s=["0"], l="t*x1")


def test_constants_consistency():
    c = CertificationConstants(nu=2, mu=1, delta=0.25, kappa0=0.25, kappa1=2.2, rho1=0.18)
    assert c.check(1.0) == []
    bad = CertificationConstants(nu=2, mu=1, delta=0.25, kappa0=0.5, kappa1=1.0, rho1=2.0)
    assert len(bad.check(1.0)) == 3
