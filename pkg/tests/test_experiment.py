import numpy as np
import pytest

from bangreg.control import PiecewiseConstantControl as PCC
from bangreg.control import l1_distance
from bangreg.dynamics import ResidualTuple
from bangreg.errors import ConfigError
from bangreg.experiment import (
    ExperimentRow,
    PerturbationSpec,
    build_residual,
    forward_pair,
    holder_fit,
    inverse_pair,
    run_experiment,
)
from bangreg.metrics import dZ
from bangreg.problem import CertificationConstants


def _row(dz, dy, valid=True):
    return ExperimentRow(magnitude=dz, d_Z=dz, u_l1=0.0, dstar=0.0, d_Y=dy, iterations=1,
                         inclusion_defect=0.0, valid=valid)


def test_holder_fit_recovers_synthetic_power_law():
    dz = np.geomspace(1e-4, 1e-1, 12)
    rows = [_row(v, 2.0 * v**0.25) for v in dz] + [_row(0.5, 100.0, valid=False)]
    fit = holder_fit(rows)
    assert fit.theta == pytest.approx(0.25, abs=1e-12)
    assert fit.kappa == pytest.approx(2.0, rel=1e-10)
    assert fit.n == 12


def test_holder_fit_needs_range():
    with pytest.raises(ValueError):
        holder_fit([_row(v, v) for v in np.geomspace(1e-2, 1e-1, 8)])
    with pytest.raises(ValueError):
        holder_fit([_row(v, v) for v in (1e-4, 1e-1)])


def test_spec_validation():
    with pytest.raises(ConfigError):
        PerturbationSpec("constant-rho", (), (0,))
    with pytest.raises(ConfigError):
        PerturbationSpec("constant-rho", (0.1, 0.01), (0,))
    with pytest.raises(ConfigError):
        PerturbationSpec("constant-rho", (0.1,), ())
    with pytest.raises(ConfigError):
        PerturbationSpec("banana", (0.1,), (0,))


@pytest.mark.parametrize("d", [0.001, 0.01, 0.1])
def test_inverse_pair_of_a_pulse(quad2, ref2, d):
    u = PCC.from_segments([0.0, d], [[1.0], [0.0]], 1.0)
    y, z = inverse_pair(quad2, u, ref2)
    # sigma[u] = t^2 + p with p(t) = d^2 - t^2 + 2d(1 - d) on [0, d): rho = 2d - d^2 there
    assert dZ(z) == pytest.approx(2 * d - d**2, rel=1e-9)
    res = forward_pair(quad2, z)
    assert l1_distance(res.u, u) <= 1e-6


def test_eta_only_keeps_reference_control(quad2, ref2):
    z = build_residual(quad2, "initial-offset-eta", 0.01, np.random.default_rng(0), ref2)
    assert z.eta is not None and z.rho is None
    res = forward_pair(quad2, z)
    assert l1_distance(res.u, ref2.u) == 0.0
    assert res.x.values[0, 0] == pytest.approx(0.01)


def test_rows_beyond_b_are_flagged(quad2, ref2):
    spec = PerturbationSpec.geometric("constant-rho", 1e-3, 1e-1, 5)
    out = run_experiment(quad2, spec, ref2, b=1e-2)
    flags = [r.hyp_iii for r in out.rows]
    assert flags == [r.d_Z <= 1e-2 for r in out.rows]
    assert not all(flags) and any(flags)
    assert all(r.valid == r.hyp_iii for r in out.rows)


def test_constant_rho_ladder_nu1(quad1, ref1):
    spec = PerturbationSpec.geometric("constant-rho", 1e-4, 1e-1, 10)
    out = run_experiment(quad1, spec, ref1, CertificationConstants(nu=1.0))
    assert out.summary["n_usable"] == 10
    assert 0.95 <= out.fit.theta <= 1.05
    assert out.summary["theorem_consistent"]


def test_failed_rungs_can_be_flagged(quad2, ref2):
    spec = PerturbationSpec("sinusoidal-rho", (0.05,), (0, 1))
    out = run_experiment(quad2, spec, ref2, on_failure="flag")
    assert len(out.rows) == 2
    for r in out.rows:
        assert r.valid or (r.iterations == -1 and np.isnan(r.d_Z))


def test_columns_match_values():
    r = _row(0.1, 0.2)
    assert len(ExperimentRow.columns()) == len(r.values())
    assert ResidualTuple().norm() == 0.0
