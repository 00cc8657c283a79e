import numpy as np
import pytest

from bangreg import csvio
from bangreg.control import PiecewiseConstantControl as PCC
from bangreg.dynamics import solution_for_control
from bangreg.errors import ConfigError
from bangreg.svg import loglog_svg


def test_trajectory_round_trip(tmp_path, ref2, quad2):
    sol = solution_for_control(quad2, PCC.from_segments([0.0, 0.1], [[1.0], [0.0]], 1.0), grid=ref2.x.t)
    csvio.write_trajectory(tmp_path / "p.csv", sol.p, "p")
    t, v = csvio.read_trajectory(tmp_path / "p.csv")
    np.testing.assert_allclose(t, sol.p.t, atol=1e-12, rtol=0)
    np.testing.assert_allclose(v.reshape(sol.p.values.shape), sol.p.values, atol=1e-12, rtol=0)


def test_control_round_trip(tmp_path):
    u = PCC.from_segments([0.0, 1 / 3, 0.7], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 2.0)
    csvio.write_control(tmp_path / "u.csv", u)
    v = csvio.read_control(tmp_path / "u.csv", 2.0)
    assert v.equals(u, tol=0.0)


def test_control_must_start_at_zero(tmp_path):
    (tmp_path / "u.csv").write_text("t,u1\n0.1,1\n")
    with pytest.raises(ConfigError):
        csvio.read_control(tmp_path / "u.csv", 1.0)


def test_bad_number_reports_line(tmp_path):
    (tmp_path / "a.csv").write_text("t,x1\n0,1\n0.5,oops\n")
    with pytest.raises(ConfigError, match=":3"):
        csvio.read_table(tmp_path / "a.csv")


def test_svg_is_deterministic_and_self_contained():
    xs = np.geomspace(1e-4, 1e-1, 8)
    args = ([("rows", xs, 3 * xs**0.5)], [("fit", 0.5, 3.0)])
    a = loglog_svg(*args, title="t & <x>", xlabel="d_Z", ylabel="d_Y")
    b = loglog_svg(*args, title="t & <x>", xlabel="d_Z", ylabel="d_Y")
    assert a == b
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")
    assert "href" not in a and "http://www.w3.org/2000/svg" in a and a.count("http") == 1
    assert "t &amp; &lt;x&gt;" in a
    assert a.count("<circle") == 8 + 1  # points plus a legend marker


def test_svg_needs_points():
    with pytest.raises(ValueError):
        loglog_svg([("rows", [0.0], [1.0])])
