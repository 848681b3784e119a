import math

import numpy as np
import pytest

from steady_vortex.asymptotics import (
    CSV_COLUMNS,
    SweepReport,
    SweepRecord,
    adequate_resolution,
    center_convergence,
    epsilon_sweep,
    log_fit,
    profile_compare,
    rescale_field,
)
from steady_vortex.domain import Disc, GreenOperator, Rectangle, StreamField, VorticityField, build_domain
from steady_vortex.profiles import limiting_profile, power_profile
from steady_vortex.solver import SolveResult, SolverConfig, solve


@pytest.fixture(scope="module")
def bessel():
    return limiting_profile(power_profile(1.0), 1.0)


@pytest.fixture(scope="module")
def small_sweep(bessel):
    return epsilon_sweep(Disc((0, 0), 1.0), SolverConfig(epsilon=0.2), [0.2, 0.15, 0.1], limit=bessel)


def fake_record(eps, mu, center):
    return SweepRecord(eps, [mu], 0.0, 0.0, 0.0, [eps], [np.asarray(center, float)], 0.0, 1, 0.0,
                       float("nan"), None, 50.0, [0.0], 0.0, 0.0)


def test_log_fit_exact_line():
    eps = [0.2, 0.1, 0.05]
    s, b, r2 = log_fit(eps, [0.3 * math.log(1 / e) - 0.1 for e in eps])
    assert s == pytest.approx(0.3) and b == pytest.approx(-0.1) and r2 == pytest.approx(1.0)


@pytest.mark.parametrize("eps,res", [(0.2, 128), (0.1, 256), (0.05, 512), (0.025, 1024)])
def test_pow2_resolution(eps, res):
    assert adequate_resolution(Disc((0, 0), 1.0), eps, 1.0) == res


def test_mult64_resolution():
    assert adequate_resolution(Disc((0, 0), 1.0), 0.03, 1.0, "mult64") == 768


class TestSweep:
    def test_records_sorted_and_fitted(self, small_sweep):
        eps = small_sweep.epsilons
        assert list(eps) == sorted(eps, reverse=True)
        f = small_sweep.fits
        assert f["mu_slope"] == pytest.approx(1 / (2 * math.pi), rel=0.02)
        assert f["E_slope"] == pytest.approx(1 / (4 * math.pi), rel=0.02)
        assert f["mu_r2"] >= 0.99 and f["E_r2"] >= 0.99
        assert f["diam_ratio_max"] <= 1.1

    def test_warm_matches_cold(self, small_sweep):
        cold = epsilon_sweep(Disc((0, 0), 1.0), SolverConfig(epsilon=0.2), [0.2, 0.15, 0.1], warm=False,
                             jobs=2)
        for a, b in zip(small_sweep.records, cold.records):
            assert a.mu[0] == pytest.approx(b.mu[0], rel=1e-8)

    def test_needs_three_epsilons(self):
        with pytest.raises(ValueError):
            epsilon_sweep(Disc((0, 0), 1.0), SolverConfig(epsilon=0.2), [0.2, 0.1])

    def test_bound_shapes(self, small_sweep):
        f = small_sweep.fits
        assert f["mu_lower_C"] >= 0
        assert f["mu_lower_spread"] <= 1e-3
        assert f["E_upper_spread"] <= 1e-3

    def test_csv_columns(self, small_sweep, tmp_path):
        p = tmp_path / "s.csv"
        small_sweep.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 4
        assert "mu_slope" in small_sweep.fits_json()

    def test_inadequate_fixed_grid_aborts(self):
        op = GreenOperator(build_domain(Disc((0, 0), 1.0), 128))
        with pytest.raises(RuntimeError) as info:
            epsilon_sweep(op, SolverConfig(epsilon=0.2), [0.2, 0.18, 0.05])
        assert len(info.value.report.records) == 2


class TestCenters:
    def test_distances(self):
        rep = SweepReport([fake_record(0.2, 0, (0.1, 0)), fake_record(0.1, 0, (0.05, 0)),
                           fake_record(0.05, 0, (0.0, 0.01))], [1.0])
        cc = center_convergence(rep, (0.0, 0.0))
        assert cc.distances == pytest.approx([0.1, 0.05, 0.01])
        assert cc.nonincreasing and cc.within_3eps and cc.final_within_3eps

    def test_detects_growth(self):
        rep = SweepReport([fake_record(0.2, 0, (0.0, 0)), fake_record(0.1, 0, (0.5, 0)),
                           fake_record(0.05, 0, (0.0, 0.0))], [1.0])
        cc = center_convergence(rep, (0.0, 0.0))
        assert not cc.nonincreasing and not cc.within_3eps

    def test_symmetric_start_stays_on_grid_center(self, small_sweep):
        h = 1 / 64
        cc = center_convergence(small_sweep, (0.0, 0.0))
        assert max(cc.distances) <= h


class TestProfileCompare:
    def manufactured(self, lim, eps, res, center=(0.05, -0.1)):
        d = build_domain(Disc((0, 0), 1.0), res)
        rr = np.hypot(d.x - center[0], d.y - center[1]) / eps
        w = lim.vorticity(rr) / eps**2
        om = VorticityField(w, d)
        return SolveResult(om, StreamField(np.zeros(d.n_cells), d), 0.0, 0, 0, 0, 0, 0, 0.0, 0.0, 0.0,
                           np.array(center), 0.0, 0.0, eps, 50.0, 1.0, power_profile(1.0))

    def test_self_comparison(self, bessel):
        pc = profile_compare(self.manufactured(bessel, 0.1, 256), bessel)
        assert pc.error <= 2e-3
        assert pc.monotone

    def test_rectangle_error_decreases(self, bessel):
        errs = []
        for eps in (0.1, 0.05):
            op = GreenOperator(build_domain(Rectangle(2.0, 1.0), adequate_resolution(Rectangle(2.0, 1.0), eps, 1)))
            r = solve(op, SolverConfig(epsilon=eps))
            pc = profile_compare(r, bessel)
            assert pc.monotone
            errs.append(pc.error)
        assert errs[1] < errs[0] <= 0.1

    def test_kappa_mismatch(self, bessel):
        r = self.manufactured(bessel, 0.1, 128)
        r.kappa = 2.0
        with pytest.raises(ValueError):
            profile_compare(r, bessel)


def test_rescale_field_keeps_mass(small_sweep):
    src = small_sweep.records[-1].result
    target = build_domain(Disc((0, 0), 1.0), 512)
    w = rescale_field(src, target, 0.5)
    assert w.sum() * target.cell_area == pytest.approx(1.0, rel=2e-2)
