import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from steady_vortex.profiles import (
    ProfileError,
    ProfileFunction,
    check_hypotheses,
    limiting_profile,
    power_profile,
)

J0_ZERO = float(special.jn_zeros(0, 1)[0])


@pytest.fixture(scope="module")
def bessel_profile():
    return limiting_profile(power_profile(1.0), 1.0)


def exp_profile():
    return ProfileFunction(
        f=lambda s: np.expm1(np.maximum(s, 0.0)),
        f_inv=lambda s: np.log1p(np.maximum(s, 0.0)),
        F=lambda s: (1 + np.maximum(s, 0.0)) * np.log1p(np.maximum(s, 0.0)) - np.maximum(s, 0.0),
        delta0=1.0, delta1=0.0, label="expm1",
    )


class TestPowerProfile:
    def test_values(self):
        f = power_profile(2.0)
        assert f.f(np.array([-1.0, 0.0, 3.0])).tolist() == [0.0, 0.0, 9.0]
        assert f.f_inv(np.array(9.0)) == pytest.approx(3.0)
        assert f.F(np.array(4.0)) == pytest.approx(4.0**1.5 / 1.5)
        assert (f.delta0, f.delta1) == (pytest.approx(1 / 3), pytest.approx(2 / 3))

    @pytest.mark.parametrize("p", [0.0, -1.0])
    def test_nonpositive_exponent(self, p):
        with pytest.raises(ProfileError):
            power_profile(p)

    @given(st.floats(0.2, 5.0), st.floats(1e-3, 50.0))
    @settings(max_examples=50, deadline=None)
    def test_inverse_and_primitive(self, p, s):
        f = power_profile(p)
        assert float(f.f_inv(f.f(np.array(s)))) == pytest.approx(s, rel=1e-9)
        # F' = f_inv
        h = 1e-6 * s
        dF = (float(f.F(np.array(s + h))) - float(f.F(np.array(s - h)))) / (2 * h)
        assert dF == pytest.approx(float(f.f_inv(np.array(s))), rel=1e-5)


class TestHypotheses:
    @given(st.floats(0.25, 4.0))
    @settings(max_examples=10, deadline=None)
    def test_power_profiles_pass(self, p):
        rep = check_hypotheses(power_profile(p))
        assert rep.all_passed, {k: c for k, c in rep.checks.items() if not c.passed}

    def test_exponential_growth_fails_h3(self):
        rep = check_hypotheses(exp_profile(), s_max=50.0, tau=(0.5,))
        assert not rep["H3"].passed
        assert rep["H3"].counterexample is not None
        assert rep["H1"].passed

    def test_decreasing_f_fails_h1(self):
        bad = ProfileFunction(f=lambda s: np.where(s > 0, 1.0 / (1.0 + np.maximum(s, 0)), 0.0),
                              f_inv=lambda s: s, F=lambda s: s, delta0=1.0, delta1=0.0)
        assert not check_hypotheses(bad)["H1"].passed

    def test_too_few_samples(self):
        with pytest.raises(ProfileError):
            check_hypotheses(power_profile(1.0), n=50)


class TestLimitingProfile:
    def test_bessel_closed_form(self, bessel_profile):
        # U = a J0(r), support radius j0, mass 2 pi a j0 J1(j0)
        lim = bessel_profile
        a = 1.0 / (2 * math.pi * J0_ZERO * special.j1(J0_ZERO))
        assert lim.support_radius == pytest.approx(J0_ZERO, abs=1e-9)
        assert lim.peak == pytest.approx(a, rel=1e-9)
        assert np.abs(lim.U - a * special.j0(lim.r)).max() < 1e-10
        assert lim.flux_mass == pytest.approx(1.0, rel=1e-9)
        assert lim.monotone_shooting

    def test_kappa_scaling_linear_case(self):
        lim2 = limiting_profile(power_profile(1.0), 2.0)
        assert lim2.support_radius == pytest.approx(J0_ZERO, abs=1e-9)
        assert lim2.peak == pytest.approx(2 / (2 * math.pi * J0_ZERO * special.j1(J0_ZERO)), rel=1e-9)

    def test_sublinear_profile_has_mass(self):
        lim = limiting_profile(power_profile(0.5), 1.0)
        w = lim.fU
        mass = 2 * math.pi * np.trapezoid(w * lim.r, lim.r)
        assert mass == pytest.approx(1.0, rel=1e-4)
        assert np.all(np.diff(lim.U) <= 0)

    def test_exterior_continuation(self, bessel_profile):
        r = np.array([2 * J0_ZERO])
        assert bessel_profile.stream(r)[0] == pytest.approx(-math.log(2) / (2 * math.pi))
        assert bessel_profile.vorticity(r)[0] == 0.0

    def test_csv(self, bessel_profile, tmp_path):
        p = tmp_path / "profile.csv"
        bessel_profile.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "r,U,fU"
        assert len(lines) == bessel_profile.samples.shape[0] + 1

    def test_rejects_nonpositive_kappa(self):
        with pytest.raises(ProfileError):
            limiting_profile(power_profile(1.0), 0.0)
