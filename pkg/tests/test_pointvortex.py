import math

import numpy as np
import pytest

from steady_vortex.landscape import kr_minimize
from steady_vortex.pointvortex import (
    CollisionError,
    IntegrationError,
    PointVortexState,
    equilibrium_residual,
    perp,
    pv_integrate,
    pv_velocity,
    self_test,
    velocity_from_gradient,
)

from conftest import PAIR_RADIUS


def state(points, strengths):
    return PointVortexState.from_arrays(points, strengths)


GENERIC3 = ([[0.3, 0.1], [-0.2, 0.35], [0.05, -0.4]], [1.0, 0.7, -0.5])


def test_perp_is_clockwise():
    assert perp(np.array([1.0, 0.0])).tolist() == [0.0, -1.0]
    assert perp(np.array([0.0, 1.0])).tolist() == [1.0, 0.0]


class TestVelocity:
    def test_center_at_rest(self, exact128):
        assert np.abs(pv_velocity(exact128, state([[0, 0]], [1]))).max() == 0.0
        assert equilibrium_residual(exact128, state([[0, 0]], [1])) == 0.0

    def test_off_center_tangential(self, exact128):
        v = pv_velocity(exact128, state([[0.5, 0.0]], [1.0]))[0]
        # -k grad^perp h(x, x) with grad_1 h(x, x) = x / (2 pi (1 - |x|^2))
        assert v[0] == pytest.approx(0.0, abs=1e-15)
        assert v[1] == pytest.approx(0.5 / (2 * math.pi * 0.75), rel=1e-12)
        assert equilibrium_residual(exact128, state([[0.5, 0.0]], [1.0])) > 0

    def test_velocity_gradient_identity(self, exact128):
        rng = np.random.default_rng(11)
        for _ in range(10):
            k = int(rng.integers(1, 5))
            ang = rng.uniform(0, 2 * np.pi, k)
            rad = 0.8 * np.sqrt(rng.uniform(0, 1, k))
            pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
            s = rng.choice([-1, 1], k) * rng.uniform(0.3, 2, k)
            st = state(pts, s)
            assert np.abs(pv_velocity(exact128, st) - velocity_from_gradient(exact128, st)).max() <= 1e-8

    def test_fd_backend_identity(self, fd128):
        st = state([[0.3, 0.1], [-0.3, -0.2]], [1.0, -0.5])
        assert np.abs(pv_velocity(fd128, st) - velocity_from_gradient(fd128, st)).max() <= 2e-3

    def test_collision_guard(self, exact128):
        with pytest.raises(CollisionError):
            pv_velocity(exact128, state([[0.1, 0.0], [0.1 + 1e-7, 0.0]], [1, 1]))

    def test_kr_minimizer_is_equilibrium(self, exact128):
        rep = kr_minimize(exact128, [1.0, -1.0], n_starts=8)
        st = PointVortexState(rep.configuration)
        assert equilibrium_residual(exact128, st) <= rep.grad_norm / 2 + 1e-15
        assert equilibrium_residual(exact128, st) <= 1e-6


class TestIntegrate:
    def test_circular_orbit(self, exact128):
        speed = 0.5 / (2 * math.pi * 0.75)
        period = 2 * math.pi * 0.5 / speed
        tr = pv_integrate(exact128, state([[0.5, 0.0]], [1.0]), 1e-3, period, sample_every=50)
        r = np.hypot(tr.points[:, 0, 0], tr.points[:, 0, 1])
        assert np.abs(r - 0.5).max() <= 1e-6
        assert np.allclose(tr.points[-1, 0], [0.5, 0.0], atol=1e-3)

    def test_equilibrium_pair_stays(self, exact128):
        st = state([[PAIR_RADIUS, 0.0], [-PAIR_RADIUS, 0.0]], [1.0, -1.0])
        tr = pv_integrate(exact128, st, 0.01, 10.0, sample_every=100)
        assert np.abs(tr.points - tr.points[0]).max() <= 1e-5

    def test_hamiltonian_drift_order(self, exact128):
        st = state(*GENERIC3)
        drifts = [pv_integrate(exact128, st, dt, 1.0).drift() for dt in (0.02, 0.01)]
        assert 12 <= drifts[0] / drifts[1] <= 20

    def test_time_reversal(self, exact128):
        st = state(*GENERIC3)
        fwd = pv_integrate(exact128, st, 0.01, 1.0)
        back = pv_integrate(exact128, PointVortexState.from_arrays(fwd.points[-1], st.strengths, 1.0),
                            0.01, 1.0, backward=True)
        assert back.times[-1] == pytest.approx(0.0, abs=1e-12)
        assert np.abs(back.points[-1] - st.points).max() <= 10 * max(fwd.drift(), 1e-13)

    def test_boundary_exit_keeps_partial_trajectory(self, exact128):
        with pytest.raises(IntegrationError) as info:
            pv_integrate(exact128, state([[0.97, 0.0]], [1.0]), 0.5, 50.0)
        assert len(info.value.trajectory.times) >= 1

    def test_bad_step(self, exact128):
        with pytest.raises(ValueError):
            pv_integrate(exact128, state([[0, 0]], [1]), 0.0, 1.0)

    def test_csv(self, exact128, tmp_path):
        tr = pv_integrate(exact128, state(*GENERIC3), 0.01, 0.05)
        p = tmp_path / "t.csv"
        tr.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "t,x1,y1,x2,y2,x3,y3,W"
        assert len(lines) == 7


def test_self_test(exact128):
    rep = self_test(exact128, seed=3)
    assert rep["passed"] and rep["ratio"] >= 8
