"""Point-vortex dynamics with the Kirchhoff-Routh function as Hamiltonian."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .domain import DomainError, GreenOperator
from .landscape import VortexConfiguration, kirchhoff_routh, kr_grad


class CollisionError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, message: str, trajectory: "Trajectory"):
        super().__init__(message)
        self.trajectory = trajectory


def perp(v: np.ndarray) -> np.ndarray:
    """Clockwise quarter turn, (a, b) -> (b, -a), applied along the last axis."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


@dataclass(frozen=True)
class PointVortexState:
    configuration: VortexConfiguration
    time: float = 0.0

    @classmethod
    def from_arrays(cls, points, strengths, time: float = 0.0) -> "PointVortexState":
        return cls(VortexConfiguration(points, strengths), float(time))

    @property
    def points(self) -> np.ndarray:
        return self.configuration.points

    @property
    def strengths(self) -> np.ndarray:
        return self.configuration.strengths


def _guard(op: GreenOperator, pts: np.ndarray) -> None:
    lim = 1e-6 * op.domain.diameter
    for i, j in itertools.combinations(range(len(pts)), 2):
        if np.hypot(*(pts[i] - pts[j])) <= lim:
            raise CollisionError(f"vortices {i} and {j} collided (distance <= {lim:.3e})")
    for i, p in enumerate(pts):
        op.domain.require_inside(p, f"vortex {i}")


def _velocity(op: GreenOperator, pts: np.ndarray, s: np.ndarray) -> np.ndarray:
    _guard(op, pts)
    k = len(s)
    v = np.zeros((k, 2))
    for i in range(k):
        if op.backend == "analytic-disc":
            gh = op.grad1_regular(pts[i], pts[i])
        else:
            # h is symmetric, so either slot of grad h(x, x) equals grad H / 2
            gh = 0.5 * op.robin_grad(pts[i])
        v[i] = -s[i] * perp(gh)
        for j in range(k):
            if j != i:
                v[i] += s[j] * perp(op.grad1_green(pts[i], pts[j]))
    return v


def pv_velocity(op: GreenOperator, state: PointVortexState) -> np.ndarray:
    """dx_i/dt = -k_i grad^perp h(x_i, x_i) + sum_{j != i} k_j grad^perp G(x_i, x_j), shape (k, 2)."""
    return _velocity(op, state.points, state.strengths)


def equilibrium_residual(op: GreenOperator, state: PointVortexState) -> float:
    return float(np.linalg.norm(pv_velocity(op, state), axis=1).max())


def velocity_from_gradient(op: GreenOperator, state: PointVortexState) -> np.ndarray:
    """-(1/(2 k_i)) (grad_{x_i} W)^perp, which must equal pv_velocity."""
    g = kr_grad(op, state.configuration)
    return -perp(g) / (2.0 * state.strengths[:, None])


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray  # (n_samples, k, 2)
    W: np.ndarray
    strengths: np.ndarray

    def drift(self) -> float:
        return float(np.abs(self.W - self.W[0]).max())

    def to_csv(self, path) -> None:
        k = self.strengths.size
        cols = ["t"] + [f"{a}{i + 1}" for i in range(k) for a in ("x", "y")] + ["W"]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for t, p, w in zip(self.times, self.points, self.W):
                vals = [t, *p.ravel(), w]
                fh.write(",".join(f"{v:.17g}" for v in vals) + "\n")


def _rk4_step(op, x, s, dt):
    k1 = _velocity(op, x, s)
    k2 = _velocity(op, x + 0.5 * dt * k1, s)
    k3 = _velocity(op, x + 0.5 * dt * k2, s)
    k4 = _velocity(op, x + dt * k3, s)
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def pv_integrate(op: GreenOperator, state: PointVortexState, dt: float, T: float,
                 sample_every: int = 1, backward: bool = False) -> Trajectory:
    """Classical RK4 from ``state`` over a horizon T (time runs backwards if ``backward``)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not T >= dt:
        raise ValueError(f"horizon T={T} must be at least dt={dt}")
    n = int(round(T / dt))
    h = -dt if backward else dt
    s = state.strengths
    x = state.points.copy()
    t0 = state.time
    times, pts, Ws = [t0], [x.copy()], [kirchhoff_routh(op, state.configuration)]

    def partial():
        return Trajectory(np.array(times), np.array(pts), np.array(Ws), s.copy())

    for step in range(1, n + 1):
        try:
            x = _rk4_step(op, x, s, h)
            _guard(op, x)
        except (CollisionError, DomainError) as exc:
            raise IntegrationError(f"integration stopped at t={t0 + (step - 1) * h:.6g}: {exc}",
                                   partial()) from None
        if step % sample_every == 0 or step == n:
            times.append(t0 + step * h)
            pts.append(x.copy())
            Ws.append(kirchhoff_routh(op, VortexConfiguration(x, s)))
    return partial()


def self_test(op: GreenOperator, seed: int = 0, steps: int = 100, dt: float = 0.02) -> dict:
    """Integrate a random two-vortex state and check RK4-order conservation of W.

    Raises ``RuntimeError`` when the drift does not shrink by at least 8x on
    halving dt (and is above roundoff), or when the velocity does not match
    -(1/(2 k_i)) (grad W)^perp.
    """
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = op.domain.geometry.bbox()
    c = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    r = 0.25 * op.domain.geometry.min_diameter
    while True:
        ang = rng.uniform(0, 2 * np.pi, 2)
        rad = r * np.sqrt(rng.uniform(0.1, 1.0, 2))
        pts = c + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        if np.hypot(*(pts[0] - pts[1])) > 0.2 * r and all(op.domain.contains(p) for p in pts):
            break
    state = PointVortexState.from_arrays(pts, [1.0, 0.5])
    mismatch = float(np.abs(pv_velocity(op, state) - velocity_from_gradient(op, state)).max())
    d1 = pv_integrate(op, state, dt, steps * dt).drift()
    d2 = pv_integrate(op, state, dt / 2, steps * dt).drift()
    W0 = abs(kirchhoff_routh(op, state.configuration))
    floor = 1e-12 * max(1.0, W0)
    ratio = d1 / d2 if d2 > 0 else np.inf
    tol_id = 1e-8 if op.backend == "analytic-disc" else 1e-4
    ok = (d1 <= floor or ratio >= 8.0) and mismatch <= tol_id * max(1.0, np.abs(pv_velocity(op, state)).max())
    report = {"drift": d1, "drift_half": d2, "ratio": ratio, "identity_mismatch": mismatch, "passed": ok}
    if not ok:
        raise RuntimeError(f"point-vortex self-test failed: {report}")
    return report
