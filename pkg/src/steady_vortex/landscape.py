"""Kirchhoff-Routh function W_k, its gradient, and a projected descent minimizer."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .domain import DomainError, GreenOperator


class LandscapeError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class VortexConfiguration:
    points: np.ndarray  # (k, 2)
    strengths: np.ndarray  # (k,)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        s = np.atleast_1d(np.asarray(self.strengths, dtype=float))
        if pts.shape != (s.size, 2):
            raise ValueError(f"points shape {pts.shape} does not match {s.size} strengths")
        if np.any(s == 0):
            raise ValueError("vortex strengths must be nonzero")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "strengths", s)

    @property
    def k(self) -> int:
        return self.strengths.size

    def validate(self, op: GreenOperator, min_separation: float = 0.0) -> None:
        for i, p in enumerate(self.points):
            op.domain.require_inside(p, f"vortex {i}")
        for i, j in itertools.combinations(range(self.k), 2):
            d = float(np.hypot(*(self.points[i] - self.points[j])))
            if d <= min_separation:
                raise DomainError(f"vortices {i} and {j} coincide (distance {d:.3e})")


def _min_separation(op: GreenOperator) -> float:
    return 2 * op.domain.spacing if op.backend == "finite-difference" else 0.0


def kirchhoff_routh(op: GreenOperator, cfg: VortexConfiguration) -> float:
    """W_k = -sum_{i != j} k_i k_j G(x_i, x_j) + sum_i k_i^2 h(x_i, x_i).

    The first sum runs over ordered pairs, so each unordered pair counts twice.
    """
    cfg.validate(op, _min_separation(op))
    x, s = cfg.points, cfg.strengths
    w = 0.0
    for i, j in itertools.combinations(range(cfg.k), 2):
        w -= 2.0 * s[i] * s[j] * op.green(x[i], x[j])
    for i in range(cfg.k):
        w += s[i] ** 2 * op.robin(x[i])
    return float(w)


def kr_grad(op: GreenOperator, cfg: VortexConfiguration) -> np.ndarray:
    """Gradient of W_k with respect to each point, shape (k, 2)."""
    cfg.validate(op, _min_separation(op))
    x, s = cfg.points, cfg.strengths
    if op.backend == "analytic-disc":
        g = np.zeros_like(x)
        for i in range(cfg.k):
            g[i] += s[i] ** 2 * op.robin_grad(x[i])
            for j in range(cfg.k):
                if j != i:
                    g[i] -= 2.0 * s[i] * s[j] * op.grad1_green(x[i], x[j])
        return g
    step = op._fd_step()
    g = np.zeros_like(x)
    for i in range(cfg.k):
        for c in range(2):
            xp, xm = x.copy(), x.copy()
            xp[i, c] += step
            xm[i, c] -= step
            g[i, c] = (kirchhoff_routh(op, VortexConfiguration(xp, s))
                       - kirchhoff_routh(op, VortexConfiguration(xm, s))) / (2 * step)
    return g


def kr_hessian(op: GreenOperator, cfg: VortexConfiguration, step: float | None = None) -> np.ndarray:
    """Symmetrized central-difference Hessian of W_k in the 2k coordinates."""
    k = cfg.k
    if step is None:
        step = 1e-5 * op.domain.diameter if op.backend == "analytic-disc" else op._fd_step()
    Hm = np.zeros((2 * k, 2 * k))
    flat = cfg.points.ravel()
    for a in range(2 * k):
        xp, xm = flat.copy(), flat.copy()
        xp[a] += step
        xm[a] -= step
        gp = kr_grad(op, VortexConfiguration(xp.reshape(k, 2), cfg.strengths)).ravel()
        gm = kr_grad(op, VortexConfiguration(xm.reshape(k, 2), cfg.strengths)).ravel()
        Hm[:, a] = (gp - gm) / (2 * step)
    return 0.5 * (Hm + Hm.T)


@dataclass
class MinimizeReport:
    configuration: VortexConfiguration
    value: float
    grad_norm: float
    converged: bool
    iterations: int
    hessian_eigs: np.ndarray
    isolated: bool
    n_starts: int
    n_converged: int
    history: list = field(default_factory=list, repr=False)

    def to_record(self) -> dict:
        return {
            "points": self.configuration.points.tolist(),
            "strengths": self.configuration.strengths.tolist(),
            "value": self.value,
            "grad_norm": self.grad_norm,
            "hessian_eigs": self.hessian_eigs.tolist(),
        }


def _project(op: GreenOperator, x: np.ndarray, balls, margin: float) -> np.ndarray:
    out = x.copy()
    for i in range(len(out)):
        if balls is not None:
            c, r = np.asarray(balls[i][0], dtype=float), float(balls[i][1])
            d = out[i] - c
            n = float(np.hypot(*d))
            if n > r:
                out[i] = c + d * (r / n)
        out[i] = op.domain.geometry.project_inside(out[i], margin)
    return out


def _descend(op, x0, strengths, balls, margin, tol, max_iter):
    x = _project(op, np.asarray(x0, dtype=float), balls, margin)

    def W(z):
        return kirchhoff_routh(op, VortexConfiguration(z, strengths))

    def grad(z):
        return kr_grad(op, VortexConfiguration(z, strengths))

    w = W(x)
    g = grad(x)
    t = 1e-2 * op.domain.diameter / max(float(np.abs(g).max()), 1e-12)
    it = 0
    for it in range(1, max_iter + 1):
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            break
        t *= 2.0
        while True:
            xn = _project(op, x - t * g, balls, margin)
            try:
                wn = W(xn)
            except DomainError:
                wn = math.inf
            if wn <= w - 1e-4 * float(np.sum(g * (x - xn))):
                break
            t *= 0.5
            if t < 1e-18:
                return x, w, g, it, False
        if np.array_equal(xn, x):
            # pinned by the projection with a nonzero gradient
            return x, w, g, it, False
        x, w = xn, wn
        g = grad(x)
    gn = float(np.linalg.norm(g))
    return x, w, g, it, gn <= tol


def _multistart_inits(op: GreenOperator, k: int, balls, margin: float, n: int, seed: int):
    x0, y0, x1, y1 = op.domain.geometry.bbox()
    sampler = qmc.Halton(d=2 * k, scramble=True, seed=seed)
    out = []
    sep = max(4 * op.domain.spacing, 1e-3 * op.domain.diameter)
    for _ in range(200):
        u = sampler.random(256)
        for row in u:
            pts = row.reshape(k, 2)
            if balls is None:
                pts = np.column_stack([x0 + pts[:, 0] * (x1 - x0), y0 + pts[:, 1] * (y1 - y0)])
            else:
                c = np.array([b[0] for b in balls], dtype=float)
                r = np.array([b[1] for b in balls], dtype=float)
                ang = 2 * math.pi * pts[:, 0]
                rad = r * np.sqrt(pts[:, 1])
                pts = c + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
            if not all(op.domain.contains(p) and op.domain.boundary_distance(p) >= margin for p in pts):
                continue
            if k > 1 and min(np.hypot(*(pts[i] - pts[j]))
                             for i, j in itertools.combinations(range(k), 2)) < sep:
                continue
            out.append(pts)
            if len(out) == n:
                return out
    raise LandscapeError("could not draw admissible initial configurations")


def kr_minimize(
    op: GreenOperator,
    strengths: Sequence[float],
    init: Sequence | str = "multistart",
    r_balls: Sequence | None = None,
    tol: float = 1e-9,
    max_iter: int = 20000,
    n_starts: int = 32,
    seed: int = 0,
) -> MinimizeReport:
    """Projected gradient descent on W_k with Armijo backtracking.

    ``r_balls`` is an optional list of (center, radius) confinement balls, one
    per vortex. Points are also kept 3 grid cells away from the boundary.
    With ``init="multistart"`` 32 scrambled-Halton starts are tried and the
    lowest value wins (ties within 1e-12 broken by lexicographic point order).
    """
    s = np.asarray(strengths, dtype=float)
    k = s.size
    margin = 3 * op.domain.spacing
    if r_balls is not None:
        if len(r_balls) != k:
            raise ValueError("need one confinement ball per vortex")
        for (c1, r1), (c2, r2) in itertools.combinations(r_balls, 2):
            if np.hypot(*(np.asarray(c1) - np.asarray(c2))) <= r1 + r2:
                raise ValueError("confinement balls overlap")
        for c, r in r_balls:
            if op.domain.boundary_distance(c) <= r:
                raise ValueError("confinement ball leaves the domain")
    if isinstance(init, str):
        if init != "multistart":
            raise ValueError(f"unknown init {init!r}")
        starts = _multistart_inits(op, k, r_balls, margin, n_starts, seed)
    else:
        starts = [np.asarray(init, dtype=float).reshape(k, 2)]

    results = []
    for x0 in starts:
        x, w, g, it, ok = _descend(op, x0, s, r_balls, margin, tol, max_iter)
        results.append((x, w, g, it, ok))
    good = [r for r in results if r[4]]
    if not good:
        raise LandscapeError("no interior critical point found")
    wbest = min(r[1] for r in good)
    ties = [r for r in good if r[1] <= wbest + 1e-12]
    ties.sort(key=lambda r: tuple(r[0].ravel()))
    x, w, g, it, _ = ties[0]
    cfg = VortexConfiguration(x, s)
    eigs = np.linalg.eigvalsh(kr_hessian(op, cfg))
    scale = max(float(np.abs(eigs).max()), 1e-300)
    isolated = bool(eigs.min() > 1e-6 * scale)
    return MinimizeReport(
        configuration=cfg, value=float(w), grad_norm=float(np.linalg.norm(g)), converged=True,
        iterations=it, hessian_eigs=eigs, isolated=isolated, n_starts=len(starts),
        n_converged=len(good), history=[(r[1], r[4]) for r in results],
    )
