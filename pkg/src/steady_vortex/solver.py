"""Energy-maximizing vorticity in the truncated admissible class, by a damped bathtub iteration.

For a stream function u = G omega the constrained maximizer of
<u, w> - penalty(w) over {0 <= w <= Lambda/eps^2, int w = kappa} is

    w = min(f(u - mu) / eps^2, Lambda / eps^2)

with mu fixed by the mass constraint (bathtub principle). Iterating this map
with damping is a difference-of-convex ascent: the total energy
E - penalty never decreases, whatever the damping factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .domain import (
    CustomMask,
    Disc,
    DomainError,
    DomainGrid,
    GreenOperator,
    Rectangle,
    StreamField,
    VorticityField,
)
from .profiles import ProfileFunction, power_profile


class ConfigError(ValueError):
    pass


class MuSolveError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


THETA_MIN = 2.0**-10


# --------------------------------------------------------------------------
# configuration


def default_center(geometry) -> tuple[float, float]:
    if isinstance(geometry, Disc):
        return (float(geometry.center[0]), float(geometry.center[1]))
    if isinstance(geometry, Rectangle):
        return (geometry.corner[0] + 0.5 * geometry.width, geometry.corner[1] + 0.5 * geometry.height)
    x0, y0, x1, y1 = geometry.bbox()
    return (0.5 * (x0 + x1), 0.5 * (y0 + y1))


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float
    Lambda: float = 50.0
    kappa: float = 1.0
    profile: ProfileFunction = field(default_factory=lambda: power_profile(1.0))
    tol_fixed_point: float = 1e-10
    tol_mu: float = 1e-12
    max_iter: int = 5000
    damping: float = 1.0
    init: str = "uniform-patch"
    center: tuple[float, float] | None = None
    init_field: np.ndarray | None = field(default=None, repr=False, compare=False)
    escalations: int = 4

    def validate(self, domain: DomainGrid, area: float | None = None) -> None:
        eps = self.epsilon
        if not (eps > 0 and math.isfinite(eps)):
            raise ConfigError(f"solver.epsilon must be positive, got {eps}")
        if self.kappa == 0 or not math.isfinite(self.kappa):
            raise ConfigError("solver.kappa must be nonzero")
        area = domain.area if area is None else area
        need = max(1.0, eps**2 * abs(self.kappa) / area)
        if not self.Lambda > need:
            raise ConfigError(f"solver.Lambda={self.Lambda} must exceed max(1, eps^2 kappa/|D|) = {need:.6g}")
        if not 0 < self.damping <= 1:
            raise ConfigError(f"solver.damping must lie in (0, 1], got {self.damping}")
        if self.max_iter < 1:
            raise ConfigError("solver.max_iter must be positive")
        if not (self.tol_fixed_point > 0 and self.tol_mu > 0):
            raise ConfigError("solver tolerances must be positive")
        if self.init not in ("uniform-patch", "user-field"):
            raise ConfigError(f"solver.init must be uniform-patch or user-field, got {self.init!r}")
        if self.init == "user-field" and self.init_field is None:
            raise ConfigError("solver.init = user-field needs an initial field")
        core = eps * math.sqrt(abs(self.kappa) / math.pi)
        if core < 6 * domain.spacing * (1 - 1e-12):
            raise ConfigError(
                f"resolution adequacy: eps*sqrt(kappa/pi) = {core:.4g} spans fewer than 6 cells "
                f"of size h = {domain.spacing:.4g}; refine the grid or increase epsilon"
            )

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "init_field":
                continue
            v = getattr(self, f.name)
            out[f.name] = v.describe() if isinstance(v, ProfileFunction) else (
                list(v) if isinstance(v, tuple) else v)
        return out


@dataclass(frozen=True)
class VortexComponent:
    profile: ProfileFunction
    kappa: float
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class MultiVortexSpec:
    components: tuple[VortexComponent, ...]

    def validate(self, domain: DomainGrid) -> None:
        if not self.components:
            raise ConfigError("multi-vortex spec needs at least one component")
        for i, c in enumerate(self.components):
            if c.kappa == 0:
                raise ConfigError(f"component {i}: kappa must be nonzero")
            if not c.radius > 0:
                raise ConfigError(f"component {i}: ball radius must be positive")
            domain.require_inside(c.center, f"component {i} center")
            if domain.boundary_distance(c.center) <= c.radius:
                raise ConfigError(f"component {i}: ball B_r(center) is not contained in the domain")
        for i in range(len(self.components)):
            for j in range(i + 1, len(self.components)):
                a, b = self.components[i], self.components[j]
                if math.dist(a.center, b.center) <= a.radius + b.radius:
                    raise ConfigError(f"balls of components {i} and {j} intersect")

    def echo(self) -> list:
        return [{"profile": c.profile.describe(), "kappa": c.kappa, "center": list(c.center),
                 "radius": c.radius} for c in self.components]


# --------------------------------------------------------------------------
# functionals


def _check_grid(op: GreenOperator, omega: VorticityField) -> None:
    if not op.domain.same_grid(omega.domain):
        raise DomainError("vorticity field lives on a different grid than the Green operator")


def energy_kinetic(op: GreenOperator, omega: VorticityField, u: np.ndarray | None = None) -> float:
    """E = 1/2 <omega, G omega> h^2."""
    _check_grid(op, omega)
    if u is None:
        u = op.apply(omega.values)
    return 0.5 * float(np.dot(omega.values, u)) * omega.domain.cell_area


def penalty(omega: VorticityField, f: ProfileFunction, epsilon: float, sign: int = 1) -> float:
    """(1/eps^2) sum F(eps^2 sign omega) h^2.

    The cell sum is exactly rounded, so the value depends only on the
    multiset of cell values and is bitwise invariant under rearrangement.
    """
    return _penalty_values(omega.values, f, epsilon, sign, omega.domain.cell_area)


def _penalty_values(values, f, epsilon, sign, cell_area) -> float:
    s = sign * np.asarray(values, dtype=float)
    if np.any(s < 0):
        raise ValueError(f"penalty: field has the wrong sign for sign={sign:+d}")
    nz = s[s > 0]
    terms = np.asarray(f.F(epsilon**2 * nz), dtype=float)
    return math.fsum(terms.tolist()) * cell_area / epsilon**2


def _mass(u, mu, f, eps, cap, cell_area):
    return float(np.minimum(f(u - mu) / eps**2, cap).sum()) * cell_area


def mu_solve(
    u: StreamField | np.ndarray,
    f: ProfileFunction,
    epsilon: float,
    Lambda: float,
    kappa: float,
    mask: np.ndarray | None = None,
    tol_mu: float = 1e-12,
    cell_area: float | None = None,
) -> float:
    """Multiplier mu with sum min(f(u - mu)/eps^2, Lambda/eps^2) h^2 = kappa over ``mask``.

    The mass is nonincreasing in mu, so bisection on
    [min u - f_inv(Lambda) - 1, max u] converges; the returned value is the
    upper end of the final bracket still carrying mass >= kappa.
    """
    if isinstance(u, StreamField):
        cell_area = u.domain.cell_area
        u = u.values
    if cell_area is None:
        raise ValueError("cell_area is required for raw arrays")
    if not kappa > 0:
        raise ValueError("mu_solve needs kappa > 0")
    u = np.asarray(u, dtype=float)
    if mask is not None:
        u = u[mask]
    if u.size == 0:
        raise ValueError("mu_solve: empty cell subset")
    eps = float(epsilon)
    cap = Lambda / eps**2
    ff = f.f
    lo = float(u.min()) - float(f.f_inv(np.asarray(Lambda))) - 1.0
    hi = float(u.max())
    m_lo = _mass(u, lo, ff, eps, cap, cell_area)
    if m_lo < kappa * (1 - tol_mu):
        raise MuSolveError(
            f"Lambda or domain too small to hold circulation kappa={kappa:.6g} "
            f"(capacity {m_lo:.6g})"
        )
    m_mid = _mass(u, 0.5 * (lo + hi), ff, eps, cap, cell_area)
    m_hi = _mass(u, hi, ff, eps, cap, cell_area)
    if not (m_lo >= m_mid >= m_hi):
        raise MuSolveError("mass function is not monotone in mu; check the profile")
    act = u
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _mass(act, mid, ff, eps, cap, cell_area) >= kappa:
            lo = mid
            act = act[act > lo]
        else:
            hi = mid
    m = _mass(act, lo, ff, eps, cap, cell_area)
    if abs(m - kappa) > tol_mu * kappa:
        raise MuSolveError(f"mu bisection stalled with mass error {abs(m - kappa) / kappa:.3e}")
    return lo


# --------------------------------------------------------------------------
# diagnostics


def support_stats(omega: VorticityField) -> tuple[float, np.ndarray, float]:
    """(diameter, center, area) of {omega != 0}; center is the first moment over the circulation."""
    d = omega.domain
    v = omega.values
    sup = v != 0
    if not sup.any():
        raise ValueError("support_stats: empty support")
    total = float(v.sum())
    if total == 0:
        raise ValueError("support_stats: zero circulation")
    px, py = d.x[sup], d.y[sup]
    center = np.array([float(np.dot(v[sup], px)) / total, float(np.dot(v[sup], py)) / total])
    pts = np.column_stack([px, py])
    if len(pts) > 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:  # collinear support
            pass
    diff = pts[:, None, :] - pts[None, :, :]
    diam = float(np.sqrt((diff**2).sum(-1)).max())
    return diam, center, float(sup.sum()) * d.cell_area


def patch_measure(result) -> float:
    """Area of the saturated set {|omega| >= Lambda/eps^2}."""
    omega = result.omega if hasattr(result, "omega") else result
    cap = result.Lambda / result.epsilon**2
    return float(np.count_nonzero(np.abs(omega.values) >= cap * (1 - 1e-12))) * omega.domain.cell_area


def _saturation_area(values, cap, cell_area):
    return float(np.count_nonzero(np.abs(values) >= cap * (1 - 1e-12))) * cell_area


def _bump(px, py, c, r):
    """exp(1 - 1/(1 - s)) with s = |x - c|^2 / r^2, and its gradient."""
    dx, dy = px - c[0], py - c[1]
    s = (dx * dx + dy * dy) / (r * r)
    inside = s < 1
    phi = np.zeros_like(px)
    gx = np.zeros_like(px)
    gy = np.zeros_like(px)
    si = s[inside]
    e = np.exp(1.0 - 1.0 / (1.0 - si))
    phi[inside] = e
    dphi_ds = -e / (1.0 - si) ** 2
    gx[inside] = dphi_ds * 2 * dx[inside] / (r * r)
    gy[inside] = dphi_ds * 2 * dy[inside] / (r * r)
    return phi, gx, gy


def _bump_grad_max() -> float:
    t = np.linspace(0.0, 1.0, 200001)[:-1]
    return float(np.abs(np.exp(1.0 - 1.0 / (1.0 - t * t)) * 2 * t / (1.0 - t * t) ** 2).max())


# sup of |grad phi| for the unit-radius bump; scales as 1/r
_BUMP_GRAD_MAX = _bump_grad_max()


def _full_gradient(domain: DomainGrid, u: np.ndarray):
    full = domain.to_full(u)
    h = domain.spacing
    gx = np.zeros_like(full)
    gy = np.zeros_like(full)
    gx[1:-1, :] = (full[2:, :] - full[:-2, :]) / (2 * h)
    gy[:, 1:-1] = (full[:, 2:] - full[:, :-2]) / (2 * h)
    return gx[domain.mask], gy[domain.mask]


def steady_residual(op: GreenOperator, omega: VorticityField, n_tests: int = 16,
                    u: np.ndarray | None = None) -> float:
    """Largest normalized weak-form residual int omega grad^perp(G omega) . grad(phi).

    Test functions are smooth bumps centered on a square lattice covering the
    support, each with radius equal to the lattice spacing times 1.5 (at
    least 4 cells). Each value is divided by
    max|grad phi| * ||omega||_1 * max|grad G omega|.
    """
    _check_grid(op, omega)
    d = omega.domain
    if u is None:
        u = op.apply(omega.values)
    ux, uy = _full_gradient(d, u)
    # clockwise rotation: (a, b)^perp = (b, -a)
    vx, vy = uy, -ux
    w = omega.values
    sup = w != 0
    if not sup.any():
        return 0.0
    l1 = float(np.abs(w).sum()) * d.cell_area
    gnorm = float(np.sqrt(ux * ux + uy * uy).max())
    if gnorm == 0:
        return 0.0
    x0, x1 = float(d.x[sup].min()), float(d.x[sup].max())
    y0, y1 = float(d.y[sup].min()), float(d.y[sup].max())
    m = max(1, int(round(math.sqrt(n_tests))))
    span = max(x1 - x0, y1 - y0, 4 * d.spacing)
    step = span / m
    r = max(1.5 * step, 4 * d.spacing)
    cx = 0.5 * (x0 + x1) + step * (np.arange(m) - 0.5 * (m - 1))
    cy = 0.5 * (y0 + y1) + step * (np.arange(m) - 0.5 * (m - 1))
    px, py = d.x[sup], d.y[sup]
    wv, vxs, vys = w[sup], vx[sup], vy[sup]
    worst = 0.0
    for a in cx:
        for b in cy:
            if not d.contains((a, b)) or d.boundary_distance((a, b)) <= r:
                continue
            _, gx, gy = _bump(px, py, (a, b), r)
            val = float(np.dot(wv, vxs * gx + vys * gy)) * d.cell_area
            worst = max(worst, abs(val) / ((_BUMP_GRAD_MAX / r) * l1 * gnorm))
    return worst


# --------------------------------------------------------------------------
# results


@dataclass(eq=False)
class SolveResult:
    omega: VorticityField
    psi: StreamField
    mu: float
    energy_E: float
    energy_F: float
    energy_total: float
    energy_initial: float
    iterations: int
    residual_L1: float
    patch_area: float
    support_diameter: float
    center: np.ndarray
    support_area: float
    steady_residual: float
    epsilon: float
    Lambda: float
    kappa: float
    profile: ProfileFunction
    sign: int = 1
    config: dict = field(default_factory=dict)
    trace: list = field(default_factory=list, repr=False)
    escalations: int = 0

    def first_order_violation(self) -> float:
        return first_order_violation(self)

    def record(self) -> dict:
        return {
            "config": self.config,
            "mu": self.mu,
            "energy_E": self.energy_E,
            "energy_F": self.energy_F,
            "energy_total": self.energy_total,
            "energy_initial": self.energy_initial,
            "iterations": self.iterations,
            "residual_L1": self.residual_L1,
            "patch_area": self.patch_area,
            "support_diameter": self.support_diameter,
            "center": [float(c) for c in self.center],
            "steady_residual": self.steady_residual,
            "Lambda": self.Lambda,
        }


@dataclass(eq=False)
class MultiSolveResult:
    components: list[SolveResult]
    omega: VorticityField
    energy_E: float
    energy_F: float
    energy_total: float
    energy_initial: float
    iterations: int
    residual_L1: float
    steady_residual: float
    epsilon: float
    Lambda: float
    config: dict = field(default_factory=dict)
    trace: list = field(default_factory=list, repr=False)
    escalations: int = 0

    @property
    def mu(self) -> list[float]:
        return [c.mu for c in self.components]

    @property
    def patch_area(self) -> float:
        return sum(c.patch_area for c in self.components)

    def record(self) -> dict:
        return {
            "config": self.config,
            "mu": self.mu,
            "energy_E": self.energy_E,
            "energy_F": self.energy_F,
            "energy_total": self.energy_total,
            "energy_initial": self.energy_initial,
            "iterations": self.iterations,
            "residual_L1": self.residual_L1,
            "patch_area": self.patch_area,
            "support_diameter": [c.support_diameter for c in self.components],
            "center": [[float(v) for v in c.center] for c in self.components],
            "steady_residual": self.steady_residual,
            "Lambda": self.Lambda,
        }


def first_order_violation(result: SolveResult) -> float:
    """Largest cell-wise violation of the bathtub conditions, relative to max psi.

    psi >= f_inv(Lambda) on the saturated set, psi = f_inv(eps^2 |omega|) where
    0 < |omega| < Lambda/eps^2, and psi <= 0 where omega = 0. Only cells of the
    component's admissible region are inspected (``result.config['cells']``).
    """
    eps, Lam = result.epsilon, result.Lambda
    f = result.profile
    w = result.sign * result.omega.values
    psi = result.psi.values
    cells = result.config.get("_cells")
    if cells is not None:
        w, psi = w[cells], psi[cells]
    cap = Lam / eps**2
    sat = w >= cap * (1 - 1e-12)
    mid = (w > 0) & ~sat
    zero = w == 0
    scale = max(float(np.abs(psi[w > 0]).max()) if (w > 0).any() else 1.0, 1e-300)
    v = 0.0
    if sat.any():
        v = max(v, float(np.max(float(f.f_inv(np.asarray(Lam))) - psi[sat], initial=0.0)))
    if mid.any():
        v = max(v, float(np.abs(psi[mid] - f.f_inv(eps**2 * w[mid])).max()))
    if zero.any():
        v = max(v, float(np.max(psi[zero], initial=0.0)))
    return v / scale


# --------------------------------------------------------------------------
# iteration


@dataclass
class _Comp:
    sign: int
    kappa: float
    profile: ProfileFunction
    cells: np.ndarray | None  # admissible cell indices, None means all
    ball: tuple | None = None


def _uniform_patch(domain: DomainGrid, center, eps, kappa, cap) -> np.ndarray:
    r = eps * math.sqrt(kappa / math.pi)
    inside = (domain.x - center[0]) ** 2 + (domain.y - center[1]) ** 2 < r * r
    if not inside.any():
        raise ConfigError("uniform-patch init covers no cells")
    w = np.where(inside, 1.0 / eps**2, 0.0)
    w *= kappa / (w.sum() * domain.cell_area)
    if w.max() > cap:
        raise ConfigError("uniform-patch init exceeds Lambda/eps^2; increase Lambda")
    return w


def _total_energy(values, u, comps, eps, cell_area):
    E = 0.5 * float(np.dot(values, u)) * cell_area
    Fp = 0.0
    for c in comps:
        part = values if c.cells is None else values[c.cells]
        Fp += _penalty_values(part, c.profile, eps, c.sign, cell_area)
    return E, Fp


def _bathtub(u, comps, n, eps, Lam, tol_mu, cell_area):
    cap = Lam / eps**2
    w = np.zeros(n)
    mus = []
    for c in comps:
        uc = c.sign * (u if c.cells is None else u[c.cells])
        mu = mu_solve(uc, c.profile, eps, Lam, c.kappa, tol_mu=tol_mu, cell_area=cell_area)
        wc = c.sign * np.minimum(np.asarray(c.profile.f(uc - mu), dtype=float) / eps**2, cap)
        if c.cells is None:
            w += wc
        else:
            w[c.cells] += wc
        mus.append(mu)
    return w, mus


def _residuals(w_new, w, comps, cell_area):
    out = []
    for c in comps:
        d = w_new - w if c.cells is None else w_new[c.cells] - w[c.cells]
        out.append(float(np.abs(d).sum()) * cell_area / c.kappa)
    return out


def _iterate(op, comps, eps, Lam, w0, tol, tol_mu, max_iter, damping):
    d = op.domain
    A = d.cell_area
    n = d.n_cells
    w = w0.copy()
    u = op.apply(w)
    E, Fp = _total_energy(w, u, comps, eps, A)
    e_init = E - Fp
    e_cur = e_init
    theta = damping
    trace = []
    for it in range(max_iter + 1):
        w_new, mus = _bathtub(u, comps, n, eps, Lam, tol_mu, A)
        res = _residuals(w_new, w, comps, A)
        trace.append({"iter": it, "residual": max(res), "energy": e_cur, "theta": theta, "mu": mus})
        if max(res) <= tol:
            return w, u, mus, res, it, e_init, trace
        if it == max_iter:
            break
        u_new = op.apply(w_new)
        th = theta
        while True:
            wt = (1 - th) * w + th * w_new
            ut = (1 - th) * u + th * u_new
            Et, Ft = _total_energy(wt, ut, comps, eps, A)
            et = Et - Ft
            if et >= e_cur - 1e-13 * max(1.0, abs(e_cur)) or th <= THETA_MIN:
                break
            th *= 0.5
        w, u, e_cur = wt, ut, et
        theta = damping if th == theta else th
    raise ConvergenceError(
        f"fixed point not reached in {max_iter} iterations (residual {max(res):.3e} > {tol:.1e})",
        trace,
    )


def _result_from(op, w, u, mu, comp, eps, Lam, cfg_echo, energy, e_init, iterations, res, trace,
                 steady):
    d = op.domain
    part = w if comp.cells is None else np.where(np.isin(np.arange(d.n_cells), comp.cells), w, 0.0)
    omega = VorticityField(part, d)
    psi = StreamField(comp.sign * u - mu, d)
    diam, center, area = support_stats(VorticityField(comp.sign * part, d))
    E, Fp = energy
    echo = dict(cfg_echo)
    if comp.cells is not None:
        echo["_cells"] = comp.cells
    return SolveResult(
        omega=omega, psi=psi, mu=mu, energy_E=E, energy_F=Fp, energy_total=E - Fp,
        energy_initial=e_init, iterations=iterations, residual_L1=res,
        patch_area=_saturation_area(part, Lam / eps**2, d.cell_area),
        support_diameter=diam, center=center, support_area=area, steady_residual=steady,
        epsilon=eps, Lambda=Lam, kappa=comp.sign * comp.kappa, profile=comp.profile,
        sign=comp.sign, config=echo, trace=trace,
    )


def fixed_point_solve(op: GreenOperator, cfg: SolverConfig) -> SolveResult:
    """Run the damped bathtub iteration at fixed Lambda (no escalation)."""
    d = op.domain
    cfg.validate(d)
    eps, Lam = cfg.epsilon, cfg.Lambda
    sign = 1 if cfg.kappa > 0 else -1
    comp = _Comp(sign, abs(cfg.kappa), cfg.profile, None)
    cap = Lam / eps**2
    if cfg.init == "uniform-patch":
        c = cfg.center if cfg.center is not None else default_center(d.geometry)
        w0 = sign * _uniform_patch(d, c, eps, abs(cfg.kappa), cap)
    else:
        w0 = _admissible_init(np.asarray(cfg.init_field, dtype=float), d, sign, abs(cfg.kappa), cap)
    w, u, mus, res, its, e_init, trace = _iterate(
        op, [comp], eps, Lam, w0, cfg.tol_fixed_point, cfg.tol_mu, cfg.max_iter, cfg.damping)
    energy = _total_energy(w, u, [comp], eps, d.cell_area)
    steady = steady_residual(op, VorticityField(w, d), u=u)
    return _result_from(op, w, u, mus[0], comp, eps, Lam, cfg.echo(), energy, e_init, its,
                        res[0], trace, steady)


def _admissible_init(w, d, sign, kappa, cap):
    if w.shape != (d.n_cells,):
        raise ConfigError(f"initial field has shape {w.shape}, grid has {d.n_cells} cells")
    w = np.clip(sign * w, 0.0, cap)
    m = float(w.sum()) * d.cell_area
    if m <= 0:
        raise ConfigError("initial field carries no circulation of the right sign")
    w *= kappa / m
    if w.max() > cap:
        raise ConfigError("initial field cannot be rescaled to kappa below Lambda/eps^2")
    return sign * w


def solve(op: GreenOperator, cfg: SolverConfig) -> SolveResult:
    """fixed_point_solve with Lambda doubled (up to ``cfg.escalations`` times) while a patch remains."""
    res = fixed_point_solve(op, cfg)
    k = 0
    while res.patch_area > 0 and k < cfg.escalations:
        k += 1
        cfg = replace(cfg, Lambda=2 * cfg.Lambda, init="user-field", init_field=res.omega.values)
        e0 = res.energy_initial
        res = fixed_point_solve(op, cfg)
        res.energy_initial = min(e0, res.energy_initial)
    res.escalations = k
    return res


def _ball_cells(d: DomainGrid, comp: VortexComponent) -> np.ndarray:
    dist2 = (d.x - comp.center[0]) ** 2 + (d.y - comp.center[1]) ** 2
    cells = np.nonzero(dist2 < comp.radius**2)[0]
    if cells.size == 0:
        raise ConfigError("confinement ball contains no grid cells")
    return cells


def _touches_ball_edge(d: DomainGrid, cells: np.ndarray, w: np.ndarray) -> bool:
    inball = np.zeros(d.shape, dtype=bool)
    inball[d.ix[cells], d.iy[cells]] = True
    sup = np.zeros(d.shape, dtype=bool)
    nz = cells[w[cells] != 0]
    sup[d.ix[nz], d.iy[nz]] = True
    pad = np.pad(inball, 1)
    interior = pad[2:, 1:-1] & pad[:-2, 1:-1] & pad[1:-1, 2:] & pad[1:-1, :-2] & inball
    return bool((sup & ~interior).any())


def multi_fixed_point(op: GreenOperator, spec: MultiVortexSpec, cfg: SolverConfig,
                      init_field: np.ndarray | None = None) -> MultiSolveResult:
    d = op.domain
    spec.validate(d)
    eps, Lam = cfg.epsilon, cfg.Lambda
    cap = Lam / eps**2
    comps = []
    for i, c in enumerate(spec.components):
        cells = _ball_cells(d, c)
        sub = replace(cfg, kappa=c.kappa, profile=c.profile, init="uniform-patch")
        try:
            sub.validate(d, area=math.pi * c.radius**2)
        except ConfigError as exc:
            raise ConfigError(f"component {i}: {exc}") from None
        comps.append(_Comp(1 if c.kappa > 0 else -1, abs(c.kappa), c.profile, cells, (c.center, c.radius)))
    if init_field is None:
        w0 = np.zeros(d.n_cells)
        for c, comp in zip(spec.components, comps):
            w0 += comp.sign * _uniform_patch(d, c.center, eps, comp.kappa, cap)
    else:
        w0 = np.zeros(d.n_cells)
        for comp in comps:
            part = np.zeros(d.n_cells)
            part[comp.cells] = init_field[comp.cells]
            w0 += _admissible_init(part, d, comp.sign, comp.kappa, cap)
    w, u, mus, res, its, e_init, trace = _iterate(
        op, comps, eps, Lam, w0, cfg.tol_fixed_point, cfg.tol_mu, cfg.max_iter, cfg.damping)
    for i, comp in enumerate(comps):
        if _touches_ball_edge(d, comp.cells, w):
            raise ConvergenceError(f"confinement active: component {i} support touches its ball boundary",
                                   trace)
    E, Fp = _total_energy(w, u, comps, eps, d.cell_area)
    steady = steady_residual(op, VorticityField(w, d), u=u)
    echo = {**cfg.echo(), "components": spec.echo()}
    echo.pop("kappa", None)
    echo.pop("profile", None)
    results = [
        _result_from(op, w, u, mus[i], comp, eps, Lam, echo, (E, Fp), e_init, its, res[i], [], steady)
        for i, comp in enumerate(comps)
    ]
    return MultiSolveResult(
        components=results, omega=VorticityField(w, d), energy_E=E, energy_F=Fp,
        energy_total=E - Fp, energy_initial=e_init, iterations=its, residual_L1=max(res),
        steady_residual=steady, epsilon=eps, Lambda=Lam, config=echo, trace=trace,
    )


def multi_solve(op: GreenOperator, spec: MultiVortexSpec, cfg: SolverConfig,
                init_field: np.ndarray | None = None) -> MultiSolveResult:
    """Multi-vortex iteration (Jacobi over components) with the Lambda-escalation rule."""
    res = multi_fixed_point(op, spec, cfg, init_field)
    k = 0
    while res.patch_area > 0 and k < cfg.escalations:
        k += 1
        cfg = replace(cfg, Lambda=2 * cfg.Lambda)
        e0 = res.energy_initial
        res = multi_fixed_point(op, spec, cfg, res.omega.values)
        res.energy_initial = min(e0, res.energy_initial)
    res.escalations = k
    return res


def spec_from_configuration(points, strengths, radius: float, profile: ProfileFunction | None = None):
    prof = profile or power_profile(1.0)
    return MultiVortexSpec(tuple(
        VortexComponent(prof, float(k), (float(p[0]), float(p[1])), float(radius))
        for p, k in zip(points, strengths)
    ))
