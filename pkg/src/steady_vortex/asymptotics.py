"""Epsilon sweeps of the solver and fits of the concentration laws.

As eps -> 0 the multiplier and the energy grow like (kappa/2pi) ln(1/eps)
and (kappa^2/4pi) ln(1/eps); the vortex core shrinks like eps, sits at a
minimum of the Robin (or Kirchhoff-Routh) function, and rescales to the
radial limiting profile.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from .domain import DomainGrid, GreenOperator, build_domain
from .profiles import RadialProfile
from .solver import (
    MultiSolveResult,
    MultiVortexSpec,
    SolveResult,
    SolverConfig,
    first_order_violation,
    multi_solve,
    solve,
)

CSV_COLUMNS = ("epsilon", "mu", "energy_E", "energy_total", "diam_support", "center_x", "center_y",
               "patch_area", "iterations", "residual", "profile_l2")


@dataclass
class SweepRecord:
    epsilon: float
    mu: list[float]
    energy_E: float
    energy_total: float
    energy_initial: float
    support_diameter: list[float]
    center: list[np.ndarray]
    patch_area: float
    iterations: int
    residual: float
    profile_l2: float
    resolution: int | None
    Lambda: float
    psi_max: list[float]
    first_order: float
    steady_residual: float
    result: SolveResult | MultiSolveResult = field(repr=False, default=None)


@dataclass
class SweepReport:
    records: list[SweepRecord]
    kappas: list[float]
    fits: dict = field(default_factory=dict)

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.records])

    def to_csv(self, path) -> None:
        """One row per (epsilon, component); energies are totals and repeat across components."""
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in self.records:
                for i in range(len(r.mu)):
                    row = [r.epsilon, r.mu[i], r.energy_E, r.energy_total, r.support_diameter[i],
                           r.center[i][0], r.center[i][1], r.patch_area, r.iterations, r.residual,
                           r.profile_l2]
                    fh.write(",".join(_fmt(v) for v in row) + "\n")

    def fits_json(self) -> str:
        return json.dumps(_jsonable(self.fits), indent=2, sort_keys=True)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# fits


def log_fit(eps: Sequence[float], values: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares value = slope * ln(1/eps) + intercept; returns (slope, intercept, R^2)."""
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.asarray(values, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss if ss > 0 else 1.0
    return float(slope), float(intercept), r2


def compute_fits(report: SweepReport) -> dict:
    recs = report.records
    if len(recs) < 3:
        return {}
    eps = [r.epsilon for r in recs]
    k = len(report.kappas)
    fits: dict = {}
    mu_fits = [log_fit(eps, [r.mu[i] for r in recs]) for i in range(k)]
    fits["mu_slope"], fits["mu_intercept"], fits["mu_r2"] = mu_fits[0]
    if k > 1:
        fits["mu_slope_components"] = [m[0] for m in mu_fits]
        fits["mu_intercept_components"] = [m[1] for m in mu_fits]
        fits["mu_r2_components"] = [m[2] for m in mu_fits]
    fits["E_slope"], fits["E_intercept"], fits["E_r2"] = log_fit(eps, [r.energy_total for r in recs])
    ratios = np.array([[r.support_diameter[i] / r.epsilon for i in range(k)] for r in recs])
    fits["diam_over_eps"] = ratios.tolist()
    fits["diam_ratio_max"] = float(ratios.max() / ratios.min())
    fits["mu_slope_target"] = [abs(kk) / (2 * math.pi) for kk in report.kappas]
    fits["E_slope_target"] = sum(kk**2 for kk in report.kappas) / (4 * math.pi)
    fits.update(bound_shapes(report))
    return fits


def bound_shapes(report: SweepReport) -> dict:
    """Constants in the mu lower bound, psi upper bound and energy upper bound, fitted per record.

    mu >= (|k|/2pi) ln(1/eps) - |1 - 2 delta1| f_inv(Lambda) - C,
    max psi <= |1 - 2 delta1| f_inv(Lambda) + (|k|/4pi) ln Lambda + C,
    energy <= (sum k^2/4pi) ln(1/eps) + C.
    The reported C is the smallest nonnegative constant that works for every
    record, and the spread is how much the per-record constant varies.
    """
    out = {}
    recs = report.records
    cm, cp = [], []
    for r in recs:
        res = r.result
        comps = res.components if isinstance(res, MultiSolveResult) else [res]
        for i, c in enumerate(comps):
            prof = c.profile
            a = abs(1 - 2 * prof.delta1) * float(prof.f_inv(np.asarray(r.Lambda)))
            kk = abs(report.kappas[i])
            cm.append((kk / (2 * math.pi)) * math.log(1 / r.epsilon) - a - r.mu[i])
            cp.append(r.psi_max[i] - a - (kk / (4 * math.pi)) * math.log(r.Lambda))
    ce = [r.energy_total - sum(k * k for k in report.kappas) / (4 * math.pi) * math.log(1 / r.epsilon)
          for r in recs]
    out["mu_lower_C"] = max(0.0, max(cm))
    out["mu_lower_spread"] = float(np.ptp(cm))
    out["psi_upper_C"] = max(0.0, max(cp))
    out["psi_upper_spread"] = float(np.ptp(cp))
    out["E_upper_C"] = float(max(ce))
    out["E_upper_spread"] = float(np.ptp(ce))
    return out


# --------------------------------------------------------------------------
# grids and warm starts


def adequate_resolution(geometry, epsilon: float, kappa_min: float, rule: str = "pow2") -> int:
    """Smallest grid (cells across the shortest diameter) with eps sqrt(kappa/pi) >= 6h."""
    need = 6.0 * geometry.min_diameter / (epsilon * math.sqrt(abs(kappa_min) / math.pi))
    need = max(16, int(math.ceil(need * (1 - 1e-12))))
    if rule == "pow2":
        return 1 << (need - 1).bit_length()
    if rule == "mult64":
        return 64 * int(math.ceil(need / 64))
    raise ValueError(f"unknown resolution rule {rule!r}")


def rescale_field(src: SolveResult | MultiSolveResult, target: DomainGrid, ratio: float) -> np.ndarray:
    """Shrink each vortex of ``src`` about its center by ``ratio`` (new eps / old eps), keeping mass."""
    comps = src.components if isinstance(src, MultiSolveResult) else [src]
    out = np.zeros(target.n_cells)
    for c in comps:
        d = c.omega.domain
        full = d.to_full(c.omega.values)
        cx, cy = c.center
        px = cx + (target.x - cx) / ratio
        py = cy + (target.y - cy) / ratio
        ii = (px - d.origin[0]) / d.spacing - 0.5
        jj = (py - d.origin[1]) / d.spacing - 0.5
        out += ndimage.map_coordinates(full, [ii, jj], order=1, mode="constant", cval=0.0) / ratio**2
    return out


# --------------------------------------------------------------------------
# sweeps


class SweepError(RuntimeError):
    def __init__(self, message: str, report: SweepReport):
        super().__init__(message)
        self.report = report


def _record(eps, res, op, limit) -> SweepRecord:
    comps = res.components if isinstance(res, MultiSolveResult) else [res]
    l2 = float("nan")
    if limit is not None and len(comps) == 1:
        l2 = profile_compare(comps[0], limit).error
    return SweepRecord(
        epsilon=eps, mu=[c.mu for c in comps], energy_E=res.energy_E, energy_total=res.energy_total,
        energy_initial=res.energy_initial, support_diameter=[c.support_diameter for c in comps],
        center=[np.asarray(c.center) for c in comps], patch_area=res.patch_area,
        iterations=res.iterations, residual=res.residual_L1, profile_l2=l2,
        resolution=op.domain.resolution, Lambda=res.Lambda,
        psi_max=[float(c.psi.values[c.omega.values * c.sign > 0].max()) for c in comps],
        first_order=max(first_order_violation(c) for c in comps),
        steady_residual=res.steady_residual, result=res,
    )


def epsilon_sweep(
    target,
    base: SolverConfig,
    epsilons: Sequence[float],
    spec: MultiVortexSpec | None = None,
    rule: str = "pow2",
    warm: bool = True,
    jobs: int = 1,
    limit: RadialProfile | None = None,
    operators: dict | None = None,
    keep_results: bool = True,
) -> SweepReport:
    """Solve for each eps (largest first) and fit mu and the energy against ln(1/eps).

    ``target`` is either a GreenOperator (one grid for every eps) or a
    geometry, in which case each eps gets the smallest adequate grid under
    ``rule`` and operators are shared between equal grids. Warm starts shrink
    the previous solution about its center; ``warm=False`` runs every eps
    from the uniform-patch start, concurrently when ``jobs > 1``.
    """
    eps_list = sorted({float(e) for e in epsilons}, reverse=True)
    if len(eps_list) < 3:
        raise ValueError("a sweep needs at least 3 distinct epsilons")
    kappas = [c.kappa for c in spec.components] if spec is not None else [base.kappa]
    kmin = min(abs(k) for k in kappas)
    ops = operators if operators is not None else {}

    def op_for(eps):
        if isinstance(target, GreenOperator):
            return target
        res = adequate_resolution(target, eps, kmin, rule)
        if res not in ops:
            ops[res] = GreenOperator(build_domain(target, res))
        return ops[res]

    def run(eps, init=None):
        op = op_for(eps)
        cfg = replace(base, epsilon=eps)
        if spec is not None:
            out = multi_solve(op, spec, cfg, init_field=init)
        else:
            if init is not None:
                cfg = replace(cfg, init="user-field", init_field=init)
            out = solve(op, cfg)
        return op, out

    report = SweepReport([], kappas)
    try:
        if warm:
            prev = None
            for eps in eps_list:
                init = None
                if prev is not None:
                    init = rescale_field(prev[1], op_for(eps).domain, eps / prev[0])
                op, out = run(eps, init)
                report.records.append(_record(eps, out, op, limit))
                prev = (eps, out)
        else:
            for eps in eps_list:
                op_for(eps).factorization
            with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
                outs = list(pool.map(run, eps_list))
            for eps, (op, out) in zip(eps_list, outs):
                report.records.append(_record(eps, out, op, limit))
    except Exception as exc:
        report.fits = compute_fits(report)
        raise SweepError(f"sweep aborted: {exc}", report) from exc
    report.fits = compute_fits(report)
    if not keep_results:
        for r in report.records:
            r.result = None
    return report


# --------------------------------------------------------------------------
# center and profile diagnostics


@dataclass
class CenterReport:
    epsilons: list[float]
    distances: list[float]
    nonincreasing: bool
    within_3eps: bool
    final_within_3eps: bool


def center_convergence(report: SweepReport, target, slack: float = 1e-9) -> CenterReport:
    """Distance of each record's vortex centers to ``target`` (a point or one point per vortex).

    For several vortices the distance is the largest over components.
    ``slack`` absorbs roundoff when centers already sit on the target.
    """
    tgt = np.atleast_2d(np.asarray(target, dtype=float))
    eps, dist = [], []
    for r in report.records:
        if len(r.center) != len(tgt):
            raise ValueError("target must give one point per vortex")
        dist.append(max(float(np.hypot(*(c - t))) for c, t in zip(r.center, tgt)))
        eps.append(r.epsilon)
    noninc = all(b <= a + slack for a, b in zip(dist, dist[1:]))
    within = all(d <= 3 * e for d, e in zip(dist, eps))
    return CenterReport(eps, dist, noninc, within, dist[-1] <= 3 * min(eps))


@dataclass
class ProfileComparison:
    error: float
    radii: np.ndarray
    zeta: np.ndarray
    limit: np.ndarray
    monotone: bool


def profile_compare(result: SolveResult, limit: RadialProfile, bin_cells: float = 1.0,
                    mono_slack: float = 0.05) -> ProfileComparison:
    """Relative L2 distance between the rescaled vorticity and f(U) on [0, 1.5 rho].

    Cells are binned by rescaled distance |x - x_eps| / eps into rings of
    width ``bin_cells`` grid steps; in each ring the mean of eps^2 |omega| is
    compared with the mean of f(U) over the same cells, weighting rings by
    their cell count.
    """
    if abs(abs(result.kappa) - limit.kappa) > 1e-9 * limit.kappa:
        raise ValueError("limiting profile was computed for a different kappa")
    d = result.omega.domain
    eps = result.epsilon
    w = np.abs(result.omega.values)
    if not (w > 0).any():
        raise ValueError("profile_compare: empty support")
    c = np.asarray(result.center)
    rr = np.hypot(d.x - c[0], d.y - c[1]) / eps
    rmax = 1.5 * limit.support_radius
    sel = rr <= rmax
    width = bin_cells * d.spacing / eps
    nb = max(1, int(math.ceil(rmax / width)))
    b = np.minimum((rr[sel] / width).astype(int), nb - 1)
    cnt = np.bincount(b, minlength=nb).astype(float)
    zeta = np.bincount(b, weights=eps**2 * w[sel], minlength=nb)
    ref = np.bincount(b, weights=limit.vorticity(rr[sel]), minlength=nb)
    keep = cnt > 0
    zeta, ref, cnt = zeta[keep] / cnt[keep], ref[keep] / cnt[keep], cnt[keep]
    radii = (np.nonzero(keep)[0] + 0.5) * width
    err = math.sqrt(float((cnt * (zeta - ref) ** 2).sum()) / float((cnt * ref**2).sum()))
    mono = bool(np.all(np.diff(zeta) <= mono_slack * zeta.max()))
    return ProfileComparison(err, radii, zeta, ref, mono)
