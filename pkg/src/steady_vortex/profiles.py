"""Profile nonlinearities f and the radial limiting profile -Lap U = f(U), int f(U) = kappa."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class ProfileFunction:
    """The nonlinearity f with inverse and primitive of the inverse.

    ``f_inv`` is the inverse of f on [0, inf) extended by zero, and
    ``F(s) = int_0^s f_inv``. ``delta0``/``delta1`` are the constants for
    which int_0^s f <= delta0 * s f(s) and F(s) >= delta1 * s f_inv(s).
    All three callables must accept numpy arrays.
    """

    f: Callable[[np.ndarray], np.ndarray]
    f_inv: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    delta0: float
    delta1: float
    label: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def describe(self) -> dict:
        return {"label": self.label, "delta0": self.delta0, "delta1": self.delta1, **self.params}


def power_profile(p: float) -> ProfileFunction:
    """f(s) = max(s, 0)**p."""
    p = float(p)
    if not p > 0:
        raise ProfileError(f"power profile exponent must be positive, got p={p}")
    q = 1.0 / p

    def f(s):
        return np.maximum(s, 0.0) ** p

    def f_inv(s):
        return np.maximum(s, 0.0) ** q

    def F(s):
        return np.maximum(s, 0.0) ** (1.0 + q) / (1.0 + q)

    return ProfileFunction(
        f, f_inv, F, delta0=1.0 / (p + 1.0), delta1=p / (p + 1.0),
        label=f"power(p={p:g})", params={"p": p},
    )


# --------------------------------------------------------------------------
# hypothesis checks


@dataclass
class HypothesisCheck:
    passed: bool
    counterexample: float | None = None
    detail: str = ""


@dataclass
class HypothesisReport:
    checks: dict[str, HypothesisCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, key: str) -> HypothesisCheck:
        return self.checks[key]


def check_hypotheses(
    prof: ProfileFunction,
    s_max: float = 100.0,
    n: int = 200,
    tau: Sequence[float] = (0.5, 1.0, 2.0),
    rtol: float = 1e-9,
) -> HypothesisReport:
    """Sample (H1), (H2), (H2)' and (H3) on n points in (0, s_max]."""
    if not s_max > 0:
        raise ProfileError(f"s_max must be positive, got {s_max}")
    if n < 100:
        raise ProfileError(f"need at least 100 samples, got n={n}")
    s = np.linspace(s_max / n, s_max, n)
    checks: dict[str, HypothesisCheck] = {}

    neg = -np.linspace(s_max / n, s_max, 16)
    fs = np.asarray(prof.f(s), dtype=float)
    fneg = np.asarray(prof.f(neg), dtype=float)
    s0 = np.concatenate([[0.0], s])
    f0 = np.asarray(prof.f(s0), dtype=float)
    bad_neg = np.nonzero(fneg != 0.0)[0]
    bad_inc = np.nonzero(np.diff(f0) <= 0.0)[0]
    if bad_neg.size:
        checks["H1"] = HypothesisCheck(False, float(neg[bad_neg[0]]), "f nonzero on the negative axis")
    elif bad_inc.size:
        checks["H1"] = HypothesisCheck(False, float(s0[bad_inc[0] + 1]), "f not strictly increasing")
    else:
        checks["H1"] = HypothesisCheck(True)

    # (H2): int_0^s f <= delta0 f(s) s
    prim = np.array([integrate.quad(lambda r: float(prof.f(np.asarray(r))), 0.0, si,
                                    epsabs=0.0, epsrel=1e-12, limit=200)[0] for si in s])
    rhs = prof.delta0 * fs * s
    bad = np.nonzero(prim > rhs * (1 + rtol) + 1e-300)[0]
    checks["H2"] = HypothesisCheck(not bad.size, float(s[bad[0]]) if bad.size else None)

    # (H2)': F(s) >= delta1 s f_inv(s)
    Fs = np.asarray(prof.F(s), dtype=float)
    rhs1 = prof.delta1 * s * np.asarray(prof.f_inv(s), dtype=float)
    bad = np.nonzero(Fs < rhs1 * (1 - rtol))[0]
    checks["H2'"] = HypothesisCheck(not bad.size, float(s[bad[0]]) if bad.size else None)

    # (H3): f(s) exp(-tau s) eventually decreasing, judged on the top decade
    top = s[s >= s_max / 10.0]
    ftop = np.asarray(prof.f(top), dtype=float)
    h3_ok = True
    h3_cex = None
    detail = []
    for t in tau:
        g = np.log(np.maximum(ftop, 1e-300)) - t * top
        inc = np.nonzero(np.diff(g) > 0.0)[0]
        if inc.size:
            h3_ok = False
            h3_cex = h3_cex if h3_cex is not None else float(top[inc[0] + 1])
            detail.append(f"tau={t:g} grows")
    checks["H3"] = HypothesisCheck(h3_ok, h3_cex, "; ".join(detail))

    inv = np.asarray(prof.f_inv(fs), dtype=float)
    bad = np.nonzero(np.abs(inv - s) > 1e-10 * np.maximum(1.0, s))[0]
    checks["inverse"] = HypothesisCheck(not bad.size, float(s[bad[0]]) if bad.size else None)
    return HypothesisReport(checks)


# --------------------------------------------------------------------------
# limiting radial profile


@dataclass
class RadialProfile:
    kappa: float
    peak: float
    support_radius: float
    samples: np.ndarray  # columns r, U(r), f(U(r))
    slope_at_edge: float
    monotone_shooting: bool = True
    shots: list = field(default_factory=list, repr=False)

    @property
    def r(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def U(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def fU(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def flux_mass(self) -> float:
        """-2 pi rho U'(rho); equals kappa when the shot is converged."""
        return -2.0 * math.pi * self.support_radius * self.slope_at_edge

    def vorticity(self, r) -> np.ndarray:
        """f(U(r)), zero beyond the support."""
        r = np.asarray(r, dtype=float)
        return np.interp(r, self.r, self.fU, right=0.0)

    def stream(self, r) -> np.ndarray:
        """U(r) inside the support, continued by the exterior harmonic function outside."""
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.r, self.U)
        far = r > self.support_radius
        out[far] = -(self.kappa / (2 * math.pi)) * np.log(r[far] / self.support_radius)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("r,U,fU\n")
            for r, u, w in self.samples:
                fh.write(f"{r:.17g},{u:.17g},{w:.17g}\n")


def _shoot(prof: ProfileFunction, a: float, r_max: float, rtol: float, n_samples: int):
    """Integrate U'' + U'/r + f(U) = 0 from U(0) = a until U first vanishes."""
    fa = float(prof.f(np.asarray(a)))
    if fa <= 0:
        raise ProfileError(f"shooting height a={a} gives f(a) <= 0")
    r0 = 1e-5 * math.sqrt(a / fa)
    y0 = [a - fa * r0 * r0 / 4.0, -fa * r0 / 2.0]

    def rhs(r, y):
        return [y[1], -y[1] / r - float(prof.f(np.asarray(y[0])))]

    def hit(r, y):
        return y[0]

    hit.terminal = True
    hit.direction = -1
    sol = integrate.solve_ivp(rhs, (r0, r_max), y0, method="RK45", events=hit,
                              rtol=rtol, atol=rtol * a * 1e-2, dense_output=True)
    if not sol.t_events[0].size:
        raise ProfileError("profile does not compactify: no zero crossing within r <= %g" % r_max)
    rho = float(sol.t_events[0][0])
    slope = float(sol.y_events[0][0][1])
    return rho, slope, sol, r0


def limiting_profile(
    prof: ProfileFunction,
    kappa: float,
    tol: float = 1e-10,
    r_max: float = 1e6,
    n_samples: int = 4001,
    ode_rtol: float = 1e-12,
) -> RadialProfile:
    """Radial solution of -Lap U = f(U) with total mass kappa, by shooting on U(0)."""
    if not kappa > 0:
        raise ProfileError(f"kappa must be positive, got kappa={kappa}")

    shots: list[tuple[float, float]] = []

    def mass(a):
        rho, slope, _, _ = _shoot(prof, a, r_max, ode_rtol, n_samples)
        m = -2.0 * math.pi * rho * slope
        shots.append((a, m))
        return m

    lo = hi = 1.0
    m_hi = mass(hi)
    for _ in range(60):
        if m_hi >= kappa:
            break
        lo, hi = hi, 2.0 * hi
        m_hi = mass(hi)
    else:
        raise ProfileError("bracket expansion exhausted while looking for mass >= kappa")
    m_lo = mass(lo) if lo != hi else m_hi
    for _ in range(60):
        if m_lo <= kappa:
            break
        hi, lo = lo, 0.5 * lo
        m_lo = mass(lo)
    else:
        raise ProfileError("bracket expansion exhausted while looking for mass <= kappa")

    a = lo
    m = m_lo
    for _ in range(200):
        if abs(m - kappa) <= tol * kappa:
            break
        a = 0.5 * (lo + hi)
        m = mass(a)
        if m < kappa:
            lo = a
        else:
            hi = a
    if abs(m - kappa) > tol * kappa:
        raise ProfileError(f"shooting did not reach mass tolerance: |m - kappa| = {abs(m - kappa):.3e}")

    ordered = sorted(shots)
    monotone = all(m2 >= m1 for (_, m1), (_, m2) in zip(ordered, ordered[1:]))

    rho, slope, sol, r0 = _shoot(prof, a, r_max, ode_rtol, n_samples)
    r = np.linspace(0.0, rho, n_samples)
    U = np.empty_like(r)
    U[0] = a
    inner = r[1:] < r0
    U[1:][inner] = a - float(prof.f(np.asarray(a))) * r[1:][inner] ** 2 / 4.0
    U[1:][~inner] = sol.sol(r[1:][~inner])[0]
    U[-1] = 0.0
    samples = np.column_stack([r, U, np.asarray(prof.f(U), dtype=float)])
    return RadialProfile(kappa=kappa, peak=a, support_radius=rho, samples=samples,
                         slope_at_edge=slope, monotone_shooting=monotone, shots=shots)
