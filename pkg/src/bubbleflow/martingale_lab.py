"""Scale-function tests for the true-martingale property of stochastic
exponentials driven by one-dimensional diffusions.

Given dY = mu(Y) ds + sigma(Y) dB on J = (l, r) and an integrand f, the
Doleans exponential of int f(Y) dB is a true martingale iff, at each
endpoint, either the tilted diffusion cannot exit there or the endpoint is
"good" (an integrability condition on the scale functions).  The numeric
machinery evaluates improper integrals on geometric ladders toward the
endpoints with explicit divergence detection: a borderline integral yields
an *inconclusive* flag, never a silent verdict.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as spi
from scipy import special as sps


class NumericsError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# special functions

_EULER_GAMMA = 0.5772156649015329


def exp_integral_ei(z: float, tol: float = 1e-12) -> float:
    """Exponential integral Ei(z) = -PV int_{-z}^inf e^-u / u du.

    Power series around 0, asymptotic series for large positive z, and a
    continued fraction for large negative z; 1e-12 relative target.
    """
    if z == 0.0:
        raise NumericsError("Ei undefined at 0")
    az = abs(z)
    if z > 40.0:
        # asymptotic: e^z/z * sum k!/z^k, truncated at the smallest term
        s, term = 1.0, 1.0
        for k in range(1, 80):
            nxt = term * k / z
            if abs(nxt) > abs(term):
                break
            term = nxt
            s += term
            if abs(term) < tol * abs(s):
                break
        return math.exp(z) / z * s
    if z < -8.0:
        # Ei(z) = -E1(-z); E1 via modified Lentz continued fraction
        x = -z
        tiny = 1e-300
        b = x + 1.0
        c = 1.0 / tiny
        d = 1.0 / b
        h = d
        for k in range(1, 400):
            an = -k * k + 0.0  # a_k = -k^2 paired with b_k = x + 2k + 1
            b += 2.0
            d = an * d + b
            if abs(d) < tiny:
                d = tiny
            c = b + an / c
            if abs(c) < tiny:
                c = tiny
            d = 1.0 / d
            delta = d * c
            h *= delta
            if abs(delta - 1.0) < tol:
                break
        else:
            raise NumericsError("Ei continued fraction did not converge")
        return -math.exp(-x) * h
    # series: gamma + ln|z| + sum z^k/(k k!)
    s = 0.0
    term = 1.0
    for k in range(1, 500):
        term *= z / k
        s += term / k
        if abs(term / k) < tol * max(1.0, abs(s)):
            break
    else:
        raise NumericsError("Ei series did not converge")
    return _EULER_GAMMA + math.log(az) + s


def _exp_lower_series(a: float, w: float, tol: float = 1e-14) -> float:
    """int_0^w e^u u^{a-1} du for a > 0, w >= 0 (term-wise integration)."""
    if w == 0.0:
        return 0.0
    s = 0.0
    term = w ** a / a          # k = 0
    s += term
    fact = 1.0
    for k in range(1, 700):
        fact *= k
        term = w ** (a + k) / (fact * (a + k))
        s += term
        if term < tol * s:
            break
    else:
        raise NumericsError("incomplete gamma series did not converge")
    return s


def incomplete_gamma_ext(a: float, z: float) -> float:
    """Upper incomplete gamma extended to negative arguments.

    For z >= 0 this is the classical int_z^inf e^-t t^{a-1} dt; for z < 0
    the integrand is read with |t|^{a-1}, giving Gamma(a) + int_0^{-z}
    e^u u^{a-1} du.  Requires a > 0.
    """
    if a <= 0:
        raise NumericsError("incomplete_gamma_ext requires a > 0")
    if z >= 0.0:
        return float(sps.gammaincc(a, z) * sps.gamma(a))
    return float(sps.gamma(a)) + _exp_lower_series(a, -z)


def _exp_moment_indef(gamma: float, u: float) -> float:
    """Antiderivative of e^v v^{gamma-1} at u > 0, fixed integration constant.

    Valid for any real gamma; negative-integer gamma picks up a log term.
    Differences of this function give real-form incomplete-gamma integrals
    over intervals of positive arguments.
    """
    if u <= 0.0:
        raise NumericsError("antiderivative needs u > 0")
    m = -int(round(gamma)) if abs(gamma - round(gamma)) < 1e-13 \
        and gamma <= -0.5 else None
    s = 0.0
    fact = 1.0
    for k in range(0, 700):
        if k > 0:
            fact *= k
        if m is not None and k == m:
            s += math.log(u) / fact
            continue
        term = u ** (gamma + k) / (fact * (gamma + k))
        s += term
        if k > 5 and abs(term) < 1e-16 * max(1.0, abs(s)):
            break
    return s


# ---------------------------------------------------------------------------
# diffusion specifications

@dataclass
class DiffusionSpec:
    """One-dimensional diffusion on J = (l, r) with exponential integrand f."""

    mu: Callable
    sigma: Callable
    f: Callable
    l: float
    r: float
    c: float
    name: str = "custom"

    def __post_init__(self):
        if not (self.l < self.c < self.r):
            raise NumericsError("reference point must lie inside (l, r)")

    def drift_exponent(self, x):        # 2 mu / sigma^2
        sig = self.sigma(x)
        return 2.0 * self.mu(x) / (sig * sig)

    def tilt_exponent(self, x):         # 2 f / sigma
        return 2.0 * self.f(x) / self.sigma(x)


@dataclass
class FellerReport:
    s_r: float
    s_l: float
    st_r: float
    st_l: float
    exit_r: bool | None
    exit_l: bool | None
    good_r: bool | None
    good_l: bool | None
    verdict: str                      # martingale | strict-local | inconclusive
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        enc = lambda v: ("inf" if v == math.inf else
                         "-inf" if v == -math.inf else v)
        return {
            "s_r": enc(self.s_r), "s_l": enc(self.s_l),
            "st_r": enc(self.st_r), "st_l": enc(self.st_l),
            "exit_r": self.exit_r, "exit_l": self.exit_l,
            "good_r": self.good_r, "good_l": self.good_l,
            "verdict": self.verdict, "notes": self.notes,
        }


# ---------------------------------------------------------------------------
# pointwise quadrature (used for value queries and closed-form cross-checks)

def _quad(fn, a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, err = spi.quad(fn, a, b, limit=300, epsabs=1e-13, epsrel=1e-11)
    if not math.isfinite(val):
        raise NumericsError("quadrature returned a non-finite value")
    return val


def scale_density(spec: DiffusionSpec, x: float) -> float:
    """rho(x) = exp(-int_c^x 2 mu / sigma^2)."""
    return math.exp(-_quad(spec.drift_exponent, spec.c, x))


def tilted_density(spec: DiffusionSpec, x: float) -> float:
    """rho~(x) = rho(x) * exp(-int_c^x 2 f / sigma)."""
    expo = _quad(spec.drift_exponent, spec.c, x) \
        + _quad(spec.tilt_exponent, spec.c, x)
    return math.exp(-expo)


def scale_function(spec: DiffusionSpec, x: float, tilted: bool = False
                   ) -> float:
    """s(x) or s~(x): antiderivative of the (tilted) scale density.

    Finite x only; endpoint limits go through the ladder machinery
    (endpoint_limits)."""
    dens = tilted_density if tilted else scale_density
    if math.isinf(x):
        st, val = endpoint_limits(spec, "r" if x > 0 else "l", tilted)
        if st == "finite":
            return val
        return math.copysign(math.inf, x)
    return _quad(lambda y: dens(spec, y), spec.c, x)


# ---------------------------------------------------------------------------
# ladder machinery

_LADDER_SEGMENTS = 110
_SUBPANELS = 16          # grid points per segment = 2*_SUBPANELS + 1
_DIVERGENCE_CAP = 1e12
_CONTRACT_TOL = 1e-14


def _mirror(spec: DiffusionSpec) -> DiffusionSpec:
    """Reflect the diffusion around its reference point.

    The left endpoint of the original becomes the right endpoint of the
    mirror with identical scale densities (rho_m(y) = rho(2c - y)), so the
    right-endpoint ladder machinery serves both sides.
    """
    c = spec.c

    def mmu(y):
        return -np.asarray(spec.mu(2.0 * c - np.asarray(y, dtype=float)))

    def msigma(y):
        return np.asarray(spec.sigma(2.0 * c - np.asarray(y, dtype=float)))

    def mf(y):
        return -np.asarray(spec.f(2.0 * c - np.asarray(y, dtype=float)))

    return DiffusionSpec(mu=mmu, sigma=msigma, f=mf,
                         l=2.0 * c - spec.r, r=2.0 * c - spec.l, c=c,
                         name=spec.name + "|mirrored")


def _segment_edges(spec: DiffusionSpec) -> np.ndarray:
    """Geometric ladder of segment edges from the reference point toward the
    right endpoint; an infinite endpoint doubles the scale each segment,
    a finite one halves the remaining gap (down to float resolution)."""
    c = spec.c
    if math.isinf(spec.r):
        return c + np.concatenate([[0.0], 2.0 ** np.arange(
            0, _LADDER_SEGMENTS, dtype=float)])
    gap = spec.r - c
    # stop once a segment would fall below float resolution at the endpoint
    scale = max(1.0, abs(spec.r), abs(c))
    depth = int(min(_LADDER_SEGMENTS,
                    math.floor(math.log2(gap / (2e3 * np.finfo(float).eps
                                                * scale)))))
    edges = spec.r - gap * 2.0 ** -np.arange(0, max(depth, 4) + 1,
                                             dtype=float)
    keep = np.concatenate([[True], np.diff(edges) > 0])
    return edges[keep]


def _segment_grid(lo: float, hi: float, infinite: bool) -> np.ndarray:
    """Grid inside one segment; far segments of an infinite side are placed
    uniformly in u = 1/x, mapping the improper direction to a finite
    interval (for octave segments this matches a log-uniform layout)."""
    npts = 2 * _SUBPANELS + 1
    if infinite and lo * hi > 0 and abs(hi) > 1e3:
        u = np.linspace(1.0 / lo, 1.0 / hi, npts)
        return 1.0 / u
    return np.linspace(lo, hi, npts)


@dataclass
class _EndpointProfile:
    """Everything the endpoint conditions need, on one shared ladder grid
    running from the reference point toward the right endpoint."""

    x: np.ndarray
    seg_slices: list
    log_rho: np.ndarray
    log_rho_t: np.ndarray
    s_inc: np.ndarray          # per-segment integral of rho
    st_inc: np.ndarray         # per-segment integral of rho~
    log_f2s2: np.ndarray       # log(f^2 / sigma^2) on grid
    log_sig2: np.ndarray


def _cumulative(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return spi.cumulative_simpson(y, x=x, initial=0.0)


def _profile(spec: DiffusionSpec) -> _EndpointProfile:
    edges = _segment_edges(spec)
    infinite = math.isinf(spec.r)
    grids, slices = [], []
    pos = 0
    for j in range(len(edges) - 1):
        g = _segment_grid(edges[j], edges[j + 1], infinite)
        grids.append(g if j == 0 else g[1:])
        n = len(grids[-1])
        slices.append(slice(max(pos - 1, 0), pos + n))
        pos += n
    x = np.concatenate(grids)

    with np.errstate(all="ignore"):
        mu = np.asarray(spec.mu(x), dtype=float)
        sig = np.asarray(spec.sigma(x), dtype=float)
        fv = np.asarray(spec.f(x), dtype=float)
        sig2 = sig * sig
        I = _cumulative(2.0 * mu / sig2, x)
        Ft = _cumulative(2.0 * fv / sig, x)
        log_rho = -I
        log_rho_t = -(I + Ft)
        rho = np.exp(np.minimum(log_rho, 745.0))
        rho[log_rho > 745.0] = np.inf
        rho_t = np.exp(np.minimum(log_rho_t, 745.0))
        rho_t[log_rho_t > 745.0] = np.inf
        s_cum = _cumulative(rho, x)
        st_cum = _cumulative(rho_t, x)
        log_f2s2 = np.log(fv * fv) - np.log(sig2)
        log_sig2 = np.log(sig2)
    s_inc = np.array([s_cum[sl.stop - 1] - s_cum[sl.start] for sl in slices])
    st_inc = np.array([st_cum[sl.stop - 1] - st_cum[sl.start]
                       for sl in slices])
    return _EndpointProfile(x=x, seg_slices=slices, log_rho=log_rho,
                            log_rho_t=log_rho_t, s_inc=s_inc, st_inc=st_inc,
                            log_f2s2=log_f2s2, log_sig2=log_sig2)


def _ladder_verdict(incs: np.ndarray) -> tuple[str, float]:
    """Classify an improper integral from its per-segment increments.

    Declared infinite when increments are non-decreasing and partial sums
    pass the divergence cap (or an increment overflows); finite when the
    increments contract below tolerance; inconclusive otherwise (including
    on any NaN increment).
    """
    total = 0.0
    prev = None
    for inc in incs:
        if math.isnan(inc):
            return "inconclusive", math.nan
        if math.isinf(inc):
            return "infinite", math.inf
        total += inc
        if total > _DIVERGENCE_CAP and (prev is None
                                        or inc >= prev * (1 - 1e-9)):
            return "infinite", math.inf
        if inc < _CONTRACT_TOL * max(1.0, abs(total)):
            return "finite", total
        prev = inc
    if total > _DIVERGENCE_CAP:
        return "infinite", math.inf
    return "inconclusive", total


def _log_tail(prof: _EndpointProfile, tilted: bool) -> np.ndarray:
    """log of the remaining scale mass from each grid point to the grid end,
    accumulated in log space (trapezoid panels), so deep-underflow regions
    retain their relative structure."""
    lr = prof.log_rho_t if tilted else prof.log_rho
    x = prof.x
    dx = np.diff(x)
    with np.errstate(all="ignore"):
        log_panel = np.logaddexp(lr[:-1], lr[1:]) + np.log(dx / 2.0)
        rev = np.logaddexp.accumulate(log_panel[::-1])[::-1]
    out = np.empty(len(x))
    out[:-1] = rev
    out[-1] = -math.inf
    return out


def _membership_log(prof: _EndpointProfile, log_g: np.ndarray) -> str:
    """L1-membership near the endpoint of exp(log_g), by the ladder rules;
    per-segment increments are computed with a factored-out maximum so only
    genuine divergence overflows."""
    incs = []
    x = prof.x
    for sl in prof.seg_slices:
        seg = log_g[sl]
        if np.isnan(seg).any():
            incs.append(math.nan)
            continue
        m = seg.max()
        if m == math.inf:
            incs.append(math.inf)
            continue
        if m == -math.inf:
            incs.append(0.0)
            continue
        val = np.trapezoid(np.exp(seg - m), x[sl])
        incs.append(math.exp(min(m + math.log(max(val, 5e-324)), 709.0))
                    if val > 0 else 0.0)
        if m + math.log(max(val, 5e-324)) > 709.0:
            incs[-1] = math.inf
    status, _ = _ladder_verdict(np.array(incs))
    return status


def _right_limits(spec: DiffusionSpec, tilted: bool) -> tuple[str, float]:
    prof = _profile(spec)
    incs = prof.st_inc if tilted else prof.s_inc
    status, tail = _ladder_verdict(incs)
    if status == "finite":
        return status, tail
    if status == "infinite":
        return status, math.inf
    return status, math.nan


def endpoint_limits(spec: DiffusionSpec, which: str, tilted: bool
                    ) -> tuple[str, float]:
    """status, value of s(endpoint) or s~(endpoint), with the convention
    s(l) <= 0 <= s(r) relative to the reference point."""
    if which == "l":
        status, val = _right_limits(_mirror(spec), tilted)
        return status, -val
    return _right_limits(spec, tilted)


def _exit_right(spec: DiffusionSpec) -> bool | None:
    st_status, _ = _right_limits(spec, tilted=True)
    if st_status == "infinite":
        return False
    if st_status == "inconclusive":
        return None
    prof = _profile(spec)
    log_g = _log_tail(prof, tilted=True) - prof.log_rho_t - prof.log_sig2
    member = _membership_log(prof, log_g)
    if member == "inconclusive":
        return None
    return member == "finite"


def endpoint_exit(spec: DiffusionSpec, which: str) -> bool | None:
    """Can the tilted diffusion exit at the endpoint?  Tri-state bool."""
    return _exit_right(_mirror(spec) if which == "l" else spec)


def _good_one(spec: DiffusionSpec, tilted: bool) -> bool | None:
    status, _ = _right_limits(spec, tilted=tilted)
    if status == "infinite":
        return False
    if status == "inconclusive":
        return None
    prof = _profile(spec)
    dens = prof.log_rho_t if tilted else prof.log_rho
    log_g = _log_tail(prof, tilted) + prof.log_f2s2 - dens
    member = _membership_log(prof, log_g)
    if member == "inconclusive":
        return None
    return member == "finite"


def endpoint_good(spec: DiffusionSpec, which: str) -> bool | None:
    """Goodness of the endpoint, cross-validated on both equivalent forms.

    Evaluates the untilted-scale form and the tilted-scale form; the two are
    equivalent analytically, so a numeric mismatch downgrades the answer to
    inconclusive instead of guessing.
    """
    side = _mirror(spec) if which == "l" else spec
    plain = _good_one(side, tilted=False)
    tilt = _good_one(side, tilted=True)
    if plain is None or tilt is None or plain != tilt:
        return None
    return plain


def classify_martingale(spec: DiffusionSpec, horizon: float | None = None
                        ) -> FellerReport:
    """Decide the true-martingale property of E(int f(Y) dB) on [0, T].

    The criterion is horizon-free (holds for every finite T): at each
    endpoint, no-exit or goodness.  Inconclusive numerics yield an
    inconclusive verdict, never a guess.
    """
    del horizon
    notes = []
    _, s_r = endpoint_limits(spec, "r", tilted=False)
    _, s_l = endpoint_limits(spec, "l", tilted=False)
    _, st_r = endpoint_limits(spec, "r", tilted=True)
    _, st_l = endpoint_limits(spec, "l", tilted=True)
    exit_r = endpoint_exit(spec, "r")
    exit_l = endpoint_exit(spec, "l")
    good_r = endpoint_good(spec, "r") if exit_r is not False else None
    good_l = endpoint_good(spec, "l") if exit_l is not False else None

    def side_ok(exit_flag, good_flag):
        # requirement per side: no exit, or a good endpoint
        if exit_flag is False or good_flag is True:
            return True
        if exit_flag is True and good_flag is False:
            return False
        return None

    ok_r = side_ok(exit_r, good_r)
    ok_l = side_ok(exit_l, good_l)
    if ok_r is True and ok_l is True:
        verdict = "martingale"
    elif ok_r is False or ok_l is False:
        verdict = "strict-local"
    else:
        verdict = "inconclusive"
        notes.append("an endpoint integral could not be classified")
    return FellerReport(s_r=s_r, s_l=s_l, st_r=st_r, st_l=st_l,
                        exit_r=exit_r, exit_l=exit_l,
                        good_r=good_r, good_l=good_l,
                        verdict=verdict, notes=notes)


# ---------------------------------------------------------------------------
# geometric Brownian motion closed forms and families

def gbm_gamma0(mu0: float, sigma0: float) -> float:
    return 2.0 * mu0 / (sigma0 * sigma0) - 1.0


def gbm_inverse_family(mu0: float, sigma0: float) -> DiffusionSpec:
    """GBM driver with integrand 1/x; the degenerate exponent case is
    mapped to log coordinates (Brownian driver, exponential integrand)."""
    if sigma0 <= 0:
        raise NumericsError("sigma0 must be positive")
    g0 = gbm_gamma0(mu0, sigma0)
    if abs(g0) < 1e-12:
        return DiffusionSpec(
            mu=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            sigma=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            f=lambda x: np.exp(-sigma0 * np.asarray(x, dtype=float)),
            l=-math.inf, r=math.inf, c=0.0,
            name=f"gbm-inverse(mu0={mu0}, sigma0={sigma0}, log-coords)")
    return DiffusionSpec(
        mu=lambda x: mu0 * np.asarray(x, dtype=float),
        sigma=lambda x: sigma0 * np.asarray(x, dtype=float),
        f=lambda x: 1.0 / np.asarray(x, dtype=float),
        l=0.0, r=math.inf, c=1.0,
        name=f"gbm-inverse(mu0={mu0}, sigma0={sigma0})")


def gbm_linear_family(mu0: float, sigma0: float) -> DiffusionSpec:
    """GBM driver with integrand f(x) = x (a strict-local benchmark)."""
    if sigma0 <= 0:
        raise NumericsError("sigma0 must be positive")
    return DiffusionSpec(
        mu=lambda x: mu0 * np.asarray(x, dtype=float),
        sigma=lambda x: sigma0 * np.asarray(x, dtype=float),
        f=lambda x: np.asarray(x, dtype=float),
        l=0.0, r=math.inf, c=1.0,
        name=f"gbm-linear(mu0={mu0}, sigma0={sigma0})")


def gbm_closed_forms(mu0: float, sigma0: float, x: float) -> dict:
    """Closed-form rho, rho~, s, s~ for the inverse-integrand GBM family.

    The tilted scale uses the real-form extended incomplete gamma; the
    degenerate exponent (gamma0 = 0) switches to the exponential-integral
    expression in log coordinates (x is then the log-coordinate point).
    """
    if sigma0 <= 0:
        raise NumericsError("sigma0 must be positive")
    g0 = gbm_gamma0(mu0, sigma0)
    if abs(g0) < 1e-12:
        rho = 1.0
        rho_t = math.exp(2.0 * (math.exp(-sigma0 * x) - 1.0) / sigma0)
        s = x
        st = (1.0 / sigma0) * math.exp(-2.0 / sigma0) * (
            exp_integral_ei(2.0 / sigma0)
            - exp_integral_ei(2.0 * math.exp(-sigma0 * x) / sigma0))
        return {"rho": rho, "rho_tilde": rho_t, "s": s, "s_tilde": st,
                "gamma0": g0}
    if x <= 0:
        raise NumericsError("x must be positive")
    p = 2.0 * mu0 / (sigma0 * sigma0)
    rho = x ** (-p)
    rho_t = x ** (-p) * math.exp(2.0 * (1.0 / x - 1.0) / sigma0)
    s = (1.0 - x ** (-g0)) / g0
    w_hi = 2.0 / sigma0
    w_lo = 2.0 / (x * sigma0)
    st = math.exp(-w_hi) * w_hi ** (-g0) \
        * (_exp_moment_indef(g0, w_hi) - _exp_moment_indef(g0, w_lo))
    return {"rho": rho, "rho_tilde": rho_t, "s": s, "s_tilde": st,
            "gamma0": g0}


# ---------------------------------------------------------------------------
# Monte Carlo oracle

def mc_expected_exponential(spec: DiffusionSpec, T: float, n_paths: int,
                            dt: float = 1e-3, seed: int = 0,
                            y0: float | None = None) -> tuple[float, float]:
    """Sample mean and standard error of E(int_0^T f(Y) dB) by Euler
    simulation; used as an independent check of the analytic verdict."""
    rng = np.random.default_rng(seed)
    if y0 is None:
        y0 = spec.c
    n = int(round(T / dt))
    y = np.full(n_paths, float(y0))
    logz = np.zeros(n_paths)
    sq = math.sqrt(dt)
    lo = spec.l + 1e-12 if math.isfinite(spec.l) else -math.inf
    hi = spec.r - 1e-12 if math.isfinite(spec.r) else math.inf
    for _ in range(n):
        dB = rng.standard_normal(n_paths) * sq
        fv = spec.f(y)
        logz += fv * dB - 0.5 * fv * fv * dt
        y = y + spec.mu(y) * dt + spec.sigma(y) * dB
        np.clip(y, lo, hi, out=y)
    z = np.exp(logz)
    return float(z.mean()), float(z.std(ddof=1) / math.sqrt(n_paths))
