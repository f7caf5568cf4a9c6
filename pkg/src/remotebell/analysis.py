"""From coincidence counters to correlations, fringe fits and Bell parameters."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .detection import AnalyzerSetting, correlation_model
from .model import EffectiveTwoPhotonState
from .montecarlo import CoincidenceCounts

TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)


class NoDataError(ValueError):
    """Raised when a correlation is requested from zero coincidences."""


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationEstimate:
    e_value: float
    sigma: float
    setting: AnalyzerSetting
    n_coincidences: int


@dataclass(frozen=True)
class BellResult:
    s_value: float
    sigma: float
    theta_a: float
    theta_a_prime: float
    theta_b: float
    theta_b_prime: float
    estimates: tuple[CorrelationEstimate, CorrelationEstimate, CorrelationEstimate, CorrelationEstimate]

    @property
    def violates(self) -> bool:
        return abs(self.s_value) > 2.0


def estimate_E(
    counts: CoincidenceCounts, setting: AnalyzerSetting, *, error_model: str = "binomial"
) -> CorrelationEstimate:
    """Normalized coincidence asymmetry (C13 + C24 - C14 - C23) / total.

    ``binomial`` gives sqrt((1 - E^2) / N).  ``poisson`` propagates
    independent Poisson errors of the four counters through the ratio; for
    this estimator it reduces to the same number.
    """
    plus = counts.c13 + counts.c24
    minus = counts.c14 + counts.c23
    n = plus + minus
    if n == 0:
        raise NoDataError(f"no coincidences recorded at {setting}")
    e = (plus - minus) / n
    if error_model == "binomial":
        sigma = math.sqrt(max(0.0, 1.0 - e * e) / n)
    elif error_model == "poisson":
        # dE/dC = (1 - E)/N for the + counters, -(1 + E)/N for the - counters
        sigma = math.sqrt((1.0 - e) ** 2 * plus + (1.0 + e) ** 2 * minus) / n
    else:
        raise ValueError(f"unknown error model {error_model!r}")
    return CorrelationEstimate(e, sigma, setting, n)


def chsh_S(
    e1: CorrelationEstimate, e2: CorrelationEstimate, e3: CorrelationEstimate, e4: CorrelationEstimate
) -> BellResult:
    """S = E(a, b) + E(a', b) + E(a, b') - E(a', b'), with the inputs in that order."""
    a, b = e1.setting.theta_a, e1.setting.theta_b
    a2, b2 = e4.setting.theta_a, e4.setting.theta_b
    expected = (
        AnalyzerSetting(a, b),
        AnalyzerSetting(a2, b),
        AnalyzerSetting(a, b2),
        AnalyzerSetting(a2, b2),
    )
    for k, (est, want) in enumerate(zip((e1, e2, e3, e4), expected), start=1):
        if not est.setting.same_as(want):
            raise ValueError(f"estimate {k} has setting {est.setting}, expected {want}")
    if math.isclose(a, a2, abs_tol=1e-9) or math.isclose(b, b2, abs_tol=1e-9):
        raise ValueError("the two settings at each site must differ")
    s = e1.e_value + e2.e_value + e3.e_value - e4.e_value
    sigma = math.sqrt(e1.sigma**2 + e2.sigma**2 + e3.sigma**2 + e4.sigma**2)
    return BellResult(s, sigma, a, a2, b, b2, (e1, e2, e3, e4))


def chsh_settings(theta_a: float, theta_a_prime: float, theta_b: float, theta_b_prime: float):
    """The four settings in the order :func:`chsh_S` expects."""
    return (
        AnalyzerSetting(theta_a, theta_b),
        AnalyzerSetting(theta_a_prime, theta_b),
        AnalyzerSetting(theta_a, theta_b_prime),
        AnalyzerSetting(theta_a_prime, theta_b_prime),
    )


def chsh_from_values(e_values, theta_a, theta_a_prime, theta_b, theta_b_prime, sigmas=(0.0,) * 4):
    settings = chsh_settings(theta_a, theta_a_prime, theta_b, theta_b_prime)
    ests = [CorrelationEstimate(float(e), float(s), st, 0) for e, s, st in zip(e_values, sigmas, settings)]
    return chsh_S(*ests)


# --------------------------------------------------------------------------
# fringe fits


@dataclass(frozen=True)
class FringeFit:
    """count(theta) = offset * (1 + visibility * cos(2 (theta - phase)))."""

    offset: float
    amplitude: float
    phase: float
    visibility: float
    offset_err: float
    amplitude_err: float
    phase_err: float
    visibility_err: float
    chi2: float
    dof: int
    period: float = 180.0

    def __call__(self, theta):
        t = np.radians(np.asarray(theta, dtype=float) - self.phase)
        return self.offset + self.amplitude * np.cos(2.0 * t)


def _weights(sigmas: np.ndarray) -> tuple[np.ndarray, bool]:
    if np.all(sigmas > 0):
        return 1.0 / sigmas, True
    return np.ones_like(sigmas), False


def fit_fringe(samples) -> FringeFit:
    """Weighted linear least squares on a + b cos 2theta + c sin 2theta.

    ``samples`` holds (theta_deg, count, sigma_count) triples.  If any sigma
    is zero or missing the fit is unweighted and the errors are scaled by the
    residual variance.
    """
    rows = [(float(t), float(y), float(s or 0.0)) for t, y, s in samples]
    if len(rows) < 4:
        raise FitError("a fringe fit needs at least 4 samples")
    theta, y, sig = (np.array(col) for col in zip(*rows))
    if np.ptp(theta) < 90.0 - 1e-9:
        raise FitError("samples must span at least 90 degrees")
    t2 = 2.0 * np.radians(theta)
    X = np.column_stack([np.ones_like(t2), np.cos(t2), np.sin(t2)])
    w, weighted = _weights(sig)
    Xw, yw = X * w[:, None], y * w
    if np.linalg.matrix_rank(Xw) < 3:
        raise FitError("degenerate angle set")
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ coef
    chi2 = float(resid @ resid)
    dof = len(y) - 3
    cov = np.linalg.inv(Xw.T @ Xw)
    if not weighted:
        cov *= chi2 / dof if dof > 0 else 0.0

    a, b, c = coef
    amp = math.hypot(b, c)
    phase = 0.5 * math.degrees(math.atan2(c, b))
    if a <= 0:
        raise FitError("fitted offset is not positive")
    vis = amp / a
    # Jacobians of (amp, phase_deg, vis) with respect to (a, b, c)
    if amp > 0:
        j_amp = np.array([0.0, b / amp, c / amp])
        j_phase = np.degrees(0.5 * np.array([0.0, -c, b]) / amp**2)
    else:
        j_amp = np.array([0.0, 1.0, 0.0])
        j_phase = np.zeros(3)
    j_vis = j_amp / a - np.array([amp / a**2, 0.0, 0.0])

    def err(j):
        return math.sqrt(max(0.0, float(j @ cov @ j)))

    return FringeFit(
        offset=float(a),
        amplitude=amp,
        phase=phase,
        visibility=vis,
        offset_err=math.sqrt(max(0.0, cov[0, 0])),
        amplitude_err=err(j_amp),
        phase_err=err(j_phase),
        visibility_err=err(j_vis),
        chi2=chi2,
        dof=dof,
    )


@dataclass(frozen=True)
class CorrelationFit:
    """Fit of E(theta_a) to the closed-form correlation with a phase offset.

    ``amplitude_sum`` and ``amplitude_difference`` multiply the
    cos 2(theta_a + theta_b) and cos 2(theta_a - theta_b) terms; ``product``
    is their normalized difference, sin(2 eta_f) cos(phi_f).
    """

    amplitude_sum: float
    amplitude_difference: float
    phase: float
    visibility: float
    product: float
    visibility_err: float
    product_err: float
    phase_err: float
    chi2: float
    dof: int
    visibility_fixed: bool


def _corr_residuals(params, ta, tb, e, w, fixed_v):
    if fixed_v is None:
        v, k, delta = params
    else:
        (k, delta), v = params, fixed_v
    return (_corr_form(v, k, delta, ta, tb) - e) * w


def _corr_form(v, k, delta, ta, tb):
    u = np.radians(ta - delta)
    b = np.radians(tb)
    return -v * (np.cos(2 * b) * np.cos(2 * u) - k * np.sin(2 * b) * np.sin(2 * u))


def fit_correlation(samples, theta_b: float | None = None, *, visibility: float | None = None) -> CorrelationFit:
    """Least-squares fit of correlation estimates versus theta_a.

    ``samples`` is a sequence of (theta_a, CorrelationEstimate).  The Site-B
    angle comes from each estimate; ``theta_b`` optionally asserts it.  At a
    single theta_b only two sinusoid coefficients are measurable, so the
    visibility is held at ``visibility`` (default 1); with several theta_b
    values it is fitted unless given.
    """
    samples = list(samples)
    if len(samples) < 4:
        raise FitError("a correlation fit needs at least 4 settings")
    ta = np.array([float(t) for t, _ in samples])
    tb = np.array([est.setting.theta_b for _, est in samples])
    e = np.array([est.e_value for _, est in samples])
    sig = np.array([est.sigma for _, est in samples])
    if theta_b is not None and not np.allclose(tb, theta_b, atol=1e-9):
        raise FitError("estimates were not all taken at the requested theta_b")

    distinct_b = np.unique(np.round(np.mod(tb, 180.0), 9))
    if len(np.unique(np.round(np.mod(ta, 180.0), 9))) < 3:
        raise FitError("insufficient angular coverage in theta_a")
    single_b = len(distinct_b) == 1
    if single_b and abs(math.sin(2 * math.radians(distinct_b[0]))) < 1e-9:
        raise FitError("at theta_b = 0 or 90 degrees the entanglement term is unobservable")
    fixed_v = visibility if visibility is not None else (1.0 if single_b else None)
    w, weighted = _weights(sig)

    best = None
    for k0 in (0.9, -0.9):
        x0 = [k0, 0.0] if fixed_v is not None else [1.0, k0, 0.0]
        res = least_squares(
            _corr_residuals, x0, args=(ta, tb, e, w, fixed_v), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15
        )
        cost = float(res.fun @ res.fun)
        if fixed_v is None:
            v, k, delta = res.x
        else:
            (k, delta), v = res.x, fixed_v
        if v < 0:
            # only reachable with a free visibility: E is odd under a 90 degree shift
            v, delta = -v, delta + 90.0
        delta = (delta + 90.0) % 180.0 - 90.0
        key = (round(cost, 12), abs(delta))
        if best is None or key < best[0]:
            best = (key, v, k, delta, res)
    _, v, k, delta, res = best

    dof = len(e) - len(res.x)
    chi2 = float(res.fun @ res.fun)
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.full((len(res.x), len(res.x)), np.nan)
    if not weighted:
        cov = cov * (chi2 / dof if dof > 0 else 0.0)
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if fixed_v is None:
        v_err, k_err, d_err = errs
    else:
        v_err, (k_err, d_err) = 0.0, errs

    return CorrelationFit(
        amplitude_sum=v * (1.0 + k) / 2.0,
        amplitude_difference=v * (1.0 - k) / 2.0,
        phase=delta,
        visibility=v,
        product=k,
        visibility_err=float(v_err),
        product_err=float(k_err),
        phase_err=float(d_err),
        chi2=chi2,
        dof=dof,
        visibility_fixed=fixed_v is not None,
    )


# --------------------------------------------------------------------------
# CHSH angle optimization


@dataclass(frozen=True)
class OptimalAngles:
    theta_a: float
    theta_a_prime: float
    theta_b: float
    theta_b_prime: float
    s_value: float


def model_S(state: EffectiveTwoPhotonState, angles, visibility: float = 1.0) -> float:
    a, a2, b, b2 = angles
    E = lambda x, y: correlation_model(state.eta_f, state.phi_f, x, y, visibility)  # noqa: E731
    return float(E(a, b) + E(a2, b) + E(a, b2) - E(a2, b2))


def _grid_optimum(table: np.ndarray) -> tuple[float, tuple[int, int, int, int]]:
    """Exhaustive max of S over the integer-degree grid, smallest quadruple on ties."""
    plus = table[:, :, None] + table[:, None, :]  # [a, b, b']
    minus = table[:, :, None] - table[:, None, :]
    best_plus = plus.max(axis=0)
    best_minus = minus.max(axis=0)
    s_grid = best_plus + best_minus
    top = s_grid.max()
    candidates = []
    for b, b2 in zip(*np.nonzero(s_grid >= top - 1e-12)):
        a = int(np.argmax(plus[:, b, b2] >= best_plus[b, b2] - 1e-12))
        a2 = int(np.argmax(minus[:, b, b2] >= best_minus[b, b2] - 1e-12))
        candidates.append((a, a2, int(b), int(b2)))
    return float(top), min(candidates)


def find_optimal_angles(
    state: EffectiveTwoPhotonState, visibility: float = 1.0, *, tol: float = 1e-10
) -> OptimalAngles:
    """Maximize |S| over the four analyzer angles.

    A 1-degree grid over all four angles (done exactly by maximizing over
    the Site-A angles per Site-B pair) is followed by a compass search that
    halves its step until it drops below ``tol`` degrees.
    """
    grid = np.arange(180.0)
    table = correlation_model(state.eta_f, state.phi_f, grid[:, None], grid[None, :], visibility)
    s_pos, q_pos = _grid_optimum(table)
    s_neg, q_neg = _grid_optimum(-table)
    sign, quad = (1.0, q_pos) if (s_pos, [-x for x in q_neg]) >= (s_neg, [-x for x in q_pos]) else (-1.0, q_neg)

    x = np.array(quad, dtype=float)

    def f(v):
        return sign * model_S(state, v, visibility)

    fx = f(x)
    step = 0.5
    while step > tol:
        improved = False
        for i, d in itertools.product(range(4), (step, -step)):
            trial = x.copy()
            trial[i] += d
            ft = f(trial)
            if ft > fx:
                x, fx, improved = trial, ft, True
        if not improved:
            step *= 0.5
    x = np.mod(x, 180.0)
    return OptimalAngles(*map(float, x), s_value=model_S(state, x, visibility))


# --------------------------------------------------------------------------
# background calibration


def expected_correlation(state, setting, bank, *, symmetrize: bool = True) -> float:
    """E computed from the exact expected counters instead of samples."""
    from .montecarlo import expected_counts

    c = expected_counts(state, setting, bank, 1, symmetrize=symmetrize)
    total = sum(c.values())
    if total <= 0:
        raise NoDataError(f"no coincidences expected at {setting}")
    return (c[(1, 3)] + c[(2, 4)] - c[(1, 4)] - c[(2, 3)]) / total


def expected_S(state, bank, angles, *, symmetrize: bool = True) -> float:
    settings = chsh_settings(*angles)
    e = [expected_correlation(state, st, bank, symmetrize=symmetrize) for st in settings]
    return e[0] + e[1] + e[2] - e[3]


def calibrate_dark_probability(state, bank, target_visibility: float, angles=(78.5, 33.5, 45.0, 0.0)):
    """Bank whose common per-detector dark probability reduces S by ``target_visibility``.

    The accidental floor is solved for at the given CHSH angles with
    four-run symmetrization, where it scales every correlation by the same
    factor.
    """
    from dataclasses import replace

    from scipy.optimize import brentq

    if not 0.0 < target_visibility <= 1.0:
        raise ValueError("target visibility must lie in (0, 1]")
    ideal = model_S(state, angles)
    if ideal == 0:
        raise ValueError("the model S vanishes at these angles; nothing to calibrate against")

    def gap(d):
        trial = replace(bank, p_dark=(d, d, d, d))
        return expected_S(state, trial, angles) / ideal - target_visibility

    if target_visibility == 1.0:
        d = 0.0
    else:
        d = brentq(gap, 0.0, 0.5, xtol=1e-16, rtol=1e-12)
    return replace(bank, p_dark=(d, d, d, d))
