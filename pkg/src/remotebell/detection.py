"""Polarization analysis and photodetection of the two idler fields.

Angles are polarization-rotation angles in degrees.  At each site the
transmitted PBS port (D1 at A, D3 at B) projects onto H rotated by theta,
the reflected port (D2, D4) onto V rotated by theta.  The quarter-wave plate
in front of each analyzer is folded into the helicity -> H/V map, so the
measurement acts on H/V amplitudes only.

Detector patterns are indexed by the bit mask ``b1 + 2*b2 + 4*b3 + 8*b4``
where ``bk`` is 1 when detector Dk clicked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import EffectiveTwoPhotonState

SITE_A_DETECTORS = (1, 2)
SITE_B_DETECTORS = (3, 4)
N_PATTERNS = 16

# bit k-1 of the pattern index is detector Dk
_BITS = (np.arange(N_PATTERNS)[:, None] >> np.arange(4)[None, :]) & 1


@dataclass(frozen=True)
class AnalyzerSetting:
    theta_a: float
    theta_b: float

    def flipped(self, flip_a: bool, flip_b: bool) -> AnalyzerSetting:
        return AnalyzerSetting(self.theta_a + 90.0 * flip_a, self.theta_b + 90.0 * flip_b)

    def same_as(self, other: AnalyzerSetting) -> bool:
        return math.isclose(self.theta_a, other.theta_a, abs_tol=1e-9) and math.isclose(
            self.theta_b, other.theta_b, abs_tol=1e-9
        )


@dataclass(frozen=True)
class DetectorBank:
    """Overall efficiencies and per-trial dark/stray click probabilities of D1..D4."""

    eps: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    p_dark: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        object.__setattr__(self, "p_dark", tuple(float(x) for x in self.p_dark))
        if len(self.eps) != 4 or len(self.p_dark) != 4:
            raise ValueError("a detector bank has exactly four detectors")
        for name, values in (("eps", self.eps), ("p_dark", self.p_dark)):
            for k, v in enumerate(values, start=1):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}[D{k}] must lie in [0, 1], got {v!r}")

    def swapped(self, swap_a: bool, swap_b: bool) -> DetectorBank:
        """Bank with D1<->D2 and/or D3<->D4 exchanged."""
        order = [1, 0] if swap_a else [0, 1]
        order += [3, 2] if swap_b else [2, 3]
        return DetectorBank(tuple(self.eps[i] for i in order), tuple(self.p_dark[i] for i in order))


@dataclass(frozen=True)
class ClickDistribution:
    """Probabilities of the 16 joint click patterns of one trial."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float).copy()
        if probs.shape != (N_PATTERNS,):
            raise ValueError("expected 16 pattern probabilities")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def coincidence(self, n: int, m: int) -> float:
        """P(Dn and Dm both click), summed over every pattern containing both."""
        _check_pair(n, m)
        mask = (_BITS[:, n - 1] == 1) & (_BITS[:, m - 1] == 1)
        return float(self.probs[mask].sum())

    def pattern(self, clicked: tuple[int, ...]) -> float:
        index = sum(1 << (k - 1) for k in clicked)
        return float(self.probs[index])


def _check_pair(n: int, m: int) -> None:
    if n not in SITE_A_DETECTORS:
        raise ValueError(f"Site-A detector index must be 1 or 2, got {n!r}")
    if m not in SITE_B_DETECTORS:
        raise ValueError(f"Site-B detector index must be 3 or 4, got {m!r}")


def _port_projections(theta_deg: float) -> np.ndarray:
    """Rows: transmitted, reflected port.  Columns: H, V input amplitude."""
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]])


def pair_amplitudes(state: EffectiveTwoPhotonState, setting: AnalyzerSetting) -> np.ndarray:
    """2x2 array A[n-1, m-3] of amplitudes for the idler pair to reach Dn and Dm."""
    c_hv, c_vh = state.amplitudes
    ua = _port_projections(setting.theta_a)
    ub = _port_projections(setting.theta_b)
    return c_hv * np.outer(ua[:, 0], ub[:, 1]) + c_vh * np.outer(ua[:, 1], ub[:, 0])


def pair_probabilities(state: EffectiveTwoPhotonState, setting: AnalyzerSetting) -> np.ndarray:
    """|A_nm|^2 for ideal detectors, given that a pair was emitted.  Sums to 1."""
    return np.abs(pair_amplitudes(state, setting)) ** 2


def single_port_probabilities(state: EffectiveTwoPhotonState, theta_a: float) -> np.ndarray:
    """Port probabilities (D1, D2) of an unpaired Site-A idler."""
    t = math.radians(theta_a)
    p1 = state.w_plus * math.cos(t) ** 2 + (1.0 - state.w_plus) * math.sin(t) ** 2
    return np.array([p1, 1.0 - p1])


def _click(eps: float, dark: float, photon: float) -> float:
    """Click probability of one detector hit by ``photon`` photons (0 or 1)."""
    return 1.0 - (1.0 - eps * photon) * (1.0 - dark)


def coincidence_probability(
    state: EffectiveTwoPhotonState,
    setting: AnalyzerSetting,
    n: int,
    m: int,
    bank: DetectorBank,
) -> float:
    """Per-trial probability that Dn (Site A) and Dm (Site B) both click.

    Three mutually exclusive source events contribute: an idler pair, an
    unpaired Site-A idler, and no photon at all.  Dark clicks are independent
    of everything and of each other.  With a dark-free bank this reduces to
    ``p_pair * eps_n * eps_m * |A_nm|^2``.
    """
    _check_pair(n, m)
    eps, dark = bank.eps, bank.p_dark
    en, em = eps[n - 1], eps[m - 1]
    dn, dm = dark[n - 1], dark[m - 1]

    probs = pair_probabilities(state, setting)
    pair = 0.0
    for a in SITE_A_DETECTORS:
        qa = _click(en, dn, float(a == n))
        for b in SITE_B_DETECTORS:
            pair += probs[a - 1, b - 3] * qa * _click(em, dm, float(b == m))

    ports = single_port_probabilities(state, setting.theta_a)
    single = _click(en, dn, ports[n - 1]) * dm
    empty = dn * dm
    p_none = 1.0 - state.p_pair - state.p_single
    return state.p_pair * pair + state.p_single * single + p_none * empty


def _patterns_from_clicks(click: np.ndarray) -> np.ndarray:
    """Pattern probabilities for independent detectors with click probs ``click[4]``."""
    return np.prod(np.where(_BITS == 1, click[None, :], 1.0 - click[None, :]), axis=1)


def outcome_distribution(
    state: EffectiveTwoPhotonState, setting: AnalyzerSetting, bank: DetectorBank
) -> ClickDistribution:
    eps = np.asarray(bank.eps)
    dark = np.asarray(bank.p_dark)
    out = np.zeros(N_PATTERNS)

    probs = pair_probabilities(state, setting)
    for a in SITE_A_DETECTORS:
        for b in SITE_B_DETECTORS:
            photon = np.zeros(4)
            photon[a - 1] = photon[b - 1] = 1.0
            click = 1.0 - (1.0 - eps * photon) * (1.0 - dark)
            out += state.p_pair * probs[a - 1, b - 3] * _patterns_from_clicks(click)

    ports = single_port_probabilities(state, setting.theta_a)
    for a in SITE_A_DETECTORS:
        photon = np.zeros(4)
        photon[a - 1] = 1.0
        click = 1.0 - (1.0 - eps * photon) * (1.0 - dark)
        out += state.p_single * ports[a - 1] * _patterns_from_clicks(click)

    out += (1.0 - state.p_pair - state.p_single) * _patterns_from_clicks(dark)
    # clip float dust below zero from 1 - p_pair - p_single
    return ClickDistribution(np.clip(out, 0.0, None))


def analytic_correlation(
    state: EffectiveTwoPhotonState, setting: AnalyzerSetting, visibility: float = 1.0
) -> float:
    """Closed-form efficiency-independent correlation, scaled by ``visibility``."""
    return float(correlation_model(state.eta_f, state.phi_f, setting.theta_a, setting.theta_b, visibility))


def correlation_model(eta_f, phi_f, theta_a, theta_b, visibility=1.0):
    """Vectorized form of :func:`analytic_correlation`; angles in degrees."""
    k = np.cos(phi_f) * np.sin(2.0 * np.asarray(eta_f))
    ta = np.radians(theta_a)
    tb = np.radians(theta_b)
    return -0.5 * visibility * (np.cos(2.0 * (ta - tb)) * (1.0 - k) + np.cos(2.0 * (ta + tb)) * (1.0 + k))
