"""State chain of the remote atomic-qubit protocol.

Site A writes an atom-photon entangled pair, the signal photon crosses the
fiber (two quarter-wave plates swap helicities), is stored at Site B with
helicity-dependent efficiency, and both qubits are later read out as idler
photons.  Everything here is a plain value or a pure function; the
collective-mode operators are never represented explicitly, only through
the mixing angle, phase and pair probability of the effective two-photon
state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Bohr magneton over hbar, in rad s^-1 G^-1.
MU_B_OVER_HBAR = 2.0 * math.pi * 1.3996e6

# 85Rb F=3 ground-state Lande factor, nuclear term neglected.
G_FACTOR_F3 = 1.0 / 3.0

DEFAULT_ETA = 0.81 * math.pi / 4.0

# cos^2 + sin^2 may miss 1 by a few ulps; closer than this counts as full storage
_FULL_STORAGE_TOL = 1e-12


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class SourceParams:
    """Site-A write process: pair amplitude ``chi`` and asymmetry angle ``eta``."""

    chi: float = 0.1
    eta: float = DEFAULT_ETA

    def __post_init__(self) -> None:
        if not 0.0 < self.chi < 1.0:
            raise ValueError(f"chi must lie in (0, 1), got {self.chi!r}")
        if not 0.0 <= self.eta <= math.pi / 2:
            raise ValueError(f"eta must lie in [0, pi/2], got {self.eta!r}")


@dataclass(frozen=True)
class StorageParams:
    """Site-B storage: combined storage+retrieval efficiencies and bias field."""

    eps_plus: float = 0.08
    eps_minus: float = 0.03
    b_field: float = 0.2  # gauss
    g_factor: float = G_FACTOR_F3
    storage_time: float = 200e-9  # seconds

    def __post_init__(self) -> None:
        _check_unit("eps_plus", self.eps_plus)
        _check_unit("eps_minus", self.eps_minus)
        if self.storage_time < 0:
            raise ValueError(f"storage_time must be >= 0, got {self.storage_time!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Fiber link between the sites.

    ``qwp_sign`` selects a_+ -> +a_- (``+1``) or a_+ -> -a_- (``-1``); either way
    it only contributes a global sign that ends up in the relative phase.
    """

    transmission: float = 1.0
    qwp_sign: int = 1

    def __post_init__(self) -> None:
        _check_unit("transmission", self.transmission)
        if self.qwp_sign not in (1, -1):
            raise ValueError(f"qwp_sign must be +1 or -1, got {self.qwp_sign!r}")


@dataclass(frozen=True)
class EffectiveTwoPhotonState:
    """cos(eta_f)|HV> + exp(i phi_f) sin(eta_f)|VH>, produced with probability p_pair.

    ``p_single`` is the per-trial probability of an unpaired Site-A idler and
    ``w_plus`` the probability that such an idler is in the H (+) state.
    Both default to zero/neutral so the state can be built by hand for
    pair-only studies.
    """

    eta_f: float
    phi_f: float = 0.0
    p_pair: float = 1.0
    p_single: float = 0.0
    w_plus: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta_f <= math.pi / 2:
            raise ValueError(f"eta_f must lie in [0, pi/2], got {self.eta_f!r}")
        _check_unit("p_pair", self.p_pair)
        _check_unit("p_single", self.p_single)
        _check_unit("w_plus", self.w_plus)
        if self.p_pair + self.p_single > 1.0:
            raise ValueError("p_pair + p_single must not exceed 1")

    @property
    def amplitudes(self) -> tuple[float, complex]:
        """Coefficients of |HV> and |VH>."""
        return math.cos(self.eta_f), complex(math.cos(self.phi_f), math.sin(self.phi_f)) * math.sin(self.eta_f)

    def conditioned(self) -> EffectiveTwoPhotonState:
        """Same polarization state with a pair in every trial and no singles."""
        return EffectiveTwoPhotonState(self.eta_f, self.phi_f, p_pair=1.0)


@dataclass(frozen=True)
class SingleExcitationWeights:
    w_plus: float
    w_minus: float = field(init=False)

    def __post_init__(self) -> None:
        _check_unit("w_plus", self.w_plus)
        object.__setattr__(self, "w_minus", 1.0 - self.w_plus)


def larmor_phase(b_field: float, g_factor: float, storage_time: float) -> float:
    """Phase -2 (g mu_B / hbar) B t picked up by the stored Site-B qubit."""
    if storage_time < 0:
        raise ValueError("storage_time must be >= 0")
    return -2.0 * g_factor * MU_B_OVER_HBAR * b_field * storage_time


def average_storage_efficiency(eps_plus: float, eps_minus: float, eta: float) -> float:
    return eps_minus * math.cos(eta) ** 2 + eps_plus * math.sin(eta) ** 2


def derive_effective_state(
    source: SourceParams,
    channel: ChannelParams,
    storage: StorageParams,
    *,
    phase_offset: float = 0.0,
    site_a_efficiency: float = 0.5,
    include_singles: bool = True,
) -> EffectiveTwoPhotonState:
    """Compose source, fiber and storage into the idler-pair state.

    ``phase_offset`` lumps together the light shifts and optical elements that
    add to the Larmor phase.  ``site_a_efficiency`` is the Site-A read-out
    factor entering the pair probability.
    """
    _check_unit("site_a_efficiency", site_a_efficiency)
    eps_b = average_storage_efficiency(storage.eps_plus, storage.eps_minus, source.eta)
    if eps_b <= 0.0:
        raise ValueError("both storage efficiencies are zero; the stored state is undefined")

    cos_f = math.sqrt(storage.eps_minus / eps_b) * math.cos(source.eta)
    eta_f = math.acos(min(1.0, cos_f))

    phi_f = larmor_phase(storage.b_field, storage.g_factor, storage.storage_time) + phase_offset
    if channel.qwp_sign < 0:
        # a_+ -> -a_- flips the sign of the |HV> branch relative to |VH>
        phi_f += math.pi
    phi_f = math.remainder(phi_f, 2.0 * math.pi)

    chi2 = source.chi**2
    p_pair = chi2 * channel.transmission * eps_b * site_a_efficiency
    p_single = 0.0
    w_plus = 0.5
    if include_singles and channel.transmission * eps_b < 1.0 - _FULL_STORAGE_TOL:
        p_single = chi2 * (1.0 - channel.transmission * eps_b) * site_a_efficiency
        w_plus = single_excitation_weights(source, storage, transmission=channel.transmission).w_plus
    return EffectiveTwoPhotonState(eta_f, phi_f, p_pair, p_single, w_plus)


def single_excitation_weights(
    source: SourceParams, storage: StorageParams, *, transmission: float = 1.0
) -> SingleExcitationWeights:
    """Helicity weights of a Site-A excitation whose partner was not stored.

    The + atomic state is paired with a photon that reaches Site B as negative
    helicity, hence the cross-over of efficiencies.  Fiber loss is taken as
    helicity independent.
    """
    c2 = math.cos(source.eta) ** 2
    s2 = 1.0 - c2
    eps = transmission * average_storage_efficiency(storage.eps_plus, storage.eps_minus, source.eta)
    if eps >= 1.0 - _FULL_STORAGE_TOL:
        raise ValueError("average storage efficiency of 1 leaves no unpaired excitation")
    w_plus = (1.0 - transmission * storage.eps_minus) * c2 / (1.0 - eps)
    w_minus = (1.0 - transmission * storage.eps_plus) * s2 / (1.0 - eps)
    # w_plus + w_minus is 1 analytically; renormalize away rounding
    return SingleExcitationWeights(w_plus / (w_plus + w_minus))
