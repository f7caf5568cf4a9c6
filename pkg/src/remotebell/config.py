"""``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored.  Omitted keys take the defaults
below, which describe a typical laboratory configuration.
Angles are in degrees, the storage time in nanoseconds, the field in gauss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .detection import DetectorBank
from .model import (
    G_FACTOR_F3,
    ChannelParams,
    EffectiveTwoPhotonState,
    SourceParams,
    StorageParams,
    derive_effective_state,
)

SCENARIOS = ("fringe", "correlation", "chsh", "oracle")


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based source line when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line


def _floats(n: int | None = None):
    def parse(text: str) -> tuple[float, ...]:
        values = tuple(float(x) for x in text.replace(" ", "").split(",") if x)
        if n is not None and len(values) != n:
            raise ValueError(f"expected {n} comma-separated numbers, got {len(values)}")
        if not values:
            raise ValueError("expected at least one number")
        return values

    return parse


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(parse):
    def inner(text: str):
        if text.strip().lower() in ("", "none"):
            return None
        return parse(text)

    return inner


def _int(text: str) -> int:
    return int(text.strip())


def _str(text: str) -> str:
    return text.strip()


def _unit(x) -> bool:
    return 0.0 <= x <= 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "chsh"
    # Site A source
    chi: float = 0.1
    eta_deg: float = 0.81 * 45.0
    site_a_efficiency: float = 0.5
    storage_time_a_ns: float = 500.0
    # fiber
    transmission: float = 1.0
    qwp_sign: int = 1
    # Site B storage
    eps_b_plus: float = 0.08
    eps_b_minus: float = 0.03
    b_field_gauss: float = 0.2
    g_factor: float = G_FACTOR_F3
    storage_time_b_ns: float = 200.0
    phase_offset_deg: float = 0.0
    # total relative phase of the idler pair; ``None`` leaves it at Larmor + offset
    phi_f_deg: float | None = 0.0
    # detection and background
    detector_eff: tuple[float, ...] = (0.6, 0.6, 0.6, 0.6)
    p_dark: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    include_singles: bool = True
    background_visibility: float | None = None
    visibility: float = 1.0
    # scenario layout
    theta_b: float = 135.0
    theta_a_list: tuple[float, ...] = tuple(float(x) for x in range(0, 181, 15))
    theta_b_list: tuple[float, ...] = (0.0, 45.0, 90.0, 135.0)
    chsh_angles: tuple[float, ...] = (78.5, 33.5, 45.0, 0.0)
    symmetrize: bool = True
    # sampling
    trials: int | None = None
    duration_s: float | None = None
    seed: int = 20051
    workers: int = 1
    sampling: str = "multinomial"
    output: str | None = None

    def __post_init__(self) -> None:
        checks = [
            ("scenario", self.scenario in SCENARIOS, f"one of {', '.join(SCENARIOS)}"),
            ("chi", 0.0 < self.chi < 1.0, "in (0, 1)"),
            ("eta_deg", 0.0 <= self.eta_deg <= 90.0, "in [0, 90]"),
            ("site_a_efficiency", _unit(self.site_a_efficiency), "in [0, 1]"),
            ("storage_time_a_ns", self.storage_time_a_ns >= 0, ">= 0"),
            ("transmission", _unit(self.transmission), "in [0, 1]"),
            ("qwp_sign", self.qwp_sign in (1, -1), "+1 or -1"),
            ("eps_b_plus", _unit(self.eps_b_plus), "in [0, 1]"),
            ("eps_b_minus", _unit(self.eps_b_minus), "in [0, 1]"),
            ("eps_b_minus", self.eps_b_plus + self.eps_b_minus > 0, "nonzero together with eps_b_plus"),
            ("storage_time_b_ns", self.storage_time_b_ns >= 0, ">= 0"),
            ("detector_eff", len(self.detector_eff) == 4 and all(map(_unit, self.detector_eff)), "4 values in [0, 1]"),
            ("p_dark", len(self.p_dark) == 4 and all(map(_unit, self.p_dark)), "4 values in [0, 1]"),
            ("visibility", _unit(self.visibility), "in [0, 1]"),
            (
                "background_visibility",
                self.background_visibility is None or 0.0 < self.background_visibility <= 1.0,
                "in (0, 1]",
            ),
            ("chsh_angles", len(self.chsh_angles) == 4, "4 angles: theta_a, theta_a', theta_b, theta_b'"),
            ("trials", self.trials is None or self.trials > 0, "> 0"),
            ("duration_s", self.duration_s is None or self.duration_s > 0, "> 0"),
            ("seed", 0 <= self.seed < 2**64, "an unsigned 64-bit integer"),
            ("workers", self.workers >= 1, ">= 1"),
            ("sampling", self.sampling in ("multinomial", "per-trial"), "multinomial or per-trial"),
        ]
        for key, ok, what in checks:
            if not ok:
                raise ConfigError(f"{key} must be {what}, got {getattr(self, key)!r}")

    # -- physics records -------------------------------------------------

    def source(self) -> SourceParams:
        return SourceParams(self.chi, math.radians(self.eta_deg))

    def channel(self) -> ChannelParams:
        return ChannelParams(self.transmission, self.qwp_sign)

    def storage(self) -> StorageParams:
        return StorageParams(
            self.eps_b_plus, self.eps_b_minus, self.b_field_gauss, self.g_factor, self.storage_time_b_ns * 1e-9
        )

    def bank(self) -> DetectorBank:
        return DetectorBank(self.detector_eff, self.p_dark)

    def state(self) -> EffectiveTwoPhotonState:
        offset = math.radians(self.phase_offset_deg)
        if self.phi_f_deg is not None:
            # choose the static offset that lands the total phase on phi_f_deg
            bare = derive_effective_state(self.source(), self.channel(), self.storage())
            offset = math.radians(self.phi_f_deg) - bare.phi_f
        return derive_effective_state(
            self.source(),
            self.channel(),
            self.storage(),
            phase_offset=offset,
            site_a_efficiency=self.site_a_efficiency,
            include_singles=self.include_singles,
        )

    def trials_per_point(self) -> int:
        """Explicit trial count, else the acquisition time at the 108 kHz cycle rate."""
        from .montecarlo import trials_for_duration

        if self.trials is not None:
            return self.trials
        if self.duration_s is not None:
            return trials_for_duration(self.duration_s)
        # 2 hours per CHSH point, 15 minutes per fringe/correlation point
        return trials_for_duration(7200.0 if self.scenario in ("chsh", "oracle") else 900.0)

    def with_overrides(self, **changes) -> ExperimentConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


_PARSERS = {
    "scenario": _str,
    "chi": float,
    "eta_deg": float,
    "site_a_efficiency": float,
    "storage_time_a_ns": float,
    "transmission": float,
    "qwp_sign": _int,
    "eps_b_plus": float,
    "eps_b_minus": float,
    "b_field_gauss": float,
    "g_factor": float,
    "storage_time_b_ns": float,
    "phase_offset_deg": float,
    "phi_f_deg": _optional(float),
    "detector_eff": _floats(4),
    "p_dark": _floats(4),
    "include_singles": _bool,
    "background_visibility": _optional(float),
    "visibility": float,
    "theta_b": float,
    "theta_a_list": _floats(),
    "theta_b_list": _floats(),
    "chsh_angles": _floats(4),
    "symmetrize": _bool,
    "trials": _optional(_int),
    "duration_s": _optional(float),
    "seed": _int,
    "workers": _int,
    "sampling": _str,
    "output": _optional(_str),
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text: str, path: str | None = None) -> ExperimentConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno, path)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno, path) from None
        lines[key] = lineno
        try:
            # range-check each key as it arrives so the error carries its line
            ExperimentConfig(**{key: values[key]})
        except ConfigError as exc:
            raise ConfigError(str(exc), lineno, path) from None
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(str(exc), None, path) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError("config file not found", path=str(path)) from None
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return parse_config(text, str(path))


DEFAULT_CONFIG = ExperimentConfig()
