"""Scenario orchestration and the CSV result table."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from .analysis import (
    NoDataError,
    calibrate_dark_probability,
    chsh_from_values,
    chsh_S,
    chsh_settings,
    estimate_E,
)
from .config import ExperimentConfig
from .detection import AnalyzerSetting, analytic_correlation
from .montecarlo import CoincidenceCounts, run_point, run_symmetrized

COLUMNS = (
    "scenario",
    "theta_a_deg",
    "theta_b_deg",
    "c13",
    "c14",
    "c23",
    "c24",
    "trials",
    "E",
    "sigma_E",
    "S",
    "sigma_S",
    "seed",
)
_INT_COLUMNS = {"c13", "c14", "c23", "c24", "trials", "seed"}


class ScenarioError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    theta_a_deg: float | None = None
    theta_b_deg: float | None = None
    c13: int | None = None
    c14: int | None = None
    c23: int | None = None
    c24: int | None = None
    trials: int | None = None
    E: float | None = None
    sigma_E: float | None = None
    S: float | None = None
    sigma_S: float | None = None
    seed: int | None = None


assert tuple(f.name for f in fields(ResultRow)) == COLUMNS

ResultTable = list[ResultRow]


def _counts_row(scenario, setting, counts: CoincidenceCounts, seed) -> tuple[ResultRow, object]:
    try:
        est = estimate_E(counts, setting)
        e, s = est.e_value, est.sigma
    except NoDataError:
        est, e, s = None, None, None
    row = ResultRow(
        scenario,
        setting.theta_a,
        setting.theta_b,
        counts.c13,
        counts.c14,
        counts.c23,
        counts.c24,
        counts.trials,
        e,
        s,
        seed=seed,
    )
    return row, est


def _simulate(config: ExperimentConfig, state, bank, setting, trials, stream, symmetrize):
    kwargs = dict(workers=config.workers, method=config.sampling)
    if symmetrize:
        per_run = max(1, trials // 4)
        return run_symmetrized(state, setting, bank, per_run, config.seed, stream=4 * stream, **kwargs)
    return run_point(state, setting, bank, trials, config.seed, stream=stream, **kwargs)


def _bank(config: ExperimentConfig, state):
    bank = config.bank()
    if config.background_visibility is not None:
        bank = calibrate_dark_probability(state, bank, config.background_visibility, config.chsh_angles)
    return bank


def run_scenario(config: ExperimentConfig) -> ResultTable:
    """Run the scenario named in ``config`` and return its rows.

    Trial counts are per point; symmetrized points split them over the four
    polarization-flipped runs.
    """
    state = config.state()
    seed = config.seed
    name = config.scenario
    rows: ResultTable = []

    if name == "oracle":
        vis = config.visibility * (config.background_visibility or 1.0)
        values = []
        for setting in chsh_settings(*config.chsh_angles):
            e = analytic_correlation(state, setting, vis)
            values.append(e)
            rows.append(ResultRow(name, setting.theta_a, setting.theta_b, E=e, sigma_E=0.0, seed=seed))
        bell = chsh_from_values(values, *config.chsh_angles)
        rows.append(ResultRow(name, S=bell.s_value, sigma_S=0.0, seed=seed))
        return rows

    bank = _bank(config, state)
    trials = config.trials_per_point()

    if name == "fringe":
        for i, theta_a in enumerate(config.theta_a_list):
            setting = AnalyzerSetting(theta_a, config.theta_b)
            counts = _simulate(config, state, bank, setting, trials, i, symmetrize=False)
            rows.append(_counts_row(name, setting, counts, seed)[0])
        return rows

    if name == "correlation":
        stream = 0
        for theta_b in config.theta_b_list:
            for theta_a in config.theta_a_list:
                setting = AnalyzerSetting(theta_a, theta_b)
                counts = _simulate(config, state, bank, setting, trials, stream, config.symmetrize)
                rows.append(_counts_row(name, setting, counts, seed)[0])
                stream += 1
        return rows

    if name == "chsh":
        estimates = []
        total_trials = 0
        for i, setting in enumerate(chsh_settings(*config.chsh_angles)):
            counts = _simulate(config, state, bank, setting, trials, i, config.symmetrize)
            row, est = _counts_row(name, setting, counts, seed)
            rows.append(row)
            estimates.append(est)
            total_trials += counts.trials
        if all(est is not None for est in estimates):
            bell = chsh_S(*estimates)
            rows.append(ResultRow(name, trials=total_trials, S=bell.s_value, sigma_S=bell.sigma, seed=seed))
        else:
            rows.append(ResultRow(name, trials=total_trials, seed=seed))
        return rows

    raise ScenarioError(f"unknown scenario {name!r}")


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if not math.isfinite(value):
        return repr(float(value))
    return format(float(value), "#.6g")


def write_rows(table: ResultTable, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in table:
        writer.writerow([_format(v) for v in astuple(row)])


def write_table(table: ResultTable, path: str | Path) -> None:
    """Comma-separated values, fixed header, 6 significant digits, LF line ends."""
    try:
        with open(path, "w", newline="") as fh:
            write_rows(table, fh)
    except OSError as exc:
        raise ScenarioError(f"cannot write {path}: {exc.strerror}") from None


def read_table(path: str | Path) -> ResultTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ValueError(f"unexpected header {header!r}")
        rows = []
        for record in reader:
            values = {}
            for key, cell in zip(COLUMNS, record):
                if key == "scenario":
                    values[key] = cell
                elif cell == "":
                    values[key] = None
                elif key in _INT_COLUMNS:
                    values[key] = int(cell)
                else:
                    values[key] = float(cell)
            rows.append(ResultRow(**values))
    return rows


def rounded(table: ResultTable) -> ResultTable:
    """The table as it reads back after serialization."""
    out = []
    for row in table:
        values = {}
        for f in fields(row):
            v = getattr(row, f.name)
            if isinstance(v, float) and math.isfinite(v):
                v = float(format(v, ".6g"))
            values[f.name] = v
        out.append(ResultRow(**values))
    return out
