"""Configuration, parameter sweeps, figure presets and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np

from . import analytic
from .analytic import NetworkParams
from .channel import (
    BlockageParams,
    BooleanBlockage,
    FadingParams,
    PathLossParams,
    db_to_linear,
    dbm_to_watt,
    derive_beta_p,
)
from .montecarlo import Scenario, estimate_coverage

__all__ = [
    "Config",
    "ConfigError",
    "SweepSpec",
    "ResultRow",
    "load_config",
    "parse_config",
    "run_sweep",
    "write_csv",
    "read_csv",
    "format_csv",
    "preset",
    "PRESETS",
    "BLOCKAGE_OFF",
    "VARY_AXES",
    "agreement_failures",
]

# stand-in for "no blockage" in the theorems, whose visible-area function is 0/0 at beta = 0
BLOCKAGE_OFF = 1e-9
AGREEMENT_FLOOR = 0.02
VARY_AXES = ("threshold_db", "lambda_bs", "rcs_dbsm", "blockage")


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


@dataclass(frozen=True)
class Config:
    """Every user-facing parameter, in the units used at the boundary (dB, dBm, dBsm).

    The defaults are the reference deployment: 100 MHz at -174 dBm/Hz,
    43 dBm transmit power, a 1 km network radius and 10^4 snapshots.
    """

    lambda_bs: float = 1e-5
    beta: float = 0.008
    p: float = 0.1
    rician_k: float = 10.0
    mean_rcs_dbsm: float = 20.0
    k_l_db: float = -75.0
    k_n_db: float = -90.0
    k_r_db: float = -86.0
    alpha_l: float = 2.0
    alpha_n: float = 3.2
    alpha_r: float = 4.0
    consistent_pathloss: bool = False
    mu_n_comm: float = 1.0
    mu_n_sens: float = 1.0
    tx_power_dbm: float = 43.0
    noise_psd_dbm_hz: float = -174.0
    bandwidth_hz: float = 100e6
    threshold_comm_db: float = 0.0
    threshold_sens_db: float = 0.0
    n_snapshots: int = 10_000
    area_radius: float = 1000.0
    seed: int = 0
    blockage_mode: str = "bernoulli"
    geometry_mode: str = "matched"
    rcs_mode: str = "independent"
    extend_disk: bool = True
    blocker_density: float | None = None
    blocker_length: float | None = None
    blocker_width: float | None = None
    blocker_size_dist: str = "fixed"

    def __post_init__(self):
        # build every derived object once so invariant violations surface here
        try:
            self.pathloss()
            self.blockage()
            self.fading(analytic_path=False)
            self.network()
            self.scenario()
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.n_snapshots < 100:
            raise ConfigError(f"n_snapshots must be >= 100, got {self.n_snapshots}")
        if not self.bandwidth_hz > 0:
            raise ConfigError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    @property
    def noise_watt(self) -> float:
        return dbm_to_watt(self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz))

    @property
    def tx_power_watt(self) -> float:
        return dbm_to_watt(self.tx_power_dbm)

    def pathloss(self) -> PathLossParams:
        return PathLossParams.from_db(
            self.k_l_db, self.k_n_db, self.k_r_db, self.alpha_l, self.alpha_n, self.alpha_r,
            consistent=self.consistent_pathloss,
        )

    def blockage(self) -> BlockageParams:
        given = (self.blocker_density, self.blocker_length, self.blocker_width)
        if all(v is None for v in given):
            if self.blockage_mode == "boolean":
                raise ValueError("blockage_mode=boolean needs blocker_density, blocker_length, blocker_width")
            return BlockageParams(self.beta, self.p)
        if any(v is None for v in given):
            raise ValueError("blocker_density, blocker_length and blocker_width must be set together")
        beta, p = derive_beta_p(*given)
        if not (math.isclose(beta, self.beta, rel_tol=1e-9) and math.isclose(p, self.p, rel_tol=1e-9)):
            raise ValueError(
                f"blocker field gives beta={beta!r}, p={p!r}, inconsistent with beta={self.beta!r}, p={self.p!r}"
            )
        return BlockageParams(beta, p, BooleanBlockage(*given, self.blocker_size_dist))

    def fading(self, analytic_path: bool = True) -> FadingParams:
        rcs = db_to_linear(self.mean_rcs_dbsm)
        if analytic_path:
            return FadingParams.tabulated(self.rician_k, self.mu_n_comm, self.mu_n_sens, rcs)
        # the simulator samples the exact Rician law and needs no series
        return FadingParams(self.rician_k, (), self.mu_n_comm, self.mu_n_sens, rcs)

    def network(self) -> NetworkParams:
        return NetworkParams(
            self.lambda_bs,
            self.noise_watt,
            self.noise_watt,
            db_to_linear(self.threshold_comm_db),
            db_to_linear(self.threshold_sens_db),
            self.tx_power_watt,
        )

    def scenario(self, seed: int | None = None) -> Scenario:
        return Scenario(
            self.area_radius,
            self.lambda_bs,
            self.blockage(),
            self.blockage_mode,
            self.geometry_mode,
            self.rcs_mode,
            self.seed if seed is None else seed,
            self.extend_disk,
        )


_CONFIG_FIELDS = {f.name: f for f in fields(Config)}


def _parse_value(name: str, text: str):
    kind = _CONFIG_FIELDS[name].type
    if "bool" in kind:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if "str" in kind:
        return text
    if "int" in kind:
        value = float(text)
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    return float(text)


def parse_config(text: str, source: str = "<config>") -> Config:
    """Parse flat ``key = value`` lines (``#`` starts a comment) over the defaults."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from exc
    return Config(**values)


def load_config(path: str | Path | None = None) -> Config:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))


@dataclass(frozen=True)
class ResultRow:
    preset: str
    task: str
    threshold_db: float
    lambda_bs: float
    beta: float
    p: float
    rcs_dbsm: float
    alpha_l: float
    alpha_n: float
    alpha_r: float
    analytic_value: float | None = None
    mc_mean: float | None = None
    mc_ci_low: float | None = None
    mc_ci_high: float | None = None
    n_snapshots: int | None = None
    seed: int | None = None
    error: str = ""

    def __post_init__(self):
        for name in ("analytic_value", "mc_mean", "mc_ci_low", "mc_ci_high"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


ROW_FIELDS = tuple(f.name for f in fields(ResultRow))


@dataclass(frozen=True)
class SweepSpec:
    """A one-axis parameter sweep.

    ``series`` lists override dicts, one per curve; each curve is swept over
    ``grid``. An override may also set ``task``. ``blockage`` grid values
    are 0 (off) or 1 (on).
    """

    task: str
    vary: str
    grid: tuple[float, ...]
    fixed: Config = field(default_factory=Config)
    methods: str = "both"
    n_snapshots: int = 10_000
    seed: int = 0
    name: str = "sweep"
    series: tuple[dict, ...] = ({},)

    def __post_init__(self):
        if self.task not in ("comm", "sens", "both"):
            raise ValueError(f"task must be comm, sens or both, got {self.task!r}")
        if self.vary not in VARY_AXES:
            raise ValueError(f"vary must be one of {VARY_AXES}, got {self.vary!r}")
        if self.methods not in ("analytic", "mc", "both"):
            raise ValueError(f"methods must be analytic, mc or both, got {self.methods!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("grid must be nonempty")
        steps = np.diff(grid)
        if len(grid) > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("grid must be strictly monotone")
        if self.vary == "blockage" and not set(grid) <= {0.0, 1.0}:
            raise ValueError("blockage grid values must be 0 (off) or 1 (on)")
        if self.n_snapshots < 100:
            raise ValueError(f"n_snapshots must be >= 100, got {self.n_snapshots}")
        object.__setattr__(self, "grid", grid)
        for overrides in self.series:
            self._config_for(overrides, grid[0])

    def _config_for(self, overrides: dict, value: float) -> tuple[str, Config, bool]:
        changes = dict(overrides)
        task = changes.pop("task", self.task)
        blockage_on = bool(changes.pop("blockage", True))
        if self.vary == "threshold_db":
            changes.update(threshold_comm_db=value, threshold_sens_db=value)
        elif self.vary == "lambda_bs":
            changes["lambda_bs"] = value
        elif self.vary == "rcs_dbsm":
            changes["mean_rcs_dbsm"] = value
        else:
            blockage_on = bool(value)
        if "rcs_dbsm" in changes:
            changes["mean_rcs_dbsm"] = changes.pop("rcs_dbsm")
        if "threshold_db" in changes:
            t = changes.pop("threshold_db")
            changes.update(threshold_comm_db=t, threshold_sens_db=t)
        try:
            return task, self.fixed.replace(**changes), blockage_on
        except TypeError as exc:
            raise ValueError(f"bad series override {overrides!r}: {exc}") from exc


def _tasks(task: str) -> tuple[str, ...]:
    return ("comm", "sens") if task == "both" else (task,)


def _threshold_db(cfg: Config, task: str) -> float:
    return cfg.threshold_comm_db if task == "comm" else cfg.threshold_sens_db


def _analytic_value(task: str, cfg: Config, blockage_on: bool) -> float:
    pl, f, net = cfg.pathloss(), cfg.fading(), cfg.network()
    if blockage_on:
        b = BlockageParams(cfg.beta, cfg.p)
    else:
        b = BlockageParams(BLOCKAGE_OFF, BLOCKAGE_OFF)
    if task == "comm":
        value = analytic.comm_coverage(net, pl, b, f).value
    else:
        value = analytic.sens_coverage(net, pl, b, f).value
    if not blockage_on and pl.alpha_l > 2:
        corollary = analytic.corollary1(net, pl, f) if task == "comm" else analytic.corollary2(net, pl, f)
        if abs(corollary.value - value) > 1e-3:
            raise ArithmeticError(
                f"blockage-off theorem {value!r} and corollary {corollary.value!r} disagree"
            )
    return value


def _mc_scenario(cfg: Config, blockage_on: bool, seed: int) -> Scenario:
    if blockage_on:
        return cfg.scenario(seed)
    return dataclasses.replace(cfg.scenario(seed), blockage=BlockageParams(0.0, 0.0), blockage_mode="bernoulli")


def run_sweep(spec: SweepSpec) -> list[ResultRow]:
    """Evaluate every (curve, grid value, task) point, in that order.

    Errors are recorded per row in the ``error`` column instead of aborting.
    Simulation points that differ only in threshold share one snapshot set.
    """
    points = []
    for overrides in spec.series:
        for value in spec.grid:
            task, cfg, blockage_on = spec._config_for(overrides, value)
            for t in _tasks(task):
                points.append((t, cfg, blockage_on))

    mc_results: dict = {}
    if spec.methods in ("mc", "both"):
        groups: dict = {}
        for t, cfg, on in points:
            key = (t, cfg.replace(threshold_comm_db=0.0, threshold_sens_db=0.0), on)
            groups.setdefault(key, []).append(_threshold_db(cfg, t))
        for (t, base, on), thresholds in groups.items():
            grid = sorted(set(thresholds))
            try:
                noise = base.noise_watt / base.tx_power_watt
                ests = estimate_coverage(
                    t, grid, _mc_scenario(base, on, spec.seed), base.pathloss(),
                    base.fading(analytic_path=False), noise, spec.n_snapshots,
                )
                mc_results[(t, base, on)] = dict(zip(grid, ests))
            except Exception as exc:  # noqa: BLE001 - reported per row
                mc_results[(t, base, on)] = exc

    rows = []
    for t, cfg, on in points:
        errors = []
        a_val = None
        if spec.methods in ("analytic", "both"):
            try:
                a_val = _analytic_value(t, cfg, on)
            except Exception as exc:  # noqa: BLE001
                errors.append(f"analytic: {exc}")
        mc = {}
        if spec.methods in ("mc", "both"):
            res = mc_results[(t, cfg.replace(threshold_comm_db=0.0, threshold_sens_db=0.0), on)]
            if isinstance(res, Exception):
                errors.append(f"mc: {res}")
            else:
                est = res[_threshold_db(cfg, t)]
                mc = dict(mc_mean=est.mean, mc_ci_low=est.ci_low, mc_ci_high=est.ci_high,
                          n_snapshots=spec.n_snapshots, seed=spec.seed)
        beta, p = (cfg.beta, cfg.p) if on else (BLOCKAGE_OFF, BLOCKAGE_OFF)
        rows.append(ResultRow(
            preset=spec.name, task=t, threshold_db=_threshold_db(cfg, t), lambda_bs=cfg.lambda_bs,
            beta=beta, p=p, rcs_dbsm=cfg.mean_rcs_dbsm, alpha_l=cfg.alpha_l, alpha_n=cfg.alpha_n,
            alpha_r=cfg.alpha_r, analytic_value=a_val, error="; ".join(errors), **mc,
        ))
    return rows


def agreement_failures(rows: Iterable[ResultRow], floor: float = AGREEMENT_FLOOR) -> list[ResultRow]:
    """Rows where |analytic - mc_mean| exceeds max(CI half-width, floor), or that errored."""
    bad = []
    for row in rows:
        if row.error or row.analytic_value is None or row.mc_mean is None:
            bad.append(row)
            continue
        half = 0.5 * (row.mc_ci_high - row.mc_ci_low)
        if abs(row.analytic_value - row.mc_mean) > max(half, floor):
            bad.append(row)
    return bad


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Iterable[ResultRow]) -> str:
    """CSV text with a header of the ResultRow field names."""
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in ROW_FIELDS])
    return buf.getvalue()


def write_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    Path(path).write_text(format_csv(rows))


_ROW_TYPES = {f.name: f.type for f in fields(ResultRow)}


def _uncell(name: str, text: str):
    kind = _ROW_TYPES[name]
    if kind == "str":
        return text
    if text == "":
        return None
    return int(text) if kind.startswith("int") else float(text)


def read_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ROW_FIELDS:
            raise ValueError(f"unexpected CSV header {header}")
        return [ResultRow(**{k: _uncell(k, v) for k, v in zip(header, line)}) for line in reader]


def _threshold_grid(step: float = 2.0) -> tuple[float, ...]:
    n = int(round(50.0 / step))
    return tuple(float(x) for x in np.linspace(-20.0, 30.0, n + 1))


def _log_grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.logspace(math.log10(lo), math.log10(hi), n))


PRESETS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "validate")


def preset(name: str, seed: int = 0, base: Config | None = None) -> SweepSpec:
    """Sweep reproducing one figure's axes, or the ``validate`` agreement check.

    fig2: sensing vs threshold for mean RCS 0, 10, 20, 30 dBsm, plus the
    communication curve. fig3/fig4: communication/sensing vs threshold for
    five BS densities. fig5: both tasks vs density for five thresholds.
    fig6/fig7: communication/sensing vs density with blockage on and off, at
    alpha_l = 2.4 and alpha_n = alpha_r = 4.8. validate: both tasks on a
    coarse threshold grid with both methods.
    """
    cfg = base or Config()
    common = dict(fixed=cfg, n_snapshots=cfg.n_snapshots, seed=seed, name=name)
    if name == "fig2":
        curves = tuple({"rcs_dbsm": r} for r in (0.0, 10.0, 20.0, 30.0)) + ({"task": "comm"},)
        return SweepSpec("sens", "threshold_db", _threshold_grid(), series=curves, **common)
    if name in ("fig3", "fig4"):
        curves = tuple({"lambda_bs": lam} for lam in (1e-6, 5e-6, 1e-5, 5e-5, 1e-4))
        task = "comm" if name == "fig3" else "sens"
        return SweepSpec(task, "threshold_db", _threshold_grid(), series=curves, **common)
    if name == "fig5":
        curves = tuple({"threshold_db": t} for t in (-20.0, -10.0, 0.0, 10.0, 20.0))
        return SweepSpec("both", "lambda_bs", _log_grid(1e-7, 1e-3, 40), series=curves, **common)
    if name in ("fig6", "fig7"):
        common["fixed"] = cfg.replace(alpha_l=2.4, alpha_n=4.8, alpha_r=4.8)
        curves = ({"blockage": 1}, {"blockage": 0})
        task = "comm" if name == "fig6" else "sens"
        return SweepSpec(task, "lambda_bs", _log_grid(1e-7, 1e-3, 25), series=curves, **common)
    if name == "validate":
        return SweepSpec("both", "threshold_db", _threshold_grid(10.0), **common)
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
