"""Distance / excess-noise sweeps and their CSV, SVG and metadata outputs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .channel import ChannelParams
from .decoder import GroupingPolicy
from .keyrate import KeyRateReport, analytic_report
from .pairing import DeltaARule
from .session import SessionAborted, SessionConfig, run_session

log = logging.getLogger(__name__)

CSV_HEADER = ("distance_km,G,xi,theoretical_bits_per_pulse,practical_bits_per_pulse,efficiency,"
              "penalty_2hprime,kept_fraction,mean_ber_ab,mean_ber_ae,n,seed")
MODES = ("analytic", "monte-carlo", "both")
SENSITIVITY_BIN_WIDTHS = (0.005, 0.01, 0.02)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    distances_km: tuple[float, ...] = tuple(float(d) for d in range(10, 151, 10))
    xi_values: tuple[float, ...] = (0.0,)
    modulation_variance: float = 500.0
    attenuation_db_per_km: float = 0.2
    n_pulses: int = 1_000_000
    ber_cut: float = 0.40
    bin_width: float = 0.01
    group_key: str = "pair"
    eve_rule: str = "conditioned"
    f_ec: float = 1.0
    delta_a_base: float = 1.0
    delta_a_slope_per_km: float = 0.02
    separation: int = 7
    calibration_fraction: float = 0.1
    nodes: int = 3
    seed: int = 0
    mode: str = "analytic"
    out: str = "results"
    workers: int = 1
    sensitivity: bool = True

    def __post_init__(self):
        if not self.distances_km:
            raise ConfigError("distances_km must not be empty")
        if not self.xi_values:
            raise ConfigError("xi_values must not be empty")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode != "analytic" and self.n_pulses < 10_000:
            raise ConfigError("monte-carlo mode needs n_pulses >= 10^4")
        if any(d < 0 for d in self.distances_km) or any(x < 0 for x in self.xi_values):
            raise ConfigError("distances and excess noise must be non-negative")
        try:
            self.policy()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def policy(self) -> GroupingPolicy:
        return GroupingPolicy(ber_cut=self.ber_cut, ber_bin_width=self.bin_width,
                              key=self.group_key, eve_rule=self.eve_rule)

    def rule(self) -> DeltaARule:
        return DeltaARule(self.delta_a_base, self.delta_a_slope_per_km)

    def channel(self, distance_km: float, xi: float) -> ChannelParams:
        return ChannelParams.from_distance(distance_km, xi, self.attenuation_db_per_km,
                                           modulation_variance=self.modulation_variance)

    def session_config(self, distance_km: float, xi: float) -> SessionConfig:
        return SessionConfig(distance_km=distance_km, excess_noise=xi, n_pulses=self.n_pulses,
                             seed=self.seed, modulation_variance=self.modulation_variance,
                             attenuation_db_per_km=self.attenuation_db_per_km,
                             policy=self.policy(), delta_a=self.rule(),
                             separation=self.separation, f_ec=self.f_ec,
                             calibration_fraction=self.calibration_fraction, nodes=self.nodes)

    def cells(self) -> list[tuple[float, float]]:
        return sorted((float(d), float(x)) for d in self.distances_km for x in self.xi_values)

    @classmethod
    def from_mapping(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("distances_km", "xi_values"):
            if key in data:
                val = data[key]
                data[key] = tuple(float(v) for v in (val if isinstance(val, (list, tuple)) else [val]))
        return cls(**data)


@dataclass
class SweepRow:
    mode: str
    distance_km: float
    transmission: float
    xi: float
    theoretical: float
    practical: float
    penalty_2hprime: float
    kept_fraction: float
    mean_ber_ab: float
    mean_ber_ae: float
    n: int
    seed: int
    error: str | None = None
    n_groups: int = 0

    @property
    def efficiency(self) -> float:
        if not self.theoretical > 0:
            return float("nan")
        return self.practical / self.theoretical

    @property
    def loss_db(self) -> float:
        return -10.0 * math.log10(self.transmission)

    def csv_fields(self) -> list[str]:
        vals = (self.distance_km, self.transmission, self.xi, self.theoretical, self.practical,
                self.efficiency, self.penalty_2hprime, self.kept_fraction, self.mean_ber_ab,
                self.mean_ber_ae)
        return [repr(float(v)) for v in vals] + [str(self.n), str(self.seed)]


def _row(mode, cfg: SweepConfig, d, xi, report: KeyRateReport | None, error=None) -> SweepRow:
    g = cfg.channel(d, xi).transmission
    nan = float("nan")
    if report is None:
        return SweepRow(mode, d, g, xi, nan, nan, nan, nan, nan, nan, cfg.n_pulses, cfg.seed, error)
    return SweepRow(mode, d, g, xi, report.theoretical_rate, report.practical_rate,
                    report.penalty_2hprime, report.kept_fraction, report.mean_ber_ab,
                    report.mean_ber_ae, cfg.n_pulses, cfg.seed, error, len(report.groups))


def _analytic_cell(args):
    cfg, d, xi = args
    try:
        rep = analytic_report(cfg.channel(d, xi), cfg.policy(), cfg.rule(), cfg.separation,
                              cfg.nodes)
        return _row("analytic", cfg, d, xi, rep)
    except Exception as exc:  # recorded per cell, the sweep carries on
        log.exception("analytic cell L=%s xi=%s failed", d, xi)
        return _row("analytic", cfg, d, xi, None, f"{type(exc).__name__}: {exc}")


def _monte_carlo_cell(args):
    cfg, d, xi, stream = args
    try:
        res = run_session(cfg.session_config(d, xi), stream_id=stream)
        return _row("monte-carlo", cfg, d, xi, res.report)
    except SessionAborted as exc:
        if exc.result.report is not None and exc.result.report.non_positive:
            return _row("monte-carlo", cfg, d, xi, exc.result.report)
        return _row("monte-carlo", cfg, d, xi, None, f"aborted: {exc.reason}")
    except Exception as exc:
        log.exception("monte-carlo cell L=%s xi=%s failed", d, xi)
        return _row("monte-carlo", cfg, d, xi, None, f"{type(exc).__name__}: {exc}")


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_sweep(config: SweepConfig) -> list[SweepRow]:
    """One row per (mode, distance, xi) cell, ordered by mode then (L, xi)."""
    cells = config.cells()
    rows: list[SweepRow] = []
    if config.mode in ("analytic", "both"):
        rows += _map(_analytic_cell, [(config, d, x) for d, x in cells], config.workers)
    if config.mode in ("monte-carlo", "both"):
        items = [(config, d, x, k) for k, (d, x) in enumerate(cells)]
        rows += _map(_monte_carlo_cell, items, config.workers)
    return rows


def bin_width_sensitivity(config: SweepConfig) -> dict:
    """Analytic efficiency per distance for a few BER bin widths (first xi only)."""
    xi = float(config.xi_values[0])
    out = {}
    for bw in SENSITIVITY_BIN_WIDTHS:
        try:
            cfg = replace(config, bin_width=bw)
        except ConfigError:
            continue
        effs = [_analytic_cell((cfg, float(d), xi)).efficiency for d in sorted(config.distances_km)]
        out[repr(bw)] = effs
    return out


def csv_text(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    for r in rows:
        writer.writerow(r.csv_fields())
    return buf.getvalue()


def metadata(rows: list[SweepRow], config: SweepConfig, sensitivity: dict | None = None) -> dict:
    meta = {
        "config": asdict(config),
        "channel": [
            {"distance_km": d, "transmission": config.channel(d, 0.0).transmission,
             "loss_db": config.channel(d, 0.0).loss_db}
            for d in sorted(set(config.distances_km))
        ],
        "failures": [
            {"mode": r.mode, "distance_km": r.distance_km, "xi": r.xi, "error": r.error}
            for r in rows if r.error
        ],
        "groups": [
            {"mode": r.mode, "distance_km": r.distance_km, "xi": r.xi, "n_groups": r.n_groups}
            for r in rows
        ],
    }
    if sensitivity is not None:
        meta["bin_width_sensitivity"] = sensitivity
    return meta


def emit_outputs(rows: list[SweepRow], config: SweepConfig, out_dir=None,
                 sensitivity: dict | None = None) -> list[Path]:
    """Write ``sweep_<mode>.csv``, one SVG per (mode, xi) and ``sweep_meta.json``."""
    from .plot import rate_svg

    if not rows:
        raise ValueError("nothing to write")
    out = Path(out_dir if out_dir is not None else config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for mode in sorted({r.mode for r in rows}):
        sub = [r for r in rows if r.mode == mode]
        path = out / f"sweep_{mode}.csv"
        _write(path, csv_text(sub))
        written.append(path)
        for xi in sorted({r.xi for r in sub}):
            curve = [r for r in sub if r.xi == xi]
            path = out / f"rate_{mode}_xi{xi:g}.svg"
            _write(path, rate_svg(curve, title=f"{mode}, xi = {xi:g}"))
            written.append(path)
    path = out / "sweep_meta.json"
    _write(path, json.dumps(metadata(rows, config, sensitivity), indent=2, default=str) + "\n")
    written.append(path)
    return written


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
