"""Command line: ``cvqkd-rr sweep | session | threshold``.

Exit codes: 0 ok, 1 configuration error, 2 runtime error (including any sweep
cell that could not be computed).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import tomli

from .keyrate import NoRootError, theoretical_rate, xi_threshold
from .channel import ChannelParams
from .decoder import GroupingPolicy
from .session import SessionAborted, SessionConfig, run_session, write_key
from .sweep import ConfigError, SweepConfig, bin_width_sensitivity, emit_outputs, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# flag -> SweepConfig field
_SWEEP_FLAGS = {
    "distance_km": "distances_km",
    "xi": "xi_values",
    "va": "modulation_variance",
    "samples": "n_pulses",
    "seed": "seed",
    "ber_cut": "ber_cut",
    "bin_width": "bin_width",
    "fec": "f_ec",
    "atten_db_km": "attenuation_db_per_km",
    "mode": "mode",
    "out": "out",
    "workers": "workers",
    "group_key": "group_key",
    "eve_rule": "eve_rule",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple[float, ...]:
    """``"10,20,30"`` or a range ``"10:150:10"`` (inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            n = int(round((stop - start) / step))
            return tuple(start + k * step for k in range(n + 1))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _common(p):
    p.add_argument("--config", type=Path, help="TOML file; flags override its values")
    p.add_argument("--va", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--ber-cut", type=float)
    p.add_argument("--bin-width", type=float)
    p.add_argument("--fec", type=float)
    p.add_argument("--atten-db-km", type=float)
    p.add_argument("--group-key", choices=("pair", "imbalance"))
    p.add_argument("--eve-rule", choices=("conditioned", "max"))
    p.add_argument("--out", type=str)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cvqkd-rr", description="Single-bit reverse-reconciliation CVQKD simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sw = sub.add_parser("sweep", help="key rate versus distance and excess noise")
    _common(sw)
    sw.add_argument("--distance-km", type=_floats, help="e.g. 10,50,100 or 10:150:10")
    sw.add_argument("--xi", type=_floats)
    sw.add_argument("--mode", choices=("analytic", "monte-carlo", "both"))
    sw.add_argument("--workers", type=int)
    sw.add_argument("--no-sensitivity", action="store_true",
                    help="skip the BER bin-width sensitivity table")

    se = sub.add_parser("session", help="run one simulated session and write keys and transcript")
    _common(se)
    se.add_argument("--distance-km", type=float)
    se.add_argument("--xi", type=float)
    se.add_argument("--calibration", type=float, help="fraction of pulses used for estimation")
    se.add_argument("--channel-model", choices=("nominal", "estimated"))

    th = sub.add_parser("threshold", help="largest tolerable excess noise")
    th.add_argument("--transmission", type=float, default=1e-3)
    th.add_argument("--va", type=float, default=500.0)
    th.add_argument("--gamma", type=float, default=1.0, help="reconciliation efficiency")
    return parser


def _load_toml(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return data


def sweep_config(args) -> SweepConfig:
    data = _load_toml(args.config)
    data = dict(data.get("sweep", data))
    for flag, key in _SWEEP_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            data[key] = val
    if getattr(args, "no_sensitivity", False):
        data["sensitivity"] = False
    try:
        return SweepConfig.from_mapping(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def session_config(args) -> tuple[SessionConfig, Path]:
    data = dict(_load_toml(args.config).get("session", {}))
    flags = {"distance_km": "distance_km", "xi": "excess_noise", "va": "modulation_variance",
             "samples": "n_pulses", "seed": "seed", "fec": "f_ec",
             "atten_db_km": "attenuation_db_per_km", "calibration": "calibration_fraction",
             "channel_model": "channel_model"}
    for flag, key in flags.items():
        val = getattr(args, flag, None)
        if val is not None:
            data[key] = val
    out = Path(data.pop("out", None) or args.out or "session_out")
    pol = {k: data.pop(k) for k in ("ber_cut", "bin_width", "group_key", "eve_rule") if k in data}
    for flag in ("ber_cut", "bin_width", "group_key", "eve_rule"):
        if getattr(args, flag, None) is not None:
            pol[flag] = getattr(args, flag)
    known = {f.name for f in dataclasses.fields(SessionConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown session keys: {sorted(unknown)}")
    try:
        policy = GroupingPolicy(ber_cut=pol.get("ber_cut", 0.40),
                                ber_bin_width=pol.get("bin_width", 0.01),
                                key=pol.get("group_key", "pair"),
                                eve_rule=pol.get("eve_rule", "conditioned"))
        return SessionConfig(policy=policy, **data), out
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_sweep(args) -> int:
    cfg = sweep_config(args)
    rows = run_sweep(cfg)
    sens = None
    if cfg.sensitivity and cfg.mode in ("analytic", "both"):
        sens = bin_width_sensitivity(cfg)
    paths = emit_outputs(rows, cfg, sensitivity=sens)
    for r in rows:
        status = r.error or ("non-positive" if not r.practical > 0 else "ok")
        print(f"{r.mode:<11} L={r.distance_km:6.1f} km xi={r.xi:<5g} "
              f"theory={r.theoretical:.4e} practical={r.practical:.4e} "
              f"eff={r.efficiency:.4f} [{status}]")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_RUNTIME if any(r.error for r in rows) else EXIT_OK


def cmd_session(args) -> int:
    cfg, out = session_config(args)
    try:
        res = run_session(cfg)
        aborted = None
    except SessionAborted as exc:
        res, aborted = exc.result, exc.reason
    out.mkdir(parents=True, exist_ok=True)
    (out / "transcript.bin").write_bytes(res.transcript.to_bytes())
    (out / "transcript.txt").write_text(res.transcript.dump() + "\n")
    summary = {
        "config": dataclasses.asdict(cfg),
        "aborted": aborted,
        "n_key": res.n_key,
        "kept": res.kept,
        "estimate": None if res.estimate is None else dataclasses.asdict(res.estimate),
        "practical_bits_per_pulse": None if res.report is None else res.report.practical_rate,
        "theoretical_bits_per_pulse": None if res.report is None else res.report.theoretical_rate,
        "leaked_bits": res.leaked_bits,
        "secret_bits": res.secret_bits,
        "final_key_bits": 0 if res.final_key is None else len(res.final_key),
        "keys_match": res.keys_match,
        "empirical_ber_ab": res.empirical_ber_ab,
        "empirical_ber_ae": res.empirical_ber_ae,
    }
    if res.final_key is not None:
        summary["sha256_alice"] = write_key(out / "key_alice.bin", res.final_key_alice)
        summary["sha256_bob"] = write_key(out / "key_bob.bin", res.final_key_bob)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str) + "\n")
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2, default=str))
    if aborted:
        print(f"session aborted: {aborted}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_threshold(args) -> int:
    try:
        xi = xi_threshold(args.transmission, args.va, args.gamma)
    except ValueError as exc:
        if isinstance(exc, NoRootError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        raise ConfigError(str(exc)) from exc
    base = theoretical_rate(ChannelParams(args.transmission, 0.0, args.va))
    print(f"G={args.transmission:g} V_A={args.va:g} gamma={args.gamma:g}: "
          f"xi_max={xi:.6f} (noise-free rate {base:.6g} bits/pulse)")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    commands = {"sweep": cmd_sweep, "session": cmd_session, "threshold": cmd_threshold}
    try:
        return commands[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        logging.getLogger(__name__).debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
