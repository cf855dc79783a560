"""Command-line front end: single runs, density sweeps, topology dumps."""
from __future__ import annotations

import argparse
import os
import sys
from typing import Mapping, Optional, Sequence

from .config import ConfigError, ScenarioConfig
from .deployment import deploy, topology_csv
from .energy import EnergyParams
from .experiment import replication_csv, run_replication, run_sweep, sweep_csv
from .mac import MacParams
from .model import ChannelKind, Consideration, ProtocolMode, rng_stream
from .propagation import RadioParams

_ENUM_KEYS = {
    "channel": ChannelKind,
    "mode": ProtocolMode,
    "consideration": Consideration,
}

_FLOAT_KEYS = {
    "plane_width",
    "plane_height",
    "anchor_density",
    "beacon_interval",
    "sigma_shadowing_db",
    "sigma_rssi_db",
    "nominal_range_m",
    "tx_power_dbm",
    "data_rate_bps",
    "reception_threshold_dbm",
    "carrier_sense_threshold_dbm",
    "carrier_frequency_hz",
    "p_tx_mw",
    "p_rx_idle_mw",
    "p_sleep_mw",
    "e_lateration_mj",
    "slot_time_us",
}

_INT_KEYS = {
    "node_count",
    "rng_seed",
    "beacons_per_anchor",
    "header_bytes",
    "beacon_payload_bytes",
    "contention_window",
}

_PRESET_KEY = "radio_preset"
_KNOWN_KEYS = set(_ENUM_KEYS) | _FLOAT_KEYS | _INT_KEYS | {_PRESET_KEY}

_RADIO_KEYS = {
    "tx_power_dbm": "tx_power_dbm",
    "data_rate_bps": "data_rate_bps",
    "carrier_frequency_hz": "carrier_frequency_hz",
    "nominal_range_m": "nominal_range_m",
    "reception_threshold_dbm": "reception_threshold_dbm",
    "carrier_sense_threshold_dbm": "carrier_sense_threshold_dbm",
}

_MAC_KEYS = {
    "header_bytes": "header_bytes",
    "beacon_payload_bytes": "beacon_payload_bytes",
    "contention_window": "contention_window",
    "beacons_per_anchor": "beacons_per_anchor",
}

_ENERGY_KEYS = {
    "p_tx_mw": "p_tx_mw",
    "p_rx_idle_mw": "p_rx_idle_mw",
    "p_sleep_mw": "p_sleep_mw",
    "e_lateration_mj": "e_lateration_mj",
}


def _cast(key: str, raw: str, where: str):
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _ENUM_KEYS:
            return _ENUM_KEYS[key](raw)
        if key == _PRESET_KEY:
            if raw not in ("calibrated", "table2-raw"):
                raise ValueError(raw)
            return raw
    except ValueError:
        raise ConfigError(f"{where}: invalid value {raw!r} for key {key!r}") from None
    raise ConfigError(f"{where}: unknown key {key!r}")


def parse_config_file(path: str) -> dict[str, object]:
    """Flat `key = value` text with `#` comments; unknown keys are rejected."""
    values: dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _cast(key, raw, f"{path}:{lineno}")
    return values


def build_config(values: Mapping[str, object]) -> ScenarioConfig:
    values = dict(values)
    radio_kwargs: dict[str, object] = {}
    if values.pop(_PRESET_KEY, "calibrated") == "table2-raw":
        radio_kwargs["reception_threshold_dbm"] = -148.0
        radio_kwargs["carrier_sense_threshold_dbm"] = -148.0
    for key, target in _RADIO_KEYS.items():
        if key in values:
            radio_kwargs[target] = values.pop(key)

    mac_kwargs: dict[str, object] = {}
    for key, target in _MAC_KEYS.items():
        if key in values:
            mac_kwargs[target] = values.pop(key)
    if "beacon_interval" in values:
        mac_kwargs["beacon_interval_s"] = values.pop("beacon_interval")
    if "slot_time_us" in values:
        mac_kwargs["slot_time_s"] = float(values.pop("slot_time_us")) * 1e-6

    energy_kwargs: dict[str, object] = {}
    for key, target in _ENERGY_KEYS.items():
        if key in values:
            energy_kwargs[target] = values.pop(key)

    if "mode" in values:
        values["protocol_mode"] = values.pop("mode")

    try:
        config = ScenarioConfig(
            radio=RadioParams(**radio_kwargs),
            mac=MacParams(**mac_kwargs),
            energy_params=EnergyParams(**energy_kwargs),
            **values,
        )
        config.validate()
    except ValueError as exc:  # includes ConfigError
        raise ConfigError(str(exc)) from None
    return config


def load_config(path: Optional[str], overrides: Mapping[str, object] = ()) -> ScenarioConfig:
    """Merge file values with CLI overrides (overrides win) into a config."""
    values = parse_config_file(path) if path else {}
    values.update(dict(overrides))
    return build_config(values)


def _collect_overrides(args: argparse.Namespace) -> dict[str, object]:
    overrides: dict[str, object] = {}
    if getattr(args, "density", None) is not None:
        overrides["anchor_density"] = args.density
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if getattr(args, "channel", None) is not None:
        overrides["channel"] = ChannelKind(args.channel)
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = ProtocolMode(args.mode)
    if getattr(args, "consideration", None) is not None:
        overrides["consideration"] = Consideration(args.consideration)
    return overrides


def _write_output(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key = value scenario file")
    parser.add_argument("--density", type=float, help="anchor density override in [0, 1]")
    parser.add_argument("--seed", type=int, help="rng_seed override")
    parser.add_argument("--channel", choices=[c.value for c in ChannelKind])
    parser.add_argument("--mode", choices=[m.value for m in ProtocolMode])
    parser.add_argument(
        "--consideration", choices=[c.value for c in Consideration], help="PME ranking preference"
    )
    parser.add_argument("--out", help="output file (default: stdout)")


def _parse_list(raw: str, enum, what: str):
    names = [part.strip() for part in raw.split(",") if part.strip()]
    if not names:
        raise ConfigError(f"empty {what} list")
    try:
        return [enum(name) for name in names]
    except ValueError as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnloc",
        description="Localization simulator for randomly deployed wireless sensor networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one replication, per-node CSV")
    _add_common(run)
    run.add_argument("--rep", type=int, default=0, help="replication index (default 0)")
    run.add_argument("--trace", help="write a MAC event trace CSV to this path")

    sweep = sub.add_parser("sweep", help="density sweep CSV with 99%% confidence intervals")
    _add_common(sweep)
    sweep.add_argument(
        "--densities",
        default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0",
        help="comma-separated anchor densities",
    )
    sweep.add_argument("--reps", type=int, default=100, help="replications per cell")
    sweep.add_argument("--channels", default="freespace,shadowing")
    sweep.add_argument("--modes", default="lateration,bbox,pme")
    sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    dump = sub.add_parser("dump-topology", help="deployment CSV (node_id, role, x, y)")
    _add_common(dump)

    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config, _collect_overrides(args))
    if args.trace:
        from .mac import run_beacon_phase
        from .propagation import ShadowingField

        seed = config.rng_seed + args.rep
        deployment = deploy(config, rng_stream(seed, "deploy"))
        shadow = None
        if config.channel is ChannelKind.SHADOWING:
            shadow = ShadowingField.build(
                config.node_count, config.sigma_shadowing_db, rng_stream(seed, "shadowing")
            )
        trace: list = []
        run_beacon_phase(
            deployment, config.channel, shadow, config.radio, config.mac,
            rng_stream(seed, "mac"), trace=trace,
        )
        lines = ["time,event_kind,sender,receiver"]
        for t, kind, sender, receiver in trace:
            lines.append(f"{t:.9f},{kind},{sender},{'' if receiver is None else receiver}")
        _write_output("\n".join(lines) + "\n", args.trace)
    result = run_replication(config, args.rep)
    _write_output(replication_csv(result), args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config, _collect_overrides(args))
    try:
        densities = [float(part) for part in args.densities.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"invalid densities list {args.densities!r}") from None
    if not densities or any(not 0.0 <= d <= 1.0 for d in densities):
        raise ConfigError(f"densities must be in [0, 1], got {args.densities!r}")
    channels = _parse_list(args.channels, ChannelKind, "channel")
    modes = _parse_list(args.modes, ProtocolMode, "mode")
    rows = run_sweep(config, densities, args.reps, modes=modes, channels=channels, jobs=args.jobs)
    _write_output(sweep_csv(rows), args.out)
    return 0


def _cmd_dump_topology(args: argparse.Namespace) -> int:
    config = load_config(args.config, _collect_overrides(args))
    deployment = deploy(config, rng_stream(config.rng_seed, "deploy"))
    _write_output(topology_csv(deployment), args.out)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_dump_topology(args)
    except ConfigError as exc:
        print(f"wsnloc: configuration error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"wsnloc: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
