"""Command-line front end: one subcommand per reproduced dataset."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    default_sweep_angles,
    malus_sweep,
    pattern_stream,
    patterning_stats,
    slot_histogram,
)
from .config import ExperimentConfig, config_from_dict, config_to_dict, load_config, validate
from .engine import qber_from_table, run_montecarlo, run_windows, segment_blocks
from .errors import ConfigError
from .optics import optical_response, theta_for_ratio
from .outputs import RunManifest, write_dsv, write_json
from .security.decoy import SourceParams
from .security.keyrate import finite_key_report
from .security.optimize import DecoyGrid, optimize_decoy

log = logging.getLogger("modqkd")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

PATTERN_LENGTH = 1024
PATTERNING_RATIO = 0.30
DEFAULT_THETAS = (0.0, math.pi / 24, math.pi / 12, math.pi / 8, math.pi / 6, math.pi / 4)
COARSE_GRID = DecoyGrid(
    mu=(0.4, 0.6, 0.8), nu_ratio=(0.2, 0.3, 0.4), p_mu=(0.6, 0.8), p_z=(0.5, 0.9)
)


def _sub_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, dtype=np.uint64)[0])


# -- commands: each returns the written files -------------------------------


def run_response(config: ExperimentConfig, args: dict, out: Path) -> list[Path]:
    thetas = args.get("thetas") or list(DEFAULT_THETAS)
    points = int(args.get("points") or 801)
    if points < 3:
        raise ConfigError([("points", "phase grid needs at least 3 points")])
    if any(not math.isfinite(t) for t in thetas):
        raise ConfigError([("thetas", "angles must be finite")])
    phase = np.linspace(-2 * math.pi, 2 * math.pi, points)
    cols = ["delta_phi"] + [f"theta={t!r}" for t in thetas]
    rows = (
        [phase[i]] + [float(optical_response(phase[i], t)) for t in thetas] for i in range(points)
    )
    return [
        write_dsv(
            out / "optical_response.tsv",
            ["optical response of the intensity modulator vs applied phase, one column per polarizer angle"],
            cols,
            rows,
        )
    ]


def run_malus(config: ExperimentConfig, args: dict, out: Path) -> list[Path]:
    angles = args.get("angles") or default_sweep_angles()
    pulses = int(args.get("pulses") or 10**6)
    res = malus_sweep(angles, pulses, config, seed=config.seed)
    rows = [
        (p.theta, p.predicted, p.ratio, p.ratio_err, p.deviation, p.z_score, p.raw_ratio, p.detections)
        for p in res.points
    ]
    return [
        write_dsv(
            out / "intensity_ratio_sweep.tsv",
            [
                "decoy/signal intensity ratio vs polarizer angle: Monte Carlo measurement and tan^2(theta - pi/4)",
                f"pulses per angle: {pulses}",
            ],
            ["theta", "predicted", "measured", "measured_err", "deviation", "z_score", "raw_detection_ratio", "detections"],
            rows,
        )
    ]


def run_patterning(config: ExperimentConfig, args: dict, out: Path) -> list[Path]:
    pattern = pattern_stream(PATTERN_LENGTH, config, _sub_seed(config.seed, 1))
    result = run_montecarlo(config, config.n_pulses, _sub_seed(config.seed, 2), pattern=pattern)
    report = patterning_stats(result.records)
    window = int(args.get("window") or 50)
    hist = slot_histogram(result.records, window=window, period=PATTERN_LENGTH, start=0)
    files = [
        write_dsv(
            out / "patterning_table.tsv",
            [
                "average normalized intensity c and relative deviation d per pulse transition",
                "d is reported as a fraction and in percent",
                f"modulator mode: {config.transmitter.modulator_mode.value}, "
                f"settle fraction: {config.transmitter.driver.settle_fraction!r}, slots: {config.n_pulses}",
            ],
            ["transition", "slots", "mean_detections", "c", "c_err", "d", "d_err", "d_percent", "d_err_percent"],
            [
                (e.label, e.n_slots, e.mean, e.c, e.c_err, e.d, e.d_err, e.d_percent, e.d_err_percent)
                for e in report.entries
            ],
        ),
        write_dsv(
            out / "slot_histogram.tsv",
            [
                f"detection probability per pattern slot over {hist.repetitions} repetitions with 1 sigma",
                f"class levels (signal, decoy): {hist.level[0]!r}, {hist.level[1]!r}; 2 sigma spread: {hist.band[0]!r}, {hist.band[1]!r}",
            ],
            ["slot", "intensity_class", "mean", "sigma"],
            hist.rows(),
        ),
    ]
    files.append(
        write_json(
            out / "patterning_report.json",
            {
                "class_mean": list(report.class_mean),
                "max_abs_d": report.max_abs_d,
                "squash_events": result.squash_events,
                "transitions": {
                    e.label: {"slots": e.n_slots, "c": e.c, "c_err": e.c_err, "d": e.d, "d_err": e.d_err}
                    for e in report.entries
                },
            },
        )
    )
    return files


def _safe_ratio(m: float, n: float) -> float:
    return m / n if n else math.nan


def run_qkd(config: ExperimentConfig, args: dict, out: Path) -> list[Path]:
    window = float(args.get("window_s") or 1.0)
    if not window > 0:
        raise ConfigError([("window_s", "must be > 0")])
    windows = run_windows(config, config.duration_s, window, _sub_seed(config.seed, 1))
    blocks = segment_blocks(windows, config.security.block_bits, _sub_seed(config.seed, 2))
    source = SourceParams.from_transmitter(config.transmitter)

    win_rows, t = [], 0.0
    for i, w in enumerate(windows):
        nz, mz = (float(x.sum()) for x in w.basis_counts("Z"))
        nx, mx = (float(x.sum()) for x in w.basis_counts("X"))
        win_rows.append((i, t, w.duration, w.total_detections, int(nz), _safe_ratio(mz, nz), int(nx), _safe_ratio(mx, nx)))
        t += w.duration

    files = [
        write_dsv(
            out / "qkd_windows.tsv",
            ["QBER time series of the aggregate run, one row per acquisition window"],
            ["window", "t_start", "duration", "detections", "n_z", "qber_z", "n_x", "qber_x"],
            win_rows,
        )
    ]
    block_rows, reports, t = [], [], 0.0
    for i, b in enumerate(blocks):
        r = finite_key_report(b, source, config.security)
        reports.append(r)
        block_rows.append((i, t, r.t, r.n_z, r.qber_z, r.qber_x, r.s0, r.s1, r.phi_z, r.skr, r.skr_asymptotic))
        files.append(write_json(out / f"block_{i:03d}_report.json", r.to_dict()))
        t += b.duration
    files.append(
        write_dsv(
            out / "qkd_blocks.tsv",
            [
                "finite-key secret key rate per key block",
                f"block size: {config.security.block_bits} sifted Z bits; trailing partial block discarded",
            ],
            ["block", "t_start", "duration", "n_z", "qber_z", "qber_x", "s0", "s1", "phi_z", "skr", "skr_asymptotic"],
            block_rows,
        )
    )
    total = windows[0]
    for w in windows[1:]:
        total = total + w
    try:
        q = qber_from_table(total)
        qber = {"qber_z": q.q_z, "qber_z_err": q.q_z_err, "qber_x": q.q_x, "qber_x_err": q.q_x_err}
    except ValueError:
        qber = {"qber_z": math.nan, "qber_x": math.nan}
    tx = config.transmitter
    summary = {
        "duration_s": total.duration,
        "detection_rate": total.total_detections / total.duration,
        "emitted_photon_rate": (tx.p_mu * tx.mu + tx.p_nu * tx.decoy_mean) * tx.rep_rate,
        "blocks": len(blocks),
        "skr_mean": float(np.mean([r.skr for r in reports])) if reports else 0.0,
        "skr_asymptotic_mean": float(np.mean([r.skr_asymptotic for r in reports])) if reports else 0.0,
        **qber,
    }
    files.append(write_json(out / "qkd_summary.json", summary))
    return files


def run_optimize(config: ExperimentConfig, args: dict, out: Path) -> list[Path]:
    losses = args.get("losses") or [30.0, 40.0, 50.0, 60.0]
    grid = COARSE_GRID if args.get("coarse") else DecoyGrid()
    res = optimize_decoy(losses, config, grid)
    files = [
        write_dsv(
            out / "skr_surface.tsv",
            ["finite-key rate per block over the source-parameter grid at each total loss"],
            ["loss_db", "mu", "nu_ratio", "p_mu", "p_z", "skr"],
            ((p.loss_db, p.mu, p.nu_ratio, p.p_mu, p.p_z, p.skr) for p in res.surface),
        )
    ]
    rows = []
    for loss in res.losses:
        b = res.best(loss)
        try:
            at = res.best(loss, PATTERNING_RATIO).skr
        except KeyError:
            at = math.nan
        rows.append((loss, b.mu, b.nu_ratio, b.p_mu, b.p_z, b.skr, at, _safe_ratio(at, b.skr)))
    files.append(
        write_dsv(
            out / "decoy_optimum.tsv",
            ["grid optimum per total loss and the best rate with the decoy/signal ratio fixed at 0.30"],
            ["loss_db", "mu", "nu_ratio", "p_mu", "p_z", "skr", "skr_at_ratio_0.30", "relative"],
            rows,
        )
    )
    return files


COMMANDS = {
    "response": run_response,
    "malus": run_malus,
    "patterning": run_patterning,
    "qkd": run_qkd,
    "optimize": run_optimize,
}


# -- argument handling --------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment configuration")
    p.add_argument("--seed", type=int, help="64-bit unsigned seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--loss-db", type=float, help="channel loss in dB")
    p.add_argument("--theta", type=float, help="intensity-modulator polarizer angle (rad)")
    p.add_argument("--mode", choices=["stationary", "quadrature"], help="modulator operating point")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modqkd", description="Decoy-state BB84 source simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("response", help="optical response curves")
    _common(p)
    p.add_argument("--thetas", type=float, nargs="+")
    p.add_argument("--points", type=int, default=801)

    p = sub.add_parser("malus", help="intensity-ratio sweep over polarizer angles")
    _common(p)
    p.add_argument("--angles", type=float, nargs="+")
    p.add_argument("--pulses", type=int, default=10**6, help="pulses per angle")

    p = sub.add_parser("patterning", help="pulse-to-pulse patterning statistics")
    _common(p)
    p.add_argument("--pulses", type=int, help="slots to simulate")
    p.add_argument("--settle-fraction", type=float)
    p.add_argument("--window", type=int, default=50)

    p = sub.add_parser("qkd", help="aggregate QKD run with per-block finite-key rates")
    _common(p)
    p.add_argument("--duration-s", type=float)
    p.add_argument("--window-s", type=float, default=1.0)

    p = sub.add_parser("optimize", help="decoy-parameter grid search")
    _common(p)
    p.add_argument("--losses", type=float, nargs="+")
    p.add_argument("--coarse", action="store_true", help="small grid for quick checks")

    p = sub.add_parser("rerun", help="repeat a run from its manifest and compare outputs")
    p.add_argument("manifest", type=Path, help="manifest file or run directory")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


_COMMAND_ARGS = {
    "response": ("thetas", "points"),
    "malus": ("angles", "pulses"),
    "patterning": ("window",),
    "qkd": ("window_s",),
    "optimize": ("losses", "coarse"),
}


def _effective_config(ns: argparse.Namespace) -> ExperimentConfig:
    config = load_config(ns.config) if ns.config else ExperimentConfig()
    tx, top = {}, {}
    if ns.seed is not None:
        top["seed"] = ns.seed
    if ns.loss_db is not None:
        top["channel"] = {"loss_db": ns.loss_db}
    if ns.theta is not None:
        tx["theta"] = ns.theta
    if ns.mode is not None:
        tx["modulator_mode"] = ns.mode
    if getattr(ns, "settle_fraction", None) is not None:
        tx["driver"] = {"settle_fraction": ns.settle_fraction}
    if getattr(ns, "duration_s", None) is not None:
        top["duration_s"] = ns.duration_s
    if ns.command == "patterning":
        if ns.pulses is not None:
            top["n_pulses"] = ns.pulses
        if ns.theta is None and config.transmitter.theta is None:
            # the patterning measurement runs with the polarizer set for a 0.30 ratio
            tx["theta"] = theta_for_ratio(PATTERNING_RATIO)
    if tx:
        top["transmitter"] = tx
    config = config.with_updates(**top)
    # round trip so the manifest snapshot is exactly what runs
    config = config_from_dict(config_to_dict(config))
    validate(config)
    return config


def execute(command: str, config: ExperimentConfig, arguments: dict, out: Path) -> RunManifest:
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command, arguments, config_to_dict(config), config.seed, __version__)
    files = COMMANDS[command](config, arguments, out)
    manifest.record(out, files)
    manifest.write(out)
    return manifest


def _rerun(ns: argparse.Namespace) -> int:
    old = RunManifest.load(ns.manifest)
    config = config_from_dict(old.config)
    new = execute(old.command, config, old.arguments, ns.out)
    mismatched = sorted(
        name for name in set(old.outputs) | set(new.outputs) if old.outputs.get(name) != new.outputs.get(name)
    )
    if mismatched:
        print("outputs differ: " + ", ".join(mismatched), file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{len(new.outputs)} outputs identical")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if ns.command == "rerun":
            return _rerun(ns)
        config = _effective_config(ns)
        arguments = {k: getattr(ns, k) for k in _COMMAND_ARGS[ns.command]}
        manifest = execute(ns.command, config, arguments, ns.out)
        for name in manifest.outputs:
            print(ns.out / name)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
