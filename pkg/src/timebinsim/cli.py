"""Command-line front end.

Each subcommand runs one named experiment and writes its artifacts into the
directory given by ``--out``: CSV data files plus a ``<command>.meta.json``
sidecar recording the resolved physical parameters and seed, so any result
can be regenerated bit-for-bit.  Files are written atomically (temp file +
rename), so a failed run never leaves partial output behind.

Exit codes: 0 success, 2 configuration or validation problem, 3 a
statistics-dependent result could not be computed from the events.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np
from numpy.random import SeedSequence

from .core import (ConfigError, InsufficientStatisticsError, PARAM_FIELDS,
                   PhysicalParams, ValidationError, load_params, validate,
                   write_csv)
from .dynamics import (expected_visibility, generate_state, sequence_for_pgen,
                       two_pulse_sequence, visibility_curve,
                       write_visibility_csv)
from .measurement import (calibrate_background_for_g2, fringe_scan, gate,
                          hbt_g2, reject_reset_light)
from .montecarlo import run
from .tomography import (bloch_of_state, direction_fidelity, fit_fringe,
                         qubit_phase, reconstruct, write_states_csv)
from .wdm import WdmSpec, recovery_report


def _write_atomic(path: str, writer) -> None:
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def _derived_seed(*entropy: int) -> int:
    return int(SeedSequence([int(e) for e in entropy]).generate_state(1, np.uint64)[0])


class _OutDir:
    """Atomic writer into the --out directory, tracking written files."""

    def __init__(self, root: str):
        os.makedirs(root, exist_ok=True)
        self.root = root
        self.written: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def write(self, name: str, writer) -> str:
        p = self.path(name)
        _write_atomic(p, writer)
        self.written.append(name)
        return p

    def sidecar(self, command: str, params: PhysicalParams, seed: int | None,
                options: dict) -> None:
        meta = {"command": command, "params": params.to_dict(), "seed": seed,
                "options": options, "files": sorted(self.written)}
        text = json.dumps(meta, sort_keys=True, indent=2) + "\n"

        def writer(p):
            with open(p, "w") as fh:
                fh.write(text)

        _write_atomic(self.path(f"{command}.meta.json"), writer)


def _resolve_params(args) -> PhysicalParams:
    params = load_params(args.config) if args.config else PhysicalParams()
    overrides = {}
    for item in args.param or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects NAME=VALUE, got {item!r}")
        try:
            overrides[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--param {name.strip()}: not a number: {value!r}") from None
    if overrides:
        params = PhysicalParams.from_dict({**params.to_dict(), **overrides})
        validate(params)
    return params


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers: {text!r}") from None


def _measure_visibility(p_gen: float, phase2: float, params: PhysicalParams,
                        n_trajectories: int, scan_points: int, seed: int):
    """One fringe scan plus fit at a drive/phase setpoint."""
    seq = sequence_for_pgen(p_gen, phase2=phase2)
    scan = fringe_scan(seq, np.linspace(0.0, 2.0 * np.pi, scan_points, endpoint=False),
                       params=params, n_trajectories=n_trajectories, seed=seed)
    return scan, fit_fringe(scan)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_visibility_sweep(args) -> int:
    params = _resolve_params(args)
    out = _OutDir(args.out)

    grid = np.linspace(args.p_min, args.p_max, args.points)
    t1_list = _parse_floats(args.t1)
    rows = visibility_curve(grid, t1_list, params)
    out.write("visibility_curve.csv", lambda p: write_visibility_csv(rows, p))

    mc_rows = []
    for k, p_gen in enumerate(np.linspace(max(args.p_min, 0.1), args.p_max,
                                          args.mc_points)):
        _, fit = _measure_visibility(float(p_gen), 0.0, params,
                                     args.trajectories, args.scan_points,
                                     _derived_seed(args.seed, k))
        mc_rows.append((float(p_gen), fit.visibility, fit.visibility_err,
                        expected_visibility(float(p_gen), params)))
    out.write("visibility_mc.csv", lambda p: write_csv(
        p, "p_gen,visibility,visibility_err,expected", mc_rows))

    out.sidecar("visibility-sweep", params, args.seed,
                {"p_min": args.p_min, "p_max": args.p_max, "points": args.points,
                 "t1_ps": t1_list, "mc_points": args.mc_points,
                 "trajectories": args.trajectories,
                 "scan_points": args.scan_points})
    print(f"wrote analytic curve ({len(rows)} rows) and {len(mc_rows)} "
          f"Monte-Carlo points to {args.out}")
    return 0


def cmd_phase_qubits(args) -> int:
    params = _resolve_params(args)
    out = _OutDir(args.out)
    programmed = (_parse_floats(args.phases) if args.phases
                  else list(np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)))

    ref_scan, reference = _measure_visibility(
        args.p_gen, 0.0, params, args.trajectories, args.scan_points,
        _derived_seed(args.seed, 0))
    out.write("fringe_reference.csv", ref_scan.to_csv)

    fit_rows, state_rows = [], []
    for k, delta in enumerate(programmed, start=1):
        scan, fit = _measure_visibility(
            args.p_gen, delta, params, args.trajectories, args.scan_points,
            _derived_seed(args.seed, k))
        out.write(f"fringe_{k:02d}.csv", scan.to_csv)
        recovered = qubit_phase(reference, fit)
        fit_rows.append((delta, recovered, fit.visibility, fit.visibility_err))

        # Populations from an interferometer-free acquisition, keeping only
        # the emitted photons (no reset flash, no background).
        seq = sequence_for_pgen(args.p_gen, phase2=delta)
        pop = run(seq, params, args.trajectories, _derived_seed(args.seed, k, 1))
        pop = pop.subset(pop.photon_mask)
        bins = pop.columns["bin_index"]
        p_e = float(np.sum(bins == 0)) / pop.n_trajectories
        p_l = float(np.sum(bins >= 1)) / pop.n_trajectories
        vec = reconstruct(p_e, p_l, fit.visibility, recovered)
        target = bloch_of_state(generate_state(seq, params))
        state_rows.append((vec, direction_fidelity(vec, target),
                           fit.visibility, recovered))

    out.write("fits.csv", lambda p: write_csv(
        p, "programmed_rad,recovered_rad,visibility,visibility_err", fit_rows))
    out.write("bloch.csv", lambda p: write_states_csv(state_rows, p))
    out.sidecar("phase-qubits", params, args.seed,
                {"p_gen": args.p_gen, "trajectories": args.trajectories,
                 "scan_points": args.scan_points, "phases": programmed})
    expected = expected_visibility(args.p_gen, params)
    print(f"wrote {len(programmed)} setpoints to {args.out} "
          f"(expected visibility {expected:.4f})")
    return 0


def cmd_wdm(args) -> int:
    params = _resolve_params(args)
    out = _OutDir(args.out)
    spec = WdmSpec.for_splitting(params.spin_splitting,
                                 locked_phase=args.locked_phase)
    report = recovery_report(spec, params, n_trajectories=args.trajectories,
                             seed=args.seed, fwhm_uev=args.fwhm,
                             extinction=args.extinction)
    out.write("recovery.csv", report.to_csv)
    out.sidecar("wdm", params, args.seed,
                {"trajectories": args.trajectories, "fwhm_uev": args.fwhm,
                 "extinction": args.extinction,
                 "locked_phase": args.locked_phase,
                 "red_detuning": spec.red_detuning,
                 "blue_detuning": spec.blue_detuning})
    for row in report.rows:
        print(f"{row.label:>5}: early {row.early_frac:.4f}  "
              f"late {row.late_frac:.4f}  ({row.transmitted} events)")
    return 0


def cmd_g2(args) -> int:
    params = _resolve_params(args)
    out = _OutDir(args.out)
    seq = two_pulse_sequence(scale=args.scale)
    calibrated = None
    if args.calibrate_g2 is not None:
        calibrated = calibrate_background_for_g2(
            seq, params, args.calibrate_g2,
            n_trajectories=args.trajectories,
            seed=_derived_seed(args.seed, 1))
        params = replace(params, background_rate=calibrated)
    elif args.background is not None:
        params = replace(params, background_rate=args.background)
        validate(params)
    stream = run(seq, params, args.trajectories, args.seed)
    prepared = gate(reject_reset_light(stream), 0.0,
                    params.window_ps(seq.n_bins))
    result = hbt_g2(prepared, window=args.window)
    out.write("g2.csv", result.to_csv)
    out.sidecar("g2", params, args.seed,
                {"trajectories": args.trajectories, "window": args.window,
                 "scale": args.scale, "calibrated_background": calibrated})
    mid = len(result.g2) // 2
    if calibrated is not None:
        print(f"calibrated background rate: {calibrated:.6f} per window")
    print(f"g2(0) = {result.zero_lag:.4f} +- {result.se[mid]:.4f} "
          f"({int(result.coincidences[mid])} zero-lag coincidences)")
    return 0


def cmd_simulate(args) -> int:
    params = _resolve_params(args)
    out = _OutDir(args.out)
    seq = sequence_for_pgen(args.p_gen, phase2=args.phase2)
    stream = run(seq, params, args.trajectories, args.seed)
    if args.binary:
        out.write("events.bin", stream.to_binary)
    else:
        out.write("events.csv", stream.to_csv)
    out.sidecar("simulate", params, args.seed,
                {"trajectories": args.trajectories, "p_gen": args.p_gen,
                 "phase2": args.phase2, "binary": bool(args.binary)})
    print(f"wrote {len(stream)} events from {args.trajectories} windows to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _param_table() -> str:
    lines = ["configuration keys (via --config FILE or --param NAME=VALUE):"]
    for name, (unit, desc) in PARAM_FIELDS.items():
        lines.append(f"  {name:<18} [{unit}] {desc}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timebinsim",
        description="Simulate and analyse spin-photon time-bin qubit generation.",
        epilog=_param_table(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_parser(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text, epilog=_param_table(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        return p

    def add_common(p, trajectories: int):
        p.add_argument("--config", help="physical-parameter file (name = value lines)")
        p.add_argument("--param", action="append", metavar="NAME=VALUE",
                       help="override a single physical parameter (repeatable)")
        p.add_argument("--seed", type=int, default=0, help="master RNG seed")
        p.add_argument("--trajectories", type=int, default=trajectories,
                       help="number of simulated pulse-sequence windows")
        p.add_argument("--out", required=True, help="output directory")

    p = add_parser("visibility-sweep",
                   "analytic + Monte-Carlo fringe visibility vs drive strength")
    add_common(p, trajectories=20_000)
    p.add_argument("--p-min", type=float, default=0.05)
    p.add_argument("--p-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=20,
                   help="points on the analytic curve")
    p.add_argument("--t1", default="250",
                   help="comma-separated radiative lifetimes in ps")
    p.add_argument("--mc-points", type=int, default=5,
                   help="Monte-Carlo check points across the sweep")
    p.add_argument("--scan-points", type=int, default=12,
                   help="interferometer setpoints per fringe scan")
    p.set_defaults(func=cmd_visibility_sweep)

    p = add_parser("phase-qubits",
                   "program qubit phases and read them back from fringes")
    add_common(p, trajectories=20_000)
    p.add_argument("--p-gen", type=float, default=1.0,
                   help="target generation probability")
    p.add_argument("--phases", help="comma-separated programmed phases in rad")
    p.add_argument("--scan-points", type=int, default=12,
                   help="interferometer setpoints per fringe scan")
    p.set_defaults(func=cmd_phase_qubits)

    p = add_parser("wdm", "two-colour bin demultiplexing report")
    add_common(p, trajectories=100_000)
    p.add_argument("--locked-phase", type=float, default=None,
                   help="lock the inter-laser phase to this value (rad)")
    p.add_argument("--fwhm", type=float, default=5.0,
                   help="recovery filter FWHM per pass (ueV)")
    p.add_argument("--extinction", type=float, default=1e-3,
                   help="filter out-of-band leakage floor")
    p.set_defaults(func=cmd_wdm)

    p = add_parser("g2", "pulsed intensity-correlation histogram")
    add_common(p, trajectories=200_000)
    p.add_argument("--background", type=float, default=None,
                   help="override the background rate per window")
    p.add_argument("--calibrate-g2", type=float, default=None, metavar="TARGET",
                   help="bisect the background rate to hit this g2(0) first")
    p.add_argument("--scale", type=float, default=1.0,
                   help="drive intensity scale (1.0 = pi/2 + pi)")
    p.add_argument("--window", type=int, default=5,
                   help="maximum period lag for the histogram")
    p.set_defaults(func=cmd_g2)

    p = add_parser("simulate", "dump raw photon events")
    add_common(p, trajectories=10_000)
    p.add_argument("--p-gen", type=float, default=1.0)
    p.add_argument("--phase2", type=float, default=0.0,
                   help="phase of the late-bin pulse (rad)")
    p.add_argument("--binary", action="store_true",
                   help="write fixed-width binary instead of CSV")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InsufficientStatisticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
