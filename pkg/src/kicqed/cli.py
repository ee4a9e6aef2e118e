"""Command-line front end: ``kicqed <subcommand> [options]``.

Exit status is 0 on success, 1 on a domain error (a JSON message on stderr) and 2
on a usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration, fitting, fock, readout, units
from .circuit import (
    circuit_modes,
    load_device,
    reduce_to_idealized,
    shipped_devices,
)
from .errors import KicqedError


def _clean(obj):
    """JSON-safe copy: numpy to builtins, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(doc, out: str | None) -> None:
    _emit(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n", out)


# --- argument types ----------------------------------------------------------

def _existing_file(value: str) -> str:
    if not Path(value).is_file():
        raise argparse.ArgumentTypeError(f"file not found: {value}")
    return value


def _device(value: str) -> str:
    p = Path(value)
    if p.is_file() or (p.parent == Path(".") and p.stem in shipped_devices()):
        return value
    raise argparse.ArgumentTypeError(f"no device file or shipped device named {value!r}")


def _flux_grid(value: str) -> np.ndarray:
    try:
        lo, hi, n = value.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI:N") from None
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)):
        raise argparse.ArgumentTypeError("N must be positive and bounds finite")
    return np.linspace(lo, hi, n)


def _positive_int(value: str) -> int:
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kicqed", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)

    dev = argparse.ArgumentParser(add_help=False)
    dev.add_argument("--device", type=_device, required=True, help="device JSON path or shipped name (q1..q14)")
    dev.add_argument("--delta-c-aF", type=float, default=0.0, help="shift C13 up and C23 down by this many aF")

    trunc = argparse.ArgumentParser(add_help=False)
    trunc.add_argument("--nR", type=_positive_int, default=15)
    trunc.add_argument("--nQ", type=_positive_int, default=30)
    trunc.add_argument("--guard-R", type=int, default=5, help="top resonator labels dropped")
    trunc.add_argument("--guard-Q", type=int, default=10, help="top qubit labels dropped")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", type=_existing_file, required=True)

    sub.add_parser("modes", parents=[common, dev], help="normal-mode decomposition")

    p = sub.add_parser("spectrum", parents=[common, dev, trunc], help="flux sweep of dressed transitions (CSV)")
    p.add_argument("--flux-grid", type=_flux_grid, default=_flux_grid("0:1:101"))

    p = sub.add_parser("chi", parents=[common, dev, trunc], help="dispersive shift at one flux")
    p.add_argument("--flux", type=float, default=0.5)

    p = sub.add_parser("idealized", parents=[common, dev, trunc], help="idealized-circuit parameters and comparison")
    p.add_argument("--flux", type=float, default=0.5)
    p.add_argument("--dk-grid", type=_flux_grid, default=_flux_grid("-1:1:11"), help="Dk sweep LO:HI:N in nH (write --dk-grid=-1:1:11 for negative LO)")

    p = sub.add_parser("fit", parents=[common, dev, trunc, data], help="fit circuit parameters to spectroscopy CSV")
    p.add_argument("--starts", type=_positive_int, default=1)
    p.add_argument("--max-evals", type=_positive_int, default=3000)

    p = sub.add_parser("jumps", parents=[common, data], help="GMM statistics of an IQ trace CSV")
    p.add_argument("--K", type=_positive_int, default=3)
    p.add_argument("--histogram", help="also write a 2-D IQ histogram CSV here")

    sub.add_parser("pipulse", parents=[common, data], help="fit a pi-pulse train (n, population) CSV")

    p = sub.add_parser("stark", parents=[common, data], help="AC-Stark slope and photon number")
    p.add_argument("--chi", type=float, required=True, help="dispersive shift in MHz")
    p.add_argument("--power", type=float, help="drive power at which to report nbar")
    p.add_argument("--intercept", action="store_true", help="fit an intercept as well")

    p = sub.add_parser("t1", parents=[common, dev, trunc], help="inductive-loss T1 <-> Q_ind")
    p.add_argument("--flux", type=float, default=0.5)
    p.add_argument("--temperature-mK", type=float, default=10.0)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--t1-us", type=float)
    g.add_argument("--qind", type=float)
    return ap


# --- subcommands -------------------------------------------------------------

def _spec(args):
    spec = load_device(args.device)
    return spec.with_delta_c(args.delta_c_aF) if args.delta_c_aF else spec


def _cfg(args) -> fock.FockConfig:
    return fock.FockConfig(nR=args.nR, nQ=args.nQ, guard_R=args.guard_R, guard_Q=args.guard_Q)


def cmd_modes(args):
    spec = _spec(args)
    m = circuit_modes(spec)
    _emit_json(
        {
            "name": spec.name,
            "omegas_rad_s": m.omegas,
            "frequencies_GHz": m.omegas / (2 * np.pi * units.GHz),
            "qubit_index": m.qubit_index,
            "readout_index": m.readout_index,
            "zero_index": m.zero_index,
            "spectator_indices": m.spectator_indices,
            "f_R_GHz": m.f_R,
            "f_Q_GHz": m.f_Q,
            "lambda_R": m.lambda_R,
            "lambda_Q": m.lambda_Q,
            "delta_C_aF": m.delta_C_aF,
            "S": m.S,
            "Sprime": m.Sprime,
        },
        args.out,
    )


SWEEP_COLUMNS = ("flux_phi0", "fQ01_GHz", "fQ02_GHz", "fR0_GHz", "fR1_GHz", "chi_MHz", "ambiguous")


def sweep_csv(rows) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for r in rows:
        vals = [r.flux_phi0, r.fQ01, r.fQ02, r.fR0, r.fR1, r.chi_MHz]
        lines.append(",".join(f"{v:.12g}" for v in vals) + f",{int(r.ambiguous)}")
    return "\n".join(lines) + "\n"


def cmd_spectrum(args):
    rows = fock.flux_sweep(_spec(args), args.flux_grid, _cfg(args), threads=args.threads)
    _emit(sweep_csv(rows), args.out)


def cmd_chi(args):
    spec, cfg = _spec(args), _cfg(args)
    row = fock.transitions(circuit_modes(spec), spec.EJ, args.flux, cfg)
    _emit_json(
        {
            "name": spec.name,
            "flux_phi0": args.flux,
            "chi_MHz": fock.dispersive_shift(spec, args.flux, cfg),
            "fQ01_GHz": row.fQ01,
            "fR0_GHz": row.fR0,
            "ambiguous": row.ambiguous,
            "nR": cfg.nR,
            "nQ": cfg.nQ,
        },
        args.out,
    )


def cmd_idealized(args):
    spec = _spec(args)
    params = reduce_to_idealized(spec)
    table = fock.compare_models(spec.symmetrized(), args.dk_grid, args.flux, _cfg(args))
    _emit_json(
        {
            "name": spec.name,
            "params": dataclasses.asdict(params),
            "flux_phi0": args.flux,
            "comparison": [dataclasses.asdict(r) for r in table],
        },
        args.out,
    )


def cmd_fit(args):
    spec = _spec(args)
    problem = fitting.FitProblem(
        data=fitting.read_spectroscopy_csv(args.data),
        template=spec,
        theta0=(spec.Lr, spec.Lq, spec.Dk, spec.EJ, spec.CJ),
        cfg=_cfg(args),
        max_evals=args.max_evals,
        n_starts=args.starts,
        seed=args.seed,
        threads=args.threads,
    )
    res = fitting.fit_parameters(problem)
    doc = res.to_json()
    doc["failures"] = res.failures
    _emit_json(doc, args.out)


def cmd_jumps(args):
    _, X = readout.read_trace_csv(args.data)
    stats, model = readout.analyze_trace(X, K=args.K, seed=args.seed)
    if args.histogram:
        H, ei, eq = readout.iq_histogram(X)
        ci, cq = (ei[1:] + ei[:-1]) / 2, (eq[1:] + eq[:-1]) / 2
        with open(args.histogram, "w") as fh:
            fh.write("I,Q,count\n")
            for a, i in enumerate(ci):
                for b, q in enumerate(cq):
                    fh.write(f"{i:.12g},{q:.12g},{int(H[a, b])}\n")
    _emit_json(stats.to_json(model), args.out)


def cmd_pipulse(args):
    fit = calibration.fit_pipulse(calibration.read_pipulse_csv(args.data))
    _emit_json(dataclasses.asdict(fit), args.out)


def cmd_stark(args):
    fit = calibration.fit_stark(calibration.read_stark_csv(args.data), intercept=args.intercept)
    doc = dataclasses.asdict(fit)
    doc["chi_MHz"] = args.chi
    doc["photons_per_power"] = calibration.photons_from_power(fit.slope, args.chi, 1.0)
    if args.power is not None:
        doc["power"] = args.power
        doc["nbar"] = calibration.photons_from_power(fit.slope, args.chi, args.power)
    _emit_json(doc, args.out)


def cmd_t1(args):
    spec, cfg = _spec(args), _cfg(args)
    modes = circuit_modes(spec)
    EL = units.inductive_energy_GHz(spec.Lq)
    fq = fock.transitions(modes, spec.EJ, args.flux, cfg).fQ01
    matel = fock.flux_matrix_element(spec, args.flux, cfg, modes=modes)
    T = args.temperature_mK * 1e-3
    doc = {"name": spec.name, "flux_phi0": args.flux, "E_L_GHz": EL, "fQ01_GHz": fq,
           "matrix_element": matel, "temperature_K": T}
    if args.t1_us is not None:
        doc["T1_us"] = args.t1_us
        doc["Q_ind"] = fock.q_ind_from_t1(args.t1_us * 1e-6, EL, matel, fq, T)
    else:
        doc["Q_ind"] = args.qind
        doc["T1_us"] = fock.inductive_t1(EL, args.qind, matel, fq, T) * 1e6
    _emit_json(doc, args.out)


COMMANDS = {
    "modes": cmd_modes,
    "spectrum": cmd_spectrum,
    "chi": cmd_chi,
    "idealized": cmd_idealized,
    "fit": cmd_fit,
    "jumps": cmd_jumps,
    "pipulse": cmd_pipulse,
    "stark": cmd_stark,
    "t1": cmd_t1,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (KicqedError, ValueError) as exc:
        msg = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(msg) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
