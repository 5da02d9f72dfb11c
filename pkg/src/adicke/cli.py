"""Command-line drivers: ``adicke {spectrum,spacing,rstat,otoc,overlap,sweep}``.

Options come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then explicit flags.  Exit codes: 0 success, 1 usage
error, 2 convergence failure, 3 checkpoint/config mismatch on resume.
"""
from __future__ import annotations

import argparse
import logging
import shlex
import sys
from pathlib import Path

import numpy as np

from adicke import diagnostics as dg
from adicke.io import fmt, write_csv, write_meta
from adicke.model import AUTO, ModelParams, build_hamiltonian, enumerate_basis, observable_matrix
from adicke.otoc import TailWeightError, otoc_f, thermal_ensemble, certified_thermal_spectrum
from adicke.overlap import hose_taylor_fraction, max_overlap, shared_cutoff_pair
from adicke.spectra import ConvergenceError, EigensolverError, SpectralData, converge_cutoff, diagonalize
from adicke.sweep import COLUMNS, MASK_RADIUS, Axis, ResumeMismatch, SweepConfig, annotations, run_sweep

log = logging.getLogger("adicke")

EXIT_USAGE, EXIT_CONVERGENCE, EXIT_RESUME = 1, 2, 3


class UsageError(Exception):
    pass


def _parity(text):
    table = {"+": 1, "+1": 1, "1": 1, "-": -1, "-1": -1}
    if text not in table:
        raise ValueError(f"parity must be + or -, got {text!r}")
    return table[text]


def _nmax(text):
    if text == AUTO:
        return AUTO
    value = int(text)
    if value < 0:
        raise ValueError("nmax must be >= 0")
    return value


def _window(text):
    lo, hi = (int(x) for x in text.split(":"))
    dg.LevelWindow(lo, hi)  # validates the bounds
    return (lo, hi)


def _grid(text):
    parts = text.split(",")
    if len(parts) > 2:
        raise ValueError("grid takes one or two MIN:MAX:STEPS specs")
    axes = [Axis.parse(p) for p in parts]
    return (axes[0], axes[-1])


def _times(text):
    if ":" in text:
        lo, hi, steps = text.split(":")
        return tuple(float(x) for x in np.linspace(float(lo), float(hi), int(steps)))
    return tuple(float(x) for x in text.split(","))


def _diagnostics(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _optional_float(text):
    return None if text in ("", "none", "None") else float(text)


def _flag(text):
    if isinstance(text, bool):
        return text
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# name -> (parser, default, help); config-file keys use the same names.
OPTIONS = {
    "omega": (float, 1.0, "field frequency"),
    "omega0": (float, 1.0, "atomic level splitting"),
    "g1": (float, 0.0, "co-rotating coupling"),
    "g2": (float, 0.0, "counter-rotating coupling"),
    "j": (float, 10.0, "pseudospin length (half-integer)"),
    "nmax": (_nmax, AUTO, "Fock cutoff, or 'auto' for the convergence protocol"),
    "parity": (_parity, 1, "parity sector, + or -"),
    "levels": (int, 1000, "number of converged low-lying levels"),
    "tol": (float, 1e-8, "cutoff convergence tolerance on the levels"),
    "ceiling": (int, 5000, "largest Fock cutoff tried"),
    "window": (_window, (200, 1000), "level window LO:HI (indices, HI exclusive)"),
    "lambda": (_optional_float, None, "upper energy ceiling for the window"),
    "bins": (int, 30, "histogram bin count over [0, 4]"),
    "unfold_local": (int, 0, "local unfolding half-width in spacings (0 = global mean)"),
    "beta": (float, 0.1, "inverse temperature"),
    "time": (_times, (100.0,), "OTOC times: T, T1,T2,... or MIN:MAX:STEPS"),
    "time_window": (float, 0.0, "half-width of the time average around each sweep time"),
    "shift": (float, 100.0, "V = W = a^dag a + shift"),
    "ref_g1": (float, 0.0, "reference (integrable) g1 for overlap"),
    "ref_g2": (float, 0.0, "reference (integrable) g2 for overlap"),
    "threshold": (float, 0.5, "overlap threshold of the Hose-Taylor fraction"),
    "grid": (_grid, (Axis(0.02, 1.0, 21), Axis(0.02, 1.0, 21)), "MIN:MAX:STEPS[,MIN:MAX:STEPS] for g1[,g2]"),
    "diagnostics": (_diagnostics, ("r",), "sweep diagnostics: comma list of r, otoc, order"),
    "mask_radius": (float, MASK_RADIUS, "radius of the masked lower-left corner (annotation only)"),
    "threads": (int, 1, "worker processes for the sweep"),
    "out": (str, ".", "output directory"),
    "checkpoint": (str, None, "sweep checkpoint path (default OUT/sweep.checkpoint.jsonl)"),
    "resume": (_flag, False, "resume a sweep from its checkpoint"),
    "stop_after": (int, None, "evaluate at most this many pending sweep cells, then stop"),
}

COMMAND_KEYS = {
    "spectrum": ["omega", "omega0", "g1", "g2", "j", "nmax", "parity", "levels", "tol", "ceiling"],
    "spacing": ["omega", "omega0", "g1", "g2", "j", "nmax", "parity", "tol", "ceiling", "window", "lambda",
                "bins", "unfold_local"],
    "rstat": ["omega", "omega0", "g1", "g2", "j", "nmax", "parity", "tol", "ceiling", "window", "lambda"],
    "otoc": ["omega", "omega0", "g1", "g2", "j", "nmax", "tol", "ceiling", "beta", "time", "shift"],
    "overlap": ["omega", "omega0", "g1", "g2", "j", "nmax", "parity", "levels", "tol", "ceiling",
                "ref_g1", "ref_g2", "threshold"],
    "sweep": ["omega", "omega0", "j", "tol", "ceiling", "window", "lambda", "beta", "time", "time_window",
              "shift", "grid", "diagnostics", "mask_radius", "threads", "checkpoint", "resume", "stop_after"],
}
# Keys that do not change the numbers and stay out of output headers.
RUNTIME_KEYS = {"out", "threads", "checkpoint", "resume", "stop_after"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adicke", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command, keys in COMMAND_KEYS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", help="file of key = value lines")
        for key in keys + ["out"]:
            _, default, help_text = OPTIONS[key]
            flag = "--" + key.replace("_", "-")
            if key == "resume":
                p.add_argument(flag, action="store_const", const="true", default=None, help=help_text)
            else:
                p.add_argument(flag, dest=key, default=None, metavar=key.upper(),
                               help=f"{help_text} (default: {_show(default)})")
    return parser


def _show(value):
    if isinstance(value, tuple) and value and isinstance(value[0], Axis):
        return ",".join(f"{a.lo}:{a.hi}:{a.steps}" for a in value)
    if isinstance(value, tuple):
        return ":".join(str(v) for v in value) if len(value) == 2 and all(isinstance(v, int) for v in value) \
            else ",".join(str(v) for v in value)
    return value


def read_config_file(path) -> dict[str, str]:
    values = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def resolve_options(command: str, args: argparse.Namespace) -> dict:
    allowed = set(COMMAND_KEYS[command]) | {"out"}
    raw = {}
    if args.config:
        for key, value in read_config_file(args.config).items():
            if key not in allowed:
                raise UsageError(f"key {key!r} does not apply to '{command}'")
            raw[key] = value
    for key in allowed:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    opts = {}
    for key in COMMAND_KEYS[command] + ["out"]:
        parse, default, _ = OPTIONS[key]
        if key in raw:
            try:
                opts[key] = parse(raw[key])
            except (ValueError, TypeError) as exc:
                raise UsageError(f"bad value for {key}: {raw[key]!r} ({exc})") from exc
        else:
            opts[key] = default
    return opts


def config_text(opts: dict) -> dict:
    """Options rendered in config-file syntax, for headers and sidecars."""
    out = {}
    for key, value in opts.items():
        if key in RUNTIME_KEYS or key == "out":
            continue
        if key == "parity":
            out[key] = "+" if value == 1 else "-"
        elif key == "window":
            out[key] = f"{value[0]}:{value[1]}"
        elif key == "grid":
            out[key] = ",".join(f"{fmt(a.lo)}:{fmt(a.hi)}:{a.steps}" for a in value)
        elif key in ("time", "diagnostics"):
            out[key] = ",".join(fmt(v) for v in value)
        elif value is None:
            out[key] = "none"
        else:
            out[key] = fmt(value) if not isinstance(value, str) else value
    return out


def _command_line(command: str, cfg: dict) -> str:
    parts = ["adicke", command]
    for key, value in cfg.items():
        parts += ["--" + key.replace("_", "-"), value]
    return " ".join(shlex.quote(p) for p in parts)


def _params(opts, g1=None, g2=None) -> ModelParams:
    return ModelParams(opts["omega"], opts["omega0"], opts["g1"] if g1 is None else g1,
                       opts["g2"] if g2 is None else g2, opts["j"], opts["nmax"])


def _spectrum(params: ModelParams, parity: int, k: int, opts) -> SpectralData:
    if params.auto_cutoff:
        return converge_cutoff(params, parity, k, opts["tol"], opts["ceiling"])
    spec = diagonalize(build_hamiltonian(enumerate_basis(params, parity)))
    # An explicit cutoff is taken at face value: every level counts as usable.
    return SpectralData(params, parity, spec.eigenvalues, converged_count=len(spec))


def _emit(command, opts, columns, rows, meta):
    out = Path(opts["out"])
    cfg = config_text(opts)
    meta = dict(meta, command=_command_line(command, cfg), config=cfg)
    csv_path = write_csv(out / f"{command}.csv", command, cfg, columns, rows)
    write_meta(out / f"{command}.meta.json", meta)
    return csv_path


def cmd_spectrum(opts):
    params = _params(opts)
    spec = _spectrum(params, opts["parity"], opts["levels"], opts)
    count = min(opts["levels"], len(spec))
    rows = [(i, float(e)) for i, e in enumerate(spec.eigenvalues[:count])]
    return _emit("spectrum", opts, ["index", "energy"], rows,
                 {"n_max": spec.params.n_max, "converged_count": spec.converged_count,
                  "certified": params.auto_cutoff, "tolerance": opts["tol"]})


def _windowed(opts):
    lo, hi = opts["window"]
    params = _params(opts)
    spec = _spectrum(params, opts["parity"], hi, opts)
    return params, spec, dg.LevelWindow(lo, hi, opts["lambda"])


def cmd_spacing(opts):
    params, spec, window = _windowed(opts)
    series = dg.spacing_series(spec, window, opts["unfold_local"] or None)
    hist = dg.histogram(series, bins=opts["bins"])
    centers = hist.centers
    rows = [(float(a), float(b), int(c), float(d), float(dg.reference_pdf("poisson", x)),
             float(dg.reference_pdf("wigner_dyson", x)))
            for a, b, c, d, x in zip(hist.edges[:-1], hist.edges[1:], hist.counts, hist.density, centers)]
    return _emit("spacing", opts, ["bin_lo", "bin_hi", "count", "density", "poisson", "wigner_dyson"], rows,
                 {"n_max": spec.params.n_max, "spacings": len(series), "ks": dg.ks_distances(series),
                  "window": list(opts["window"]), "lambda": opts["lambda"], "tolerance": opts["tol"],
                  "certified": params.auto_cutoff})


def cmd_rstat(opts):
    params, spec, window = _windowed(opts)
    res = dg.r_statistic(spec, window)
    lo, hi = opts["window"]
    row = (params.g1, params.g2, params.j, spec.params.n_max, lo, hi, res.count, res.zero_spacings, res.mean)
    return _emit("rstat", opts, ["g1", "g2", "j", "n_max", "lo", "hi", "count", "zero_spacings", "r_mean"], [row],
                 {"n_max": spec.params.n_max, "r_mean": res.mean, "zero_spacings": res.zero_spacings,
                  "window": [lo, hi], "lambda": opts["lambda"], "tolerance": opts["tol"],
                  "references": {"poisson": dg.POISSON_R, "goe": dg.GOE_R}, "certified": params.auto_cutoff})


def cmd_otoc(opts):
    params = _params(opts)
    if params.auto_cutoff:
        spec, ens = certified_thermal_spectrum(params, opts["beta"], tol=opts["tol"], ceiling=opts["ceiling"])
    else:
        full = diagonalize(build_hamiltonian(enumerate_basis(params, 1)), want_vectors=True)
        spec = SpectralData(params, 1, full.eigenvalues, full.eigenvectors, converged_count=len(full))
        ens = thermal_ensemble(spec, opts["beta"])
    v = observable_matrix(enumerate_basis(spec.params, 1), "number_plus_shift", opts["shift"])
    series = otoc_f(spec, ens, v, None, opts["time"])
    rows = list(zip(series.times.tolist(), series.F.tolist(), series.deficit.tolist()))
    meta = dict(series.metadata, n_max=spec.params.n_max, beta=opts["beta"], shift=opts["shift"],
                observable="W = V = a^dag a + shift", certified=params.auto_cutoff, tolerance=opts["tol"])
    return _emit("otoc", opts, ["t", "F", "deficit"], rows, meta)


def cmd_overlap(opts):
    target = _params(opts)
    reference = _params(opts, opts["ref_g1"], opts["ref_g2"])
    ref, tgt = shared_cutoff_pair(reference, target, opts["levels"], opts["parity"], opts["tol"], opts["ceiling"])
    res = max_overlap(ref, tgt)
    rows = [(i, float(e), float(m), int(g)) for i, (e, m, g) in
            enumerate(zip(res.target_energies, res.max_overlap, res.eigenspace_index))]
    return _emit("overlap", opts, ["state_index", "target_energy", "max_overlap", "eigenspace_index"], rows,
                 {"n_max": tgt.params.n_max, "degeneracy_tol": res.degeneracy_tol,
                  "reference_eigenspaces": res.n_eigenspaces, "grouping": "reference eigenspaces",
                  "hose_taylor_fraction": hose_taylor_fraction(res, opts["threshold"]),
                  "threshold": opts["threshold"],
                  "completeness_error": float(np.max(np.abs(res.completeness - 1))) if len(rows) else 0.0})


def sweep_config(opts) -> SweepConfig:
    g1_axis, g2_axis = opts["grid"]
    times = opts["time"]
    if len(times) != 1:
        raise UsageError("sweep takes a single --time")
    return SweepConfig(g1_axis, g2_axis, opts["omega"], opts["omega0"], opts["j"], opts["beta"], times[0],
                       opts["shift"], opts["time_window"], tuple(opts["window"]), opts["lambda"],
                       tuple(opts["diagnostics"]), opts["tol"], opts["ceiling"])


def cmd_sweep(opts):
    try:
        cfg = sweep_config(opts)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(opts["out"])
    checkpoint = Path(opts["checkpoint"]) if opts["checkpoint"] else out / "sweep.checkpoint.jsonl"

    def progress(res):
        log.info("cell (%d,%d) g1=%.4g g2=%.4g %s", res.i, res.k, res.g1, res.g2, res.status)

    results, complete = run_sweep(cfg, checkpoint, opts["threads"], opts["resume"], opts["stop_after"], progress)
    if not complete:
        print(f"sweep stopped with {len(results)}/{len(cfg.cells())} cells done; resume with --resume",
              file=sys.stderr)
        return None
    failed = [{"g1": r.g1, "g2": r.g2, "error": r.error} for r in results if r.status != "done"]
    meta = {"annotations": annotations(cfg, opts["mask_radius"]), "failed_cells": failed,
            "cells": len(results), "trace": "positive-parity sector"}
    return _emit("sweep", opts, COLUMNS, [r.row(cfg) for r in results], meta)


COMMANDS = {"spectrum": cmd_spectrum, "spacing": cmd_spacing, "rstat": cmd_rstat, "otoc": cmd_otoc,
            "overlap": cmd_overlap, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        opts = resolve_options(args.command, args)
        COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"adicke: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, TailWeightError, EigensolverError) as exc:
        print(f"adicke: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ResumeMismatch as exc:
        print(f"adicke: {exc}", file=sys.stderr)
        return EXIT_RESUME
    except (ValueError, OSError) as exc:
        print(f"adicke: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
