"""Command-line front end.

Subcommands
-----------
iterate                 run one protocol and write the per-iteration trace
sweep                   long-format table over an input-intensity grid
predict                 closed-form asymptotics, thresholds, bounds
sample                  simulate a homodyne batch of a protocol output
reconstruct             maximum-likelihood inversion of a stored batch
sample-and-reconstruct  the full chain, with Monte Carlo error bars

Every CSV starts with ``#``-prefixed header lines recording the resolved
configuration, seeds, truncation settings and tool version, so a file
can be regenerated byte-identically from its own header.  Exit codes:
0 success, 1 sweep finished with flagged points, 2 configuration error,
3 vanishing heralding success, 4 truncation cap saturated.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .errors import ReconstructionError, VanishingSuccessError
from .homodyne import load_batch, sample_homodyne, save_batch
from .protocol import (
    ProtocolConfig,
    ehd_reduction_factor,
    predict_asymptote,
    predict_asymptote_via_covariance,
    run_protocol,
    success_bounds,
)
from .states import (
    DEFAULT_MAX_PHOTONS,
    DEFAULT_TRUNC_TOL,
    PhotonDistribution,
    fidelity_to_thermal,
    make_custom,
    make_poisson,
    make_thermal,
    quadrature_pdf,
)
from .tomography import derive_seed, monte_carlo_errors, reconstruct_maxlik

EXIT_OK = 0
EXIT_FLAGGED = 1
EXIT_CONFIG = 2
EXIT_VANISHING = 3
EXIT_CAP = 4


# ----------------------------------------------------------------------
# parsing helpers

def _add_state_options(parser):
    parser.add_argument("--family", choices=("poisson", "thermal", "custom"),
                        default="poisson", help="input state family")
    parser.add_argument("--mean", type=float, default=None,
                        help="mean photon number (poisson/thermal families)")
    parser.add_argument("--probs-file", default=None,
                        help="file with one photon-number weight per line "
                             "(custom family)")
    parser.add_argument("--trunc-tol", type=float, default=DEFAULT_TRUNC_TOL,
                        help="truncation tail tolerance for constructed states")
    parser.add_argument("--trunc-cap", type=int, default=DEFAULT_MAX_PHOTONS,
                        help="hard cap on the photon-number cutoff")


def _add_common_options(parser):
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=2024,
                        help="master seed; per-task seeds are derived from it")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for sweeps and Monte Carlo runs")
    parser.add_argument("--config", default=None,
                        help="JSON file with defaults for any long option")
    parser.add_argument("--dump-config", action="store_true",
                        help="print the resolved configuration and exit")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gaussify",
        description="Iterative beam-splitter Gaussification simulator "
                    "(kernel backend: %s)" % BACKEND,
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommand_action = sub

    p = sub.add_parser("iterate", help="run one protocol, write the trace")
    _add_state_options(p)
    _add_common_options(p)
    p.add_argument("--eta", type=float, default=1.0, help="heralding detector efficiency")
    p.add_argument("--mode", choices=("heralded", "deterministic"), default="heralded")
    p.add_argument("--iters", type=int, default=3, help="number of iterations")
    p.add_argument("--write-states", action="store_true",
                   help="also write per-iteration (n, p_n) tables")
    p.add_argument("--write-pdfs", action="store_true",
                   help="also write per-iteration quadrature PDF grids")
    p.add_argument("--pdf-points", type=int, default=801)

    p = sub.add_parser("sweep", help="table over an input-intensity grid")
    _add_state_options(p)
    _add_common_options(p)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--mode", choices=("heralded", "deterministic", "both"),
                   default="heralded")
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--alpha2-list", default=None,
                   help="comma-separated input mean photon numbers")
    p.add_argument("--alpha2-min", type=float, default=0.1)
    p.add_argument("--alpha2-max", type=float, default=3.0)
    p.add_argument("--alpha2-steps", type=int, default=30)

    p = sub.add_parser("predict", help="closed-form asymptotics and bounds")
    _add_state_options(p)
    _add_common_options(p)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--eta-bhd", type=float, default=None,
                   help="homodyne efficiency for the eight-port emulation factor")
    p.add_argument("--ehd-m", default="1,3",
                   help="comma-separated counts of simultaneous heralding "
                        "measurements for the emulation factors")

    p = sub.add_parser("sample", help="simulate a homodyne batch")
    _add_state_options(p)
    _add_common_options(p)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--mode", choices=("heralded", "deterministic"), default="heralded")
    p.add_argument("--iters", type=int, default=0,
                   help="protocol iterations before measuring (0 = input state)")
    p.add_argument("--eta-h", type=float, default=0.65,
                   help="overall homodyne detection efficiency")
    p.add_argument("--samples", type=int, default=100_000)

    p = sub.add_parser("reconstruct", help="maximum-likelihood inversion of a batch")
    _add_common_options(p)
    p.add_argument("--batch", required=True, help="batch CSV written by `sample`")
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--runs", type=int, default=0,
                   help="Monte Carlo repetitions for error bars (0 = none)")

    p = sub.add_parser("sample-and-reconstruct",
                       help="protocol + homodyne + tomography end to end")
    _add_state_options(p)
    _add_common_options(p)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--mode", choices=("heralded", "deterministic"), default="heralded")
    p.add_argument("--iters", type=int, default=0)
    p.add_argument("--eta-h", type=float, default=0.65)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--runs", type=int, default=100)
    return parser


def _apply_config_file(parser, argv):
    """Pre-scan for --config and install its values as parser defaults."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config is None:
        return
    with open(known.config) as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise ValueError("config file must hold a JSON object")
    for sub_parser in parser.subcommand_action.choices.values():
        sub_parser.set_defaults(**{k.replace("-", "_"): v for k, v in values.items()})


# ----------------------------------------------------------------------
# provenance and CSV writing

def _resolved_config(args):
    skip = {"command", "dump_config"}
    items = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    items["version"] = __version__
    return items


def _header_lines(args):
    lines = ["gaussify %s" % args.command]
    for key, value in _resolved_config(args).items():
        lines.append("%s: %s" % (key, json.dumps(value)))
    return lines


def _format_cell(value):
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path, header_lines, columns, rows):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write("# %s\n" % line)
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


# ----------------------------------------------------------------------
# shared pieces

def _input_state(args) -> PhotonDistribution:
    if args.family == "custom":
        if not args.probs_file:
            raise ValueError("--family custom requires --probs-file")
        weights = []
        with open(args.probs_file) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                weights.append(float(line.split(",")[-1]))
        return make_custom(weights)
    if args.mean is None:
        raise ValueError("--family %s requires --mean" % args.family)
    maker = make_poisson if args.family == "poisson" else make_thermal
    return maker(args.mean, trunc_tol=args.trunc_tol, max_photons=args.trunc_cap)


def _protocol_config(args, state, iterations, mode) -> ProtocolConfig:
    return ProtocolConfig(
        input_state=state,
        detector_eta=args.eta,
        iterations=iterations,
        mode=mode,
        trunc_cap=max(args.trunc_cap, state.n_max),
        max_iterations=max(iterations, 12),
    )


TRACE_COLUMNS = ("j", "mean", "variance_n", "kurtosis", "distance",
                 "fidelity_thermal", "p_succ", "p_tot", "log10_p_tot",
                 "tail_mass", "n_max", "cap_saturated")


def _trace_rows(trace):
    rows = []
    for rec in trace.records:
        rows.append((rec.j, rec.mean, rec.variance_n, rec.kurtosis, rec.distance,
                     rec.fidelity_thermal, rec.p_succ, rec.p_tot,
                     rec.log_p_tot / math.log(10.0), rec.tail_mass,
                     rec.state.n_max, int(rec.cap_saturated)))
    return rows


# ----------------------------------------------------------------------
# subcommands

def cmd_iterate(args) -> int:
    state = _input_state(args)
    config = _protocol_config(args, state, args.iters, args.mode)
    try:
        trace = run_protocol(config)
    except VanishingSuccessError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VANISHING
    header = _header_lines(args)
    _write_csv(_out_path(args, "trace.csv"), header, TRACE_COLUMNS, _trace_rows(trace))
    if args.write_states:
        for rec in trace.records:
            rows = list(enumerate(rec.state.probs))
            _write_csv(_out_path(args, "state_%03d.csv" % rec.j),
                       header + ["iteration: %d" % rec.j], ("n", "p"), rows)
    if args.write_pdfs:
        for rec in trace.records:
            half = 6.0 * math.sqrt(rec.mean + 0.5) + 2.0
            grid = np.linspace(-half, half, args.pdf_points)
            pdf = quadrature_pdf(rec.state, grid)
            _write_csv(_out_path(args, "pdf_%03d.csv" % rec.j),
                       header + ["iteration: %d" % rec.j], ("x", "density"),
                       list(zip(grid, pdf)))
    return EXIT_CAP if trace.cap_saturated else EXIT_OK


SWEEP_COLUMNS = ("alpha2", "iterations", "mode", "eta", "mean", "variance_n",
                 "kurtosis", "distance", "p_succ_last", "p_tot", "log10_p_tot",
                 "status")


def _sweep_point(job):
    """One (alpha2, mode) grid point; returns rows for N = 0..iters."""
    alpha2, mode, args_dict = job
    ns = argparse.Namespace(**args_dict)
    ns.mean = alpha2
    state = _input_state(ns)
    config = _protocol_config(ns, state, ns.iters, mode)
    rows = []
    try:
        trace = run_protocol(config)
    except VanishingSuccessError:
        return [(alpha2, j, mode, ns.eta, math.nan, math.nan, math.nan, math.nan,
                 math.nan, math.nan, math.nan, "vanishing_success")
                for j in range(ns.iters + 1)]
    for rec in trace.records:
        status = "cap_saturated" if rec.cap_saturated else "ok"
        rows.append((alpha2, rec.j, mode, ns.eta, rec.mean, rec.variance_n,
                     rec.kurtosis, rec.distance, rec.p_succ, rec.p_tot,
                     rec.log_p_tot / math.log(10.0), status))
    return rows


def cmd_sweep(args) -> int:
    if args.family == "custom":
        raise ValueError("sweep varies --mean and needs a parametric family")
    if args.alpha2_list:
        grid = [float(v) for v in args.alpha2_list.split(",")]
    else:
        grid = list(np.linspace(args.alpha2_min, args.alpha2_max, args.alpha2_steps))
    modes = ("heralded", "deterministic") if args.mode == "both" else (args.mode,)
    args_dict = dict(vars(args))
    jobs = [(alpha2, mode, args_dict) for mode in modes for alpha2 in grid]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    rows = [row for point in results for row in point]
    _write_csv(_out_path(args, "sweep.csv"), _header_lines(args), SWEEP_COLUMNS, rows)
    flagged = any(row[-1] != "ok" for row in rows)
    return EXIT_FLAGGED if flagged else EXIT_OK


def cmd_predict(args) -> int:
    state = _input_state(args)
    mean = float(np.arange(state.probs.size) @ state.probs)
    prediction = predict_asymptote(state, args.eta)
    row = {
        "family": args.family,
        "mean": mean,
        "eta": args.eta,
        "threshold_alpha2": 1.0 / args.eta,
        "converges": int(prediction.converges),
        "nbar_inf": prediction.mean_photons if prediction.converges else math.inf,
        "nbar_inf_covariance": math.nan,
        "p_succ_lower": success_bounds(mean, args.eta)[0],
        "p_succ_upper": success_bounds(mean, args.eta)[1],
    }
    if prediction.converges and 0.0 < args.eta < 1.0:
        row["nbar_inf_covariance"] = predict_asymptote_via_covariance(state, args.eta)
    columns = list(row)
    values = [list(row.values())]
    if args.eta_bhd is not None:
        for m in (int(v) for v in args.ehd_m.split(",")):
            columns.append("ehd_factor_m%d" % m)
            values[0].append(ehd_reduction_factor(args.eta, args.eta_bhd, m))
    _write_csv(_out_path(args, "predict.csv"), _header_lines(args), columns, values)
    with open(_out_path(args, "predict.csv")) as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


def _prepared_state(args):
    """Input state advanced by the requested protocol iterations."""
    state = _input_state(args)
    if args.iters == 0:
        return state, None
    config = _protocol_config(args, state, args.iters, args.mode)
    trace = run_protocol(config)
    return trace.final_state, trace


def cmd_sample(args) -> int:
    try:
        state, trace = _prepared_state(args)
    except VanishingSuccessError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VANISHING
    label = "%s(mean=%s) after %d %s iterations" % (
        args.family, args.mean, args.iters, args.mode)
    batch = sample_homodyne(state, args.eta_h, args.samples,
                            derive_seed(args.seed, 0), source=label)
    save_batch(batch, _out_path(args, "batch.csv"))
    if trace is not None and trace.cap_saturated:
        return EXIT_CAP
    return EXIT_OK


def _write_reconstruction(args, recon, errors, extra_header):
    header = _header_lines(args) + extra_header
    header.append("em_iterations: %d" % recon.iterations)
    header.append("em_converged: %s" % recon.converged)
    header.append("log_likelihood_final: %r" % recon.log_likelihood[-1])
    probs = recon.distribution.probs
    if errors is None:
        rows = [(n, p) for n, p in enumerate(probs)]
        _write_csv(_out_path(args, "reconstruction.csv"), header, ("n", "p"), rows)
    else:
        std = errors.std
        rows = [(n, p, std[n] if n < std.size else 0.0) for n, p in enumerate(probs)]
        _write_csv(_out_path(args, "reconstruction.csv"), header,
                   ("n", "p", "std"), rows)


def cmd_reconstruct(args) -> int:
    batch = load_batch(args.batch)
    try:
        recon = reconstruct_maxlik(batch, n_max=args.n_max, bins=args.bins)
        errors = None
        if args.runs:
            errors = monte_carlo_errors(recon.distribution, batch.eta_h,
                                        batch.count, args.runs,
                                        master_seed=derive_seed(args.seed, 1),
                                        n_max=recon.distribution.n_max,
                                        bins=args.bins)
    except ReconstructionError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    _write_reconstruction(args, recon, errors, ["batch: %s" % args.batch])
    return EXIT_OK


def cmd_sample_and_reconstruct(args) -> int:
    try:
        state, trace = _prepared_state(args)
    except VanishingSuccessError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_VANISHING
    label = "%s(mean=%s) after %d %s iterations" % (
        args.family, args.mean, args.iters, args.mode)
    batch = sample_homodyne(state, args.eta_h, args.samples,
                            derive_seed(args.seed, 0), source=label)
    save_batch(batch, _out_path(args, "batch.csv"))
    try:
        recon = reconstruct_maxlik(batch, n_max=args.n_max, bins=args.bins)
        errors = None
        if args.runs:
            errors = monte_carlo_errors(recon.distribution, batch.eta_h,
                                        batch.count, args.runs,
                                        master_seed=derive_seed(args.seed, 1),
                                        n_max=recon.distribution.n_max,
                                        bins=args.bins)
    except ReconstructionError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    # fidelity of the reconstruction against the engine's analytic state
    recon_probs = recon.distribution.probs
    width = max(recon_probs.size, state.probs.size)
    a = np.zeros(width); a[:recon_probs.size] = recon_probs
    b = np.zeros(width); b[:state.probs.size] = state.probs
    fid = float(np.sqrt(a * b).sum() ** 2)
    extra = ["fidelity_to_analytic: %r" % fid,
             "analytic_fidelity_thermal: %r" % fidelity_to_thermal(state)]
    _write_reconstruction(args, recon, errors, extra)
    summary_rows = [(fid, recon.iterations, int(recon.converged),
                     batch.count, args.runs)]
    _write_csv(_out_path(args, "summary.csv"), _header_lines(args),
               ("fidelity_to_analytic", "em_iterations", "em_converged",
                "samples", "mc_runs"), summary_rows)
    if trace is not None and trace.cap_saturated:
        return EXIT_CAP
    return EXIT_OK


COMMANDS = {
    "iterate": cmd_iterate,
    "sweep": cmd_sweep,
    "predict": cmd_predict,
    "sample": cmd_sample,
    "reconstruct": cmd_reconstruct,
    "sample-and-reconstruct": cmd_sample_and_reconstruct,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "dump_config", False):
        print(json.dumps(_resolved_config(args), indent=2, default=str))
        return EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
