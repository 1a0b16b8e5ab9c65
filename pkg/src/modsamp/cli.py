"""Command-line entry point: ``modsamp {simulate,sweep,recover,make-fixture}``.

Every subcommand accepts ``--config FILE`` holding ``key=value`` lines whose
keys are the long flag names (``comb-n`` or ``comb_n``).  Flags given on the
command line override the file.  Exit status: 0 on success, 1 on a parameter
error, 2 on a malformed input file.
"""
import argparse
import csv
import math
import os
import sys

import numpy as np

from .adc import QuantizerSpec, dequantize, quantize_codes
from .analog_chain import (
    ChannelConfig,
    acquire,
    comb_waveform,
    fold_crossings,
    fold_waveform,
    lowpassed_fold_samples,
    ModuloSpec,
    CombSpec,
)
from .exceptions import FormatError, ParameterError
from .experiments import (
    ExperimentConfig,
    FixtureConfig,
    aggregate_path,
    make_fixture,
    read_capture,
    recover_capture,
    run_sweep,
    write_aggregate_csv,
    write_capture,
    write_recovery_csv,
    write_results_csv,
)
from .metrics import lambda_rule
from .signal_core import generate_random_bl_signal, inf_norm, render_dense, sample_times


class _Parser(argparse.ArgumentParser):
    """Usage errors become parameter errors (exit 1) instead of argparse's exit 2."""

    def error(self, message):
        raise ParameterError(message)


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _signal_flags(p, n_terms=98, nyquist_period=1e-4):
    p.add_argument("--seed", type=int, default=0, help="base random seed (default: 0)")
    p.add_argument("--n-terms", type=int, default=n_terms, help=f"sinc terms per signal (default: {n_terms})")
    p.add_argument("--nyquist-period", type=float, default=nyquist_period,
                   help=f"Nyquist period T in seconds (default: {nyquist_period:g})")


def build_parser():
    parser = _Parser(prog="modsamp", description="Modulo sampling simulation, error sweeps and capture recovery.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sw = sub.add_parser("sweep", help="Monte-Carlo error sweep over bits and oversampling")
    sw.add_argument("--config", help="key=value file with defaults for these flags")
    sw.add_argument("--bits", type=_int_list, default=(6, 8), help="bit budgets (default: 6,8)")
    sw.add_argument("--of", type=_float_list, default=(4, 5, 6, 8, 10, 16, 32),
                    help="oversampling factors (default: 4,5,6,8,10,16,32)")
    sw.add_argument("--trials", type=int, default=100, help="signals per point (default: 100)")
    sw.add_argument("--comb-n", type=int, default=None,
                    help="comb harmonics N; omit to use the direct low-pass channel")
    _signal_flags(sw)
    sw.add_argument("--refine", type=int, default=64, help="grid refinement for the peak estimate (default: 64)")
    sw.add_argument("--guard", type=float, default=0.1, help="edge fraction excluded from MSEs (default: 0.1)")
    sw.add_argument("--extra-bit", type=_bool, default=True, help="spend one bit on the fold flag (default: true)")
    sw.add_argument("--recovery", default="genie", choices=("genie", "itoh", "extra_bit_gated"),
                    help="unfolding method (default: genie, i.e. true fold counts)")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    sw.add_argument("--out", required=True, help="results CSV; the aggregate goes next to it")

    si = sub.add_parser("simulate", help="one trial with every intermediate waveform")
    si.add_argument("--config", help="key=value file with defaults for these flags")
    _signal_flags(si)
    si.add_argument("--of", type=float, default=10.0, help="oversampling factor (default: 10)")
    si.add_argument("--bits", type=int, default=8, help="bit budget (default: 8)")
    si.add_argument("--comb-n", type=int, default=2000, help="comb harmonics N (default: 2000)")
    si.add_argument("--refine", type=int, default=16, help="dense points per sample (default: 16)")
    si.add_argument("--extra-bit", type=_bool, default=True, help="spend one bit on the fold flag (default: true)")
    si.add_argument("--out-dir", default=".", help="directory for dense.csv and samples.csv (default: .)")

    rc = sub.add_parser("recover", help="unwrap, align and reconstruct a capture file")
    rc.add_argument("--config", help="key=value file with defaults for these flags")
    rc.add_argument("--in", dest="in_path", required=True, help="capture file")
    rc.add_argument("--mode", default="extra_bit_gated", choices=("itoh", "extra_bit_gated"),
                    help="unwrapping mode (default: extra_bit_gated)")
    rc.add_argument("--cutoff-hz", type=float, default=1000.0, help="reconstruction low-pass in Hz (default: 1000)")
    rc.add_argument("--max-lag", type=int, default=16, help="largest alignment lag in samples (default: 16)")
    rc.add_argument("--guard", type=float, default=0.1, help="edge fraction excluded from MSEs (default: 0.1)")
    rc.add_argument("--out", required=True, help="recovered samples CSV")

    mf = sub.add_parser("make-fixture", help="synthetic four-sampler capture file")
    mf.add_argument("--config", help="key=value file with defaults for these flags")
    _signal_flags(mf, n_terms=20, nyquist_period=5e-4)
    mf.add_argument("--sample-period", type=float, default=2e-5, help="Ts in seconds (default: 2e-05)")
    mf.add_argument("--bits", type=int, default=8, help="bits per word budget (default: 8)")
    mf.add_argument("--extra-bit", type=_bool, default=True, help="spend one bit on the fold flag (default: true)")
    mf.add_argument("--lam-divisor", type=float, default=3.0, help="lambda = peak / divisor (default: 3)")
    mf.add_argument("--comb-n", type=int, default=2000, help="comb harmonics N (default: 2000)")
    mf.add_argument("--comb-delay", type=int, default=2, help="comb channel delay in samples (default: 2)")
    mf.add_argument("--scale", type=float, default=1.0, help="signal amplitude scale (default: 1)")
    mf.add_argument("--out", required=True, help="capture file to write")
    return parser


def _read_config(path):
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParameterError(f"--config: cannot read {path}: {exc.strerror}") from None
    for line, text in enumerate(lines, start=1):
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        key, sep, value = text.partition("=")
        if not sep:
            raise FormatError(f"{path}: expected key=value, got {text!r}", line)
        values[key.strip().lstrip("-").replace("-", "_")] = (value.strip(), line)
    return values


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 == len(argv):
                raise ParameterError("--config needs a file name")
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.partition("=")[2]
    return None


def _install_config(sub_parser, path):
    """Turn config-file entries into parser defaults, so flags still win."""
    known = {a.dest: a for a in sub_parser._actions}
    defaults = {}
    for key, (value, line) in _read_config(path).items():
        dest = "in_path" if key == "in" else key
        action = known.get(dest)
        if action is None or dest in ("config", "help"):
            raise FormatError(f"{path}: unknown key {key!r}", line)
        try:
            defaults[dest] = action.type(value) if action.type else value
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad value for {key}: {exc}", line) from None
        if action.choices and defaults[dest] not in action.choices:
            raise FormatError(f"{path}: {key} must be one of {', '.join(action.choices)}", line)
        action.required = False
    sub_parser.set_defaults(**defaults)


def _write_columns(path, columns):
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(len(data[0])):
            w.writerow([format(float(col[i]), ".17g") for col in data])


def _cmd_sweep(args):
    cfg = ExperimentConfig(
        trials=args.trials, bits_list=args.bits, of_list=args.of, comb_n=args.comb_n,
        n_terms=args.n_terms, nyquist_period=args.nyquist_period, seed=args.seed,
        refine=args.refine, guard=args.guard, extra_bit=args.extra_bit,
        recovery=args.recovery, jobs=args.jobs,
    )
    rows = run_sweep(cfg)
    write_results_csv(rows, args.out)
    agg = aggregate_path(args.out)
    write_aggregate_csv(rows, agg)
    print(f"wrote {len(rows)} rows to {args.out} and the aggregate to {agg}")


def _cmd_simulate(args):
    signal = generate_random_bl_signal(args.n_terms, args.nyquist_period, -0.5, 0.5, seed=args.seed)
    ts = args.nyquist_period / args.of
    n = sample_times(signal.duration, ts).size
    x = acquire(signal, ChannelConfig.classical(ts), n_samples=n).samples
    peak = max(inf_norm(signal, polish=True), inf_norm(x))
    lam = lambda_rule(peak, args.of)

    dense = render_dense(signal, ts, args.refine, 0.0, n)
    folded, trace = fold_waveform(dense, ModuloSpec(lam))
    # pointwise product as a scope would show it; the comb's harmonics above the
    # grid rate are not resolved here, the post-LPF column is exact
    comb = comb_waveform(CombSpec(args.comb_n, ts), folded)
    crossings = fold_crossings(signal, lam, dense.times[0], dense.times[-1])
    post = lowpassed_fold_samples(signal, lam, args.comb_n, dense.times, ts, crossings)
    os.makedirs(args.out_dir, exist_ok=True)
    _write_columns(
        os.path.join(args.out_dir, "dense.csv"),
        {"t": dense.times, "x": dense.values, "folded": folded.values,
         "comb_mixed": folded.values * comb.values, "post_lpf": post, "fold_event": trace.flags},
    )

    live = acquire(signal, ChannelConfig.comb_modulo(lam, args.comb_n, ts), n_samples=n)
    ideal = acquire(signal, ChannelConfig.ideal_modulo(lam, ts), n_samples=n)
    amp = QuantizerSpec(args.bits, lam).amplitude(args.extra_bit)
    cl = QuantizerSpec(args.bits, peak)
    _write_columns(
        os.path.join(args.out_dir, "samples.csv"),
        {"t": x.times, "x": x.values,
         "classical_q": dequantize(quantize_codes(x.values, cl)[0], cl),
         "ideal_modulo": ideal.samples.values, "comb_modulo": live.samples.values,
         "comb_modulo_q": dequantize(quantize_codes(live.samples.values, amp)[0], amp),
         "fold_flag": live.flags, "fold_count": live.fold_counts},
    )
    print(f"lambda={lam:.6g} folds={crossings.times.size} samples={n}; wrote dense.csv and samples.csv to {args.out_dir}")


def _cmd_recover(args):
    capture = read_capture(args.in_path)
    results = recover_capture(capture, args.mode, args.cutoff_hz, args.max_lag, args.guard)
    write_recovery_csv(results, args.out)
    for kind, r in results.items():
        mse = "n/a (no classical channel)" if math.isnan(r.mse) else f"{r.mse:.6g}"
        print(f"{kind}: lag={r.lag} mse_vs_classical={mse}")


def _cmd_make_fixture(args):
    fcfg = FixtureConfig(
        seed=args.seed, n_terms=args.n_terms, nyquist_period=args.nyquist_period,
        sample_period=args.sample_period, bits=args.bits, extra_bit=args.extra_bit,
        lam_divisor=args.lam_divisor, comb_n=args.comb_n, comb_delay=args.comb_delay,
        scale=args.scale,
    )
    fx = make_fixture(fcfg)
    write_capture(fx.capture, args.out)
    print(f"wrote {fx.capture.words.shape[0]} samples x {len(fx.capture.kinds)} channels to {args.out}")


_COMMANDS = {
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "recover": _cmd_recover,
    "make-fixture": _cmd_make_fixture,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        if not argv or argv[0] not in _COMMANDS:
            parser.parse_args(argv)  # help, or an error for a missing/unknown subcommand
        sub_parser = parser._subparsers._group_actions[0].choices[argv[0]]
        path = _config_path(argv)
        if path is not None:
            _install_config(sub_parser, path)
        args = parser.parse_args(argv)
        _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return exc.code or 0
    except FormatError as exc:
        print(f"modsamp: format error: {exc}", file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"modsamp: parameter error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"modsamp: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
