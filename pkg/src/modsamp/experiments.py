"""Monte-Carlo error sweeps, results CSVs, capture files and capture recovery."""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, fields, replace
import math
import os
import warnings

import numpy as np

from . import metrics
from ._validation import check_count, check_fraction, check_positive, interior
from .adc import QuantizerSpec, dequantize, pack_words, quantize_codes, unpack_words, word_bits
from .analog_chain import CHANNEL_KINDS, ChannelConfig, acquire
from .exceptions import FormatError, ParameterError, RecoveryWarning
from .metrics import ERROR_FIELDS, ErrorBreakdown
from .recovery import (
    RecoveryConfig,
    align_delay,
    reconstruct,
    remove_fold_offset,
    unfold_with_counts,
    unwrap_detailed,
)
from .signal_core import SampleSequence, generate_random_bl_signal, inf_norm, sample_times

SWEEP_RECOVERY = ("genie", "itoh", "extra_bit_gated")
RESULT_COLUMNS = ("trial", "bits", "of", "comb_n") + ERROR_FIELDS + ("warn",)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for :func:`run_sweep`.

    ``comb_n=None`` drops the comb, so the direct low-pass channel plays the
    modulo-live role.  ``recovery="genie"`` unfolds with the true fold counts;
    the Itoh modes use the received samples only.
    """

    trials: int = 100
    bits_list: tuple = (6, 8)
    of_list: tuple = (4, 5, 6, 8, 10, 16, 32)
    comb_n: int = None
    n_terms: int = 98
    nyquist_period: float = 1e-4
    amp_range: tuple = (-0.5, 0.5)
    seed: int = 0
    refine: int = 64
    guard: float = 0.1
    extra_bit: bool = True
    recovery: str = "genie"
    jobs: int = 1

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("trials", check_count(self.trials, "trials", 1))
        set_("bits_list", tuple(check_count(b, "bits", 2 if self.extra_bit else 1) for b in self.bits_list))
        set_("of_list", tuple(float(check_positive(o, "of")) for o in self.of_list))
        if not self.bits_list or not self.of_list:
            raise ParameterError("bits_list and of_list must be non-empty")
        if any(o <= 2 for o in self.of_list):
            raise ParameterError("every oversampling factor must exceed 2 for the modulo channels")
        if self.comb_n is not None:
            set_("comb_n", check_count(self.comb_n, "comb_n", 0))
        set_("n_terms", check_count(self.n_terms, "n_terms", 1))
        set_("nyquist_period", check_positive(self.nyquist_period, "nyquist_period"))
        lo, hi = (float(v) for v in self.amp_range)
        if not lo < hi:
            raise ParameterError(f"amp_range must be increasing, got {self.amp_range}")
        set_("amp_range", (lo, hi))
        set_("seed", check_count(self.seed, "seed", 0))
        set_("refine", check_count(self.refine, "refine", 1))
        set_("guard", check_fraction(self.guard, "guard"))
        set_("extra_bit", bool(self.extra_bit))
        if self.recovery not in SWEEP_RECOVERY:
            raise ParameterError(f"recovery must be one of {SWEEP_RECOVERY}, got {self.recovery!r}")
        if self.recovery == "extra_bit_gated" and not self.extra_bit:
            raise ParameterError("extra_bit_gated recovery needs extra_bit enabled")
        set_("jobs", check_count(self.jobs, "jobs", 1))


def _recover(samples, flags, counts, lam, mode):
    """Unfold quantized modulo samples; returns ``(values, warned)``."""
    if mode == "genie":
        return unfold_with_counts(samples, counts, lam).values, False
    result = unwrap_detailed(samples, flags, RecoveryConfig(lam, mode))
    return result.samples.values, result.n_clamped > 0


def _live_error(recovered, truth, lam, period, cutoff, guard):
    err = np.asarray(recovered) - truth
    if lam is not None:
        err = remove_fold_offset(err, lam, guard)
    return metrics.lowpassed_mse(err, period, cutoff, guard)


def run_trial(cfg, trial):
    """All ``(bits, of)`` rows for one signal, drawn with seed ``cfg.seed + trial``."""
    signal = generate_random_bl_signal(
        cfg.n_terms, cfg.nyquist_period, *cfg.amp_range, seed=cfg.seed + trial
    )
    cutoff = signal.bandwidth
    # the lambda rule needs the continuous-time peak, not a grid maximum: a
    # sample sitting on the peak would otherwise land exactly on a fold
    # boundary whenever of - 2 is odd
    peak = inf_norm(signal, refine=cfg.refine, polish=True)
    rows = []
    for of in cfg.of_list:
        ts = cfg.nyquist_period / of
        n = sample_times(signal.duration, ts).size
        classical = acquire(signal, ChannelConfig.classical(ts), n_samples=n)
        x = classical.samples.values
        xn = max(peak, inf_norm(x))
        lam = metrics.lambda_rule(xn, of)
        ideal = acquire(signal, ChannelConfig.ideal_modulo(lam, ts), n_samples=n)
        if cfg.comb_n is None:
            live_cfg = ChannelConfig.direct_lpf_modulo(lam, ts)
        else:
            live_cfg = ChannelConfig.comb_modulo(lam, cfg.comb_n, ts)
        live = acquire(signal, live_cfg, n_samples=n)
        e_hf = metrics.lowpassed_mse(live.samples.values - ideal.samples.values, ts, cutoff, cfg.guard)
        for bits in cfg.bits_list:
            cl_spec = QuantizerSpec(bits, xn)
            cl_q = dequantize(quantize_codes(x, cl_spec)[0], cl_spec)
            amp = QuantizerSpec(bits, lam).amplitude(cfg.extra_bit)
            errs, warned = [], False
            for out in (live, ideal):
                q = out.samples.with_values(dequantize(quantize_codes(out.samples.values, amp)[0], amp))
                rec, w = _recover(q, out.flags, out.fold_counts, lam, cfg.recovery)
                warned |= w
                errs.append(_live_error(rec, x, lam, ts, cutoff, cfg.guard))
            rows.append(
                ErrorBreakdown(
                    trial=trial,
                    bits=bits,
                    of=of,
                    comb_n=cfg.comb_n,
                    e_classical_theory=metrics.classical_mse_theory(xn, bits, of),
                    e_classical_live=_live_error(cl_q, x, None, ts, cutoff, cfg.guard),
                    e_mod_q_theory=metrics.modulo_q_mse_theory(xn, amp.bits, of),
                    e_mod_hf=e_hf,
                    e_mod_live=errs[0],
                    e_mod_ideal_sampler=errs[1],
                    warn=int(warned),
                )
            )
    return rows


def _run_chunk(args):
    cfg, trials = args
    return [row for t in trials for row in run_trial(cfg, t)]


def run_sweep(cfg):
    """Every trial of ``cfg``, sorted by ``(trial, bits, of)``.

    With ``cfg.jobs > 1`` trials run in worker processes; each trial owns its
    seed, so the table does not depend on scheduling.
    """
    indices = list(range(cfg.trials))
    if cfg.jobs == 1 or cfg.trials == 1:
        rows = _run_chunk((cfg, indices))
    else:
        chunks = [indices[i :: cfg.jobs] for i in range(cfg.jobs)]
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = [r for part in pool.map(_run_chunk, [(cfg, c) for c in chunks if c]) for r in part]
    return sorted(rows, key=lambda r: (r.trial, r.bits, r.of))


# ---------------------------------------------------------------- results CSV


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_results_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])


def read_results_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FormatError("missing header row", 1)
        if tuple(header) != RESULT_COLUMNS:
            raise FormatError(f"header must be {','.join(RESULT_COLUMNS)}", 1)
        for line, rec in enumerate(reader, start=2):
            if len(rec) != len(RESULT_COLUMNS):
                raise FormatError(f"expected {len(RESULT_COLUMNS)} fields, got {len(rec)}", line)
            try:
                d = dict(zip(RESULT_COLUMNS, rec))
                rows.append(
                    ErrorBreakdown(
                        trial=int(d["trial"]),
                        bits=int(d["bits"]),
                        of=float(d["of"]),
                        comb_n=int(d["comb_n"]) if d["comb_n"] else None,
                        warn=int(d["warn"]),
                        **{k: float(d[k]) for k in ERROR_FIELDS},
                    )
                )
            except (ValueError, ParameterError) as exc:
                raise FormatError(str(exc), line) from None
    return rows


def aggregate_path(path):
    root, ext = os.path.splitext(path)
    return f"{root}_aggregate{ext or '.csv'}"


def write_aggregate_csv(rows, path):
    """Mean and standard error per ``(bits, of, comb_n)``, the plot-ready table."""
    table = metrics.aggregate(rows)
    cols = ["bits", "of", "comb_n", "n_trials"]
    for name in ERROR_FIELDS:
        cols += [f"mean_{name}", f"sem_{name}"]
    cols.append("n_warn")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for entry in table:
            w.writerow([_fmt(entry[c]) for c in cols])
    return table


# ---------------------------------------------------------------- capture files

_CAPTURE_KEYS = ("bits", "ts_seconds", "lambda", "extra_bit", "channels", "classical_range")


@dataclass(frozen=True, eq=False)
class CaptureFile:
    """Words of up to four channels sampled together.

    ``words[n, c]`` is the word of channel ``kinds[c]`` at instant ``n``.  Modulo
    channels are quantized over ``[-lam, lam]``; a classical channel, if present,
    over ``[-classical_range, classical_range]``.
    """

    bits: int
    sample_period: float
    lam: float
    extra_bit: bool
    kinds: tuple
    words: np.ndarray
    classical_range: float = None

    def __post_init__(self):
        object.__setattr__(self, "bits", check_count(self.bits, "bits", 2 if self.extra_bit else 1))
        object.__setattr__(self, "sample_period", check_positive(self.sample_period, "ts_seconds"))
        object.__setattr__(self, "lam", check_positive(self.lam, "lambda"))
        kinds = tuple(self.kinds)
        if not 1 <= len(kinds) <= 4 or len(set(kinds)) != len(kinds):
            raise ParameterError("a capture holds 1 to 4 distinct channels")
        for k in kinds:
            if k not in CHANNEL_KINDS:
                raise ParameterError(f"unknown channel kind {k!r}")
        if "classical" in kinds:
            check_positive(self.classical_range, "classical_range")
        object.__setattr__(self, "kinds", kinds)
        words = np.asarray(self.words, dtype=np.int64)
        if words.ndim != 2 or words.shape[1] != len(kinds):
            raise ParameterError(f"words must have shape (n, {len(kinds)})")
        words = words.copy()
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    def spec(self, kind):
        half = self.classical_range if kind == "classical" else self.lam
        return QuantizerSpec(self.bits, half)

    def decode(self, kind):
        """Dequantized samples and fold flags of one channel."""
        spec = self.spec(kind)
        codes, flags = unpack_words(self.words[:, self.kinds.index(kind)], spec, self.extra_bit)
        values = dequantize(codes, spec.amplitude(self.extra_bit))
        return SampleSequence(values, self.sample_period), flags


def encode_channel(values, flags, spec, extra_bit):
    """Quantize one channel's samples into capture words."""
    codes, _ = quantize_codes(values, spec.amplitude(extra_bit))
    return pack_words(codes, flags, spec, extra_bit)


def write_capture(capture, path):
    with open(path, "w") as fh:
        fh.write(f"bits={capture.bits}\n")
        fh.write(f"ts_seconds={capture.sample_period!r}\n")
        fh.write(f"lambda={capture.lam!r}\n")
        fh.write(f"extra_bit={int(capture.extra_bit)}\n")
        fh.write(f"channels={','.join(capture.kinds)}\n")
        if capture.classical_range is not None:
            fh.write(f"classical_range={capture.classical_range!r}\n")
        for row in capture.words:
            fh.write(",".join(str(int(w)) for w in row) + "\n")


def _parse_header_value(key, value, line):
    try:
        if key == "bits":
            return int(value)
        if key == "extra_bit":
            if value not in ("0", "1"):
                raise ValueError("extra_bit must be 0 or 1")
            return value == "1"
        if key == "channels":
            return tuple(v.strip() for v in value.split(","))
        return float(value)
    except ValueError as exc:
        raise FormatError(f"bad value for {key}: {exc}", line) from None


def read_capture(path):
    header, rows, row_lines = {}, [], []
    with open(path) as fh:
        lines = fh.read().splitlines()
    for line, text in enumerate(lines, start=1):
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        if not rows and "=" in text:
            key, _, value = text.partition("=")
            key = key.strip()
            if key not in _CAPTURE_KEYS:
                raise FormatError(f"unknown header key {key!r}", line)
            if key in header:
                raise FormatError(f"duplicate header key {key!r}", line)
            header[key] = _parse_header_value(key, value.strip(), line)
            continue
        missing = [k for k in _CAPTURE_KEYS[:5] if k not in header]
        if missing:
            raise FormatError(f"header is missing {', '.join(missing)}", line)
        fields_ = text.split(",")
        if len(fields_) != len(header["channels"]):
            raise FormatError(f"expected {len(header['channels'])} words, got {len(fields_)}", line)
        try:
            rows.append([int(f) for f in fields_])
        except ValueError:
            raise FormatError(f"non-integer word in {text!r}", line) from None
        row_lines.append(line)
    if not rows:
        raise FormatError("capture holds no samples", len(lines) or 1)
    words = np.array(rows, dtype=np.int64)
    limit = 2 ** word_bits(header["bits"])
    bad = np.argwhere((words < 0) | (words >= limit))
    if bad.size:
        r, c = bad[0]
        raise FormatError(f"word {words[r, c]} outside [0, {limit})", row_lines[r])
    try:
        return CaptureFile(
            header["bits"],
            header["ts_seconds"],
            header["lambda"],
            header["extra_bit"],
            header["channels"],
            words,
            header.get("classical_range"),
        )
    except ParameterError as exc:
        raise FormatError(f"inconsistent header: {exc}", 1) from None


# ---------------------------------------------------------------- fixtures and recovery

#: Channel order of the fixture, following the four samplers of the hardware setup.
FIXTURE_KINDS = ("comb_modulo", "ideal_modulo", "classical", "direct_lpf_modulo")


@dataclass(frozen=True)
class FixtureConfig:
    """Synthetic stand-in for a four-sampler hardware capture.

    Defaults: a 1 kHz band (T = 0.5 ms), 50 kHz sampling, 8-bit words with one
    fold bit, ``lam = peak / 3`` and a comb of 2000 harmonics arriving two
    samples late.
    """

    seed: int = 0
    n_terms: int = 20
    nyquist_period: float = 5e-4
    sample_period: float = 2e-5
    bits: int = 8
    extra_bit: bool = True
    lam_divisor: float = 3.0
    comb_n: int = 2000
    comb_delay: int = 2
    amp_range: tuple = (-0.5, 0.5)
    kinds: tuple = FIXTURE_KINDS
    scale: float = 1.0


@dataclass(frozen=True, eq=False)
class Fixture:
    capture: CaptureFile
    signal: object
    truth: SampleSequence


def make_fixture(fcfg=FixtureConfig()):
    signal = generate_random_bl_signal(
        fcfg.n_terms, fcfg.nyquist_period, *fcfg.amp_range, seed=fcfg.seed
    ).scaled(fcfg.scale)
    ts = check_positive(fcfg.sample_period, "sample_period")
    n = sample_times(signal.duration, ts).size
    peak = max(inf_norm(signal, polish=True), 1e-300)
    lam = peak / check_positive(fcfg.lam_divisor, "lam_divisor")
    columns = []
    for kind in fcfg.kinds:
        t0 = 0.0
        if kind == "classical":
            ch = ChannelConfig.classical(ts)
            spec = QuantizerSpec(fcfg.bits, peak)
        else:
            spec = QuantizerSpec(fcfg.bits, lam)
            if kind == "ideal_modulo":
                ch = ChannelConfig.ideal_modulo(lam, ts)
            elif kind == "direct_lpf_modulo":
                ch = ChannelConfig.direct_lpf_modulo(lam, ts)
            else:
                ch = ChannelConfig.comb_modulo(lam, fcfg.comb_n, ts)
                t0 = -fcfg.comb_delay * ts
        out = acquire(signal, ch, t0=t0, n_samples=n)
        columns.append(encode_channel(out.samples.values, out.flags, spec, fcfg.extra_bit))
    truth = acquire(signal, ChannelConfig.classical(ts), n_samples=n).samples
    capture = CaptureFile(
        fcfg.bits, ts, lam, fcfg.extra_bit, fcfg.kinds, np.column_stack(columns),
        peak if "classical" in fcfg.kinds else None,
    )
    return Fixture(capture, signal, truth)


@dataclass(frozen=True, eq=False)
class ChannelRecovery:
    kind: str
    unwrapped: SampleSequence
    reconstructed: SampleSequence
    lag: int = 0
    mse: float = math.nan  # against the classical channel, after alignment
    n_clamped: int = 0


def recover_capture(capture, mode="extra_bit_gated", cutoff_hz=1000.0, max_lag=16, guard=0.1):
    """Unwrap and low-pass every channel; align modulo channels to the classical one.

    The reported MSE of a modulo channel is taken against the reconstructed
    classical channel over the guarded interior of the overlap, modulo one
    global multiple of ``2*lam``.
    """
    cutoff = 2 * math.pi * check_positive(cutoff_hz, "cutoff_hz")
    if cutoff > math.pi / capture.sample_period:
        raise ParameterError(f"cutoff_hz {cutoff_hz} is above half the sampling rate")
    rcfg = RecoveryConfig(capture.lam, mode, cutoff)
    if mode == "extra_bit_gated" and not capture.extra_bit:
        raise ParameterError("extra_bit_gated mode needs a capture with the extra bit")
    out = {}
    for kind in capture.kinds:
        samples, flags = capture.decode(kind)
        clamped = 0
        if kind == "classical":
            unwrapped = samples
        else:
            res = unwrap_detailed(samples, flags, rcfg)
            unwrapped, clamped = res.samples, res.n_clamped
            if clamped:
                warnings.warn(f"{kind}: {clamped} step(s) hit the fold clamp", RecoveryWarning, stacklevel=2)
        rec, _ = reconstruct(unwrapped, rcfg)
        out[kind] = ChannelRecovery(kind, unwrapped, rec, n_clamped=clamped)
    ref = out.get("classical")
    if ref is None:
        return out
    for kind, item in out.items():
        if kind == "classical":
            out[kind] = replace(item, mse=0.0)
            continue
        lag, ref_al, cand_al = align_delay(ref.reconstructed, item.reconstructed, max_lag)
        err = remove_fold_offset(cand_al.values - ref_al.values, capture.lam, guard)
        sl = interior(err.size, guard)
        out[kind] = replace(item, lag=lag, mse=float(np.mean(err[sl] ** 2)))
    return out


def write_recovery_csv(results, path):
    kinds = list(results)
    n = max(len(r.unwrapped) for r in results.values())
    cols = ["n"]
    for k in kinds:
        cols += [f"{k}_unwrapped", f"{k}_reconstructed"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(n):
            row = [str(i)]
            for k in kinds:
                row += [_fmt(float(results[k].unwrapped.values[i])), _fmt(float(results[k].reconstructed.values[i]))]
            w.writerow(row)


def config_fields():
    return [f.name for f in fields(ExperimentConfig)]
