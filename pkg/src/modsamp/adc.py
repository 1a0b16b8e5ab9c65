"""Uniform mid-tread quantizer and the extra-bit word format.

Step convention: a ``bits``-bit quantizer over ``[-half_range, half_range]`` has
step ``half_range / (2**bits - 1)``, so its codes run over
``-(2**bits - 1) .. 2**bits - 1``.

Word layout (bit-exact, shared with capture files)::

    bit 0           fold flag            (only when the extra bit is enabled)
    bits 1..m+1     amplitude field      offset binary, field = code + 2**m

where ``m`` is the amplitude resolution (``bits - 1`` with the extra bit,
``bits`` without).  Either way a word occupies ``bits + 1`` bits.  Field value 0
decodes to code ``-2**m``, which the quantizer never emits but which keeps
unpack/pack a bijection on every word.
"""
from dataclasses import dataclass
from typing import NamedTuple
import math

import numpy as np

from ._validation import as_flag_array, check_count, check_positive
from .exceptions import FormatError, ParameterError
from .signal_core import SampleSequence


@dataclass(frozen=True)
class QuantizerSpec:
    bits: int
    half_range: float
    step: float = None

    def __post_init__(self):
        object.__setattr__(self, "bits", check_count(self.bits, "bits", 1))
        object.__setattr__(self, "half_range", check_positive(self.half_range, "half_range"))
        if self.step is None:
            object.__setattr__(self, "step", self.half_range / (2**self.bits - 1))
        else:
            object.__setattr__(self, "step", check_positive(self.step, "step"))

    @property
    def max_code(self):
        return 2**self.bits - 1

    def amplitude(self, extra_bit):
        """Spec used for the amplitude when one bit goes to the fold flag."""
        if not extra_bit:
            return self
        if self.bits < 2:
            raise ParameterError("the extra bit needs at least 2 bits in total")
        default_step = self.half_range / (2**self.bits - 1)
        step = None if math.isclose(self.step, default_step) else self.step
        return QuantizerSpec(self.bits - 1, self.half_range, step)


class SampleRecord(NamedTuple):
    word: int
    value_bits: int
    fold_bit: int


def quantize_codes(values, spec):
    """Vectorised quantizer.  Returns ``(codes, n_saturated)``.

    Ties round half away from zero; out-of-range inputs are clamped to the
    extreme codes and counted.
    """
    v = np.asarray(values, dtype=float)
    raw = np.sign(v) * np.floor(np.abs(v) / spec.step + 0.5)
    saturated = int(np.count_nonzero(np.abs(raw) > spec.max_code))
    codes = np.clip(raw, -spec.max_code, spec.max_code).astype(np.int64)
    return codes, saturated


def dequantize(codes, spec):
    return np.asarray(codes, dtype=float) * spec.step


def quantize(v, spec):
    """Quantize one value or an array; returns ``(code, dequantized)``."""
    codes, _ = quantize_codes(v, spec)
    if np.ndim(v) == 0:
        code = int(codes)
        return code, code * spec.step
    return codes, dequantize(codes, spec)


def word_bits(bits):
    """Width of one stored word for a ``bits``-bit budget."""
    return bits + 1


def pack_words(codes, flags, spec, extra_bit):
    """Pack amplitude codes (already quantized with ``spec.amplitude(extra_bit)``)."""
    amp = spec.amplitude(extra_bit)
    codes = np.asarray(codes, dtype=np.int64)
    # the offset-binary field also holds -2**bits, which the quantizer never emits
    if np.any((codes > amp.max_code) | (codes < -(2**amp.bits))):
        raise ParameterError(f"codes exceed the {amp.bits}-bit amplitude range")
    field = codes + 2**amp.bits
    if not extra_bit:
        return field
    flags = as_flag_array(flags, codes.size).astype(np.int64)
    return (field << 1) | flags


def unpack_words(words, spec, extra_bit, line_offset=None):
    """Inverse of :func:`pack_words`: returns ``(codes, flags)``."""
    amp = spec.amplitude(extra_bit)
    words = np.asarray(words, dtype=np.int64)
    limit = 2 ** word_bits(spec.bits)
    bad = np.nonzero((words < 0) | (words >= limit))[0]
    if bad.size:
        where = None if line_offset is None else line_offset + int(bad[0])
        raise FormatError(f"word {int(words[bad[0]])} outside [0, {limit})", where)
    if extra_bit:
        flags = (words & 1).astype(bool)
        field = words >> 1
    else:
        flags = np.zeros(words.size, dtype=bool)
        field = words
    return field - 2**amp.bits, flags


def quantize_sequence(s, folds, spec, extra_bit):
    """Quantize a sample sequence into words, optionally carrying fold flags in the LSB."""
    values = s.values if isinstance(s, SampleSequence) else np.asarray(s, dtype=float)
    flags = as_flag_array(folds, values.size, "folds")
    amp = spec.amplitude(extra_bit)
    codes, _ = quantize_codes(values, amp)
    words = pack_words(codes, flags, spec, extra_bit)
    if extra_bit:
        return [SampleRecord(int(w), int(w >> 1), int(w & 1)) for w in words]
    return [SampleRecord(int(w), int(w), 0) for w in words]


def unpack(records, spec, extra_bit, period=1.0, t0=0.0):
    """Decode records (or raw integer words) to ``(SampleSequence, flags)``."""
    words = [r.word if isinstance(r, SampleRecord) else int(r) for r in records]
    codes, flags = unpack_words(words, spec, extra_bit)
    values = dequantize(codes, spec.amplitude(extra_bit))
    return SampleSequence(values, period, t0), flags
