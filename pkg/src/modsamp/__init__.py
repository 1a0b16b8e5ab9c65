"""Modulo sampling with bandwidth-limited ADCs: simulation, error study and recovery."""
from .adc import QuantizerSpec, SampleRecord, dequantize, pack_words, quantize, quantize_sequence, unpack, unpack_words
from .analog_chain import (
    CHANNEL_KINDS,
    ChannelConfig,
    CombSpec,
    ModuloSpec,
    PipelineOutput,
    acquire,
    fold_crossings,
    modulo_fold,
    run_channel,
)
from .estimators import ModuloSampler, ModuloUnwrapper, SpectralLowpass, UniformQuantizer
from .exceptions import AlignmentError, CapacityError, FormatError, ParameterError, RecoveryWarning
from .experiments import (
    CaptureFile,
    ExperimentConfig,
    FixtureConfig,
    make_fixture,
    read_capture,
    read_results_csv,
    recover_capture,
    run_sweep,
    write_capture,
    write_results_csv,
)
from .metrics import (
    ErrorBreakdown,
    classical_mse_theory,
    lambda_rule,
    loglog_slope,
    mod_hf_mse,
    modulo_q_mse_theory,
    oversampling_factor,
    total_mod_mse_check,
)
from .recovery import RecoveryConfig, align_delay, reconstruct, unfold_with_counts, unwrap
from .signal_core import (
    BandlimitedSignal,
    DenseWaveform,
    SampleSequence,
    digital_lowpass,
    evaluate,
    generate_random_bl_signal,
    ideal_lowpass,
    inf_norm,
    render_dense,
    sample_signal,
)

__version__ = "0.1.0"
