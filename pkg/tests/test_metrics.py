import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modsamp.exceptions import ParameterError
from modsamp.metrics import (
    ERROR_FIELDS,
    ErrorBreakdown,
    aggregate,
    breakdown_fields,
    classical_mse_theory,
    lambda_rule,
    loglog_slope,
    lowpassed_mse,
    mod_hf_mse,
    modulo_q_mse_theory,
    mse,
    oversampling_factor,
    total_mod_mse_check,
)
from modsamp.signal_core import SampleSequence


def row(trial=0, bits=8, of=10.0, comb_n=2000, live=1e-8, hf=2e-9, q=8e-9, warn=0, **kw):
    base = dict(
        e_classical_theory=3e-8, e_classical_live=3.1e-8, e_mod_q_theory=q,
        e_mod_hf=hf, e_mod_live=live, e_mod_ideal_sampler=q,
    )
    base.update(kw)
    return ErrorBreakdown(trial, bits, of, comb_n, warn=warn, **base)


class TestFormulae:
    @pytest.mark.parametrize("ts,expected", [(1e-5, 10), (1e-4, 1), (2e-5, 5)])
    def test_oversampling_factor(self, ts, expected):
        assert oversampling_factor(1e-4, ts) == pytest.approx(expected)

    def test_lambda_rule(self):
        assert lambda_rule(0.5, 10) == pytest.approx(0.0625)
        assert lambda_rule(1.0, 4) == pytest.approx(0.5)

    def test_lambda_rule_zero_signal_flags(self):
        with pytest.warns(RuntimeWarning):
            assert lambda_rule(0.0, 5) == 0.0

    @pytest.mark.parametrize("of", [2, 1.5, 0])
    def test_lambda_rule_needs_of_above_two(self, of):
        with pytest.raises(ParameterError):
            lambda_rule(1.0, of)

    def test_classical_theory(self):
        # (1/10) (1/12) (0.5/255)^2
        assert classical_mse_theory(0.5, 8, 10) == pytest.approx(3.204e-8, rel=1e-3)
        assert classical_mse_theory(0.5, 8, 20) == pytest.approx(classical_mse_theory(0.5, 8, 10) / 2)
        assert classical_mse_theory(0.0, 8, 10) == 0.0

    def test_modulo_theory(self):
        assert modulo_q_mse_theory(0.5, 8, 10) == pytest.approx(5.006e-10, rel=1e-3)
        assert modulo_q_mse_theory(0.0, 8, 10) == 0.0
        ratio = modulo_q_mse_theory(0.5, 8, 10) / classical_mse_theory(0.5, 8, 10)
        assert ratio == pytest.approx(1 / 64, rel=1e-12)
        with pytest.raises(ParameterError):
            modulo_q_mse_theory(0.5, 8, 2)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 10), st.integers(1, 16), st.floats(2.5, 100), st.floats(0.1, 10))
    def test_quadratic_in_norm(self, norm, bits, of, scale):
        for f in (classical_mse_theory, modulo_q_mse_theory):
            assert f(scale * norm, bits, of) == pytest.approx(scale**2 * f(norm, bits, of), rel=1e-9)


class TestMeasuredErrors:
    def test_mse_identical_is_zero(self):
        x = np.random.default_rng(0).standard_normal(50)
        assert mse(x, x) == 0.0

    def test_mse_uses_interior(self):
        a = np.zeros(10)
        b = np.zeros(10)
        b[0] = b[-1] = 100.0
        b[5] = 1.0
        assert mse(a, b, guard=0.1) == pytest.approx(1 / 8)
        with pytest.raises(ParameterError):
            mse(a, b[:-1])

    def test_mod_hf_identical_and_mismatch(self):
        s = SampleSequence(np.linspace(-1, 1, 40), 1e-3)
        assert mod_hf_mse(s, s) == 0.0
        assert mod_hf_mse(s, s, cutoff=100.0) == 0.0
        with pytest.raises(ParameterError):
            mod_hf_mse(s, SampleSequence(np.zeros(39), 1e-3))
        with pytest.raises(ParameterError):
            mod_hf_mse(s.values, s.values, cutoff=100.0)

    def test_lowpassed_mse_removes_out_of_band_error(self):
        n = 200
        err = 0.1 * (-1.0) ** np.arange(n)
        assert lowpassed_mse(err, 1.0, 0.5 * math.pi) < 1e-24
        assert mse(err, np.zeros(n)) == pytest.approx(0.01)


class TestDecomposition:
    def test_exact_sum_not_flagged(self):
        check = total_mod_mse_check(row(live=1e-8, hf=2e-9, q=8e-9))
        assert check.relative_gap == pytest.approx(0.0, abs=1e-12)
        assert not check.flagged

    def test_quantization_free_case(self):
        check = total_mod_mse_check(row(live=4e-9, hf=4e-9, q=0.0))
        assert check.relative_gap < 1e-6

    def test_large_gap_flagged(self):
        check = total_mod_mse_check(row(live=1e-8, hf=0.0, q=5e-9))
        assert check.relative_gap == pytest.approx(0.5)
        assert check.flagged

    def test_all_zero(self):
        assert not total_mod_mse_check(row(live=0.0, hf=0.0, q=0.0)).flagged

    def test_negative_error_rejected(self):
        with pytest.raises(ParameterError):
            row(hf=-1.0)


class TestSlope:
    ofs = [4, 8, 16, 32]

    def test_inverse_first_power(self):
        assert loglog_slope(self.ofs, [2.0 / o for o in self.ofs]) == pytest.approx(-1, abs=1e-9)

    def test_inverse_cube(self):
        assert loglog_slope(self.ofs, [5.0 / o**3 for o in self.ofs]) == pytest.approx(-3, abs=1e-9)

    def test_needs_three_positive_points(self):
        with pytest.raises(ParameterError):
            loglog_slope([4, 8], [1, 2])
        with pytest.raises(ParameterError):
            loglog_slope([4, 8, 16], [1, 0, 2])


class TestAggregate:
    def test_mean_and_sem(self):
        rows = [row(trial=t, live=v, warn=int(t == 1)) for t, v in enumerate([1.0, 2.0, 3.0])]
        rows.append(row(trial=0, of=5.0, live=7.0))
        out = aggregate(reversed(rows))
        by_of = {e["of"]: e for e in out}
        e = by_of[10.0]
        assert e["n_trials"] == 3
        assert e["mean_e_mod_live"] == pytest.approx(2.0)
        assert e["sem_e_mod_live"] == pytest.approx(1.0 / math.sqrt(3))
        assert e["n_warn"] == 1
        assert by_of[5.0]["sem_e_mod_live"] == 0.0

    def test_field_list(self):
        names = breakdown_fields()
        assert names[:4] == ["trial", "bits", "of", "comb_n"]
        assert tuple(names[4:10]) == ERROR_FIELDS
