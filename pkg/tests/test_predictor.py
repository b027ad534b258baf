"""Queue predictor: persistence baseline, attention forward pass, and the
weight-file contract (schema, shapes, checksum)."""

import json

import numpy as np
import pytest

from dcnsim.predictor import (MATRIX_SHAPES, AttentionWeights, PredictorError,
                              WeightChecksumError, WeightSchemaError,
                              WeightShapeError, attention_forward,
                              canonical_payload, load_weights,
                              predict_attention, predict_persistence,
                              save_weights, sinusoidal_encoding,
                              weights_checksum)


def _random_weights(seed=0, d=4, f=8, seq=16, mean=0.0, scale=1.0):
    rng = np.random.default_rng(seed)
    dims = {"1": 1, "d": d, "f": f}
    mats = {name: rng.normal(0.0, 0.2, size=(dims[r], dims[c]))
            for name, (r, c) in MATRIX_SHAPES.items()}
    mats["ln1_gamma"] = np.ones((1, d))
    mats["ln2_gamma"] = np.ones((1, d))
    return AttentionWeights(d_model=d, d_ff=f, seq_len_max=seq,
                            norm_mean=mean, norm_scale=scale, matrices=mats)


class TestPersistence:
    def test_mean_of_window(self):
        assert predict_persistence([10.0, 20.0], 10) == 15.0

    def test_window_truncates(self):
        assert predict_persistence([100.0, 1.0, 3.0], 2) == 2.0

    def test_single_sample(self):
        assert predict_persistence([7.0]) == 7.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            predict_persistence([])


class TestSinusoidalEncoding:
    def test_shape_and_first_row(self):
        pe = sinusoidal_encoding(5, 4)
        assert pe.shape == (5, 4)
        # position 0: sin(0) = 0, cos(0) = 1
        assert np.allclose(pe[0], [0.0, 1.0, 0.0, 1.0])

    def test_values_bounded(self):
        pe = sinusoidal_encoding(64, 8)
        assert np.all(np.abs(pe) <= 1.0)


class TestAttentionForward:
    def test_output_shape(self):
        w = _random_weights()
        out = attention_forward(np.linspace(-1, 1, 10), w)
        assert out.shape == (10, w.d_model)

    def test_constant_input_no_posenc_rows_equal(self):
        # without positional encoding a constant sequence is permutation
        # symmetric, so every output row must be identical
        w = _random_weights(1)
        w.posenc = "none"
        out = attention_forward(np.full(6, 0.3), w)
        assert np.allclose(out, out[0])

    def test_prediction_finite_and_deterministic(self):
        w = _random_weights(2)
        trace = [1.0, 2.0, 3.0, 2.0, 1.0]
        a = predict_attention(trace, w)
        b = predict_attention(trace, w)
        assert a == b
        assert np.isfinite(a)

    def test_zero_head_returns_norm_mean(self):
        w = _random_weights(3, mean=42.0, scale=2.0)
        w.matrices["head_w"] = np.zeros((w.d_model, 1))
        w.matrices["head_b"] = np.zeros((1, 1))
        assert predict_attention([40.0, 44.0], w) == pytest.approx(42.0)

    def test_long_trace_uses_tail_only(self):
        w = _random_weights(4, seq=4)
        long = [9.0] * 50 + [1.0, 2.0, 3.0, 4.0]
        assert predict_attention(long, w) == predict_attention(
            [1.0, 2.0, 3.0, 4.0], w)

    def test_nonfinite_raises(self):
        # normalization overflow propagates through the network
        w = _random_weights(5, scale=1e-300)
        with np.errstate(all="ignore"):
            with pytest.raises(PredictorError):
                predict_attention([1e300, -1e300], w)


class TestWeightFileContract:
    def test_save_load_round_trip(self, tmp_path):
        w = _random_weights(10, mean=1.5, scale=3.0)
        p = tmp_path / "w.json"
        save_weights(w, p)
        back = load_weights(p)
        assert back.d_model == w.d_model
        assert back.norm_mean == w.norm_mean
        for name in MATRIX_SHAPES:
            assert np.array_equal(back.matrices[name], w.matrices[name])
        assert weights_checksum(back) == weights_checksum(w)

    def test_save_is_byte_stable(self, tmp_path):
        w = _random_weights(11)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_weights(w, p1)
        save_weights(w, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_checksum_changes_with_any_value(self):
        w = _random_weights(12)
        c0 = weights_checksum(w)
        w.matrices["head_b"] = w.matrices["head_b"] + 1e-12
        assert weights_checksum(w) != c0

    def test_canonical_payload_header(self):
        w = _random_weights(13)
        assert canonical_payload(w).startswith(b"dcnsim-qpred|v1|4|8|16|sinusoidal|")

    def test_corrupted_data_rejected(self, tmp_path):
        w = _random_weights(14)
        p = tmp_path / "w.json"
        save_weights(w, p)
        doc = json.loads(p.read_text())
        doc["matrices"]["wq"]["data"][0] += 0.5
        p.write_text(json.dumps(doc))
        with pytest.raises(WeightChecksumError):
            load_weights(p)

    def test_truncated_file_rejected(self, tmp_path):
        w = _random_weights(15)
        p = tmp_path / "w.json"
        save_weights(w, p)
        p.write_text(p.read_text()[:100])
        with pytest.raises(WeightChecksumError):
            load_weights(p)

    def test_bad_schema_version(self, tmp_path):
        w = _random_weights(16)
        p = tmp_path / "w.json"
        save_weights(w, p)
        doc = json.loads(p.read_text())
        doc["schema_version"] = 99
        p.write_text(json.dumps(doc))
        with pytest.raises(WeightSchemaError):
            load_weights(p)

    def test_wrong_shape(self, tmp_path):
        w = _random_weights(17)
        p = tmp_path / "w.json"
        save_weights(w, p)
        doc = json.loads(p.read_text())
        doc["matrices"]["head_w"]["data"].append(0.0)
        p.write_text(json.dumps(doc))
        with pytest.raises(WeightShapeError):
            load_weights(p)

    def test_missing_matrix(self):
        w = _random_weights(18)
        del w.matrices["wv"]
        with pytest.raises(WeightSchemaError):
            w.validate()

    def test_nonfinite_matrix(self):
        w = _random_weights(19)
        w.matrices["wq"][0, 0] = float("nan")
        with pytest.raises(WeightSchemaError):
            w.validate()

    def test_bad_norm_scale(self):
        w = _random_weights(20)
        w.norm_scale = 0.0
        with pytest.raises(WeightSchemaError):
            w.validate()
