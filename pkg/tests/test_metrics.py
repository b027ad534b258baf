"""Metrics: FCT error statistics, JCT, throughput, speedup, CSV round trip."""

import numpy as np
import pytest

from dcnsim.metrics import (CSV_COLUMNS, FlowRecord, RunSummary, fct_error_p99,
                            fct_errors, job_completion_time, records_from_csv,
                            records_to_csv, speedup, throughput)


def _rec(fid, fct, release=0.0, mode="PLS"):
    return FlowRecord(id=fid, src="h0", dst="h1", size_bits=1e6,
                      release_s=release, start_s=release,
                      completion_s=release + fct, mode=mode)


class TestFctErrors:
    def test_relative_errors(self):
        base = [_rec("a", 1.0), _rec("b", 2.0)]
        cand = [_rec("a", 1.1), _rec("b", 1.8)]
        errs = fct_errors(cand, base)
        assert sorted(np.round(errs, 12)) == [0.1, 0.1]

    def test_id_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fct_errors([_rec("a", 1.0)], [_rec("b", 1.0)])

    def test_zero_baseline_fct_rejected(self):
        with pytest.raises(ValueError):
            fct_errors([_rec("a", 1.0)], [_rec("a", 0.0)])

    def test_p99_linear_interpolation(self):
        # errors {1, 2, 3, 4}% -> p99 = 3.97% (linear between order stats)
        base = [_rec(f"f{i}", 1.0) for i in range(4)]
        cand = [_rec(f"f{i}", 1.0 + 0.01 * (i + 1)) for i in range(4)]
        stats = fct_error_p99(cand, base)
        assert stats["p99"] == pytest.approx(3.97)
        assert stats["max"] == pytest.approx(4.0)
        assert stats["mean"] == pytest.approx(2.5)

    def test_identical_runs_zero_error(self):
        base = [_rec("a", 1.0), _rec("b", 2.5)]
        stats = fct_error_p99(base, base)
        assert stats == {"p99": 0.0, "max": 0.0, "mean": 0.0}


class TestJct:
    def test_span(self):
        recs = [_rec("a", 1.0, release=0.5), _rec("b", 2.0, release=0.0)]
        assert job_completion_time(recs) == 2.0

    def test_empty(self):
        assert job_completion_time([]) == 0.0


class TestThroughput:
    def test_series_and_mean(self):
        # 2e6 bits in 10 us -> 200 Gb/s
        trace = [(0.0, 0.0), (10e-6, 2e6), (20e-6, 2e6)]
        series, mean = throughput(trace)
        assert series[0] == (10e-6, pytest.approx(200e9))
        assert series[1] == (20e-6, 0.0)
        assert mean == pytest.approx(100e9)

    def test_interval_filter(self):
        trace = [(0.0, 0.0), (1.0, 10.0), (2.0, 30.0)]
        _, mean = throughput(trace, t0=1.0)
        assert mean == pytest.approx(20.0)

    def test_short_trace_rejected(self):
        with pytest.raises(ValueError):
            throughput([(0.0, 0.0)])


class TestSpeedup:
    def test_ratio(self):
        assert speedup(1.0, 5.0) == 5.0

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            speedup(0.0, 1.0)
        with pytest.raises(ValueError):
            speedup(1.0, -1.0)


class TestCsv:
    def test_round_trip_exact(self):
        recs = [_rec("b", 2.0, release=0.25, mode="HYBRID"),
                _rec("a", 1.0 / 3.0)]
        back = records_from_csv(records_to_csv(recs))
        assert [r.id for r in back] == ["a", "b"]  # sorted by id
        by_id = {r.id: r for r in back}
        for r in recs:
            b = by_id[r.id]
            assert (b.size_bits, b.release_s, b.completion_s, b.mode) == (
                r.size_bits, r.release_s, r.completion_s, r.mode)

    def test_header(self):
        text = records_to_csv([_rec("a", 1.0)])
        assert text.splitlines()[0] == ",".join(CSV_COLUMNS)

    def test_deterministic_output(self):
        recs = [_rec("a", 0.1), _rec("b", 0.2)]
        assert records_to_csv(recs) == records_to_csv(list(reversed(recs)))


class TestRunSummary:
    def test_json_round_trip(self):
        import json
        s = RunSummary(mode="HYBRID", seed=1, jct=0.5, wall_clock=2.0,
                       n_flows=10, switch_count=3, flow_mode_fraction=0.7)
        doc = json.loads(s.to_json())
        assert doc["mode"] == "HYBRID"
        assert doc["flow_mode_fraction"] == 0.7
