import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from streamdec.core import EOS
from streamdec.denoisers import ScriptedOracle
from streamdec.denoisers.base import Entry
from streamdec.denoisers.scripted import uniform_script
from streamdec.errors import (
    DivideByZeroError, EmptyRunError, EmptyTraceError, InvalidCountsError, NoAttentionDataError,
)
from streamdec.metrics import (
    ConfidenceRow, CostLedger, Counters, ThroughputReport, make_report, monotone_blocks, read_trace_jsonl,
    record_forward, speedup, summarize_attention, summarize_confidence, throughput_proxy, write_rows_csv,
    write_trace_jsonl,
)
from streamdec.scheduler import DecodeConfig, DecodeResult, StepRecord, decode_sequence


def brute_percentile(values, q):
    s = sorted(values)
    h = (len(s) - 1) * q / 100.0
    lo = int(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def rec(block, step, confs, attn=None):
    return StepRecord(block, step, 0.9, 1.0, [], candidates=[(i, c) for i, c in enumerate(confs)],
                      attention_by_region=attn)


def test_record_forward_examples():
    ledger = CostLedger()
    record_forward(ledger, 0, 161, 812, True)
    assert ledger.attention_pairs == 130_732 == 161 * 812
    record_forward(ledger, 1, 1, 1)
    assert ledger.attention_pairs == 130_733
    assert (ledger.forward_calls, ledger.cache_hits, ledger.cache_misses) == (2, 1, 0)
    assert ledger.block(0).query_tokens == 161 and ledger.block(1).key_tokens == 1
    with pytest.raises(InvalidCountsError):
        record_forward(ledger, 0, 5, 3)
    with pytest.raises(InvalidCountsError):
        record_forward(ledger, 0, 0, 3)


def test_ledger_round_trip_and_merge():
    a, b = CostLedger(), CostLedger()
    a.record_forward(0, 3, 9, False)
    b.record_forward(0, 2, 5, True)
    b.record_forward(1, 4, 4)
    assert CostLedger.from_dict(a.to_dict()) == a
    ab, ba = CostLedger(), CostLedger()
    for x in (a, b):
        ab.merge(x)
    for x in (b, a):
        ba.merge(x)
    for name in ("forward_calls", "query_tokens", "key_tokens", "attention_pairs", "cache_hits", "cache_misses"):
        assert getattr(ab, name) == getattr(ba, name) == getattr(a, name) + getattr(b, name)
    assert ab.per_block[0] == ba.per_block[0] == Counters(2, 5, 14, 37, 1, 1)


def _result(tokens):
    return DecodeResult(tokens=np.asarray(tokens), trace=[], ledger=CostLedger())


def test_throughput_examples():
    ledger = CostLedger(query_tokens=10_000, attention_pairs=1, forward_calls=1)
    tokens = np.r_[np.full(200, 9), np.full(56, EOS)]
    assert throughput_proxy(ledger, _result(tokens)).proxy_tps_q == 0.02
    r = throughput_proxy(ledger, _result(np.full(256, EOS)))
    assert (r.non_eos_tokens, r.proxy_tps_q, r.proxy_tps_a) == (0, 0.0, 0.0)
    with pytest.raises(EmptyRunError):
        throughput_proxy(ledger, _result([]))


def test_throughput_after_early_exit():
    script = uniform_script(16, 32, 0.99)
    script[(1, 0, 0)] = (EOS, 0.99)
    res = decode_sequence([5], ScriptedOracle(script, vocab=16), DecodeConfig(L=512, K=32, w=2))
    assert res.exited_early_at == 1
    assert throughput_proxy(res.ledger, res).non_eos_tokens <= 64


def test_speedup_identity_and_zero():
    r = make_report(100, 1000, 50_000, 10)
    s = speedup(r, r)
    assert (s.tps_q, s.tps_a, s.query_reduction) == (1.0, 1.0, 1.0)
    with pytest.raises(DivideByZeroError):
        speedup(r, make_report(100, 0, 0, 0))


@given(st.integers(1, 10**6), st.integers(1, 10**6), st.integers(1, 10**4), st.integers(1, 10**6),
       st.integers(1, 10**6), st.integers(1, 10**4))
def test_speedup_symmetry(n1, q1, c1, n2, q2, c2):
    a = make_report(n1, q1, q1 * 7, c1)
    b = make_report(n2, q2, q2 * 3, c2)
    ab, ba = speedup(a, b), speedup(b, a)
    assert abs(ab.tps_q * ba.tps_q - 1) <= 1e-12
    assert abs(ab.tps_a * ba.tps_a - 1) <= 1e-12
    assert abs(ab.query_reduction * ba.query_reduction - 1) <= 1e-12


def test_summarize_confidence_examples():
    (row,) = summarize_confidence([rec(0, 0, [0.2, 0.4, 0.6, 0.8])])
    assert row.mean == pytest.approx(0.5, abs=1e-15)
    assert row.q25 == pytest.approx(0.35, abs=1e-15)
    assert row.q75 == pytest.approx(0.65, abs=1e-15)
    (row,) = summarize_confidence([rec(0, 0, [0.9] * 5)])
    assert row.mean == row.q25 == row.q75 == 0.9
    with pytest.raises(EmptyTraceError):
        summarize_confidence([])


def test_percentile_matches_sort_oracle_1000_inputs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        vals = rng.random(int(rng.integers(1, 60))).tolist()
        (row,) = summarize_confidence([rec(0, 0, vals)])
        assert abs(row.q25 - brute_percentile(vals, 25)) <= 1e-12
        assert abs(row.q75 - brute_percentile(vals, 75)) <= 1e-12
        assert row.q25 <= row.q75


def test_pooling_across_runs():
    rows = summarize_confidence([rec(0, 0, [0.1, 0.3]), rec(0, 0, [0.5]), rec(0, 1, [0.7])])
    assert [(r.block, r.step) for r in rows] == [(0, 0), (0, 1)]
    assert rows[0].mean == pytest.approx(0.3)


def test_monotone_blocks():
    rows = [ConfidenceRow(0, 0, 0.3, 0, 0, 1), ConfidenceRow(0, 1, 0.5, 0, 0, 1),
            ConfidenceRow(1, 0, 0.6, 0, 0, 1), ConfidenceRow(1, 1, 0.4, 0, 0, 1)]
    assert monotone_blocks(rows) == {0: True, 1: False}


def test_summarize_attention():
    rows = summarize_attention([rec(0, 0, [], (0.2, 0.5, 0.3)), rec(0, 0, [], (0.4, 0.5, 0.1))])
    assert (rows[0].prefix, rows[0].current, rows[0].suffix) == pytest.approx((0.3, 0.5, 0.2))
    with pytest.raises(NoAttentionDataError):
        summarize_attention([rec(0, 0, [0.5])])
    with pytest.raises(NoAttentionDataError):
        summarize_attention([])


def test_scripted_run_has_no_attention():
    res = decode_sequence([5], ScriptedOracle(uniform_script(2, 4, 0.5), vocab=16), DecodeConfig(L=8, K=4))
    with pytest.raises(NoAttentionDataError):
        summarize_attention(res.trace)


def test_trace_jsonl_and_csv(tmp_path):
    recs = [StepRecord(0, 0, 0.9, 1.0, [Entry(3, 9, 0.95)], False, (0.1, 0.8, 0.1), [(3, 0.95)]),
            StepRecord(0, 1, 0.8, 0.5, [Entry(4, 10, 0.2)], True)]
    path = tmp_path / "t.jsonl"
    write_trace_jsonl(recs, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2 and '"attn"' in lines[0] and '"attn"' not in lines[1]
    assert read_trace_jsonl(path) == recs
    csv_path = tmp_path / "c.csv"
    write_rows_csv(summarize_confidence(recs), csv_path, ConfidenceRow)
    with open(csv_path) as fh:
        header = next(csv.reader(fh))
    assert header == ["block", "step", "mean", "q25", "q75", "n_masked_remaining"]


def test_report_round_trip():
    r = make_report(5, 10, 100, 2, 0.5)
    assert ThroughputReport.from_dict(r.to_dict()) == r
