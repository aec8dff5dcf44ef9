"""Cost accounting, throughput proxies and trace analytics.

Cost convention: every forward call costs ``q`` query tokens and ``k`` key
tokens, ``q * k`` attention pairs. Prefix tokens are keys on every call but
queries only when the prefix cache is (re)built or when there is no cache.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, fields
from os import PathLike
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Union

import numpy as np

from .core import EOS, MASK
from .errors import (
    DivideByZeroError,
    EmptyRunError,
    EmptyTraceError,
    InvalidCountsError,
    NoAttentionDataError,
)

if TYPE_CHECKING:
    from .scheduler import DecodeResult, StepRecord

_COUNTERS = ("forward_calls", "query_tokens", "key_tokens", "attention_pairs", "cache_hits", "cache_misses")


@dataclass
class Counters:
    forward_calls: int = 0
    query_tokens: int = 0
    key_tokens: int = 0
    attention_pairs: int = 0
    cache_hits: int = 0
    cache_misses: int = 0

    def add(self, q: int, k: int, cache_hit: Optional[bool]) -> None:
        self.forward_calls += 1
        self.query_tokens += q
        self.key_tokens += k
        self.attention_pairs += q * k
        if cache_hit is True:
            self.cache_hits += 1
        elif cache_hit is False:
            self.cache_misses += 1

    def merge(self, other: "Counters") -> None:
        for name in _COUNTERS:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def is_zero(self) -> bool:
        return all(getattr(self, name) == 0 for name in _COUNTERS)


@dataclass
class CallRecord:
    block: int
    q: int
    k: int
    cache_hit: Optional[bool]


@dataclass
class CostLedger(Counters):
    """Run-wide counters plus the same counters bucketed by block.

    ``calls`` keeps every forward call in order so per-step costs can be
    inspected after the fact.
    """

    per_block: dict[int, Counters] = field(default_factory=dict)
    calls: list[CallRecord] = field(default_factory=list)

    @classmethod
    def for_blocks(cls, n_blocks: int) -> "CostLedger":
        return cls(per_block={b: Counters() for b in range(n_blocks)})

    def block(self, b: int) -> Counters:
        return self.per_block.get(b, Counters())

    def record_forward(self, block: int, q: int, k: int, cache_hit: Optional[bool] = None) -> "CostLedger":
        if q < 1 or k < q:
            raise InvalidCountsError(f"need 1 <= q <= k, got q={q}, k={k}")
        self.add(q, k, cache_hit)
        self.per_block.setdefault(block, Counters()).add(q, k, cache_hit)
        self.calls.append(CallRecord(block, q, k, cache_hit))
        return self

    def merge(self, other: "Counters") -> None:
        Counters.merge(self, other)
        if isinstance(other, CostLedger):
            for b, c in other.per_block.items():
                self.per_block.setdefault(b, Counters()).merge(c)
            self.calls.extend(other.calls)

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in _COUNTERS}
        out["per_block"] = {str(b): asdict(c) for b, c in sorted(self.per_block.items())}
        out["calls"] = [[c.block, c.q, c.k, c.cache_hit] for c in self.calls]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CostLedger":
        ledger = cls(**{name: int(data[name]) for name in _COUNTERS})
        ledger.per_block = {int(b): Counters(**c) for b, c in data.get("per_block", {}).items()}
        ledger.calls = [CallRecord(*c) for c in data.get("calls", [])]
        return ledger


def record_forward(ledger: CostLedger, block: int, q: int, k: int,
                   cache_hit: Optional[bool] = None) -> CostLedger:
    return ledger.record_forward(block, q, k, cache_hit)


@dataclass
class ThroughputReport:
    non_eos_tokens: int
    query_tokens: int
    attention_pairs: int
    forward_calls: int
    proxy_tps_q: float
    proxy_tps_a: float
    wall_clock_seconds: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ThroughputReport":
        return cls(**data)


def make_report(non_eos: int, query_tokens: int, attention_pairs: int, forward_calls: int,
                wall_clock_seconds: Optional[float] = None) -> ThroughputReport:
    return ThroughputReport(
        non_eos_tokens=non_eos,
        query_tokens=query_tokens,
        attention_pairs=attention_pairs,
        forward_calls=forward_calls,
        proxy_tps_q=non_eos / query_tokens if query_tokens else 0.0,
        proxy_tps_a=non_eos / attention_pairs if attention_pairs else 0.0,
        wall_clock_seconds=wall_clock_seconds,
    )


def throughput_proxy(ledger: CostLedger, result: "DecodeResult",
                     wall_clock_seconds: Optional[float] = None) -> ThroughputReport:
    """Generated tokens per query token and per attention pair; EOS is not counted."""
    tokens = np.asarray(result.tokens)
    if tokens.size == 0 or np.any(tokens == MASK):
        raise EmptyRunError("run has no output or left masked slots")
    non_eos = int(np.count_nonzero(tokens != EOS))
    return make_report(non_eos, ledger.query_tokens, ledger.attention_pairs, ledger.forward_calls,
                       wall_clock_seconds)


@dataclass(frozen=True)
class Speedup:
    tps_q: float
    tps_a: float
    query_reduction: float


def speedup(ours: ThroughputReport, baseline: ThroughputReport) -> Speedup:
    """Proxy ratios ours/baseline.

    ``query_reduction`` compares mean query tokens per forward call
    (baseline over ours).
    """
    if baseline.query_tokens == 0 or baseline.proxy_tps_q == 0 or baseline.proxy_tps_a == 0:
        raise DivideByZeroError("baseline throughput proxies are zero")
    if ours.forward_calls == 0 or ours.query_tokens == 0:
        raise DivideByZeroError("our run made no forward calls")
    per_call_ours = ours.query_tokens / ours.forward_calls
    per_call_base = baseline.query_tokens / baseline.forward_calls
    return Speedup(
        tps_q=ours.proxy_tps_q / baseline.proxy_tps_q,
        tps_a=ours.proxy_tps_a / baseline.proxy_tps_a,
        query_reduction=per_call_base / per_call_ours,
    )


# -- trace analytics ---------------------------------------------------------

@dataclass(frozen=True)
class ConfidenceRow:
    block: int
    step: int
    mean: float
    q25: float
    q75: float
    n_masked_remaining: int


@dataclass(frozen=True)
class AttentionRow:
    block: int
    step: int
    prefix: float
    current: float
    suffix: float


def percentile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile (numpy's default ``linear`` method)."""
    return float(np.percentile(np.asarray(values, dtype=np.float64), q))


def summarize_confidence(trace: Iterable["StepRecord"]) -> list[ConfidenceRow]:
    """Mean and IQR of every candidate confidence seen at each (block, step).

    Records from several runs are pooled. Candidates are the masked
    current-block positions at that step, accepted or not.
    """
    pooled: dict[tuple[int, int], list[float]] = {}
    counts: dict[tuple[int, int], list[int]] = {}
    for rec in trace:
        key = (rec.block, rec.step)
        confs = [c for _, c in rec.candidates]
        pooled.setdefault(key, []).extend(confs)
        counts.setdefault(key, []).append(len(confs))
    rows = []
    for key in sorted(pooled):
        if not pooled[key]:
            continue
        vals = np.asarray(pooled[key], dtype=np.float64)
        q25, q75 = np.percentile(vals, [25.0, 75.0])
        rows.append(ConfidenceRow(
            block=key[0], step=key[1], mean=float(vals.mean()), q25=float(q25), q75=float(q75),
            n_masked_remaining=int(round(float(np.mean(counts[key])))),
        ))
    if not rows:
        raise EmptyTraceError("no step records with candidate confidences to summarise")
    return rows


def summarize_attention(trace: Iterable["StepRecord"]) -> list[AttentionRow]:
    pooled: dict[tuple[int, int], list[tuple[float, float, float]]] = {}
    seen = False
    for rec in trace:
        seen = True
        if rec.attention_by_region is None:
            raise NoAttentionDataError(f"record (block {rec.block}, step {rec.step}) has no attention data")
        pooled.setdefault((rec.block, rec.step), []).append(tuple(rec.attention_by_region))
    if not seen:
        raise NoAttentionDataError("empty trace")
    rows = []
    for key in sorted(pooled):
        m = np.asarray(pooled[key], dtype=np.float64).mean(axis=0)
        rows.append(AttentionRow(key[0], key[1], float(m[0]), float(m[1]), float(m[2])))
    return rows


def monotone_blocks(rows: Sequence[ConfidenceRow], tol: float = 0.0) -> dict[int, bool]:
    """Per block: is mean confidence non-decreasing across steps?"""
    by_block: dict[int, list[ConfidenceRow]] = {}
    for r in rows:
        by_block.setdefault(r.block, []).append(r)
    verdict = {}
    for b, rs in sorted(by_block.items()):
        means = [r.mean for r in sorted(rs, key=lambda r: r.step)]
        verdict[b] = all(later >= earlier - tol for earlier, later in zip(means, means[1:]))
    return verdict


# -- file formats ------------------------------------------------------------

def write_trace_jsonl(records: Iterable["StepRecord"], path: Union[str, PathLike]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")))
            fh.write("\n")


def read_trace_jsonl(path: Union[str, PathLike]) -> list["StepRecord"]:
    from .scheduler import StepRecord

    with open(path) as fh:
        return [StepRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def write_rows_csv(rows: Sequence, path: Union[str, PathLike], row_type: type) -> None:
    names = [f.name for f in fields(row_type)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for r in rows:
            writer.writerow([getattr(r, n) for n in names])
