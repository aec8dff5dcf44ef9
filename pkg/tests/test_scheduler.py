import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streamdec.core import EOS, FIRST_REGULAR, MASK, init_sequence
from streamdec.denoisers import LocalMarkovOracle, ScriptedOracle, ToyTransformer
from streamdec.denoisers.base import Entry, Predictions
from streamdec.denoisers.scripted import random_script, uniform_script
from streamdec.errors import (
    BlockAlreadyDoneError, ConfigInvalidError, EmptyPredictionsError, ParamOutOfRangeError, UnknownKindError,
)
from streamdec.metrics import CostLedger
from streamdec.presets import PRESETS, preset_config
from streamdec.pruner import PrefixCache
from streamdec.scheduler import (
    DecodeConfig, StepRecord, adaptive_threshold, decode_block, decode_sequence, early_exit_triggered,
    run_baseline, select_positions, select_top_k,
)


def preds(confs, positions=None, tokens=None):
    n = len(confs)
    return Predictions(
        positions=np.arange(n) if positions is None else np.asarray(positions),
        tokens=np.full(n, 7) if tokens is None else np.asarray(tokens),
        confidences=np.asarray(confs, dtype=float),
    )


# -- threshold ----------------------------------------------------------------

def test_threshold_examples():
    assert adaptive_threshold(0.9, 0.3, 1.0) == 0.9
    assert adaptive_threshold(0.9, 0.4, 0.0) == 0.54
    assert adaptive_threshold(0.9, 0.5, 0.5) == 0.675


@pytest.mark.parametrize("args", [(0.0, 0.3, 0.5), (1.1, 0.3, 0.5), (0.9, -0.1, 0.5), (0.9, 1.2, 0.5),
                                  (0.9, 0.3, 1.5), (0.9, 0.3, -0.01)])
def test_threshold_out_of_range(args):
    with pytest.raises(ParamOutOfRangeError):
        adaptive_threshold(*args)


@given(st.floats(1e-6, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_threshold_monotone_in_r_mask(tau0, alpha, r1, r2):
    lo, hi = sorted((r1, r2))
    assert adaptive_threshold(tau0, alpha, lo) <= adaptive_threshold(tau0, alpha, hi)


# -- selection ----------------------------------------------------------------

def test_select_examples():
    assert [e.position for e in select_positions(preds([0.95, 0.50, 0.91]), 0.9).accepted] == [0, 2]
    sel = select_positions(preds([0.30, 0.20]), 0.9)
    assert [e.position for e in sel.accepted] == [0] and sel.fallback_used
    assert [e.position for e in select_positions(preds([0.50, 0.50]), 0.9).accepted] == [0]


def test_select_tie_break_is_position_not_order():
    sel = select_positions(preds([0.5, 0.5, 0.1], positions=[9, 4, 1]), 0.9)
    assert sel.accepted == [Entry(4, 7, 0.5)]


def test_select_empty():
    with pytest.raises(EmptyPredictionsError):
        select_positions(preds([]), 0.5)
    with pytest.raises(EmptyPredictionsError):
        select_top_k(preds([]), 2)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.floats(0.01, 1))
def test_select_soundness(confs, tau):
    sel = select_positions(preds(confs), tau)
    if sel.fallback_used:
        assert len(sel.accepted) == 1
        assert sel.accepted[0].confidence == max(confs)
        assert all(c < tau for c in confs)
    else:
        assert {e.position for e in sel.accepted} == {i for i, c in enumerate(confs) if c >= tau}


def test_select_top_k():
    sel = select_top_k(preds([0.1, 0.9, 0.5, 0.9, 0.2]), 3)
    assert [e.position for e in sel.accepted] == [1, 2, 3]


# -- decode_block --------------------------------------------------------------

def _block_setup(script, K=4, L=4, **cfg):
    state = init_sequence([5, 6], L, K)
    config = DecodeConfig(L=L, K=K, **cfg)
    return state, config, ScriptedOracle(script, vocab=16), PrefixCache(2, K), CostLedger.for_blocks(L // K)


def test_decode_block_hand_simulated():
    script = {(0, 0, 0): (8, 0.95), (0, 0, 1): (9, 0.30), (0, 0, 2): (10, 0.92), (0, 0, 3): (11, 0.10),
              (0, 1, 1): (12, 0.93), (0, 1, 3): (13, 0.20), (0, 2, 3): (14, 0.10)}
    state, cfg, den, cache, ledger = _block_setup(script, alpha=0.0, tau0=0.9)
    recs = decode_block(state, 0, den, cfg, cache, ledger)
    assert [[e.position - 2 for e in r.accepted] for r in recs] == [[0, 2], [1], [3]]
    assert [r.fallback_used for r in recs] == [False, False, True]
    assert state.gen.tolist() == [8, 12, 10, 14]
    assert ledger.forward_calls == 3


def test_decode_block_one_step_and_k_steps():
    state, cfg, den, cache, ledger = _block_setup(uniform_script(1, 4, 0.99))
    assert len(decode_block(state, 0, den, cfg, cache, ledger)) == 1
    state, cfg, den, cache, ledger = _block_setup(uniform_script(1, 4, 0.0))
    recs = decode_block(state, 0, den, cfg, cache, ledger)
    assert len(recs) == 4 and all(r.fallback_used and len(r.accepted) == 1 for r in recs)
    with pytest.raises(BlockAlreadyDoneError):
        decode_block(state, 0, den, cfg, cache, ledger)


# -- early exit ----------------------------------------------------------------

def test_early_exit_definition():
    cfg = DecodeConfig()
    passing = [StepRecord(0, 0, 0.9, 1.0, [Entry(0, EOS, 0.97)])]
    fallback = [StepRecord(0, 0, 0.9, 1.0, [Entry(0, EOS, 0.3)], fallback_used=True)]
    assert early_exit_triggered(passing, cfg)
    assert not early_exit_triggered(fallback, cfg)
    assert not early_exit_triggered(passing, dataclasses.replace(cfg, early_exit=False))


def _eos_script(N, K, block, conf):
    script = uniform_script(N, K, 0.99)
    script[(block, 0, 3)] = (EOS, conf)
    return script


def test_decode_sequence_early_exit_and_toggle():
    den = ScriptedOracle(_eos_script(16, 8, 1, 0.97), vocab=16)
    cfg = DecodeConfig(L=128, K=8, w=2)
    res = decode_sequence([5, 6, 7], den, cfg)
    assert res.exited_early_at == 1
    assert all(res.ledger.block(b).is_zero() for b in range(2, 16))
    assert np.all(res.tokens[16:] == EOS)
    off = decode_sequence([5, 6, 7], den, dataclasses.replace(cfg, early_exit=False))
    assert off.exited_early_at is None
    assert set(off.steps_per_block()) == set(range(16))


def test_fallback_eos_does_not_exit():
    script = uniform_script(4, 4, 0.0)
    script[(0, 0, 0)] = (EOS, 0.3)
    res = decode_sequence([5], ScriptedOracle(script, vocab=16), DecodeConfig(L=16, K=4, w=1))
    assert res.exited_early_at is None
    assert res.tokens[0] == EOS
    assert res.trace[0].fallback_used


def test_k_equals_one_is_autoregressive():
    res = decode_sequence([5], ScriptedOracle(uniform_script(4, 1, 0.2), vocab=16), DecodeConfig(L=4, K=1, w=1))
    assert res.steps_per_block() == {0: 1, 1: 1, 2: 1, 3: 1}


# -- baselines ----------------------------------------------------------------

def test_vanilla_fixed_steps():
    den = ToyTransformer(16, 64, 0)
    res = run_baseline(np.arange(3, 19), den, "vanilla", DecodeConfig(L=64, K=32, steps_per_block=8))
    assert res.steps_per_block() == {0: 8, 1: 8}
    assert all(len(r.accepted) == 4 and r.tau == 0.0 for r in res.trace)
    assert res.ledger.cache_hits == res.ledger.cache_misses == 0


def test_prefix_cache_vs_vanilla():
    den = ToyTransformer(32, 128, 1)
    prompt = np.arange(3, 43)
    cfg = DecodeConfig(L=64, K=16, steps_per_block=4)
    van = run_baseline(prompt, den, "vanilla", cfg)
    pc = run_baseline(prompt, den, "prefix_cache", cfg)
    assert np.array_equal(van.tokens, pc.tokens)
    assert pc.ledger.query_tokens < van.ledger.query_tokens
    assert pc.ledger.key_tokens == van.ledger.key_tokens


def test_fixed_threshold_forces_alpha_zero():
    den = ToyTransformer(16, 64, 2)
    res = run_baseline([3, 4, 5], den, "fixed_threshold", DecodeConfig(L=32, K=8, alpha=0.5, tau0=0.8))
    assert all(r.tau == 0.8 for r in res.trace)
    assert res.config.early_exit is False


def test_unknown_baseline():
    with pytest.raises(UnknownKindError):
        run_baseline([3], ToyTransformer(8, 16, 0), "streaming", DecodeConfig(L=8, K=4))


@pytest.mark.parametrize("field,kwargs", [
    ("K", {"L": 100, "K": 32}), ("alpha", {"alpha": 1.5}), ("tau0", {"tau0": 0.0}), ("w", {"w": -1}),
    ("scheduler_kind", {"scheduler_kind": "beam"}), ("steps_per_block", {"scheduler_kind": "vanilla", "steps_per_block": 5}),
    ("L", {"L": 0}),
])
def test_config_validation_names_field(field, kwargs):
    with pytest.raises(ConfigInvalidError) as info:
        DecodeConfig(**kwargs).validate()
    assert info.value.field == field


def test_step_record_json_round_trip():
    rec = StepRecord(1, 2, 0.81, 0.5, [Entry(40, 9, 0.93)], False, (0.2, 0.5, 0.3), [(40, 0.93), (41, 0.1)])
    assert StepRecord.from_json(rec.to_json()) == rec
    assert list(rec.to_json())[:7] == ["block", "step", "tau", "r_mask", "accepted", "fallback", "attn"]


def test_presets():
    assert len(PRESETS) == 24
    cfg = preset_config("LLaDA", "gsm8k", 512)
    assert (cfg.L, cfg.K, cfg.w, cfg.tau0, cfg.alpha) == (512, 32, 3, 0.9, 0.3)
    assert preset_config("dream", "humaneval", 256, early_exit=False).early_exit is False
    with pytest.raises(KeyError):
        preset_config("dream", "humaneval", 1024)


# -- run invariants ------------------------------------------------------------

@settings(max_examples=60)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(["scripted", "local", "toy"]),
       K=st.sampled_from([1, 2, 4, 8]), N=st.integers(1, 6), w=st.integers(0, 6),
       tau0=st.floats(0.3, 1.0), alpha=st.floats(0.0, 1.0), exit_=st.booleans())
def test_run_invariants(seed, kind, K, N, w, tau0, alpha, exit_):
    L = K * N
    vocab = 32
    den = {"scripted": lambda: ScriptedOracle(random_script(N, K, vocab, seed, eos_rate=0.1), vocab=vocab),
           "local": lambda: LocalMarkovOracle(3, vocab, seed, eos_permille=50),
           "toy": lambda: ToyTransformer(8, vocab, seed)}[kind]()
    prompt = np.random.default_rng(seed).integers(FIRST_REGULAR, vocab, 5)
    cfg = DecodeConfig(L=L, K=K, w=w, tau0=tau0, alpha=alpha, early_exit=exit_)
    res = decode_sequence(prompt, den, cfg)
    assert res.tokens.size == L and not np.any(res.tokens == MASK)
    counts = res.steps_per_block()
    assert all(v <= K for v in counts.values())
    assert len(res.trace) <= L
    taus_by_block = {}
    for r in res.trace:
        assert len(r.accepted) >= 1
        assert tau0 * (1 - alpha) - 1e-12 <= r.tau <= tau0 + 1e-12
        assert r.fallback_used or all(e.confidence >= r.tau for e in r.accepted)
        assert not r.fallback_used or len(r.accepted) == 1
        taus_by_block.setdefault(r.block, []).append(r.tau)
    for taus in taus_by_block.values():
        assert all(b <= a for a, b in zip(taus, taus[1:]))
    if res.exited_early_at is not None:
        assert max(counts) == res.exited_early_at
        assert np.all(res.tokens[(res.exited_early_at + 1) * K:] == EOS)
