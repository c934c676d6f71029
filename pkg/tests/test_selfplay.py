from functools import lru_cache

import numpy as np
import pytest
import torch
from scipy.stats import chi2

from hpfold.config import CorpusConfig, RunConfig, SelfPlayConfig
from hpfold.encode import encode_fold
from hpfold.lattice import HpSequence, Status, apply_move, contact_bound, legal_moves, opening
from hpfold.network import NetEvaluator, NetworkConfig, HPNet, Trainer, TrainingBatch, load_checkpoint
from hpfold.search import SearchConfig, UniformEvaluator
from hpfold import selfplay
from hpfold.selfplay import (
    EpisodeRecord,
    GateResult,
    MetricsLog,
    ReplayMemory,
    ReplaySample,
    fold_episode,
    fold_episodes,
    gate,
    gate_sequences,
    generate_corpus,
    harvest_samples,
    run_training,
    mirror_samples,
    training_iteration,
)

GRID = 13


@lru_cache(maxsize=None)
def best_completion(state):
    moves = legal_moves(state)
    if not moves:
        return state.contacts
    return max(best_completion(apply_move(state, m)) for m in moves)


class PerfectEvaluator:
    """Uniform priors, exact best reachable contacts as the value."""

    def evaluate(self, states):
        return np.full((len(states), 3), 1 / 3), np.array([float(best_completion(s)) for s in states])


def sample(i, grid=5):
    planes = np.zeros((17, grid, grid), dtype=np.uint8)
    planes.flat[i % planes.size] = 1
    return ReplaySample(planes, np.array([1.0, 0, 0]), float(i))


def test_episode_decision_count():
    rec = fold_episode(HpSequence("HPHPPHHP"), UniformEvaluator(), SearchConfig(simulations=20))
    assert rec.status is Status.COMPLETE
    assert rec.decisions == len(rec.moves) == 6
    assert rec.replay().contacts == rec.contacts.contacts
    assert all(abs(p.sum() - 1) < 1e-9 for p in rec.policies)


def test_all_p_scores_zero():
    rec = fold_episode(HpSequence("P" * 9), UniformEvaluator(), SearchConfig(simulations=10))
    assert rec.contacts.contacts == 0


def test_hhhh_with_perfect_evaluator():
    rec = fold_episode(HpSequence("HHHH"), PerfectEvaluator(), SearchConfig(simulations=50))
    assert rec.contacts.contacts == 1


def test_batched_episodes_match_single():
    seqs = [HpSequence(s) for s in ("HPHPPHHPHH", "HHPPHPH", "PHHPPHHPPH")]
    cfg = SearchConfig(simulations=30)
    together = fold_episodes(seqs, UniformEvaluator(), cfg, noise=True, seed=5)
    for i, s in enumerate(seqs):
        alone = fold_episodes(seqs[: i + 1], UniformEvaluator(), cfg, noise=True, seed=5)[i]
        assert alone.moves == together[i].moves
        assert all(np.array_equal(a, b) for a, b in zip(alone.policies, together[i].policies))


def test_episode_replay_determinism():
    for seed, seq in enumerate(generate_corpus(20, (6, 14), (0.3, 0.7), 3)):
        rec = fold_episode(seq, UniformEvaluator(), SearchConfig(simulations=15), noise=True, seed=seed)
        assert rec.replay().contacts == rec.contacts.contacts
        assert rec.status in (Status.COMPLETE, Status.TRAPPED)


def test_harvest_samples():
    rec = fold_episode(HpSequence("HPHPPHHPHH"), UniformEvaluator(), SearchConfig(simulations=10))
    samples = harvest_samples(rec, GRID)
    assert len(samples) == rec.decisions == 8
    assert {s.reward for s in samples} == {float(rec.contacts.contacts)}
    for s, state in zip(samples, rec.states):
        assert np.array_equal(s.planes, encode_fold(state, GRID))
        assert 0 <= s.reward <= contact_bound(rec.sequence)


def test_harvest_eighteen_decisions():
    seq = HpSequence("HPHPPHHPHPPHPHHPPHPH")
    states = [opening(seq, radius=10)]
    for _ in range(18):
        states.append(apply_move(states[-1], legal_moves(states[-1])[0]))
    rec = EpisodeRecord(seq, [], selfplay.ContactScore(9), Status.COMPLETE,
                        [np.array([1.0, 0, 0])] * 18, states[:18])
    samples = harvest_samples(rec, 41)
    assert len(samples) == 18 and all(s.reward == 9 for s in samples)


def test_harvest_trapped_and_empty():
    seq = HpSequence("P" * 20)
    states = [opening(seq)]
    for _ in range(3):
        states.append(apply_move(states[-1], legal_moves(states[-1])[0]))
    rec = EpisodeRecord(seq, [], selfplay.ContactScore(1), Status.TRAPPED, [np.ones(3) / 3] * 3, states[:3])
    samples = harvest_samples(rec, 41)
    assert len(samples) == 3 and all(s.reward == 1 for s in samples)
    rec = fold_episode(HpSequence("HH"), UniformEvaluator())
    assert rec.decisions == 0 and harvest_samples(rec, 41) == []


def test_memory_fifo_exhaustive():
    for cap in range(1, 6):
        for extra in range(0, 8):
            mem = ReplayMemory(cap)
            mem.extend(sample(i) for i in range(cap + extra))
            assert len(mem) == min(cap, cap + extra)
            kept = [mem[i].reward for i in range(len(mem))]
            assert kept == [float(i) for i in range(extra, cap + extra)]


def test_memory_round_trips_planes():
    mem = ReplayMemory(10)
    s = sample(37, grid=9)
    mem.append(s)
    assert np.array_equal(mem[0].planes, s.planes)
    again = ReplayMemory.from_state(mem.state())
    assert np.array_equal(again[0].planes, s.planes) and again.capacity == 10


def test_memory_not_ready_and_valid_draw():
    mem = ReplayMemory(1000)
    mem.extend(sample(i) for i in range(100))
    rng = np.random.default_rng(0)
    assert mem.batch(256, rng) is None
    trainer = Trainer(HPNet(NetworkConfig(blocks=1, channels=4, grid_size=5, value_hidden=8)))
    assert training_iteration(mem, trainer, 256, rng) is None and trainer.step == 0
    mem.extend(sample(i) for i in range(100, 300))
    idx = mem.sample_indices(256, rng)
    assert len(set(idx.tolist())) == 256 and idx.max() < 300
    assert training_iteration(mem, trainer, 256, rng) is not None and trainer.step == 1


def test_mirror_samples_touches_only_selected():
    rng = np.random.default_rng(3)
    x = (rng.random((4, 17, 9, 9)) < 0.3).astype(np.uint8)
    pi = rng.dirichlet(np.ones(3), size=4)
    batch = TrainingBatch(x, pi, np.arange(4.0))
    out = mirror_samples(batch, np.array([True, False, True, False]))
    assert np.array_equal(out.inputs[1], x[1]) and np.array_equal(out.target_policies[3], pi[3])
    assert np.array_equal(out.inputs[0], x[0][:, ::-1, :])
    assert np.allclose(out.target_policies[2], pi[2][[0, 2, 1]])
    assert np.array_equal(out.target_rewards, batch.target_rewards)
    assert np.array_equal(batch.inputs, x)  # input batch left alone


def test_memory_sampling_is_uniform():
    mem = ReplayMemory(1000)
    mem.extend(sample(i) for i in range(1000))
    rng = np.random.default_rng(1)
    counts = np.zeros(1000)
    draws = 10_000
    for _ in range(draws // 10):
        counts[mem.sample_indices(10, rng)] += 1
    p = 10 / 1000
    expected = draws / 10 * p
    sigma = np.sqrt(draws / 10 * p * (1 - p))
    # about 0.3% of slots fall outside 3 sigma by chance alone
    assert np.mean(np.abs(counts - expected) > 3 * sigma) < 0.01
    stat = float(((counts - expected) ** 2 / expected).sum())
    assert chi2.sf(stat, df=999) > 0.001


def test_gate_strictness():
    assert not GateResult(100, 100).accepted
    assert GateResult(101, 100).accepted
    assert not GateResult(99, 100).accepted


def test_gate_identical_nets_rejected_and_deterministic():
    torch.manual_seed(0)
    net = HPNet(NetworkConfig(blocks=1, channels=4, grid_size=GRID, value_hidden=8))
    seqs = generate_corpus(4, (6, 8), (0.4, 0.6), 2)
    cfg = SearchConfig(simulations=10)
    a = gate(NetEvaluator(net), NetEvaluator(net), seqs, cfg)
    b = gate(NetEvaluator(net), NetEvaluator(net), seqs, cfg)
    assert a == b and not a.accepted


def test_generate_corpus():
    a = generate_corpus(10, (20, 20), (0.5, 0.5), 7)
    assert a == generate_corpus(10, (20, 20), (0.5, 0.5), 7)
    assert all(len(s) == 20 for s in a)
    assert all(set(str(s)) == {"H"} for s in generate_corpus(5, (4, 9), (1.0, 1.0), 1))
    lens = {len(s) for s in generate_corpus(300, (5, 8), (0.3, 0.7), 3)}
    assert lens == {5, 6, 7, 8}
    for bad in [((8, 5), (0.3, 0.7)), ((1, 5), (0.3, 0.7)), ((5, 8), (0.8, 0.2)), ((5, 8), (0.1, 1.2))]:
        with pytest.raises(ValueError):
            generate_corpus(3, *bad, seed=0)


def tiny_config(**kw):
    cfg = RunConfig(
        seed=3,
        max_steps=12,
        search=SearchConfig(simulations=8),
        network=NetworkConfig(blocks=1, channels=4, grid_size=GRID, value_hidden=8),
        selfplay=SelfPlayConfig(memory_capacity=500, batch_size=8, gate_interval=4, gate_set_size=3,
                                gate_seed=11, steps_per_episode=2, episodes_per_round=2, log_interval=2),
        corpus=CorpusConfig(count=10, min_length=6, max_length=8, seed=4),
    )
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg


def test_gate_set_is_held_out():
    cfg = tiny_config()
    corpus = selfplay.load_corpus(cfg.corpus)
    gates = gate_sequences(cfg, corpus)
    assert len(gates) == 3 and not set(gates) & set(corpus)


def test_run_training_metrics(tmp_path):
    cfg = tiny_config()
    rs = run_training(cfg, tmp_path)
    events = MetricsLog(tmp_path / "metrics.jsonl").read()
    kinds = [e["event"] for e in events]
    assert kinds[0] == "baseline" and kinds[-1] == "end"
    gates = [e for e in events if e["event"] == "gate"]
    assert [g["step"] for g in gates] == [4, 8, 12]
    trains = [e for e in events if e["event"] == "train"]
    assert [t["step"] for t in trains] == [2, 4, 6, 8, 10, 12]
    for t in trains:
        assert abs(t["value"] + t["policy"] + t["l2"] - t["total"]) < 1e-6
    champs = [events[0]["champion_total"]] + [g["candidate_total"] for g in gates if g["accepted"]]
    assert all(a < b for a, b in zip(champs, champs[1:]))
    assert rs.step == 12
    assert RunConfig.load(tmp_path / "config.json") == cfg
    _, trainer, _ = load_checkpoint(tmp_path / "latest.pt")
    assert trainer.step == 12
    with pytest.raises(FileExistsError):
        run_training(cfg, tmp_path)


def test_resume_reproduces_uninterrupted_run(tmp_path, monkeypatch):
    cfg = tiny_config()
    run_training(cfg, tmp_path / "full")

    real = selfplay.training_iteration
    calls = {"n": 0}

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 10:
            raise KeyboardInterrupt
        return real(*args, **kw)

    monkeypatch.setattr(selfplay, "training_iteration", flaky)
    with pytest.raises(KeyboardInterrupt):
        run_training(cfg, tmp_path / "cut")
    monkeypatch.setattr(selfplay, "training_iteration", real)
    _, t, _ = load_checkpoint(tmp_path / "cut" / "latest.pt")
    assert t.step == 8
    rs = run_training(cfg, tmp_path / "cut", resume=True)
    assert rs.step == 12

    full = (tmp_path / "full" / "metrics.jsonl").read_text()
    cut = (tmp_path / "cut" / "metrics.jsonl").read_text()
    assert full == cut
    a, _, _ = load_checkpoint(tmp_path / "full" / "latest.pt")
    b, _, _ = load_checkpoint(tmp_path / "cut" / "latest.pt")
    for p, q in zip(a.state_dict().values(), b.state_dict().values()):
        assert torch.equal(p, q)


def test_resume_can_extend_budget(tmp_path):
    cfg = tiny_config(max_steps=4)
    run_training(cfg, tmp_path)
    rs = run_training(tiny_config(max_steps=8), tmp_path, resume=True)
    assert rs.step == 8
    kinds = [e["event"] for e in MetricsLog(tmp_path / "metrics.jsonl").read()]
    assert kinds.count("end") == 1
    with pytest.raises(ValueError):
        run_training(tiny_config(max_steps=8, seed=9), tmp_path, resume=True)
