"""Episode generation, replay memory, training orchestration and gating."""
from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .lattice import (
    ContactScore,
    FoldState,
    HpSequence,
    Move,
    Status,
    from_moves,
    opening,
    read_sequences,
)
from .config import CorpusConfig, RunConfig
from .encode import encode_fold, mirror_planes
from .network import HPNet, LossTerms, NetEvaluator, Trainer, TrainingBatch, load_checkpoint, save_checkpoint
from .search import Evaluator, SearchConfig, SearchTree, choose_move, run_searches

log = logging.getLogger(__name__)


@dataclass
class EpisodeRecord:
    sequence: HpSequence
    moves: list[Move]
    contacts: ContactScore
    status: Status
    policies: list[np.ndarray] = field(default_factory=list)
    states: list[FoldState] = field(default_factory=list, repr=False)
    radius: int | None = None

    @property
    def decisions(self) -> int:
        return len(self.policies)

    @property
    def move_string(self) -> str:
        return "".join(m.letter for m in self.moves)

    def replay(self) -> FoldState:
        return from_moves(self.sequence, self.moves, self.radius)


def _episode_radius(evaluator, radius):
    return radius if radius is not None else getattr(evaluator, "board_radius", None)


def fold_episodes(sequences: Sequence[HpSequence], evaluator: Evaluator, config: SearchConfig | None = None,
                  noise: bool = False, seed: int = 0, radius: int | None = None) -> list[EpisodeRecord]:
    """Fold several sequences at once, one search tree per episode.

    Leaf evaluations of all live episodes are batched; each episode's result
    is identical to folding it alone. Episode ``i`` draws its root noise from
    ``default_rng((seed, i))``.
    """
    config = config or SearchConfig()
    radius = _episode_radius(evaluator, radius)
    trees = [SearchTree(opening(s, radius), config) for s in sequences]
    rngs = [np.random.default_rng((seed, i)) for i in range(len(sequences))]
    records = [EpisodeRecord(s, [], ContactScore(0), Status.ONGOING, radius=radius) for s in sequences]
    live = [i for i, t in enumerate(trees) if not t.root.terminal]
    while live:
        policies = run_searches([trees[i] for i in live], evaluator, noise, [rngs[i] for i in live])
        still = []
        for i, pi in zip(live, policies):
            tree, rec = trees[i], records[i]
            rec.states.append(tree.root.state)
            rec.policies.append(pi)
            move = choose_move(pi)
            rec.moves.append(move)
            tree.advance(move)
            if not tree.root.terminal:
                still.append(i)
        live = still
    for tree, rec in zip(trees, records):
        rec.contacts = ContactScore(tree.root.state.contacts)
        rec.status = tree.root.status
    return records


def fold_episode(sequence: HpSequence, evaluator: Evaluator, config: SearchConfig | None = None,
                 noise: bool = False, seed: int = 0, radius: int | None = None) -> EpisodeRecord:
    """Fold one sequence residue by residue, searching before every decision."""
    return fold_episodes([sequence], evaluator, config, noise, seed, radius)[0]


@dataclass
class ReplaySample:
    planes: np.ndarray
    policy: np.ndarray
    reward: float


def harvest_samples(episode: EpisodeRecord, grid_size: int) -> list[ReplaySample]:
    """One sample per decision, each labelled with the episode's final contacts."""
    reward = float(episode.contacts.contacts)
    return [ReplaySample(encode_fold(s, grid_size), np.asarray(pi, dtype=np.float32), reward)
            for s, pi in zip(episode.states, episode.policies)]


class ReplayMemory:
    """Bounded FIFO of replay samples; planes are stored bit-packed.

    Appends and batch draws are serialized by a lock so episode workers can
    append while a trainer draws.
    """

    def __init__(self, capacity: int = 60_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._slots: deque = deque(maxlen=capacity)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._slots)

    def append(self, sample: ReplaySample) -> None:
        packed = (np.packbits(sample.planes.astype(np.uint8), axis=None), sample.planes.shape,
                  np.asarray(sample.policy, dtype=np.float32), float(sample.reward))
        with self._lock:
            self._slots.append(packed)

    def extend(self, samples) -> None:
        for s in samples:
            self.append(s)

    def __getitem__(self, i) -> ReplaySample:
        bits, shape, pi, r = self._slots[i]
        return ReplaySample(_unpack(bits, shape), pi, r)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray | None:
        """Uniform draw without replacement; None when fewer than ``batch_size`` samples."""
        with self._lock:
            if len(self._slots) < batch_size:
                return None
            return rng.choice(len(self._slots), size=batch_size, replace=False)

    def batch(self, batch_size: int, rng: np.random.Generator) -> TrainingBatch | None:
        with self._lock:
            if len(self._slots) < batch_size:
                return None
            idx = rng.choice(len(self._slots), size=batch_size, replace=False)
            rows = [self._slots[i] for i in idx]
        return TrainingBatch(
            np.stack([_unpack(b, shape) for b, shape, _, _ in rows]),
            np.stack([pi for _, _, pi, _ in rows]),
            np.array([r for _, _, _, r in rows], dtype=np.float32),
        )

    def state(self) -> dict[str, np.ndarray]:
        """Arrays suitable for ``np.savez``."""
        if not self._slots:
            return {"capacity": np.array(self.capacity)}
        return {
            "capacity": np.array(self.capacity),
            "bits": np.stack([b for b, _, _, _ in self._slots]),
            "shape": np.array(self._slots[0][1]),
            "policy": np.stack([p for _, _, p, _ in self._slots]),
            "reward": np.array([r for _, _, _, r in self._slots]),
        }

    @classmethod
    def from_state(cls, arrays) -> "ReplayMemory":
        mem = cls(int(arrays["capacity"]))
        if "bits" in arrays:
            shape = tuple(int(s) for s in arrays["shape"])
            for b, p, r in zip(arrays["bits"], arrays["policy"], arrays["reward"]):
                mem._slots.append((b, shape, p, float(r)))
        return mem


def _unpack(bits: np.ndarray, shape) -> np.ndarray:
    n = int(np.prod(shape))
    return np.unpackbits(bits, count=n).reshape(shape)


def mirror_samples(batch: TrainingBatch, which: np.ndarray) -> TrainingBatch:
    """Reflect the selected samples left-right: planes flipped, L and R swapped."""
    inputs = batch.inputs.copy()
    policies = np.array(batch.target_policies, copy=True)
    inputs[which] = mirror_planes(inputs[which])
    policies[which] = policies[which][:, [Move.FORWARD, Move.RIGHT, Move.LEFT]]
    return TrainingBatch(inputs, policies, batch.target_rewards)


def training_iteration(memory: ReplayMemory, trainer: Trainer, batch_size: int,
                       rng: np.random.Generator, mirror: bool = False) -> LossTerms | None:
    """Draw a uniform batch and take one optimizer step; None if memory is not ready.

    With ``mirror`` each drawn sample is reflected with probability 1/2.
    """
    batch = memory.batch(batch_size, rng)
    if batch is None:
        return None
    if mirror:
        batch = mirror_samples(batch, rng.random(batch_size) < 0.5)
    return trainer.train_step(batch)


@dataclass(frozen=True)
class GateResult:
    candidate_total: int
    champion_total: int

    @property
    def accepted(self) -> bool:
        return self.candidate_total > self.champion_total


def total_contacts(evaluator: Evaluator, sequences: Sequence[HpSequence], config: SearchConfig,
                   batch: int = 64) -> int:
    """Greedy (noise-free) folding score summed over ``sequences``."""
    total = 0
    for k in range(0, len(sequences), batch):
        total += sum(r.contacts.contacts for r in fold_episodes(sequences[k : k + batch], evaluator, config))
    return total


def gate(candidate: Evaluator, champion: Evaluator, test_sequences: Sequence[HpSequence],
         config: SearchConfig, champion_total: int | None = None) -> GateResult:
    """Fold the test set with both agents; the candidate wins only with strictly more contacts.

    Pass ``champion_total`` to reuse a champion score measured earlier on the
    same set.
    """
    if champion_total is None:
        champion_total = total_contacts(champion, test_sequences, config)
    return GateResult(total_contacts(candidate, test_sequences, config), champion_total)


def generate_corpus(count: int, length_range: tuple[int, int], h_fraction_range: tuple[float, float],
                    seed: int) -> list[HpSequence]:
    """Random HP sequences; each draws its length and H fraction uniformly from the ranges."""
    lo, hi = length_range
    flo, fhi = h_fraction_range
    if count < 0:
        raise ValueError("count must be non-negative")
    if lo < 2 or hi < lo:
        raise ValueError(f"invalid length range {length_range}")
    if not 0 <= flo <= fhi <= 1:
        raise ValueError(f"invalid H-fraction range {h_fraction_range}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(lo, hi + 1))
        frac = rng.uniform(flo, fhi) if fhi > flo else flo
        out.append(HpSequence("".join(np.where(rng.random(n) < frac, "H", "P"))))
    return out


class RunState:
    """Everything ``run_training`` needs to continue an interrupted run."""

    def __init__(self, config: RunConfig):
        self.config = config
        torch.manual_seed(config.seed)
        self.net = HPNet(config.network)
        self.trainer = Trainer(self.net)
        self.champion = NetEvaluator(self.net)
        self.champion_total: int | None = None
        self.memory = ReplayMemory(config.selfplay.memory_capacity)
        self.rng = np.random.default_rng(config.seed)
        self.round = 0
        self.cursor = 0
        self.episodes = 0
        self.pending_steps = 0
        self.loss_window: list[dict] = []
        self.contact_window: list[int] = []

    @property
    def step(self) -> int:
        return self.trainer.step


def load_corpus(cfg: CorpusConfig) -> list[HpSequence]:
    if cfg.path:
        with open(cfg.path) as fh:
            seqs = read_sequences(fh)
        if not seqs:
            raise ValueError(f"corpus file {cfg.path} holds no sequences")
        return seqs
    return generate_corpus(cfg.count, (cfg.min_length, cfg.max_length),
                           (cfg.min_h_fraction, cfg.max_h_fraction), cfg.seed)


def gate_sequences(config: RunConfig, corpus: Sequence[HpSequence]) -> list[HpSequence]:
    """Held-out gate set drawn like the corpus but from ``gate_seed``, minus corpus members."""
    c, sp = config.corpus, config.selfplay
    seen = set(corpus)
    out: list[HpSequence] = []
    seed = sp.gate_seed
    while len(out) < sp.gate_set_size:
        for s in generate_corpus(sp.gate_set_size, (c.min_length, c.max_length),
                                 (c.min_h_fraction, c.max_h_fraction), seed):
            if s not in seen and len(out) < sp.gate_set_size:
                seen.add(s)
                out.append(s)
        seed += 1
    return out


class MetricsLog:
    """Append-only JSON-lines event log."""

    def __init__(self, path: Path):
        self.path = path

    def write(self, event: str, **fields) -> None:
        with open(self.path, "a") as fh:
            fh.write(json.dumps({"event": event, **fields}, sort_keys=True) + "\n")

    def read(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text().splitlines() if line]

    def truncate(self, lines: int) -> None:
        kept = self.path.read_text().splitlines(keepends=True)[:lines] if self.path.exists() else []
        self.path.write_text("".join(kept))


def _save(run_dir: Path, rs: RunState, metrics: MetricsLog) -> None:
    extra = {
        "champion_total": rs.champion_total,
        "round": rs.round,
        "cursor": rs.cursor,
        "episodes": rs.episodes,
        "pending_steps": rs.pending_steps,
        "loss_window": json.dumps(rs.loss_window),
        "contact_window": json.dumps(rs.contact_window),
        "rng": json.dumps(rs.rng.bit_generator.state),
        "log_lines": len(metrics.read()),
    }
    tmp = run_dir / "memory.tmp.npz"
    np.savez(tmp, **rs.memory.state())
    tmp.replace(run_dir / "memory.npz")
    save_checkpoint(run_dir / "champion.pt", rs.champion.net)
    save_checkpoint(run_dir / "latest.pt", rs.net, rs.trainer, extra)


def _restore(run_dir: Path, config: RunConfig, metrics: MetricsLog) -> RunState:
    rs = RunState(config)
    rs.net, rs.trainer, extra = load_checkpoint(run_dir / "latest.pt", config.network)
    champ, _, _ = load_checkpoint(run_dir / "champion.pt", config.network)
    rs.champion = NetEvaluator(champ)
    rs.champion_total = extra["champion_total"]
    rs.round, rs.cursor, rs.episodes = extra["round"], extra["cursor"], extra["episodes"]
    rs.pending_steps = extra["pending_steps"]
    rs.loss_window = json.loads(extra["loss_window"])
    rs.contact_window = json.loads(extra["contact_window"])
    rs.rng.bit_generator.state = json.loads(extra["rng"])
    with np.load(run_dir / "memory.npz") as arrays:
        rs.memory = ReplayMemory.from_state(dict(arrays))
    metrics.truncate(extra["log_lines"])
    return rs


def _same_run(a: RunConfig, b: RunConfig) -> bool:
    """Equal apart from the budget fields, which a resume may extend."""
    da, db = a.to_dict(), b.to_dict()
    for key in ("max_steps", "time_limit"):
        da.pop(key)
        db.pop(key)
    return da == db


def run_training(config: RunConfig, run_dir: str | Path, resume: bool = False) -> RunState:
    """Alternate self-play, optimizer steps and periodic gating until the budget runs out.

    The run directory holds ``config.json`` (the exact config), ``metrics.jsonl``,
    ``latest.pt`` (trainer state plus loop counters), ``champion.pt`` and
    ``memory.npz``. Resuming rolls the metrics log back to the last checkpoint
    and continues from there, so an interrupted-then-resumed run logs the same
    events as an uninterrupted one.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    snapshot = run_dir / "config.json"
    metrics = MetricsLog(run_dir / "metrics.jsonl")
    sp = config.selfplay
    if resume:
        if not _same_run(RunConfig.load(snapshot), config):
            raise ValueError("resume config differs from the run directory snapshot")
        config.save(snapshot)
        rs = _restore(run_dir, config, metrics)
        log.info("resuming at step %d", rs.step)
    else:
        if (run_dir / "latest.pt").exists():
            raise FileExistsError(f"{run_dir} already holds a run; resume it instead")
        config.save(snapshot)
        metrics.truncate(0)
        rs = RunState(config)

    corpus = load_corpus(config.corpus)
    gate_set = gate_sequences(config, corpus)
    grid = config.network.grid_size
    deadline = time.monotonic() + config.time_limit if config.time_limit else None

    if rs.champion_total is None:
        rs.champion_total = total_contacts(rs.champion, gate_set, config.search)
        metrics.write("baseline", step=0, champion_total=rs.champion_total,
                      mean_contacts=rs.champion_total / len(gate_set))
        _save(run_dir, rs, metrics)

    while rs.step < config.max_steps:
        if deadline is not None and time.monotonic() > deadline:
            log.info("time limit reached at step %d", rs.step)
            break
        if rs.pending_steps == 0:
            seqs = [corpus[(rs.cursor + k) % len(corpus)] for k in range(sp.episodes_per_round)]
            rs.cursor = (rs.cursor + len(seqs)) % len(corpus)
            records = fold_episodes(seqs, rs.champion, config.search, noise=True,
                                    seed=config.seed * 1_000_003 + rs.round)
            rs.round += 1
            for rec in records:
                rs.memory.extend(harvest_samples(rec, grid))
                metrics.write("episode", index=rs.episodes, sequence=str(rec.sequence),
                              moves=rec.move_string, contacts=rec.contacts.contacts, status=rec.status.value)
                rs.contact_window.append(rec.contacts.contacts)
                rs.episodes += 1
            rs.pending_steps = sp.steps_per_episode * len(records)
            log.info("round %d: %d episodes, memory %d, step %d", rs.round, len(records), len(rs.memory), rs.step)

        while rs.pending_steps > 0 and rs.step < config.max_steps:
            terms = training_iteration(rs.memory, rs.trainer, sp.batch_size, rs.rng, sp.mirror)
            if terms is None:
                rs.pending_steps = 0
                break
            rs.pending_steps -= 1
            rs.loss_window.append(terms.as_floats())
            step = rs.step
            if step % sp.log_interval == 0:
                w = rs.loss_window
                metrics.write("train", step=step, **{k: float(np.mean([x[k] for x in w])) for k in w[0]},
                              mean_episode_contacts=float(np.mean(rs.contact_window)) if rs.contact_window else None)
                rs.loss_window, rs.contact_window = [], []
            if step % sp.gate_interval == 0:
                candidate = NetEvaluator(rs.net)
                result = gate(candidate, rs.champion, gate_set, config.search, rs.champion_total)
                metrics.write("gate", step=step, candidate_total=result.candidate_total,
                              champion_total=result.champion_total, accepted=result.accepted)
                log.info("gate at step %d: %d vs %d", step, result.candidate_total, result.champion_total)
                if result.accepted:
                    rs.champion, rs.champion_total = candidate, result.candidate_total
                _save(run_dir, rs, metrics)

    _save(run_dir, rs, metrics)
    metrics.write("end", step=rs.step, champion_total=rs.champion_total, episodes=rs.episodes)
    return rs
