"""Two-head residual convolutional policy/value network and its training."""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .encode import CHANNEL_NAMES, PLANES, board_radius, encode_fold
from .lattice import FoldState

CHECKPOINT_FORMAT = "hpfold-checkpoint"
CHECKPOINT_VERSION = 1
CONTACT_PLANE = CHANNEL_NAMES.index("B")  # newest frame
ARCHITECTURE_FIELDS = ("blocks", "channels", "grid_size", "value_hidden", "contact_skip")


class CheckpointError(Exception):
    """Base class for checkpoint loading failures."""


class CheckpointVersionError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class ConfigMismatchError(CheckpointError):
    pass


class TrainingError(RuntimeError):
    """Non-finite loss or gradients."""


@dataclass
class NetworkConfig:
    blocks: int = 4
    channels: int = 32
    grid_size: int = 41
    weight_decay: float = 4e-5
    learning_rate: float = 1e-3
    momentum: float = 0.9
    value_hidden: int = 64
    contact_skip: bool = False

    def __post_init__(self):
        if self.blocks < 1 or self.channels < 1 or self.grid_size < 1 or self.value_hidden < 1:
            raise ValueError("network dimensions must be positive")
        if self.weight_decay < 0 or self.learning_rate < 0:
            raise ValueError("weight decay and learning rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return (PLANES, self.grid_size, self.grid_size)


class PolicyValue(NamedTuple):
    policy: np.ndarray
    value: float


class LossTerms(NamedTuple):
    value: torch.Tensor
    policy: torch.Tensor
    l2: torch.Tensor

    @property
    def data(self) -> torch.Tensor:
        return self.value + self.policy

    @property
    def total(self) -> torch.Tensor:
        return self.value + self.policy + self.l2

    def as_floats(self) -> dict[str, float]:
        return {"value": self.value.item(), "policy": self.policy.item(), "l2": self.l2.item(),
                "total": self.total.item()}


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return F.relu(x + y)


class HPNet(nn.Module):
    """Stem conv, ``blocks`` residual blocks, then policy and value heads.

    ``forward`` returns policy logits ``(B, 3)`` over Forward/Left/Right and
    a linear value ``(B,)`` in contact units. With ``contact_skip`` the value
    head only learns the contacts still to come: the current count, read off
    the newest frame's B plane, is added to its output.
    """

    def __init__(self, config: NetworkConfig | None = None):
        super().__init__()
        self.config = cfg = config or NetworkConfig()
        c, n = cfg.channels, cfg.grid_size
        self.stem = nn.Sequential(nn.Conv2d(PLANES, c, 3, padding=1, bias=False), nn.BatchNorm2d(c), nn.ReLU())
        self.tower = nn.Sequential(*[ResidualBlock(c) for _ in range(cfg.blocks)])
        self.policy_conv = nn.Sequential(nn.Conv2d(c, 2, 1, bias=False), nn.BatchNorm2d(2), nn.ReLU())
        self.policy_fc = nn.Linear(2 * n * n, 3)
        self.value_conv = nn.Sequential(nn.Conv2d(c, 1, 1, bias=False), nn.BatchNorm2d(1), nn.ReLU())
        self.value_fc1 = nn.Linear(n * n, cfg.value_hidden)
        self.value_fc2 = nn.Linear(cfg.value_hidden, 1)
        self._init_weights()

    def _init_weights(self):
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
        nn.init.zeros_(self.value_fc2.bias)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.dim() != 4 or tuple(x.shape[1:]) != self.config.input_shape:
            raise ValueError(f"expected input (B, {self.config.input_shape}), got {tuple(x.shape)}")
        y = self.tower(self.stem(x))
        logits = self.policy_fc(self.policy_conv(y).flatten(1))
        v = F.relu(self.value_fc1(self.value_conv(y).flatten(1)))
        v = self.value_fc2(v).squeeze(1)
        if self.config.contact_skip:
            v = v + x[:, CONTACT_PLANE].sum(dim=(1, 2))
        return logits, v

    def decayed_parameters(self):
        """Parameters under L2 decay: everything except normalization layers."""
        for module in self.modules():
            if isinstance(module, nn.modules.batchnorm._BatchNorm):
                continue
            yield from module.parameters(recurse=False)

    @torch.no_grad()
    def predict(self, planes: np.ndarray | torch.Tensor) -> list[PolicyValue]:
        """Inference-mode policy/value for one stack or a batch of stacks."""
        x = torch.as_tensor(np.asarray(planes), dtype=self._dtype())
        if x.dim() == 3:
            x = x.unsqueeze(0)
        was_training = self.training
        self.eval()
        try:
            logits, v = self(x)
        finally:
            self.train(was_training)
        p = F.softmax(logits, dim=1).double().numpy()
        return [PolicyValue(pi, float(val)) for pi, val in zip(p, v.double().numpy())]

    def _dtype(self):
        return next(self.parameters()).dtype


def loss_terms(net: HPNet, logits: torch.Tensor, value: torch.Tensor, target_policy: torch.Tensor,
               target_reward: torch.Tensor) -> LossTerms:
    """Mean squared value error, policy cross-entropy and ``beta * ||theta||^2``."""
    probs = F.softmax(logits, dim=1).clamp_min(1e-12)
    policy = -(target_policy * probs.log()).sum(dim=1).mean()
    value_term = ((target_reward - value) ** 2).mean()
    l2 = net.config.weight_decay * sum((p * p).sum() for p in net.decayed_parameters())
    return LossTerms(value_term, policy, l2)


@dataclass
class TrainingBatch:
    inputs: np.ndarray
    target_policies: np.ndarray
    target_rewards: np.ndarray

    def __post_init__(self):
        b = len(self.inputs)
        if len(self.target_policies) != b or len(self.target_rewards) != b:
            raise ValueError("batch fields disagree on batch size")

    def tensors(self, dtype=torch.float32):
        return (torch.as_tensor(self.inputs, dtype=dtype),
                torch.as_tensor(self.target_policies, dtype=dtype),
                torch.as_tensor(self.target_rewards, dtype=dtype))


class Trainer:
    """Owns a network, its momentum-SGD optimizer and the step counter."""

    def __init__(self, net: HPNet, step: int = 0):
        self.net = net
        cfg = net.config
        # The L2 term lives in the loss itself, so the optimizer adds no decay.
        self.optimizer = torch.optim.SGD(net.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum)
        self.step = step

    def losses(self, batch: TrainingBatch) -> LossTerms:
        x, pi, r = batch.tensors(self.net._dtype())
        logits, v = self.net(x)
        return loss_terms(self.net, logits, v, pi, r)

    def train_step(self, batch: TrainingBatch) -> LossTerms:
        """One SGD update; returns the loss terms measured before the update."""
        self.net.train()
        self.optimizer.zero_grad()
        terms = self.losses(batch)
        total = terms.total
        if not torch.isfinite(total):
            raise TrainingError(f"non-finite loss at step {self.step}: {terms.as_floats()}")
        total.backward()
        for name, p in self.net.named_parameters():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                raise TrainingError(f"non-finite gradient in {name} at step {self.step}")
        self.optimizer.step()
        self.step += 1
        return LossTerms(*(t.detach() for t in terms))


class NetEvaluator:
    """Search evaluator backed by a frozen copy of a network."""

    def __init__(self, net: HPNet):
        self.net = copy.deepcopy(net).eval()
        self.grid_size = net.config.grid_size
        self.board_radius = board_radius(self.grid_size)

    def evaluate(self, states: Sequence[FoldState]):
        x = np.stack([encode_fold(s, self.grid_size) for s in states])
        with torch.inference_mode():
            logits, v = self.net(torch.as_tensor(x, dtype=self.net._dtype()))
            p = F.softmax(logits, dim=1)
        return p.double().numpy(), v.double().numpy()


def save_checkpoint(path: str | Path, net: HPNet, trainer: Trainer | None = None, extra: dict | None = None) -> None:
    """Write config, parameters, optimizer state and step counter.

    The file is a ``torch.save`` archive of a dict with keys ``format``,
    ``version``, ``config``, ``model``, ``optimizer`` (or None), ``step`` and
    ``extra``. Writes go to a temporary file first and are then renamed.
    """
    path = Path(path)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(net.config),
        "model": net.state_dict(),
        "optimizer": trainer.optimizer.state_dict() if trainer else None,
        "step": trainer.step if trainer else 0,
        "extra": extra or {},
    }
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path, config: NetworkConfig | None = None) -> tuple[HPNet, Trainer, dict]:
    """Rebuild the network and trainer.

    ``config``, if given, must agree with the stored architecture (blocks,
    channels, grid size, value head width); optimizer settings may differ.
    """
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CorruptCheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CorruptCheckpointError(f"{path} is not an hpfold checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {payload.get('version')} unsupported (expected {CHECKPOINT_VERSION})"
        )
    try:
        stored = NetworkConfig(**payload["config"])
    except TypeError as exc:
        raise CorruptCheckpointError(f"bad network config in {path}: {exc}") from exc
    if config is not None:
        diff = [f for f in ARCHITECTURE_FIELDS if getattr(config, f) != getattr(stored, f)]
        if diff:
            raise ConfigMismatchError(f"checkpoint config differs in {', '.join(diff)}")
    net = HPNet(stored)
    try:
        net.load_state_dict(payload["model"])
    except (RuntimeError, KeyError) as exc:
        raise CorruptCheckpointError(f"parameters do not fit the stored config: {exc}") from exc
    net.eval()
    trainer = Trainer(net, step=int(payload.get("step", 0)))
    if payload.get("optimizer") is not None:
        trainer.optimizer.load_state_dict(payload["optimizer"])
    return net, trainer, payload.get("extra", {})
