"""A two-minute training run on toy sizes, to watch the loop end to end.

Writes to ./tiny-run (delete it to start over). The metrics log is JSON lines.
"""
import json
import logging

from hpfold.config import CorpusConfig, RunConfig, SelfPlayConfig
from hpfold.network import NetworkConfig
from hpfold.search import SearchConfig
from hpfold.selfplay import run_training

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

cfg = RunConfig(
    seed=1, max_steps=200,
    search=SearchConfig(simulations=50),
    network=NetworkConfig(blocks=2, channels=16, grid_size=17, learning_rate=0.01),
    selfplay=SelfPlayConfig(memory_capacity=5000, batch_size=32, gate_interval=100, gate_set_size=10,
                            steps_per_episode=2, episodes_per_round=8, log_interval=50),
    corpus=CorpusConfig(count=200, min_length=8, max_length=12),
)
rs = run_training(cfg, "tiny-run")
with open("tiny-run/metrics.jsonl") as fh:
    for line in fh:
        event = json.loads(line)
        if event["event"] in ("baseline", "gate", "end"):
            print(event)
