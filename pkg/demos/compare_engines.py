"""Oracle against rollout UCT at two budgets on a small random corpus."""
from hpfold.oracle import RolloutConfig, compare_engines, oracle_engine, rollout_engine
from hpfold.selfplay import generate_corpus

seqs = generate_corpus(12, (10, 12), (0.3, 0.7), seed=3)
table = compare_engines(seqs, {
    "oracle": oracle_engine(),
    "uct100": rollout_engine(RolloutConfig(100, seed=1)),
    "uct1000": rollout_engine(RolloutConfig(1000, seed=1)),
})
print(table.to_tsv(), end="")
