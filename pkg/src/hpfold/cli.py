"""Command line entry point: ``hpfold <subcommand>``.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 internal failure.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import sys
from pathlib import Path

import torch

from . import benchmarks, config as config_mod, lattice, oracle, records, render
from .network import CheckpointError, HPNet, NetEvaluator, NetworkConfig, load_checkpoint
from .search import SearchConfig
from .selfplay import fold_episodes, generate_corpus, run_training

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("hpfold")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0)
    parser.add_argument("--config", default=default, help="run config JSON")
    parser.add_argument("--workers", type=int, default=argparse.SUPPRESS if suppress else 8,
                        help="episodes folded together (batched leaf evaluation)")
    parser.add_argument("--run-dir", default=default)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hpfold", description="2D HP lattice folding with tree search and a policy-value network")
    _global_flags(p, suppress=False)
    p.add_argument("-v", "--verbose", action="store_true")
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fold", parents=[common], help="fold sequences with the network-guided search")
    f.add_argument("sequences", nargs="*", help="H/P strings or run-length notation")
    f.add_argument("--file", help="sequence file, one per line")
    src = f.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--untrained", action="store_true", help="use a freshly initialized network")
    f.add_argument("--grid-size", type=int, default=41, help="grid for --untrained")
    _search_flags(f)
    f.add_argument("--output", help="write fold records (JSON lines)")
    f.add_argument("--render-dir", help="also render each fold here")
    f.add_argument("--format", choices=("svg", "text"), default="svg")

    t = sub.add_parser("train", parents=[common], help="self-play training run")
    t.add_argument("--resume", action="store_true")
    t.add_argument("--write-default-config", metavar="PATH", help="write a complete default config and exit")

    b = sub.add_parser("bench", parents=[common], help="compare engines on benchmark sequences")
    b.add_argument("--benchmark", help="benchmark file (default: the bundled Seq1-Seq4)")
    b.add_argument("--engines", default="oracle,rollout", help="comma list of oracle, rollout, net")
    b.add_argument("--checkpoint")
    _search_flags(b)
    b.add_argument("--rollout-simulations", type=int, default=1000)
    b.add_argument("--guard", type=int, default=16)
    b.add_argument("--output", help="write the report here as well")

    o = sub.add_parser("oracle", parents=[common], help="exact optimum by branch and bound")
    o.add_argument("sequence")
    o.add_argument("--guard", type=int, default=16)

    r = sub.add_parser("render", parents=[common], help="draw fold records")
    r.add_argument("records", help="fold record file (JSON lines)")
    r.add_argument("--format", choices=("svg", "text"), default="svg")
    r.add_argument("--out", required=True, help="output directory")

    g = sub.add_parser("gen-corpus", parents=[common], help="write random HP sequences")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--min-length", type=int, default=12)
    g.add_argument("--max-length", type=int, default=16)
    g.add_argument("--min-h", type=float, default=0.3)
    g.add_argument("--max-h", type=float, default=0.7)
    g.add_argument("--output", required=True)
    return p


def _search_flags(p):
    p.add_argument("--simulations", type=int, default=300)
    p.add_argument("--c-alpha", type=float, default=1.0)


def _load_net(args) -> HPNet:
    if getattr(args, "checkpoint", None):
        try:
            net, _, _ = load_checkpoint(args.checkpoint)
        except FileNotFoundError as exc:
            raise DataError(f"checkpoint not found: {args.checkpoint}") from exc
        except CheckpointError as exc:
            raise DataError(str(exc)) from exc
        return net
    torch.manual_seed(args.seed)
    return HPNet(NetworkConfig(grid_size=args.grid_size)).eval()


def _sequences(args) -> list[tuple[str, lattice.HpSequence]]:
    items = [(s, lattice.parse_hp_string(s)) for s in args.sequences]
    if args.file:
        with open(args.file) as fh:
            items += [(str(s), s) for s in lattice.read_sequences(fh)]
    if not items:
        raise UsageError("no sequences given")
    return items


def _write_render(out_dir: Path, name: str, state: lattice.FoldState, fmt: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{ 'svg' if fmt == 'svg' else 'txt'}"
    path.write_text(render.render_svg(state) if fmt == "svg" else render.render_text(state))
    return path


def cmd_fold(args) -> int:
    items = _sequences(args)
    evaluator = NetEvaluator(_load_net(args))
    search = SearchConfig(simulations=args.simulations, c_alpha=args.c_alpha)
    seqs = [s for _, s in items]
    episodes = []
    for k in range(0, len(seqs), max(1, args.workers)):
        episodes += fold_episodes(seqs[k : k + args.workers], evaluator, search, seed=args.seed)
    recs = []
    print("id\tlength\tcontacts\tenergy\tupper_bound\tstatus\tmoves")
    for n, ((name, seq), ep) in enumerate(zip(items, episodes), 1):
        rec = records.FoldRecord.from_state(ep.replay(), id=f"seq{n}")
        recs.append(rec)
        print(f"seq{n}\t{len(seq)}\t{rec.contacts}\t{rec.energy}\t{lattice.upper_bound(seq)}\t{rec.status}\t{rec.moves}")
        if args.render_dir:
            _write_render(Path(args.render_dir), f"seq{n}", ep.replay(), args.format)
    if args.output:
        records.write_records(args.output, recs)
    return EXIT_OK


def cmd_train(args) -> int:
    if args.write_default_config:
        config_mod.default_run_config().save(args.write_default_config)
        return EXIT_OK
    if not args.config or not args.run_dir:
        raise UsageError("train needs --config and --run-dir")
    cfg = config_mod.RunConfig.load(args.config)
    state = run_training(cfg, args.run_dir, resume=args.resume)
    print(f"finished at step {state.step}; champion total {state.champion_total}; run dir {args.run_dir}")
    return EXIT_OK


def cmd_bench(args) -> int:
    entries = benchmarks.load_benchmarks(args.benchmark)
    engines = {}
    for name in [e.strip() for e in args.engines.split(",") if e.strip()]:
        if name == "oracle":
            engines[name] = oracle.oracle_engine(args.guard)
        elif name == "rollout":
            engines[name] = _seeded_rollout(args)
        elif name == "net":
            evaluator = NetEvaluator(_load_net_for_bench(args))
            search = SearchConfig(simulations=args.simulations, c_alpha=args.c_alpha)
            engines[name] = lambda seq, ev=evaluator, sc=search: fold_episodes([seq], ev, sc, seed=args.seed)[0].contacts.contacts
        else:
            raise UsageError(f"unknown engine {name!r}")
    table = oracle.compare_engines([(e.id, e.sequence) for e in entries], engines,
                                   [e.known_optimum for e in entries])
    report = table.to_tsv()
    sys.stdout.write(report)
    if args.output:
        Path(args.output).write_text(report)
    bad = table.violations()
    if bad:
        for ident, engine in bad:
            print(f"FAIL: {engine} exceeds the upper bound on {ident}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _seeded_rollout(args):
    """Rollout engine whose k-th call uses seed ``seed * 10007 + k``."""
    calls = itertools.count(1)

    def engine(seq):
        cfg = oracle.RolloutConfig(args.rollout_simulations, args.c_alpha, seed=args.seed * 10_007 + next(calls))
        return oracle.rollout_uct_fold(seq, cfg).contacts.contacts
    return engine


def _load_net_for_bench(args) -> HPNet:
    if not args.checkpoint:
        raise UsageError("engine 'net' needs --checkpoint")
    return _load_net(args)


def cmd_oracle(args) -> int:
    seq = lattice.parse_hp_string(args.sequence)
    res = oracle.oracle_solve(seq, args.guard)
    moves = "".join(m.letter for m in res.optimal_fold)
    print(f"optimum\t{res.optimum}\nenergy\t{res.energy}\nupper_bound\t{lattice.upper_bound(seq)}\n"
          f"optimal_folds\t{res.count_optimal}\nwitness\t{moves}")
    return EXIT_OK


def cmd_render(args) -> int:
    recs = records.read_records(args.records)
    out = Path(args.out)
    for n, rec in enumerate(recs, 1):
        print(_write_render(out, rec.id or f"fold{n}", rec.state(), args.format))
    return EXIT_OK


def cmd_gen_corpus(args) -> int:
    seqs = generate_corpus(args.count, (args.min_length, args.max_length), (args.min_h, args.max_h), args.seed)
    Path(args.output).write_text("".join(f"{s}\n" for s in seqs))
    return EXIT_OK


COMMANDS = {"fold": cmd_fold, "train": cmd_train, "bench": cmd_bench, "oracle": cmd_oracle,
            "render": cmd_render, "gen-corpus": cmd_gen_corpus}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hpfold: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, lattice.SequenceError, oracle.OracleGuardError, config_mod.ConfigError,
            CheckpointError, FileNotFoundError, lattice.IllegalMoveError, ValueError) as exc:
        print(f"hpfold: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("hpfold: interrupted", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # anything else is a bug
        log.exception("internal error")
        print(f"hpfold: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
