"""Command-line front end.

Every command writes its resolved configuration as the first JSON line on
stdout, then JSON-lines results; human-readable summaries go to stderr.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 round-trip mismatch.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .cells import DeepCellDAN, channel_mix_constructor, reduction_constructor
from .data import load_csv, load_idx, synthesize
from .errors import DagnetError, SpecError
from .extraction import ExtractionConfig, graph_stats, roundtrip_check, transform
from .generators import GeneratorSpec, generate
from .graph import Dag, LayeredDag
from .models import MaskedDeepDAN, MaskedDeepFFN
from .pruning import apply_mask, iterative_magnitude_prune, recompute_mask
from .training import evaluate, fit

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(SpecError):
    pass


def _emit(obj, out=None) -> None:
    print(json.dumps(obj, separators=(",", ":"), sort_keys=True), file=out or sys.stdout)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}


def _load_structure(path) -> LayeredDag:
    g = io.load_graph(path)
    if isinstance(g, Dag):
        raise UsageError(f"{path}: graph is empty")
    return g


def _load_data(args):
    spec = args.data
    if spec in ("xor", "blobs"):
        return synthesize(spec, args.n, seed=args.data_seed, noise=args.noise)
    kind, _, rest = spec.partition(":")
    if kind == "csv" and rest:
        path, _, col = rest.partition(":")
        column = (int(col) if col.lstrip("-").isdigit() else col) if col else -1
        return load_csv(path, column)
    if kind == "idx" and rest:
        images, _, labels = rest.partition(":")
        if not labels:
            raise UsageError("idx data needs 'idx:IMAGES:LABELS'")
        return load_idx(images, labels)
    raise UsageError(f"unknown data source {spec!r}; use xor, blobs, csv:PATH[:COL] or idx:IMAGES:LABELS")


def _positive(name, value, allow_zero=False):
    if value is None:
        return
    if value < 0 or (value == 0 and not allow_zero):
        raise UsageError(f"--{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")


# -- commands ----------------------------------------------------------------

def cmd_generate(args) -> int:
    a, b, p = args.ws or args.layered
    if a != int(a) or b != int(b):
        raise UsageError("vertex, neighbour and layer counts must be integers")
    if args.ws:
        spec = GeneratorSpec("watts_strogatz_newman", n=int(a), k=int(b), p=p, seed=args.seed)
    else:
        spec = GeneratorSpec("random_layered_dag", n=int(a), layers=int(b), p=p, seed=args.seed)
    g = generate(spec)
    if args.output:
        io.save_graph(g, args.output)
    else:
        print(io.dumps_graph(g))
    stats = graph_stats(g).to_dict()
    _emit({"stats": stats})
    _say(f"generated {stats['nodes']} nodes, {stats['edges']} edges, {stats['layers']} layers")
    return EXIT_OK


def cmd_build(args) -> int:
    kw = dict(seed=args.seed)
    if args.ffn:
        if len(args.ffn) < 2:
            raise UsageError("--ffn needs INPUT OUTPUT [HIDDEN ...]")
        model = MaskedDeepFFN(args.ffn[0], args.ffn[1], args.ffn[2:], activation=args.activation,
                              init_fanin=args.init_fanin, **kw)
    elif args.dan:
        inp, out, path = args.dan
        model = MaskedDeepDAN(int(inp), int(out), _load_structure(path), activation=args.activation,
                              init_fanin=args.init_fanin, **kw)
    else:
        classes, channels, path = args.cell
        ctor = reduction_constructor if args.cell_kind == "reduction" else channel_mix_constructor
        model = DeepCellDAN(int(classes), int(channels), ctor, _load_structure(path), **kw)
    io.save_model(model, args.output)
    _emit({"model": model.kind, "parameters": model.num_parameters(), "path": str(args.output)})
    _say(f"built {model!r} -> {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    _positive("lr", args.lr)
    _positive("epochs", args.epochs, allow_zero=True)
    _positive("batch", args.batch)
    model = io.load_model(args.model)
    data = _load_data(args)
    fit(model, data, args.epochs, args.lr, batch_size=args.batch, seed=args.seed,
        on_epoch=lambda rec: _emit(rec))
    loss, acc = evaluate(model, data)
    io.save_model(model, args.output or args.model)
    _emit({"final_loss": loss, "final_accuracy": acc})
    _say(f"trained {args.epochs} epochs: loss {loss:.4f}, accuracy {acc:.4f}")
    return EXIT_OK


def cmd_prune(args) -> int:
    _positive("theta", args.theta, allow_zero=True)
    model = io.load_model(args.model)
    if args.rounds is not None:
        if args.rounds < 1:
            raise UsageError("--rounds must be >= 1")
        if not 0 < args.rate < 1:
            raise UsageError("--rate must lie in (0, 1)")
        _positive("lr", args.lr)
        data = _load_data(args)
        ticket, model = iterative_magnitude_prune(
            model, data, args.rounds, args.rate, args.epochs, rewind=args.rewind, lr=args.lr,
            batch_size=args.batch, seed=args.seed, scope=args.prune_scope, protect_io=args.protect_io)
        report = ticket.reports[-1]
    else:
        report = recompute_mask(model, args.theta, fresh=args.prune_fresh, protect_io=args.protect_io)
    if args.apply:
        apply_mask(model)
    io.save_model(model, args.output or args.model)
    sys.stdout.write(report.to_jsonl())
    _say(f"global density {report.global_density:.4f}")
    return EXIT_OK


def _parse_edge_rule(text: str) -> tuple[str, float]:
    name, _, eps = text.partition(":")
    if name == "mask_nonzero" and not eps:
        return name, 0.0
    if name == "weight_above":
        try:
            return name, float(eps) if eps else 0.0
        except ValueError:
            pass
    raise UsageError(f"--edge-rule must be mask_nonzero or weight_above[:EPS], got {text!r}")


def cmd_extract(args) -> int:
    rule, eps = _parse_edge_rule(args.edge_rule)
    model = io.load_model(args.model)
    if args.probe_shape:
        shape = tuple(args.probe_shape)
    elif isinstance(model, DeepCellDAN):
        shape = (model.input_channel_size, 8, 8)
    else:
        shape = (model.input_size,)
    cfg = ExtractionConfig(shape, args.granularity, rule, eps, args.max_edges, args.force, args.seed)
    g = transform(model, cfg)
    if args.output:
        io.save_graph(g, args.output)
    else:
        print(io.dumps_graph(g))
    stats = graph_stats(g).to_dict()
    _emit({"stats": stats})
    _say(f"extracted {stats['nodes']} nodes, {stats['edges']} edges")
    return EXIT_OK


def cmd_stats(args) -> int:
    _emit(graph_stats(io.load_graph(args.graph)).to_dict())
    return EXIT_OK


def cmd_roundtrip(args) -> int:
    structure = _load_structure(args.graph)
    model = io.load_model(args.model) if args.model else None
    if model is None:
        model = MaskedDeepDAN(args.input_size, args.output_size, structure, seed=args.seed)
    result = roundtrip_check(structure, args.input_size, args.output_size, model=model)
    _emit(result.to_dict())
    if not result:
        _say(f"round-trip mismatch: {len(result.missing)} missing, {len(result.extra)} extra edges")
        return EXIT_MISMATCH
    _say("round-trip identity holds")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _add_data_args(p) -> None:
    p.add_argument("--data", default="xor",
                   help="xor | blobs | csv:PATH[:COLUMN] | idx:IMAGES:LABELS")
    p.add_argument("--n", type=int, default=200, help="sample count for synthetic data")
    p.add_argument("--noise", type=float, default=None, help="noise sigma for synthetic data")
    p.add_argument("--data-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dagnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="sample a graph and write Graph JSON")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ws", nargs=3, type=float, metavar=("N", "K", "P"),
                   help="Newman-Watts-Strogatz graph, oriented low id -> high id")
    g.add_argument("--layered", nargs=3, type=float, metavar=("N", "LAYERS", "P_EDGE"),
                   help="random layered DAG")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build", help="compile a model and write a checkpoint")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--ffn", nargs="+", type=int, metavar="SIZE", help="INPUT OUTPUT [HIDDEN ...]")
    g.add_argument("--dan", nargs=3, metavar=("INPUT", "OUTPUT", "GRAPH"))
    g.add_argument("--cell", nargs=3, metavar=("CLASSES", "CHANNELS", "GRAPH"))
    p.add_argument("--cell-kind", choices=["channel_mix", "reduction"], default="channel_mix")
    p.add_argument("--activation", choices=["relu", "tanh", "identity"], default="relu")
    p.add_argument("--init-fanin", choices=["dense", "masked"], default="dense")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("train", help="train a checkpoint with SGD")
    p.add_argument("model", type=Path)
    _add_data_args(p)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, help="defaults to overwriting MODEL")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="magnitude-prune masks")
    p.add_argument("model", type=Path)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--prune-fresh", action="store_true",
                   help="threshold raw magnitudes instead of intersecting with the old mask")
    p.add_argument("--protect-io", action="store_true", help="never prune input/output blocks")
    p.add_argument("--apply", action="store_true", help="zero masked weights afterwards")
    p.add_argument("--rounds", type=int, default=None, help="run iterative pruning instead of --theta")
    p.add_argument("--rate", type=float, default=0.2)
    p.add_argument("--prune-scope", choices=["layer", "global"], default="layer")
    p.add_argument("--rewind", action=argparse.BooleanOptionalAction, default=True)
    _add_data_args(p)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, help="defaults to overwriting MODEL")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("extract", help="extract the graph of a checkpoint")
    p.add_argument("model", type=Path)
    p.add_argument("--granularity", choices=["neuron", "layer"], default="neuron")
    p.add_argument("--edge-rule", default="mask_nonzero", help="mask_nonzero | weight_above[:EPS]")
    p.add_argument("--probe-shape", nargs="+", type=int, default=None)
    p.add_argument("--max-edges", type=int, default=10_000_000)
    p.add_argument("--force", action="store_true", help="ignore the edge cap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("stats", help="print graph statistics")
    p.add_argument("graph", type=Path)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("roundtrip", help="check graph -> DAN -> graph identity")
    p.add_argument("graph", type=Path)
    p.add_argument("--input-size", type=int, default=784)
    p.add_argument("--output-size", type=int, default=10)
    p.add_argument("--model", type=Path, default=None, help="use this checkpoint instead of a fresh DAN")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    _emit(_config(args))
    try:
        return args.func(args)
    except SpecError as exc:
        _say(f"error: {exc}")
        return EXIT_USAGE
    except (DagnetError, OSError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
