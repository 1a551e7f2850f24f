"""Command-line entry point: ``gbpath <command> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from gbpath.errors import GBPathError
from gbpath.graph import VertexId, dumps_map, generate_map, loads_map
from gbpath.harness import parse_config, run_experiment
from gbpath.publish import LayeredGraph, publish_full
from gbpath.recover import adversary_infer, reconstruct_path, true_edge_rank, withhold

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3


def _budget(tok: str) -> float | None:
    if tok.lower() in ("off", "none"):
        return None
    try:
        return float(tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'off', got {tok!r}") from None


def _edge(tok: str) -> tuple[VertexId, VertexId]:
    try:
        a, b = tok.split("-")
        return VertexId.parse(a), VertexId.parse(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected U-V, got {tok!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="ascii")


def cmd_generate_map(args) -> None:
    net, path = generate_map(args.vertices, args.edges, np.random.default_rng(args.seed), cyclic=args.cyclic)
    _emit(dumps_map(net, path), args.output)


def cmd_publish(args) -> None:
    net, path = loads_map(Path(args.map).read_text(encoding="ascii"))
    pub = publish_full(net, path, args.eps_v, args.eps_e, np.random.default_rng(args.seed), allow_split=not args.no_split)
    _emit(pub.graph.dumps(), args.output)
    if args.dump_matrix:
        if args.output in (None, "-"):
            raise GBPathError("--dump-matrix needs an output file")
        ids = "# ids " + " ".join(str(v) for v in pub.relation.ids) + "\n"
        Path(args.output + ".matrix").write_text(ids + pub.relation.dumps(), encoding="ascii")


def cmd_reconstruct(args) -> None:
    net, _ = loads_map(Path(args.map).read_text(encoding="ascii"))
    g = LayeredGraph.loads(Path(args.published).read_text(encoding="ascii"))
    _emit(reconstruct_path(g, net).dumps(), args.output)


def cmd_attack(args) -> None:
    net, path = loads_map(Path(args.map).read_text(encoding="ascii"))
    g = LayeredGraph.loads(Path(args.published).read_text(encoding="ascii"))
    cands = adversary_infer(withhold(net, path, g, args.withhold))
    lines = [f"CANDIDATES {len(cands)}"]
    lines += [f"C {a}-{b} {w:.6g}" for (a, b), w in sorted(cands.items())]
    lines.append(f"RANK {true_edge_rank(cands, args.withhold)}")
    _emit("\n".join(lines) + "\n", args.output)


def cmd_experiment(args) -> None:
    cfg = parse_config(Path(args.config).read_text(encoding="ascii"))
    _emit(run_experiment(cfg), args.output)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gbpath", description="Publish a path as a private layered graph.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-map", help="draw a random map with a path over all vertices")
    g.add_argument("--vertices", type=int, required=True)
    g.add_argument("--edges", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--cyclic", type=int, default=0, help="number of revisits to splice into the path")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate_map)

    q = sub.add_parser("publish", help="publish the map's path as a layered graph")
    q.add_argument("--map", required=True)
    q.add_argument("--eps-v", type=_budget, required=True, help="vertex-step budget or 'off'")
    q.add_argument("--eps-e", type=_budget, required=True, help="edge-step budget or 'off'")
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--no-split", action="store_true", help="fail instead of splitting vertices")
    q.add_argument("--dump-matrix", action="store_true", help="also write OUTPUT.matrix")
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_publish)

    r = sub.add_parser("reconstruct", help="recover the path as a participant")
    r.add_argument("--map", required=True)
    r.add_argument("--published", required=True)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reconstruct)

    a = sub.add_parser("attack", help="run the missing-edge adversary")
    a.add_argument("--map", required=True)
    a.add_argument("--published", required=True)
    a.add_argument("--withhold", type=_edge, required=True, metavar="U-V")
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("experiment", help="run the Monte-Carlo experiment grid")
    e.add_argument("--config", required=True)
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except GBPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
