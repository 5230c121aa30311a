# cli.py
import argparse
import logging
import sys
from typing import List, Optional

import pandas as pd
from pydantic import ValidationError

from models.schemas import BlockSpec, KMeansConfig, parse_list
from services import settings
from services.clustering import kmeans
from services.embedding import bipartite_spectral_embedding, spectral_embedding
from services.errors import ConfigError, GraphFormatError, SolverError, SpecregError
from services.experiments import read_config_file, run_experiment, run_toy
from services.generators import (bipartite_block_model, clique_block_model, clique_block_model_eps,
                                 degree_corrected_model, sbm)
from services.graphs import (Labels, bipartite_to_adjacency, labeled_nodes, load_bipartite, load_edge_list,
                             load_labels, write_bipartite, write_edge_list, write_labels)
from services.metrics import evaluate_all
from services.reporting import csv_table, read_embedding, theory_report, write_embedding

logger = logging.getLogger("specreg")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _ints(text: str) -> List[int]:
    return parse_list(text, int)


def _floats(text: str) -> List[float]:
    return parse_list(text, float)


# ------------------------
# Subcommands
# ------------------------
def cmd_generate(args) -> int:
    if args.model == "bipartite":
        if not args.m_sizes:
            raise ConfigError("--model bipartite needs --m-sizes")
        b, left, right = bipartite_block_model(args.sizes, args.m_sizes)
        write_bipartite(b, args.out_graph)
        write_labels(left, args.out_labels)
        if args.out_right_labels:
            write_labels(right, args.out_right_labels)
        return EXIT_OK
    if args.model == "sbm":
        p_in = args.p_in if len(args.p_in) == len(args.sizes) else args.p_in * len(args.sizes)
        g, labels = sbm(args.sizes, p_in, args.p_out, seed=args.seed)
    elif args.model == "dc":
        g, labels = degree_corrected_model(BlockSpec(sizes=args.sizes, theta=args.theta))
    elif args.eps:
        g, labels = clique_block_model_eps(BlockSpec(sizes=args.sizes, eps=args.eps))
    else:
        g, labels = clique_block_model(args.sizes)
    write_edge_list(g, args.out_graph)
    write_labels(labels, args.out_labels, g.names())
    logger.info("generated %s: %d nodes, %d stored entries", args.model, g.n, g.nnz)
    return EXIT_OK


def cmd_embed(args) -> int:
    if args.bipartite:
        b = load_bipartite(args.graph)
        emb = bipartite_spectral_embedding(b, args.k, args.alpha, args.alpha_mode, args.regularization_target,
                                           skip_first=not args.keep_first, seed=args.seed, tol=args.tol)
    else:
        g = load_edge_list(args.graph)
        emb = spectral_embedding(g, args.k, args.alpha, args.alpha_mode, skip_first=not args.keep_first,
                                 seed=args.seed, tol=args.tol, allow_isolated=args.allow_isolated)
    write_embedding(emb, args.out)
    logger.info("eigenvalues: %s", " ".join(f"{v:.8f}" for v in emb.eigenvalues))
    return EXIT_OK


def cmd_cluster(args) -> int:
    emb = read_embedding(args.embedding)
    cfg = KMeansConfig(K=args.k, seed=args.seed, n_init=args.n_init, max_iter=args.max_iter)
    labels, inertia = kmeans(emb.coordinates, cfg)
    names = emb.node_names or tuple(str(i) for i in range(len(labels)))
    write_labels(Labels(labels.assignments, labels.K), args.out, names)
    logger.info("k-means inertia %.6g", inertia)
    return EXIT_OK


def cmd_eval(args) -> int:
    g = bipartite_to_adjacency(load_bipartite(args.graph)) if args.bipartite else load_edge_list(args.graph)
    names = g.names()
    pred = load_labels(args.pred, names)
    if len(pred) != g.n:
        raise GraphFormatError(f"{args.pred}: predictions cover {len(pred)} of {g.n} nodes")
    truth = load_labels(args.truth, names)
    mask = None
    if args.mask == "original" or len(truth) != g.n:
        mask = labeled_nodes(args.truth, names)
    record = evaluate_all(g, pred, truth, mask)
    sys.stdout.write(csv_table(pd.DataFrame([record.model_dump()])))
    return EXIT_OK


def cmd_theory(args) -> int:
    if args.bipartite and not args.m_sizes:
        raise ConfigError("--bipartite needs --m-sizes")
    sys.stdout.write(theory_report(args.sizes, args.alpha, args.m_sizes if args.bipartite else None))
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.toy:
        sys.stdout.write(run_toy())
        return EXIT_OK
    if not args.config:
        raise ConfigError("experiment needs --config (or --toy)")
    cfg = read_config_file(args.config)
    if args.threads:
        cfg = cfg.model_copy(update={"threads": args.threads})
    table = run_experiment(cfg, args.out)
    if not (args.out or cfg.out):
        sys.stdout.write(csv_table(table))
    return EXIT_OK


# ------------------------
# Parser
# ------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specreg", description="Regularized spectral embedding of graphs")
    p.add_argument("--log-level", default=settings.LOG_LEVEL, help="logging level (default from SPECREG_LOG_LEVEL)")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a block-model graph and its labels")
    g.add_argument("--model", choices=["cliques", "sbm", "bipartite", "dc"], default="cliques")
    g.add_argument("--sizes", type=_ints, required=True, help="block sizes, e.g. 5,3,2 or 20*100")
    g.add_argument("--m-sizes", type=_ints, help="right-part block sizes (bipartite)")
    g.add_argument("--p-in", type=_floats, default=[0.5], help="within-block probabilities (sbm)")
    g.add_argument("--p-out", type=float, default=0.001, help="across-block probability (sbm)")
    g.add_argument("--eps", type=float, default=0.0, help="constant added to every entry (cliques)")
    g.add_argument("--theta", type=_floats, help="node weights (dc)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-graph", required=True)
    g.add_argument("--out-labels", required=True)
    g.add_argument("--out-right-labels")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", help="regularized spectral embedding")
    e.add_argument("--graph", required=True)
    e.add_argument("--k", type=int, default=20, help="embedding dimension")
    e.add_argument("--alpha", type=float, default=1.0)
    e.add_argument("--alpha-mode", choices=["relative", "absolute"], default="relative")
    e.add_argument("--bipartite", action="store_true", help="the graph file is a biadjacency list")
    e.add_argument("--regularization-target", choices=["biadjacency", "adjacency"], default="biadjacency")
    e.add_argument("--keep-first", action="store_true", help="keep the trivial first eigenvector")
    e.add_argument("--allow-isolated", action="store_true", help="admit zero-degree nodes when alpha = 0")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--tol", type=float, default=None)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_embed)

    c = sub.add_parser("cluster", help="k-means on an embedding")
    c.add_argument("--embedding", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--n-init", type=int, default=10)
    c.add_argument("--max-iter", type=int, default=300)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    v = sub.add_parser("eval", help="score a clustering")
    v.add_argument("--graph", required=True)
    v.add_argument("--bipartite", action="store_true")
    v.add_argument("--pred", required=True)
    v.add_argument("--truth", required=True)
    v.add_argument("--mask", choices=["all", "original"], default="all",
                   help="original: score only the nodes listed in the truth file")
    v.set_defaults(func=cmd_eval)

    t = sub.add_parser("theory", help="thresholds, secular roots and predicted sign splits")
    t.add_argument("--sizes", type=_floats, required=True)
    t.add_argument("--alpha", type=float, required=True, help="absolute alpha")
    t.add_argument("--bipartite", action="store_true")
    t.add_argument("--m-sizes", type=_floats)
    t.set_defaults(func=cmd_theory)

    x = sub.add_parser("experiment", help="run a sweep from a config file")
    x.add_argument("--config")
    x.add_argument("--out", help="output directory (overrides the config's out)")
    x.add_argument("--threads", type=int)
    x.add_argument("--toy", action="store_true", help="print the three-clique toy report")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GraphFormatError, ValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except SolverError as exc:
        logger.error("solver failed: %s", exc)
        return EXIT_SOLVER
    except (SpecregError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
