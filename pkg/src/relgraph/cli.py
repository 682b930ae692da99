"""Command-line entry point: ``relgraph <subcommand> ...``.

Every run writes its outputs plus a ``<output>.manifest.json`` describing the
invocation. Failures exit non-zero with a single ``relgraph: error: ...`` line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, dataio, svgplot
from .dataio import DatasetBundle


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"kind=usage prog={self.prog!r} msg={message}")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("RELGRAPH_THREADS")
    return max(1, int(env)) if env else 1


def _load(args, self_loops: bool):
    bundle = DatasetBundle(
        Path(args.graph), Path(args.labels),
        Path(args.features) if getattr(args, "features", None) else None,
        Path(args.split) if getattr(args, "split", None) else None,
    )
    for p in (bundle.graph_path, bundle.labels_path, bundle.features_path, bundle.split_path):
        if p is not None and not p.exists():
            raise CliError(f"kind=missing-input path={p}")
    return dataio.load_bundle(bundle, add_self_loops=self_loops)


def _manifest(args, outputs, started, extra=None):
    snap = {k: v for k, v in vars(args).items() if k != "func"}
    man = {
        "subcommand": args.command,
        "config": snap,
        "seed": getattr(args, "seed", None),
        "inputs": {k: snap[k] for k in ("graph", "labels", "features", "split", "embeddings", "checkpoint", "config_file")
                   if snap.get(k)},
        "outputs": [str(o) for o in outputs],
        "version": __version__,
        "wall_clock_seconds": round(time.time() - started, 6),
    }
    if extra:
        man.update(extra)
    path = Path(str(outputs[0]) + ".manifest.json")
    path.write_text(json.dumps(man, indent=2, sort_keys=True, default=str) + "\n")


def _svg_path(args):
    return Path(args.svg) if getattr(args, "svg", None) else Path(str(args.out)).with_suffix(".svg")


# -- subcommands ------------------------------------------------------------

def cmd_gen_sbm(args, started):
    from .synthgen import SbmSpec, generate_sbm
    from .evalsuite import random_split

    sizes = [int(s) for s in args.sizes.split(",")]
    spec = SbmSpec(sizes, args.p_intra, args.p_inter, seed=args.seed,
                   ensure_connected=not args.allow_disconnected, add_self_loops=False,
                   feature_dim=args.feature_dim, feature_separation=args.feature_separation)
    g = generate_sbm(spec)
    splits = random_split(g.num_nodes, args.seed) if args.feature_dim else None
    b = dataio.write_bundle(g, args.out, splits)
    outs = [p for p in (b.graph_path, b.labels_path, b.features_path, b.split_path) if p is not None]
    _manifest(args, outs, started, {"num_nodes": g.num_nodes, "num_edges": g.num_edges})
    print(f"wrote {g.num_nodes} nodes, {g.num_edges} edges to {args.out}.*")


def cmd_lc(args, started):
    from .labelstats import lc_emp

    g, _ = _load(args, False)
    curve = lc_emp(g, args.k, threads=_threads(args))
    dataio.write_csv_report(
        {"hop": curve.hops.tolist(), "lc_emp": curve.lc_values.tolist(), "anchors": curve.per_node_counts.tolist()},
        args.out,
    )
    svgplot.write_svg(svgplot.line_chart(curve.hops.tolist(), {"LC_emp": curve.lc_values.tolist()},
                                         "label consistency by hop", "hop", "LC_emp"), _svg_path(args))
    _manifest(args, [args.out, _svg_path(args)], started)


def _transition(args):
    from .markovlab import build_transition

    g, _ = _load(args, not args.no_self_loops)
    return g, build_transition(g)


def cmd_transition(args, started):
    g, t = _transition(args)
    c = t.num_labels
    rows = {"label": list(range(c))}
    for j in range(c):
        rows[f"T_{j}"] = t.T[:, j].tolist()
    rows["pi"] = t.pi.tolist()
    dataio.write_csv_report(rows, args.out)
    _manifest(args, [args.out], started)


def cmd_spectrum(args, started):
    g, t = _transition(args)
    ev = t.eigvals
    dataio.write_csv_report(
        {"index": list(range(len(ev))), "real": ev.real.tolist(), "imag": ev.imag.tolist(),
         "modulus": np.abs(ev).tolist()},
        args.out,
    )
    _manifest(args, [args.out], started, {"lambda2_complex": t.lambda2_is_complex})


def cmd_decay(args, started):
    from .markovlab import lc_prob

    g, t = _transition(args)
    labels = [args.label] if args.label is not None else list(range(t.num_labels))
    rows = {"k": list(range(args.max_k + 1))}
    series = {}
    for i in labels:
        rep = lc_prob(t, i, args.max_k)
        rows[f"lc_prob_{i}"] = rep.lc_prob.tolist()
        rows[f"pi_{i}"] = [rep.pi_target] * (args.max_k + 1)
        rows[f"bound_{i}"] = (rep.pi_target + rep.bound()).tolist()
        series[f"label {i}"] = rep.lc_prob.tolist()
    dataio.write_csv_report(rows, args.out)
    svgplot.write_svg(svgplot.line_chart(rows["k"], series, "LC_prob(k)", "k", "return probability"),
                      _svg_path(args))
    _manifest(args, [args.out, _svg_path(args)], started,
              {"lambda2_real": t.lambda2_real, "lambda2_modulus": t.lambda2_modulus})


def cmd_walk_sim(args, started):
    from .markovlab import matrix_powers, monte_carlo_lc

    g, t = _transition(args)
    threads = _threads(args)
    est = monte_carlo_lc(g, args.label, args.max_k, args.walks, args.seed, mode=args.mode,
                         uniform_start=args.uniform_start, threads=threads)
    P = matrix_powers(t.T, args.max_k)[:, args.label, :]
    ks, js, ph, ex, err = [], [], [], [], []
    for k in range(args.max_k + 1):
        for j in range(t.num_labels):
            ks.append(k); js.append(j)
            ph.append(float(est[k, j])); ex.append(float(P[k, j])); err.append(abs(est[k, j] - P[k, j]))
    dataio.write_csv_report({"k": ks, "label": js, "p_hat": ph, "T_power": ex, "abs_err": err}, args.out)
    _manifest(args, [args.out], started, {"threads": threads, "max_abs_err": max(err)})


def cmd_count_ops(args, started):
    from .relloss import count_sim_ops

    sizes = [int(s) for s in args.hop_sizes.split(",")]
    unc, cached = count_sim_ops(args.k, sizes, args.variant)
    print(unc)
    if args.out:
        dataio.write_csv_report({"variant": [args.variant], "k": [args.k], "uncached": [unc], "cached": [cached]},
                                args.out)
        _manifest(args, [args.out], started)


def cmd_train(args, started):
    from dataclasses import replace

    from .trainer import load_config, save_checkpoint, train, write_history, TrainConfig
    from .encoder import embed

    g, _ = _load(args, False)
    cfg = load_config(args.config_file) if args.config_file else TrainConfig()
    cfg = replace(cfg, seed=args.seed, loss=replace(cfg.loss, seed=args.seed))
    if args.epochs is not None:
        cfg = replace(cfg, epochs=args.epochs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = train(g, cfg, checkpoint_dir=str(out))
    ckpt = out / "checkpoint.npz"
    save_checkpoint(res, cfg, ckpt)
    hist = out / "loss_history.csv"
    write_history(res, hist)
    emb = out / "embeddings.txt"
    dataio.write_embeddings(embed(res.state, g), emb)
    _manifest(args, [ckpt, hist, emb], started, {"final_loss": res.history[-1]})


def cmd_embed(args, started):
    from .trainer import load_checkpoint
    from .encoder import embed

    g, _ = _load(args, False)
    res, _ = load_checkpoint(args.checkpoint, g)
    dataio.write_embeddings(embed(res.state, g), args.out)
    _manifest(args, [args.out], started)


def cmd_eval(args, started):
    from .evalsuite import ProbeConfig, cluster_nmi, linear_probe, random_split, sim_at_5

    H = dataio.read_embeddings(args.embeddings)
    labels = dataio.read_labels(args.labels)
    if H.shape[0] != labels.size:
        raise CliError(f"kind=mismatch msg=embeddings have {H.shape[0]} rows, labels {labels.size}")
    _, labels = np.unique(labels, return_inverse=True)
    splits = dataio.read_splits(args.split, labels.size) if args.split else random_split(labels.size, args.seed)
    acc = linear_probe(H, labels, splits, ProbeConfig(l2=args.l2))
    score = cluster_nmi(H, labels, None, args.seed)
    s5 = sim_at_5(H, labels)
    dataio.write_csv_report({"metric": ["accuracy", "nmi", "sim_at_5"], "value": [acc, score, s5]}, args.out)
    _manifest(args, [args.out], started)


def cmd_embed_sim(args, started):
    from .evalsuite import hop_similarity

    g, _ = _load(args, False)
    H = dataio.read_embeddings(args.embeddings)
    if H.shape[0] != g.num_nodes:
        raise CliError(f"kind=mismatch msg=embeddings have {H.shape[0]} rows, graph {g.num_nodes}")
    hs = hop_similarity(H, g, args.k)
    dataio.write_csv_report(
        {"hop": [h.hop for h in hs], "mean": [h.mean for h in hs], "q1": [h.q1 for h in hs],
         "median": [h.median for h in hs], "q3": [h.q3 for h in hs], "pairs": [h.pairs for h in hs]},
        args.out,
    )
    names = [str(h.hop) for h in hs[:-1]] + [f">{args.k}"]
    svgplot.write_svg(svgplot.box_chart(names, [(h.q1, h.median, h.q3, h.mean) for h in hs],
                                        "embedding similarity by hop", "hop", "cosine"), _svg_path(args))
    _manifest(args, [args.out, _svg_path(args)], started)


# -- parser -------------------------------------------------------------------

def _graph_args(p, features=False, split=False):
    p.add_argument("--graph", required=True, help="edge list file")
    p.add_argument("--labels", required=True, help="labels file")
    if features:
        p.add_argument("--features", required=True, help="feature matrix file")
    if split:
        p.add_argument("--split", help="split file")


def _markov_args(p):
    _graph_args(p)
    p.add_argument("--no-self-loops", action="store_true",
                   help="do not add a self-loop to every node (aperiodicity may fail)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="relgraph", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"relgraph {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $RELGRAPH_THREADS or 1); outputs do not depend on it")
    _add = sub.add_parser
    sub.add_parser = lambda name, **kw: _add(name, parents=[common], **kw)

    p = sub.add_parser("gen-sbm", help="generate a stochastic block model bundle")
    p.add_argument("--sizes", required=True, help="comma-separated block sizes")
    p.add_argument("--p-intra", type=float, required=True)
    p.add_argument("--p-inter", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--feature-dim", type=int, default=None)
    p.add_argument("--feature-separation", type=float, default=1.0)
    p.add_argument("--allow-disconnected", action="store_true")
    p.add_argument("--out", required=True, help="output prefix (writes .edges/.labels/...)")
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("lc", help="empirical label consistency per hop")
    _graph_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_lc)

    p = sub.add_parser("transition", help="label transition matrix and stationary distribution")
    _markov_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transition)

    p = sub.add_parser("spectrum", help="eigenvalues of the label transition matrix")
    _markov_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("decay", help="LC_prob(k) = (T^k)_ii curves")
    _markov_args(p)
    p.add_argument("--max-k", type=int, required=True)
    p.add_argument("--label", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("walk-sim", help="Monte-Carlo random walks vs. matrix powers")
    _markov_args(p)
    p.add_argument("--label", type=int, default=0)
    p.add_argument("--max-k", type=int, required=True)
    p.add_argument("--walks", type=int, default=100000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", choices=("lumped", "trajectory"), default="lumped")
    p.add_argument("--uniform-start", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_walk_sim)

    p = sub.add_parser("train", help="train the encoder with a relative-similarity loss")
    _graph_args(p, features=True)
    p.add_argument("--config-file", help="key = value config")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="write embeddings from a checkpoint")
    _graph_args(p, features=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="linear probe, clustering NMI and Sim@5")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--split")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed-sim", help="embedding cosine similarity by hop")
    _graph_args(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_embed_sim)

    p = sub.add_parser("count-ops", help="similarity-evaluation counts of the losses")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--hop-sizes", required=True, help="comma-separated |hop 1|,...,|beyond|")
    p.add_argument("--variant", choices=("pair", "list"), required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_count_ops)
    return ap


def main(argv=None) -> int:
    started = time.time()
    try:
        args = build_parser().parse_args(argv)
        args.func(args, started)
    except CliError as e:
        print(f"relgraph: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError, RuntimeError) as e:
        msg = " ".join(str(e).split())
        print(f"relgraph: error: kind={type(e).__name__} msg={msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
