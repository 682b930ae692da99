"""Embedding cosine similarity by hop distance, before and after training."""

import argparse
from pathlib import Path

from relgraph import dataio, svgplot
from relgraph.encoder import EncoderConfig, build_encoder, forward
from relgraph.evalsuite import hop_similarity
from relgraph.relloss import LossConfig
from relgraph.synthgen import generate_sbm, homophilic_default
from relgraph.trainer import TrainConfig, train


def _write(hs, k, path_csv, path_svg, title):
    dataio.write_csv_report(
        {"hop": [h.hop for h in hs], "mean": [h.mean for h in hs], "q1": [h.q1 for h in hs],
         "median": [h.median for h in hs], "q3": [h.q3 for h in hs], "pairs": [h.pairs for h in hs]},
        path_csv,
    )
    names = [str(h.hop) for h in hs[:-1]] + [f">{k}"]
    svgplot.write_svg(svgplot.box_chart(names, [(h.q1, h.median, h.q3, h.mean) for h in hs],
                                        title, "hop", "cosine"), path_svg)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--variant", choices=("pair", "list"), default="list")
    ap.add_argument("--out", default="results/hop_similarity")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    g = generate_sbm(homophilic_default(args.seed, feature_dim=64))
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed,
                      loss=LossConfig(k=args.k, variant=args.variant, seed=args.seed),
                      encoder=EncoderConfig(embed_dim=32))
    before = hop_similarity(forward(build_encoder(g, cfg.encoder, cfg.seed), g.features).data, g, args.k)
    res = train(g, cfg)
    after = hop_similarity(forward(res.state, g.features).data, g, args.k)
    _write(before, args.k, out / "before.csv", out / "before.svg", "untrained encoder")
    _write(after, args.k, out / "after.csv", out / "after.svg", "trained encoder")
    for tag, hs in (("before", before), ("after", after)):
        print(tag, " ".join(f"hop{h.hop}={h.mean:.3f}" for h in hs))


if __name__ == "__main__":
    main()
