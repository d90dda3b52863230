#!/usr/bin/env python3
"""Regenerate the bundled 30-node mini fixture in data/mini.

Three communities of ten nodes. Texts inside a community reuse the same
topic sentences, so a node's neighbors carry n-grams of its own hidden text.
"""
import json
import pathlib
import random

TOPICS = {
    "graphs": [
        "message passing layers aggregate features from neighboring nodes",
        "the adjacency matrix is normalized before every propagation step",
        "spectral filters smooth signals over the graph laplacian",
        "deeper models suffer from oversmoothing of node representations",
        "sampling neighbors keeps the memory footprint small on large graphs",
        "link prediction scores pairs of node embeddings with a dot product",
    ],
    "biology": [
        "the protein binds to the receptor and triggers a signaling cascade",
        "gene expression was measured across three independent cell lines",
        "mutations in the promoter region reduce transcription of the gene",
        "the enzyme catalyzes the first step of the metabolic pathway",
        "knockout mice showed impaired immune response after infection",
        "sequencing revealed conserved motifs in the regulatory region",
    ],
    "reviews": [
        "the battery lasts all day and charges quickly overnight",
        "shipping was fast and the package arrived well protected",
        "the screen is bright but the speakers sound a little thin",
        "customer support replaced the broken unit without any hassle",
        "the build quality feels solid for such a low price",
        "setup took only a few minutes with the included instructions",
    ],
}


def main() -> None:
    rng = random.Random(20240611)
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "mini"
    out.mkdir(parents=True, exist_ok=True)
    nodes, edges = [], set()
    labels = list(TOPICS)
    for c, label in enumerate(labels):
        pool = TOPICS[label]
        for j in range(10):
            nid = c * 10 + j
            picks = [pool[(j + k) % len(pool)] for k in range(4)]
            text = f"item {nid} opening words " + " and ".join(picks)
            nodes.append({"id": nid, "text": text, "label": label, "timestamp": 1000 + nid})
            edges.add((nid, c * 10 + (j + 1) % 10))
            edges.add((nid, c * 10 + (j + 3) % 10))
    for _ in range(4):
        a, b = rng.sample(range(30), 2)
        if a // 10 != b // 10:
            edges.add((a, b))
    with open(out / "nodes.jsonl", "w") as f:
        for n in nodes:
            f.write(json.dumps(n) + "\n")
    with open(out / "edges.tsv", "w") as f:
        for a, b in sorted(edges):
            f.write(f"{a}\t{b}\n")


if __name__ == "__main__":
    main()
