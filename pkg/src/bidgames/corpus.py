"""Exhaustive corpora of small strongly connected graphs.

Graphs are enumerated up to isomorphism: one representative per class of
edge sets, and for each representative one weight vector per orbit of its
automorphism group. Self-loops are allowed.
"""
from __future__ import annotations

import itertools

from .arena import build_graph, tarjan_scc


def shape_classes(n):
    """One representative per isomorphism class of strongly connected shapes,
    with the automorphism group of each representative."""
    pairs = [(v, u) for v in range(n) for u in range(n)]
    perms = list(itertools.permutations(range(n)))
    # bit index of edge (v, u) after relabelling by perm
    remap = [[perm[v] * n + perm[u] for (v, u) in pairs] for perm in perms]
    seen = set()
    reps = []
    for mask in range(1, 1 << len(pairs)):
        if mask in seen:
            continue
        succ = [[u for u in range(n) if mask >> (v * n + u) & 1] for v in range(n)]
        images = []
        for rm in remap:
            m = 0
            for i, j in enumerate(rm):
                if mask >> i & 1:
                    m |= 1 << j
            images.append(m)
        seen.update(images)
        if any(not s for s in succ) or len(tarjan_scc(succ)) != 1:
            continue
        autos = [perm for perm, m in zip(perms, images) if m == mask]
        reps.append((succ, autos))
    return reps


def scc_corpus(max_n, weight_set=(-1.0, 0.0, 1.0)):
    """All strongly connected graphs on up to ``max_n`` vertices with weights
    from a set, one per isomorphism class. Self-loops are allowed."""
    out = []
    for n in range(1, max_n + 1):
        for succ, autos in shape_classes(n):
            seen = set()
            for wt in itertools.product(weight_set, repeat=n):
                if wt in seen:
                    continue
                for perm in autos:
                    img = [0.0] * n
                    for v in range(n):
                        img[perm[v]] = wt[v]
                    seen.add(tuple(img))
                out.append(build_graph(succ, wt))
    return out


def shapes(n):
    """Strongly connected shapes (no weights) on exactly ``n`` vertices, up to isomorphism."""
    return [G for G in scc_corpus(n, weight_set=(0.0,)) if G.n == n]
