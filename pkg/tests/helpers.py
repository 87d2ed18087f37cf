"""Deterministic generators shared by property and acceptance tests."""

from __future__ import annotations

import random
import string

from srkit.mesh import MeshDescriptor, MeshKb
from srkit.pubmed import And, BooleanQuery, Not, Or, Term


def random_kb(n_descriptors: int = 500, seed: int = 7, extra_trees: int = 120) -> MeshKb:
    """Random poly-hierarchy KB: unique tree numbers, synthetic names."""
    rng = random.Random(seed)
    roots = [f"{letter}{i:02d}" for letter in "ABCDEFGH" for i in (1, 2)]
    trees: list[str] = list(roots)
    while len(trees) < n_descriptors + extra_trees:
        parent = rng.choice(trees)
        if parent.count(".") >= 5:
            continue
        child = f"{parent}.{rng.randint(0, 999):03d}"
        if child not in trees:
            trees.append(child)
    trees = list(dict.fromkeys(trees))
    rng.shuffle(trees)

    descriptors = []
    primary, spare = trees[:n_descriptors], trees[n_descriptors:]
    for i, tree in enumerate(primary):
        tree_numbers = [tree]
        if spare and rng.random() < 0.15:
            tree_numbers.append(spare.pop())
        entry_terms = tuple(
            f"Synonym {i:04d} {j}" for j in range(rng.randint(0, 3))
        )
        descriptors.append(
            MeshDescriptor(
                ui=f"D{900000 + i:06d}",
                name=f"Concept {i:04d}",
                tree_numbers=tuple(sorted(tree_numbers)),
                scope_note=f"Definition of concept {i:04d}.",
                entry_terms=entry_terms,
            )
        )
    return MeshKb(descriptors)


def random_boolean_tree(rng: random.Random, depth: int = 0, max_depth: int = 6) -> BooleanQuery:
    """Random valid query tree honoring the structural invariants."""
    tags = ("MeSH Terms", "tiab", "All Fields")
    if depth >= max_depth or rng.random() < 0.35:
        text = "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randint(1, 8)))
        return Term(text, rng.choice(tags))
    kind = rng.choice(("and", "or", "not"))
    if kind == "not":
        return Not(
            random_boolean_tree(rng, depth + 1, max_depth),
            random_boolean_tree(rng, depth + 1, max_depth),
        )
    children = tuple(
        random_boolean_tree(rng, depth + 1, max_depth) for _ in range(rng.randint(2, 4))
    )
    return And(children) if kind == "and" else Or(children)
