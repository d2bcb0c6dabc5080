"""
Train/test splits and genuine/impostor pair generation.
"""
import itertools
import logging

import numpy as np

from numkit.exceptions import ContractViolation

from .datasets import LabeledDataset, PairSet
from .exceptions import PairGenerationError

logger = logging.getLogger(__name__)


def train_test_split(dataset: LabeledDataset, rng, test_fraction: float, disjoint_classes: bool = False):
    """
    Sample-level split, or with disjoint_classes a split by class so the two
    label sets never intersect. Both halves keep the source class_count.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ContractViolation("test_fraction must lie in [0, 1)")
    if disjoint_classes:
        present = np.unique(dataset.labels)
        held_out = int(round(test_fraction * present.size))
        if test_fraction > 0:
            held_out = min(max(held_out, 1), present.size - 1)
        test_classes = rng.permutation(present)[:held_out]
        in_test = np.isin(dataset.labels, test_classes)
        test_idx = np.flatnonzero(in_test)
        train_idx = np.flatnonzero(~in_test)
    else:
        order = rng.permutation(len(dataset))
        n_test = int(round(test_fraction * len(dataset)))
        test_idx = np.sort(order[:n_test])
        train_idx = np.sort(order[n_test:])
    logger.debug("split train=%d test=%d disjoint=%s", train_idx.size, test_idx.size, disjoint_classes)
    return dataset.subset(train_idx), dataset.subset(test_idx)


def _class_members(labels):
    return [np.flatnonzero(labels == k) for k in np.unique(labels)]


def _genuine_pool_size(members) -> int:
    return sum(m.size * (m.size - 1) // 2 for m in members)


def _enumerate(members, genuine):
    if genuine:
        for m in members:
            yield from itertools.combinations(m.tolist(), 2)
        return
    for a, b in itertools.combinations(range(len(members)), 2):
        for i in members[a].tolist():
            for j in members[b].tolist():
                yield (min(i, j), max(i, j))


def _draw(rng, labels, members, genuine):
    if genuine:
        weights = np.array([m.size * (m.size - 1) / 2 for m in members], dtype=np.float64)
        m = members[rng.choice(len(members), p=weights / weights.sum())]
        i, j = rng.choice(m, size=2, replace=False)
    else:
        while True:
            i, j = rng.choice(labels.size, size=2, replace=False)
            if labels[i] != labels[j]:
                break
    return (int(min(i, j)), int(max(i, j)))


def _sample_polarity(rng, labels, members, genuine, count, pool):
    if pool == 0:
        kind = "genuine" if genuine else "impostor"
        raise PairGenerationError(f"no {kind} pairs can be formed from this dataset")
    if pool < count:
        logger.warning("pair pool smaller than request pool=%d requested=%d; sampling with replacement", pool, count)
        return [_draw(rng, labels, members, genuine) for _ in range(count)]
    if 2 * count > pool:
        everything = sorted(_enumerate(members, genuine))
        chosen = rng.choice(len(everything), size=count, replace=False)
        return [everything[c] for c in chosen]
    seen, out = set(), []
    while len(out) < count:
        pair = _draw(rng, labels, members, genuine)
        if pair not in seen:
            seen.add(pair)
            out.append(pair)
    return out


def make_pairs(dataset: LabeledDataset, rng, pairs_per_polarity: int) -> PairSet:
    """Equal numbers of genuine and impostor pairs, without replacement while the pools allow."""
    if pairs_per_polarity < 1:
        raise ContractViolation("pairs_per_polarity must be >= 1")
    labels = dataset.labels
    members = _class_members(labels)
    n = labels.size
    genuine_pool = _genuine_pool_size(members)
    impostor_pool = n * (n - 1) // 2 - genuine_pool
    genuine = _sample_polarity(rng, labels, members, True, pairs_per_polarity, genuine_pool)
    impostor = _sample_polarity(rng, labels, members, False, pairs_per_polarity, impostor_pool)
    rows = genuine + impostor
    pairs = PairSet(
        index_a=[a for a, _ in rows],
        index_b=[b for _, b in rows],
        same_class=[True] * len(genuine) + [False] * len(impostor),
    )
    logger.debug("pairs generated genuine=%d impostor=%d", len(genuine), len(impostor))
    return pairs
