"""Brute-force exact law of the walk for tiny instances.

Enumerates all K^n step sequences and chains the one-step conditional
law through each prefix, giving exact ground truth for moments, for the
sampler, and for the urn/walk equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import urn
from .model import InitialSpec, ModelParams, WalkState, conditional_law

#: Hard ceiling on the number of enumerated sequences.
MAX_PATHS = 10_000_000


@dataclass
class PathDistribution:
    """Exact law over all K^n step sequences, zero-probability ones kept.

    Sequence ids enumerate lexicographically: the first step is the most
    significant base-K digit. ``probs`` sums to one.
    """

    n: int
    K: int
    probs: np.ndarray

    def sequence(self, path_id: int) -> tuple[int, ...]:
        """Decode a path id into its step sequence."""
        digits = []
        for _ in range(self.n):
            path_id, rem = divmod(path_id, self.K)
            digits.append(rem)
        return tuple(reversed(digits))

    def sequences(self):
        for pid in range(len(self.probs)):
            yield self.sequence(pid), float(self.probs[pid])


def _check_size(params: ModelParams, n: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if params.K**n > MAX_PATHS:
        raise ValueError(f"instance too large: K^n = {params.K**n} exceeds {MAX_PATHS}")


def _visit_paths(params: ModelParams, init: InitialSpec, n: int, visit) -> None:
    """Depth-first chain-rule expansion.

    Calls ``visit(path_id, counts, prob)`` at every length-n leaf,
    including zero-probability ones, in lexicographic order.
    """
    K = params.K
    pi = init.distribution(params)
    counts = np.zeros(K, dtype=np.int64)

    def expand(depth: int, path_id: int, prob: float) -> None:
        if depth == n:
            visit(path_id, counts, prob)
            return
        if depth == 0:
            law = pi
        else:
            law = conditional_law(params, WalkState(n=depth, counts=counts, position=None))
        for x in range(K):
            counts[x] += 1
            expand(depth + 1, path_id * K + x, prob * float(law[x]))
            counts[x] -= 1

    expand(0, 0, 1.0)


def enumerate_paths(params: ModelParams, init: InitialSpec, n: int) -> PathDistribution:
    """Exact probability of every length-n step sequence."""
    _check_size(params, n)
    probs = np.zeros(params.K**n)

    def visit(path_id, counts, prob):
        probs[path_id] = prob

    _visit_paths(params, init, n, visit)
    return PathDistribution(n=n, K=params.K, probs=probs)


@dataclass
class ExactMarginals:
    """Exact position moments and per-axis step counts at time n."""

    mean_position: np.ndarray
    position_cov: np.ndarray
    mean_axis_counts: np.ndarray


def exact_marginals(params: ModelParams, init: InitialSpec, n: int) -> ExactMarginals:
    """Exact E(S_n), Cov(S_n) and expected moves per axis by enumeration."""
    _check_size(params, n)
    d = params.d
    mean = np.zeros(d)
    second = np.zeros((d, d))
    axis_counts = np.zeros(d)

    def visit(path_id, counts, prob):
        nonlocal mean, second, axis_counts
        pos = urn.counts_to_position(counts, d, params.lazy).astype(float)
        mean += prob * pos
        second += prob * np.outer(pos, pos)
        axis_counts += prob * (counts[0 : 2 * d : 2] + counts[1 : 2 * d : 2])

    _visit_paths(params, init, n, visit)
    return ExactMarginals(
        mean_position=mean,
        position_cov=second - np.outer(mean, mean),
        mean_axis_counts=axis_counts,
    )


def walk_count_law(params: ModelParams, init: InitialSpec, n: int) -> dict[tuple[int, ...], float]:
    """Exact law of the count vector after n steps, aggregated over paths."""
    _check_size(params, n)
    law: dict[tuple[int, ...], float] = {}

    def visit(path_id, counts, prob):
        key = tuple(int(c) for c in counts)
        law[key] = law.get(key, 0.0) + prob

    _visit_paths(params, init, n, visit)
    return law


def urn_count_law(params: ModelParams, init: InitialSpec, n: int) -> dict[tuple[int, ...], float]:
    """Exact law of the urn composition holding n balls.

    The urn starts with a single ball colored like the walk's first step
    and performs n - 1 draw/replace rounds, each branching over the drawn
    color and the added color.
    """
    _check_size(params, n)
    K = params.K
    repl = [urn.replacement_distribution(params, j) for j in range(K)]
    pi = init.distribution(params)
    law: dict[tuple[int, ...], float] = {}

    def expand(balls: np.ndarray, total: int, prob: float) -> None:
        if total == n:
            key = tuple(int(b) for b in balls)
            law[key] = law.get(key, 0.0) + prob
            return
        for drawn in range(K):
            if balls[drawn] == 0:
                continue
            p_draw = balls[drawn] / total
            for added in range(K):
                p_add = repl[drawn][added]
                if p_add == 0.0:
                    continue
                balls[added] += 1
                expand(balls, total + 1, prob * p_draw * p_add)
                balls[added] -= 1

    start = np.zeros(K, dtype=np.int64)
    for first in range(K):
        if pi[first] == 0.0:
            continue
        start[first] = 1
        expand(start, 1, float(pi[first]))
        start[first] = 0
    return law


def total_variation(law_a: dict, law_b: dict) -> float:
    """Total variation distance between two finitely supported laws."""
    keys = set(law_a) | set(law_b)
    return 0.5 * sum(abs(law_a.get(k, 0.0) - law_b.get(k, 0.0)) for k in keys)
