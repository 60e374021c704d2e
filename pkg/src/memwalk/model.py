"""Multidimensional random walk with full memory and a directional bias.

The walker lives on the integer lattice Z^d and chooses among K moves: the
2d unit steps +/- e_i, plus an optional "stay put" move when K = 2d + 1.
Given the first step, every later step flips a coin with success
probability ``theta``:

* memory branch (probability ``theta``): a past step is picked uniformly
  at random and repeated with probability ``p``; otherwise one of the
  other K - 1 moves is taken uniformly;
* bias branch (probability ``1 - theta``): the walker moves along +e_1
  with probability ``p``; otherwise one of the other K - 1 moves is taken
  uniformly.

The law of the next step depends on the history only through the vector
of per-direction step counts, so the state kept here is O(K), not O(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the walk.

    d      spatial dimension (>= 1)
    lazy   if True the move set includes the zero move (K = 2d + 1)
    p      repeat/bias strength, in [0, 1]
    theta  probability of the memory branch, in [0, 1]
    """

    d: int
    lazy: bool
    p: float
    theta: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta!r}")

    @property
    def K(self) -> int:
        """Number of available moves."""
        return 2 * self.d + (1 if self.lazy else 0)

    @property
    def memory_gain(self) -> float:
        """Alignment coefficient (K*p - 1)/(K - 1), in [-1/(K-1), 1].

        Appears in the one-step drift: E(X_{n+1} | history) equals
        (memory_gain * theta / n) * S_n + (1 - theta) * memory_gain * e_1.
        """
        K = self.K
        return (K * self.p - 1.0) / (K - 1.0)

    @property
    def second_eigenvalue(self) -> float:
        """theta * memory_gain, the non-principal eigenvalue of the mean
        replacement matrix; also the superdiffusive scaling rate."""
        return self.theta * self.memory_gain


def validate_params(d: int, lazy: bool, p: float, theta: float) -> ModelParams:
    """Validate a raw parameter tuple and build ModelParams.

    Raises ValueError for d < 1 or p, theta outside [0, 1].
    """
    return ModelParams(d=d, lazy=bool(lazy), p=float(p), theta=float(theta))


def direction_to_vector(params: ModelParams, idx: int) -> np.ndarray:
    """Unit displacement of move ``idx``.

    Moves are ordered (+e_1, -e_1, +e_2, -e_2, ..., +e_d, -e_d) with the
    zero move last when lazy. Exactly one coordinate of magnitude one,
    except the lazy slot which maps to the zero vector.
    """
    K = params.K
    if not 0 <= idx < K:
        raise ValueError(f"direction index {idx} out of range [0, {K})")
    vec = np.zeros(params.d, dtype=np.int64)
    if params.lazy and idx == K - 1:
        return vec
    vec[idx // 2] = 1 if idx % 2 == 0 else -1
    return vec


def direction_matrix(params: ModelParams) -> np.ndarray:
    """Stack of all K displacement vectors, shape (K, d)."""
    return np.stack([direction_to_vector(params, x) for x in range(params.K)])


@dataclass
class WalkState:
    """State after n steps: per-direction counts and the position.

    counts sums to n; position is the signed pairing of counts
    (counts[0] - counts[1], counts[2] - counts[3], ...).
    """

    n: int
    counts: np.ndarray
    position: np.ndarray


@dataclass(frozen=True)
class InitialSpec:
    """Distribution of the first step, which the dynamics never pins down.

    kind is one of "uniform" (uniform over the 2d moving directions,
    the default), "fixed" (a single direction index), or "custom"
    (an explicit probability vector of length K).
    """

    kind: str = "uniform"
    index: int | None = None
    probs: tuple[float, ...] | None = None

    @staticmethod
    def uniform() -> "InitialSpec":
        return InitialSpec(kind="uniform")

    @staticmethod
    def fixed(index: int) -> "InitialSpec":
        return InitialSpec(kind="fixed", index=int(index))

    @staticmethod
    def custom(probs) -> "InitialSpec":
        return InitialSpec(kind="custom", probs=tuple(float(q) for q in probs))

    def distribution(self, params: ModelParams) -> np.ndarray:
        """Probability vector of X_1 over the K move indices."""
        K = params.K
        if self.kind == "uniform":
            pi = np.zeros(K)
            pi[: 2 * params.d] = 1.0 / (2 * params.d)
            return pi
        if self.kind == "fixed":
            if self.index is None or not 0 <= self.index < K:
                raise ValueError(f"fixed direction index {self.index!r} out of range [0, {K})")
            pi = np.zeros(K)
            pi[self.index] = 1.0
            return pi
        if self.kind == "custom":
            if self.probs is None or len(self.probs) != K:
                raise ValueError(f"custom distribution must have length {K}")
            pi = np.asarray(self.probs, dtype=float)
            if np.any(pi < 0.0):
                raise ValueError("custom distribution has negative entries")
            if abs(pi.sum() - 1.0) > 1e-12:
                raise ValueError(f"custom distribution sums to {pi.sum()!r}, not 1")
            return pi
        raise ValueError(f"unknown initial kind {self.kind!r}")


def base_step_rates(params: ModelParams) -> np.ndarray:
    """Constant part of the one-step law.

    The full law given n past steps with counts N is
    base + (second_eigenvalue / n) * N.
    """
    K, p, theta = params.K, params.p, params.theta
    base = np.full(K, (1.0 - p) / (K - 1.0))
    base[0] = p + theta * (1.0 - K * p) / (K - 1.0)
    return base


def conditional_law(params: ModelParams, state: WalkState) -> np.ndarray:
    """Probability vector of the next move given the current counts.

    Entry 0 (+e_1) is p + theta*((1-Kp)/(K-1))*(1 - N_1/n); every other
    entry is (1-p)/(K-1) + theta*((Kp-1)/(K-1))*N_x/n. Entries are
    nonnegative and sum to one.
    """
    if state.n < 1:
        raise ValueError("conditional law is undefined before the first step")
    law = base_step_rates(params) + (params.second_eigenvalue / state.n) * state.counts
    return law


def initial_step(params: ModelParams, init: InitialSpec, rng: np.random.Generator) -> WalkState:
    """Sample X_1 from ``init`` and return the one-step state."""
    pi = init.distribution(params)
    idx = int(np.searchsorted(np.cumsum(pi), rng.random(), side="right"))
    idx = min(idx, params.K - 1)
    counts = np.zeros(params.K, dtype=np.int64)
    counts[idx] = 1
    return WalkState(n=1, counts=counts, position=direction_to_vector(params, idx))


def _uniform_other(idx: int, K: int, rng: np.random.Generator) -> int:
    """Uniform draw over the K-1 moves different from ``idx``."""
    r = int(rng.integers(K - 1))
    return r + 1 if r >= idx else r


def step(params: ModelParams, state: WalkState, rng: np.random.Generator) -> WalkState:
    """Advance the walk one step by the literal two-branch sampling.

    Memory branch: a past step index t in {1..n} is drawn uniformly
    (realized by drawing a direction with probability counts/n), kept with
    probability p, otherwise replaced uniformly by another move. Bias
    branch: +e_1 with probability p, otherwise uniformly another move.
    """
    if state.n < 1:
        raise ValueError("cannot step before the first move is placed")
    K = params.K
    if rng.random() < params.theta:
        t = int(rng.integers(state.n))
        remembered = int(np.searchsorted(np.cumsum(state.counts), t, side="right"))
        idx = remembered if rng.random() < params.p else _uniform_other(remembered, K, rng)
    else:
        idx = 0 if rng.random() < params.p else 1 + int(rng.integers(K - 1))
    counts = state.counts.copy()
    counts[idx] += 1
    return WalkState(
        n=state.n + 1,
        counts=counts,
        position=state.position + direction_to_vector(params, idx),
    )


def simulate(
    params: ModelParams,
    init: InitialSpec,
    n_steps: int,
    checkpoints,
    rng: np.random.Generator,
) -> list[tuple[int, np.ndarray]]:
    """Run one walk for ``n_steps`` steps, recording positions.

    ``checkpoints`` is a sorted iterable of step indices in [1, n_steps];
    an empty list records the final state only. The same rng seed gives
    bit-identical records.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    marks = sorted(set(int(c) for c in checkpoints))
    if not marks:
        marks = [n_steps]
    if marks[0] < 1 or marks[-1] > n_steps:
        raise ValueError(f"checkpoints must lie in [1, {n_steps}]")
    mark_set = set(marks)
    records = []
    state = initial_step(params, init, rng)
    if state.n in mark_set:
        records.append((state.n, state.position.copy()))
    for _ in range(n_steps - 1):
        state = step(params, state, rng)
        if state.n in mark_set:
            records.append((state.n, state.position.copy()))
    return records
