"""Markov chain over permutation matrices driven by checkerboard swaps.

Each step draws a cell ``(r1, c1)`` uniformly.  If the cell holds a 1, a zero
column ``c2`` of row ``r1`` is drawn and ``r2`` is the row holding the 1 in
``c2``; otherwise ``r2`` is the row holding the 1 in ``c1`` and ``c2`` is a
zero column of ``r2``.  When the 2x2 submatrix on ``{r1, r2} x {c1, c2}`` is a
checkerboard the swap is proposed and accepted with the Barker probability
``P(new) / (P(new) + P(old))``.  For permutation matrices this amounts to
transposing ``sigma[r1]`` and ``sigma[r2]``.

Random draws are made up front from a :class:`numpy.random.Generator` and fed
to a compiled kernel, so runs are reproducible from the generator state alone.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np

from .core import as_permutation, displaced_count

_CHUNK = 1 << 18
MAX_ENUMERATE_N = 8


@dataclass(frozen=True)
class ChainState:
    perm: np.ndarray
    log_weight: float
    displaced: int

    @classmethod
    def start(cls, perm, W) -> "ChainState":
        W = np.asarray(W, dtype=float)
        perm = as_permutation(perm, W.shape[0])
        return cls(perm, permutation_log_weight(W, perm), displaced_count(perm))


@dataclass(frozen=True)
class SwapProposal:
    r1: int
    c1: int
    r2: int
    c2: int
    is_checkerboard: bool


@dataclass
class ChainResult:
    state: ChainState
    steps: int
    n_checkerboard: int
    n_accepted: int
    trace: np.ndarray | None = None

    @property
    def accept_rate(self) -> float:
        """Accepted swaps over checkerboard proposals (1.0 if none were made)."""
        return self.n_accepted / self.n_checkerboard if self.n_checkerboard else 1.0

    @property
    def visited_states(self) -> int | None:
        return None if self.trace is None else int(np.unique(self.trace).size)


def permutation_log_weight(W, perm) -> float:
    W = np.asarray(W)
    return float(W[np.arange(W.shape[0]), np.asarray(perm)].sum())


def barker_accept_prob(delta_logw: float) -> float:
    """``1 / (1 + exp(-delta))``, evaluated without overflow."""
    if delta_logw >= 0:
        return 1.0 / (1.0 + math.exp(-delta_logw))
    e = math.exp(delta_logw)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _barker(delta):
    if delta >= 0.0:
        return 1.0 / (1.0 + math.exp(-delta))
    e = math.exp(delta)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _propose(sigma, inv, r1, c1, pick):
    # pick indexes the n-1 zero entries of a row whose single 1 sits at column c1
    if sigma[r1] == c1:
        c2 = pick if pick < c1 else pick + 1
        r2 = inv[c2]
        return r2, c2, True
    r2 = inv[c1]
    c2 = pick if pick < c1 else pick + 1
    return r2, c2, sigma[r1] == c2


@numba.njit(cache=True)
def _run_kernel(sigma, inv, W, k_bound, cells, picks, accepts, log_weight, displaced, trace, trace_offset):
    n = sigma.shape[0]
    n_checker = 0
    n_accept = 0
    for t in range(cells.shape[0]):
        r1 = cells[t] // n
        c1 = cells[t] % n
        r2, c2, checker = _propose(sigma, inv, r1, c1, picks[t])
        if checker:
            n_checker += 1
            a = sigma[r1]
            b = sigma[r2]
            new_disp = displaced - (a != r1) - (b != r2) + (b != r1) + (a != r2)
            if k_bound < 0 or new_disp <= k_bound:
                delta = W[r1, b] + W[r2, a] - W[r1, a] - W[r2, b]
                if accepts[t] < _barker(delta):
                    sigma[r1] = b
                    sigma[r2] = a
                    inv[a] = r2
                    inv[b] = r1
                    log_weight += delta
                    displaced = new_disp
                    n_accept += 1
        if trace.shape[0] > 0:
            code = 0
            for i in range(n - 1, -1, -1):
                code = code * n + sigma[i]
            trace[trace_offset + t] = code
    return log_weight, displaced, n_checker, n_accept


def _k_arg(k_bound) -> int:
    return -1 if k_bound is None else int(k_bound)


def propose_from_draws(state: ChainState, r1: int, c1: int, pick: int) -> SwapProposal:
    """Proposal for given draws: cell ``(r1, c1)`` and ``pick`` in ``[0, n-2]``."""
    sigma = state.perm
    inv = np.argsort(sigma)
    r2, c2, checker = _propose(sigma, inv, int(r1), int(c1), int(pick))
    checker = bool(checker) and r1 != r2 and c1 != c2
    return SwapProposal(int(r1), int(c1), int(r2), int(c2), checker)


def propose(state: ChainState, rng: np.random.Generator) -> SwapProposal:
    n = state.perm.size
    if n < 2:
        raise ValueError("need n >= 2 to propose a swap")
    cell = int(rng.integers(0, n * n))
    pick = int(rng.integers(0, n - 1))
    return propose_from_draws(state, cell // n, cell % n, pick)


def run_chain(init, W, steps: int, k_bound: int | None, rng: np.random.Generator,
              record: bool = False) -> ChainResult:
    """Apply ``steps`` proposal/accept-reject cycles starting from ``init``.

    ``init`` may be a permutation array or a :class:`ChainState`.  With
    ``record=True`` the state after every step is stored as an integer code
    ``sum_i sigma[i] * n**i`` (requires ``n**n`` to fit in int64).
    """
    W = np.ascontiguousarray(W, dtype=float)
    state = init if isinstance(init, ChainState) else ChainState.start(init, W)
    n = state.perm.size
    if W.shape != (n, n):
        raise ValueError(f"weight matrix shape {W.shape} does not match n={n}")
    if k_bound is not None and state.displaced > k_bound:
        raise ValueError(f"initial permutation displaces {state.displaced} > k_bound={k_bound}")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if record and n > 15:
        raise ValueError("recording is limited to n <= 15")
    trace = np.empty(steps if record else 0, dtype=np.int64)
    if steps == 0 or n < 2:
        if record:
            trace[:] = encode(state.perm)
        return ChainResult(state, steps, 0, 0, trace if record else None)

    sigma = state.perm.copy()
    inv = np.empty(n, dtype=np.int64)
    inv[sigma] = np.arange(n)
    log_weight = state.log_weight
    displaced = state.displaced
    k_arg = _k_arg(k_bound)
    n_checker = n_accept = 0
    done = 0
    while done < steps:
        m = min(_CHUNK, steps - done)
        cells = rng.integers(0, n * n, size=m)
        picks = rng.integers(0, n - 1, size=m)
        accepts = rng.random(m)
        log_weight, displaced, nc, na = _run_kernel(
            sigma, inv, W, k_arg, cells, picks, accepts, log_weight, displaced, trace, done
        )
        n_checker += nc
        n_accept += na
        done += m
    final = ChainState(sigma, float(log_weight), int(displaced))
    return ChainResult(final, steps, n_checker, n_accept, trace if record else None)


def step(state: ChainState, W, k_bound: int | None, rng: np.random.Generator) -> ChainState:
    """One proposal/accept-reject cycle; returns a new state (the input is not modified)."""
    return run_chain(state, W, 1, k_bound, rng).state


def encode(perm) -> int:
    perm = np.asarray(perm, dtype=np.int64)
    n = perm.size
    code = 0
    for i in range(n - 1, -1, -1):
        code = code * n + int(perm[i])
    return code


def decode(code: int, n: int) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        code, out[i] = divmod(code, n)
    return out


def enumerate_exact(W, k_bound: int | None = None):
    """All permutations in the support with their exact probabilities ``prop. exp(sum_i W[i, sigma[i]])``."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if n > MAX_ENUMERATE_N:
        raise ValueError(f"exact enumeration limited to n <= {MAX_ENUMERATE_N}, got {n}")
    perms = []
    logw = []
    rows = np.arange(n)
    for p in itertools.permutations(range(n)):
        arr = np.array(p, dtype=np.int64)
        if k_bound is not None and np.count_nonzero(arr != rows) > k_bound:
            continue
        perms.append(arr)
        logw.append(W[rows, arr].sum())
    logw = np.array(logw)
    probs = np.exp(logw - logw.max())
    probs /= probs.sum()
    return list(zip(perms, probs.tolist()))


def occupancy(trace: np.ndarray, n: int) -> dict[int, float]:
    codes, counts = np.unique(trace, return_counts=True)
    return {int(c): k / trace.size for c, k in zip(codes, counts)}


def total_variation(trace: np.ndarray, exact) -> float:
    """TV distance between the empirical law of a recorded trace and ``enumerate_exact`` output."""
    n = exact[0][0].size
    emp = occupancy(trace, n)
    ref = {encode(p): prob for p, prob in exact}
    keys = set(emp) | set(ref)
    return 0.5 * sum(abs(emp.get(k, 0.0) - ref.get(k, 0.0)) for k in keys)
