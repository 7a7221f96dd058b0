"""Panel norms, error metrics and the time-index block construction.

The empirical norm weights every time index equally, whatever its number
of measurements::

    ||v||_nm^2 = (1/n) sum_i (1/m_i) sum_j v_ij^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTargetError, InputShapeError, ParameterError


def observation_weights(sizes):
    """Flat weights ``1 / (n m_i)``, one per observation; they sum to 1."""
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or len(sizes) == 0 or np.any(sizes < 1):
        raise ParameterError("group sizes must be a nonempty list of positive integers")
    return np.repeat(1.0 / (len(sizes) * sizes), sizes)


def _flatten(values, sizes):
    if isinstance(values, (list, tuple)) and values and np.ndim(values[0]) > 0:
        values = np.concatenate([np.asarray(v, dtype=np.float64).ravel() for v in values])
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.shape[0] != int(np.sum(sizes)):
        raise InputShapeError(f"{values.shape[0]} values for group sizes summing to {int(np.sum(sizes))}")
    return values


def empirical_norm_sq(values, sizes):
    """Weighted squared panel norm.  ``values`` is flat or ragged."""
    v = _flatten(values, sizes)
    return float(np.dot(observation_weights(sizes), v * v))


def relative_error(fhat, ftrue, sizes):
    """``||fhat - f*||_nm^2 / ||f*||_nm^2``."""
    fh = _flatten(fhat, sizes)
    ft = _flatten(ftrue, sizes)
    denom = empirical_norm_sq(ft, sizes)
    if denom == 0.0:
        raise DegenerateTargetError("reference function is identically zero on the panel")
    return empirical_norm_sq(fh - ft, sizes) / denom


def population_l2_error(predict, f_star, d, mc_samples, seed=0):
    """Monte Carlo estimate of ``E (predict(X) - f*(X))^2`` with ``X ~ U[0,1]^d``.

    ``predict`` and ``f_star`` map an ``(N, d)`` array to ``(N,)``.  Returns
    ``(estimate, standard_error)``.
    """
    if mc_samples < 1:
        raise ParameterError("mc_samples must be >= 1")
    X = np.random.default_rng(seed).random((int(mc_samples), d))
    sq = (np.asarray(predict(X), float) - np.asarray(f_star(X), float)) ** 2
    se = float(sq.std(ddof=1) / np.sqrt(len(sq))) if len(sq) > 1 else 0.0
    return float(sq.mean()), se


def harmonic_mean(sizes):
    sizes = np.asarray(sizes, dtype=np.float64)
    if len(sizes) == 0 or np.any(sizes <= 0):
        raise ParameterError("sizes must be positive")
    return float(len(sizes) / np.sum(1.0 / sizes))


@dataclass(frozen=True)
class BlockPartition:
    """Blocks of consecutive time indices (1-based).

    ``intervals[k-1]`` is ``I_k = ((k-1)S, kS]`` for ``k <= K`` and
    ``intervals[K]`` is the remainder ``(KS, n]`` (possibly empty).
    ``even[s]`` collects indices ``i`` with ``i % S == s`` that sit in an
    even-numbered interval; ``odd[s]`` the same for odd intervals.
    """

    n: int
    S: int
    K: int
    intervals: tuple
    even: tuple
    odd: tuple

    def table(self):
        """Plain-text dump, one line per index set."""
        lines = [f"n={self.n} S={self.S} K={self.K}"]
        for k, iv in enumerate(self.intervals, start=1):
            lines.append(f"I_{k}: {list(iv)}")
        for s in range(self.S):
            lines.append(f"J_e,{s}: {list(self.even[s])}")
            lines.append(f"J_o,{s}: {list(self.odd[s])}")
        return "\n".join(lines)


def build_blocks(n, S):
    if not 1 <= S <= n:
        raise ParameterError(f"need 1 <= S <= n, got S={S}, n={n}")
    K = n // S
    intervals = [tuple(range((k - 1) * S + 1, k * S + 1)) for k in range(1, K + 1)]
    intervals.append(tuple(range(K * S + 1, n + 1)))
    even = [[] for _ in range(S)]
    odd = [[] for _ in range(S)]
    for k, iv in enumerate(intervals, start=1):
        target = even if k % 2 == 0 else odd
        for i in iv:
            target[i % S].append(i)
    return BlockPartition(
        n, S, K, tuple(intervals), tuple(tuple(j) for j in even), tuple(tuple(j) for j in odd)
    )


def default_block_length(n, c_S=1.0):
    """``max(1, round(c_S * ln n))`` with halves rounded up."""
    if n < 2:
        raise ParameterError("n must be >= 2")
    return max(1, round_half_up(c_S * math.log(n)))


def round_half_up(v):
    return int(math.floor(v + 0.5))
