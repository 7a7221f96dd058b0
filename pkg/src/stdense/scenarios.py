"""The six benchmark regression functions on [0, 1]^d (d >= 2).

Every function takes an ``(N, d)`` array and returns ``(N,)``.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from .errors import ParameterError

TWO_PI = 2.0 * np.pi


class ScenarioId(IntEnum):
    STEP = 1
    SINE = 2
    HIER2 = 3
    HIER3 = 4
    INTERACTION = 5
    QUAD_SINE = 6


def step_centers(d):
    """The four centres q_1..q_4 used by the step function."""
    h = d // 2
    q1 = np.r_[np.full(h, 0.25), np.full(d - h, 0.5)]
    q2 = np.r_[np.full(h, 0.5), np.full(d - h, 0.25)]
    q3 = np.r_[np.full(h, 0.75), np.full(d - h, 0.5)]
    q4 = np.r_[np.full(h, 0.5), np.full(d - h, 0.75)]
    return np.stack([q1, q2, q3, q4])


def step(q):
    # strict nearest-centre test for levels 2, 1, 0; everything else (ties included) is -1
    centers = step_centers(q.shape[1])
    dist = np.linalg.norm(q[:, None, :] - centers[None, :, :], axis=2)
    out = np.full(q.shape[0], -1.0)
    for k, level in enumerate((2.0, 1.0, 0.0)):
        others = np.delete(dist, k, axis=1).min(axis=1)
        out[dist[:, k] < others] = level
    return out


def sine(q):
    return np.sin(q.sum(axis=1))


def hier2(q, sqrt_scope="first"):
    """Two-level composition g2(g1(q)).

    ``sqrt_scope="first"`` reads the first component of g1 as
    ``sqrt(q1) + sum q_i q_{i+1}``; ``"sum"`` puts the whole sum under the root.
    """
    cross = np.sum(q[:, :-1] * q[:, 1:], axis=1)
    if sqrt_scope == "first":
        a = np.sqrt(q[:, 0]) + cross
    elif sqrt_scope == "sum":
        a = np.sqrt(q[:, 0] + cross)
    else:
        raise ParameterError(f"unknown sqrt_scope {sqrt_scope!r}")
    b = np.cos(TWO_PI * q.sum(axis=1))
    return np.sqrt(a + b * b) + a * a * b


def hier3(q):
    # intermediate values leave [0,1]^2; formulas are applied as written, no clamping
    s = q.sum(axis=1)
    a1 = np.sqrt(q[:, 0] ** 2 + q[:, 1:].sum(axis=1))
    b1 = s**3
    a2 = np.abs(a1)
    b2 = b1 * a1
    return a2 + np.sqrt(a2 + b2)


def interaction(q):
    d = q.shape[1]
    if d == 2:
        return np.sin(TWO_PI * q[:, 0] * q[:, 1])
    if d == 3:
        return np.sin(TWO_PI * q[:, 0] * q[:, 1]) + np.cos(TWO_PI * q[:, 2])
    out = np.zeros(q.shape[0])
    n_pairs = d // 2
    for k in range(n_pairs):
        arg = TWO_PI * q[:, 2 * k] * q[:, 2 * k + 1]
        out += np.sin(arg) if k % 2 == 0 else np.cos(arg)
    if d % 2 == 1:
        out += np.sin(TWO_PI * q[:, d - 1])
    return out


def quad_sine(q):
    h = q.shape[1] // 2
    return np.sum(q[:, :h] ** 2, axis=1) * np.sin(q[:, h:].sum(axis=1))


_FUNCS = {
    ScenarioId.STEP: step,
    ScenarioId.SINE: sine,
    ScenarioId.HIER2: hier2,
    ScenarioId.HIER3: hier3,
    ScenarioId.INTERACTION: interaction,
    ScenarioId.QUAD_SINE: quad_sine,
}


def scenario_id(value):
    try:
        return ScenarioId(int(value))
    except (ValueError, TypeError):
        raise ParameterError(f"unknown scenario {value!r}; expected 1..6") from None


def scenario_fn(sid, sqrt_scope="first"):
    """Vectorised target function for scenario ``sid``."""
    sid = scenario_id(sid)
    if sid is ScenarioId.HIER2:
        return lambda q: hier2(q, sqrt_scope=sqrt_scope)
    return _FUNCS[sid]


def evaluate(sid, Q, sqrt_scope="first"):
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if Q.shape[1] < 2:
        raise ParameterError("scenario functions are defined for d >= 2")
    return scenario_fn(sid, sqrt_scope)(Q)


def scenario_f(sid, d, q, sqrt_scope="first"):
    """Scalar evaluation of scenario ``sid`` at the point ``q`` in [0,1]^d."""
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.shape[0] != d:
        raise ParameterError(f"point has {q.shape[0]} coordinates, expected d={d}")
    return float(evaluate(sid, q[None, :], sqrt_scope)[0])
