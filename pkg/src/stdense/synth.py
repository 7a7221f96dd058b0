"""Synthetic temporal-spatial panels.

Observations follow ``y_ij = f*(x_ij) + gamma_i(x_ij) + eps_ij`` where

* design points are uniform on [0,1]^d and, from one time index to the next,
  each position ``j`` keeps its previous location with probability ``phi``;
* ``gamma_i`` is a random function on [0,1]^d driven by an AR(1) recursion
  (coefficient 0.5) over 25 product-sine basis functions;
* ``eps_i`` is the leading ``m_i`` entries of a vector AR(1) (coefficient 0.3)
  in R^M, ``M = max m_i``.

Innovations of both noise processes are standard normal times a scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .panel import PanelDataset
from .scenarios import evaluate, scenario_id

BASIS_SIZE = 25
SPATIAL_AR = 0.5
MEASUREMENT_AR = 0.3
QUARTER_PATTERN = (16, 24, 20, 10)


def group_sizes(n, m_mult=1):
    """Per-time measurement counts: the four quarters of ``1..n`` get
    16, 24, 20 and 10 times ``m_mult``."""
    if n < 4 or n % 4:
        raise ParameterError(f"n must be a positive multiple of 4, got {n}")
    if m_mult < 1:
        raise ParameterError(f"m_mult must be >= 1, got {m_mult}")
    q = n // 4
    return np.repeat(np.array(QUARTER_PATTERN) * m_mult, q)


def sample_designs(sizes, d, phi, rng, sampler=None):
    """Sticky uniform design points, flat ``(sum m_i, d)`` array.

    Row ``i`` position ``j`` repeats row ``i-1`` position ``j`` with
    probability ``phi``; positions with no predecessor (``j >= m_{i-1}``) are
    always fresh.  ``sampler(rng, k)`` draws ``k`` fresh points and defaults
    to Uniform([0,1]^d).
    """
    if not 0.0 <= phi <= 1.0:
        raise ParameterError(f"phi must lie in [0, 1], got {phi}")
    sizes = np.asarray(sizes, dtype=np.int64)
    if np.any(sizes < 1):
        raise ParameterError("group sizes must be positive")
    if sampler is None:
        def sampler(g, k):
            return g.random((k, d))

    rows = []
    prev = None
    for m in sizes:
        fresh = sampler(rng, int(m))
        if prev is not None:
            shared = min(len(prev), int(m))
            keep = rng.random(shared) < phi
            fresh[:shared][keep] = prev[:shared][keep]
        rows.append(fresh)
        prev = fresh
    return np.vstack(rows)


def eval_basis(t, x):
    """``h_t(x) = prod_j sin(t pi x_j) / (sqrt(2) pi)`` for ``t`` in 1..25."""
    if not 1 <= int(t) <= BASIS_SIZE or int(t) != t:
        raise ParameterError(f"basis index must be an integer in 1..{BASIS_SIZE}, got {t}")
    x = np.asarray(x, dtype=np.float64).ravel()
    return float(np.prod(np.sin(t * np.pi * x) / (np.sqrt(2.0) * np.pi)))


def basis_matrix(X):
    """All 25 basis functions at the rows of ``X``: shape ``(N, 25)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    t = np.arange(1, BASIS_SIZE + 1)
    s = np.sin(np.pi * t[None, :, None] * X[:, None, :]) / (np.sqrt(2.0) * np.pi)
    return s.prod(axis=2)


@dataclass
class SpatialNoiseState:
    """Coefficients ``c_t`` of ``gamma_i = sum_t c_t h_t`` at time ``i``."""

    coef: np.ndarray = field(default_factory=lambda: np.zeros(BASIS_SIZE))
    i: int = 0
    ar: float = SPATIAL_AR
    scale: float = 1.0

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        if self.coef.shape != (BASIS_SIZE,):
            raise ParameterError(f"coefficient vector must have length {BASIS_SIZE}")

    def __call__(self, X):
        return basis_matrix(X) @ self.coef


def spatial_noise_step(state, rng, innovations=None):
    """Advance ``gamma`` one time step; returns a new state.

    ``c_t <- ar * c_t + scale * b_t / t`` with ``b_t`` standard normal, or the
    supplied ``innovations`` when given.
    """
    b = rng.standard_normal(BASIS_SIZE) if innovations is None else np.asarray(innovations, float)
    t = np.arange(1, BASIS_SIZE + 1)
    coef = state.ar * state.coef + state.scale * b / t
    return SpatialNoiseState(coef, state.i + 1, state.ar, state.scale)


def spatial_noise_path(n, rng, scale=1.0, burn_in=100):
    """Coefficient vectors for time indices 1..n, shape ``(n, 25)``."""
    state = SpatialNoiseState(scale=scale)
    for _ in range(burn_in):
        state = spatial_noise_step(state, rng)
    out = np.empty((n, BASIS_SIZE))
    for i in range(n):
        state = spatial_noise_step(state, rng)
        out[i] = state.coef
    return out


def measurement_errors(sizes, rho=MEASUREMENT_AR, sigma_xi=1.0, rng=None, max_size=None, burn_in=0):
    """Vector AR(1) errors truncated to each group size; flat array.

    ``e_i = rho * e_{i-1} + xi_i`` in R^M with ``e_0 = 0`` and ``xi_i`` i.i.d.
    ``N(0, sigma_xi^2 I)``; row ``i`` keeps the first ``m_i`` entries.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    M = int(sizes.max()) if max_size is None else int(max_size)
    if M < sizes.max():
        raise ParameterError(f"max_size {M} is smaller than the largest group {sizes.max()}")
    if rng is None:
        rng = np.random.default_rng()
    e = np.zeros(M)
    for _ in range(burn_in):
        e = rho * e + sigma_xi * rng.standard_normal(M)
    out = []
    for m in sizes:
        e = rho * e + sigma_xi * rng.standard_normal(M)
        out.append(e[:m].copy())
    return np.concatenate(out)


def embed_manifold(u, d):
    """Chart from latent ``[0,1]^{d*}`` into ``[0,1]^d``.

    ``u -> ((1 + cos(pi u_1))/2, (1 + sin(pi u_1))/2, u_2, ..., u_{d*}, 0, ..., 0)``.
    The first coordinate traces a half circle of radius 1/2 around
    (1/2, 1/2).  The map is bi-Lipschitz with constants 1 and pi/2.
    """
    u = np.atleast_2d(np.asarray(u, dtype=np.float64))
    k = u.shape[1]
    if not 1 <= k < d:
        raise ParameterError(f"need 1 <= d_star < d, got d_star={k}, d={d}")
    out = np.zeros((u.shape[0], d))
    ang = np.pi * u[:, 0]
    out[:, 0] = 0.5 * (1.0 + np.cos(ang))
    out[:, 1] = 0.5 * (1.0 + np.sin(ang))
    out[:, 2 : k + 1] = u[:, 1:]
    return np.clip(out, 0.0, 1.0)


def manifold_designs(sizes, d, d_star, rng, phi=0.1):
    """Sticky designs on a ``d_star``-dimensional manifold inside [0,1]^d.

    Stickiness acts on the latent coordinates, which are then embedded.
    Returns ``(x, u)``.
    """
    if not 1 <= d_star < d:
        raise ParameterError(f"need 1 <= d_star < d, got d_star={d_star}, d={d}")
    u = sample_designs(sizes, d_star, phi, rng)
    return embed_manifold(u, d), u


@dataclass(frozen=True)
class NoiseScales:
    """Innovation scales: ``spatial`` multiplies b_{i,t}, ``measurement`` is sigma_xi."""

    spatial: float = 1.0
    measurement: float = 1.0


def noise_levels(noise, d):
    """``(sigma_eps, sigma_gamma)`` implied by the generator scales.

    ``sigma_eps`` is the stationary standard deviation of the measurement
    AR(1).  ``sigma_gamma`` is the bound
    ``sup_x sd(gamma(x)) <= scale * sqrt(sum_t t^-2 / (1 - 0.25)) * (2 pi^2)^(-d/2)``.
    """
    sigma_eps = noise.measurement / np.sqrt(1.0 - MEASUREMENT_AR**2)
    t = np.arange(1, BASIS_SIZE + 1)
    var = np.sum(t**-2.0) / (1.0 - SPATIAL_AR**2)
    sigma_gamma = noise.spatial * np.sqrt(var) * (2.0 * np.pi**2) ** (-d / 2.0)
    return float(sigma_eps), float(sigma_gamma)


def generate_panel(
    scenario,
    d,
    n,
    m_mult=1,
    noise=NoiseScales(),
    seed=0,
    phi=0.1,
    burn_in=100,
    d_star=None,
    sqrt_scope="first",
):
    """Simulate a full panel; a pure function of its arguments.

    With ``d_star`` set, design points lie on the embedded manifold instead
    of filling the cube.
    """
    sid = scenario_id(scenario)
    if d < 2:
        raise ParameterError("scenario panels need d >= 2")
    sizes = group_sizes(n, m_mult)
    seq = np.random.SeedSequence(seed)
    rng_x, rng_g, rng_e = (np.random.default_rng(s) for s in seq.spawn(3))

    if d_star is None:
        x = sample_designs(sizes, d, phi, rng_x)
    else:
        x, _ = manifold_designs(sizes, d, d_star, rng_x, phi)
    f_true = evaluate(sid, x, sqrt_scope)

    coefs = spatial_noise_path(n, rng_g, scale=noise.spatial, burn_in=burn_in)
    tidx = np.repeat(np.arange(n), sizes)
    gamma = np.einsum("nt,nt->n", basis_matrix(x), coefs[tidx])
    eps = measurement_errors(sizes, sigma_xi=noise.measurement, rng=rng_e)
    return PanelDataset(sizes, x, f_true + gamma + eps, f_true)
