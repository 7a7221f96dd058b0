"""Dense ReLU network estimator for panel regression.

Training minimises the time-balanced least-squares objective

    (1/n) sum_i (1/m_i) sum_j (y_ij - f(x_ij))^2

over F(L, r) with mini-batch SGD.  Predictions are clipped to
``[-A, A]`` afterwards; training itself uses the raw network output.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ParameterError, TrainingError
from .metrics import empirical_norm_sq, observation_weights, round_half_up
from .net import DenseNet, backward, forward_batch, sgd_step, truncate

WIDE = "wide"
DEEP = "deep"


@dataclass(frozen=True)
class ArchSpec:
    case: str
    L: int
    r: int
    A: float
    smoothness_p: float
    order_K: int
    c_L: float = 1.0
    c_r: float = 1.0
    c_A: float = 1.0

    def to_dict(self):
        return asdict(self)


def rate_exponent(p, K):
    """Width exponent ``K / (2 (2p + K))``."""
    return K / (2.0 * (2.0 * p + K))


def size_architecture(
    n,
    m_harmonic,
    p=2.0,
    K=2,
    case=WIDE,
    c_L=1.0,
    c_r=1.0,
    c_A=1.0,
    sigma_eps=1.0,
    sigma_gamma=0.0,
    pairs=None,
):
    """Depth, width and truncation level for sample size ``n * m``.

    Wide: ``L ~ c_L log(nm)``, ``r ~ c_r (nm)^e``.  Deep: ``L ~ c_L log(nm) (nm)^e``,
    ``r ~ c_r``.  ``e = K / (2(2p+K))``, maximised over ``pairs`` when a list
    of ``(p, K)`` constraints is given.  ``A = c_A max(sigma_eps, sigma_gamma) sqrt(log nm)``.
    """
    nm = n * m_harmonic
    if nm < 2:
        raise ParameterError(f"n*m must be >= 2, got {nm}")
    pairs = [(p, K)] if pairs is None else list(pairs)
    for pp, kk in pairs:
        if pp < 1 or kk < 1:
            raise ParameterError(f"need p >= 1 and K >= 1, got ({pp}, {kk})")
    p, K = max(pairs, key=lambda pk: rate_exponent(*pk))
    e = rate_exponent(p, K)
    log_nm = math.log(nm)
    if case == WIDE:
        L = max(1, round_half_up(c_L * log_nm))
        r = max(1, round_half_up(c_r * nm**e))
    elif case == DEEP:
        L = max(1, round_half_up(c_L * log_nm * nm**e))
        r = max(1, round_half_up(c_r))
    else:
        raise ParameterError(f"case must be {WIDE!r} or {DEEP!r}, got {case!r}")
    A = c_A * max(sigma_eps, sigma_gamma) * math.sqrt(log_nm)
    if not A > 0:
        raise ParameterError("truncation threshold came out non-positive; check sigma values")
    return ArchSpec(case, L, r, A, float(p), int(K), c_L, c_r, c_A)


def empirical_weights(sizes):
    """Ragged weights ``1 / (n m_i)``: one array per time index."""
    w = observation_weights(sizes)
    return np.split(w, np.cumsum(sizes)[:-1])


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 128  # 0 means full batch
    lr: float = 0.01
    lr_decay: float = 0.2
    decay_every: int = 50
    momentum: float = 0.9
    patience: int = 0  # 0 disables early stopping
    holdout_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 0 or self.decay_every < 1 or self.patience < 0:
            raise ParameterError("epoch, batch and patience counts must be nonnegative")
        if not self.lr > 0:
            raise ParameterError("learning rate must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ParameterError("lr_decay must lie in (0, 1]")
        if not 0 < self.holdout_fraction < 1:
            raise ParameterError("holdout_fraction must lie in (0, 1)")

    def lr_at(self, epoch):
        return self.lr * self.lr_decay ** ((epoch - 1) // self.decay_every)

    def to_dict(self):
        return asdict(self)


@dataclass
class TraceRow:
    epoch: int
    objective: float
    lr: float
    val_objective: float | None = None


@dataclass
class TrainingTrace:
    rows: list = field(default_factory=list)
    best_epoch: int = 0

    @property
    def objectives(self):
        return np.array([r.objective for r in self.rows])

    def to_csv(self, path, append=True):
        """Append ``epoch,objective,learning_rate`` rows; header on a new file."""
        path = Path(path)
        new = not (append and path.exists() and path.stat().st_size > 0)
        with path.open("a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(["epoch", "objective", "learning_rate"])
            for r in self.rows:
                w.writerow([r.epoch, repr(r.objective), repr(r.lr)])


def weighted_objective(net, panel):
    """The training objective of ``net`` on ``panel``."""
    return empirical_norm_sq(panel.y - forward_batch(net, panel.x), panel.group_sizes)


def _holdout_split(panel, fraction, rng):
    k = max(1, round_half_up(fraction * panel.n))
    held = np.sort(rng.choice(panel.n, size=k, replace=False))
    rest = np.setdiff1d(np.arange(panel.n), held)
    return panel.select_times(rest), panel.select_times(held)


def fit(dataset, arch, cfg=TrainConfig(), init=None):
    """Train a network of shape ``(arch.L, arch.r)`` on ``dataset``.

    ``init`` optionally supplies the starting network (copied, not mutated);
    otherwise He initialisation from ``cfg.seed`` is used.  With
    ``cfg.patience > 0`` a random ``holdout_fraction`` of whole time indices
    is set aside and the network with the best held-out objective is
    returned.

    Returns ``(net, trace)``; ``trace.rows[0]`` is the objective before any
    update.
    """
    if dataset.size == 0:
        raise ParameterError("cannot fit an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        net = DenseNet.he_init(dataset.d, arch.L, arch.r, rng)
    else:
        if (init.input_dim, init.depth, init.width) != (dataset.d, arch.L, arch.r):
            raise ParameterError("initial network does not match the architecture")
        net = init.copy()

    train, val = dataset, None
    if cfg.patience > 0 and dataset.n >= 2:
        train, val = _holdout_split(dataset, cfg.holdout_fraction, rng)

    X, y = train.x, train.y
    w = observation_weights(train.group_sizes)
    N = len(y)
    batch = N if cfg.batch_size == 0 else min(cfg.batch_size, N)

    def record(epoch, lr):
        obj = weighted_objective(net, train)
        vobj = weighted_objective(net, val) if val is not None else None
        if not np.isfinite(obj):
            raise TrainingError(f"objective became non-finite at epoch {epoch}", epoch=epoch)
        trace.rows.append(TraceRow(epoch, obj, lr, vobj))
        return obj if vobj is None else vobj

    trace = TrainingTrace()
    best = record(0, cfg.lr)
    best_net = net.copy()
    stale = 0
    velocity = None
    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(N) if batch < N else np.arange(N)
        try:
            for start in range(0, N, batch):
                idx = order[start : start + batch]
                grads, _ = backward(net, X[idx], y[idx], w[idx] * (N / len(idx)))
                net, velocity = sgd_step(net, grads, lr, velocity, cfg.momentum)
        except DivergenceError as exc:
            raise TrainingError(f"training diverged at epoch {epoch}: {exc}", epoch=epoch) from exc
        score = record(epoch, lr)
        if val is None:
            trace.best_epoch = epoch
            continue
        if score < best:
            best, best_net, stale = score, net.copy(), 0
            trace.best_epoch = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if val is not None:
        net = best_net
    return net, trace


def predict(net, X):
    return forward_batch(net, X)


def predict_truncated(net, A, x):
    """``sign(f) min(|f|, A)`` at one point or at the rows of an array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return truncate(float(forward_batch(net, x)[0]), A)
    return truncate(forward_batch(net, x), A)


def residual_sigma(net, dataset):
    """Square root of the weighted mean squared residual; the pilot-fit
    estimate of the noise level used when the true scales are unknown."""
    return math.sqrt(weighted_objective(net, dataset))
