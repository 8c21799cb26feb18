"""Event2Vec (additive recurrence) and DeepWalk (skip-gram) training loops."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .embed_core import (
    EUCLIDEAN,
    POINCARE,
    adam_init,
    adam_step,
    backward_histories,
    batch_sgns,
    forward_histories,
    init_model,
    project_to_ball,
    scatter_rows,
)
from .walks import corpus_counts


@dataclass
class TrainConfig:
    dim: int = 64
    lookahead: int = 5
    window: int = 5
    lam: float = 0.5
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    negatives: int = 5
    noise_power: float = 0.75
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    norm_clip: float | None = None
    curvature: float = 1.0

    def validate(self):
        if self.lookahead < 1 or self.window < 1:
            raise ValueError("lookahead and window must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if self.negatives < 1 or self.dim < 1:
            raise ValueError("negatives and dim must be >= 1")
        if self.norm_clip is not None and self.norm_clip <= 0:
            raise ValueError("norm_clip must be positive")
        if self.curvature <= 0:
            raise ValueError("curvature must be positive")
        return self

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**data).validate()


@dataclass
class TrainReport:
    model: str
    prediction_loss: list = field(default_factory=list)
    reconstruction_loss: list = field(default_factory=list)
    total_loss: list = field(default_factory=list)
    wall_time_s: float = 0.0
    checksum: str = ""
    corpus_checksum: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


class NoiseSampler:
    """Draws negatives from the unigram^power distribution, never equal to the target."""

    def __init__(self, counts, power, rng):
        weights = np.asarray(counts, dtype=float) ** power
        if np.count_nonzero(weights) < 2:
            raise ValueError("negative sampling needs at least two nodes with nonzero frequency")
        self.cdf = np.cumsum(weights / weights.sum())
        self.cdf[-1] = 1.0
        self.rng = rng

    def draw(self, shape):
        return np.searchsorted(self.cdf, self.rng.random(shape), side="right")

    def sample(self, targets, k):
        targets = np.asarray(targets)
        out = self.draw(targets.shape + (k,))
        bad = out == targets[..., None]
        while bad.any():
            out[bad] = self.draw(int(bad.sum()))
            bad = out == targets[..., None]
        return out


def lookahead_pairs(length, lookahead):
    """``(t, t + delta)`` position pairs for every delta in ``1..lookahead`` that fits."""
    src, dst = [], []
    for t in range(length):
        for delta in range(1, lookahead + 1):
            if t + delta < length:
                src.append(t)
                dst.append(t + delta)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def window_pairs(length, window):
    """Symmetric skip-gram ``(center, context)`` position pairs."""
    src, dst = [], []
    for t in range(length):
        for u in range(max(0, t - window), min(length, t + window + 1)):
            if u != t:
                src.append(t)
                dst.append(u)
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)


def event2vec_loss(event, context, walks, negatives, lookahead, lam,
                   manifold=EUCLIDEAN, clip=None, c=1.0):
    """Composite objective summed over a batch of equal-length walks.

    ``walks`` is (B, L); ``negatives`` is (B, P, K) aligned with
    :func:`lookahead_pairs`. Returns ``(prediction_sum, reconstruction_sum,
    event_grad, context_grad)``; the gradients are of
    ``prediction_sum + lam * reconstruction_sum`` as ``(rows, values)`` pairs.
    """
    b, length = walks.shape
    events = event[walks]
    hs, cache = forward_histories(events, manifold, clip, c)
    src, dst = lookahead_pairs(length, lookahead)

    grad_h = np.zeros_like(hs)
    pred = 0.0
    if len(src):
        h_in = hs[:, src].reshape(-1, hs.shape[-1])
        targets = walks[:, dst].reshape(-1)
        negs = negatives.reshape(len(targets), -1)
        pred, g_h, c_grad = batch_sgns(h_in, context, targets, negs)
        # accumulate dL/dh per position: each position appears in several pairs
        g_h = g_h.reshape(b, len(src), -1)
        for k in range(1, lookahead + 1):
            sel = np.flatnonzero(dst - src == k)
            grad_h[:, src[sel]] += g_h[:, sel]
    else:
        c_grad = (np.zeros(0, dtype=np.int64), np.zeros((0, event.shape[1])))

    prev = np.concatenate([np.zeros_like(hs[:, :1]), hs[:, :-1]], axis=1)
    r = hs - events - prev
    recon = float(np.sum(r * r))
    g_r = 2.0 * lam * r
    grad_h += g_r
    grad_h[:, :-1] -= g_r[:, 1:]
    grad_e = backward_histories(events, hs, cache, grad_h, manifold, clip, c) - g_r

    e_grad = scatter_rows(walks.ravel(), grad_e.reshape(-1, grad_e.shape[-1]))
    return pred, recon, e_grad, c_grad


def skipgram_loss(event, context, walks, negatives, window):
    """Summed SGNS loss over a batch of equal-length walks with a symmetric window."""
    b, length = walks.shape
    src, dst = window_pairs(length, window)
    if not len(src):
        empty = (np.zeros(0, dtype=np.int64), np.zeros((0, event.shape[1])))
        return 0.0, empty, empty
    centers = walks[:, src].reshape(-1)
    targets = walks[:, dst].reshape(-1)
    negs = negatives.reshape(len(targets), -1)
    h = event[centers]
    loss, g_h, c_grad = batch_sgns(h, context, targets, negs)
    e_grad = scatter_rows(centers, g_h)
    return loss, e_grad, c_grad


def _batches(corpus, order, batch_size):
    for lo in range(0, len(order), batch_size):
        idx = order[lo:lo + batch_size]
        groups = {}
        for i in idx:
            groups.setdefault(len(corpus.walks[i]), []).append(corpus.walks[i])
        for length in sorted(groups):
            yield np.asarray(groups[length], dtype=np.int64)


def _train(corpus, config, num_nodes, node_names, kind, manifold, on_epoch=None):
    config.validate()
    if not corpus.walks:
        raise ValueError("corpus is empty")
    counts = corpus_counts(corpus, num_nodes)
    if len(counts) > num_nodes:
        raise ValueError("corpus references nodes outside the model vocabulary")
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    init_rng, order_rng, noise_rng = (np.random.default_rng(s) for s in seeds)
    clip = config.norm_clip if manifold == EUCLIDEAN else None
    model = init_model(num_nodes, config.dim, init_rng, manifold, config.curvature, clip, node_names)
    sampler = NoiseSampler(counts, config.noise_power, noise_rng)
    adam_e = adam_init(model.event_vectors.shape)
    adam_c = adam_init(model.context_vectors.shape)
    report = TrainReport(kind, corpus_checksum=corpus.checksum(), config=asdict(config))
    opt = dict(lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    n_walks = len(corpus.walks)
    start = time.perf_counter()
    for epoch in range(config.epochs):
        pred_total = recon_total = 0.0
        order = order_rng.permutation(n_walks)
        for walks in _batches(corpus, order, config.batch_size):
            b, length = walks.shape
            if kind == "deepwalk":
                src, dst = window_pairs(length, config.window)
                negs = sampler.sample(walks[:, dst], config.negatives)
                pred, e_grad, c_grad = skipgram_loss(model.event_vectors, model.context_vectors,
                                                     walks, negs, config.window)
                recon = 0.0
            else:
                src, dst = lookahead_pairs(length, config.lookahead)
                negs = sampler.sample(walks[:, dst], config.negatives)
                pred, recon, e_grad, c_grad = event2vec_loss(
                    model.event_vectors, model.context_vectors, walks, negs,
                    config.lookahead, config.lam, manifold, clip, config.curvature)
            pred_total += pred
            recon_total += recon
            # per-walk mean objective for the batch
            if len(e_grad[0]):
                adam_step(model.event_vectors, adam_e, e_grad[0], e_grad[1] / b, **opt)
            if len(c_grad[0]):
                adam_step(model.context_vectors, adam_c, c_grad[0], c_grad[1] / b, **opt)
            if manifold == POINCARE:
                rows = e_grad[0]
                model.event_vectors[rows] = project_to_ball(model.event_vectors[rows], config.curvature)
        p = pred_total / n_walks
        r = recon_total / n_walks
        report.prediction_loss.append(p)
        report.reconstruction_loss.append(r)
        report.total_loss.append(p + config.lam * r if kind != "deepwalk" else p)
        if on_epoch is not None:
            on_epoch(epoch, model)
    report.wall_time_s = time.perf_counter() - start
    if not all(np.isfinite(report.total_loss)) or not np.all(np.isfinite(model.event_vectors)):
        raise FloatingPointError(f"{kind} training diverged")
    report.checksum = model.checksum()
    return model, report


def train_event2vec(corpus, config, num_nodes, node_names=None, manifold=EUCLIDEAN, on_epoch=None):
    """Train the additive-recurrence model; ``on_epoch(epoch, model)`` runs after each epoch."""
    kind = "event2vec-hyperbolic" if manifold == POINCARE else "event2vec"
    return _train(corpus, config, num_nodes, node_names, kind, manifold, on_epoch)


def train_deepwalk(corpus, config, num_nodes, node_names=None, on_epoch=None):
    return _train(corpus, config, num_nodes, node_names, "deepwalk", EUCLIDEAN, on_epoch)


def training_curve_check(report, span=5):
    """True when the mean of the last ``span`` epoch losses is below the first ``span``."""
    losses = report.total_loss if isinstance(report, TrainReport) else list(report)
    if len(losses) < 2:
        raise ValueError("need at least two epochs")
    span = min(span, len(losses) // 2) or 1
    return float(np.mean(losses[-span:])) < float(np.mean(losses[:span]))
