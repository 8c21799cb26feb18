"""Embedding model, history composition, losses and the sparse Adam optimizer.

Everything here works on float64 numpy arrays. Batched functions accept a
leading batch axis; the single-vector forms are thin wrappers used by tests
and the evaluation code.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

EUCLIDEAN = "euclidean"
POINCARE = "poincare"

# keeps Poincare points strictly inside the ball after updates
BALL_EPS = 1e-5


@dataclass
class EmbeddingModel:
    event_vectors: np.ndarray
    context_vectors: np.ndarray
    manifold: str = EUCLIDEAN
    curvature: float = 1.0
    norm_clip: float | None = None
    node_names: list = field(default_factory=list)
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.event_vectors.shape != self.context_vectors.shape:
            raise ValueError("event and context matrices must have the same shape")
        if self.manifold not in (EUCLIDEAN, POINCARE):
            raise ValueError(f"unknown manifold {self.manifold!r}")
        if self.manifold == POINCARE and self.curvature <= 0:
            raise ValueError("curvature must be positive")

    @property
    def dim(self):
        return self.event_vectors.shape[1]

    @property
    def num_nodes(self):
        return self.event_vectors.shape[0]

    def names(self):
        return self.node_names or [str(i) for i in range(self.num_nodes)]

    def index_of(self, name):
        if self._index is None:
            self._index = {n: i for i, n in enumerate(self.names())}
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unresolved node {name!r}") from None

    def checksum(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.event_vectors).tobytes())
        h.update(np.ascontiguousarray(self.context_vectors).tobytes())
        return h.hexdigest()


def init_model(num_nodes, dim, rng, manifold=EUCLIDEAN, curvature=1.0, norm_clip=None,
               node_names=None):
    """word2vec-style init: small uniform event vectors, zero context vectors."""
    event = (rng.random((num_nodes, dim)) - 0.5) / dim
    context = np.zeros((num_nodes, dim))
    return EmbeddingModel(event, context, manifold, curvature, norm_clip, list(node_names or []))


# ---------------------------------------------------------------- composition

def compose_euclidean(h, e, clip=None):
    h = np.asarray(h, dtype=float)
    e = np.asarray(e, dtype=float)
    if h.shape != e.shape:
        raise ValueError(f"dimension mismatch: {h.shape} vs {e.shape}")
    out = h + e
    if clip is not None:
        n = np.linalg.norm(out)
        if n > clip:
            out = out * (clip / n)
    return out


def _check_in_ball(x, c):
    r = 1.0 / np.sqrt(c)
    if np.any(np.linalg.norm(x, axis=-1) >= r):
        raise ValueError(f"operand outside the open ball of radius {r}")


def mobius_add(u, v, c=1.0):
    """Gyrovector sum ``u (+) v`` in the Poincare ball of curvature ``-c``.

    Works on single vectors or stacked rows (last axis is the vector axis).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError("dimension mismatch")
    _check_in_ball(u, c)
    _check_in_ball(v, c)
    return _mobius_add(u, v, c)


def _mobius_add(u, v, c):
    uv = np.sum(u * v, axis=-1, keepdims=True)
    uu = np.sum(u * u, axis=-1, keepdims=True)
    vv = np.sum(v * v, axis=-1, keepdims=True)
    a = 1 + 2 * c * uv + c * vv
    b = 1 - c * uu
    d = 1 + 2 * c * uv + c * c * uu * vv
    return (a * u + b * v) / d


def _mobius_add_vjp(u, v, g, c):
    """Vector-Jacobian products of ``mobius_add`` w.r.t. both operands."""
    uv = np.sum(u * v, axis=-1, keepdims=True)
    uu = np.sum(u * u, axis=-1, keepdims=True)
    vv = np.sum(v * v, axis=-1, keepdims=True)
    a = 1 + 2 * c * uv + c * vv
    b = 1 - c * uu
    d = 1 + 2 * c * uv + c * c * uu * vv
    out = (a * u + b * v) / d
    gu = np.sum(g * u, axis=-1, keepdims=True)
    gv = np.sum(g * v, axis=-1, keepdims=True)
    s = np.sum(g * out, axis=-1, keepdims=True) / d
    grad_u = (a * g + 2 * c * gu * v - 2 * c * gv * u) / d - s * (2 * c * v + 2 * c * c * vv * u)
    grad_v = (b * g + gu * (2 * c * u + 2 * c * v)) / d - s * (2 * c * u + 2 * c * c * uu * v)
    return grad_u, grad_v


def project_to_ball(x, c, eps=BALL_EPS):
    """Rescale rows whose norm reaches ``(1 - eps)/sqrt(c)`` back inside."""
    limit = (1.0 - eps) / np.sqrt(c)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(n > limit, limit / np.maximum(n, 1e-300), 1.0)
    return x * scale


@dataclass
class HistoryState:
    h: np.ndarray
    t: int = 0


def compose_sequence(model, nodes, h0=None):
    """Run the recurrence over ``nodes`` and return the final HistoryState."""
    h = np.zeros(model.dim) if h0 is None else np.asarray(h0, dtype=float)
    for node in nodes:
        e = model.event_vectors[node]
        if model.manifold == POINCARE:
            h = project_to_ball(_mobius_add(h, e, model.curvature), model.curvature)
        else:
            h = compose_euclidean(h, e, model.norm_clip)
    return HistoryState(h, len(nodes))


def forward_histories(events, manifold=EUCLIDEAN, clip=None, c=1.0):
    """History states for a batch of event sequences.

    ``events`` has shape (B, L, d). Returns ``(H, cache)`` where ``H[:, t]`` is
    the state after composing event ``t`` from a zero start; ``cache`` holds
    what :func:`backward_histories` needs.
    """
    b, length, dim = events.shape
    if manifold == EUCLIDEAN and clip is None:
        return np.cumsum(events, axis=1), None
    hs = np.empty_like(events)
    pre = np.empty_like(events) if manifold == EUCLIDEAN else None
    h = np.zeros((b, dim))
    for t in range(length):
        e = events[:, t]
        if manifold == POINCARE:
            h = project_to_ball(_mobius_add(h, e, c), c)
        else:
            p = h + e
            pre[:, t] = p
            n = np.linalg.norm(p, axis=-1, keepdims=True)
            h = np.where(n > clip, p * (clip / np.maximum(n, 1e-300)), p)
        hs[:, t] = h
    return hs, pre


def backward_histories(events, hs, cache, grad_h, manifold=EUCLIDEAN, clip=None, c=1.0):
    """Backpropagate ``dL/dH`` through the recurrence; returns ``dL/d events``.

    The ball projection in the Poincare branch is treated as identity for
    gradient purposes (it only activates at the numerical boundary).
    """
    if manifold == EUCLIDEAN and clip is None:
        # h_t = sum_{i<=t} e_i, so dL/de_i = sum_{t>=i} dL/dh_t
        return np.cumsum(grad_h[:, ::-1], axis=1)[:, ::-1]
    b, length, dim = events.shape
    grad_e = np.empty_like(events)
    carry = np.zeros((b, dim))
    for t in range(length - 1, -1, -1):
        g = grad_h[:, t] + carry
        if manifold == POINCARE:
            prev = hs[:, t - 1] if t > 0 else np.zeros((b, dim))
            gp, ge = _mobius_add_vjp(prev, events[:, t], g, c)
        else:
            p = cache[:, t]
            n = np.linalg.norm(p, axis=-1, keepdims=True)
            over = n > clip
            safe = np.maximum(n, 1e-300)
            clipped = (clip / safe) * g - clip * np.sum(p * g, axis=-1, keepdims=True) * p / safe ** 3
            gp = np.where(over, clipped, g)
            ge = gp
        grad_e[:, t] = ge
        carry = gp
    return grad_e


# ---------------------------------------------------------------- prediction

def predict_logit(model, h, target):
    if not 0 <= target < model.num_nodes:
        raise IndexError(f"target {target} out of range")
    return float(np.dot(h, model.context_vectors[target]))


def softmax_probs(model, h):
    logits = model.context_vectors @ h
    logits = logits - logits.max()
    p = np.exp(logits)
    return p / p.sum()


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def negative_sampling_loss(model, h, target, negatives):
    """``-log s(h.o_t) - sum log s(-h.o_n)`` with analytic gradients.

    Returns ``(loss, grad_h, grad_context)`` where ``grad_context`` maps a
    context row index to its gradient (rows repeated in ``negatives``
    accumulate).
    """
    negatives = list(negatives)
    if not negatives:
        raise ValueError("negatives must be nonempty")
    if target in negatives:
        raise ValueError("target appears among negatives")
    h = np.asarray(h, dtype=float)
    ctx = model.context_vectors
    o_t = ctx[target]
    o_n = ctx[negatives]
    pos = o_t @ h
    neg = o_n @ h
    loss = -log_sigmoid(pos) - np.sum(log_sigmoid(-neg))
    g_pos = sigmoid(pos) - 1.0
    g_neg = sigmoid(neg)
    grad_h = g_pos * o_t + g_neg @ o_n
    grad_ctx = {target: g_pos * h}
    for k, n in enumerate(negatives):
        grad_ctx[n] = grad_ctx.get(n, 0.0) + g_neg[k] * h
    return float(loss), grad_h, grad_ctx


def batch_sgns(h, ctx, targets, negatives):
    """Vectorised negative-sampling loss over P (input, target) pairs.

    ``h`` is (P, d), ``targets`` (P,), ``negatives`` (P, K). Returns the summed
    loss, ``dL/dh`` (P, d) and the context gradient as ``(rows, grads)`` over
    the distinct context rows touched.
    """
    p, k = negatives.shape
    idx = np.concatenate([targets[:, None], negatives], axis=1)
    rows, inv = np.unique(idx, return_inverse=True)
    inv = inv.reshape(p, k + 1)
    sub = ctx[rows]
    logits = np.einsum("pkd,pd->pk", sub[inv], h)
    # column 0 is the positive term, the rest are negatives
    logits[:, 1:] *= -1.0
    loss = -float(np.sum(log_sigmoid(logits)))
    coef = sigmoid(logits) - 1.0
    coef[:, 1:] *= -1.0
    m = sparse.csr_matrix((coef.ravel(), inv.ravel(), np.arange(0, p * (k + 1) + 1, k + 1)),
                          shape=(p, len(rows)))
    grad_h = np.asarray(m @ sub)
    grad_ctx = np.asarray(m.T @ h)
    return loss, grad_h, (rows, grad_ctx)


def reconstruction_penalty(h_t, e_t, h_prev, lam):
    """``lam * ||(h_t - e_t) - h_prev||^2`` and its gradients.

    Returns ``(loss, (grad_h_t, grad_e_t, grad_h_prev))``.
    """
    h_t, e_t, h_prev = (np.asarray(x, dtype=float) for x in (h_t, e_t, h_prev))
    if not h_t.shape == e_t.shape == h_prev.shape:
        raise ValueError("dimension mismatch")
    r = h_t - e_t - h_prev
    loss = lam * float(np.sum(r * r))
    g = 2.0 * lam * r
    return loss, (g, -g, -g)


# ---------------------------------------------------------------- optimizer

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0


def adam_init(shape):
    return AdamState(np.zeros(shape), np.zeros(shape), 0)


def adam_step(params, state, rows, grads, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Lazy Adam: moments and parameters change only for ``rows``.

    ``rows`` must be unique. The bias correction uses the global step count,
    which is advanced once per call. Updates ``params`` and ``state`` in place.
    """
    rows = np.asarray(rows, dtype=np.int64)
    grads = np.asarray(grads, dtype=float)
    if grads.shape != (len(rows),) + params.shape[1:]:
        raise ValueError(f"gradient shape {grads.shape} does not match rows {len(rows)}")
    if state.m.shape != params.shape:
        raise ValueError("optimizer state shape does not match parameters")
    state.step += 1
    m = beta1 * state.m[rows] + (1 - beta1) * grads
    v = beta2 * state.v[rows] + (1 - beta2) * grads * grads
    state.m[rows] = m
    state.v[rows] = v
    m_hat = m / (1 - beta1 ** state.step)
    v_hat = v / (1 - beta2 ** state.step)
    params[rows] -= lr * m_hat / (np.sqrt(v_hat) + eps)


def weighted_row_sum(rows, cols, coef, vectors):
    """``out[r] = sum coef[i] * vectors[cols[i]]`` over entries with ``rows[i] == r``.

    Returns ``(unique_rows, out)`` restricted to the rows that occur.
    """
    uniq, inv = np.unique(rows, return_inverse=True)
    m = sparse.csr_matrix((coef, (inv.ravel(), cols)), shape=(len(uniq), len(vectors)))
    return uniq, np.asarray(m @ vectors)


def scatter_rows(indices, values):
    """Sum ``values`` rows sharing an index. Returns ``(unique_indices, sums)``."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    values = values.reshape(len(indices), -1)
    return weighted_row_sum(indices, np.arange(len(indices)), np.ones(len(indices)), values)


# ---------------------------------------------------------------- serialization

MAGIC = b"CWEMB\x00"
VERSION = 1


def save_model(model, path):
    """Binary layout: magic, version, dim, manifold, curvature, clip, node count,
    two row-major float64 matrices, then a newline-joined UTF-8 name table."""
    names = "\n".join(model.node_names).encode("utf-8")
    clip = -1.0 if model.norm_clip is None else float(model.norm_clip)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIBddQ", VERSION, model.dim,
                             1 if model.manifold == POINCARE else 0,
                             float(model.curvature), clip, model.num_nodes))
        fh.write(np.ascontiguousarray(model.event_vectors, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.context_vectors, dtype="<f8").tobytes())
        fh.write(struct.pack("<Q", len(names)))
        fh.write(names)


def load_model(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a model file")
        header = struct.Struct("<IIBddQ")
        version, dim, man, curv, clip, n = header.unpack(fh.read(header.size))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        size = n * dim * 8
        event = np.frombuffer(fh.read(size), dtype="<f8").reshape(n, dim).copy()
        context = np.frombuffer(fh.read(size), dtype="<f8").reshape(n, dim).copy()
        (name_len,) = struct.unpack("<Q", fh.read(8))
        raw = fh.read(name_len).decode("utf-8")
    names = raw.split("\n") if raw else []
    return EmbeddingModel(event, context, POINCARE if man else EUCLIDEAN, curv,
                          None if clip < 0 else clip, names)


def export_text(model, path):
    """word2vec text format: header line, then ``name v1 v2 ...`` per node."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{model.num_nodes} {model.dim}\n")
        for name, vec in zip(model.node_names, model.event_vectors):
            fh.write(name + " " + " ".join(repr(float(x)) for x in vec) + "\n")
