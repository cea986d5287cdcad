"""Shared learned feature embedding and similarity kernels.

Items are embedded as X_i = normalize(sigmoid(theta^T u_i)); similarities
are cosine, i.e. dot products of the unit rows. Query vectors are not
embedded: they are compared against embedded items directly. All gradients
here are the exact chain rule of that forward pass (sigmoid, then L2 row
normalization, then dot product), which finite differences confirm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import l2_normalize_rows, sigmoid


def embed(theta, features) -> np.ndarray:
    """Map raw item features (n x d) to unit-norm positive embeddings (n x h)."""
    theta = np.asarray(theta, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if theta.ndim != 2 or features.ndim != 2:
        raise ValueError("theta and features must be 2-d arrays")
    if features.shape[1] != theta.shape[0]:
        raise ValueError(
            f"feature dimension {features.shape[1]} does not match theta rows {theta.shape[0]}"
        )
    return l2_normalize_rows(sigmoid(features @ theta))


def cosine_kernel(embeddings) -> np.ndarray:
    """Pairwise dot products of unit rows: symmetric, unit diagonal."""
    x = np.asarray(embeddings, dtype=np.float64)
    s = x @ x.T
    s = 0.5 * (s + s.T)
    np.minimum(s, 1.0, out=s)
    np.fill_diagonal(s, 1.0)
    return s


def query_kernel(embeddings, queries) -> np.ndarray:
    """Data-to-query dot products, shape n x |Q|. |Q| = 0 is allowed."""
    x = np.asarray(embeddings, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    if q.size == 0:
        return np.zeros((x.shape[0], 0))
    if q.ndim != 2 or q.shape[1] != x.shape[1]:
        raise ValueError(
            f"query dimension {q.shape[-1] if q.ndim else '?'} does not match embedding width {x.shape[1]}"
        )
    sq = x @ q.T
    np.minimum(sq, 1.0, out=sq)
    return sq


@dataclass
class EmbeddingState:
    """Everything derived from (theta, features, queries) that the set
    functions consume. Rebuilt whenever theta changes; read-only after."""

    theta: np.ndarray  # d x h
    features: np.ndarray  # n x d
    raw_sig: np.ndarray  # n x h sigmoid activations before normalization
    inv_norms: np.ndarray  # n, reciprocal row norms of raw_sig
    x: np.ndarray  # n x h unit embeddings
    s: np.ndarray  # n x n similarity kernel
    queries: np.ndarray | None = None  # m x h unit query rows
    sq: np.ndarray | None = None  # n x m data-to-query similarities

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def h(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.theta.shape[0]


def build_state(theta, features, queries=None) -> EmbeddingState:
    theta = np.asarray(theta, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != theta.shape[0]:
        raise ValueError(
            f"feature dimension {features.shape[1]} does not match theta rows {theta.shape[0]}"
        )
    raw = sigmoid(features @ theta)
    norms = np.linalg.norm(raw, axis=1)
    inv = 1.0 / norms
    x = raw * inv[:, None]
    qn = sq = None
    if queries is not None:
        q = np.asarray(queries, dtype=np.float64)
        qn = l2_normalize_rows(q) if q.size else q.reshape(0, theta.shape[1])
        sq = query_kernel(x, qn)
    return EmbeddingState(
        theta=theta, features=features, raw_sig=raw, inv_norms=inv, x=x,
        s=cosine_kernel(x), queries=qn, sq=sq,
    )


def _backprop_to_theta(state: EmbeddingState, d_x: np.ndarray, row_dot: np.ndarray) -> np.ndarray:
    """Pull dL/dX back through normalization and sigmoid to theta.

    row_dot[i] must equal <dL/dX_i, X_i>; passing it explicitly lets kernel
    callers use stored similarity values so that constant entries (such as
    the unit diagonal) contribute exactly zero.
    """
    sig_prime = state.raw_sig * (1.0 - state.raw_sig)
    h = sig_prime * (d_x - row_dot[:, None] * state.x) * state.inv_norms[:, None]
    return state.features.T @ h


def grad_from_pair_weights(state: EmbeddingState, weights: np.ndarray) -> np.ndarray:
    """d/d theta of sum_ij weights[i,j] * s[i,j]."""
    w = weights + weights.T
    d_x = w @ state.x
    row_dot = np.einsum("ij,ij->i", w, state.s)
    return _backprop_to_theta(state, d_x, row_dot)


def grad_from_query_weights(state: EmbeddingState, weights: np.ndarray) -> np.ndarray:
    """d/d theta of sum_ij weights[i,j] * sq[i,j]; queries are constants."""
    d_x = weights @ state.queries
    row_dot = np.einsum("ij,ij->i", weights, state.sq)
    return _backprop_to_theta(state, d_x, row_dot)


def grad_from_embedding_coeffs(state: EmbeddingState, coeffs: np.ndarray) -> np.ndarray:
    """d/d theta of sum_i <coeffs[i], X_i>."""
    row_dot = np.einsum("ij,ij->i", coeffs, state.x)
    return _backprop_to_theta(state, coeffs, row_dot)


def pair_similarity_grad(theta, u_i, u_j) -> np.ndarray:
    """Gradient of the similarity of two raw feature vectors w.r.t. theta."""
    theta = np.asarray(theta, dtype=np.float64)
    u = np.vstack([np.asarray(u_i, dtype=np.float64), np.asarray(u_j, dtype=np.float64)])
    state = build_state(theta, u)
    sim = state.s[0, 1]
    g0 = state.raw_sig[0] * (1.0 - state.raw_sig[0]) * (state.x[1] - sim * state.x[0]) * state.inv_norms[0]
    g1 = state.raw_sig[1] * (1.0 - state.raw_sig[1]) * (state.x[0] - sim * state.x[1]) * state.inv_norms[1]
    return np.outer(u[0], g0) + np.outer(u[1], g1)


def query_similarity_grad(theta, u_i, query) -> np.ndarray:
    """Gradient of the similarity between one embedded item and one fixed
    (already normalized) query vector w.r.t. theta."""
    theta = np.asarray(theta, dtype=np.float64)
    u = np.asarray(u_i, dtype=np.float64)[None, :]
    q = np.asarray(query, dtype=np.float64)
    state = build_state(theta, u)
    sim = float(state.x[0] @ q)
    g = state.raw_sig[0] * (1.0 - state.raw_sig[0]) * (q - sim * state.x[0]) * state.inv_norms[0]
    return np.outer(u[0], g)


class ThetaGradAccumulator:
    """Collects kernel pair weights and embedding coefficients from many
    components, then materializes one d x h gradient in a single pass."""

    def __init__(self, state: EmbeddingState):
        self.state = state
        self._pair: np.ndarray | None = None
        self._query: np.ndarray | None = None
        self._coeff: np.ndarray | None = None

    def pair_weights(self) -> np.ndarray:
        if self._pair is None:
            self._pair = np.zeros((self.state.n, self.state.n))
        return self._pair

    def query_weights(self) -> np.ndarray:
        if self._query is None:
            if self.state.sq is None:
                raise ValueError("state has no query kernel")
            self._query = np.zeros_like(self.state.sq)
        return self._query

    def embedding_coeffs(self) -> np.ndarray:
        if self._coeff is None:
            self._coeff = np.zeros_like(self.state.x)
        return self._coeff

    def total(self) -> np.ndarray:
        grad = np.zeros((self.state.d, self.state.h))
        if self._pair is not None:
            grad += grad_from_pair_weights(self.state, self._pair)
        if self._query is not None:
            grad += grad_from_query_weights(self.state, self._query)
        if self._coeff is not None:
            grad += grad_from_embedding_coeffs(self.state, self._coeff)
        return grad
