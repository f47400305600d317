"""Flattened decision vectors and the linear-constraint matrices of the IQP.

``x`` is ordered application-major, then microservice, then server:
position ``j * N + n`` for flat microservice ``j``.  ``d`` is server-major,
layer-minor: position ``n * L + l``.  Only the matrices live here; solvers work
on the dense assignment encoding and use this model as the audit reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import DimensionMismatch, NotAugmented
from .model import Instance, derive_layer_pulls

__all__ = ["VectorizedModel", "vectorize", "encode_x", "decode_x", "encode_d", "decode_d"]


@dataclass(frozen=True, eq=False)
class VectorizedModel:
    n_servers: int
    n_layers: int
    x_len: int
    d_len: int
    M: np.ndarray  # (d_len,) pull delay row vector
    W: np.ndarray  # (x_len, x_len) block diagonal, R = x^T W x
    Q_eq: np.ndarray  # placement sums, Q_eq x = b1
    b1: np.ndarray
    H: np.ndarray  # virtual sources, H x = b2
    b2: np.ndarray
    Y: np.ndarray  # layer coupling, d <= Y x and d >= Y x / Z
    S_storage: np.ndarray  # S_storage d <= cS
    cS: np.ndarray
    G: np.ndarray  # G x <= cC
    cC: np.ndarray
    Z: float
    instance: Instance | None = None

    @property
    def Q(self):
        return self.W + self.W.T

    def pull_delay(self, d_vec):
        return float(self.M @ d_vec)

    def overhead(self, x_vec):
        return float(x_vec @ self.W @ x_vec)

    def satisfies(self, x_vec, d_vec, tol=1e-9):
        """Every vectorized constraint on (x, d), binariness included."""
        x_vec, d_vec = np.asarray(x_vec, float), np.asarray(d_vec, float)
        yx = self.Y @ x_vec
        return bool(
            np.all((x_vec == 0) | (x_vec == 1))
            and np.all((d_vec == 0) | (d_vec == 1))
            and np.allclose(self.Q_eq @ x_vec, self.b1, atol=tol)
            and np.allclose(self.H @ x_vec, self.b2, atol=tol)
            and np.all(d_vec <= yx + tol)
            and np.all(d_vec >= yx / self.Z - tol)
            and np.all(self.S_storage @ d_vec <= self.cS + tol)
            and np.all(self.G @ x_vec <= self.cC + tol)
        )


def vectorize(instance: Instance) -> VectorizedModel:
    if not instance.augmented:
        raise NotAugmented("vectorize needs virtual sources; call attach_virtual_sources first")
    n, L, m = instance.n_servers, instance.n_layers, instance.n_ms
    D = instance.hops.d.astype(float)
    S = instance.layer_sizes

    M = np.concatenate([S / b for b in instance.bandwidth])
    W = block_diag(*[np.kron(app.traffic, D) for app in instance.apps])

    q = np.ones((1, n))
    Q_eq = np.kron(np.eye(m), q)
    b1 = np.ones(m)

    k = len(instance.apps)
    H = np.zeros((k * n, m * n))
    b2 = np.zeros(k * n)
    for a, app in enumerate(instance.apps):
        j0 = instance.index[(app.id, 0)]
        H[a * n:(a + 1) * n, j0 * n:(j0 + 1) * n] = np.eye(n)
        b2[a * n + app.source_server] = 1.0

    # (Yx)[n*L + l] = sum_j x[j*N + n] E[j, l]
    Y = np.zeros((n * L, m * n))
    for s in range(n):
        Y[s * L:(s + 1) * L, s::n] = instance.E.T

    S_storage = np.kron(np.eye(n), S[None, :])
    G = np.zeros((n, m * n))
    for s in range(n):
        G[s, s::n] = instance.cpu_demand

    return VectorizedModel(
        n_servers=n,
        n_layers=L,
        x_len=m * n,
        d_len=n * L,
        M=M,
        W=W,
        Q_eq=Q_eq,
        b1=b1,
        H=H,
        b2=b2,
        Y=Y,
        S_storage=S_storage,
        cS=instance.storage_capacity.copy(),
        G=G,
        cC=instance.cpu_capacity.copy(),
        Z=1.0 + m,
        instance=instance,
    )


def encode_x(instance: Instance, assign) -> np.ndarray:
    assign = np.asarray(assign, dtype=np.int64)
    if assign.shape != (instance.n_ms,):
        raise DimensionMismatch(f"assignment has shape {assign.shape}")
    x = np.zeros((instance.n_ms, instance.n_servers))
    x[np.arange(instance.n_ms), assign] = 1.0
    return x.ravel()


def decode_x(instance: Instance, x_vec) -> np.ndarray:
    """Binary x vector back to a flat assignment (argmax per microservice)."""
    x = np.asarray(x_vec, float).reshape(instance.n_ms, instance.n_servers)
    return x.argmax(axis=1)


def encode_d(pulls) -> np.ndarray:
    return np.asarray(pulls, dtype=float).ravel()


def decode_d(instance: Instance, d_vec) -> np.ndarray:
    return np.asarray(d_vec).reshape(instance.n_servers, instance.n_layers)


def encode(instance: Instance, assign):
    """(x, d) vectors for an assignment, with d induced from x."""
    return encode_x(instance, assign), encode_d(derive_layer_pulls(instance, assign))
