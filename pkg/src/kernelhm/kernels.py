"""Weighted linear/Gaussian mixture kernels over output fields.

The weight matrix W = obs_cov + Sigma_eta carries observation error and
structural-importance judgements across output cells. Its inverse is never
formed explicitly: W = V diag(h) V^T gives the factor P = V diag(h^-1/2) with
W^-1 = P P^T, and every kernel evaluation goes through products with P^T.

When Sigma_eta is separable over the grid axes and the observation error is
absent or a scalar multiple of the identity, the eigendecomposition factors
per axis; field mappings then cost O(l * sum(extent_d)) instead of O(l^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional

import numpy as np

from .ensemble import frepr

DEFAULT_JITTER_SCALE = 1e-8


def _active_axes(grid_shape, l):
    if grid_shape is None:
        grid_shape = (l, 1, 1)
    grid_shape = tuple(int(g) for g in grid_shape)
    if int(np.prod(grid_shape)) != l:
        raise ValueError(f"grid {grid_shape} does not cover l={l} cells")
    extents = tuple(e for e in grid_shape if e > 1)
    if not extents:
        raise ValueError("degenerate geometry: all grid axes have extent 1")
    return extents


@dataclass(frozen=True)
class WeightMatrix:
    """Positive-definite weight W with factor P such that W^-1 = P P^T."""

    W: np.ndarray
    P: np.ndarray
    eigenvalues: np.ndarray
    lengths: tuple
    sigma_eta_sq: float
    jitter: float
    has_obs_cov: bool
    # per-axis eigenvector factors when W is separable + scalar diagonal
    axes_shape: Optional[tuple] = None
    factors: Optional[tuple] = None

    @property
    def l(self):
        return self.W.shape[0]

    def apply_inv(self, x):
        """W^-1 x via the factor (no explicit inverse)."""
        y = self.mapped(x)
        if self.factors is None:
            return self.P @ y
        return self._unmap(y)

    def mapped(self, x):
        """Feature image P^T x of a field (columns if x is a matrix)."""
        x = np.asarray(x, dtype=float)
        if self.factors is None:
            return self.P.T @ x
        single = x.ndim == 1
        m = 1 if single else x.shape[1]
        t = x.reshape(*self.axes_shape, m)
        for d, V in enumerate(self.factors):
            t = np.moveaxis(np.tensordot(V, t, axes=([0], [d])), 0, d)
        y = t.reshape(self.l, m) / np.sqrt(self.eigenvalues)[:, None]
        return y[:, 0] if single else y

    def _unmap(self, y):
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        m = 1 if single else y.shape[1]
        t = (y.reshape(self.l, m) / np.sqrt(self.eigenvalues)[:, None])
        t = t.reshape(*self.axes_shape, m)
        for d, V in enumerate(self.factors):
            t = np.moveaxis(np.tensordot(V, t, axes=([1], [d])), 0, d)
        out = t.reshape(self.l, m)
        return out[:, 0] if single else out


def _axis_correlations(extents, lengths):
    mats = []
    for extent, ell in zip(extents, lengths):
        idx = np.arange(extent, dtype=float)
        delta = idx[:, None] - idx[None, :]
        mats.append(np.exp(-((delta / ell) ** 2)))
    return mats


def build_weight_matrix(obs_cov, lengths, sigma_eta_sq, grid_shape, l=None,
                        jitter=None) -> WeightMatrix:
    """Assemble W = obs_cov + Sigma_eta and factorize it.

    Sigma_eta is a separable squared-exponential over grid coordinates:
    entry (a, b) = sigma_eta_sq * exp(-sum_d ((a_d - b_d) / lengths[d])^2),
    one correlation length per grid axis of extent > 1. ``jitter`` times the
    identity is added only if the smallest eigenvalue is <= 0; the default
    jitter is 1e-8 * trace(W) / l, escalated tenfold until W is PD.
    """
    lengths = tuple(float(v) for v in np.atleast_1d(lengths))
    if any(v <= 0 for v in lengths):
        raise ValueError("correlation lengths must be > 0")
    sigma_eta_sq = float(sigma_eta_sq)
    if sigma_eta_sq < 0:
        raise ValueError("sigma_eta_sq must be >= 0")
    if obs_cov is not None:
        obs_cov = np.asarray(obs_cov, dtype=float)
        l = obs_cov.shape[0]
    if l is None and grid_shape is not None:
        l = int(np.prod(tuple(int(g) for g in grid_shape)))
    if l is None:
        raise ValueError("need l or grid_shape when obs_cov is absent")
    extents = _active_axes(grid_shape, l)
    if len(extents) != len(lengths):
        raise ValueError(
            f"{len(extents)} grid axes of extent > 1 but {len(lengths)} lengths"
        )

    # scalar-diagonal observation error keeps the separable eigenbasis
    scalar_obs = 0.0
    separable = obs_cov is None
    if obs_cov is not None:
        diag = np.diagonal(obs_cov)
        if np.all(obs_cov == np.diag(diag)) and np.all(diag == diag[0]):
            scalar_obs = float(diag[0])
            if scalar_obs < 0:
                raise ValueError("obs_cov not positive semidefinite")
            separable = True
        else:
            eig_min = float(np.linalg.eigvalsh(obs_cov)[0])
            if eig_min < -1e-10 * max(np.trace(obs_cov), 1.0):
                raise ValueError("obs_cov not positive semidefinite")

    axis_corr = _axis_correlations(extents, lengths)
    if separable:
        pairs = [np.linalg.eigh(C) for C in axis_corr]
        h = sigma_eta_sq * reduce(np.kron, [hp for hp, _ in pairs])
        h = h + scalar_obs
        W = sigma_eta_sq * reduce(np.kron, axis_corr)
        if scalar_obs:
            W = W + scalar_obs * np.eye(l)
        applied = _required_jitter(h.min(), np.trace(W) / l, jitter)
        if applied:
            h = h + applied
            W = W + applied * np.eye(l)
        factors = tuple(Vp for _, Vp in pairs)
        V_full = reduce(np.kron, factors)
        P = V_full / np.sqrt(h)
        return WeightMatrix(W, P, h, lengths, sigma_eta_sq, applied,
                            obs_cov is not None, axes_shape=extents,
                            factors=factors)

    W = sigma_eta_sq * reduce(np.kron, axis_corr) + obs_cov
    h, V = np.linalg.eigh(W)
    applied = _required_jitter(h[0], np.trace(W) / l, jitter)
    if applied:
        # adding jitter*I shifts eigenvalues exactly; eigenvectors unchanged
        h = h + applied
        W = W + applied * np.eye(l)
    P = V / np.sqrt(h)
    return WeightMatrix(W, P, h, lengths, sigma_eta_sq, applied, True)


def _required_jitter(h_min, trace_scale, jitter):
    if h_min > 0:
        return 0.0
    step = jitter if jitter is not None else DEFAULT_JITTER_SCALE * trace_scale
    step = max(step, np.finfo(float).tiny)
    while h_min + step <= 0:
        step *= 10.0
    return step


def identity_weight(l) -> WeightMatrix:
    """W = I, the unweighted (Euclidean) geometry."""
    eye = np.eye(l)
    return WeightMatrix(eye, eye.copy(), np.ones(l), (), 0.0, 0.0, False)


@dataclass(frozen=True)
class KernelSpec:
    """Mixture kernel k = omega*k_lin + (1-omega)*k_gauss over one weight W."""

    omega: float
    sigma: float
    delta: float
    weight: WeightMatrix

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if self.sigma <= 0 or self.delta <= 0:
            raise ValueError("sigma and delta must be > 0")


def weighted_sq_distance(weight: WeightMatrix, a, b) -> float:
    d = weight.mapped(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return float(d @ d)


def eval_kernel(spec: KernelSpec, a, b) -> float:
    ga = spec.weight.mapped(np.asarray(a, dtype=float).ravel())
    gb = spec.weight.mapped(np.asarray(b, dtype=float).ravel())
    lin = float(ga @ gb)
    diff = ga - gb
    gauss = spec.sigma * np.exp(-float(diff @ diff) / spec.delta)
    return spec.omega * lin + (1.0 - spec.omega) * gauss


def mixture_from_sq_distance(spec: KernelSpec, d2):
    """I0 as a function of the weighted squared distance (monotone in d2)."""
    return spec.omega * d2 + 2.0 * (1.0 - spec.omega) * spec.sigma * (
        1.0 - np.exp(-np.asarray(d2, dtype=float) / spec.delta))


def kernel_matrix(spec: KernelSpec, F) -> np.ndarray:
    """n x n matrix of kernel values between the columns of F (l x n)."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] < 2:
        raise ValueError("F must be l x n with n >= 2")
    G = spec.weight.mapped(F)
    lin = G.T @ G
    sq = np.diag(lin)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * lin, 0.0)
    K = spec.omega * lin + (1.0 - spec.omega) * spec.sigma * np.exp(-d2 / spec.delta)
    return 0.5 * (K + K.T)


def cross_kernel(spec: KernelSpec, F, v) -> np.ndarray:
    """Vector of k(v, f_i) against every ensemble column (uncentered)."""
    G = spec.weight.mapped(np.asarray(F, dtype=float))
    gv = spec.weight.mapped(np.asarray(v, dtype=float).ravel())
    lin = G.T @ gv
    d2 = np.maximum(np.sum(G * G, axis=0) + gv @ gv - 2.0 * lin, 0.0)
    return spec.omega * lin + (1.0 - spec.omega) * spec.sigma * np.exp(-d2 / spec.delta)


def cross_kernel_many(spec: KernelSpec, F, V) -> np.ndarray:
    """n x m matrix of k(f_i, v_j) for a batch of fields (columns of V)."""
    G = spec.weight.mapped(np.asarray(F, dtype=float))
    GV = spec.weight.mapped(np.asarray(V, dtype=float))
    lin = G.T @ GV
    d2 = np.maximum(np.sum(G * G, axis=0)[:, None]
                    + np.sum(GV * GV, axis=0)[None, :] - 2.0 * lin, 0.0)
    return spec.omega * lin + (1.0 - spec.omega) * spec.sigma * np.exp(-d2 / spec.delta)


def center_kernel_matrix(K) -> np.ndarray:
    """K_tilde = H K H with H = I - (1/n) 11^T."""
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=1, keepdims=True)
    col = K.mean(axis=0, keepdims=True)
    return K - row - col + K.mean()


def centered_cross_kernel(spec: KernelSpec, F, K, v) -> np.ndarray:
    """Centered cross-kernel K_tilde_v against the ensemble.

    Entry i = k(v,f_i) - mean_j k(v,f_j) - mean_j k(f_i,f_j) + mean_jk K_jk.
    """
    kv = cross_kernel(spec, F, v)
    K = np.asarray(K, dtype=float)
    return kv - kv.mean() - K.mean(axis=1) + K.mean()


def self_centered_kernel(spec: KernelSpec, F, K, v) -> float:
    """k_tilde(v, v) = k(v,v) - 2 mean_j k(v,f_j) + mean_jk K_jk."""
    kv = cross_kernel(spec, F, v)
    kvv = eval_kernel(spec, v, v)
    return float(kvv - 2.0 * kv.mean() + np.asarray(K, dtype=float).mean())


@dataclass(frozen=True)
class CenteredKernelSystem:
    """Raw and centered kernel matrices bound to the generating spec/ensemble."""

    spec: KernelSpec
    fields: np.ndarray
    K: np.ndarray
    K_tilde: np.ndarray

    @classmethod
    def build(cls, spec: KernelSpec, F):
        F = np.asarray(F, dtype=float)
        K = kernel_matrix(spec, F)
        return cls(spec, F, K, center_kernel_matrix(K))

    @property
    def n(self):
        return self.K.shape[0]

    def cross(self, v):
        return centered_cross_kernel(self.spec, self.fields, self.K, v)

    def cross_many(self, V):
        kv = cross_kernel_many(self.spec, self.fields, V)
        return kv - kv.mean(axis=0) - self.K.mean(axis=1)[:, None] + self.K.mean()

    def self_centered(self, v):
        return self_centered_kernel(self.spec, self.fields, self.K, v)

    def self_centered_many(self, V):
        V = np.asarray(V, dtype=float)
        kv = cross_kernel_many(self.spec, self.fields, V)
        kvv = np.array([eval_kernel(self.spec, V[:, j], V[:, j])
                        for j in range(V.shape[1])])
        return kvv - 2.0 * kv.mean(axis=0) + self.K.mean()


# -- KernelSpec text document ------------------------------------------------
# key-value lines; repr() of floats guarantees exact decimal round-trip

def kernel_spec_to_text(spec: KernelSpec) -> str:
    w = spec.weight
    lines = [
        f"omega {frepr(spec.omega)}",
        f"sigma {frepr(spec.sigma)}",
        f"delta {frepr(spec.delta)}",
        "lengths " + ",".join(frepr(v) for v in w.lengths),
        f"sigma_eta_sq {frepr(w.sigma_eta_sq)}",
        f"jitter {frepr(w.jitter)}",
    ]
    return "\n".join(lines) + "\n"


def kernel_spec_from_text(text: str, obs_cov, grid_shape, l=None) -> KernelSpec:
    """Rebuild a KernelSpec against the session's observation/grid context."""
    kv = {}
    for line in text.strip().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" ")
        kv[key.strip()] = value.strip()
    lengths = tuple(float(s) for s in kv["lengths"].split(",") if s)
    if lengths:
        weight = build_weight_matrix(obs_cov, lengths, float(kv["sigma_eta_sq"]),
                                     grid_shape, l=l)
    else:
        size = l if obs_cov is None else np.asarray(obs_cov).shape[0]
        weight = identity_weight(size)
    return KernelSpec(float(kv["omega"]), float(kv["sigma"]), float(kv["delta"]),
                      weight)
