"""Kernel PCA over the centered kernel matrix.

Basis vectors live in feature space as psi_k = sum_i alpha_ki phi_tilde(f_i);
only the coefficient matrix A (columns alpha_k = v_k / sqrt(lambda_k)) is ever
materialized. Projections and reconstruction errors reduce to centered
cross-kernel evaluations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import frepr
from .kernels import CenteredKernelSystem

EIGENVALUE_CUTOFF = 1e-10     # relative to the leading eigenvalue
DEFAULT_Q = 5


@dataclass(frozen=True)
class KpcaBasis:
    A: np.ndarray               # n x q, columns alpha_k
    eigenvalues: np.ndarray     # length q, descending, positive
    q: int
    system: CenteredKernelSystem

    @property
    def n(self):
        return self.A.shape[0]


def fit_kpca(system: CenteredKernelSystem, q=None,
             variance_fraction=None) -> KpcaBasis:
    """Eigendecompose K_tilde and keep a truncated, normalized basis.

    Either a fixed rank ``q`` (default 5, capped at the positive-eigenvalue
    count) or the smallest rank explaining ``variance_fraction`` of the total
    retained variance. Eigenvalues below 1e-10 of the leading one are
    discarded. Each eigenvector's largest-magnitude entry is made positive.
    """
    if system.n < 2:
        raise ValueError("need at least 2 ensemble members")
    evals, evecs = np.linalg.eigh(system.K_tilde)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if evals[0] <= 0:
        raise ValueError("all eigenvalues non-positive (constant ensemble?)")
    keep = evals > EIGENVALUE_CUTOFF * evals[0]
    evals, evecs = evals[keep], evecs[:, keep]

    if variance_fraction is not None:
        if not 0 < variance_fraction <= 1:
            raise ValueError("variance fraction must lie in (0, 1]")
        frac = np.cumsum(evals) / evals.sum()
        rank = int(np.searchsorted(frac, variance_fraction - 1e-12) + 1)
        rank = min(rank, evals.size)
    else:
        rank = min(DEFAULT_Q if q is None else int(q), evals.size)
        if rank < 1:
            raise ValueError("q must be >= 1")
    evals, evecs = evals[:rank], evecs[:, :rank]

    for k in range(rank):
        j = int(np.argmax(np.abs(evecs[:, k])))
        if evecs[j, k] < 0:
            evecs[:, k] = -evecs[:, k]
    # eigh returns Fortran-ordered vectors; normalize the layout so dot
    # products are bitwise reproducible after a text round-trip
    A = np.ascontiguousarray(evecs / np.sqrt(evals))
    return KpcaBasis(A=A, eigenvalues=evals, q=rank, system=system)


def project(basis: KpcaBasis, v) -> np.ndarray:
    """Coefficients C_k(v) = alpha_k^T K_tilde_v."""
    return basis.A.T @ basis.system.cross(v)


def project_many(basis: KpcaBasis, V) -> np.ndarray:
    """q x m coefficient matrix for a batch of fields (columns of V)."""
    return basis.A.T @ basis.system.cross_many(V)


def training_coefficients(basis: KpcaBasis) -> np.ndarray:
    """n x q table of projections of the training members themselves."""
    return (basis.A.T @ basis.system.K_tilde).T


def reconstruction_error_sq(basis: KpcaBasis, v) -> float:
    """Squared feature-space distance from phi_tilde(v) to its projection.

    k_tilde(v,v) + C^T C - 2 C^T A^T K_tilde_v, clamped to zero within
    -1e-8 * k_tilde(v,v); below that tolerance the basis and system are
    inconsistent and this raises.
    """
    ktv = basis.system.cross(v)
    kvv = basis.system.self_centered(v)
    C = basis.A.T @ ktv
    err = kvv + C @ C - 2.0 * C @ (basis.A.T @ ktv)
    # k_tilde(v,v) itself is rounding noise for fields at the ensemble mean,
    # so the tolerance gets an absolute floor at the average training scale
    scale = max(abs(kvv), float(np.mean(np.diag(basis.system.K_tilde))))
    if err < -1e-8 * scale:
        raise ValueError(f"negative reconstruction error {err} below tolerance")
    return max(float(err), 0.0)


# -- text exports -------------------------------------------------------------

def basis_to_text(basis: KpcaBasis) -> str:
    lines = [f"q {basis.q}",
             "eigenvalues " + ",".join(frepr(v) for v in basis.eigenvalues)]
    for i in range(basis.n):
        lines.append("A " + ",".join(frepr(v) for v in basis.A[i]))
    return "\n".join(lines) + "\n"


def basis_from_text(text: str, system: CenteredKernelSystem) -> KpcaBasis:
    q = None
    evals = None
    rows = []
    for line in text.strip().splitlines():
        key, _, value = line.partition(" ")
        if key == "q":
            q = int(value)
        elif key == "eigenvalues":
            evals = np.array([float(s) for s in value.split(",")])
        elif key == "A":
            rows.append([float(s) for s in value.split(",")])
    if q is None or evals is None or not rows:
        raise ValueError("malformed basis document")
    A = np.array(rows)
    if A.shape != (system.n, q):
        raise ValueError("basis shape does not match the kernel system")
    return KpcaBasis(A=A, eigenvalues=evals, q=q, system=system)


def coefficients_to_text(coeffs) -> str:
    """Delimited table: run index then C_1..C_q per row."""
    coeffs = np.asarray(coeffs, dtype=float)
    header = "run_index," + ",".join(f"C{k+1}" for k in range(coeffs.shape[1]))
    lines = [header]
    for i, row in enumerate(coeffs):
        lines.append(f"{i}," + ",".join(frepr(v) for v in row))
    return "\n".join(lines) + "\n"


def coefficients_from_text(text: str) -> np.ndarray:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        rows.append([float(s) for s in parts[1:]])
    return np.array(rows)
