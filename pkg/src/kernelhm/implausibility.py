"""Distance measures and thresholds for ruling parameter space out.

Everything observation-side (projection coefficients, self kernel value,
truncation residual) is computed once into an ImplausibilityContext; the
per-candidate measures then need only emulator means/variances. The low-level
``*_from`` forms take explicit (mean, variance) vectors so oracle tests and
Monte Carlo draws can bypass the emulators.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ensemble import frepr
from .gp import CoefficientEmulators, GpConfig, coefficient_seed, fit_gp, predict
from .kernels import KernelSpec, eval_kernel
from .kpca import KpcaBasis, project_many, reconstruction_error_sq

DEFAULT_T_MULTIPLIER = 3.0


@dataclass(frozen=True)
class ImplausibilityContext:
    basis: KpcaBasis
    emulators: CoefficientEmulators
    obs_coeffs: np.ndarray        # C_q(z)
    obs_self: float               # k_tilde(z, z)
    obs_cross: np.ndarray         # K_tilde_z
    obs_recon_err: float          # ||eps_z||^2
    bound_a: Optional[float] = None
    T2: Optional[float] = None
    t_multiplier: float = DEFAULT_T_MULTIPLIER

    @property
    def q(self):
        return self.obs_coeffs.size

    def with_bounds(self, bound_a=None, T2=None):
        updates = {}
        if bound_a is not None:
            updates["bound_a"] = float(bound_a)
        if T2 is not None:
            updates["T2"] = float(T2)
        return replace(self, **updates)


def build_context(basis: KpcaBasis, emulators: CoefficientEmulators, z,
                  bound_a=None, T2=None,
                  t_multiplier=DEFAULT_T_MULTIPLIER) -> ImplausibilityContext:
    obs_cross = basis.system.cross(z)
    obs_self = basis.system.self_centered(z)
    obs_coeffs = basis.A.T @ obs_cross
    obs_recon_err = reconstruction_error_sq(basis, z)
    return ImplausibilityContext(
        basis=basis, emulators=emulators, obs_coeffs=obs_coeffs,
        obs_self=float(obs_self), obs_cross=obs_cross,
        obs_recon_err=obs_recon_err,
        bound_a=None if bound_a is None else float(bound_a),
        T2=None if T2 is None else float(T2), t_multiplier=t_multiplier)


def feature_sq_distance(spec: KernelSpec, f_x, z) -> float:
    """Exact feature-space squared distance k(z,z) + k(f,f) - 2 k(f,z)."""
    f_x = np.asarray(f_x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if f_x.size != z.size:
        raise ValueError("field lengths differ")
    d = (eval_kernel(spec, z, z) + eval_kernel(spec, f_x, f_x)
         - 2.0 * eval_kernel(spec, f_x, z))
    return max(float(d), 0.0) if d > -1e-10 else float(d)


def _clamp_mean_form(ctx: ImplausibilityContext, value: float) -> float:
    tol = 1e-8 * abs(ctx.obs_self)
    if value < -tol:
        raise ValueError(f"implausibility {value} below tolerance (context inconsistent)")
    return max(float(value), 0.0)


def implausibility_mean_from(ctx: ImplausibilityContext, mean_coeffs) -> float:
    """k_tilde(z,z) + m^T m - 2 m^T C_q(z) for an explicit mean vector m."""
    m = np.asarray(mean_coeffs, dtype=float).ravel()
    val = ctx.obs_self + m @ m - 2.0 * m @ ctx.obs_coeffs
    return _clamp_mean_form(ctx, val)


def implausibility_mean(ctx: ImplausibilityContext, x) -> float:
    mean, _ = ctx.emulators.predict(np.asarray(x, dtype=float))
    return implausibility_mean_from(ctx, mean)


def variable_threshold_from(ctx: ImplausibilityContext, var_coeffs) -> float:
    """T = s + t sqrt(2 s^2) + a with s the summed coefficient variance."""
    if ctx.bound_a is None:
        raise ValueError("bound a not set on context")
    s = float(np.sum(np.asarray(var_coeffs, dtype=float)))
    return s + ctx.t_multiplier * np.sqrt(2.0 * s * s) + ctx.bound_a


def variable_threshold(ctx: ImplausibilityContext, x) -> float:
    _, var = ctx.emulators.predict(np.asarray(x, dtype=float))
    return variable_threshold_from(ctx, var)


def implausibility_scaled_from(ctx: ImplausibilityContext, mean_coeffs,
                               var_coeffs) -> float:
    """Variance-scaled coefficient distance plus the truncation residual.

    sum_k (C_k(z) - m_k)^2 / (1 + v_k) + ||eps_z||^2; the q x q inverse is
    diagonal so it reduces to the elementwise form.
    """
    m = np.asarray(mean_coeffs, dtype=float).ravel()
    v = np.asarray(var_coeffs, dtype=float).ravel()
    diff = ctx.obs_coeffs - m
    return float(np.sum(diff * diff / (1.0 + v)) + ctx.obs_recon_err)


def implausibility_scaled(ctx: ImplausibilityContext, x) -> float:
    mean, var = ctx.emulators.predict(np.asarray(x, dtype=float))
    return implausibility_scaled_from(ctx, mean, var)


def standard_implausibility(z, mean_f, total_cov) -> float:
    """Mahalanobis distance (z - E{f})^T V^{-1} (z - E{f}) via factorization."""
    z = np.asarray(z, dtype=float).ravel()
    mean_f = np.asarray(mean_f, dtype=float).ravel()
    diff = z - mean_f
    V = np.asarray(total_cov, dtype=float)
    if V.ndim == 0:
        V = float(V) * np.eye(diff.size)
    try:
        cf = cho_factor(V, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("total covariance not positive definite") from exc
    return float(diff @ cho_solve(cf, diff))


def coefficient_implausibility(obs_coeffs, mean_coeffs, var_coeffs,
                               err_cov, disc_cov) -> float:
    """Coefficient-space Mahalanobis with emulator, error and discrepancy covs."""
    cz = np.asarray(obs_coeffs, dtype=float).ravel()
    m = np.asarray(mean_coeffs, dtype=float).ravel()
    q = cz.size
    V = np.diag(np.asarray(var_coeffs, dtype=float).ravel())
    for piece in (err_cov, disc_cov):
        piece = np.asarray(piece, dtype=float)
        if piece.ndim == 0:
            piece = float(piece) * np.eye(q)
        V = V + piece
    diff = cz - m
    try:
        cf = cho_factor(V, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("inner covariance not positive definite") from exc
    return float(diff @ cho_solve(cf, diff))


def derive_truncation_bound(mode: str, *, t_star_star=None, basis=None, z=None,
                            unacceptable_fields=None) -> float:
    """Bound a for the variable threshold.

    'from_tss' passes the fitted selection threshold through; 'from_unacceptable'
    takes the smallest projected feature distance among unacceptable runs:
    min over X^U of k_tilde(z,z) + C^T C - 2 C^T C_q(z).
    """
    if mode == "from_tss":
        if t_star_star is None:
            raise ValueError("t_star_star required for mode 'from_tss'")
        return float(t_star_star)
    if mode != "from_unacceptable":
        raise ValueError(f"unknown mode {mode!r}")
    if basis is None or z is None:
        raise ValueError("basis and z required for mode 'from_unacceptable'")
    F_u = np.asarray(unacceptable_fields, dtype=float)
    if F_u.ndim != 2 or F_u.shape[1] == 0:
        raise ValueError("no unacceptable runs to derive the bound from")
    C = project_many(basis, F_u)                       # q x m
    obs_cross = basis.system.cross(z)
    cz = basis.A.T @ obs_cross
    obs_self = basis.system.self_centered(z)
    vals = obs_self + np.sum(C * C, axis=0) - 2.0 * (cz @ C)
    return float(np.maximum(vals, 0.0).min())


def derive_t2(ctx: ImplausibilityContext, X, coeffs, unacceptable_indices,
              config: GpConfig = None, seed=0):
    """Smallest leave-one-out imp_f2 over the unacceptable members.

    For each x^U the q coefficient emulators are refitted from scratch
    (hyperparameters included) without that member, then imp_f2 is evaluated
    there. Returns (T2, per-member values). Deterministic for a fixed seed.
    """
    config = config or GpConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    idx = np.asarray(unacceptable_indices, dtype=int).ravel()
    if idx.size == 0:
        raise ValueError("no unacceptable members")
    n, q = coeffs.shape
    values = []
    for i in idx:
        mask = np.arange(n) != i
        means = np.empty(q)
        variances = np.empty(q)
        for k in range(q):
            try:
                g = fit_gp(X[mask], coeffs[mask, k], config,
                           seed=coefficient_seed(seed, k, member=int(i)))
            except Exception as exc:
                raise RuntimeError(f"member {i}, coefficient {k + 1}: {exc}") from exc
            means[k], variances[k] = predict(g, X[i])
        values.append(implausibility_scaled_from(ctx, means, variances))
    return float(min(values)), np.array(values)


# -- batch evaluation ---------------------------------------------------------

def evaluate_candidates(ctx: ImplausibilityContext, X):
    """Vectorized imp_f1, T(x), imp_f2 and NROY flags over design rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    means, variances = ctx.emulators.predict_many(X)
    mm = np.sum(means * means, axis=1)
    if1 = ctx.obs_self + mm - 2.0 * means @ ctx.obs_coeffs
    tol = 1e-8 * abs(ctx.obs_self)
    if np.any(if1 < -tol):
        raise ValueError("implausibility below tolerance (context inconsistent)")
    if1 = np.maximum(if1, 0.0)
    s = np.sum(variances, axis=1)
    T = (s + ctx.t_multiplier * np.sqrt(2.0) * s + ctx.bound_a
         if ctx.bound_a is not None else np.full(X.shape[0], np.nan))
    diff = ctx.obs_coeffs[None, :] - means
    if2 = np.sum(diff * diff / (1.0 + variances), axis=1) + ctx.obs_recon_err
    nroy = np.ones(X.shape[0], dtype=bool)
    if ctx.bound_a is not None:
        nroy &= if1 <= T
    if ctx.T2 is not None:
        nroy &= if2 <= ctx.T2
    return {"imp_f1": if1, "threshold": T, "imp_f2": if2, "nroy": nroy}


def candidate_table_text(X, result) -> str:
    """Delimited table: coordinates, imp_f1, T(x), imp_f2, nroy flag."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    p = X.shape[1]
    header = (",".join(f"x{d + 1}" for d in range(p))
              + ",imp_f1,threshold,imp_f2,nroy")
    lines = [header]
    for i in range(X.shape[0]):
        coords = ",".join(frepr(v) for v in X[i])
        lines.append(f"{coords},{frepr(result['imp_f1'][i])},"
                     f"{frepr(result['threshold'][i])},"
                     f"{frepr(result['imp_f2'][i])},{int(result['nroy'][i])}")
    return "\n".join(lines) + "\n"
