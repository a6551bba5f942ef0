"""Universal-kriging Gaussian processes for the KPCA coefficients.

One GP per retained coefficient over the scaled input cube. Marginal
likelihood is profiled: for fixed correlation lengths, beta comes from
generalized least squares and sigma^2 in closed form, so the optimizer only
searches the length scales (log space, multi-start L-BFGS-B).

Correlation c(x, x') = exp(-sum_d ((x_d - x'_d) / l_d)^2), matching the
convention used for the weight-matrix grid axes. The nugget is relative: the
training covariance is sigma^2 (C + nugget I).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .ensemble import frepr

DEFAULT_NUGGET = 1e-8
LOG_LENGTH_BOUNDS = (np.log(0.05), np.log(50.0))
SIGMA_SQ_FLOOR = 1e-30


@dataclass(frozen=True)
class GpConfig:
    mean_basis: str = "constant"          # or "linear"
    nugget: float = DEFAULT_NUGGET
    multi_starts: int = 10
    length_bounds: tuple = (0.05, 50.0)

    def __post_init__(self):
        if self.mean_basis not in ("constant", "linear"):
            raise ValueError("mean_basis must be 'constant' or 'linear'")
        if self.nugget < 0:
            raise ValueError("nugget must be >= 0")
        if self.multi_starts < 1:
            raise ValueError("multi_starts must be >= 1")
        lo, hi = self.length_bounds
        if not 0 < lo < hi:
            raise ValueError("length bounds must satisfy 0 < lo < hi")


def regressors(config: GpConfig, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if config.mean_basis == "constant":
        return np.ones((X.shape[0], 1))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def correlation(lengths, X, Y=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    ls = np.asarray(lengths, dtype=float)
    d2 = np.zeros((X.shape[0], Y.shape[0]))
    for d in range(X.shape[1]):
        diff = (X[:, d, None] - Y[None, :, d]) / ls[d]
        d2 += diff * diff
    return np.exp(-d2)


def _chol_with_escalation(R):
    """Cholesky of R, adding an escalating diagonal shift only on failure."""
    eps = 0.0
    base = float(np.mean(np.diag(R)))
    for _ in range(12):
        try:
            cf = cho_factor(R + eps * np.eye(R.shape[0]), lower=True)
            return cf, eps
        except np.linalg.LinAlgError:
            eps = 1e-12 * base if eps == 0.0 else eps * 10.0
    raise np.linalg.LinAlgError("training covariance not factorizable")


@dataclass(frozen=True)
class TrainedGp:
    config: GpConfig
    X: np.ndarray                 # n x p scaled design
    y: np.ndarray                 # length n targets
    lengths: np.ndarray           # fitted per-input correlation lengths
    beta: np.ndarray
    sigma_sq: float
    solver_jitter: float          # diagonal shift the factorization needed
    log_likelihood: float
    _chol: tuple = field(repr=False, default=None)

    @property
    def n(self):
        return self.X.shape[0]

    def r_solve(self, B):
        return cho_solve(self._chol, B)


def _profiled_ml(config: GpConfig, X, y, H, log_lengths):
    """(log marginal likelihood, beta, sigma_sq, chol, jitter) at fixed lengths."""
    n = y.size
    R = correlation(np.exp(log_lengths), X)
    R[np.diag_indices_from(R)] += config.nugget
    cf, eps = _chol_with_escalation(R)
    Ri_H = cho_solve(cf, H)
    Ri_y = cho_solve(cf, y)
    M = H.T @ Ri_H
    try:
        beta = np.linalg.solve(M, H.T @ Ri_y)
    except np.linalg.LinAlgError:
        return -np.inf, None, None, None, eps
    r = y - H @ beta
    sigma_sq = max(float(r @ cho_solve(cf, r)) / n, SIGMA_SQ_FLOOR)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    ll = -0.5 * n * np.log(sigma_sq) - 0.5 * logdet
    if not np.isfinite(ll):
        return -np.inf, None, None, None, eps
    return ll, beta, sigma_sq, cf, eps


def fit_gp(X, y, config: GpConfig = None, seed=0) -> TrainedGp:
    """Maximum marginal likelihood fit, deterministic for a fixed seed.

    L-BFGS-B over log lengths from >= 10 seeded starts (config.multi_starts,
    floored at 10); the best final likelihood wins, first winner on ties.
    """
    config = config or GpConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise ValueError("targets length does not match design rows")
    if np.unique(X, axis=0).shape[0] != n:
        raise ValueError("design contains duplicate rows")
    H = regressors(config, X)
    if n <= H.shape[1]:
        raise ValueError("need more runs than mean-basis regressors")
    if np.linalg.matrix_rank(H) < H.shape[1]:
        raise ValueError("singular regressor matrix")

    lo, hi = np.log(config.length_bounds[0]), np.log(config.length_bounds[1])
    bounds = [(lo, hi)] * p
    n_starts = max(10, config.multi_starts)
    rng = np.random.default_rng(seed)
    starts = [np.full(p, 0.5 * (lo + hi))]
    starts += [rng.uniform(lo, hi, size=p) for _ in range(n_starts - 1)]

    def negative_ll(log_lengths):
        return -_profiled_ml(config, X, y, H, log_lengths)[0]

    best = None
    for s in starts:
        res = minimize(negative_ll, s, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 60})
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise RuntimeError("likelihood non-finite at every start")

    ll, beta, sigma_sq, cf, eps = _profiled_ml(config, X, y, H, best.x)
    if beta is None:
        raise RuntimeError("likelihood degenerate at the optimum")
    return TrainedGp(config=config, X=X, y=y, lengths=np.exp(best.x),
                     beta=beta, sigma_sq=sigma_sq, solver_jitter=eps,
                     log_likelihood=float(ll), _chol=cf)


def predict_many(gp: TrainedGp, Xs):
    """Posterior mean and variance at each row of Xs (clamped >= 0)."""
    Xs = np.atleast_2d(np.asarray(Xs, dtype=float))
    Hs = regressors(gp.config, Xs)
    c = correlation(gp.lengths, gp.X, Xs)          # n x m
    Ri_c = gp.r_solve(c)
    resid = gp.y - regressors(gp.config, gp.X) @ gp.beta
    mean = Hs @ gp.beta + c.T @ gp.r_solve(resid)
    var = gp.sigma_sq * (1.0 + gp.config.nugget - np.sum(c * Ri_c, axis=0))
    if np.any(var < -1e-10 * gp.sigma_sq):
        raise ValueError("predictive variance below tolerance")
    return mean, np.maximum(var, 0.0)


def predict(gp: TrainedGp, x):
    mean, var = predict_many(gp, np.asarray(x, dtype=float).reshape(1, -1))
    return float(mean[0]), float(var[0])


def loo_predict(X, y, config: GpConfig, held_out: int, seed=0):
    """Full refit (hyperparameters included) without one member, predict there."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n < 3:
        raise ValueError("leave-one-out needs at least 3 members")
    if not 0 <= held_out < n:
        raise ValueError("held-out index outside design")
    mask = np.arange(n) != held_out
    gp = fit_gp(X[mask], y[mask], config, seed=seed)
    return predict(gp, X[held_out])


@dataclass(frozen=True)
class CoefficientEmulators:
    gps: tuple                    # one TrainedGp per coefficient

    @property
    def q(self):
        return len(self.gps)

    def predict(self, x):
        """E{C(x)} and diagonal Var{C(x)}, both length q."""
        means, variances = self.predict_many(np.asarray(x).reshape(1, -1))
        return means[0], variances[0]

    def predict_many(self, Xs):
        """m x q mean and variance tables."""
        out_m, out_v = [], []
        for gp in self.gps:
            m, v = predict_many(gp, Xs)
            out_m.append(m)
            out_v.append(v)
        return np.column_stack(out_m), np.column_stack(out_v)


def coefficient_seed(seed, k, member=None) -> int:
    """Stable per-coefficient (optionally per-member) fitting seed."""
    words = [seed, k] if member is None else [seed, member, k]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def emulate_coefficients(X, coeffs, config: GpConfig = None,
                         seed=0) -> CoefficientEmulators:
    """Independent GP per coefficient column; errors name the column."""
    config = config or GpConfig()
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    gps = []
    for k in range(coeffs.shape[1]):
        try:
            gps.append(fit_gp(X, coeffs[:, k], config, seed=coefficient_seed(seed, k)))
        except Exception as exc:
            raise RuntimeError(f"coefficient {k + 1}: {exc}") from exc
    return CoefficientEmulators(gps=tuple(gps))


# -- emulator text document ---------------------------------------------------
# everything needed to reproduce predictions exactly: config, hyperparameters,
# beta, and the training data inline at full precision

def gp_to_text(gp: TrainedGp) -> str:
    lines = [
        f"mean_basis {gp.config.mean_basis}",
        f"nugget {frepr(gp.config.nugget)}",
        f"multi_starts {gp.config.multi_starts}",
        f"length_bounds {frepr(gp.config.length_bounds[0])},{frepr(gp.config.length_bounds[1])}",
        "lengths " + ",".join(frepr(v) for v in gp.lengths),
        "beta " + ",".join(frepr(v) for v in gp.beta),
        f"sigma_sq {frepr(gp.sigma_sq)}",
        f"solver_jitter {frepr(gp.solver_jitter)}",
        f"log_likelihood {frepr(gp.log_likelihood)}",
    ]
    for row in gp.X:
        lines.append("x " + ",".join(frepr(v) for v in row))
    lines.append("y " + ",".join(frepr(v) for v in gp.y))
    return "\n".join(lines) + "\n"


def gp_from_text(text: str) -> TrainedGp:
    kv = {}
    xs = []
    for line in text.strip().splitlines():
        key, _, value = line.partition(" ")
        if key == "x":
            xs.append([float(s) for s in value.split(",")])
        else:
            kv[key] = value.strip()
    lb = tuple(float(s) for s in kv["length_bounds"].split(","))
    config = GpConfig(mean_basis=kv["mean_basis"], nugget=float(kv["nugget"]),
                      multi_starts=int(kv["multi_starts"]), length_bounds=lb)
    X = np.array(xs)
    y = np.array([float(s) for s in kv["y"].split(",")])
    lengths = np.array([float(s) for s in kv["lengths"].split(",")])
    beta = np.array([float(s) for s in kv["beta"].split(",")])
    jitter = float(kv["solver_jitter"])
    R = correlation(lengths, X)
    R[np.diag_indices_from(R)] += config.nugget + jitter
    cf = cho_factor(R, lower=True)
    return TrainedGp(config=config, X=X, y=y, lengths=lengths, beta=beta,
                     sigma_sq=float(kv["sigma_sq"]),
                     solver_jitter=jitter,
                     log_likelihood=float(kv["log_likelihood"]), _chol=cf)


def emulators_to_text(emus: CoefficientEmulators) -> str:
    parts = [f"q {emus.q}"]
    for k, gp in enumerate(emus.gps):
        parts.append(f"[gp {k + 1}]")
        parts.append(gp_to_text(gp).rstrip("\n"))
    return "\n".join(parts) + "\n"


def emulators_from_text(text: str) -> CoefficientEmulators:
    lines = text.strip().splitlines()
    if not lines or not lines[0].startswith("q "):
        raise ValueError("malformed emulator document")
    gps = []
    block = []
    for line in lines[1:]:
        if line.startswith("[gp "):
            if block:
                gps.append(gp_from_text("\n".join(block)))
            block = []
        else:
            block.append(line)
    if block:
        gps.append(gp_from_text("\n".join(block)))
    if len(gps) != int(lines[0].split()[1]):
        raise ValueError("emulator document truncated")
    return CoefficientEmulators(gps=tuple(gps))
