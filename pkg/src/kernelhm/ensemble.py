"""Containers and delimited-text I/O for designs, output ensembles and observations.

All downstream math treats simulator output as a flat length-l vector; an
optional grid shape (rows, cols, frames) is carried along purely so front ends
can render fields as heatmaps.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

# exact float64 round-trip through text
FLOAT_FMT = "%.17g"


def frepr(v) -> str:
    """Shortest decimal that round-trips the float64 exactly."""
    return repr(float(v))


def scale_inputs(raw, bounds):
    """Map each column of ``raw`` onto [-1, 1] using its (lower, upper) pair.

    Out-of-bounds values raise (identifying row and column) rather than clamp:
    silent clamping would corrupt emulator training.
    """
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = bounds[:, 0], bounds[:, 1]
    bad = np.nonzero(lo >= hi)[0]
    if bad.size:
        raise ValueError(f"bounds for column {bad[0]} have lower >= upper")
    outside = (raw < lo) | (raw > hi)
    if outside.any():
        r, c = map(int, np.argwhere(outside)[0])
        raise ValueError(
            f"design value {raw[r, c]} at row {r}, column {c} outside bounds "
            f"[{lo[c]}, {hi[c]}]"
        )
    return 2.0 * (raw - lo) / (hi - lo) - 1.0


def unscale_inputs(scaled, bounds):
    """Inverse of :func:`scale_inputs`."""
    scaled = np.atleast_2d(np.asarray(scaled, dtype=float))
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = bounds[:, 0], bounds[:, 1]
    return lo + (scaled + 1.0) * (hi - lo) / 2.0


def center_outputs(F):
    """Row-mean and centered copy of an l x n output matrix."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[1] < 2:
        raise ValueError("output matrix must be l x n with n >= 2")
    u = F.mean(axis=1)
    return u, F - u[:, None]


@dataclass(frozen=True)
class Design:
    """Scaled input design with its native-unit provenance.

    Attributes
    ----------
    names : tuple of str
        Parameter identifiers, one per column.
    raw_bounds : (p, 2) array
        Native-unit (lower, upper) per parameter.
    raw_points : (n, p) array
        Design in native units exactly as read from file.
    points : (n, p) array
        Design scaled to [-1, 1] per column.
    """

    names: tuple
    raw_bounds: np.ndarray
    raw_points: np.ndarray
    points: np.ndarray

    @classmethod
    def from_raw(cls, names, raw_bounds, raw_points):
        names = tuple(str(n) for n in names)
        raw_bounds = np.asarray(raw_bounds, dtype=float).reshape(-1, 2)
        raw_points = np.atleast_2d(np.asarray(raw_points, dtype=float))
        if raw_points.shape[0] < 2:
            raise ValueError("n >= 2 required")
        if raw_points.shape[1] != len(names):
            raise ValueError("design width does not match parameter names")
        if len(np.unique(raw_points, axis=0)) != raw_points.shape[0]:
            raise ValueError("duplicate design rows")
        points = scale_inputs(raw_points, raw_bounds)
        return cls(names, raw_bounds, raw_points, points)

    @classmethod
    def from_scaled(cls, points, names=None):
        """Wrap an already-scaled [-1,1]^p design (bounds become (-1,1))."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        p = points.shape[1]
        if names is None:
            names = tuple(f"x{i + 1}" for i in range(p))
        bounds = np.tile((-1.0, 1.0), (p, 1))
        return cls.from_raw(tuple(names), bounds, points.copy())

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def p(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class OutputEnsemble:
    """l x n output matrix with its row mean and centered copy."""

    fields: np.ndarray
    grid_shape: Optional[tuple]
    mean: np.ndarray
    centered: np.ndarray

    @classmethod
    def from_fields(cls, F, grid_shape=None):
        F = np.asarray(F, dtype=float)
        if F.ndim != 2 or F.shape[0] < 1:
            raise ValueError("outputs must be an l x n matrix")
        if grid_shape is not None:
            grid_shape = tuple(int(g) for g in grid_shape)
            if len(grid_shape) != 3 or int(np.prod(grid_shape)) != F.shape[0]:
                raise ValueError(
                    f"grid_shape {grid_shape} does not cover l={F.shape[0]} cells"
                )
        u, centered = center_outputs(F)
        return cls(F, grid_shape, u, centered)

    @property
    def l(self):
        return self.fields.shape[0]

    @property
    def n(self):
        return self.fields.shape[1]


@dataclass(frozen=True)
class Observation:
    """Observed field z plus optional observation-error covariance."""

    z: np.ndarray
    obs_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).ravel())
        if self.obs_cov is not None:
            cov = np.asarray(self.obs_cov, dtype=float)
            if cov.ndim == 0:
                cov = float(cov) * np.eye(self.z.size)
            if cov.shape != (self.z.size, self.z.size):
                raise ValueError("obs_cov shape does not match observation length")
            if not np.allclose(cov, cov.T, atol=1e-10 * max(1.0, np.abs(cov).max())):
                raise ValueError("obs_cov not symmetric")
            eig = np.linalg.eigvalsh(cov)
            if eig.min() < -1e-10 * max(np.trace(cov), 1.0):
                raise ValueError("obs_cov not positive semidefinite")
            object.__setattr__(self, "obs_cov", cov)


class Ensemble(NamedTuple):
    design: Design
    outputs: OutputEnsemble
    observation: Observation


def _read_delimited(path, skiprows=0):
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=skiprows, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"non-numeric cell in {path}: {exc}") from exc
    return arr


def save_design(design: Design, design_path, bounds_path):
    header = ",".join(design.names)
    np.savetxt(design_path, design.raw_points, delimiter=",", fmt=FLOAT_FMT,
               header=header, comments="")
    with open(bounds_path, "w") as fh:
        fh.write("name,lower,upper\n")
        for name, (lo, hi) in zip(design.names, design.raw_bounds):
            fh.write(f"{name},{FLOAT_FMT % lo},{FLOAT_FMT % hi}\n")


def load_design(design_path, bounds_path) -> Design:
    with open(design_path) as fh:
        names = tuple(s.strip() for s in fh.readline().strip().split(","))
    raw = _read_delimited(design_path, skiprows=1)
    by_name = {}
    with open(bounds_path) as fh:
        first = fh.readline()
        if first.strip().lower() != "name,lower,upper":
            fh.seek(0)
        for line in fh:
            if not line.strip():
                continue
            name, lo, hi = (s.strip() for s in line.split(","))
            by_name[name] = (float(lo), float(hi))
    missing = [n for n in names if n not in by_name]
    if missing:
        raise ValueError(f"bounds file missing parameter(s) {missing}")
    bounds = np.array([by_name[n] for n in names])
    return Design.from_raw(names, bounds, raw)


def save_outputs(F, path, grid_shape=None):
    np.savetxt(path, np.asarray(F, dtype=float), delimiter=",", fmt=FLOAT_FMT)
    if grid_shape is not None:
        with open(str(path) + ".grid", "w") as fh:
            fh.write(",".join(str(int(g)) for g in grid_shape) + "\n")


def load_outputs(path):
    F = _read_delimited(path)
    grid_shape = None
    sidecar = str(path) + ".grid"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            grid_shape = tuple(int(s) for s in fh.read().strip().split(","))
    return F, grid_shape


def save_observation(obs: Observation, obs_path, cov_path=None):
    np.savetxt(obs_path, obs.z, delimiter=",", fmt=FLOAT_FMT)
    if obs.obs_cov is not None:
        if cov_path is None:
            cov_path = str(obs_path) + ".cov"
        np.savetxt(cov_path, obs.obs_cov, delimiter=",", fmt=FLOAT_FMT)


def load_observation(obs_path, cov_path=None) -> Observation:
    z = _read_delimited(obs_path).ravel()
    if cov_path is None and os.path.exists(str(obs_path) + ".cov"):
        cov_path = str(obs_path) + ".cov"
    cov = None
    if cov_path is not None:
        cov = _read_delimited(cov_path)
        if cov.size == 1:
            # scalar variance shorthand
            cov = float(cov.ravel()[0]) * np.eye(z.size)
    return Observation(z, cov)


def load_ensemble(design_path, outputs_path, obs_path,
                  bounds_path=None, cov_path=None) -> Ensemble:
    """Load and validate a (design, outputs, observation) triple from files.

    ``bounds_path`` defaults to ``<design_path>.bounds``; an optional
    covariance is picked up from ``cov_path`` or ``<obs_path>.cov``.
    """
    if bounds_path is None:
        bounds_path = str(design_path) + ".bounds"
    design = load_design(design_path, bounds_path)
    F, grid_shape = load_outputs(outputs_path)
    if F.shape[1] != design.n:
        raise ValueError(
            f"output columns ({F.shape[1]}) do not match design rows ({design.n})"
        )
    outputs = OutputEnsemble.from_fields(F, grid_shape)
    obs = load_observation(obs_path, cov_path)
    if obs.z.size != outputs.l:
        raise ValueError(
            f"observation length ({obs.z.size}) does not match outputs l ({outputs.l})"
        )
    return Ensemble(design, outputs, obs)


def save_ensemble(ens: Ensemble, directory,
                  design_name="design.csv", outputs_name="outputs.csv",
                  obs_name="observation.csv"):
    """Write the triple under ``directory`` using the documented file formats."""
    os.makedirs(directory, exist_ok=True)
    dp = os.path.join(directory, design_name)
    save_design(ens.design, dp, dp + ".bounds")
    save_outputs(ens.outputs.fields, os.path.join(directory, outputs_name),
                 ens.outputs.grid_shape)
    save_observation(ens.observation, os.path.join(directory, obs_name))
    return {
        "design": dp,
        "bounds": dp + ".bounds",
        "outputs": os.path.join(directory, outputs_name),
        "observation": os.path.join(directory, obs_name),
    }


def load_ensemble_dir(directory) -> Ensemble:
    """Counterpart of :func:`save_ensemble` for a fixture directory."""
    return load_ensemble(
        os.path.join(directory, "design.csv"),
        os.path.join(directory, "outputs.csv"),
        os.path.join(directory, "observation.csv"),
    )
