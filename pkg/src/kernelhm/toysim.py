"""Synthetic band-on-a-grid simulator with an auto-labeling rule.

A Gaussian band of tunable center, width and amplitude sits on a rows x cols
grid, constant across columns. Acceptability depends only on width and
amplitude, never on the band's location, so ensembles labeled by the rule
exhibit the classic failure of plain Euclidean comparison: a shifted band is
penalized more than a featureless field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import Design, Ensemble, Observation, OutputEnsemble
from .sampling import maximin_lhc
from .selection import Classification


@dataclass(frozen=True)
class ToyConfig:
    rows: int = 20
    cols: int = 20
    # affine maps from x in [-1,1]^3
    center_offset: float = 10.0
    center_scale: float = 8.0
    width_base: float = 1.0
    width_scale: float = 0.5
    amp_offset: float = 0.6
    amp_scale: float = 0.4
    # observation band, center deliberately off any design value
    obs_center: float = 13.37
    obs_width: float = 1.2
    obs_amplitude: float = 0.95
    noise_var: float = 0.0025
    # acceptance window on (width, amplitude); location never enters
    width_window: tuple = (0.8, 1.6)
    amp_min: float = 0.7

    @property
    def l(self):
        return self.rows * self.cols

    @property
    def grid_shape(self):
        return (self.rows, self.cols, 1)

    def center(self, x1):
        return self.center_offset + self.center_scale * x1

    def width(self, x2):
        return self.width_base + self.width_scale * (x2 + 1.0)

    def amplitude(self, x3):
        return self.amp_offset + self.amp_scale * x3


def band_field(config: ToyConfig, center, width, amplitude) -> np.ndarray:
    """Row-major flattened field: amplitude * exp(-(i-center)^2 / (2 width^2))."""
    rows = np.arange(config.rows, dtype=float)
    profile = amplitude * np.exp(-((rows - center) ** 2) / (2.0 * width**2))
    return np.repeat(profile, config.cols)


def simulate(config: ToyConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != 3 or np.abs(x).max() > 1.0 + 1e-12:
        raise ValueError("toy input must lie in [-1,1]^3")
    return band_field(config, config.center(x[0]), config.width(x[1]),
                      config.amplitude(x[2]))


def observation_field(config: ToyConfig) -> np.ndarray:
    return band_field(config, config.obs_center, config.obs_width,
                      config.obs_amplitude)


def make_observation(config: ToyConfig) -> Observation:
    cov = None
    if config.noise_var > 0:
        cov = config.noise_var * np.eye(config.l)
    return Observation(observation_field(config), cov)


def auto_label(config: ToyConfig, design: Design, wave_id=1) -> Classification:
    """Label 1 iff width and amplitude fall in the acceptance window, else 2."""
    w = config.width(design.points[:, 1])
    a = config.amplitude(design.points[:, 2])
    lo, hi = config.width_window
    ok = (w >= lo) & (w <= hi) & (a >= config.amp_min)
    labels = np.where(ok, 1, 2)
    return Classification(labels=labels, wave_id=wave_id, annotator="auto",
                          timestamp="")


def make_design(n, seed, p=3) -> Design:
    return Design.from_scaled(maximin_lhc(n, p, seed))


def make_ensemble(config: ToyConfig, n, seed, design: Design = None) -> Ensemble:
    if design is None:
        design = make_design(n, seed)
    F = np.column_stack([simulate(config, x) for x in design.points])
    outputs = OutputEnsemble.from_fields(F, config.grid_shape)
    return Ensemble(design, outputs, make_observation(config))


def binary_line_fixture():
    """10x10 fixture: observation = ones on the bottom row.

    Returns (z, run_all_zero, run_line_row5), each flattened row-major.
    Against identity covariance the zero field scores 10 and the misplaced
    line scores 20, so the featureless run looks closer.
    """
    z = np.zeros((10, 10))
    z[9, :] = 1.0
    run_a = np.zeros((10, 10))
    run_b = np.zeros((10, 10))
    run_b[5, :] = 1.0
    return z.ravel(), run_a.ravel(), run_b.ravel()
