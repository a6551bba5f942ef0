"""Wave orchestration: NROY predicates, volume estimates, next designs, lineage.

A wave's NROY predicate is the conjunction of its own implausibility cut with
every earlier wave's predicate, so wave-k membership is a subset of wave-(k-1)
membership by construction. Each wave persists into its own directory with
enough state to replay it exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import (Design, Ensemble, frepr, load_ensemble_dir,
                       save_ensemble)
from .gp import CoefficientEmulators, GpConfig, emulate_coefficients, \
    emulators_from_text, emulators_to_text
from .implausibility import (ImplausibilityContext, build_context, derive_t2,
                             evaluate_candidates)
from .kernels import CenteredKernelSystem, kernel_spec_from_text
from .kpca import (KpcaBasis, basis_from_text, basis_to_text,
                   coefficients_to_text, fit_kpca, training_coefficients)
from .sampling import greedy_maximin_subset, maximin_lhc
from .selection import (Classification, KernelFit, kernel_fit_to_text,
                        load_classification, optimize_kernel, save_classification,
                        save_i0_table)


class WaveStageError(RuntimeError):
    """Pipeline failure labeled with the stage that raised it."""

    def __init__(self, stage, original):
        super().__init__(f"stage '{stage}': {original}")
        self.stage = stage
        self.original = original


@dataclass(frozen=True)
class WavePredicate:
    mode: str                               # "if1" or "if2"
    context: ImplausibilityContext
    prior: tuple = ()

    def __post_init__(self):
        if self.mode not in ("if1", "if2"):
            raise ValueError("mode must be 'if1' or 'if2'")

    def member_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        res = evaluate_candidates(self.context, X)
        if self.mode == "if1":
            if self.context.bound_a is None:
                raise ValueError("IF1 predicate needs bound a on its context")
            ok = res["imp_f1"] <= res["threshold"]
        else:
            if self.context.T2 is None:
                raise ValueError("IF2 predicate needs T2 on its context")
            ok = res["imp_f2"] <= self.context.T2
        for p in self.prior:
            ok &= p.member_many(X)
        return ok

    @property
    def p(self):
        return self.context.emulators.gps[0].X.shape[1]


def nroy_member(pred: WavePredicate, x) -> bool:
    return bool(pred.member_many(np.asarray(x, dtype=float).reshape(1, -1))[0])


def nroy_fraction(pred: WavePredicate, N=10_000, seed=0):
    """Uniform Monte Carlo membership proportion with binomial standard error."""
    if N < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(N, pred.p))
    f = float(pred.member_many(X).mean())
    return f, float(np.sqrt(f * (1.0 - f) / N))


def next_wave_design(pred: WavePredicate, n_new, candidate_budget=4000,
                     seed=0) -> Design:
    """Space-filling design inside the current NROY space.

    Maximin LHC candidates are filtered by membership then greedily thinned
    to n_new by maximin distance.
    """
    if n_new < 1:
        raise ValueError("n_new must be >= 1")
    cands = maximin_lhc(candidate_budget, pred.p, seed=seed, restarts=3)
    keep = pred.member_many(cands)
    kept = cands[keep]
    if kept.shape[0] < n_new:
        raise RuntimeError(
            f"NROY too small for budget: {kept.shape[0]} of {n_new} members "
            f"found in {candidate_budget} candidates")
    return Design.from_scaled(kept[greedy_maximin_subset(kept, n_new)])


@dataclass(frozen=True)
class WaveConfig:
    q: Optional[int] = None                  # None -> module default (5)
    variance_fraction: Optional[float] = None
    alpha: float = 0.8
    selection_budget: int = 600
    search_space: object = None
    gp: GpConfig = field(default_factory=GpConfig)
    t_multiplier: float = 3.0
    predicate_mode: str = "if1"
    mc_samples: int = 10_000


@dataclass(frozen=True)
class WaveRecord:
    wave_id: int
    ensemble: Ensemble
    classification: Classification
    fit: KernelFit
    basis: KpcaBasis
    coeffs: np.ndarray
    emulators: CoefficientEmulators
    context: ImplausibilityContext
    predicate: WavePredicate
    nroy_fraction: float
    nroy_se: float
    seed: int
    config: WaveConfig


def _subseed(seed, tag) -> int:
    return int(np.random.SeedSequence([int(seed), tag]).generate_state(1)[0])


def run_wave(prior: Optional[WaveRecord], ensemble: Ensemble,
             classification: Classification, config: WaveConfig = None,
             seed=0, store_dir=None) -> WaveRecord:
    """One refocusing cycle: kernel fit, basis, emulators, bounds, NROY size.

    Stage failures re-raise as WaveStageError naming the stage. Deterministic
    given seed and inputs; if ``store_dir`` is given the record is persisted
    there (byte-identical across reruns).
    """
    config = config or WaveConfig()
    wave_id = 1 if prior is None else prior.wave_id + 1
    design, outputs, observation = ensemble
    if classification.n != outputs.n:
        raise ValueError("classification does not cover the ensemble")

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:
            raise WaveStageError(name, exc) from exc

    fit = stage("kernel-selection", lambda: optimize_kernel(
        outputs, observation, classification, config.search_space,
        alpha=config.alpha, seed=_subseed(seed, 1),
        budget=config.selection_budget))
    system = stage("kernel-matrix", lambda: CenteredKernelSystem.build(
        fit.spec, outputs.fields))
    basis = stage("kpca", lambda: fit_kpca(
        system, q=config.q, variance_fraction=config.variance_fraction))
    coeffs = stage("coefficients", lambda: training_coefficients(basis))
    emulators = stage("emulation", lambda: emulate_coefficients(
        design.points, coeffs, config.gp, seed=_subseed(seed, 2)))
    ctx = stage("bounds", lambda: build_context(
        basis, emulators, observation.z, bound_a=fit.T_star_star,
        t_multiplier=config.t_multiplier))
    T2, t2_values = stage("bounds", lambda: derive_t2(
        ctx, design.points, coeffs, classification.unacceptable_indices,
        config.gp, seed=_subseed(seed, 3)))
    ctx = ctx.with_bounds(T2=T2)
    predicate = WavePredicate(config.predicate_mode, ctx,
                              prior=() if prior is None else
                              prior.predicate.prior + (prior.predicate,))
    frac, se = stage("nroy", lambda: nroy_fraction(
        predicate, N=config.mc_samples, seed=_subseed(seed, 4)))
    record = WaveRecord(wave_id=wave_id, ensemble=ensemble,
                        classification=classification, fit=fit, basis=basis,
                        coeffs=coeffs, emulators=emulators, context=ctx,
                        predicate=predicate, nroy_fraction=frac, nroy_se=se,
                        seed=int(seed), config=config)
    if store_dir is not None:
        stage("persist", lambda: save_wave(record, store_dir))
    return record


# -- wave store ---------------------------------------------------------------

def save_wave(record: WaveRecord, directory) -> dict:
    os.makedirs(directory, exist_ok=True)
    j = lambda name: os.path.join(directory, name)
    outputs = record.ensemble.outputs
    save_ensemble(record.ensemble, directory)
    save_classification(record.classification, j("classification.csv"))
    with open(j("kernel.txt"), "w") as fh:
        fh.write(kernel_fit_to_text(record.fit))
    save_i0_table(record.fit, j("i0.csv"))
    with open(j("basis.txt"), "w") as fh:
        fh.write(basis_to_text(record.basis))
    with open(j("coefficients.csv"), "w") as fh:
        fh.write(coefficients_to_text(record.coeffs))
    with open(j("emulators.txt"), "w") as fh:
        fh.write(emulators_to_text(record.emulators))
    ctx = record.context
    with open(j("thresholds.txt"), "w") as fh:
        fh.write(f"bound_a {frepr(ctx.bound_a)}\n"
                 f"T2 {frepr(ctx.T2)}\n"
                 f"t_multiplier {frepr(ctx.t_multiplier)}\n"
                 f"predicate_mode {record.predicate.mode}\n")
    with open(j("summary.txt"), "w") as fh:
        fh.write(f"wave_id {record.wave_id}\n"
                 f"n_members {outputs.n}\n"
                 f"q {record.basis.q}\n"
                 f"score {frepr(record.fit.score)}\n"
                 f"t_star_star {frepr(record.fit.T_star_star)}\n"
                 f"nroy_fraction {frepr(record.nroy_fraction)}\n"
                 f"nroy_se {frepr(record.nroy_se)}\n"
                 f"mc_samples {record.config.mc_samples}\n")
    with open(j("seed.txt"), "w") as fh:
        fh.write(f"{record.seed}\n")
    return {name: j(name) for name in os.listdir(directory)}


def load_wave(directory, prior: Optional[WaveRecord] = None) -> WaveRecord:
    """Rebuild a WaveRecord from its store directory.

    Kernel matrices and observation-side projections are recomputed (they are
    deterministic); emulators reload from their document so predictions match
    the original run exactly.
    """
    j = lambda name: os.path.join(directory, name)
    ensemble = load_ensemble_dir(directory)
    outputs, observation = ensemble.outputs, ensemble.observation
    classification = load_classification(j("classification.csv"), n=outputs.n)
    kv = {}
    with open(j("kernel.txt")) as fh:
        kernel_text = fh.read()
    for line in kernel_text.strip().splitlines():
        key, _, value = line.partition(" ")
        kv[key] = value
    spec = kernel_spec_from_text(kernel_text, observation.obs_cov,
                                 outputs.grid_shape, l=outputs.l)
    system = CenteredKernelSystem.build(spec, outputs.fields)
    with open(j("basis.txt")) as fh:
        basis = basis_from_text(fh.read(), system)
    coeffs = training_coefficients(basis)
    with open(j("emulators.txt")) as fh:
        emulators = emulators_from_text(fh.read())
    th = {}
    with open(j("thresholds.txt")) as fh:
        for line in fh.read().strip().splitlines():
            key, _, value = line.partition(" ")
            th[key] = value
    ctx = build_context(basis, emulators, observation.z,
                        bound_a=float(th["bound_a"]), T2=float(th["T2"]),
                        t_multiplier=float(th["t_multiplier"]))
    predicate = WavePredicate(th["predicate_mode"], ctx,
                              prior=() if prior is None else
                              prior.predicate.prior + (prior.predicate,))
    summary = {}
    with open(j("summary.txt")) as fh:
        for line in fh.read().strip().splitlines():
            key, _, value = line.partition(" ")
            summary[key] = value
    with open(j("seed.txt")) as fh:
        seed = int(fh.read().strip())
    idx = classification.classified_indices
    labels = classification.labels[idx]
    fit = KernelFit(spec=spec, T_star_star=float(kv["t_star_star"]),
                    score=float(kv["score"]), alpha=float(kv["alpha"]),
                    classified_indices=idx, classified_labels=labels,
                    i0=np.array([]), N_A=int(kv["n_acceptable_retained"]),
                    N_U=int(kv["n_unacceptable_retained"]), n_evaluations=0)
    return WaveRecord(wave_id=int(summary["wave_id"]), ensemble=ensemble,
                      classification=classification, fit=fit, basis=basis,
                      coeffs=coeffs, emulators=emulators, context=ctx,
                      predicate=predicate,
                      nroy_fraction=float(summary["nroy_fraction"]),
                      nroy_se=float(summary["nroy_se"]), seed=seed,
                      config=WaveConfig())


def wave_report(records) -> str:
    """Per-wave NROY summary with relative change and a stopping advisory."""
    lines = ["wave  n_runs  score   nroy_fraction  change"]
    prev = None
    for rec in records:
        change = "" if prev is None else f"{(rec.nroy_fraction - prev) / max(prev, 1e-12):+.1%}"
        lines.append(f"{rec.wave_id:4d}  {rec.ensemble.outputs.n:6d}  "
                     f"{rec.fit.score:.4f}  {rec.nroy_fraction:.4f} "
                     f"(se {rec.nroy_se:.4f})  {change}")
        prev = rec.nroy_fraction
    if len(records) >= 2:
        a, b = records[-2].nroy_fraction, records[-1].nroy_fraction
        if a > 0 and abs(b - a) / a < 0.10:
            lines.append("advisory: NROY change below 10% relative; "
                         "further waves may add little")
    return "\n".join(lines) + "\n"
