import filecmp
import os
from types import SimpleNamespace

import numpy as np
import pytest

from kernelhm.ensemble import Design, Ensemble, Observation, OutputEnsemble
from kernelhm.gp import GpConfig
from kernelhm.sampling import maximin_lhc
from kernelhm.selection import Classification
from kernelhm.waves import (WaveConfig, WavePredicate, WaveStageError,
                            load_wave, next_wave_design, nroy_fraction,
                            nroy_member, run_wave, save_wave, wave_report)


class StubPredicate:
    """Duck-typed predicate with a known membership region."""

    p = 2

    def __init__(self, rule):
        self.rule = rule

    def member_many(self, X):
        return self.rule(np.atleast_2d(np.asarray(X, dtype=float)))


half_space = StubPredicate(lambda X: X[:, 0] <= 0.0)
everything = StubPredicate(lambda X: np.ones(X.shape[0], dtype=bool))
nothing = StubPredicate(lambda X: np.zeros(X.shape[0], dtype=bool))


def synthetic_wave_inputs(n=12, l=6, seed=0):
    """Tiny two-input ensemble whose first coordinate controls the mismatch."""
    pts = maximin_lhc(n, 2, seed=seed)
    design = Design.from_scaled(pts)
    grid = np.linspace(0.0, 1.0, l)
    z = np.sin(3.0 * grid)
    cols = [z + x0 * np.cos(2.0 * grid) + 0.3 * x1 * grid for x0, x1 in pts]
    outputs = OutputEnsemble.from_fields(np.column_stack(cols),
                                         grid_shape=(l, 1, 1))
    labels = [1 if abs(x0) < 0.5 else 2 for x0, _ in pts]
    ens = Ensemble(design, outputs, Observation(z, 0.01))
    return ens, Classification(labels=labels)


FAST = WaveConfig(q=2, selection_budget=80, mc_samples=500)


@pytest.fixture(scope="module")
def wave_one():
    ens, cls_ = synthetic_wave_inputs()
    assert cls_.acceptable_indices.size and cls_.unacceptable_indices.size
    return run_wave(None, ens, cls_, FAST, seed=3), ens, cls_


# -- NROY volume estimation ------------------------------------------------------

def test_fraction_of_trivial_predicates():
    f, se = nroy_fraction(everything, N=1000, seed=0)
    assert f == 1.0 and se == 0.0
    f, se = nroy_fraction(nothing, N=1000, seed=0)
    assert f == 0.0 and se == 0.0


def test_fraction_of_half_space():
    f, se = nroy_fraction(half_space, N=10_000, seed=1)
    assert se == pytest.approx(np.sqrt(f * (1 - f) / 10_000))
    assert abs(f - 0.5) <= 3.0 * se


def test_fraction_consistent_across_seeds():
    f1, se1 = nroy_fraction(half_space, N=10_000, seed=2)
    f2, se2 = nroy_fraction(half_space, N=10_000, seed=3)
    assert abs(f1 - f2) <= 4.0 * np.sqrt(se1 ** 2 + se2 ** 2)


def test_fraction_needs_enough_samples():
    with pytest.raises(ValueError, match="at least 100"):
        nroy_fraction(half_space, N=50)


# -- next design -------------------------------------------------------------------

def test_next_design_members_satisfy_the_predicate():
    design = next_wave_design(half_space, 8, candidate_budget=500, seed=4)
    pts = design.points
    assert pts.shape == (8, 2)
    assert np.all(half_space.member_many(pts))
    assert np.unique(pts, axis=0).shape[0] == 8

    again = next_wave_design(half_space, 8, candidate_budget=500, seed=4)
    assert np.array_equal(again.points, pts)


def test_next_design_errors():
    with pytest.raises(ValueError, match="n_new"):
        next_wave_design(half_space, 0)
    with pytest.raises(RuntimeError, match="NROY too small"):
        next_wave_design(nothing, 4, candidate_budget=200)


# -- single wave --------------------------------------------------------------------

def test_wave_record_contents(wave_one):
    rec, ens, cls_ = wave_one
    assert rec.wave_id == 1
    assert rec.coeffs.shape == (12, 2)
    assert rec.basis.q == 2
    assert rec.fit.score > 0
    assert rec.context.bound_a == rec.fit.T_star_star
    assert rec.context.T2 is not None
    assert 0.0 <= rec.nroy_fraction <= 1.0
    assert rec.predicate.mode == "if1"
    assert rec.predicate.prior == ()


def test_wave_predicate_usable_pointwise(wave_one):
    rec, _, _ = wave_one
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, size=(20, 2))
    flags = rec.predicate.member_many(X)
    for i in range(20):
        assert nroy_member(rec.predicate, X[i]) == flags[i]


def test_classification_must_cover_the_ensemble():
    ens, _ = synthetic_wave_inputs()
    short = Classification(labels=[1, 2])
    with pytest.raises(ValueError, match="does not cover"):
        run_wave(None, ens, short, FAST)


def test_stage_error_names_the_failing_stage():
    ens, _ = synthetic_wave_inputs()
    all_bad = Classification(labels=[2] * 12)
    with pytest.raises(WaveStageError, match="kernel-selection.*no acceptable"):
        run_wave(None, ens, all_bad, FAST)
    try:
        run_wave(None, ens, all_bad, FAST)
    except WaveStageError as exc:
        assert exc.stage == "kernel-selection"


def test_predicate_mode_validation(wave_one):
    rec, _, _ = wave_one
    with pytest.raises(ValueError, match="if1.*if2|mode"):
        WavePredicate("if3", rec.context)
    bare = WavePredicate("if2", rec.context.with_bounds(bound_a=1.0))
    assert bare.context.T2 is not None   # carried over from the wave


def test_if1_needs_bound_a(wave_one):
    rec, _, _ = wave_one
    stripped = rec.context
    object.__setattr__(stripped, "bound_a", None)
    pred = WavePredicate("if1", stripped)
    with pytest.raises(ValueError, match="bound a"):
        pred.member_many(np.zeros((1, 2)))
    object.__setattr__(stripped, "bound_a", rec.fit.T_star_star)


# -- chained waves ---------------------------------------------------------------------

def test_conjunction_with_prior_is_a_subset(wave_one):
    rec, _, _ = wave_one
    tighter = rec.context.with_bounds(bound_a=0.25 * rec.context.bound_a)
    second = WavePredicate("if1", tighter, prior=(rec.predicate,))
    X = np.random.default_rng(6).uniform(-1, 1, size=(400, 2))
    inner = second.member_many(X)
    outer = rec.predicate.member_many(X)
    assert np.all(outer[inner])


def test_second_wave_chains_and_shrinks(wave_one):
    rec, ens, cls_ = wave_one
    rec2 = run_wave(rec, ens, cls_, FAST, seed=4)
    assert rec2.wave_id == 2
    assert rec2.predicate.prior == (rec.predicate,)
    X = np.random.default_rng(7).uniform(-1, 1, size=(300, 2))
    inner = rec2.predicate.member_many(X)
    outer = rec.predicate.member_many(X)
    assert np.all(outer[inner])
    combined_se = 3.0 * np.sqrt(rec.nroy_se ** 2 + rec2.nroy_se ** 2)
    assert rec2.nroy_fraction <= rec.nroy_fraction + combined_se


def test_next_design_inside_fitted_nroy(wave_one):
    rec, _, _ = wave_one
    design = next_wave_design(rec.predicate, 5, candidate_budget=2000, seed=8)
    assert np.all(rec.predicate.member_many(design.points))


# -- persistence -------------------------------------------------------------------------

EXPECTED_FILES = {"design.csv", "design.csv.bounds", "outputs.csv",
                  "outputs.csv.grid", "observation.csv", "observation.csv.cov",
                  "classification.csv", "kernel.txt", "i0.csv", "basis.txt",
                  "coefficients.csv", "emulators.txt", "thresholds.txt",
                  "summary.txt", "seed.txt"}


def test_store_is_byte_identical_across_reruns(tmp_path):
    ens, cls_ = synthetic_wave_inputs(seed=1)
    dir_a, dir_b = str(tmp_path / "a"), str(tmp_path / "b")
    run_wave(None, ens, cls_, FAST, seed=9, store_dir=dir_a)
    run_wave(None, ens, cls_, FAST, seed=9, store_dir=dir_b)
    names = sorted(os.listdir(dir_a))
    assert set(names) == EXPECTED_FILES
    match, mismatch, errors = filecmp.cmpfiles(dir_a, dir_b, names,
                                               shallow=False)
    assert mismatch == [] and errors == []
    assert sorted(match) == names


def test_load_wave_round_trip(tmp_path, wave_one):
    rec, ens, cls_ = wave_one
    store = str(tmp_path / "w1")
    save_wave(rec, store)
    loaded = load_wave(store)

    assert loaded.wave_id == rec.wave_id
    assert np.array_equal(loaded.classification.labels, cls_.labels)
    assert loaded.fit.T_star_star == rec.fit.T_star_star
    assert loaded.fit.score == rec.fit.score
    assert loaded.context.bound_a == rec.context.bound_a
    assert loaded.context.T2 == rec.context.T2
    assert loaded.nroy_fraction == rec.nroy_fraction
    assert loaded.seed == rec.seed

    X = np.random.default_rng(10).uniform(-1, 1, size=(100, 2))
    assert np.array_equal(loaded.predicate.member_many(X),
                          rec.predicate.member_many(X))


def test_load_wave_with_prior_restores_the_chain(tmp_path, wave_one):
    rec, ens, cls_ = wave_one
    rec2 = run_wave(rec, ens, cls_, FAST, seed=4)
    d1, d2 = str(tmp_path / "w1"), str(tmp_path / "w2")
    save_wave(rec, d1)
    save_wave(rec2, d2)
    l1 = load_wave(d1)
    l2 = load_wave(d2, prior=l1)
    assert l2.predicate.prior == (l1.predicate,)
    X = np.random.default_rng(11).uniform(-1, 1, size=(100, 2))
    assert np.array_equal(l2.predicate.member_many(X),
                          rec2.predicate.member_many(X))


# -- reporting ----------------------------------------------------------------------------

def fake_record(wave_id, n, score, frac, se):
    return SimpleNamespace(wave_id=wave_id, nroy_fraction=frac, nroy_se=se,
                           ensemble=SimpleNamespace(
                               outputs=SimpleNamespace(n=n)),
                           fit=SimpleNamespace(score=score))


def test_wave_report_format_and_advisory():
    records = [fake_record(1, 24, 0.96, 0.80, 0.004),
               fake_record(2, 24, 0.85, 0.78, 0.004)]
    text = wave_report(records)
    lines = text.strip().splitlines()
    assert lines[0] == "wave  n_runs  score   nroy_fraction  change"
    assert "0.8000" in lines[1] and "0.7800" in lines[2]
    assert "-2.5%" in lines[2]
    assert lines[-1].startswith("advisory:")

    shrinking = [fake_record(1, 24, 0.96, 0.80, 0.004),
                 fake_record(2, 24, 0.85, 0.40, 0.004)]
    assert "advisory" not in wave_report(shrinking)
