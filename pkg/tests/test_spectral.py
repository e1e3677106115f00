"""Dense oracle vs iterative eigensolver, gap reports, kernel handling."""

import numpy as np
import pytest

import gapcert.spectral as spectral
from gapcert import (
    ChainSpec,
    DomainError,
    InvalidDimensionError,
    RandomSeed,
    SolverConvergenceError,
    TreeSpec,
    default_kernel_threshold,
    dense_hamiltonian,
    dense_spectrum,
    gap_report,
    hamiltonian_matvec,
    lowest_eigs,
    reference_projector,
    smallest_eig_above,
)
from conftest import random_projector


def test_single_term_spectrum_is_projector_spectrum():
    p = random_projector(3, 2, master=60)
    evals = dense_spectrum(dense_hamiltonian(ChainSpec(3, 2, 2), p))
    expected = np.array([0.0] * 7 + [1.0] * 2)
    assert np.abs(evals - expected).max() < 1e-10


def test_reference_chain_spectrum_is_integer():
    # adjacent reference terms commute (orthogonal ranges), so the spectrum
    # consists of occurrence counts: nonnegative integers with ground 0, gap 1
    p = reference_projector(3, 1)
    evals = dense_spectrum(dense_hamiltonian(ChainSpec(3, 1, 4), p))
    assert np.abs(evals - np.round(evals)).max() < 1e-12
    assert evals[0] >= 0.0
    assert abs(evals[0]) < 1e-12
    positive = evals[evals > 0.5]
    assert abs(positive[0] - 1.0) < 1e-12


def test_three_site_trace_identity():
    p = random_projector(2, 1, master=61)
    h = dense_hamiltonian(ChainSpec(2, 1, 3), p)
    evals = dense_spectrum(h)
    assert evals.size == 8
    assert abs(evals.sum() - 2 * 1 * 2) < 1e-8


def test_dense_spectrum_validation(monkeypatch):
    with pytest.raises(InvalidDimensionError):
        dense_spectrum(np.zeros((3, 4)))
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(DomainError):
        dense_spectrum(skew)
    monkeypatch.setattr(spectral, "DENSE_DIM_LIMIT", 4)
    with pytest.raises(InvalidDimensionError):
        dense_spectrum(np.eye(5))


def test_dense_spectrum_diagonal_fast_path_matches_lapack():
    diag = np.diag(np.array([3.0, -1.0, 2.0, 0.0]))
    assert np.array_equal(dense_spectrum(diag), np.array([-1.0, 0.0, 2.0, 3.0]))
    dense = diag + 1e-3 * (np.ones((4, 4)) - np.eye(4))
    assert np.abs(dense_spectrum(dense) - np.linalg.eigvalsh(dense)).max() == 0.0


def test_lowest_eigs_matches_dense_with_kernel_multiplicity():
    p = random_projector(2, 1, master=62)
    spec = ChainSpec(2, 1, 8)
    evals = dense_spectrum(dense_hamiltonian(spec, p))
    approx = lowest_eigs(hamiltonian_matvec(spec, p), spec.dim, 4, seed=RandomSeed(0, 1))
    assert np.abs(approx - evals[:4]).max() < 1e-8


def test_lowest_eigs_zero_operator():
    vals = lowest_eigs(lambda x: np.zeros_like(x), 10, 4)
    assert np.abs(vals).max() == 0.0


def test_lowest_eigs_resolves_projector_multiplicity():
    diag = np.diag([1.0, 1.0] + [0.0] * 6)
    vals = lowest_eigs(lambda x: diag @ x, 8, 7)
    assert np.abs(vals - np.array([0, 0, 0, 0, 0, 0, 1.0])).max() < 1e-9


def test_lowest_eigs_validation():
    with pytest.raises(InvalidDimensionError):
        lowest_eigs(lambda x: x, 3, 4)
    with pytest.raises(ValueError):
        lowest_eigs(lambda x: x, 3, 0)


def test_lowest_eigs_explicit_failure_on_iteration_cap():
    p = random_projector(2, 1, master=63)
    spec = ChainSpec(2, 1, 6)
    with pytest.raises(SolverConvergenceError):
        lowest_eigs(hamiltonian_matvec(spec, p), spec.dim, 4, max_iter=1)


def test_smallest_eig_above_reference_chain():
    p = reference_projector(3, 1)
    spec = ChainSpec(3, 1, 7)
    thr = default_kernel_threshold(spec.n_terms)
    gap = smallest_eig_above(hamiltonian_matvec(spec, p), spec.dim, thr)
    assert abs(gap - 1.0) < 1e-8


def test_smallest_eig_above_matches_dense():
    p = random_projector(2, 1, master=64)
    spec = ChainSpec(2, 1, 8)
    evals = dense_spectrum(dense_hamiltonian(spec, p))
    thr = default_kernel_threshold(spec.n_terms)
    expected = evals[np.searchsorted(evals, thr, side="right")]
    got = smallest_eig_above(hamiltonian_matvec(spec, p), spec.dim, thr)
    assert abs(got - expected) < 1e-8


def test_smallest_eig_above_zero_operator_returns_none():
    assert smallest_eig_above(lambda x: np.zeros_like(x), 6, 1e-9) is None


def test_gap_report_reference_chain():
    rep = gap_report(ChainSpec(3, 1, 5), reference_projector(3, 1), method="dense")
    assert rep.frustration_free
    assert rep.ground_energy <= rep.kernel_threshold
    assert abs(rep.gap - 1.0) < 1e-8
    assert rep.kernel_dim > 0
    assert rep.method == "dense"


def test_gap_report_random_chain_is_gapped_ff():
    rep = gap_report(ChainSpec(2, 1, 6), random_projector(2, 1, master=65))
    assert rep.frustration_free
    assert rep.gap > rep.kernel_threshold


def test_gap_report_single_edge():
    rep = gap_report(ChainSpec(3, 2, 2), random_projector(3, 2, master=66))
    assert rep.frustration_free
    assert abs(rep.gap - 1.0) < 1e-10
    assert rep.kernel_dim == 7


def test_gap_report_tree_no_edges():
    rep = gap_report(TreeSpec(3, 1, 2, 1), random_projector(3, 1, master=67))
    assert rep.gap is None and rep.frustration_free and rep.ground_energy == 0.0
    assert rep.kernel_dim == rep.dim


@pytest.mark.parametrize(
    "spec,master",
    [(ChainSpec(2, 1, 8), 70), (ChainSpec(3, 1, 6), 71), (ChainSpec(3, 2, 6), 72),
     (TreeSpec(3, 1, 2, 3), 73)],
)
def test_iterative_and_dense_gap_agree(spec, master):
    p = random_projector(spec.d, spec.r, master=master)
    dense = gap_report(spec, p, method="dense")
    iterative = gap_report(spec, p, method="iterative", seed=RandomSeed(master, 1))
    assert abs(dense.gap - iterative.gap) < 1e-8
    assert abs(dense.ground_energy - iterative.ground_energy) < 1e-8
    assert dense.frustration_free == iterative.frustration_free


def test_iterative_kernel_dim_resolution():
    p = random_projector(2, 1, master=74)
    spec = ChainSpec(2, 1, 8)
    dense = gap_report(spec, p, method="dense")
    iterative = gap_report(spec, p, method="iterative", resolve_kernel_dim=True)
    assert iterative.kernel_dim == dense.kernel_dim
    lazy = gap_report(spec, p, method="iterative")
    assert lazy.kernel_dim is None


def test_kernel_dim_stable_under_threshold_scaling():
    cases = [
        (ChainSpec(3, 1, 5), reference_projector(3, 1)),
        (ChainSpec(2, 1, 6), random_projector(2, 1, master=75)),
        (TreeSpec(3, 1, 2, 3), random_projector(3, 1, master=76)),
    ]
    for spec, p in cases:
        thr = default_kernel_threshold(spec.n_terms)
        dims = {
            gap_report(spec, p, method="dense", kernel_threshold=t).kernel_dim
            for t in (thr / 10.0, thr, thr * 10.0)
        }
        assert len(dims) == 1


@pytest.mark.parametrize("d,r", [(2, 1), (3, 1), (3, 2), (4, 4)])
def test_ff_consistency_for_admissible_ranks(d, r):
    for trial in range(3):
        p = random_projector(d, r, master=80, trial=trial)
        rep = gap_report(ChainSpec(d, r, 4), p, method="dense")
        assert rep.frustration_free


def test_non_ff_fallback_reports_level_spacing():
    # rank above the guarantee: generically no zero mode; the report flags it
    # and falls back to the spacing of the two lowest distinct levels
    p = random_projector(2, 2, master=81)
    spec = ChainSpec(2, 2, 4)
    rep = gap_report(spec, p, method="dense")
    if rep.frustration_free:
        pytest.skip("sampled interaction happened to be frustration-free")
    assert rep.kernel_dim == 0
    evals = dense_spectrum(dense_hamiltonian(spec, p))
    assert abs(rep.ground_energy - evals[0]) < 1e-12
    assert rep.gap > 0
    it = gap_report(spec, p, method="iterative")
    assert not it.frustration_free
    assert abs(it.ground_energy - rep.ground_energy) < 1e-8
    assert abs(it.gap - rep.gap) < 1e-7


def test_gap_report_deterministic_given_seed():
    p = random_projector(3, 1, master=82)
    spec = ChainSpec(3, 1, 6)
    a = gap_report(spec, p, method="iterative", seed=RandomSeed(1, 2))
    b = gap_report(spec, p, method="iterative", seed=RandomSeed(1, 2))
    assert a.gap == b.gap and a.ground_energy == b.ground_energy
    c = gap_report(spec, p, method="iterative", seed=RandomSeed(1, 3))
    assert abs(c.gap - a.gap) < 1e-8
