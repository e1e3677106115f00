"""Shared test helpers: seeded projector generation and small dense oracles."""

import numpy as np
import pytest

from gapcert import RandomSeed, haar_orthogonal, projector_from_family, sample_family


def random_projector(d, r, master, trial=0):
    """Projector sampled through the library path, seeded."""
    return projector_from_family(sample_family(d, r, RandomSeed(master, trial)))


def random_projector_matrix(dim, rank, master, trial=0):
    """Plain rank-`rank` projector matrix in the given dimension (not two-site)."""
    o = haar_orthogonal(dim, RandomSeed(master, trial))
    v = o[:, :rank]
    m = v @ v.T
    return 0.5 * (m + m.T)


def kron_chain_oracle(p_matrix, d, L):
    """Literal Kronecker-product assembly of the chain Hamiltonian (test oracle)."""
    dim = d**L
    h = np.zeros((dim, dim))
    for j in range(1, L):
        h += np.kron(np.kron(np.eye(d ** (j - 1)), p_matrix), np.eye(d ** (L - j - 1)))
    return h


def kron_tree_oracle(p_matrix, d, k, L):
    """Elementary-matrix Kronecker assembly of the tree Hamiltonian (test oracle).

    Each edge operator is built as a sum over d^4 elementary single-site
    factors, independent of the production tensor routines.
    """
    from gapcert import tree_edges, tree_vertex_count

    v_count = tree_vertex_count(k, L)
    dim = d**v_count
    pt = p_matrix.reshape(d, d, d, d)
    h = np.zeros((dim, dim))
    for parent, child in tree_edges(k, L):
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    for e in range(d):
                        coeff = pt[a, b, c, e]
                        if coeff == 0.0:
                            continue
                        term = np.ones((1, 1))
                        for site in range(v_count):
                            if site == parent:
                                factor = np.zeros((d, d))
                                factor[a, c] = 1.0
                            elif site == child:
                                factor = np.zeros((d, d))
                                factor[b, e] = 1.0
                            else:
                                factor = np.eye(d)
                            term = np.kron(term, factor)
                        h += coeff * term
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
