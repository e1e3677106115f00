"""Deterministic finite-size gap certificates for chain and tree Hamiltonians.

The certificate machinery works entirely on the three-site space: with the
interaction placed on bonds (1,2) and (2,3), it computes

* the meet Q1 ^ Q2 (projector onto the intersection of ranges),
* the coupling norm c = ||P_12 P_23 - P_12 ^ P_23||,
* the local gap of P_12 + P_23,

and turns them into lower bounds on the gap of arbitrarily long chains
(gamma_L >= 2*(gamma_loc - 1/2) for gamma_loc <= 1, else >= 1, any L >= 4) and
of k-ary trees (gamma >= 2k*(gamma_loc - 1 + 1/(2k))).  The local gap always
dominates 1 - c, so a coupling norm below 1/2 (resp. 1/(2k)) certifies a gap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstructionError,
    DomainError,
    InvalidRankError,
    NotAProjectorError,
    SolverConvergenceError,
)
from .haar import OrthonormalFamily, RandomSeed
from .model import LocalProjector, pair_flat_index
from .spectral import dense_spectrum, default_kernel_threshold

MEET_EIGTOL = 1e-8
_PROJ_TOL = 1e-10


def _check_projector_matrix(q: np.ndarray, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise NotAProjectorError(f"{name} must be a square matrix, got shape {q.shape}")
    if np.abs(q - q.T).max() > _PROJ_TOL:
        raise NotAProjectorError(f"{name} is not symmetric")
    if np.abs(q @ q - q).max() > _PROJ_TOL:
        raise NotAProjectorError(f"{name} is not idempotent")
    return q


def meet(q1: np.ndarray, q2: np.ndarray, tol: float = MEET_EIGTOL) -> np.ndarray:
    """Orthogonal projector onto ran(q1) & ran(q2).

    Computed as the eigenspace of q1 + q2 with eigenvalues within `tol` of 2
    (the sum reaches 2 exactly on common range vectors and stays strictly below
    elsewhere).  `meet_von_neumann` provides an independent cross-check.
    """
    q1 = _check_projector_matrix(q1, "q1")
    q2 = _check_projector_matrix(q2, "q2")
    if q1.shape != q2.shape:
        raise NotAProjectorError(f"shape mismatch: {q1.shape} vs {q2.shape}")
    w, u = np.linalg.eigh(q1 + q2)
    sel = w >= 2.0 - tol
    if not sel.any():
        return np.zeros_like(q1)
    us = u[:, sel]
    m = us @ us.T
    return 0.5 * (m + m.T)


def meet_von_neumann(
    q1: np.ndarray, q2: np.ndarray, tol: float = 1e-10, max_squarings: int = 200
) -> np.ndarray:
    """Meet via the power limit of q1 q2, used as an oracle for `meet`.

    The powers are walked by repeated squaring, so small principal angles
    (slow linear convergence of the plain power sequence) stay cheap.
    """
    q1 = _check_projector_matrix(q1, "q1")
    q2 = _check_projector_matrix(q2, "q2")
    a = q1 @ q2
    for _ in range(max_squarings):
        nxt = a @ a
        if np.linalg.norm(nxt - a) < tol:
            return nxt
        a = nxt
    raise SolverConvergenceError("projector power iteration did not converge")


def _three_site_factors(P: LocalProjector) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(P.d)
    return np.kron(P.matrix, eye), np.kron(eye, P.matrix)


def coupling_norm(P: LocalProjector, tol: float = MEET_EIGTOL) -> float:
    """Operator norm of P_12 P_23 - P_12 ^ P_23 on the three-site space."""
    p12, p23 = _three_site_factors(P)
    m = meet(p12, p23, tol=tol)
    return float(np.linalg.norm(p12 @ p23 - m, 2))


def local_gap(P: LocalProjector, kernel_threshold: float | None = None) -> float:
    """Smallest strictly positive eigenvalue of P_12 + P_23 (dense, d^3 space)."""
    p12, p23 = _three_site_factors(P)
    evals = dense_spectrum(p12 + p23)
    thr = default_kernel_threshold(2) if kernel_threshold is None else kernel_threshold
    above = evals[evals > thr]
    if above.size == 0:
        raise SolverConvergenceError("three-site operator has no eigenvalue above the threshold")
    return float(above[0])


def chain_bound(gamma_loc: float) -> float:
    """Uniform-in-length gap lower bound of the chain criterion (valid for L >= 4)."""
    if gamma_loc < 0:
        raise DomainError(f"gamma_loc must be >= 0, got {gamma_loc}")
    return 1.0 if gamma_loc >= 1.0 else 2.0 * (gamma_loc - 0.5)


def tree_bound(gamma_loc: float, k: int) -> float:
    """Gap lower bound of the k-ary tree criterion; k = 1 reproduces the chain bound."""
    if gamma_loc < 0:
        raise DomainError(f"gamma_loc must be >= 0, got {gamma_loc}")
    if k < 1:
        raise DomainError(f"branching factor must be >= 1, got {k}")
    return 1.0 if gamma_loc >= 1.0 else 2.0 * k * (gamma_loc - 1.0 + 1.0 / (2.0 * k))


def fnw_defect(q1: np.ndarray, q2: np.ndarray) -> float:
    """Slack of the projector anticommutator inequality.

    Smallest eigenvalue of {q1, q2} + ||q1 q2 - q1^q2|| (q1 + q2); the
    inequality asserts this is never below zero (up to rounding).
    """
    q1 = _check_projector_matrix(q1, "q1")
    q2 = _check_projector_matrix(q2, "q2")
    c = float(np.linalg.norm(q1 @ q2 - meet(q1, q2), 2))
    a = q1 @ q2 + q2 @ q1 + c * (q1 + q2)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


@dataclass(frozen=True)
class Certificate:
    """Gap certificate of one local interaction, uniform in the system size."""

    d: int
    r: int
    coupling_norm: float
    gamma_loc: float
    gamma_loc_lb: float
    meet_rank: int
    chain_bound: float
    tree_bounds: dict[int, float] = field(default_factory=dict)
    verdict: str = "inconclusive"
    seed: RandomSeed | None = None
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma_loc < self.gamma_loc_lb - 1e-8:
            raise ValueError(
                f"local gap {self.gamma_loc} fell below its coupling-norm bound "
                f"{self.gamma_loc_lb}; projector data is inconsistent"
            )
        expected = "certified-gapped" if self.chain_bound > 0 else "inconclusive"
        if self.verdict != expected:
            raise ValueError(f"verdict {self.verdict!r} inconsistent with chain bound")

    def tree_certified(self, k: int) -> bool:
        return self.tree_bounds.get(k, 0.0) > 0.0

    def to_json_obj(self) -> dict:
        seed = None
        if self.seed is not None:
            seed = {"master_seed": self.seed.master_seed, "stream_index": self.seed.stream_index}
        return {
            "d": self.d,
            "r": self.r,
            "coupling_norm": self.coupling_norm,
            "gamma_loc": self.gamma_loc,
            "gamma_loc_lb": self.gamma_loc_lb,
            "meet_rank": self.meet_rank,
            "chain_bound": self.chain_bound,
            "tree_bounds": {str(k): v for k, v in self.tree_bounds.items()},
            "verdict": self.verdict,
            "seed": seed,
            "tolerances": self.tolerances,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)


def certify(P: LocalProjector, k_list: tuple[int, ...] = ()) -> Certificate:
    """Compute the full certificate of one interaction.

    The effective local gap is the better of the exact dense value and the
    1 - c bound implied by the coupling norm (both are recorded); the chain and
    tree bounds evaluate the finite-size criteria on it.  A positive chain
    bound certifies every length L >= 4 at once.
    """
    p12, p23 = _three_site_factors(P)
    m = meet(p12, p23)
    c = float(np.linalg.norm(p12 @ p23 - m, 2))
    g_loc = local_gap(P)
    g_lb = 1.0 - c
    best = max(g_loc, g_lb)
    cb = chain_bound(best)
    tb = {int(k): tree_bound(best, int(k)) for k in k_list}
    return Certificate(
        d=P.d,
        r=P.r,
        coupling_norm=c,
        gamma_loc=g_loc,
        gamma_loc_lb=g_lb,
        meet_rank=int(round(float(np.trace(m)))),
        chain_bound=cb,
        tree_bounds=tb,
        verdict="certified-gapped" if cb > 0 else "inconclusive",
        seed=P.seed,
        tolerances={
            "meet_eigtol": MEET_EIGTOL,
            "kernel_threshold": default_kernel_threshold(2),
        },
    )


def construct_near_good(
    d: int, r: int, epsilon: float, seed: RandomSeed, max_retries: int = 20
) -> OrthonormalFamily:
    """Orthonormal family within distance `epsilon` of the reference targets.

    Perturbs each target vector by a scaled random direction (initial scale
    0.9 * epsilon) and re-orthonormalizes; the scale is halved until the
    distance condition verifies.  The resulting projector certifies a chain
    gap above 1 - 8*r*epsilon.
    """
    if not (1 <= r < d):
        raise InvalidRankError(f"near-good construction requires 1 <= r < d, got r={r}, d={d}")
    if not (0 < epsilon < 1.0 / (8.0 * r)):
        raise DomainError(f"epsilon must lie in (0, 1/(8r)) = (0, {1.0/(8.0*r)}), got {epsilon}")
    d2 = d * d
    targets = _good_vector_matrix(d, r)
    rng = seed.generator()
    scale = 0.9 * epsilon
    for _ in range(max_retries):
        noise = rng.standard_normal((d2, r))
        noise /= np.linalg.norm(noise, axis=0)
        q, rr = np.linalg.qr(targets + scale * noise)
        q = q * np.where(np.diagonal(rr) >= 0, 1.0, -1.0)
        dist = float(np.linalg.norm(q - targets, axis=0).max())
        if dist < epsilon:
            return OrthonormalFamily(d=d, r=r, vectors=q.T.copy(), seed=seed)
        scale *= 0.5
    raise ConstructionError(
        f"could not place the family within {epsilon} of the targets after {max_retries} retries"
    )


def certified_gap_level(r: int, epsilon: float) -> float:
    """Gap level 1 - 8*r*epsilon guaranteed by a near-good family."""
    if not (0 < epsilon < 1.0 / (8.0 * r)):
        raise DomainError(f"epsilon must lie in (0, 1/(8r)), got {epsilon}")
    return 1.0 - 8.0 * r * epsilon


def _good_vector_matrix(d: int, r: int) -> np.ndarray:
    """Columns are the reference target vectors: pair states (1, 2) .. (1, r+1)."""
    targets = np.zeros((d * d, r))
    for i in range(1, r + 1):
        targets[pair_flat_index(1, i + 1, d), i - 1] = 1.0
    return targets


def reference_distance(family: OrthonormalFamily) -> float:
    """max_i distance of the family from the reference targets (requires r < d)."""
    if family.r >= family.d:
        raise InvalidRankError("reference targets are only defined for r < d")
    targets = _good_vector_matrix(family.d, family.r)
    return float(np.linalg.norm(family.vectors.T - targets, axis=0).max())
