"""Ground energy, kernel dimension, and spectral gap computation.

Two routes are provided and cross-validated in the test suite:

* a dense oracle (`dense_spectrum`) for dimensions up to DENSE_DIM_LIMIT;
* a matrix-free block Lanczos iteration with full reorthogonalization and
  thick restarts (`lowest_eigs`, `smallest_eig_above`).

For frustration-free operators the kernel can be huge (thousands of states for
moderate chains), so the gap is not reached by enumerating low eigenvalues.
`smallest_eig_above` instead starts the Krylov basis inside the range of the
operator (start block = H applied to random vectors).  The range is invariant
under H and orthogonal to the kernel, so the iteration converges to the
smallest *positive* eigenvalue directly; rounding-level kernel leakage is
ignored via the kernel threshold and purged again at every restart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidDimensionError, SolverConvergenceError
from .haar import RandomSeed
from .model import (
    DENSE_DIM_LIMIT,
    ChainSpec,
    LocalProjector,
    TreeSpec,
    dense_hamiltonian,
    hamiltonian_matvec,
)

#: `gap_report(method="auto")` goes dense at or below this dimension
AUTO_DENSE_LIMIT = 2048

#: per-interaction-term kernel threshold (||H|| <= #terms, so rounding scales with it)
KERNEL_EPS_PER_TERM = 1e-9

#: residual tolerance of the iterative solver, relative to the spectral scale
DEFAULT_RES_RTOL = 1e-9

_KERNEL_PROBE_START = 8
_KERNEL_PROBE_CAP = 128


def default_kernel_threshold(n_terms: int) -> float:
    return KERNEL_EPS_PER_TERM * max(1, n_terms)


@dataclass(frozen=True)
class SpectralReport:
    """Spectral summary of one Hamiltonian instance."""

    ground_energy: float
    kernel_dim: int | None
    gap: float | None
    frustration_free: bool
    method: str
    kernel_threshold: float
    solver_tolerance: float
    dim: int
    n_terms: int

    def to_json_obj(self) -> dict:
        return {
            "ground_energy": self.ground_energy,
            "kernel_dim": self.kernel_dim,
            "gap": self.gap,
            "frustration_free": self.frustration_free,
            "method": self.method,
            "kernel_threshold": self.kernel_threshold,
            "solver_tolerance": self.solver_tolerance,
            "dim": self.dim,
            "n_terms": self.n_terms,
        }


def dense_spectrum(h: np.ndarray, check_symmetry: bool = True) -> np.ndarray:
    """Full ascending spectrum of a dense symmetric matrix.

    Refuses dimensions above DENSE_DIM_LIMIT.  Exactly diagonal matrices are
    sorted directly (the reference model is diagonal in the product basis, and
    a LAPACK round on a 20k matrix costs minutes for no accuracy benefit).
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {h.shape}")
    n = h.shape[0]
    if n > DENSE_DIM_LIMIT:
        raise InvalidDimensionError(
            f"dimension {n} exceeds the dense limit {DENSE_DIM_LIMIT}; use the iterative path"
        )
    if check_symmetry:
        scale = max(1.0, float(np.abs(h).max()))
        asym = float(np.abs(h - h.T).max())
        if asym > 1e-10 * scale:
            raise DomainError(f"matrix is not symmetric: max |H - H^T| = {asym:.3e}")
    diag = np.diagonal(h)
    if np.count_nonzero(h) == np.count_nonzero(diag):
        return np.sort(diag.copy())
    return np.linalg.eigvalsh(h)


class _BlockOperator:
    """Wrap a matvec callable so it can be applied to column blocks."""

    def __init__(self, matvec, dim: int):
        self.dim = dim
        self._matvec = matvec
        probe = np.zeros((dim, 2))
        try:
            out = matvec(probe)
            self._block_ok = isinstance(out, np.ndarray) and out.shape == probe.shape
        except Exception:
            self._block_ok = False

    def __call__(self, block: np.ndarray) -> np.ndarray:
        if block.ndim == 1 or self._block_ok:
            return np.asarray(self._matvec(block), dtype=float)
        return np.column_stack([self._matvec(block[:, i]) for i in range(block.shape[1])])


def _orthonormalize(block: np.ndarray, against: np.ndarray | None) -> np.ndarray:
    """Orthonormalize columns (DGKS: project twice), dropping degenerate ones."""
    if block.shape[1] == 0:
        return block
    ref = float(np.linalg.norm(block, axis=0).max())
    if ref == 0.0:
        return block[:, :0]
    if against is not None and against.shape[1] > 0:
        for _ in range(2):
            block = block - against @ (against.T @ block)
    q, r = np.linalg.qr(block)
    keep = np.abs(np.diagonal(r)) > 1e-10 * ref
    return q[:, keep]


def _block_krylov_lowest(
    op: _BlockOperator,
    nev: int,
    rng: np.random.Generator,
    *,
    threshold: float | None = None,
    in_range_start: bool = False,
    block: int | None = None,
    res_rtol: float = DEFAULT_RES_RTOL,
    max_basis: int = 480,
    restart_keep: int = 160,
    max_iter: int = 3000,
):
    """Rayleigh-Ritz on a growing block Krylov basis with full reorthogonalization.

    Converges the `nev` lowest Ritz pairs, or the `nev` lowest above `threshold`
    when a threshold is given.  Returns (values, residual_norms, exhausted):
    `exhausted` is True when the reachable invariant subspace was spanned
    completely (values are then exact for that subspace).
    """
    dim = op.dim
    b = max(1, min(block if block is not None else max(nev, 4), dim))

    def fresh_block(width):
        z = rng.standard_normal((dim, width))
        return op(z) if in_range_start else z

    v = _orthonormalize(fresh_block(b), against=None)
    if v.shape[1] == 0 and in_range_start:
        return np.empty(0), np.empty(0), True  # operator range is (numerically) trivial
    while v.shape[1] == 0:
        v = _orthonormalize(rng.standard_normal((dim, b)), against=None)
    w = op(v)
    t = v.T @ w

    for _ in range(max_iter):
        ts = 0.5 * (t + t.T)
        theta, y = np.linalg.eigh(ts)
        scale = max(1.0, float(np.abs(theta).max()))
        if threshold is None:
            targets = np.arange(min(nev, theta.size))
        else:
            targets = np.flatnonzero(theta > threshold)[:nev]
        if targets.size:
            yt = y[:, targets]
            res = np.linalg.norm((w @ yt) - (v @ yt) * theta[targets], axis=0)
            if targets.size >= nev and np.all(res <= res_rtol * scale):
                return theta[targets], res, v.shape[1] >= dim
        else:
            res = np.empty(0)

        # expand with residual directions of the unconverged targets
        if targets.size:
            live = targets[res > res_rtol * scale][:b]
            if live.size == 0:
                live = targets[:b]
            yl = y[:, live]
            new = (w @ yl) - (v @ yl) * theta[live]
        else:
            new = fresh_block(b)
        new = _orthonormalize(new, against=v)
        if new.shape[1] == 0:
            new = _orthonormalize(fresh_block(b), against=v)
        if new.shape[1] == 0 and not in_range_start:
            new = _orthonormalize(rng.standard_normal((dim, b)), against=v)
        if new.shape[1] == 0:
            # invariant subspace exhausted: current Ritz data is exact on it
            yt = y[:, targets]
            res = np.linalg.norm((w @ yt) - (v @ yt) * theta[targets], axis=0)
            return theta[targets], res, True

        if v.shape[1] + new.shape[1] > max_basis:
            keep = min(restart_keep, theta.size)
            if in_range_start:
                # restart through the operator: re-purifies kernel leakage
                vr = _orthonormalize(w @ y[:, :keep], against=None)
            else:
                vr = v @ y[:, :keep]
            if vr.shape[1] == 0:
                vr = _orthonormalize(fresh_block(b), against=None)
            v = vr
            w = op(v)
            t = v.T @ w
            continue

        wn = op(new)
        c = v.T @ wn
        t = np.block([[t, c], [c.T, new.T @ wn]])
        v = np.column_stack([v, new])
        w = np.column_stack([w, wn])

    raise SolverConvergenceError(
        f"no convergence after {max_iter} iterations (dim={dim}, nev={nev}, threshold={threshold})"
    )


def lowest_eigs(
    matvec,
    dim: int,
    count: int,
    *,
    seed: RandomSeed | None = None,
    res_rtol: float = DEFAULT_RES_RTOL,
    max_iter: int = 3000,
) -> np.ndarray:
    """The `count` lowest eigenvalues of a symmetric PSD operator, ascending.

    Block Lanczos with block width `count` (so degenerate levels are resolved up
    to that multiplicity), full reorthogonalization, and a deterministic start
    block drawn from `seed`.  Raises SolverConvergenceError at the iteration cap.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if dim < count:
        raise InvalidDimensionError(f"dim={dim} is smaller than count={count}")
    rng = (seed or RandomSeed()).generator(substream=1)
    op = _BlockOperator(matvec, dim)
    theta, _, _ = _block_krylov_lowest(
        op, count, rng, block=count, res_rtol=res_rtol, max_iter=max_iter
    )
    if theta.size < count:
        raise SolverConvergenceError(f"resolved only {theta.size} of {count} requested eigenvalues")
    return theta[:count]


def smallest_eig_above(
    matvec,
    dim: int,
    threshold: float,
    *,
    seed: RandomSeed | None = None,
    block: int = 8,
    res_rtol: float = DEFAULT_RES_RTOL,
    max_iter: int = 3000,
) -> float | None:
    """Smallest eigenvalue strictly above `threshold` of a symmetric PSD operator.

    The Krylov basis starts (and restarts) inside ran(H), which deflates the
    kernel without ever resolving its dimension.  Returns None when the
    reachable range holds no eigenvalue above the threshold (zero operator).
    """
    rng = (seed or RandomSeed()).generator(substream=2)
    op = _BlockOperator(matvec, dim)
    theta, _, _ = _block_krylov_lowest(
        op,
        1,
        rng,
        threshold=threshold,
        in_range_start=True,
        block=block,
        res_rtol=res_rtol,
        max_iter=max_iter,
    )
    above = theta[theta > threshold]
    return float(above[0]) if above.size else None


def _kernel_probe(op, threshold, rng, res_rtol, max_iter):
    """Count kernel states by doubling the requested eigenvalue count.

    Returns the count of sub-threshold eigenvalues once a value above the
    threshold shows up, or None when the cap is reached first (kernel larger
    than the probe can resolve; left unresolved rather than failing the report).
    """
    m = _KERNEL_PROBE_START
    while m <= min(_KERNEL_PROBE_CAP, op.dim):
        theta, _, exhausted = _block_krylov_lowest(
            op, m, rng, block=m, res_rtol=res_rtol, max_iter=max_iter
        )
        below = int(np.sum(theta <= threshold))
        if below < theta.size:
            return below
        if exhausted and theta.size >= op.dim:
            return below
        m *= 2
    return None


def gap_report(
    spec: ChainSpec | TreeSpec,
    P: LocalProjector,
    *,
    method: str = "auto",
    kernel_threshold: float | None = None,
    seed: RandomSeed | None = None,
    resolve_kernel_dim: bool = False,
    res_rtol: float = DEFAULT_RES_RTOL,
) -> SpectralReport:
    """Ground energy, kernel dimension, and spectral gap of one Hamiltonian.

    method: "dense" (full spectrum, refuses dim > DENSE_DIM_LIMIT),
    "iterative" (matrix-free), or "auto" (dense at or below AUTO_DENSE_LIMIT).
    The gap is the smallest eigenvalue above the kernel threshold; if the ground
    energy itself exceeds the threshold the instance is flagged non-frustration-
    free and the gap falls back to the spacing between the two lowest distinct
    levels.  On the iterative path the kernel dimension is only resolved on
    request (it can exceed any practical probe size) and may come back None.
    """
    dim = spec.dim
    n_terms = spec.n_terms
    thr = default_kernel_threshold(n_terms) if kernel_threshold is None else kernel_threshold
    if n_terms == 0:
        return SpectralReport(
            ground_energy=0.0, kernel_dim=dim, gap=None, frustration_free=True,
            method="trivial", kernel_threshold=thr, solver_tolerance=0.0,
            dim=dim, n_terms=0,
        )
    if method == "auto":
        method = "dense" if dim <= AUTO_DENSE_LIMIT else "iterative"
    if method == "dense":
        evals = dense_spectrum(dense_hamiltonian(spec, P))
        ground = float(evals[0])
        kd = int(np.searchsorted(evals, thr, side="right"))
        ff = ground <= thr
        if ff:
            gap = float(evals[kd]) if kd < dim else None
        else:
            kd = 0
            idx = int(np.searchsorted(evals, ground + thr, side="right"))
            gap = float(evals[idx] - ground) if idx < dim else None
        return SpectralReport(
            ground_energy=ground, kernel_dim=kd, gap=gap, frustration_free=ff,
            method="dense", kernel_threshold=thr, solver_tolerance=1e-10,
            dim=dim, n_terms=n_terms,
        )
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")

    matvec = hamiltonian_matvec(spec, P)
    op = _BlockOperator(matvec, dim)
    rng = (seed or RandomSeed()).generator(substream=1)
    theta, _, _ = _block_krylov_lowest(op, 1, rng, block=2, res_rtol=res_rtol)
    ground = float(theta[0])
    ff = ground <= thr
    if ff:
        gap = smallest_eig_above(matvec, dim, thr, seed=seed, res_rtol=res_rtol)
        if gap is None:
            raise SolverConvergenceError("no eigenvalue found above the kernel threshold")
        kd = None
        if resolve_kernel_dim:
            kd = _kernel_probe(op, thr, rng, res_rtol, max_iter=3000)
    else:
        kd = 0
        m = _KERNEL_PROBE_START
        gap = None
        while m <= min(_KERNEL_PROBE_CAP, dim):
            vals, _, _ = _block_krylov_lowest(op, m, rng, block=m, res_rtol=res_rtol)
            distinct = vals[vals > ground + thr]
            if distinct.size:
                gap = float(distinct[0] - ground)
                break
            m *= 2
        if gap is None:
            raise SolverConvergenceError(
                "could not resolve a second level above the (non-frustration-free) ground energy"
            )
    return SpectralReport(
        ground_energy=ground, kernel_dim=kd, gap=gap, frustration_free=ff,
        method="iterative", kernel_threshold=thr, solver_tolerance=res_rtol,
        dim=dim, n_terms=n_terms,
    )
