"""Local projectors and chain/tree Hamiltonians with matrix-free matvec.

Basis convention (fixed everywhere in this package):

* pair basis: the product state with 1-based site labels (i, j) maps to the
  0-based flat index ``(i-1)*d + (j-1)`` (lexicographic);
* chain: a configuration (i_1, ..., i_L) maps to ``sum_s (i_s - 1) * d**(L-s)``,
  i.e. site 1 is the most significant digit, matching a C-order reshape of the
  state vector to shape (d,)*L with site s on axis s-1;
* tree: vertices are numbered breadth-first starting at 0 (the root); vertex v
  has children k*v + 1, ..., k*v + k; the state vector reshapes to (d,)*V with
  vertex v on axis v.  The root is level 1, so L levels hold
  (k**L - 1)/(k - 1) vertices.  On every edge the interaction's first tensor
  factor acts on the parent (smaller index), the second on the child; on a path
  this reproduces the chain convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError, InvalidRankError, NotAProjectorError
from .haar import OrthonormalFamily, RandomSeed

#: largest dimension for which operators may be materialized as dense matrices
DENSE_DIM_LIMIT = 20_000
#: largest state-vector dimension accepted by the matrix-free routines
MAX_STATE_DIM = 2**24

_IDEMPOTENT_TOL = 1e-10


def pair_flat_index(i: int, j: int, d: int) -> int:
    """Flat index of the pair basis state with 1-based site labels (i, j)."""
    if not (1 <= i <= d and 1 <= j <= d):
        raise InvalidDimensionError(f"labels must lie in 1..{d}, got ({i}, {j})")
    return (i - 1) * d + (j - 1)


def chain_flat_index(config, d: int) -> int:
    """Flat index of a chain configuration of 1-based site labels."""
    idx = 0
    for label in config:
        if not (1 <= label <= d):
            raise InvalidDimensionError(f"site label {label} outside 1..{d}")
        idx = idx * d + (label - 1)
    return idx


def tree_vertex_count(k: int, levels: int) -> int:
    """Number of vertices of the k-ary tree with the given number of levels."""
    if k < 2:
        raise InvalidDimensionError(f"branching factor must be >= 2, got {k}")
    if levels < 1:
        raise InvalidDimensionError(f"level count must be >= 1, got {levels}")
    return (k**levels - 1) // (k - 1)


def tree_edges(k: int, levels: int) -> list[tuple[int, int]]:
    """Directed (parent, child) edges of the k-ary tree in breadth-first order."""
    v_count = tree_vertex_count(k, levels)
    edges = []
    for v in range(v_count):
        for c in range(k * v + 1, k * v + k + 1):
            if c >= v_count:
                break
            edges.append((v, c))
    return edges


def max_ff_rank(d: int, lattice: str = "chain", k: int | None = None) -> int:
    """Largest interaction rank for which frustration-freeness is guaranteed.

    Chains admit r <= max(d-1, floor(d^2/4)); k-ary trees admit r < d/k.
    """
    if d < 2:
        raise InvalidDimensionError(f"local dimension must be >= 2, got {d}")
    if lattice == "chain":
        return max(d - 1, d * d // 4)
    if lattice == "tree":
        if k is None or k < 2:
            raise InvalidDimensionError("tree lattice requires a branching factor k >= 2")
        return -(-d // k) - 1  # ceil(d/k) - 1: largest integer strictly below d/k
    raise ValueError(f"unknown lattice {lattice!r}")


@dataclass(frozen=True)
class LocalProjector:
    """Rank-r orthogonal projector on the two-site space, as a d^2 x d^2 matrix."""

    d: int
    r: int
    matrix: np.ndarray = field(repr=False)
    seed: RandomSeed | None = None

    def __post_init__(self):
        d2 = self.d**2
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (d2, d2):
            raise InvalidDimensionError(f"expected a {d2} x {d2} matrix, got shape {m.shape}")
        asym = np.abs(m - m.T).max()
        if asym > _IDEMPOTENT_TOL:
            raise NotAProjectorError(f"matrix is not symmetric: max |P - P^T| = {asym:.3e}")
        m = 0.5 * (m + m.T)  # exact symmetry
        idem = np.abs(m @ m - m).max()
        if idem > _IDEMPOTENT_TOL:
            raise NotAProjectorError(f"matrix is not idempotent: max |P^2 - P| = {idem:.3e}")
        tr = float(np.trace(m))
        if abs(tr - self.r) > _IDEMPOTENT_TOL * d2:
            raise NotAProjectorError(f"trace {tr!r} does not match rank {self.r}")
        object.__setattr__(self, "matrix", m)

    def to_json_obj(self) -> dict:
        """JSON object {d, r, matrix: row-major list of d^4 floats}."""
        return {"d": self.d, "r": self.r, "matrix": self.matrix.ravel().tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LocalProjector":
        d, r = int(obj["d"]), int(obj["r"])
        m = np.asarray(obj["matrix"], dtype=float).reshape(d**2, d**2)
        return cls(d=d, r=r, matrix=m)

    @classmethod
    def from_json(cls, text: str) -> "LocalProjector":
        return cls.from_json_obj(json.loads(text))


def projector_from_family(family: OrthonormalFamily) -> LocalProjector:
    """Rank-r projector onto the span of the family, P = sum_i |phi_i><phi_i|."""
    v = family.vectors
    m = v.T @ v
    return LocalProjector(d=family.d, r=family.r, matrix=0.5 * (m + m.T), seed=family.seed)


def reference_projector(d: int, r: int) -> LocalProjector:
    """Diagonal projector onto the pair states (1, 2), ..., (1, r+1).

    These target states carry the label 1 on the first site and labels >= 2 on
    the second, so adjacent translates have orthogonal ranges: a middle site
    would need a label >= 2 for the left copy and the label 1 for the right one.
    """
    if not (1 <= r < d):
        raise InvalidRankError(f"reference projector requires 1 <= r < d, got r={r}, d={d}")
    diag = np.zeros(d * d)
    for i in range(1, r + 1):
        diag[pair_flat_index(1, i + 1, d)] = 1.0
    return LocalProjector(d=d, r=r, matrix=np.diag(diag))


@dataclass(frozen=True)
class ChainSpec:
    """Open chain of L sites with the same two-site interaction on every bond."""

    d: int
    r: int
    L: int
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 2:
            raise InvalidDimensionError(f"chain length must be >= 2, got {self.L}")
        if self.d < 2:
            raise InvalidDimensionError(f"local dimension must be >= 2, got {self.d}")
        if not (1 <= self.r <= self.d**2):
            raise InvalidRankError(f"rank {self.r} outside 1..d^2 for d={self.d}")
        if self.boundary != "open":
            raise ValueError("only open boundary conditions are supported")
        if self.dim > MAX_STATE_DIM:
            raise InvalidDimensionError(f"state dimension d^L = {self.dim} exceeds {MAX_STATE_DIM}")

    @property
    def dim(self) -> int:
        return self.d**self.L

    @property
    def n_terms(self) -> int:
        return self.L - 1

    @property
    def frustration_free_guaranteed(self) -> bool:
        return self.r <= max_ff_rank(self.d, "chain")


@dataclass(frozen=True)
class TreeSpec:
    """k-ary tree with L levels (root = level 1) and one interaction per edge."""

    d: int
    r: int
    k: int
    L: int

    def __post_init__(self):
        if self.k < 2:
            raise InvalidDimensionError(f"branching factor must be >= 2, got {self.k}")
        if self.L < 1:
            raise InvalidDimensionError(f"level count must be >= 1, got {self.L}")
        if self.d < 2:
            raise InvalidDimensionError(f"local dimension must be >= 2, got {self.d}")
        if not (1 <= self.r <= self.d**2):
            raise InvalidRankError(f"rank {self.r} outside 1..d^2 for d={self.d}")
        v = self.vertex_count
        if v * np.log(self.d) > np.log(MAX_STATE_DIM) + 1e-12:
            raise InvalidDimensionError(
                f"state dimension d^V with V={v} vertices exceeds {MAX_STATE_DIM}"
            )

    @property
    def vertex_count(self) -> int:
        return tree_vertex_count(self.k, self.L)

    @property
    def dim(self) -> int:
        return self.d**self.vertex_count

    @property
    def edges(self) -> list[tuple[int, int]]:
        return tree_edges(self.k, self.L)

    @property
    def n_terms(self) -> int:
        return self.vertex_count - 1

    @property
    def frustration_free_guaranteed(self) -> bool:
        return self.r <= max_ff_rank(self.d, "tree", self.k)


def _check_projector_dim(P: LocalProjector, d: int):
    if P.d != d:
        raise InvalidDimensionError(f"projector has d={P.d} but the lattice has d={d}")


def chain_matvec(P: LocalProjector, L: int, x: np.ndarray) -> np.ndarray:
    """Apply the L-site chain Hamiltonian to x without materializing it.

    x may be a vector of dimension d**L or a (d**L, m) block of columns.
    Terms are summed bond by bond in a fixed order, so the floating-point
    result is reproducible.
    """
    d = P.d
    if L < 2:
        raise InvalidDimensionError(f"chain length must be >= 2, got {L}")
    dim = d**L
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[0] != dim:
        raise InvalidDimensionError(f"state dimension {x.shape[0]} does not match d^L = {dim}")
    xb = x.reshape(dim, -1)
    m = xb.shape[1]
    y = np.zeros_like(xb)
    d2 = d * d
    mat = P.matrix
    for j in range(1, L):
        left, right = d ** (j - 1), d ** (L - j - 1)
        x3 = xb.reshape(left, d2, right * m)
        y += (mat @ x3).reshape(dim, m)
    return y.reshape(dim) if single else y


def tree_matvec(P: LocalProjector, k: int, L: int, x: np.ndarray) -> np.ndarray:
    """Apply the k-ary tree Hamiltonian (one projector per edge) to x.

    x may be a vector of dimension d**V or a (d**V, m) block.  The projector's
    first tensor factor acts on the parent vertex, the second on the child.
    """
    d = P.d
    v_count = tree_vertex_count(k, L)
    dim = d**v_count
    if dim > MAX_STATE_DIM:
        raise InvalidDimensionError(f"state dimension d^V = {dim} exceeds {MAX_STATE_DIM}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[0] != dim:
        raise InvalidDimensionError(f"state dimension {x.shape[0]} does not match d^V = {dim}")
    xb = x.reshape(dim, -1)
    m = xb.shape[1]
    xt = xb.reshape((d,) * v_count + (m,))
    yt = np.zeros_like(xt)
    pt = P.matrix.reshape(d, d, d, d)
    for parent, child in tree_edges(k, L):
        term = np.tensordot(pt, xt, axes=([2, 3], [parent, child]))
        yt += np.moveaxis(term, [0, 1], [parent, child])
    y = yt.reshape(dim, m)
    return y.reshape(dim) if single else y


def _chain_dense(P: LocalProjector, L: int) -> np.ndarray:
    d = P.d
    dim = d**L
    d2 = d * d
    h = np.zeros((dim, dim))
    for j in range(1, L):
        left, right = d ** (j - 1), d ** (L - j - 1)
        h6 = h.reshape(left, d2, right, left, d2, right)
        ia = np.arange(left)[:, None]
        ib = np.arange(right)[None, :]
        h6[ia, :, ib, ia, :, ib] += P.matrix
    return h


def _tree_dense(P: LocalProjector, k: int, L: int) -> np.ndarray:
    d = P.d
    v_count = tree_vertex_count(k, L)
    dim = d**v_count
    h = np.zeros((dim, dim))
    eye_rest = np.eye(d ** (v_count - 2)) if v_count >= 2 else None
    for parent, child in tree_edges(k, L):
        # edge operator assembled on site order [parent, child, others], then
        # permuted into canonical vertex order
        e = np.kron(P.matrix, eye_rest)
        order = [parent, child] + [s for s in range(v_count) if s not in (parent, child)]
        pos = [0] * v_count
        for axis, site in enumerate(order):
            pos[site] = axis
        perm = pos + [v_count + p for p in pos]
        h += e.reshape((d,) * (2 * v_count)).transpose(perm).reshape(dim, dim)
    return h


def dense_hamiltonian(spec: ChainSpec | TreeSpec, P: LocalProjector) -> np.ndarray:
    """Materialize the Hamiltonian as a dense symmetric matrix.

    Refuses dimensions above DENSE_DIM_LIMIT; use the matvec routines there.
    """
    _check_projector_dim(P, spec.d)
    if spec.dim > DENSE_DIM_LIMIT:
        raise InvalidDimensionError(
            f"dimension {spec.dim} exceeds the dense-assembly limit {DENSE_DIM_LIMIT}"
        )
    if isinstance(spec, ChainSpec):
        return _chain_dense(P, spec.L)
    return _tree_dense(P, spec.k, spec.L)


def hamiltonian_matvec(spec: ChainSpec | TreeSpec, P: LocalProjector):
    """Return a closure applying the Hamiltonian of ``spec`` to vectors or blocks."""
    _check_projector_dim(P, spec.d)
    if isinstance(spec, ChainSpec):
        return lambda x: chain_matvec(P, spec.L, x)
    return lambda x: tree_matvec(P, spec.k, spec.L, x)
