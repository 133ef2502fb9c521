import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple

import mpmath as mp
import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from QAlgebra import RULES, Monomial, NCMatrix, NCPoly, normal_form, sigma
from QScalar import QContext, TruncationError, qint

# Configuração do logger
logging.basicConfig(filename='CorepModels.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

SECTORS = ("all", "+", "-")


@dataclass(frozen=True, order=True)
class BasisVector:
    """Corepresentation basis label xi^l_{mn} with doubled half-integers."""
    l2: int
    m2: int
    n2: int

    def __post_init__(self):
        if not is_admissible(self.l2, self.m2, self.n2):
            raise ValueError(f"inadmissible label {(self.l2, self.m2, self.n2)}")


def is_admissible(l2: int, m2: int, n2: int) -> bool:
    return (l2 >= 0 and abs(m2) <= l2 and abs(n2) <= l2
            and (l2 - m2) % 2 == 0 and (l2 - n2) % 2 == 0)


class TruncBasis:
    """
    Enumeration of the labels with l2 <= L2, ordered by l2, then m2, then n2.

    Parameters:
    L2 (int): Doubled-spin cutoff.
    sector (str): 'all', '+' (n2 = +1) or '-' (n2 = -1).
    """

    def __init__(self, L2: int, sector: str = "all"):
        if L2 < 0:
            raise ValueError(f"cutoff must be nonnegative, got {L2}")
        if sector not in SECTORS:
            raise ValueError(f"unknown sector {sector!r}")
        self.L2 = L2
        self.sector = sector
        labels = []
        for l2 in range(L2 + 1):
            for m2 in range(-l2, l2 + 1, 2):
                for n2 in range(-l2, l2 + 1, 2):
                    if sector == "+" and n2 != 1:
                        continue
                    if sector == "-" and n2 != -1:
                        continue
                    labels.append((l2, m2, n2))
        self.labels = np.array(labels, dtype=np.int64).reshape(-1, 3)
        self.l2 = self.labels[:, 0]
        self.m2 = self.labels[:, 1]
        self.n2 = self.labels[:, 2]
        self._index = {tuple(int(v) for v in row): i for i, row in enumerate(self.labels)}
        logging.info(f"Base truncada criada: L2={L2}, setor={sector}, dimensão={len(labels)}")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return self.dim

    def vectors(self) -> List[BasisVector]:
        return [BasisVector(*map(int, row)) for row in self.labels]

    def index_of(self, l2: int, m2: int, n2: int) -> Optional[int]:
        return self._index.get((l2, m2, n2))

    def level_indices(self, l2: int) -> np.ndarray:
        return np.nonzero(self.l2 == l2)[0]

    def interior(self, degree: int) -> np.ndarray:
        """Columns whose image under a word of the given degree stays inside the cutoff."""
        return self.l2 <= self.L2 - degree

    def __eq__(self, other) -> bool:
        return isinstance(other, TruncBasis) and (self.L2, self.sector) == (other.L2, other.sector)

    def __hash__(self):
        return hash((self.L2, self.sector))

    def __repr__(self) -> str:
        return f"TruncBasis(L2={self.L2}, sector={self.sector!r}, dim={self.dim})"


@lru_cache(maxsize=32)
def build_basis(L2: int, sector: str = "all") -> TruncBasis:
    return TruncBasis(L2, sector)


@dataclass
class TruncOp:
    """
    Matrix of an operator on a truncated corepresentation basis.

    `degree` bounds the level shift of the operator (in doubled-spin units);
    columns with l2 > L2 - degree may lose mass through the cutoff and are
    excluded from every interior comparison.
    """
    basis: TruncBasis
    matrix: sp.csr_matrix
    degree: int = 0
    copies: int = 1
    _flags: Dict[str, bool] = field(default_factory=dict, repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def interior_mask(self) -> np.ndarray:
        return np.tile(self.basis.interior(self.degree), self.copies)

    def interior_columns(self) -> np.ndarray:
        return np.nonzero(self.interior_mask())[0]

    def on_interior(self) -> sp.csc_matrix:
        return self.matrix.tocsc()[:, self.interior_columns()]

    def _combine(self, other: "TruncOp", matrix, degree: int) -> "TruncOp":
        if self.basis != other.basis or self.copies != other.copies:
            raise ValueError("operators live on different bases")
        return TruncOp(self.basis, sp.csr_matrix(matrix), degree, self.copies)

    def __matmul__(self, other: "TruncOp") -> "TruncOp":
        return self._combine(other, self.matrix @ other.matrix, self.degree + other.degree)

    def __add__(self, other: "TruncOp") -> "TruncOp":
        return self._combine(other, self.matrix + other.matrix, max(self.degree, other.degree))

    def __sub__(self, other: "TruncOp") -> "TruncOp":
        return self._combine(other, self.matrix - other.matrix, max(self.degree, other.degree))

    def scale(self, factor) -> "TruncOp":
        return TruncOp(self.basis, sp.csr_matrix(self.matrix * factor), self.degree, self.copies)

    def adjoint(self) -> "TruncOp":
        return TruncOp(self.basis, sp.csr_matrix(self.matrix.conj().T), self.degree, self.copies)

    def residual(self, other: Optional["TruncOp"] = None) -> float:
        """Largest entry of self - other (or self) on interior columns."""
        diff = self if other is None else self - other
        block = diff.on_interior()
        return float(abs(block).max()) if block.nnz else 0.0

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        if "diagonal" not in self._flags:
            off = self.matrix - sp.diags(self.matrix.diagonal())
            self._flags["diagonal"] = (abs(off).max() if off.nnz else 0.0) <= tol
        return self._flags["diagonal"]

    def is_selfadjoint(self, tol: float = 1e-12) -> bool:
        if "selfadjoint" not in self._flags:
            diff = self.matrix - self.matrix.conj().T
            self._flags["selfadjoint"] = (abs(diff).max() if diff.nnz else 0.0) <= tol
        return self._flags["selfadjoint"]

    def doubled(self, copies: int = 2) -> "TruncOp":
        """The diagonal amplification x (+) x (+) ... on several copies."""
        if self.copies != 1:
            raise ValueError("operator is already amplified")
        return TruncOp(self.basis, sp.csr_matrix(sp.kron(sp.identity(copies), self.matrix)),
                       self.degree, copies)


def identity_op(basis: TruncBasis, copies: int = 1) -> TruncOp:
    return TruncOp(basis, sp.identity(basis.dim * copies, format="csr"), 0, copies)


@lru_cache(maxsize=8)
def _qint_table(ctx: QContext, size: int) -> np.ndarray:
    """[k/2]_q for k = 0..size as float64."""
    with ctx.workprec():
        return np.array([float(qint(mp.mpf(k) / 2, ctx)) for k in range(size + 1)])


def _qi(table: np.ndarray, k2: int) -> float:
    # [k2/2]_q, with [x] odd in x
    return table[k2] if k2 >= 0 else -table[-k2]


def _assemble(basis: TruncBasis, entries: Iterable[Tuple[int, int, float]]) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for r, c, v in entries:
        if v != 0.0:
            rows.append(r)
            cols.append(c)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))


def op_EFK(which: str, basis: TruncBasis, ctx: QContext) -> TruncOp:
    """
    Matrices of E, F, K and K^{-1} on the corepresentation basis.

    Parameters:
    which (str): One of 'E', 'F', 'K', 'Kinv'.
    basis (TruncBasis): Truncated basis.
    ctx (QContext): Deformation context.

    Returns:
    TruncOp: E and F preserve the level, so the whole basis is interior.
    """
    q = ctx.q
    if which == "K":
        return TruncOp(basis, sp.diags(q ** (basis.n2 / 2.0)).tocsr())
    if which == "Kinv":
        return TruncOp(basis, sp.diags(q ** (-basis.n2 / 2.0)).tocsr())
    if which not in ("E", "F"):
        raise ValueError(f"unknown generator {which!r}")
    table = _qint_table(ctx, 2 * basis.L2 + 4)
    entries = []
    for col, (l2, m2, n2) in enumerate(basis.labels):
        step = 2 if which == "E" else -2
        row = basis.index_of(int(l2), int(m2), int(n2 + step))
        if row is None:
            continue
        if which == "E":
            coef = _qi(table, l2 - n2) * _qi(table, l2 + n2 + 2)
        else:
            coef = _qi(table, l2 + n2) * _qi(table, l2 - n2 + 2)
        entries.append((row, col, float(np.sqrt(max(coef, 0.0)))))
    return TruncOp(basis, _assemble(basis, entries))


def op_K_power(power: complex, basis: TruncBasis, ctx: QContext) -> TruncOp:
    """Diagonal K^power = q^{n power}, with complex powers allowed."""
    values = np.exp(np.log(ctx.q) * (basis.n2 / 2.0) * complex(power))
    if np.allclose(values.imag, 0.0):
        values = values.real
    return TruncOp(basis, sp.diags(values).tocsr())


def _pi_generators(basis: TruncBasis, ctx: QContext) -> Dict[str, sp.csr_matrix]:
    q = ctx.q
    table = _qint_table(ctx, 2 * basis.L2 + 6)
    a_entries, c_entries = [], []
    for col, (l2, m2, n2) in enumerate(basis.labels):
        l2, m2, n2 = int(l2), int(m2), int(n2)
        # targets for the four coefficient families; arguments are doubled
        row = basis.index_of(l2 + 1, m2 - 1, n2 - 1)
        if row is not None:
            ratio = (_qi(table, l2 - m2 + 2) * _qi(table, l2 - n2 + 2)
                     / (_qi(table, 2 * l2 + 2) * _qi(table, 2 * l2 + 4)))
            a_entries.append((row, col, q ** ((2 * l2 + m2 + n2 + 2) / 4.0) * np.sqrt(ratio)))
        row = basis.index_of(l2 - 1, m2 - 1, n2 - 1)
        if row is not None:
            ratio = (_qi(table, l2 + m2) * _qi(table, l2 + n2)
                     / (_qi(table, 2 * l2) * _qi(table, 2 * l2 + 2)))
            a_entries.append((row, col, q ** ((-2 * l2 + m2 + n2 - 2) / 4.0) * np.sqrt(ratio)))
        row = basis.index_of(l2 + 1, m2 + 1, n2 - 1)
        if row is not None:
            ratio = (_qi(table, l2 + m2 + 2) * _qi(table, l2 - n2 + 2)
                     / (_qi(table, 2 * l2 + 2) * _qi(table, 2 * l2 + 4)))
            c_entries.append((row, col, q ** ((m2 + n2 - 2) / 4.0) * np.sqrt(ratio)))
        row = basis.index_of(l2 - 1, m2 + 1, n2 - 1)
        if row is not None:
            ratio = (_qi(table, l2 - m2) * _qi(table, l2 + n2)
                     / (_qi(table, 2 * l2) * _qi(table, 2 * l2 + 2)))
            c_entries.append((row, col, -q ** ((m2 + n2 - 2) / 4.0) * np.sqrt(ratio)))
    a = _assemble(basis, a_entries)
    c = _assemble(basis, c_entries)
    return {"a": a, "c": c, "b": sp.csr_matrix(-q * c.T), "d": sp.csr_matrix(a.T)}


def _rho_generators(basis: TruncBasis, ctx: QContext) -> Dict[str, sp.csr_matrix]:
    q = ctx.q
    entries = {"a": [], "b": [], "c": [], "d": []}
    for col, (l2, m2, n2) in enumerate(basis.labels):
        l2, m2, n2 = int(l2), int(m2), int(n2)
        lm = (l2 + m2) // 2  # l + m is an integer
        row = basis.index_of(l2 - 1, m2 - 1, n2 - 1)
        if row is not None:
            entries["a"].append((row, col, np.sqrt(1.0 - q ** (2 * lm))))
        # c carries the sign of the gamma^- coefficient of pi(c); b = -q c^*
        row = basis.index_of(l2 + 1, m2 - 1, n2 + 1)
        if row is not None:
            entries["b"].append((row, col, q ** (lm + 1)))
        row = basis.index_of(l2 - 1, m2 + 1, n2 - 1)
        if row is not None:
            entries["c"].append((row, col, -q ** lm))
        row = basis.index_of(l2 + 1, m2 + 1, n2 + 1)
        if row is not None:
            entries["d"].append((row, col, np.sqrt(1.0 - q ** (2 * lm + 2))))
    return {k: _assemble(basis, v) for k, v in entries.items()}


class CorepModel:
    """
    One representation of the coordinate algebra on a truncated basis.

    `kind` is 'pi' for the GNS left multiplication or 'rho' for the
    approximate representation that shifts m and n diagonally.
    """

    def __init__(self, ctx: QContext, basis: TruncBasis, kind: str = "pi"):
        if kind not in ("pi", "rho"):
            raise ValueError(f"unknown representation {kind!r}")
        self.ctx = ctx
        self.basis = basis
        self.kind = kind
        builder = _pi_generators if kind == "pi" else _rho_generators
        self.generators = builder(basis, ctx)
        self._monomials: Dict[Monomial, sp.csr_matrix] = {}
        logging.info(f"Representação {kind} montada em {basis}")

    def interior(self, degree: int) -> np.ndarray:
        """
        Columns on which words of the given degree act as in the untruncated model.

        rho is cut off at the faces l = m and l = -n of the label cone as well
        as at the level cutoff, so its interior stays `degree` steps away from them.
        """
        mask = self.basis.interior(degree)
        if self.kind == "rho":
            b = self.basis
            mask = mask & (b.l2 - b.m2 >= 2 * degree) & (b.l2 + b.n2 >= 2 * degree)
        return mask

    def monomial(self, mono: Monomial) -> sp.csr_matrix:
        cached = self._monomials.get(mono)
        if cached is not None:
            return cached
        mat = sp.identity(self.basis.dim, format="csr")
        # product x1 x2 ... xk acts as x1 (x2 (... xk))
        for letter in mono.word():
            mat = mat @ self.generators[letter]
        mat = sp.csr_matrix(mat)
        self._monomials[mono] = mat
        return mat

    def represent(self, x: NCPoly) -> TruncOp:
        total = sp.csr_matrix((self.basis.dim, self.basis.dim))
        for mono, coef in x.items():
            value = complex(coef.evaluate(self.ctx))
            factor = value.real if value.imag == 0.0 else value
            total = total + self.monomial(mono) * factor
        return TruncOp(self.basis, sp.csr_matrix(total), x.degree)


@lru_cache(maxsize=16)
def corep_model(ctx: QContext, L2: int, kind: str = "pi", sector: str = "all") -> CorepModel:
    return CorepModel(ctx, build_basis(L2, sector), kind)


def rep_pi(x: NCPoly, basis: TruncBasis, ctx: QContext) -> TruncOp:
    """GNS representation of x; interior columns have l2 <= L2 - deg(x)."""
    return corep_model(ctx, basis.L2, "pi", basis.sector).represent(x)


def rep_rho(x: NCPoly, basis: TruncBasis, ctx: QContext) -> TruncOp:
    """Approximate representation of x built from the diagonal shift formulas."""
    return corep_model(ctx, basis.L2, "rho", basis.sector).represent(x)


def haar(x: NCPoly, ctx: QContext, L2: Optional[int] = None):
    """
    Haar state as the vacuum expectation <xi^0_00, pi(x) xi^0_00>.

    Raises:
    TruncationError: when the cutoff is below twice the degree of x.
    """
    need = 2 * x.degree
    L2 = need if L2 is None else L2
    if L2 < need:
        raise TruncationError(f"haar state of a degree {x.degree} element needs L2 >= {need}, got {L2}")
    if x.degree == 0:
        return complex(x.coefficient(Monomial.unit()).evaluate(ctx))
    basis = build_basis(max(L2, 1))
    model = corep_model(ctx, basis.L2, "pi")
    vacuum = basis.index_of(0, 0, 0)
    value = 0j
    for mono, coef in x.items():
        value += complex(coef.evaluate(ctx)) * model.monomial(mono)[vacuum, vacuum]
    return value


def block_components(matrix: sp.spmatrix, tol: float = 0.0) -> List[np.ndarray]:
    """
    Index sets of the connected components of a square matrix's sparsity graph.

    Entries with modulus <= tol are ignored.
    """
    m = sp.csr_matrix(matrix)
    if tol > 0.0:
        m = m.multiply(abs(m) > tol)
    pattern = (abs(m) + abs(m).T).tocsr()
    n_comp, labels = connected_components(pattern, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.cumsum(np.bincount(labels, minlength=n_comp))[:-1]
    return np.split(order, splits)


def blockwise_eigh(matrix: sp.spmatrix, tol: float = 0.0) -> Tuple[np.ndarray, sp.csr_matrix, List[np.ndarray]]:
    """
    Eigendecomposition of a selfadjoint sparse matrix one connected block at a time.

    Returns:
    tuple: eigenvalues, sparse eigenvector matrix (columns), and the block index sets.
    """
    m = sp.csr_matrix(matrix)
    blocks = block_components(m, tol)
    values = np.zeros(m.shape[0])
    rows, cols, data = [], [], []
    col = 0
    for idx in blocks:
        sub = m[idx][:, idx].toarray()
        w, v = scipy.linalg.eigh(sub)
        values[col:col + len(idx)] = w
        for j in range(len(idx)):
            nz = np.nonzero(np.abs(v[:, j]) > 0.0)[0]
            rows.extend(idx[nz])
            cols.extend([col + j] * len(nz))
            data.extend(v[nz, j])
        col += len(idx)
    vectors = sp.csr_matrix((data, (rows, cols)), shape=m.shape)
    return values, vectors, blocks


def level_series(basis: TruncBasis, contributions: np.ndarray, copies: int = 1) -> Dict[int, float]:
    """Sum per-vector contributions into per-level totals keyed by l2."""
    l2 = np.tile(basis.l2, copies)
    totals = np.bincount(l2, weights=np.real(contributions), minlength=basis.L2 + 1)
    return {int(k): float(v) for k, v in enumerate(totals)}


def level_multiplicity(basis: TruncBasis, copies: int = 1) -> Dict[int, int]:
    counts = np.bincount(basis.l2, minlength=basis.L2 + 1) * copies
    return {int(k): int(v) for k, v in enumerate(counts)}


def difference_decay(generator: str, ctx: QContext, L2: int) -> Dict[int, float]:
    """
    Per-level trace norms of (pi(g) - rho(g)) K^{-1} on the columns of each level.

    The column blocks of one level have disjoint supports after block
    splitting, so the trace norm is read off blockwise singular values.
    """
    basis = build_basis(L2)
    x = NCPoly.gen(generator)
    diff = (rep_pi(x, basis, ctx) - rep_rho(x, basis, ctx)) @ op_EFK("Kinv", basis, ctx)
    mat = diff.matrix.tocsc()
    levels = {}
    for l2 in range(0, L2 - diff.degree + 1):
        cols = basis.level_indices(l2)
        sub = mat[:, cols]
        gram = (sub.conj().T @ sub).tocsr()
        total = 0.0
        for idx in block_components(gram, tol=1e-300):
            block = sub[:, idx]
            rows = np.unique(block.nonzero()[0])
            if rows.size == 0:
                continue
            total += float(np.sum(scipy.linalg.svdvals(block[rows].toarray())))
        levels[l2] = total
    return levels


def relation_residuals(kind: str, ctx: QContext, L2: int = 30) -> Dict[str, float]:
    """
    Largest interior entry of rep(x) rep(y) - rep(normal form of xy) for each
    rewriting rule, plus the unitarity of [[a, b], [c, d]].
    """
    model = corep_model(ctx, L2, kind)
    basis = model.basis
    cols = np.nonzero(model.interior(2))[0]
    gens = model.generators
    out = {}
    for pair in RULES:
        lhs = gens[pair[0]] @ gens[pair[1]]
        diff = sp.csc_matrix(lhs - model.represent(normal_form(pair)).matrix)[:, cols]
        out[pair] = float(abs(diff).max()) if diff.nnz else 0.0
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    worst = 0.0
    for product in (u.star() @ u, u @ u.star()):
        for i in range(2):
            for j in range(2):
                target = sp.identity(basis.dim) if i == j else sp.csr_matrix((basis.dim, basis.dim))
                diff = sp.csc_matrix(model.represent(product[i, j]).matrix - target)[:, cols]
                worst = max(worst, float(abs(diff).max()) if diff.nnz else 0.0)
    out["unitarity"] = worst
    return out


def intertwining_residual(x: NCPoly, z: complex, ctx: QContext, L2: int = 30, kind: str = "pi") -> float:
    """
    || rep(sigma_z(x)) - K^{-iz} rep(x) K^{iz} || on interior columns, relative to
    the largest interior entry of rep(sigma_z(x)) once that exceeds 1.
    """
    model = corep_model(ctx, L2, kind)
    basis = model.basis
    cols = np.nonzero(model.interior(x.degree))[0]
    left = op_K_power(-1j * complex(z), basis, ctx).matrix
    right = op_K_power(1j * complex(z), basis, ctx).matrix
    flowed = sp.csc_matrix(model.represent(sigma(z, x, ctx)).matrix)[:, cols]
    diff = flowed - sp.csc_matrix(left @ model.represent(x).matrix @ right)[:, cols]
    scale = max(1.0, float(abs(flowed).max()) if flowed.nnz else 0.0)
    return float(abs(diff).max()) / scale if diff.nnz else 0.0


def decay_ratios(generator: str, ctx: QContext, L2: int) -> Dict[int, Optional[float]]:
    """
    Per-vector ratio of the (pi - rho) decay between levels one unit of spin apart.

    Level totals are divided by the level multiplicity (l2 + 1)^2 first.
    """
    levels = difference_decay(generator, ctx, L2)
    out = {}
    for l2, value in levels.items():
        before = levels.get(l2 - 2)
        if not before:
            out[l2] = None
            continue
        out[l2] = (value / (l2 + 1) ** 2) / (before / (l2 - 1) ** 2)
    return out
