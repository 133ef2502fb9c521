import math
import logging
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, List, Optional, Tuple

import mpmath as mp
import numpy as np
import scipy.linalg
import scipy.sparse as sp

from CorepModels import TruncBasis, TruncOp, block_components, blockwise_eigh
from QAlgebra import NCMatrix, NCPoly, flow_factor
from QScalar import ConvergenceError, QContext, TruncationError
from TwistedCyclic import BASE, Chain, MatrixAlgebra, ModularTwist, SIGMA_I, cyclic_lambda, gen_trace, twisted_b

# Configuração do logger
logging.basicConfig(filename='ChernIndex.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')


class NotUnitaryError(ValueError):
    """The matrix over the algebra fails u*u = uu* = 1."""


class NotModularError(ValueError):
    """u* sigma_z(u) is not a scalar diagonal matrix."""


class ParityError(ValueError):
    """Chain degree and module parity do not match."""


@dataclass
class LevelSeries:
    """
    Per-level contributions of a truncated trace, with a geometric tail estimate.

    Levels are doubled spins. Ratios compare levels two steps apart, i.e. one
    unit of spin, so that both parities of l2 decay on the same footing.
    """
    contributions: Dict[int, float]
    multiplicity: Dict[int, int] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.contributions.values()))

    def _tops(self) -> List[int]:
        """Highest level of each parity that has a predecessor in the series."""
        tops = []
        for parity in (0, 1):
            same = [l2 for l2 in self.contributions if l2 % 2 == parity]
            if len(same) >= 2:
                tops.append(max(same))
        return tops

    def ratio(self, l2: int, normalized: bool = True) -> Optional[float]:
        if l2 not in self.contributions or (l2 - 2) not in self.contributions:
            return None
        now, before = self.contributions[l2], self.contributions[l2 - 2]
        if normalized and self.multiplicity:
            now /= max(self.multiplicity.get(l2, 1), 1)
            before /= max(self.multiplicity.get(l2 - 2, 1), 1)
        if before == 0.0:
            return None if now == 0.0 else math.inf
        return abs(now / before)

    def ratios(self, normalized: bool = True) -> Dict[int, Optional[float]]:
        return {l2: self.ratio(l2, normalized) for l2 in sorted(self.contributions) if l2 >= 2}

    def tail_estimate(self) -> float:
        """Sum of the geometric continuations of the last level of each parity."""
        if not self._tops():
            return math.inf if any(abs(v) > 0 for v in self.contributions.values()) else 0.0
        tail = 0.0
        for top in self._tops():
            last = self.contributions[top]
            if last == 0.0:
                continue
            r = self.ratio(top, normalized=False)
            if r is None or r >= 1.0:
                return math.inf
            tail += abs(last) * r / (1.0 - r)
        return tail

    def decaying(self) -> bool:
        return math.isfinite(self.tail_estimate())

    def extrapolated(self) -> float:
        """Partial sum plus the signed geometric continuation of each parity."""
        total = self.total
        for top in self._tops():
            last = self.contributions[top]
            before = self.contributions.get(top - 2, 0.0)
            if before == 0.0 or last == 0.0:
                continue
            r = last / before
            if abs(r) < 1.0:
                total += last * r / (1.0 - r)
        return total

    def unit_steps(self) -> List[float]:
        """Contributions grouped one unit of spin at a time, the last group ending at the top level."""
        if not self.contributions:
            return []
        steps = []
        l2 = max(self.contributions)
        while l2 >= 0:
            steps.append(self.contributions.get(l2, 0.0) + self.contributions.get(l2 - 1, 0.0))
            l2 -= 2
        return steps[::-1]

    def accelerated(self, terms: int = 8) -> float:
        """
        Levin u-transform of the last `terms` unit-spin steps, added to the sum of the earlier ones.

        Falls back to `extrapolated` when fewer than four steps are nonzero or the
        transform breaks down.
        """
        steps = self.unit_steps()
        tail = steps[-terms:]
        if len(tail) < 4 or any(s == 0.0 for s in tail):
            return self.extrapolated()
        head = math.fsum(steps[:-len(tail)])
        partial = np.cumsum(tail)
        try:
            with mp.workprec(106):
                levin = mp.levin(method="levin", variant="u")
                value, _ = levin.update_psum([mp.mpf(float(s)) for s in partial])
        except ZeroDivisionError:
            logging.warning("Transformação de Levin degenerada, usando a continuação geométrica")
            return self.extrapolated()
        result = head + float(value)
        return result if math.isfinite(result) else self.extrapolated()

    def as_dict(self) -> dict:
        return {"levels": {str(k): v for k, v in self.contributions.items()},
                "total": self.total, "tail_estimate": self.tail_estimate()}


@dataclass
class PhaseData:
    """Spectral data of a selfadjoint operator decomposed block by block."""
    F: TruncOp
    P: TruncOp
    eigenvalues: np.ndarray
    eigenvectors: sp.csr_matrix
    vector_level: np.ndarray
    zero_modes: int = 0

    def columns(self, sign: int) -> np.ndarray:
        signs = np.where(self.eigenvalues >= 0.0, 1, -1)
        return np.nonzero(signs == sign)[0]

    def abs_values(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def spectral_phase(D: TruncOp, ctx: QContext) -> PhaseData:
    """
    Phase F = sign(D) and projection P = (F + 1)/2 by blockwise eigendecomposition.

    Eigenvalues of modulus below the svd threshold are assigned to the
    nonnegative part and logged.
    """
    if not D.is_selfadjoint(ctx.residual_tol):
        raise ValueError("phase needs a selfadjoint operator")
    values, vectors, blocks = blockwise_eigh(D.matrix)
    small = np.abs(values) < ctx.svd_threshold
    if small.any():
        logging.warning(f"{int(small.sum())} autovalores próximos de zero atribuídos a +1")
        values = np.where(small, 0.0, values)
    signs = np.where(values >= 0.0, 1.0, -1.0)
    F = vectors @ sp.diags(signs) @ vectors.conj().T
    P = vectors @ sp.diags((signs + 1.0) / 2.0) @ vectors.conj().T
    l2 = np.tile(D.basis.l2, D.copies)
    # level of an eigenvector: highest level in its support
    coo = vectors.tocoo()
    level = np.zeros(len(values), dtype=np.int64)
    np.maximum.at(level, coo.col, l2[coo.row])
    return PhaseData(TruncOp(D.basis, sp.csr_matrix(F), 0, D.copies),
                     TruncOp(D.basis, sp.csr_matrix(P), 0, D.copies),
                     values, vectors, level, int(small.sum()))


def phase(D: TruncOp, ctx: QContext) -> Tuple[TruncOp, TruncOp]:
    data = spectral_phase(D, ctx)
    return data.F, data.P


@dataclass
class FredholmModule:
    """
    Truncated modular Fredholm module.

    `represent` maps a chain slot (a Monomial, or (i, j, Monomial) for a
    matrix lift) to its sparse operator on all copies together with its degree.
    """
    basis: TruncBasis
    copies: int
    F: TruncOp
    delta: np.ndarray
    represent: Callable
    ctx: QContext
    twist: ModularTwist = SIGMA_I
    gamma: Optional[np.ndarray] = None
    phase_data: Optional[PhaseData] = None
    algebra: object = BASE
    factory: Optional[Callable[[int], "FredholmModule"]] = None
    _commutators: Dict = field(default_factory=dict, repr=False)
    _lifts: Dict[int, "FredholmModule"] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        F = self.F.matrix
        n = F.shape[0]
        square = F @ F - sp.identity(n)
        res_sq = abs(square).max() if square.nnz else 0.0
        asym = F - F.conj().T
        res_sa = abs(asym).max() if asym.nnz else 0.0
        comm = sp.diags(self.delta) @ F - F @ sp.diags(self.delta)
        res_c = abs(comm).max() / max(self.delta.max(), 1.0) if comm.nnz else 0.0
        tol = max(self.ctx.residual_tol, 1e-9)
        if max(res_sq, res_sa, res_c) > tol:
            raise ValueError(f"F is not a selfadjoint unitary in the centralizer "
                             f"(F^2-1: {res_sq:.2e}, F-F*: {res_sa:.2e}, [F,Delta]: {res_c:.2e})")

    @property
    def odd(self) -> bool:
        return self.gamma is None

    @property
    def dim(self) -> int:
        return self.F.shape[0]

    def levels(self) -> np.ndarray:
        return np.tile(self.basis.l2, self.dim // self.basis.dim)

    def operator(self, element) -> Tuple[sp.csr_matrix, int]:
        return self.represent(element)

    def commutator(self, element) -> Tuple[sp.csr_matrix, int]:
        cached = self._commutators.get(element)
        if cached is None:
            X, deg = self.operator(element)
            F = self.F.matrix
            cached = (sp.csr_matrix(F @ X - X @ F), deg)
            self._commutators[element] = cached
        return cached

    def represent_poly(self, x: NCPoly) -> Tuple[sp.csr_matrix, int]:
        total = sp.csr_matrix((self.basis.dim * self.copies,) * 2)
        for mono, coef in x.items():
            mat, _ = self.represent(mono)
            value = complex(coef.evaluate(self.ctx))
            total = total + mat * (value.real if value.imag == 0.0 else value)
        return sp.csr_matrix(total), x.degree

    def lift(self, size: int) -> "FredholmModule":
        """Amplification to C^size (x) H for chains over matrices."""
        base = self

        def represent(element):
            i, j, mono = element
            mat, deg = base.represent(mono)
            unit = sp.csr_matrix(([1.0], ([i], [j])), shape=(size, size))
            return sp.csr_matrix(sp.kron(unit, mat)), deg

        F = TruncOp(self.basis, sp.csr_matrix(sp.kron(sp.identity(size), self.F.matrix)), 0, self.copies * size)
        gamma = None if self.gamma is None else np.tile(self.gamma, size)
        return FredholmModule(self.basis, self.copies * size, F, np.tile(self.delta, size), represent,
                              self.ctx, self.twist, gamma, None, MatrixAlgebra(size))

    def lifted(self, size: int) -> "FredholmModule":
        cached = self._lifts.get(size)
        if cached is None:
            cached = self.lift(size)
            self._lifts[size] = cached
        return cached


@dataclass
class ChernValue:
    value: complex
    edge_estimate: float
    series: LevelSeries

    @property
    def extrapolated(self) -> complex:
        return self.series.extrapolated() + 1j * self.value.imag


def _degree(element) -> int:
    mono = element[2] if isinstance(element, tuple) else element
    return mono.degree


def chern_eval(FM: FredholmModule, n: int, ch: Chain) -> ChernValue:
    """
    Chern cocycle 1/2 phi(gamma^{n+1} F [F,x_0] ... [F,x_n]) on a chain.

    Every term is traced over the same columns, those whose image stays
    inside the cutoff for the largest total degree in the chain, so the level
    series is comparable across terms. The odd case uses gamma = 1. Chains
    over M_k on a module over the base algebra are evaluated on its k-fold
    amplification.

    Raises:
    ParityError: chain degree or module parity mismatch.
    TruncationError: no interior column is left for some term.
    """
    if ch.degree != n:
        raise ParityError(f"chain degree {ch.degree} differs from cocycle degree {n}")
    if FM.odd == (n % 2 == 0):
        raise ParityError(f"degree {n} does not match a {'odd' if FM.odd else 'even'} module")
    if isinstance(ch.algebra, MatrixAlgebra) and FM.algebra is BASE:
        FM = FM.lifted(ch.algebra.size)
    if ch.algebra != FM.algebra:
        raise ValueError("chain and module live over different algebras")
    levels = FM.levels()
    L2 = FM.basis.L2
    top = L2 - max((sum(_degree(x) for x in t) for t in ch.terms), default=0)
    if top < 0:
        raise TruncationError(f"cutoff L2={L2} leaves no interior column for this chain")
    cols = np.nonzero(levels <= top)[0]
    identity = sp.identity(FM.dim, format="csr")[:, cols]
    contrib = np.zeros(FM.dim, dtype=complex)
    F = FM.F.matrix
    sign = np.ones(FM.dim) if FM.gamma is None else FM.gamma ** (n + 1)
    for tensor, coef in ch.items():
        block = identity
        for x in reversed(tensor):
            comm, _ = FM.commutator(x)
            block = comm @ block
        block = sp.csr_matrix(F @ block)
        diag = np.asarray(block[cols, np.arange(cols.size)]).ravel()
        value = complex(coef.evaluate(FM.ctx))
        contrib[cols] += 0.5 * value * sign[cols] * FM.delta[cols] * diag
    per_level = np.bincount(levels[cols], weights=contrib[cols].real, minlength=top + 1)
    multiplicity = np.bincount(levels[cols], minlength=top + 1)
    series = LevelSeries({int(k): float(v) for k, v in enumerate(per_level)},
                         {int(k): int(v) for k, v in enumerate(multiplicity)})
    value = complex(contrib.sum())
    return ChernValue(value, series.tail_estimate(), series)


def unitarity_residual(u: NCMatrix, ctx: QContext) -> float:
    k = u.size
    one = NCMatrix.identity(k)
    return max((u.star() @ u - one).max_abs(ctx), (u @ u.star() - one).max_abs(ctx))


def unitary_chern(u: NCMatrix, n: int, ctx: QContext) -> Chain:
    """
    Chern chain TR(u (x) u* (x) ... (x) u (x) u*) of degree 2n-1, reduced.

    Raises:
    NotUnitaryError: when u*u or uu* differs from 1 beyond the residual tolerance.
    """
    if n < 1:
        raise ValueError("the odd Chern chain needs n >= 1")
    residual = unitarity_residual(u, ctx)
    if residual > ctx.residual_tol:
        raise NotUnitaryError(f"unitarity residual {residual:.3e} exceeds {ctx.residual_tol:.1e}")
    entries = [u, u.star()] * n
    return gen_trace(Chain.from_tensor(entries), reduced=True)


@dataclass
class ModularGroup:
    """g_z = u* sigma_z(u) = diag(q^{-iz w_j}) for a right C-modular unitary."""
    weights2: Tuple[int, ...]
    ctx: QContext
    grading: str = "n"

    def __call__(self, z: complex) -> np.ndarray:
        c = -0.5 if self.grading == "n" else 1.0
        w = np.array(self.weights2, dtype=float)
        return np.diag(np.exp(1j * complex(z) * c * w * math.log(self.ctx.q)))

    def weight_vector(self, z: complex) -> np.ndarray:
        return np.real_if_close(np.diag(self(z)))

    def is_positive(self, t: float) -> bool:
        g = self(1j * t)
        return bool(np.allclose(g, g.conj().T) and np.all(np.linalg.eigvalsh((g + g.conj().T) / 2) > 0))

    def group_residual(self, z: complex, w: complex) -> float:
        return float(np.max(np.abs(self(z) @ self(w) - self(z + w))))


def modular_check(u: NCMatrix, ctx: QContext, grading: str = "n") -> ModularGroup:
    """
    Verify right C-modularity and return the group z -> g_z.

    Every column must be homogeneous for the grading; g_i computed
    symbolically as u* sigma_i(u) is compared with the diagonal prediction, and
    u* sigma_z(u) with the returned group at z = -i and z = 1/2. The group law
    and the positivity of g_i and g_-i are checked on the result.
    """
    k = u.size
    weights = []
    for j in range(k):
        column = set()
        for i in range(k):
            w = u[i, j].homogeneous_weight2(grading)
            if u[i, j].is_zero():
                continue
            if w is None:
                raise NotModularError(f"entry ({i},{j}) = {u[i, j]!r} is not homogeneous")
            column.add(w)
        if len(column) != 1:
            raise NotModularError(f"column {j} mixes weights {sorted(column)}")
        weights.append(column.pop())
    group = ModularGroup(tuple(weights), ctx, grading)
    g_i = u.star() @ u.sigma(1j, ctx, grading)
    residual = 0.0
    for i in range(k):
        for j in range(k):
            expected = NCPoly.scalar(flow_factor(1j, weights[j], grading)) if i == j else NCPoly.zero()
            residual = max(residual, (g_i[i, j] - expected).max_abs(ctx))
    if residual > ctx.residual_tol:
        raise NotModularError(f"u* sigma_i(u) deviates from its diagonal by {residual:.3e}")
    for z in (-1j, 0.5):
        g_z = u.star() @ u.sigma(z, ctx, grading)
        expected = group(z)
        for i in range(k):
            for j in range(k):
                residual = max(residual, (g_z[i, j] - NCPoly.scalar(complex(expected[i, j]))).max_abs(ctx))
    if residual > ctx.residual_tol:
        raise NotModularError(f"u* sigma_z(u) deviates from g_z by {residual:.3e}")
    drift = max(group.group_residual(z, w) for z, w in ((1j, -1j), (0.5, 1j), (-1j, -1j)))
    if drift > ctx.residual_tol:
        raise NotModularError(f"z -> g_z is not a one-parameter group (residual {drift:.3e})")
    if not (group.is_positive(1.0) and group.is_positive(-1.0)):
        raise NotModularError("g_i or g_-i is not positive")
    logging.info(f"Unitário modular verificado: pesos {weights}")
    return group


@dataclass
class IndexReport:
    q: float
    unitary: str
    cutoff: int
    svd_threshold: float
    kernel_dim: int
    cokernel_dim: int
    psi_trace: float
    phi_trace: float
    index_numeric: float
    index_closed: Optional[float] = None
    cone_correction: Optional[float] = None
    index_expected: Optional[float] = None
    abs_err: Optional[float] = None
    gap_ratio: Optional[float] = None
    stable: bool = False
    stability: Dict = field(default_factory=dict)
    pairing: Optional[float] = None
    pairing_err: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class _KernelData:
    dim: int
    weighted: float
    zero_max: float
    nonzero_min: float


def _split_kernel(A: sp.csr_matrix, threshold: float) -> Tuple[List[np.ndarray], float, float]:
    """
    Right null vectors of A, one small SVD per block of the Gram matrix A*A.

    Returns the null vectors (as dense columns over the columns of A), the
    largest singular value counted as zero and the smallest counted as nonzero.
    """
    A = sp.csc_matrix(A)
    gram = (A.conj().T @ A).tocsr()
    scale = abs(gram).max() if gram.nnz else 0.0
    vectors: List[np.ndarray] = []
    zero_max, nonzero_min = 0.0, math.inf
    for idx in block_components(gram, tol=1e-13 * scale):
        sub = A[:, idx]
        rows = np.unique(sub.nonzero()[0])
        if rows.size == 0:
            for j in range(idx.size):
                vec = np.zeros(A.shape[1], dtype=complex)
                vec[idx[j]] = 1.0
                vectors.append(vec)
            continue
        dense = sub[rows].toarray()
        _, s, vh = scipy.linalg.svd(dense, full_matrices=True)
        s_full = np.zeros(idx.size)
        s_full[:s.size] = s
        for j in range(idx.size):
            if s_full[j] < threshold:
                zero_max = max(zero_max, s_full[j])
                vec = np.zeros(A.shape[1], dtype=complex)
                vec[idx] = vh[j].conj()
                vectors.append(vec)
            else:
                nonzero_min = min(nonzero_min, s_full[j])
    return vectors, zero_max, nonzero_min


def _toeplitz_kernels(FM: FredholmModule, u: NCMatrix, group: ModularGroup) -> Tuple[_KernelData, _KernelData]:
    if FM.phase_data is None:
        raise ValueError("the module carries no spectral data for its phase")
    ctx = FM.ctx
    k = u.size
    N = FM.dim
    blocks = [[FM.represent_poly(u[i, j])[0] for j in range(k)] for i in range(k)]
    U = sp.csr_matrix(sp.bmat(blocks))
    deg = u.degree
    pd = FM.phase_data
    V = pd.eigenvectors.tocsc()
    src_ok = pd.vector_level <= FM.basis.L2 - deg
    delta = np.tile(FM.delta, k)
    psi_weight = np.kron(np.real(group.weight_vector(-1j)), FM.delta)

    results = []
    for sign, weight, push in ((1, psi_weight, False), (-1, delta, True)):
        cols = pd.columns(sign)
        src = cols[src_ok[cols]]
        Vt = sp.csr_matrix(sp.kron(sp.identity(k), V[:, cols]))
        Vs = sp.csr_matrix(sp.kron(sp.identity(k), V[:, src]))
        A = (Vt.conj().T @ U @ Vs).tocsr()
        threshold = ctx.svd_threshold * max(1.0, float(abs(A).max()) if A.nnz else 1.0)
        vectors, zero_max, nonzero_min = _split_kernel(A, threshold)
        weighted = 0.0
        for c in vectors:
            v = Vs @ c
            if push:
                v = U @ v
            weighted += float(np.real(np.vdot(v, weight * v)))
        results.append(_KernelData(len(vectors), weighted, zero_max, nonzero_min))
        logging.info(f"Núcleo (sinal {sign}): dimensão {len(vectors)}, traço ponderado {weighted:.10f}")
    return results[0], results[1]


def _gap(kernel: _KernelData, cokernel: _KernelData) -> float:
    zero = max(kernel.zero_max, cokernel.zero_max)
    nonzero = min(kernel.nonzero_min, cokernel.nonzero_min)
    if zero == 0.0:
        return math.inf
    return nonzero / zero


def toeplitz_index(FM: FredholmModule, u: NCMatrix, ctx: QContext, label: str = "custom",
                   closed: Optional[float] = None, correction: float = 0.0, stability_step: int = 10,
                   stability_tol: float = 1e-4, closed_tol: float = 1e-4) -> IndexReport:
    """
    Twisted index psi(K_{PuP}) - phi(K_{Pu*P}) on the truncated module.

    The kernel of PuP + 1 - P is computed on P-eigenvectors whose image under u
    stays inside the cutoff; the kernel of Pu*P + 1 - P is obtained as u applied
    to the kernel of (1-P)u(1-P), which spans the same space.

    When `closed` is given the index is compared with closed + correction, and
    the report is stable only if it lies within closed_tol of that value and
    the rerun at a lower cutoff drifts by at most stability_tol.

    Raises:
    ConvergenceError: when the singular values show no clean gap at the threshold.
    """
    group = modular_check(u, ctx)
    kernel, cokernel = _toeplitz_kernels(FM, u, group)
    gap = _gap(kernel, cokernel)
    if gap < ctx.gap_ratio:
        raise ConvergenceError("singular values show no clean gap at the threshold; raise cutoff/precision",
                               {"gap_ratio": gap, "cutoff": FM.basis.L2, "unitary": label})
    index = kernel.weighted - cokernel.weighted
    report = IndexReport(q=ctx.q, unitary=label, cutoff=FM.basis.L2, svd_threshold=ctx.svd_threshold,
                         kernel_dim=kernel.dim, cokernel_dim=cokernel.dim, psi_trace=kernel.weighted,
                         phi_trace=cokernel.weighted, index_numeric=index, gap_ratio=gap)
    agrees = True
    if closed is not None:
        report.index_closed = closed
        report.cone_correction = correction
        report.index_expected = closed + correction
        report.abs_err = abs(index - report.index_expected)
        agrees = report.abs_err <= closed_tol
        if not agrees:
            logging.warning(f"Índice {index:.8f} longe do esperado {report.index_expected:.8f} ({label})")
    lower = FM.basis.L2 - stability_step
    if FM.factory is not None and lower > u.degree:
        k_low, c_low = _toeplitz_kernels(FM.factory(lower), u, group)
        index_low = k_low.weighted - c_low.weighted
        report.stability = {"cutoff": lower, "kernel_dim": k_low.dim, "cokernel_dim": c_low.dim,
                            "index_numeric": index_low, "drift": abs(index - index_low)}
        report.stable = abs(index - index_low) <= stability_tol and agrees
    else:
        logging.warning(f"Sem reexecução de estabilidade para L2={FM.basis.L2}")
    return report


def polar_parts(x: np.ndarray, tol: float = 1e-12) -> Tuple[np.ndarray, np.ndarray]:
    """Partial isometry v and |x| of the polar decomposition x = v|x|."""
    U, s, Vh = scipy.linalg.svd(x)
    rank = int(np.sum(s > tol * max(s.max(), 1.0)))
    v = U[:, :rank] @ Vh[:rank]
    return v, (Vh.conj().T * np.pad(s, (0, Vh.shape[0] - s.size))) @ Vh


def polar_identity_residuals(x: np.ndarray, m: int) -> Tuple[float, float]:
    """Residuals of (1 - x*x)^m - (1 - v*v) = (1 - x*x)^m v*v and its xx* companion."""
    v, _ = polar_parts(x)
    one = np.eye(x.shape[0])
    left = np.linalg.matrix_power(one - x.conj().T @ x, m)
    right = np.linalg.matrix_power(one - x @ x.conj().T, m)
    r1 = left - (one - v.conj().T @ v) - left @ (v.conj().T @ v)
    r2 = right - (one - v @ v.conj().T) - right @ (v @ v.conj().T)
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


def phase_flow_residual(x: np.ndarray, delta: np.ndarray, g: np.ndarray, t: float) -> float:
    """|| Delta^{it} v Delta^{-it} - g^{it} v || for the partial isometry v of x (g diagonal)."""
    v, _ = polar_parts(x)
    flow = np.exp(1j * t * (np.log(delta)[:, None] - np.log(delta)[None, :]))
    return float(np.max(np.abs(flow * v - (np.exp(1j * t * np.log(g)))[:, None] * v)))


def kernel_projection_drift(x: np.ndarray, delta: np.ndarray, t: float, tol: float = 1e-10) -> float:
    """How far Delta^{it} K Delta^{-it} moves the kernel projection K of x."""
    _, s, Vh = scipy.linalg.svd(x)
    s_full = np.pad(s, (0, Vh.shape[0] - s.size))
    null = Vh[s_full < tol * max(s.max(), 1.0)].conj().T
    K = null @ null.conj().T
    flow = np.exp(1j * t * (np.log(delta)[:, None] - np.log(delta)[None, :]))
    return float(np.max(np.abs(flow * K - K))) if K.size else 0.0


def resolvent_phase_residual(D: TruncOp, F: TruncOp) -> float:
    """|| F D (1+|D|)^{-1} - 1 + (1+|D|)^{-1} || from the blockwise spectrum of D."""
    values, vectors, _ = blockwise_eigh(D.matrix)
    resolvent = vectors @ sp.diags(1.0 / (1.0 + np.abs(values))) @ vectors.conj().T
    FD = D.matrix @ resolvent
    diff = F.matrix @ FD - sp.identity(D.shape[0]) + resolvent
    return float(abs(diff).max()) if diff.nnz else 0.0


def cocycle_residuals(FM: FredholmModule, ch: Chain, higher: Chain) -> Dict[str, float]:
    """
    How far the truncated Chern cocycle is from a twisted cyclic cocycle.

    cyclic is |Ch(lambda ch) - Ch(ch)| and boundary is |Ch(b_sigma higher)|, both
    on the Levin-accelerated level series; higher has degree one more than ch.
    """
    n = ch.degree
    if higher.degree != n + 1:
        raise ParityError(f"boundary check needs a degree {n + 1} chain, got {higher.degree}")
    value = chern_eval(FM, n, ch).series.accelerated()
    rotated = chern_eval(FM, n, cyclic_lambda(ch, FM.twist)).series.accelerated()
    boundary = chern_eval(FM, n, twisted_b(higher, FM.twist)).series.accelerated()
    return {"cyclic": abs(rotated - value), "boundary": abs(boundary)}
