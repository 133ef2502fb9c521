import math
import logging
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath as mp
import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ChernIndex import (ChernValue, FredholmModule, IndexReport, LevelSeries, ModularGroup, NotUnitaryError,
                        chern_eval, modular_check, spectral_phase, toeplitz_index, unitarity_residual,
                        unitary_chern)
from CorepModels import TruncBasis, TruncOp, block_components, build_basis, corep_model, haar, op_EFK
from QAlgebra import Monomial, NCMatrix, NCPoly, drop_scalar, sigma
from QScalar import ConfigurationError, ConvergenceError, Exact, QContext, TruncationError, qint
from TwistedCyclic import BASE, Chain, SIGMA_I, ModularTwist

# Configuração do logger
logging.basicConfig(filename='SUq2Triple.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

THETA = ModularTwist(-2j, "n")


def _diag(values: np.ndarray) -> sp.csr_matrix:
    return sp.diags(values).tocsr()


def dq_blocks(ctx: QContext, basis: TruncBasis) -> Dict[str, sp.csr_matrix]:
    """The four blocks of D_q on H (+) H, each computed from its own formula."""
    q = ctx.q
    E = op_EFK("E", basis, ctx).matrix
    F = op_EFK("F", basis, ctx).matrix
    Kinv = op_EFK("Kinv", basis, ctx).matrix
    Kinv2 = Kinv @ Kinv
    one = sp.identity(basis.dim, format="csr")
    return {
        "top": sp.csr_matrix((Kinv2 / q - one) / (q - 1.0 / q)),
        "upper": sp.csr_matrix(F @ Kinv * math.sqrt(q)),
        "lower": sp.csr_matrix(E @ Kinv / math.sqrt(q)),
        "bottom": sp.csr_matrix((one - q * Kinv2) / (q - 1.0 / q)),
    }


def dq_asymmetry(ctx: QContext, basis: TruncBasis) -> float:
    """Relative mismatch between the lower block and the adjoint of the upper block."""
    blocks = dq_blocks(ctx, basis)
    diff = blocks["lower"] - blocks["upper"].conj().T
    scale = max(float(abs(blocks["upper"]).max()) if blocks["upper"].nnz else 0.0, 1.0)
    return (float(abs(diff).max()) if diff.nnz else 0.0) / scale


def build_dq(ctx: QContext, basis: TruncBasis) -> TruncOp:
    """
    D_q on two copies of the truncated space, as a 2x2 block operator.

    The lower block is taken as the adjoint of the upper one so the matrix is
    selfadjoint to the last bit; `dq_asymmetry` measures the agreement of the
    two formulas.
    """
    blocks = dq_blocks(ctx, basis)
    mismatch = dq_asymmetry(ctx, basis)
    if mismatch > 1e-12:
        logging.warning(f"Blocos fora da diagonal de D_q divergem: {mismatch:.3e}")
    matrix = sp.bmat([[blocks["top"], blocks["upper"]],
                      [blocks["upper"].conj().T, blocks["bottom"]]]).tocsr()
    return TruncOp(basis, matrix, 0, 2)


def delta_weights(ctx: QContext, basis: TruncBasis) -> np.ndarray:
    """Delta = K^{-1} q^{-1/2} on the top copy and K^{-1} q^{1/2} on the bottom copy."""
    n = basis.n2 / 2.0
    return np.concatenate([ctx.q ** (-n - 0.5), ctx.q ** (-n + 0.5)])


def op_T_R(ctx: QContext, basis: TruncBasis) -> Tuple[TruncOp, TruncOp]:
    """
    T xi^l_mn = q^{l+1/2} xi^l_mn and R = T^2 K^{-2} (1 - T^2)^{-1} T on one copy.

    Returns:
    tuple: (T, R) as diagonal operators.
    """
    q = ctx.q
    l = basis.l2 / 2.0
    n = basis.n2 / 2.0
    t = q ** (l + 0.5)
    r = q ** (2 * l + 1 - 2 * n) / (1.0 - q ** (2 * l + 1)) * t
    return TruncOp(basis, _diag(t)), TruncOp(basis, _diag(r))


def constant_C(ctx: QContext):
    """C = q^{1/2}/(1-q^{1/2})^2 + q^{3/2}/(1-q^{3/2})^2."""
    with ctx.workprec():
        s = ctx.s
        return s / (1 - s) ** 2 + s ** 3 / (1 - s ** 3) ** 2


def trace_r_closed(ctx: QContext):
    with ctx.workprec():
        return constant_C(ctx) / (1 / ctx.mq - ctx.mq)


@dataclass
class TraceRReport:
    q: float
    cutoff: int
    partial_sum: float
    closed_form: float
    abs_err: float
    tail_estimate: float

    def as_dict(self) -> dict:
        return asdict(self)


def trace_r(ctx: QContext, L2: int) -> TraceRReport:
    """Partial trace of R up to the cutoff against its closed form."""
    basis = build_basis(L2)
    _, R = op_T_R(ctx, basis)
    diag = R.matrix.diagonal()
    per_level = np.bincount(basis.l2, weights=diag, minlength=L2 + 1)
    series = LevelSeries({int(k): float(v) for k, v in enumerate(per_level)})
    closed = float(trace_r_closed(ctx))
    total = float(math.fsum(per_level))
    logging.info(f"Tr(R) parcial {total:.12f}, forma fechada {closed:.12f}")
    return TraceRReport(ctx.q, L2, total, closed, abs(total - closed), series.tail_estimate())


def closed_index(l2: int, ctx: QContext):
    """Index of the spin l2/2 corepresentation unitary: C/2 ((2l+1) - [2l+1]_{q^{1/2}})."""
    if l2 < 0:
        raise ConfigurationError(f"spin must be nonnegative, got l2={l2}")
    with ctx.workprec():
        return constant_C(ctx) / 2 * ((l2 + 1) - qint(l2 + 1, ctx, base=ctx.s))


def modular_index_formula(g_minus_i: np.ndarray, ctx: QContext) -> float:
    """C/2 Tr(1 - g_{-i}) for a right modular unitary with scalar diagonal g."""
    g = np.real(np.diag(g_minus_i)) if np.ndim(g_minus_i) == 2 else np.real(g_minus_i)
    return float(constant_C(ctx)) / 2.0 * float(np.sum(1.0 - g))


def _weights(l2: int) -> List[int]:
    return list(range(-l2, l2 + 1, 2))


def _prune(x: NCPoly, tol: float = 1e-14) -> NCPoly:
    terms = {}
    for mono, coef in x.items():
        kept = Exact({k: c for k, c in coef.items() if abs(c) > tol})
        if not kept.is_zero():
            terms[mono] = kept
    return NCPoly(terms)


def _tensor_half(u: NCMatrix, half: NCMatrix) -> NCMatrix:
    k = u.size
    return NCMatrix([[u[i, j] * half[al, be] for j in range(k) for be in range(2)]
                     for i in range(k) for al in range(2)])


def _intertwiner(X: NCMatrix, labels: List[int], lower: NCMatrix, lower_labels: List[int],
                 ctx: QContext) -> np.ndarray:
    """
    Scalar V with X V = V lower, unknowns restricted to equal weight labels.

    Raises:
    ConvergenceError: when the solution space is not one dimensional.
    """
    N, k = X.size, lower.size
    unknowns = [(r, c) for r in range(N) for c in range(k) if labels[r] == lower_labels[c]]
    position = {rc: i for i, rc in enumerate(unknowns)}
    equations: Dict[Tuple[int, int, Monomial], Dict[int, float]] = {}

    def add(key, unknown, value):
        row = equations.setdefault(key, {})
        row[unknown] = row.get(unknown, 0.0) + value

    for (t, c), idx in position.items():
        for r in range(N):
            for mono, coef in X[r, t].items():
                add((r, c, mono), idx, float(mp.re(coef.evaluate(ctx))))
    for (r, t), idx in position.items():
        for c in range(k):
            for mono, coef in lower[t, c].items():
                add((r, c, mono), idx, -float(mp.re(coef.evaluate(ctx))))
    M = np.zeros((len(equations), len(unknowns)))
    for row, (_, entries) in enumerate(sorted(equations.items(), key=lambda kv: str(kv[0]))):
        for idx, value in entries.items():
            M[row, idx] = value
    null = scipy.linalg.null_space(M, rcond=1e-10)
    if null.shape[1] != 1:
        logging.error(f"Solução do entrelaçador com dimensão {null.shape[1]}")
        raise ConvergenceError("intertwiner solve is rank deficient; raise precision",
                               {"null_dimension": int(null.shape[1]), "size": N})
    V = np.zeros((N, k))
    for (r, c), idx in position.items():
        V[r, c] = null[idx, 0]
    gram = V.T @ V
    return V / math.sqrt(np.trace(gram) / k)


def _complement(V: np.ndarray, labels: List[int], target: List[int]) -> np.ndarray:
    """Orthonormal weight vectors spanning the complement of range(V), one per target label."""
    N = V.shape[0]
    labels = np.array(labels)
    W = np.zeros((N, len(target)))
    for j, w in enumerate(target):
        idx = np.nonzero(labels == w)[0]
        basis = scipy.linalg.null_space(V[idx].T) if V.shape[1] else np.eye(idx.size)
        if basis.shape[1] != 1:
            raise ConvergenceError("complementary weight space is not one dimensional",
                                   {"label": int(w), "dimension": int(basis.shape[1])})
        vec = basis[:, 0]
        lead = vec[np.nonzero(np.abs(vec) > 1e-12)[0][0]]
        W[idx, j] = vec * np.sign(lead)
    return W


@lru_cache(maxsize=16)
def corep_unitary(l2: int, ctx: QContext) -> NCMatrix:
    """
    Corepresentation unitary of spin l2/2.

    For l2 >= 2 the spin l2/2 block is read off the tensor product of the
    previous unitary with the fundamental one, as the complement of the
    intertwiner from the spin (l2-2)/2 block.

    Parameters:
    l2 (int): Twice the spin, at most ctx.max_spin2.
    ctx (QContext): Deformation context.

    Returns:
    NCMatrix: (l2+1) x (l2+1) unitary with columns ordered by ascending weight.
    """
    if l2 < 0 or l2 > ctx.max_spin2:
        raise ConfigurationError(f"spin l2={l2} outside [0, {ctx.max_spin2}]")
    if l2 == 0:
        return NCMatrix.identity(1)
    half = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    if l2 == 1:
        return half
    prev = corep_unitary(l2 - 1, ctx)
    lower = corep_unitary(l2 - 2, ctx)
    X = _tensor_half(prev, half)
    labels = [w + v for w in _weights(l2 - 1) for v in (-1, 1)]
    V = _intertwiner(X, labels, lower, _weights(l2 - 2), ctx)
    W = _complement(V, labels, _weights(l2))
    N = X.size
    rows = []
    for i in range(l2 + 1):
        row = []
        for j in range(l2 + 1):
            acc = NCPoly.zero()
            for r in np.nonzero(W[:, i])[0]:
                for t in np.nonzero(W[:, j])[0]:
                    acc = acc + X[int(r), int(t)] * float(W[r, i] * W[t, j])
            row.append(_prune(acc))
        rows.append(row)
    u = NCMatrix(rows)
    residual = unitarity_residual(u, ctx)
    if residual > ctx.residual_tol:
        raise NotUnitaryError(f"spin {l2}/2 unitary has residual {residual:.3e}")
    group = modular_check(u, ctx)
    if list(group.weights2) != _weights(l2):
        raise ConvergenceError("column weights out of order", {"weights": list(group.weights2)})
    logging.info(f"Unitário de spin {l2}/2 construído, resíduo {residual:.2e} (N={N})")
    return u


@dataclass
class TraceValue:
    value: complex
    series: LevelSeries

    @property
    def tail_estimate(self) -> float:
        return self.series.tail_estimate()

    @property
    def extrapolated(self) -> float:
        return self.series.extrapolated()


@dataclass
class AlphaValue:
    trace_form: TraceValue
    local_form: TraceValue

    @property
    def difference(self) -> float:
        return abs(self.trace_form.extrapolated - self.local_form.extrapolated)


class SUq2Triple:
    """
    Modular spectral triple over quantum SU(2) on a truncated two-copy space.

    Parameters:
    ctx (QContext): Deformation context.
    L2 (int): Doubled-spin cutoff.
    """

    def __init__(self, ctx: QContext, L2: int):
        if L2 < 1:
            raise ConfigurationError(f"cutoff must be at least 1, got {L2}")
        self.ctx = ctx
        self.L2 = L2
        self.basis = build_basis(L2)
        self.D = build_dq(ctx, self.basis)
        self.delta = delta_weights(ctx, self.basis)
        self.T, self.R = op_T_R(ctx, self.basis)
        self.phase_data = spectral_phase(self.D, ctx)
        self.F = self.phase_data.F
        self.P = self.phase_data.P
        self.twist = THETA
        self.pi = corep_model(ctx, L2, "pi")
        self.rho = corep_model(ctx, L2, "rho")
        self._represented: Dict[Monomial, Tuple[sp.csr_matrix, int]] = {}
        self._module: Optional[FredholmModule] = None
        residual = self.phase_residual()
        if residual > 1e-8:
            logging.error(f"Fase de D_q diverge da identidade fechada: {residual:.3e}")
            raise ConvergenceError("phase of D_q disagrees with (q^-1 - q) D (1-T^2)^-1 T Delta^-1",
                                   {"residual": residual, "cutoff": L2})
        logging.info(f"Tripla SU_q(2) montada: q={ctx.q}, L2={L2}, dimensão={self.D.shape[0]}")

    def phase_residual(self) -> float:
        q = self.ctx.q
        t = np.tile(self.T.matrix.diagonal(), 2)
        closed = self.D.matrix @ _diag((q ** -1 - q) * t / (1.0 - t ** 2) / self.delta)
        diff = closed - self.F.matrix
        return float(abs(diff).max()) if diff.nnz else 0.0

    def delta_commutator(self) -> float:
        d = _diag(self.delta)
        diff = d @ self.D.matrix - self.D.matrix @ d
        scale = float(abs(self.D.matrix).max()) * float(self.delta.max())
        return (float(abs(diff).max()) if diff.nnz else 0.0) / scale

    def represent(self, mono: Monomial) -> Tuple[sp.csr_matrix, int]:
        cached = self._represented.get(mono)
        if cached is None:
            cached = (sp.csr_matrix(sp.kron(sp.identity(2), self.pi.monomial(mono))), mono.degree)
            self._represented[mono] = cached
        return cached

    def module(self) -> FredholmModule:
        if self._module is None:
            ctx = self.ctx
            self._module = FredholmModule(self.basis, 2, self.F, self.delta, self.represent, ctx,
                                          SIGMA_I, None, self.phase_data, BASE,
                                          factory=lambda L2: suq2_triple(ctx, L2).module())
        return self._module

    def _series(self, diag: np.ndarray, copies: int, degree: int) -> TraceValue:
        levels = np.tile(self.basis.l2, copies)
        top = self.L2 - degree
        if top < 0:
            raise TruncationError(f"cutoff L2={self.L2} too small for degree {degree}")
        mask = levels <= top
        per = np.bincount(levels[mask], weights=np.real(diag[mask]), minlength=top + 1)
        mult = np.bincount(levels[mask], minlength=top + 1)
        series = LevelSeries({int(k): float(v) for k, v in enumerate(per)},
                             {int(k): int(v) for k, v in enumerate(mult)})
        return TraceValue(complex(np.sum(diag[mask])), series)

    def _copies(self, matrix: sp.spmatrix) -> sp.csr_matrix:
        return sp.csr_matrix(sp.kron(sp.identity(2), matrix))

    def _gamma_trace(self, diff: sp.spmatrix, degree: int) -> TraceValue:
        M = self._copies(diff)
        diag = np.asarray(M.multiply(self.F.matrix.T).sum(axis=1)).ravel() * self.delta
        return self._series(diag, 2, degree)

    def gamma(self, x: NCPoly) -> TraceValue:
        """Gamma(x) = Tr(Delta (pi(x) - rho(x)) F) over both copies."""
        diff = self.pi.represent(x).matrix - self.rho.represent(x).matrix
        return self._gamma_trace(diff, x.degree)

    def boundary_images(self, x: NCPoly, y: NCPoly) -> Tuple[sp.csr_matrix, sp.csr_matrix, int]:
        """
        Images of x y - sigma_i(y) x under pi and under rho applied word by word,
        rho(x) rho(y) - rho(sigma_i(y)) rho(x), together with its degree.

        rho is not multiplicative on the faces of the label cone, so the second
        image differs there from rho of the normal form.
        """
        sy = sigma(1j, y)
        px, py, psy = (self.pi.represent(v).matrix for v in (x, y, sy))
        rx, ry, rsy = (self.rho.represent(v).matrix for v in (x, y, sy))
        return sp.csr_matrix(px @ py - psy @ px), sp.csr_matrix(rx @ ry - rsy @ rx), x.degree + y.degree

    def gamma_boundary(self, x: NCPoly, y: NCPoly) -> TraceValue:
        images, words, degree = self.boundary_images(x, y)
        return self._gamma_trace(images - words, degree)

    def r_trace(self, x: NCPoly) -> TraceValue:
        """Tr(rho(x) R) on one copy."""
        diag = self.rho.represent(x).matrix.diagonal() * self.R.matrix.diagonal()
        return self._series(np.asarray(diag), 1, x.degree)

    def r_trace_boundary(self, x: NCPoly, y: NCPoly) -> TraceValue:
        _, words, degree = self.boundary_images(x, y)
        return self._series(np.asarray(words.diagonal() * self.R.matrix.diagonal()), 1, degree)

    def alpha(self, x: NCPoly, y: NCPoly) -> AlphaValue:
        """
        Both forms of the cocycle alpha: the two-copy trace 1/2 Tr(Delta F [F,rho(x)][F,rho(y)])
        and the local form (q^-1 - q) (Tr(rho(x) rho(y) R) - Tr(rho(x) R rho(sigma_i(y)))).

        The local form sums to (q^-1 - q) Tr(rho(x y - sigma_i(y) x) R) with rho taken
        word by word, and agrees with the trace form level by level.
        """
        x, y = drop_scalar(x), drop_scalar(y)
        F = self.F.matrix
        rxm = self.rho.represent(x).matrix
        rym = self.rho.represent(y).matrix
        rsym = self.rho.represent(sigma(1j, y)).matrix
        rx, ry = self._copies(rxm), self._copies(rym)
        cx = F @ rx - rx @ F
        cy = F @ ry - ry @ F
        prod = sp.csr_matrix(cx @ cy)
        diag = 0.5 * np.asarray(F.multiply(prod.T).sum(axis=1)).ravel() * self.delta
        degree = x.degree + y.degree
        trace_form = self._series(diag, 2, degree)
        r = self.R.matrix.diagonal()
        first = sp.csr_matrix(rxm @ rym).diagonal() * r
        second = np.asarray(sp.csr_matrix(rxm).multiply((_diag(r) @ rsym).T).sum(axis=1)).ravel()
        factor = 1.0 / self.ctx.q - self.ctx.q
        local_form = self._series(factor * (first - second), 1, degree)
        return AlphaValue(trace_form, local_form)

    def cone_defect(self, u: NCMatrix, group: Optional[ModularGroup] = None) -> TraceValue:
        """
        -(q^-1 - q)/2 Tr(E K^-2 T) on one copy.

        E is the diagonal operator by which sum_ij rho(u_ij) rho(u*_ji) - rho(sigma_i(u*_ji)) rho(u_ij)
        exceeds the scalar k - Tr(g_-i); it vanishes off the faces of the label cone.
        """
        group = group or modular_check(u, self.ctx)
        us = u.star()
        words = sp.csr_matrix((self.basis.dim, self.basis.dim))
        for i in range(u.size):
            for j in range(u.size):
                rx = self.rho.represent(u[i, j]).matrix
                ry = self.rho.represent(us[j, i]).matrix
                rsy = self.rho.represent(sigma(1j, us[j, i])).matrix
                words = words + rx @ ry - rsy @ rx
        scalar = u.size - float(np.sum(np.real(group.weight_vector(-1j))))
        defect = sp.csr_matrix(words).diagonal() - scalar
        q = self.ctx.q
        weight = self.T.matrix.diagonal() * q ** (-self.basis.n2.astype(float))
        factor = -(1.0 / q - q) / 2.0
        return self._series(factor * defect * weight, 1, 2 * u.degree)

    def chern1(self, x: NCPoly, y: NCPoly) -> ChernValue:
        chain = Chain.from_tensor([x, y]).reduce()
        return chern_eval(self.module(), 1, chain)

    def lipschitz_norm(self, letter: str) -> float:
        """Operator norm of |D| pi(g) - pi(sigma_{-2i}(g)) |D| on interior columns."""
        g = NCPoly.gen(letter)
        vectors = self.phase_data.eigenvectors
        absD = vectors @ _diag(np.abs(self.phase_data.eigenvalues)) @ vectors.conj().T
        pg = sp.kron(sp.identity(2), self.pi.represent(g).matrix)
        pt = sp.kron(sp.identity(2), self.pi.represent(sigma(-2j, g)).matrix)
        diff = sp.csr_matrix(absD @ pg - pt @ absD)
        cols = np.nonzero(np.tile(self.basis.l2, 2) <= self.L2 - 1)[0]
        return interior_norm(diff, cols)

    def theta_commutator_norm(self, x: NCPoly) -> float:
        """Operator norm of D pi(x) - pi(sigma_{-2i}(x)) D on interior columns."""
        px = sp.kron(sp.identity(2), self.pi.represent(x).matrix)
        pt = sp.kron(sp.identity(2), self.pi.represent(sigma(-2j, x)).matrix)
        diff = sp.csr_matrix(self.D.matrix @ px - pt @ self.D.matrix)
        cols = np.nonzero(np.tile(self.basis.l2, 2) <= self.L2 - x.degree)[0]
        return interior_norm(diff, cols)


def interior_norm(matrix: sp.spmatrix, cols: np.ndarray) -> float:
    """Largest singular value of the column restriction, block by block."""
    sub = sp.csc_matrix(matrix)[:, cols]
    gram = (sub.conj().T @ sub).tocsr()
    best = 0.0
    for idx in block_components(gram):
        block = sub[:, idx]
        rows = np.unique(block.nonzero()[0])
        if rows.size:
            best = max(best, float(scipy.linalg.svdvals(block[rows].toarray())[0]))
    return best


@lru_cache(maxsize=4)
def suq2_triple(ctx: QContext, L2: int) -> SUq2Triple:
    return SUq2Triple(ctx, L2)


def local_cocycle(x: NCPoly, y: NCPoly, ctx: QContext, L2: Optional[int] = None) -> float:
    """
    Lambda(x, y) = C h(x y - sigma_i(y) x) on reduced entries.

    Raises:
    TruncationError: when L2 is below what the Haar state needs.
    """
    x, y = drop_scalar(x), drop_scalar(y)
    boundary = x * y - sigma(1j, y) * x
    value = haar(boundary, ctx, L2)
    return float(constant_C(ctx)) * complex(value).real


def local_pairing(chain: Chain, ctx: QContext, L2: Optional[int] = None) -> float:
    """Linear extension of the local cocycle to a degree one chain."""
    if chain.degree != 1:
        raise ValueError("the local cocycle pairs with degree one chains")
    total = 0.0
    for (m0, m1), coef in chain.items():
        total += float(mp.re(coef.evaluate(ctx))) * local_cocycle(NCPoly.from_monomial(m0),
                                                                  NCPoly.from_monomial(m1), ctx, L2)
    return total


def gamma_cochain(x: NCPoly, ctx: QContext, L2: int = 40) -> TraceValue:
    return suq2_triple(ctx, L2).gamma(x)


def alpha_cocycle(x: NCPoly, y: NCPoly, ctx: QContext, L2: int = 40) -> AlphaValue:
    return suq2_triple(ctx, L2).alpha(x, y)


@dataclass
class TransgressionResult:
    x: str
    y: str
    chern: float
    local: float
    xi: float
    residual: float

    def as_dict(self) -> dict:
        return asdict(self)


def transgression(x: NCPoly, y: NCPoly, ctx: QContext, L2: int = 40) -> TransgressionResult:
    """
    Compare Ch^1(x, y) with Lambda(x, y) + Xi(x y - sigma_i(y) x), where
    Xi(z) = (q^-1 - q) Tr(rho(z) R) - C h(z) - Gamma(z).

    rho enters Xi word by word on x y - sigma_i(y) x, as in the local form of
    alpha. Traces are summed along their level series with Levin acceleration.
    """
    triple = suq2_triple(ctx, L2)
    x, y = drop_scalar(x), drop_scalar(y)
    boundary = x * y - sigma(1j, y) * x
    chern = triple.chern1(x, y).series.accelerated()
    lam = local_cocycle(x, y, ctx, L2)
    factor = 1.0 / ctx.q - ctx.q
    h = complex(haar(boundary, ctx, L2)).real
    xi = (factor * triple.r_trace_boundary(x, y).series.accelerated() - float(constant_C(ctx)) * h
          - triple.gamma_boundary(x, y).series.accelerated())
    residual = abs(chern - lam - xi)
    logging.info(f"Transgressão ({x!r}, {y!r}): resíduo {residual:.3e}")
    return TransgressionResult(repr(x), repr(y), chern, lam, xi, residual)


@dataclass
class SummabilityReport:
    family: str
    q: float
    p: float
    cutoffs: List[int]
    levels: Dict[int, float]
    ratios: Dict[int, Optional[float]]
    partial_sums: Dict[int, float]
    tail_estimate: float
    verdict: str
    settled: bool = False
    lipschitz: Dict[str, Dict[int, float]] = field(default_factory=dict)
    lipschitz_plateau: Dict[str, bool] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["levels"] = {str(k): v for k, v in self.levels.items()}
        out["ratios"] = {str(k): v for k, v in self.ratios.items()}
        out["partial_sums"] = {str(k): v for k, v in self.partial_sums.items()}
        out["lipschitz"] = {g: {str(k): v for k, v in d.items()} for g, d in self.lipschitz.items()}
        return out


def summability_verdict(series: LevelSeries, margin: float = 0.05, normalized: bool = True) -> str:
    """Trend classification from the last level ratio."""
    ratios = [r for r in series.ratios(normalized).values() if r is not None and math.isfinite(r)]
    if not ratios:
        return "undetermined"
    if ratios[-1] < 1.0 - margin:
        return "convergent"
    return "divergent-trend"


def trend_settled(series: LevelSeries, margin: float = 0.05, normalized: bool = True) -> bool:
    """Whether the last two ratios of the top level's parity are finite and within margin of each other."""
    ratios = series.ratios(normalized)
    if not ratios:
        return False
    top = max(ratios)
    recent = (ratios.get(top), ratios.get(top - 2))
    if any(r is None or not math.isfinite(r) for r in recent):
        return False
    return abs(recent[0] - recent[1]) <= margin


def summability_scan(p: float, ctx: QContext, cutoffs: Sequence[int], lipschitz: bool = False) -> SummabilityReport:
    """
    Per-level terms of Tr(Delta (1 + |D_q|)^{-p}) with ratio diagnostics.

    Parameters:
    p (float): Summability exponent, at least 1.
    ctx (QContext): Deformation context.
    cutoffs (Sequence[int]): Cutoffs at which partial sums are reported.
    lipschitz (bool): Also record the twisted commutator norms of |D_q| at each cutoff.

    Returns:
    SummabilityReport: Levels, normalized ratios, partial sums and a trend verdict.
    """
    if p < 1:
        raise ConfigurationError(f"summability exponent must be >= 1, got {p}")
    cutoffs = sorted(set(int(c) for c in cutoffs))
    if not cutoffs:
        raise ConfigurationError("at least one cutoff is needed")
    triple = suq2_triple(ctx, cutoffs[-1])
    pd = triple.phase_data
    V = pd.eigenvectors.tocsc()
    weight = np.asarray(abs(V).power(2).T @ triple.delta).ravel()
    terms = weight * (1.0 + np.abs(pd.eigenvalues)) ** (-p)
    per = np.bincount(pd.vector_level, weights=terms, minlength=cutoffs[-1] + 1)
    mult = np.bincount(pd.vector_level, minlength=cutoffs[-1] + 1)
    series = LevelSeries({int(k): float(v) for k, v in enumerate(per)},
                         {int(k): int(v) for k, v in enumerate(mult)})
    partial = {c: float(math.fsum(per[:c + 1])) for c in cutoffs}
    report = SummabilityReport("suq2", ctx.q, p, cutoffs, series.contributions, series.ratios(),
                               partial, series.tail_estimate(), summability_verdict(series),
                               trend_settled(series))
    if lipschitz:
        for letter in "abcd":
            norms = {c: suq2_triple(ctx, c).lipschitz_norm(letter) for c in cutoffs}
            report.lipschitz[letter] = norms
            values = [norms[c] for c in cutoffs]
            report.lipschitz_plateau[letter] = (len(values) > 1 and
                                                abs(values[-1] - values[-2]) <= 0.05 * max(values[-1], 1e-300))
    logging.info(f"Somabilidade SU_q(2) p={p}: veredito {report.verdict}")
    return report


def run_experiment(spins2: Sequence[int], ctx: QContext, L2: int = 40, pairing: bool = True,
                   tol: float = 1e-4) -> List[IndexReport]:
    """
    Index reports for each spin: Toeplitz index, closed form and the Chern pairing.

    The numeric index is compared with the closed form plus the cone-face
    correction of the spin, which accounts for rho failing the algebra
    relations on the faces of the label cone.

    Parameters:
    spins2 (Sequence[int]): Doubled spins.
    ctx (QContext): Deformation context.
    L2 (int): Cutoff of the truncated module.
    pairing (bool): Also evaluate the odd Chern pairing of each unitary.
    tol (float): Largest accepted distance to the expected index and to the pairing.

    Returns:
    List[IndexReport]: One self-describing report per spin.
    """
    reports = []
    if not spins2:
        return reports
    triple = suq2_triple(ctx, L2)
    module = triple.module()
    for l2 in spins2:
        u = corep_unitary(int(l2), ctx)
        closed = float(closed_index(int(l2), ctx))
        correction = triple.cone_defect(u).series.accelerated()
        report = toeplitz_index(module, u, ctx, label=f"l2={l2}", closed=closed, correction=correction,
                                closed_tol=tol)
        if pairing:
            if l2 > 0:
                value = chern_eval(module, 1, unitary_chern(u, 1, ctx))
                report.pairing = 0.5 * value.extrapolated.real
            else:
                report.pairing = 0.0
            report.pairing_err = abs(report.index_numeric - report.pairing)
            report.stable = report.stable and report.pairing_err <= tol
        logging.info(f"Experimento l2={l2}: índice {report.index_numeric:.8f}, fechado {closed:.8f}, "
                     f"correção de face {correction:.8f}")
        reports.append(report)
    return reports
