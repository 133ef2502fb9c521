import math
import logging
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ChernIndex import ChernValue, FredholmModule, LevelSeries, chern_eval, cocycle_residuals, spectral_phase
from CorepModels import TruncOp, build_basis, corep_model, op_EFK
from QAlgebra import Monomial, NCPoly, flow_factor, star
from QScalar import ConfigurationError, QContext
from SUq2Triple import SummabilityReport, summability_verdict, trend_settled
from TwistedCyclic import BASE, Chain, ModularTwist

# Configuração do logger
logging.basicConfig(filename='PodlesTriple.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')


class PodlesSubalgebraError(ValueError):
    """An entry is not in the subalgebra generated by A = 1 - da and B = dc."""


def podles_twist(z: complex = 1j, ctx: Optional[QContext] = None) -> ModularTwist:
    return ModularTwist(z, "m", ctx)


def generator_A() -> NCPoly:
    return NCPoly.one() - NCPoly.from_word("da")


def generator_B() -> NCPoly:
    return NCPoly.from_word("dc")


def podles_generators() -> Dict[str, NCPoly]:
    A, B = generator_A(), generator_B()
    return {"A": A, "B": B, "A*": star(A), "B*": star(B)}


def in_podles(x: NCPoly) -> bool:
    """Podleś elements are exactly those with every monomial of n-weight zero."""
    return all(m.weight2("n") == 0 for m in x.monomials())


class PodlesTriple:
    """
    Even modular spectral triple over the standard Podleś sphere.

    H_+ and H_- are the sectors n = 1/2 and n = -1/2 of the truncated space.
    Both share the same (l, m) labels, so one sector basis with two copies
    describes the direct sum.
    """

    def __init__(self, ctx: QContext, L2: int):
        if L2 < 1:
            raise ConfigurationError(f"cutoff must be at least 1, got {L2}")
        self.ctx = ctx
        self.L2 = L2
        self.full = build_basis(L2)
        self.sector = build_basis(L2, "+")
        labels = self.sector.labels
        self.plus = np.array([self.full.index_of(int(l2), int(m2), 1) for l2, m2, _ in labels], dtype=np.int64)
        self.minus = np.array([self.full.index_of(int(l2), int(m2), -1) for l2, m2, _ in labels], dtype=np.int64)
        self.E = op_EFK("E", self.full, ctx).matrix
        self.Fop = op_EFK("F", self.full, ctx).matrix
        upper = sp.csr_matrix(self.E[self.plus][:, self.minus])
        self.D = TruncOp(self.sector, sp.bmat([[None, upper], [upper.conj().T, None]]).tocsr(), 0, 2)
        size = self.sector.dim
        self.gamma = np.concatenate([np.ones(size), -np.ones(size)])
        self.delta = np.tile(ctx.q ** self.sector.m2.astype(float), 2)
        self.phase_data = spectral_phase(self.D, ctx)
        self.F = self.phase_data.F
        self.twist = podles_twist()
        self._pi = None
        self._represented: Dict[Monomial, Tuple[sp.csr_matrix, int]] = {}
        self._module: Optional[FredholmModule] = None
        logging.info(f"Tripla de Podleś montada: q={ctx.q}, L2={L2}, dimensão={2 * size}")

    @property
    def pi(self):
        if self._pi is None:
            self._pi = corep_model(self.ctx, self.L2, "pi")
        return self._pi

    def restrict(self, full_matrix: sp.spmatrix) -> sp.csr_matrix:
        """Block diagonal restriction of a full-space operator to H_+ (+) H_-."""
        m = sp.csr_matrix(full_matrix)
        return sp.block_diag([m[self.plus][:, self.plus], m[self.minus][:, self.minus]]).tocsr()

    def represent(self, mono: Monomial) -> Tuple[sp.csr_matrix, int]:
        cached = self._represented.get(mono)
        if cached is None:
            if mono.weight2("n") != 0:
                raise PodlesSubalgebraError(f"monomial {mono} leaves the sectors")
            cached = (self.restrict(self.pi.monomial(mono)), mono.degree)
            self._represented[mono] = cached
        return cached

    def represent_poly(self, x: NCPoly) -> sp.csr_matrix:
        return self.restrict(self.pi.represent(x).matrix)

    def module(self) -> FredholmModule:
        if self._module is None:
            ctx = self.ctx
            self._module = FredholmModule(self.sector, 2, self.F, self.delta, self.represent, ctx,
                                          podles_twist(1j, ctx), self.gamma, self.phase_data, BASE,
                                          factory=lambda L2: podles_triple(ctx, L2).module())
        return self._module

    def interior(self, degree: int) -> np.ndarray:
        return np.nonzero(np.tile(self.sector.l2, 2) <= self.L2 - degree)[0]

    def _interior_residual(self, diff: sp.spmatrix, degree: int) -> float:
        block = sp.csc_matrix(diff)[:, self.interior(degree)]
        return float(abs(block).max()) if block.nnz else 0.0

    def relation_residuals(self) -> Dict[str, float]:
        """
        Residuals of AB = q^2 BA, AB* = q^-2 B*A, B*B = A(1 - q^2 A) and BB* = q^-2 A(1 - A),
        both in the algebra and between represented operators on interior columns.
        """
        q = self.ctx.q
        A, B = generator_A(), generator_B()
        Bs = star(B)
        one = NCPoly.one()
        symbolic = {
            "AB": A * B - B * A * q ** 2,
            "BsB": Bs * B - A * (one - A * q ** 2),
            "ABs": A * Bs - Bs * A * q ** -2,
            "BBs": B * Bs - A * (one - A) * q ** -2,
        }
        rA, rB, rBs = (self.represent_poly(x) for x in (A, B, Bs))
        I = sp.identity(rA.shape[0], format="csr")
        numeric = {
            "AB": rA @ rB - q ** 2 * (rB @ rA),
            "BsB": rBs @ rB - rA @ (I - q ** 2 * rA),
            "ABs": rA @ rBs - q ** -2 * (rBs @ rA),
            "BBs": rB @ rBs - q ** -2 * (rA @ (I - rA)),
        }
        out = {}
        for key in symbolic:
            out[f"{key}_symbolic"] = symbolic[key].max_abs(self.ctx)
            out[f"{key}_represented"] = self._interior_residual(numeric[key], 4)
        return out

    def grading_residuals(self) -> Dict[str, float]:
        g = sp.diags(self.gamma)
        anti = g @ self.D.matrix + self.D.matrix @ g
        out = {"anticommutator": float(abs(anti).max()) if anti.nnz else 0.0}
        worst = 0.0
        for x in podles_generators().values():
            rx = self.represent_poly(x)
            comm = g @ rx - rx @ g
            worst = max(worst, float(abs(comm).max()) if comm.nnz else 0.0)
        out["representation_commutator"] = worst
        return out

    def sector_maps(self) -> Dict[str, float]:
        """Mass of E on H_- and of F on H_+ that lands outside the opposite sector."""
        outside_plus = np.setdiff1d(np.arange(self.full.dim), self.plus)
        outside_minus = np.setdiff1d(np.arange(self.full.dim), self.minus)
        e_leak = sp.csr_matrix(self.E[outside_plus][:, self.minus])
        f_leak = sp.csr_matrix(self.Fop[outside_minus][:, self.plus])
        adjoint = sp.csr_matrix(self.Fop[self.minus][:, self.plus] - self.E[self.plus][:, self.minus].T)
        return {"E_leak": float(abs(e_leak).max()) if e_leak.nnz else 0.0,
                "F_leak": float(abs(f_leak).max()) if f_leak.nnz else 0.0,
                "F_minus_Estar": float(abs(adjoint).max()) if adjoint.nnz else 0.0}

    def flow_consistency(self, x: NCPoly, t: float) -> float:
        """
        || Delta_R^{it} rep(x) Delta_R^{-it} - rep(sigma^F_t(x)) || on interior columns,
        with sigma^F_t scaling each monomial by q^{it m-weight}.
        """
        rx = self.represent_poly(x)
        phase = np.exp(1j * t * np.log(self.delta))
        conj = sp.diags(phase) @ rx @ sp.diags(phase.conj())
        flowed = x.map_coefficients(lambda m, c: c * flow_factor(t, m.weight2("m"), "m", self.ctx))
        diff = conj - self.represent_poly(flowed)
        return self._interior_residual(diff, x.degree)

    def abs_eigenvalues(self) -> Dict[Tuple[int, int], float]:
        """|D| per (l2, m2) block, read from the numerical spectrum."""
        pd = self.phase_data
        coo = pd.eigenvectors.tocoo()
        m2 = np.tile(self.sector.m2, 2)
        out = {}
        for row, col in zip(coo.row, coo.col):
            out[(int(pd.vector_level[col]), int(m2[row]))] = float(abs(pd.eigenvalues[col]))
        return out


@lru_cache(maxsize=4)
def podles_triple(ctx: QContext, L2: int) -> PodlesTriple:
    return PodlesTriple(ctx, L2)


def build_podles(ctx: QContext, L2: int) -> PodlesTriple:
    return podles_triple(ctx, L2)


def podles_summability(p: float, ctx: QContext, cutoffs: Sequence[int]) -> SummabilityReport:
    """
    Level terms of the Delta_R-weighted trace of |D|^{-p}.

    Ratios are raw level ratios: the level terms themselves decay like q^l
    when p > 2 and tend to a constant at p = 2.
    """
    if p < 1:
        raise ConfigurationError(f"summability exponent must be >= 1, got {p}")
    cutoffs = sorted(set(int(c) for c in cutoffs))
    if not cutoffs:
        raise ConfigurationError("at least one cutoff is needed")
    triple = podles_triple(ctx, cutoffs[-1])
    pd = triple.phase_data
    V = pd.eigenvectors.tocsc()
    weight = np.asarray(abs(V).power(2).T @ triple.delta).ravel()
    terms = weight * np.abs(pd.eigenvalues) ** (-p)
    per = np.bincount(pd.vector_level, weights=terms, minlength=cutoffs[-1] + 1)
    present = sorted(set(int(l) for l in pd.vector_level))
    series = LevelSeries({l2: float(per[l2]) for l2 in present})
    partial = {c: float(math.fsum(per[:c + 1])) for c in cutoffs}
    report = SummabilityReport("podles", ctx.q, p, cutoffs, series.contributions,
                               series.ratios(normalized=False), partial, series.tail_estimate(),
                               summability_verdict(series, normalized=False),
                               trend_settled(series, normalized=False))
    logging.info(f"Somabilidade Podleś p={p}: veredito {report.verdict}")
    return report


def podles_chain(x0: NCPoly, x1: NCPoly, x2: NCPoly) -> Chain:
    for i, x in enumerate((x0, x1, x2)):
        if not in_podles(x):
            raise PodlesSubalgebraError(f"entry {i} = {x!r} is outside the Podleś subalgebra")
    return Chain.from_tensor([x0, x1, x2]).reduce()


def podles_chern2(x0: NCPoly, x1: NCPoly, x2: NCPoly, ctx: QContext, L2: int = 30) -> ChernValue:
    """
    Even Chern cocycle 1/2 Tr(Delta_R gamma F [F,x0][F,x1][F,x2]) on the Podleś triple.

    Raises:
    PodlesSubalgebraError: when an entry has a monomial of nonzero n-weight.
    """
    chain = podles_chain(x0, x1, x2)
    return chern_eval(podles_triple(ctx, L2).module(), 2, chain)


@dataclass
class PodlesChernReport:
    entries: Tuple[str, str, str]
    value: float
    tail_estimate: float
    cyclic_residual: float
    boundary_residual: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def podles_chern_report(names: Sequence[str], ctx: QContext, L2: int = 30) -> PodlesChernReport:
    """
    Even Chern cocycle on three named generators, with its cyclic and b_sigma residuals.

    The boundary residual is taken on b_sigma of the degree three chain that
    repeats the first entry at the end.
    """
    generators = podles_generators()
    unknown = [name for name in names if name not in generators]
    if len(names) != 3 or unknown:
        raise ConfigurationError(f"three generators among {sorted(generators)} are needed, got {list(names)}")
    x0, x1, x2 = (generators[name] for name in names)
    chain = podles_chain(x0, x1, x2)
    module = podles_triple(ctx, L2).module()
    value = chern_eval(module, 2, chain)
    residuals = cocycle_residuals(module, chain, Chain.from_tensor([x0, x1, x2, x0]).reduce())
    report = PodlesChernReport(tuple(names), value.extrapolated.real, value.series.tail_estimate(),
                               residuals["cyclic"], residuals["boundary"])
    logging.info(f"Cociclo de Chern em {names}: resíduos {residuals}")
    return report
