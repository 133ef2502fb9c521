import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Dict, Hashable, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from QAlgebra import Monomial, NCMatrix, NCPoly, _monomial_product, flow_factor, random_poly
from QScalar import Exact, QContext

# Configuração do logger
logging.basicConfig(filename='TwistedCyclic.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

# Elementary tensor slot: a Monomial for the base algebra, (i, j, Monomial) for matrices over it.
Element = Hashable
Tensor = Tuple[Element, ...]


@dataclass(frozen=True)
class ModularTwist:
    """
    Automorphism sigma_z of the coordinate algebra, acting diagonally on monomials.

    grading 'n' is the Haar modular group, 'm' the Podleś flow.
    """
    z: complex = 1j
    grading: str = "n"
    ctx: Optional[QContext] = None

    def factor(self, mono: Monomial):
        return flow_factor(self.z, mono.weight2(self.grading), self.grading, self.ctx)

    def power(self, k: int) -> "ModularTwist":
        return ModularTwist(self.z * k, self.grading, self.ctx)


SIGMA_I = ModularTwist(1j, "n")


class BaseAlgebra:
    """Slots are PBW monomials of the coordinate algebra; the reduction subalgebra is the scalars."""
    size = 1

    @staticmethod
    def product(x: Monomial, y: Monomial) -> Iterable[Tuple[Element, Exact]]:
        return _monomial_product(x, y).items()

    @staticmethod
    def is_scalar(x: Monomial) -> bool:
        return x.is_unit()

    @staticmethod
    def twist(x: Monomial, sigma: ModularTwist):
        return x, sigma.factor(x)

    @staticmethod
    def expand(entry: NCPoly) -> Iterable[Tuple[Element, Exact]]:
        return entry.items()


class MatrixAlgebra:
    """Slots are elementary tensors E_ij (x) monomial of M_k over the coordinate algebra."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError("matrix size must be positive")
        self.size = size

    def product(self, x, y) -> Iterable[Tuple[Element, Exact]]:
        i, j, m1 = x
        j2, k, m2 = y
        if j != j2:
            return ()
        return (((i, k, m), c) for m, c in _monomial_product(m1, m2).items())

    @staticmethod
    def is_scalar(x) -> bool:
        return x[2].is_unit()

    @staticmethod
    def twist(x, sigma: ModularTwist):
        return x, sigma.factor(x[2])

    def expand(self, entry: NCMatrix) -> Iterable[Tuple[Element, Exact]]:
        if entry.size != self.size:
            raise ValueError(f"matrix of size {entry.size} in a chain over M_{self.size}")
        for i in range(self.size):
            for j in range(self.size):
                for m, c in entry[i, j].items():
                    yield (i, j, m), c

    def __eq__(self, other) -> bool:
        return isinstance(other, MatrixAlgebra) and other.size == self.size

    def __hash__(self):
        return hash(("matrix", self.size))


BASE = BaseAlgebra()


class Chain:
    """
    Formal sum of elementary tensors a_0 (x) ... (x) a_n with Exact coefficients.

    Chains are representatives; equality in the cyclic quotient is only ever
    tested by pairing with well-defined cochains.
    """

    def __init__(self, degree: int, terms: Optional[Dict[Tensor, Exact]] = None, algebra=BASE):
        self.degree = degree
        self.algebra = algebra
        clean = {}
        for t, c in (terms or {}).items():
            if len(t) != degree + 1:
                raise ValueError(f"tensor of length {len(t)} in a degree {degree} chain")
            if not c.is_zero():
                clean[t] = c
        self.terms: Dict[Tensor, Exact] = clean

    @classmethod
    def from_tensor(cls, entries: Sequence[Union[NCPoly, NCMatrix]], coef=1, algebra=None) -> "Chain":
        """Multilinear expansion of entries[0] (x) ... (x) entries[n]."""
        if algebra is None:
            algebra = MatrixAlgebra(entries[0].size) if isinstance(entries[0], NCMatrix) else BASE
        coef = coef if isinstance(coef, Exact) else Exact.const(coef)
        acc: Dict[Tensor, Exact] = {}
        for combo in product(*(list(algebra.expand(e)) for e in entries)):
            tensor = tuple(el for el, _ in combo)
            c = coef
            for _, ci in combo:
                c = c * ci
            acc[tensor] = acc.get(tensor, Exact.zero()) + c
        return cls(len(entries) - 1, acc, algebra)

    @classmethod
    def zero(cls, degree: int, algebra=BASE) -> "Chain":
        return cls(degree, {}, algebra)

    def is_zero(self) -> bool:
        return not self.terms

    def items(self):
        return self.terms.items()

    def _same(self, other: "Chain"):
        if self.degree != other.degree or self.algebra != other.algebra:
            raise ValueError("chains of different degree or algebra")

    def __add__(self, other: "Chain") -> "Chain":
        self._same(other)
        acc = dict(self.terms)
        for t, c in other.terms.items():
            acc[t] = acc.get(t, Exact.zero()) + c
        return Chain(self.degree, acc, self.algebra)

    def __neg__(self) -> "Chain":
        return Chain(self.degree, {t: -c for t, c in self.terms.items()}, self.algebra)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + (-other)

    def scale(self, factor) -> "Chain":
        return Chain(self.degree, {t: c * factor for t, c in self.terms.items()}, self.algebra)

    def reduce(self) -> "Chain":
        """Drop every tensor with a scalar slot (quotient of each slot by the scalars)."""
        return Chain(self.degree,
                     {t: c for t, c in self.terms.items() if not any(self.algebra.is_scalar(x) for x in t)},
                     self.algebra)

    def twist_entries(self, sigma: ModularTwist) -> "Chain":
        acc: Dict[Tensor, Exact] = {}
        for t, c in self.terms.items():
            for x in t:
                c = c * self.algebra.twist(x, sigma)[1]
            acc[t] = acc.get(t, Exact.zero()) + c
        return Chain(self.degree, acc, self.algebra)

    def max_abs(self, ctx: QContext) -> float:
        return max((c.max_abs(ctx) for c in self.terms.values()), default=0.0)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Chain) and self.degree == other.degree
                and self.algebra == other.algebra and self.terms == other.terms)

    def __repr__(self) -> str:
        return f"Chain(degree={self.degree}, terms={len(self.terms)})"


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


def cyclic_lambda(ch: Chain, sigma: ModularTwist = SIGMA_I, reduced: bool = True) -> Chain:
    """lambda(a_0 (x) ... (x) a_n) = (-1)^n sigma(a_n) (x) a_0 (x) ... (x) a_{n-1}."""
    n = ch.degree
    acc: Dict[Tensor, Exact] = {}
    for t, c in ch.terms.items():
        moved, factor = ch.algebra.twist(t[-1], sigma)
        key = (moved,) + t[:-1]
        acc[key] = acc.get(key, Exact.zero()) + c * factor * _sign(n)
    out = Chain(n, acc, ch.algebra)
    return out.reduce() if reduced else out


def _multiply_slots(algebra, x, y, coef: Exact) -> Iterable[Tuple[Element, Exact]]:
    for el, c in algebra.product(x, y):
        yield el, coef * c


def bar_b_prime(ch: Chain, reduced: bool = True) -> Chain:
    """b'(a_0 (x) ... (x) a_n) = sum_{i<n} (-1)^i a_0 (x) ... (x) a_i a_{i+1} (x) ... (x) a_n."""
    n = ch.degree
    if n < 1:
        raise ValueError("b' is defined on chains of degree >= 1")
    acc: Dict[Tensor, Exact] = {}
    for t, c in ch.terms.items():
        for i in range(n):
            for el, coef in _multiply_slots(ch.algebra, t[i], t[i + 1], c * _sign(i)):
                key = t[:i] + (el,) + t[i + 2:]
                acc[key] = acc.get(key, Exact.zero()) + coef
    out = Chain(n - 1, acc, ch.algebra)
    return out.reduce() if reduced else out


def twisted_b(ch: Chain, sigma: ModularTwist = SIGMA_I, reduced: bool = True) -> Chain:
    """b_sigma = b' + (-1)^n sigma(a_n) a_0 (x) a_1 (x) ... (x) a_{n-1}."""
    n = ch.degree
    out = bar_b_prime(ch, reduced=False)
    acc = dict(out.terms)
    for t, c in ch.terms.items():
        moved, factor = ch.algebra.twist(t[-1], sigma)
        for el, coef in _multiply_slots(ch.algebra, moved, t[0], c * factor * _sign(n)):
            key = (el,) + t[1:-1]
            acc[key] = acc.get(key, Exact.zero()) + coef
    out = Chain(n - 1, acc, ch.algebra)
    return out.reduce() if reduced else out


def gen_trace(ch: Chain, reduced: bool = True) -> Chain:
    """
    Generalized trace from chains over M_k to chains over the base algebra.

    TR(x^0 (x) ... (x) x^n) sums x^0_{i0 i1} (x) x^1_{i1 i2} (x) ... (x) x^n_{in i0}.
    """
    if not isinstance(ch.algebra, MatrixAlgebra):
        if ch.algebra is BASE:
            return ch.reduce() if reduced else ch
        raise ValueError("generalized trace needs a matrix chain")
    acc: Dict[Tensor, Exact] = {}
    for t, c in ch.terms.items():
        # elementary tensors survive only along closed index cycles
        if all(t[i][1] == t[(i + 1) % len(t)][0] for i in range(len(t))):
            key = tuple(x[2] for x in t)
            acc[key] = acc.get(key, Exact.zero()) + c
    out = Chain(ch.degree, acc, BASE)
    return out.reduce() if reduced else out


class Cochain:
    """
    Linear functional on degree-n chains, given by its values on elementary tensors.

    Parameters:
    degree (int): Chain degree it pairs with.
    term_value (Callable): Elementary tensor -> complex value.
    twist (ModularTwist): Declared twist of the cyclic structure.
    ctx (QContext): Used to evaluate the Exact chain coefficients.
    """

    def __init__(self, degree: int, term_value: Callable[[Tensor], complex], twist: ModularTwist,
                 ctx: QContext, name: str = "cochain"):
        self.degree = degree
        self.term_value = term_value
        self.twist = twist
        self.ctx = ctx
        self.name = name

    def evaluate(self, ch: Chain) -> complex:
        if ch.degree != self.degree:
            raise ValueError(f"{self.name} has degree {self.degree}, chain has degree {ch.degree}")
        total = 0j
        for t, c in ch.terms.items():
            total += complex(c.evaluate(self.ctx)) * self.term_value(t)
        return total

    __call__ = evaluate

    @classmethod
    def zero(cls, degree: int, twist: ModularTwist, ctx: QContext) -> "Cochain":
        return cls(degree, lambda t: 0j, twist, ctx, "zero")


def coboundary(c: Cochain) -> Cochain:
    """b^sigma(phi) = phi o b_sigma, with b_sigma taken on unreduced representatives."""
    def value(t: Tensor) -> complex:
        return c.evaluate(twisted_b(Chain(c.degree + 1, {t: Exact.one()}), c.twist, reduced=False))
    return Cochain(c.degree + 1, value, c.twist, c.ctx, f"b({c.name})")


def random_chain(rng, degree: int, entry_degree: int = 3, terms: int = 2) -> Chain:
    """Random chain from tensors of random polynomials with rational coefficients."""
    acc = Chain.zero(degree)
    for _ in range(terms):
        entries = [random_poly(rng, entry_degree, terms=2) for _ in range(degree + 1)]
        acc = acc + Chain.from_tensor(entries, Fraction(int(rng.integers(1, 4))))
    return acc


def random_matrix_chain(rng, degree: int, size: int = 2, entry_degree: int = 2, terms: int = 1) -> Chain:
    acc = Chain.zero(degree, MatrixAlgebra(size))
    for _ in range(terms):
        entries = []
        for _ in range(degree + 1):
            entries.append(NCMatrix([[random_poly(rng, entry_degree, terms=1) for _ in range(size)]
                                     for _ in range(size)]))
        acc = acc + Chain.from_tensor(entries)
    return acc


def with_scalar_slot(rng, degree: int, slot: int, entry_degree: int = 2) -> Chain:
    """Elementary chain whose slot `slot` holds the unit and every other slot a random polynomial."""
    entries = [random_poly(rng, entry_degree, terms=2) for _ in range(degree + 1)]
    entries[slot] = NCPoly.one()
    return Chain.from_tensor(entries)


@dataclass
class IdentityResult:
    name: str
    trials: int = 0
    violations: int = 0
    worst_terms: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, residual: Chain):
        self.trials += 1
        if not residual.is_zero():
            self.violations += 1
            self.worst_terms = max(self.worst_terms, len(residual.terms))

    def as_dict(self) -> dict:
        return {"name": self.name, "trials": self.trials, "violations": self.violations,
                "worst_terms": self.worst_terms, "passed": self.passed}


def run_cyclic_suite(trials: int = 50, seed: int = 0, sigma: ModularTwist = SIGMA_I) -> Dict[str, IdentityResult]:
    """
    Exact identity checks of the twisted cyclic calculus on random chains.

    Chains have degree 1 to 3 (2 to 4 where b is applied twice), entries of
    degree 1 to 3 and two terms. All identities are tested on unreduced
    representatives, so a passing trial means the residual chain has no terms
    at all; degenerate_b reduces its residual, since a unit left in slot 0 is
    not degenerate.
    """
    rng = np.random.default_rng(seed)
    results = {name: IdentityResult(name) for name in (
        "b_sigma_squared", "b_prime_squared", "lambda_intertwines_b", "degenerate_b",
        "trace_chain_map", "trace_lambda")}

    for _ in range(trials):
        n = int(rng.integers(1, 4))
        edeg = int(rng.integers(1, 4))
        ch = random_chain(rng, n, entry_degree=edeg, terms=2)

        twice = random_chain(rng, n + 1, entry_degree=min(edeg, 2), terms=2)
        once = twisted_b(twice, sigma, reduced=False)
        results["b_sigma_squared"].record(twisted_b(once, sigma, reduced=False))
        results["b_prime_squared"].record(bar_b_prime(bar_b_prime(twice, reduced=False), reduced=False))

        bp = bar_b_prime(ch, reduced=False)
        lhs = bp - cyclic_lambda(bp, sigma, reduced=False)
        rhs = twisted_b(ch - cyclic_lambda(ch, sigma, reduced=False), sigma, reduced=False)
        results["lambda_intertwines_b"].record(lhs - rhs)

        slot = int(rng.integers(1, n + 1))
        degenerate = with_scalar_slot(rng, n, slot, entry_degree=edeg)
        results["degenerate_b"].record(twisted_b(degenerate, sigma, reduced=False).reduce())

        mdeg = int(rng.integers(1, 4))
        mch = random_matrix_chain(rng, mdeg, size=2, entry_degree=int(rng.integers(1, 5 - mdeg)), terms=2)
        lhs = gen_trace(twisted_b(mch, sigma, reduced=False), reduced=False)
        rhs = twisted_b(gen_trace(mch, reduced=False), sigma, reduced=False)
        results["trace_chain_map"].record(lhs - rhs)

        lhs = gen_trace(cyclic_lambda(mch, sigma, reduced=False), reduced=False)
        rhs = cyclic_lambda(gen_trace(mch, reduced=False), sigma, reduced=False)
        results["trace_lambda"].record(lhs - rhs)

    for name, res in results.items():
        logging.info(f"Identidade {name}: {res.trials} ensaios, {res.violations} violações")
    return results
