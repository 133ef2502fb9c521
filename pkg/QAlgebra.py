import sys
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple, Union

import mpmath as mp

from QScalar import Exact, Number, QContext

# Configuração do logger
logging.basicConfig(filename='QAlgebra.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

GENERATORS = "abcd"

# Doubled gradings: n-weight (a,c -> -1/2; b,d -> +1/2), m-weight (a,b -> -1/2; c,d -> +1/2).
N_WEIGHT2 = {"a": -1, "b": 1, "c": -1, "d": 1}
M_WEIGHT2 = {"a": -1, "b": -1, "c": 1, "d": 1}

_Q = Exact.spower(2)
_QINV = Exact.spower(-2)
_ONE = Exact.one()

# Rewriting system in s = q^{1/2}: offending pair -> list of (replacement word, coefficient).
RULES: Dict[str, Tuple[Tuple[str, Exact], ...]] = {
    "ba": (("ab", _QINV),),
    "ca": (("ac", _QINV),),
    "cb": (("bc", _ONE),),
    "bd": (("db", _Q),),
    "cd": (("dc", _Q),),
    "ad": (("", _ONE), ("bc", _Q)),
    "da": (("", _ONE), ("bc", _QINV)),
}

# b* = -q c and c* = -q^{-1} b follow from the relations.
STAR = {"a": ("d", _ONE), "b": ("c", -_Q), "c": ("b", -_QINV), "d": ("a", _ONE)}


class RewriteError(RuntimeError):
    """Raised when the rewriting system fails to terminate on a word."""


@dataclass(frozen=True, order=True)
class Monomial:
    """
    PBW basis word a^k b^m c^n (branch 'a') or d^k b^m c^n with k >= 1 (branch 'd').
    """
    branch: str
    k: int
    m: int
    n: int

    def __post_init__(self):
        if self.branch not in ("a", "d"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if min(self.k, self.m, self.n) < 0:
            raise ValueError("negative exponent")
        if self.branch == "d" and self.k == 0:
            raise ValueError("d-branch monomials need k >= 1")

    @classmethod
    def unit(cls) -> "Monomial":
        return cls("a", 0, 0, 0)

    @classmethod
    def from_word(cls, word: str) -> "Monomial":
        if not _is_normal(word):
            raise ValueError(f"word {word!r} is not in normal form")
        branch = "d" if word.startswith("d") else "a"
        return cls(branch, word.count(branch), word.count("b"), word.count("c"))

    def word(self) -> str:
        return self.branch * self.k + "b" * self.m + "c" * self.n

    @property
    def degree(self) -> int:
        return self.k + self.m + self.n

    def is_unit(self) -> bool:
        return self.degree == 0

    def weight2(self, grading: str = "n") -> int:
        table = N_WEIGHT2 if grading == "n" else M_WEIGHT2
        return sum(table[x] for x in self.word())

    def __str__(self) -> str:
        return self.word() or "1"


def _is_normal(word: str) -> bool:
    return _find_site(word, "leftmost") is None


def _find_site(word: str, strategy: str) -> Optional[int]:
    positions = range(len(word) - 1)
    if strategy == "rightmost":
        positions = reversed(positions)
    for i in positions:
        if word[i:i + 2] in RULES:
            return i
    return None


@lru_cache(maxsize=None)
def _reduce(word: str, strategy: str) -> Tuple[Tuple[str, Exact], ...]:
    i = _find_site(word, strategy)
    if i is None:
        return ((word, _ONE),)
    acc: Dict[str, Exact] = {}
    for rhs, coef in RULES[word[i:i + 2]]:
        for w, c in _reduce(word[:i] + rhs + word[i + 2:], strategy):
            acc[w] = acc.get(w, Exact.zero()) + coef * c
    return tuple((w, c) for w, c in sorted(acc.items()) if not c.is_zero())


def normal_form(word: str, strategy: str = "leftmost") -> "NCPoly":
    """
    Rewrite a generator word into PBW normal form.

    Parameters:
    word (str): Letters from 'abcd', read left to right as a product.
    strategy (str): 'leftmost' or 'rightmost' choice of the next rewrite site.

    Returns:
    NCPoly: The normal form, independent of the strategy.
    """
    if any(x not in GENERATORS for x in word):
        raise ValueError(f"word {word!r} contains letters outside {GENERATORS}")
    if strategy not in ("leftmost", "rightmost"):
        raise ValueError(f"unknown strategy {strategy!r}")
    try:
        reduced = _reduce(word, strategy)
    except RecursionError:
        logging.error(f"Reescrita não terminou para a palavra {word}")
        raise RewriteError(f"rewriting did not terminate on {word!r} (recursion limit {sys.getrecursionlimit()})")
    return NCPoly({Monomial.from_word(w): c for w, c in reduced})


@lru_cache(maxsize=None)
def _monomial_product(x: Monomial, y: Monomial) -> "NCPoly":
    return normal_form(x.word() + y.word())


@lru_cache(maxsize=None)
def _monomial_star(x: Monomial) -> "NCPoly":
    coef = _ONE
    letters = []
    for letter in reversed(x.word()):
        target, c = STAR[letter]
        letters.append(target)
        coef = coef * c
    return normal_form("".join(letters)) * coef


Scalar = Union[Number, Exact]


class NCPoly:
    """
    Element of the coordinate algebra of quantum SU(2) in PBW normal form.
    """
    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Dict[Monomial, Exact]] = None):
        clean = {}
        for mono, c in (terms or {}).items():
            c = c if isinstance(c, Exact) else Exact.const(c)
            if not c.is_zero():
                clean[mono] = c
        self._terms: Tuple[Tuple[Monomial, Exact], ...] = tuple(sorted(clean.items()))
        self._hash = None

    @classmethod
    def zero(cls) -> "NCPoly":
        return cls()

    @classmethod
    def one(cls) -> "NCPoly":
        return cls({Monomial.unit(): Exact.one()})

    @classmethod
    def scalar(cls, c: Scalar) -> "NCPoly":
        return cls({Monomial.unit(): c if isinstance(c, Exact) else Exact.const(c)})

    @classmethod
    def gen(cls, letter: str) -> "NCPoly":
        return normal_form(letter)

    @classmethod
    def from_word(cls, word: str) -> "NCPoly":
        return normal_form(word)

    @classmethod
    def from_monomial(cls, mono: Monomial, coef: Scalar = 1) -> "NCPoly":
        return cls({mono: coef if isinstance(coef, Exact) else Exact.const(coef)})

    def items(self) -> Iterable[Tuple[Monomial, Exact]]:
        return iter(self._terms)

    def monomials(self) -> Tuple[Monomial, ...]:
        return tuple(m for m, _ in self._terms)

    def coefficient(self, mono: Monomial) -> Exact:
        for m, c in self._terms:
            if m == mono:
                return c
        return Exact.zero()

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((m.degree for m, _ in self._terms), default=0)

    def __add__(self, other) -> "NCPoly":
        other = _as_poly(other)
        acc = dict(self._terms)
        for m, c in other._terms:
            acc[m] = acc.get(m, Exact.zero()) + c
        return NCPoly(acc)

    __radd__ = __add__

    def __neg__(self) -> "NCPoly":
        return NCPoly({m: -c for m, c in self._terms})

    def __sub__(self, other) -> "NCPoly":
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> "NCPoly":
        return _as_poly(other) - self

    def __mul__(self, other) -> "NCPoly":
        if not isinstance(other, NCPoly):
            return NCPoly({m: c * other for m, c in self._terms})
        return mul(self, other)

    def __rmul__(self, other) -> "NCPoly":
        return NCPoly({m: c * other for m, c in self._terms})

    def star(self) -> "NCPoly":
        return star(self)

    def map_coefficients(self, fn) -> "NCPoly":
        return NCPoly({m: fn(m, c) for m, c in self._terms})

    def numeric_items(self, ctx: QContext):
        return [(m, complex(c.evaluate(ctx))) for m, c in self._terms]

    def max_abs(self, ctx: QContext) -> float:
        return max((c.max_abs(ctx) for _, c in self._terms), default=0.0)

    def homogeneous_weight2(self, grading: str = "n") -> Optional[int]:
        weights = {m.weight2(grading) for m, _ in self._terms}
        return weights.pop() if len(weights) == 1 else None

    def __eq__(self, other) -> bool:
        if not isinstance(other, NCPoly):
            try:
                other = _as_poly(other)
            except TypeError:
                return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._terms)
        return self._hash

    def __repr__(self) -> str:
        if not self._terms:
            return "0"
        return " + ".join(f"[{c}]{m}" for m, c in self._terms)


def _as_poly(value) -> NCPoly:
    if isinstance(value, NCPoly):
        return value
    if isinstance(value, (Exact, int, Fraction, float, complex)):
        return NCPoly.scalar(value)
    raise TypeError(f"cannot coerce {type(value).__name__} to NCPoly")


def mul(x: NCPoly, y: NCPoly) -> NCPoly:
    """Bilinear product followed by normal form."""
    acc: Dict[Monomial, Exact] = {}
    for m1, c1 in x.items():
        for m2, c2 in y.items():
            coef = c1 * c2
            for m, c in _monomial_product(m1, m2).items():
                acc[m] = acc.get(m, Exact.zero()) + coef * c
    return NCPoly(acc)


def star(x: NCPoly) -> NCPoly:
    """Antilinear antimultiplicative involution with a* = d and b* = -q c."""
    acc = NCPoly.zero()
    for m, c in x.items():
        acc = acc + _monomial_star(m) * c.conjugate()
    return acc


def _is_integral(value: float, tol: float = 1e-12) -> Optional[int]:
    r = round(value)
    return int(r) if abs(value - r) <= tol else None


def flow_factor(z: complex, weight2: int, grading: str = "n", ctx: Optional[QContext] = None):
    """
    Scaling of a homogeneous monomial under the modular flow at parameter z.

    The n-flow multiplies by q^{-iz wt}, the m-flow (Podleś) by q^{2iz wtL}.
    Returns an Exact power of s when the exponent is integral in s, otherwise a
    complex number evaluated at ctx.
    """
    z = complex(z)
    if weight2 == 0 or z == 0:
        return Exact.one()
    # exponent of q is i*z*c*weight2 with c = -1/2 (n) or +1 (m)
    c = Fraction(-1, 2) if grading == "n" else Fraction(1)
    if z.real == 0.0:
        s_exponent = _is_integral(-2.0 * z.imag * float(c) * weight2)
        if s_exponent is not None:
            return Exact.spower(s_exponent)
    if ctx is None:
        raise ValueError(f"flow at z={z} is not exact on weight {weight2}; pass a QContext")
    with ctx.workprec():
        exponent = mp.mpc(0, 1) * mp.mpc(z.real, z.imag) * float(c) * weight2
        return complex(mp.power(ctx.mq, exponent))


def sigma(z: complex, x: NCPoly, ctx: Optional[QContext] = None, grading: str = "n") -> NCPoly:
    """
    Modular automorphism sigma_z on the coordinate algebra.

    Parameters:
    z (complex): Flow parameter. Purely imaginary z with integral s-exponent stays exact.
    x (NCPoly): Element to transform.
    ctx (QContext): Needed only when the scaling is not an integral power of s.
    grading (str): 'n' for the Haar modular group, 'm' for the Podleś flow.

    Returns:
    NCPoly: The transformed element.
    """
    return x.map_coefficients(lambda m, c: c * flow_factor(z, m.weight2(grading), grading, ctx))


def drop_scalar(x: NCPoly) -> NCPoly:
    """Projection onto the span of nonconstant monomials (the quotient by scalars)."""
    return NCPoly({m: c for m, c in x.items() if not m.is_unit()})


def random_word(rng, max_length: int, min_length: int = 1) -> str:
    length = int(rng.integers(min_length, max_length + 1))
    return "".join(rng.choice(list(GENERATORS), size=length))


def random_poly(rng, max_degree: int = 3, terms: int = 3) -> NCPoly:
    """Random element with small integer coefficients, built from random words."""
    acc = NCPoly.zero()
    for _ in range(terms):
        coef = Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 3)))
        acc = acc + normal_form(random_word(rng, max_degree)) * Exact.spower(int(rng.integers(-2, 3)), coef)
    return acc


class NCMatrix:
    """
    Square matrix with NCPoly entries, used for unitaries over the algebra.
    """

    def __init__(self, rows):
        rows = [[e if isinstance(e, NCPoly) else _as_poly(e) for e in row] for row in rows]
        k = len(rows)
        if k == 0 or any(len(row) != k for row in rows):
            raise ValueError("NCMatrix needs a nonempty square array of entries")
        self.rows: Tuple[Tuple[NCPoly, ...], ...] = tuple(tuple(row) for row in rows)

    @property
    def size(self) -> int:
        return len(self.rows)

    @classmethod
    def identity(cls, k: int) -> "NCMatrix":
        return cls([[NCPoly.one() if i == j else NCPoly.zero() for j in range(k)] for i in range(k)])

    @classmethod
    def from_words(cls, words) -> "NCMatrix":
        return cls([[normal_form(w) if w else NCPoly.one() for w in row] for row in words])

    def __getitem__(self, ij: Tuple[int, int]) -> NCPoly:
        i, j = ij
        return self.rows[i][j]

    def __matmul__(self, other: "NCMatrix") -> "NCMatrix":
        if self.size != other.size:
            raise ValueError("size mismatch")
        k = self.size
        return NCMatrix([[sum((self[i, t] * other[t, j] for t in range(k)), NCPoly.zero())
                          for j in range(k)] for i in range(k)])

    def __sub__(self, other: "NCMatrix") -> "NCMatrix":
        k = self.size
        return NCMatrix([[self[i, j] - other[i, j] for j in range(k)] for i in range(k)])

    def star(self) -> "NCMatrix":
        k = self.size
        return NCMatrix([[star(self[j, i]) for j in range(k)] for i in range(k)])

    def sigma(self, z: complex, ctx: Optional[QContext] = None, grading: str = "n") -> "NCMatrix":
        return NCMatrix([[sigma(z, e, ctx, grading) for e in row] for row in self.rows])

    def map(self, fn) -> "NCMatrix":
        return NCMatrix([[fn(e) for e in row] for row in self.rows])

    @property
    def degree(self) -> int:
        return max(e.degree for row in self.rows for e in row)

    def max_abs(self, ctx: QContext) -> float:
        return max(e.max_abs(ctx) for row in self.rows for e in row)

    def __eq__(self, other) -> bool:
        return isinstance(other, NCMatrix) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self) -> str:
        return f"NCMatrix({[[repr(e) for e in row] for row in self.rows]})"
