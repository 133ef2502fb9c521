import os
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Optional, Tuple, Union

import mpmath as mp
from dotenv import load_dotenv

load_dotenv(".env")

# Configuração do logger
logging.basicConfig(filename='QScalar.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

Number = Union[int, Fraction, float, complex]


class ConfigurationError(ValueError):
    """Invalid deformation parameter, precision or command configuration."""


class TruncationError(ValueError):
    """The basis cutoff is too small for the requested evaluation."""


class ConvergenceError(RuntimeError):
    """
    A truncated computation did not converge or was not stable.

    Parameters:
    message (str): Human readable diagnostic.
    payload (dict): Machine readable evidence attached to the failure.
    """

    def __init__(self, message: str, payload: Optional[dict] = None):
        super().__init__(message)
        self.payload = payload or {}


def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name)
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError:
        logging.error(f"Variável de ambiente {name} inválida: {value}")
        raise ConfigurationError(f"environment variable {name} must be an integer, got {value!r}")


def _env_float(name: str, default: float) -> float:
    value = os.environ.get(name)
    if value is None or value.strip() == "":
        return default
    try:
        return float(value)
    except ValueError:
        logging.error(f"Variável de ambiente {name} inválida: {value}")
        raise ConfigurationError(f"environment variable {name} must be a float, got {value!r}")


@dataclass(frozen=True)
class QContext:
    """
    Deformation parameter together with the numerical policy of a run.

    Defaults come from the environment (QSU2_PRECISION, QSU2_SVD_THRESHOLD,
    QSU2_RESIDUAL_TOL, QSU2_SUP_GRID, QSU2_MAX_SPIN2), loaded from `.env`.
    precision is in bits and only reaches mpmath scalars; operators stay float64.
    """
    q: float
    precision: int = field(default_factory=lambda: _env_int("QSU2_PRECISION", 106))
    svd_threshold: float = field(default_factory=lambda: _env_float("QSU2_SVD_THRESHOLD", 1e-7))
    gap_ratio: float = field(default_factory=lambda: _env_float("QSU2_GAP_RATIO", 1e3))
    residual_tol: float = field(default_factory=lambda: _env_float("QSU2_RESIDUAL_TOL", 1e-10))
    sup_grid: int = field(default_factory=lambda: _env_int("QSU2_SUP_GRID", 1000))
    max_spin2: int = field(default_factory=lambda: _env_int("QSU2_MAX_SPIN2", 4))

    def __post_init__(self):
        if not (0.0 < float(self.q) < 1.0):
            raise ConfigurationError(f"q must lie in (0,1), got {self.q}")
        if self.precision < 53:
            raise ConfigurationError(f"precision must be at least 53 bits, got {self.precision}")
        if self.svd_threshold <= 0 or self.residual_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.sup_grid < 2:
            raise ConfigurationError("sup_grid must be at least 2")

    def workprec(self):
        return mp.workprec(self.precision)

    @property
    def mq(self) -> mp.mpf:
        with self.workprec():
            return mp.mpf(str(self.q))

    @property
    def s(self) -> mp.mpf:
        with self.workprec():
            return mp.sqrt(self.mq)

    def qpow(self, exponent) -> mp.mpf:
        """q raised to a real (possibly fractional) exponent."""
        with self.workprec():
            return mp.power(self.mq, mp.mpf(exponent) if not isinstance(exponent, Fraction)
                            else mp.mpf(exponent.numerator) / exponent.denominator)

    def spow(self, k: int) -> mp.mpf:
        with self.workprec():
            return mp.power(self.s, k)


def qint(z, ctx: QContext, base=None) -> mp.mpf:
    """
    q-integer [z] = (base^z - base^-z) / (base - base^-1).

    Parameters:
    z: Real or half-integer argument.
    ctx (QContext): Deformation context.
    base: Deformation base, defaults to q. Pass ctx.s for [z]_{q^{1/2}}.

    Returns:
    mp.mpf: The q-integer.
    """
    with ctx.workprec():
        b = ctx.mq if base is None else mp.mpf(base)
        if b == 1:
            raise ConfigurationError("q-integer undefined at base 1")
        zz = mp.mpf(z.numerator) / z.denominator if isinstance(z, Fraction) else mp.mpf(z)
        return (mp.power(b, zz) - mp.power(b, -zz)) / (b - 1 / b)


def _normalize_coefficient(c: Number) -> Number:
    if isinstance(c, bool):
        return Fraction(int(c))
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, complex) and c.imag == 0.0:
        return c.real
    return c


def _to_mp(c: Number):
    if isinstance(c, Fraction):
        return mp.mpf(c.numerator) / c.denominator
    if isinstance(c, complex):
        return mp.mpc(c.real, c.imag)
    return mp.mpf(c)


class Exact:
    """
    Laurent polynomial in s = q^{1/2}, stored as exponent -> coefficient.

    Coefficients are rationals for symbolic work. Numeric floats or complex
    numbers are accepted where a coefficient has no closed form (Clebsch-Gordan
    factors, non-integral flows) and simply propagate through the arithmetic.
    """
    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Dict[int, Number]] = None):
        clean = {}
        for k, c in (terms or {}).items():
            c = _normalize_coefficient(c)
            if c != 0:
                clean[int(k)] = c
        self._terms: Tuple[Tuple[int, Number], ...] = tuple(sorted(clean.items()))
        self._hash = None

    @classmethod
    def const(cls, c: Number) -> "Exact":
        return cls({0: c})

    @classmethod
    def spower(cls, k: int, c: Number = 1) -> "Exact":
        return cls({k: c})

    @classmethod
    def zero(cls) -> "Exact":
        return cls()

    @classmethod
    def one(cls) -> "Exact":
        return cls({0: 1})

    def items(self) -> Iterable[Tuple[int, Number]]:
        return iter(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for _, c in self._terms)

    def __add__(self, other) -> "Exact":
        other = _as_exact(other)
        acc = dict(self._terms)
        for k, c in other._terms:
            acc[k] = acc.get(k, 0) + c
        return Exact(acc)

    __radd__ = __add__

    def __neg__(self) -> "Exact":
        return Exact({k: -c for k, c in self._terms})

    def __sub__(self, other) -> "Exact":
        return self + (-_as_exact(other))

    def __rsub__(self, other) -> "Exact":
        return _as_exact(other) - self

    def __mul__(self, other) -> "Exact":
        if not isinstance(other, Exact):
            other = _normalize_coefficient(other)
            return Exact({k: c * other for k, c in self._terms})
        acc: Dict[int, Number] = {}
        for k1, c1 in self._terms:
            for k2, c2 in other._terms:
                acc[k1 + k2] = acc.get(k1 + k2, 0) + c1 * c2
        return Exact(acc)

    __rmul__ = __mul__

    def shift(self, k: int) -> "Exact":
        """Multiply by s^k."""
        return Exact({e + k: c for e, c in self._terms})

    def conjugate(self) -> "Exact":
        return Exact({k: (c.conjugate() if isinstance(c, complex) else c) for k, c in self._terms})

    def evaluate(self, ctx: QContext):
        with ctx.workprec():
            s = ctx.s
            total = mp.mpf(0)
            for k, c in self._terms:
                total += _to_mp(c) * mp.power(s, k)
            return total

    def max_abs(self, ctx: QContext) -> float:
        """Largest |coefficient| after substituting s, used for numeric residuals."""
        return float(abs(self.evaluate(ctx)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Exact):
            try:
                other = _as_exact(other)
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
        return " + ".join(f"({c})*s^{k}" if k else f"({c})" for k, c in self._terms)


def _as_exact(value) -> Exact:
    if isinstance(value, Exact):
        return value
    if isinstance(value, (int, Fraction, float, complex)):
        return Exact.const(value)
    raise TypeError(f"cannot coerce {type(value).__name__} to Exact")


def exact_eval(e: Exact, ctx: QContext):
    """Substitute s = q^{1/2} into an exact Laurent polynomial."""
    return _as_exact(e).evaluate(ctx)


def to_float(x) -> float:
    return float(mp.re(x)) if isinstance(x, mp.mpc) else float(x)


def to_complex(x) -> complex:
    return complex(x)
