import math
import logging
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy.linalg

from QScalar import ConfigurationError, ConvergenceError

# Configuração do logger
logging.basicConfig(filename='DerivedLp.log', level=logging.INFO,
                    format='%(asctime)s - %(levelname)s - %(message)s')

EXPONENTS = (1, 2, 3, 4)
HOLDER_PAIRS = tuple((p, q) for p in EXPONENTS for q in EXPONENTS if 1.0 / p + 1.0 / q <= 1.0)


@dataclass(frozen=True)
class WeightedSpace:
    """
    Finite-dimensional model of a weight: matrix trace plus a positive
    diagonal Radon-Nikodym derivative.
    """
    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float)
        if d.ndim != 1 or d.size == 0:
            raise ConfigurationError("delta must be a nonempty vector")
        if np.any(d <= 0):
            raise ConfigurationError("delta entries must be strictly positive")
        object.__setattr__(self, "delta", d)

    @property
    def dim(self) -> int:
        return self.delta.size

    def power(self, r: float) -> np.ndarray:
        return self.delta ** r

    def condition(self) -> float:
        return float(self.delta.max() / self.delta.min())


def sigma_conj(z: complex, x: np.ndarray, W: WeightedSpace) -> np.ndarray:
    """Modular flow Delta^{iz} x Delta^{-iz}: x_jk -> (Delta_j/Delta_k)^{iz} x_jk."""
    log_d = np.log(W.delta)
    factor = np.exp(1j * complex(z) * (log_d[:, None] - log_d[None, :]))
    out = factor * x
    return out.real if np.isrealobj(x) and complex(z).real == 0.0 else out


def schatten(x: np.ndarray, p: float, W: Optional[WeightedSpace] = None) -> float:
    """
    Schatten p-norm (sum of singular values to the p)^{1/p}.

    Parameters:
    x (np.ndarray): Matrix.
    p (float): Exponent, at least 1.
    W (WeightedSpace): Unused; kept so every norm shares one signature.

    Returns:
    float: The norm.
    """
    if p < 1:
        raise ConfigurationError(f"Schatten exponent must be >= 1, got {p}")
    sv = scipy.linalg.svdvals(np.atleast_2d(x))
    return float(np.sum(sv ** p) ** (1.0 / p))


def _guard(W: WeightedSpace, n: float, p: float = 1.0):
    exponent = (n + 1.0 / p) * math.log2(W.condition())
    if exponent > 900:
        logging.error(f"Fluxo modular excede a precisão: 2^{exponent:.0f}")
        raise ConvergenceError("weight condition number too large for float64 at this order; "
                               "raise precision or reduce n",
                               {"log2_condition_power": exponent})


def flowed_norm(x: np.ndarray, p: float, t: float, W: WeightedSpace) -> float:
    """t -> ||Delta^{1/p} sigma_{it}(x)||_p, with sigma_{it}(x) = Delta^{-t} x Delta^{t}."""
    moved = sigma_conj(1j * t, x, W)
    return schatten(W.power(1.0 / p)[:, None] * moved, p)


def derived_norm(x: np.ndarray, p: float, n: float, W: WeightedSpace) -> float:
    """
    Derived L^p norm: supremum over t in [-n, n] of ||Delta^{1/p} sigma_{it}(x)||_p.

    The function of t is log-convex, so the supremum is read at the endpoints.
    """
    if p < 1:
        raise ConfigurationError(f"Schatten exponent must be >= 1, got {p}")
    _guard(W, n, p)
    return max(flowed_norm(x, p, -n, W), flowed_norm(x, p, n, W))


def analytic_norm(x: np.ndarray, n: float, W: WeightedSpace) -> float:
    """Sup over t in [-n, n] of the operator norm of sigma_{it}(x)."""
    _guard(W, n)
    return max(float(scipy.linalg.norm(sigma_conj(1j * t, x, W), 2)) for t in (-n, n))


def grid_sup(fn: Callable[[float], float], n: float, points: int) -> float:
    return max(fn(t) for t in np.linspace(-n, n, points)) if n > 0 else fn(0.0)


def weighted_phi(x: np.ndarray, W: WeightedSpace) -> complex:
    """phi(x) = Tr(Delta x) = sum_j Delta_j x_jj."""
    return complex(np.sum(W.delta * np.diag(x)))


def positive_power(x: np.ndarray, r: float) -> np.ndarray:
    """r-th power of a positive semidefinite matrix through eigh."""
    h = (x + x.conj().T) / 2
    w, v = scipy.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (v * w ** r) @ v.conj().T


def absolute(x: np.ndarray) -> np.ndarray:
    return positive_power(x.conj().T @ x, 0.5)


@dataclass
class PropertyResult:
    name: str
    trials: int = 0
    violations: int = 0
    worst_ratio: float = 0.0
    failures: List[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def record(self, lhs: float, rhs: float, slack: float, detail: dict):
        self.trials += 1
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= 0 else math.inf)
        self.worst_ratio = max(self.worst_ratio, ratio)
        if lhs > rhs * (1.0 + slack) + 1e-14:
            self.violations += 1
            if len(self.failures) < 5:
                self.failures.append({**detail, "lhs": lhs, "rhs": rhs})

    def as_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _random_matrix(rng, d: int) -> np.ndarray:
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def _random_space(rng, d: int) -> WeightedSpace:
    return WeightedSpace(np.exp(rng.uniform(-1.0, 1.0, size=d)))


def run_lp_suite(dim: int = 6, trials: int = 100, seed: int = 0, slack: float = 1e-9,
                 grid_points: int = 1000) -> Dict[str, PropertyResult]:
    """
    Property suite for the derived L^p calculus on random weighted models.

    Parameters:
    dim (int): Largest matrix dimension; each trial draws a dimension in [2, dim].
    trials (int): Trials per property.
    seed (int): Seed of the numpy generator; fixes every draw.
    slack (float): Relative slack on inequalities.
    grid_points (int): Points in the dense grid backing the endpoint supremum.

    Returns:
    Dict[str, PropertyResult]: One result per property.
    """
    if dim < 2:
        raise ConfigurationError("dimension must be at least 2")
    rng = np.random.default_rng(seed)
    results = {name: PropertyResult(name) for name in (
        "holder", "inclusion", "adjoint", "bimodule", "twisted_trace",
        "flow_invariance", "centralizer_power", "endpoint_supremum")}

    for trial in range(trials):
        d = int(rng.integers(2, dim + 1))
        W = _random_space(rng, d)
        x, y, z = (_random_matrix(rng, d) for _ in range(3))
        n = int(rng.integers(0, 3))
        p, q = (int(v) for v in rng.choice(EXPONENTS, size=2))
        detail = {"trial": trial, "dim": d, "n": n, "p": p, "q": q}

        hp, hq = HOLDER_PAIRS[int(rng.integers(0, len(HOLDER_PAIRS)))]
        r = 1.0 / (1.0 / hp + 1.0 / hq)
        lhs = derived_norm(x @ y, r, n, W)
        rhs = derived_norm(x, hp, n + math.ceil(1.0 / hq), W) * derived_norm(y, hq, n, W)
        results["holder"].record(lhs, rhs, slack, {**detail, "p": hp, "q": hq})

        lo, hi = min(p, q), max(p, q)
        lhs = derived_norm(x, hi, n, W)
        rhs = analytic_norm(x, n, W) ** (1.0 - lo / hi) * derived_norm(x, lo, n, W) ** (lo / hi)
        results["inclusion"].record(lhs, rhs, slack, detail)

        lhs = derived_norm(x.conj().T, p, n, W)
        rhs = derived_norm(x, p, n + math.ceil(1.0 / p), W)
        results["adjoint"].record(lhs, rhs, slack, detail)

        lhs = derived_norm(y @ x @ z, p, n, W)
        rhs = analytic_norm(y, n + math.ceil(1.0 / p), W) * derived_norm(x, p, n, W) * analytic_norm(z, n, W)
        results["bimodule"].record(lhs, rhs, slack, detail)

        twisted = abs(weighted_phi(x @ y, W) - weighted_phi(sigma_conj(1j, y, W) @ x, W))
        results["twisted_trace"].record(twisted, slack * max(1.0, abs(weighted_phi(x @ y, W))), 0.0, detail)

        zc = complex(rng.normal(), rng.normal())
        drift = abs(weighted_phi(sigma_conj(zc, x, W), W) - weighted_phi(x, W))
        results["flow_invariance"].record(drift, slack * max(1.0, abs(weighted_phi(x, W))), 0.0,
                                          {**detail, "z": str(zc)})

        # centralizer element: block diagonal over a Delta with repeated eigenvalues
        levels = np.exp(rng.uniform(-1.0, 1.0, size=2))
        split = int(rng.integers(1, d))
        Wc = WeightedSpace(np.concatenate([np.full(split, levels[0]), np.full(d - split, levels[1])]))
        xc = np.zeros((d, d), dtype=complex)
        xc[:split, :split] = _random_matrix(rng, split)
        xc[split:, split:] = _random_matrix(rng, d - split)
        # compared after raising both positive sides to the p-th power
        abs_x = absolute(xc)
        target = Wc.delta[:, None] * positive_power(xc.conj().T @ xc, p / 2.0)
        lifted = np.linalg.matrix_power(Wc.power(1.0 / p)[:, None] * abs_x, p)
        scale = max(1.0, float(np.max(np.abs(target))))
        results["centralizer_power"].record(float(np.max(np.abs(lifted - target))) / scale,
                                            max(slack, 1e-11), 0.0, detail)

        if n > 0:
            grid = grid_sup(lambda t: flowed_norm(x, p, t, W), n, grid_points)
            results["endpoint_supremum"].record(grid, derived_norm(x, p, n, W), slack, detail)

    for name, res in results.items():
        logging.info(f"Propriedade {name}: {res.trials} ensaios, {res.violations} violações")
    return results
