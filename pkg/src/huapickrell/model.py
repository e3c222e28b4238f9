"""Parameter types, Weyl-chamber configurations, and the symmetric-function kernel.

The model objects are deliberately thin: plain dataclasses around numpy arrays,
with explicit validation helpers instead of hidden coercion.  All functions in
this module are pure and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class HuaPickrellError(Exception):
    """Base class for domain errors raised by this package."""


class RegimeError(HuaPickrellError, ValueError):
    """Parameters outside the regime an operation is defined for."""


class CollisionError(HuaPickrellError, ValueError):
    """Coordinates coincide (or nearly coincide) where distinctness is required."""


class StiffnessError(HuaPickrellError, RuntimeError):
    """Adaptive step size underflowed; carries the last valid state."""

    def __init__(self, message: str, t: float, state: np.ndarray, dt: float):
        super().__init__(message)
        self.t = t
        self.state = state
        self.dt = dt


class NonRealRootsError(HuaPickrellError, ValueError):
    """A polynomial expected to be real-rooted has complex roots."""


class DegenerateParameterError(HuaPickrellError, ValueError):
    """Polynomial parameters hit a degree-collapse / vanishing-prefactor case."""


class IntegrityError(HuaPickrellError, RuntimeError):
    """A construction-time self-check failed."""


# Identity operations refuse to divide by gaps smaller than this; they exist
# for verification on well-separated points, not as production kernels.
MIN_IDENTITY_GAP = 1e-12


@dataclass(frozen=True)
class BetaParam:
    """Inverse-temperature parameter: finite beta >= 1, or the frozen limit.

    The frozen case is a first-class variant rather than a sentinel float so
    that drift formulas can branch on it explicitly instead of doing 1/inf
    arithmetic.
    """

    value: float | None  # None encodes the frozen (deterministic) limit

    def __post_init__(self):
        if self.value is not None:
            v = float(self.value)
            if not np.isfinite(v) or v < 1.0:
                raise RegimeError(f"finite beta must be >= 1, got {self.value}")
            object.__setattr__(self, "value", v)

    @classmethod
    def finite(cls, value: float) -> "BetaParam":
        return cls(float(value))

    @classmethod
    def frozen(cls) -> "BetaParam":
        return cls(None)

    @property
    def is_frozen(self) -> bool:
        return self.value is None

    @property
    def inverse(self) -> float:
        """1/beta, with the frozen limit mapped to 0."""
        return 0.0 if self.value is None else 1.0 / self.value

    def __str__(self) -> str:
        return "inf" if self.value is None else repr(self.value)


@dataclass(frozen=True)
class ModelParams:
    """Particle count and drift coefficients (n_particles, a, b, beta)."""

    n_particles: int
    a: float
    b: float
    beta: BetaParam = field(default_factory=BetaParam.frozen)

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise RegimeError(f"n_particles must be an integer >= 1, got {self.n_particles}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise RegimeError("a and b must be finite reals")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))


@dataclass
class Configuration:
    """Particle positions.  Chamber membership is checked by validate_configuration,
    not enforced at construction (predicates need to see invalid vectors too)."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).reshape(-1)

    def __len__(self) -> int:
        return self.coords.size

    def min_gap(self) -> float:
        if self.coords.size < 2:
            return np.inf
        return float(np.min(np.diff(self.coords)))


def validate_configuration(c: Configuration | np.ndarray, strict: bool = True) -> bool:
    """True iff the coordinates are (strictly, if requested) increasing.

    Exact comparisons: the chamber boundary is x_j == x_{j+1}.
    """
    x = c.coords if isinstance(c, Configuration) else np.asarray(c, dtype=float)
    if x.size < 2:
        return bool(np.all(np.isfinite(x)))
    if not np.all(np.isfinite(x)):
        return False
    d = np.diff(x)
    return bool(np.all(d > 0.0)) if strict else bool(np.all(d >= 0.0))


@dataclass
class Trajectory:
    """Recorded path of a particle system: times (strictly increasing) and
    states stacked row-wise, one row per time."""

    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    seed: int = 0  # 0 for deterministic flows

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] != self.times.size:
            raise ValueError("states must be a (len(times), N) array")
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        for i, t in enumerate(self.times):
            strict = t > self.times[0] or t > 0.0
            if not validate_configuration(self.states[i], strict=strict):
                raise ValueError(f"state at t={t} violates chamber ordering")

    @property
    def n_particles(self) -> int:
        return self.states.shape[1]

    def state(self, i: int) -> Configuration:
        return Configuration(self.states[i])

    def terminal(self) -> Configuration:
        return Configuration(self.states[-1])


# ---------------------------------------------------------------------------
# elementary symmetric polynomials and power sums
# ---------------------------------------------------------------------------

def elementary_symmetric_table(x: Sequence[float] | np.ndarray) -> np.ndarray:
    """All e_0(x), ..., e_N(x) by the one-pass Newton-triangle recursion."""
    x = np.asarray(x, dtype=float).reshape(-1)
    e = np.zeros(x.size + 1)
    e[0] = 1.0
    for i, xi in enumerate(x):
        # update highest orders first so each x_i enters exactly once
        for j in range(min(i + 1, x.size), 0, -1):
            e[j] += xi * e[j - 1]
    return e


_esp_table = elementary_symmetric_table


def elementary_symmetric(x: Sequence[float] | np.ndarray, n: int) -> float:
    """e_n(x) with the conventions e_0 = 1 and e_{-1} = 0."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if n == -1:
        return 0.0
    if n < -1 or n > x.size:
        raise ValueError(f"order n={n} out of range for {x.size} coordinates")
    return float(_esp_table(x)[n])


def elementary_symmetric_excluding(
    x: Sequence[float] | np.ndarray, n: int, excluded: Iterable[int]
) -> float:
    """e_n of the sub-vector with the given (0-based) coordinates removed."""
    x = np.asarray(x, dtype=float).reshape(-1)
    raw = [int(i) for i in excluded]
    idx = sorted(set(raw))
    if len(idx) != len(raw):
        raise ValueError("excluded indices must be distinct")
    if idx and (idx[0] < 0 or idx[-1] >= x.size):
        raise ValueError(f"excluded indices {idx} out of range for size {x.size}")
    keep = np.ones(x.size, dtype=bool)
    keep[idx] = False
    return elementary_symmetric(x[keep], n)


def power_sum(x: Sequence[float] | np.ndarray, k: int) -> float:
    """p_k(x) = sum_j x_j^k, with p_0 = N."""
    if k < 0:
        raise ValueError("power-sum order must be >= 0")
    x = np.asarray(x, dtype=float).reshape(-1)
    if k == 0:
        return float(x.size)
    return float(np.sum(x ** k))


def _require_separated(x: np.ndarray) -> None:
    if x.size >= 2:
        gaps = np.abs(x[:, None] - x[None, :])[np.triu_indices(x.size, 1)]
        if gaps.size and np.min(gaps) < MIN_IDENTITY_GAP:
            raise CollisionError(
                f"coordinates closer than {MIN_IDENTITY_GAP}; identities divide by gaps"
            )


def symmetric_identity_residuals(x: Sequence[float] | np.ndarray) -> dict[str, float]:
    """Max |LHS - RHS| for the elementary-symmetric-polynomial identities used
    by the closed flow of e_m under the interacting dynamics.

    Keys:
      deleted_sum        sum_i e_{k-1}(x w/o i)            = (N-k+1) e_{k-1}(x)
      deleted_sum_x      sum_i e_{k-1}(x w/o i) x_i        = k e_k(x)
      deleted_difference e_{k-1}(w/o i)-e_{k-1}(w/o j)     = -(x_i-x_j) e_{k-2}(w/o i,j)
      pair_inverse_gap   sum_{i!=j} e_{k-1}(w/o i)/(x_i-x_j)      = -(N-k+2)(N-k+1)/2 e_{k-2}(x)
      pair_product_gap   sum_{i!=j} e_{k-1}(w/o i) x_i x_j/(x_i-x_j) = -k(k-1)/2 e_k(x)
      pair_sum_deleted   sum_{i<j} (x_i+x_j) e_{k-2}(w/o i,j) = (k-1)(N-k+1) e_{k-1}(x)

    All residuals are maximised over the admissible orders k.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    _require_separated(x)
    n = x.size
    e_full = _esp_table(x)

    def e_of(vals: np.ndarray, order: int) -> float:
        if order == -1:
            return 0.0
        if order < -1 or order > vals.size:
            return 0.0
        return float(_esp_table(vals)[order])

    # deleted-coordinate tables: e_del[i][m] = e_m(x without i)
    e_del = [
        _esp_table(np.delete(x, i)) for i in range(n)
    ]

    def ed(i: int, order: int) -> float:
        if order == -1:
            return 0.0
        if order > n - 1:
            return 0.0
        return float(e_del[i][order])

    res = dict.fromkeys(
        [
            "deleted_sum",
            "deleted_sum_x",
            "deleted_difference",
            "pair_inverse_gap",
            "pair_product_gap",
            "pair_sum_deleted",
        ],
        0.0,
    )

    for k in range(1, n + 1):
        lhs = sum(ed(i, k - 1) for i in range(n))
        res["deleted_sum"] = max(res["deleted_sum"], abs(lhs - (n - k + 1) * e_full[k - 1]))

        lhs = sum(ed(i, k - 1) * x[i] for i in range(n))
        res["deleted_sum_x"] = max(res["deleted_sum_x"], abs(lhs - k * e_full[k]))

        for i in range(n):
            for j in range(i + 1, n):
                pair = e_of(np.delete(x, [i, j]), k - 2)
                lhs = ed(i, k - 1) - ed(j, k - 1)
                rhs = -(x[i] - x[j]) * pair
                res["deleted_difference"] = max(res["deleted_difference"], abs(lhs - rhs))

        lhs = sum(
            ed(i, k - 1) / (x[i] - x[j]) for i in range(n) for j in range(n) if i != j
        )
        rhs = -(n - k + 2) * (n - k + 1) / 2.0 * (e_full[k - 2] if k >= 2 else 0.0)
        res["pair_inverse_gap"] = max(res["pair_inverse_gap"], abs(lhs - rhs))

        lhs = sum(
            ed(i, k - 1) * x[i] * x[j] / (x[i] - x[j])
            for i in range(n)
            for j in range(n)
            if i != j
        )
        rhs = -k * (k - 1) / 2.0 * e_full[k]
        res["pair_product_gap"] = max(res["pair_product_gap"], abs(lhs - rhs))

        lhs = sum(
            (x[i] + x[j]) * e_of(np.delete(x, [i, j]), k - 2)
            for i in range(n)
            for j in range(i + 1, n)
        )
        rhs = (k - 1) * (n - k + 1) * e_full[k - 1]
        res["pair_sum_deleted"] = max(res["pair_sum_deleted"], abs(lhs - rhs))

    return res


def stieltjes_power_identity_residual(x: Sequence[float] | np.ndarray, m: int) -> float:
    """|LHS - RHS| for  2 sum_{j!=l} x_j^{m+1}/(x_j-x_l)
                        = sum_{k=0}^m p_k(x) p_{m-k}(x) - (m+1) p_m(x).

    This is the exponent-restored form of the pairwise-interaction moment
    identity; it is what the empirical-moment drift derivation rests on.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    x = np.asarray(x, dtype=float).reshape(-1)
    _require_separated(x)
    n = x.size
    lhs = 0.0
    for j in range(n):
        for l in range(n):
            if j != l:
                lhs += x[j] ** (m + 1) / (x[j] - x[l])
    lhs *= 2.0
    p = [power_sum(x, k) for k in range(m + 1)]
    rhs = sum(p[k] * p[m - k] for k in range(m + 1)) - (m + 1) * p[m]
    return abs(lhs - rhs)
