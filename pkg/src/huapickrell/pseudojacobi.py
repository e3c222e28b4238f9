"""Pseudo-Jacobi (Romanovski-Routh) and classical Jacobi polynomials.

Evaluation by hypergeometric series and by three-term recurrence, zero
computation via the symmetric tridiagonal recurrence (colleague) matrix with
Newton polishing, the electrostatic characterization of the zeros, weight and
orthogonality checks, and discrete orthonormal polynomials.

Parameter conventions: P_n(.; a, b) here always means the polynomial-family
convention (weight (1+x^2)^a e^{2b arctan x} for a < 0).  The particle-dynamics
convention uses a different 'a'; the bridge between the two lives in exactly
one function, stationary_poly_params().
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .model import (
    CollisionError,
    Configuration,
    DegenerateParameterError,
    IntegrityError,
    NonRealRootsError,
    RegimeError,
)
from .special import integrate_real_line, log_gamma_complex

# fixed probe abscissae for recurrence-vs-series self checks
_PROBES = (-2.1, -0.7, 0.0, 0.9, 1.8)
_SELF_CHECK_RTOL = 1e-9


def stationary_poly_params(n_particles: int, a: float, b: float) -> tuple[float, float]:
    """Map drift parameters (a, b) of the N-particle flow to the polynomial
    parameters whose degree-N member has the stationary configuration as its
    zero set.  This is the only place the a -> -(N+a) conversion happens."""
    return (-(n_particles + a), b)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _pochhammer_complex(z: complex, k: int) -> complex:
    out = complex(1.0)
    for i in range(k):
        out *= z + i
    return out


def pseudo_jacobi_series_eval(n: int, a: float, b: float, x: float) -> float:
    """Evaluate P_n(x; a, b) from its finite hypergeometric series.

    Intermediate arithmetic is complex (Pochhammer products of a +- ib); the
    result must be real up to roundoff and the real part is returned.
    """
    if n < 0:
        raise ValueError("degree must be >= 0")
    apib = complex(a, b)
    # denominators (a+ib+1)_k must not vanish for k <= n
    for k in range(n):
        if apib + 1 + k == 0:
            raise DegenerateParameterError(
                f"Pochhammer factor (a+ib+1+{k}) vanishes for (a,b)=({a},{b})"
            )
    pref = (-1j) ** n * _pochhammer_complex(apib + 1.0, n) / math.factorial(n)
    u = (1.0 - 1j * x) / 2.0
    term = complex(1.0)
    total = complex(1.0)
    for k in range(n):
        term *= (-n + k) * (2.0 * a + n + 1.0 + k) / ((apib + 1.0 + k) * (k + 1.0)) * u
        total += term
    val = pref * total
    if abs(val.imag) > 1e-9 * (1.0 + abs(val)):
        raise IntegrityError(
            f"series evaluation not real: P_{n}({x}; {a}, {b}) = {val}"
        )
    return val.real


def _recurrence_factors(n: int, a: float, b: float) -> tuple[float, float, float, float]:
    """Coefficients of  A P_{n+1} = (B2 x + B0) P_n + C P_{n-1}."""
    A = (n + 1.0) * (n + 2.0 * a + 1.0) * (n + a)
    B2 = (2.0 * n + 2.0 * a + 1.0) * (n + a) * (n + a + 1.0)
    B0 = (2.0 * n + 2.0 * a + 1.0) * a * b
    C = ((n + a) ** 2 + b**2) * (n + a + 1.0)
    return A, B2, B0, C


def pseudo_jacobi_leading_coeff(n: int, a: float, b: float) -> float:
    """Leading coefficient (2a+n+1)_n / (n! 2^n); zero signals degree collapse."""
    out = 1.0
    for j in range(1, n + 1):
        out *= (2.0 * a + n + j) / (2.0 * j)
    return out


def _check_not_degenerate(n_max: int, a: float, b: float) -> None:
    for m in range(1, n_max + 1):
        for j in range(1, m + 1):
            if 2.0 * a + m + j == 0.0:
                raise DegenerateParameterError(
                    f"degree {m} collapses for a={a} (factor 2a+{m}+{j} vanishes)"
                )
    for n in range(n_max):
        A = (n + 1.0) * (n + 2.0 * a + 1.0) * (n + a)
        if A == 0.0:
            raise DegenerateParameterError(
                f"recurrence prefactor vanishes at step n={n} for a={a}"
            )


def pseudo_jacobi_eval(n: int, a: float, b: float, x) -> np.ndarray | float:
    """P_n(x; a, b) by the three-term recurrence; x may be an array."""
    v, _ = pseudo_jacobi_eval_with_derivative(n, a, b, x)
    return v


def pseudo_jacobi_eval_with_derivative(n: int, a: float, b: float, x):
    """(P_n, P_n') at x by the differentiated three-term recurrence."""
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p_prev = np.zeros_like(x)
    d_prev = np.zeros_like(x)
    p = np.ones_like(x)
    d = np.zeros_like(x)
    if n == 0:
        return (p[0], d[0]) if scalar else (p, d)
    for k in range(n):
        A, B2, B0, C = _recurrence_factors(k, a, b)
        if A == 0.0:
            raise DegenerateParameterError(f"recurrence prefactor vanishes at n={k}")
        p_next = ((B2 * x + B0) * p + C * p_prev) / A
        d_next = (B2 * (x * d + p) + B0 * d + C * d_prev) / A
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return (p[0], d[0]) if scalar else (p, d)


def pseudo_jacobi_recurrence_coeffs(n_max: int, a: float, b: float) -> np.ndarray:
    """Monomial coefficient table for P_0 ... P_{n_max} (row k, ascending powers).

    Built from the three-term recurrence with P_{-1} = 0, P_0 = 1, then
    validated against the series at fixed probe points; the validation pins
    down the sign convention of the P_{n-1} term at runtime.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    _check_not_degenerate(n_max, a, b)
    table = np.zeros((n_max + 1, n_max + 1))
    table[0, 0] = 1.0
    if n_max >= 1:
        table[1, 0] = b
        table[1, 1] = a + 1.0
    for n in range(1, n_max):
        A, B2, B0, C = _recurrence_factors(n, a, b)
        nxt = np.zeros(n_max + 1)
        nxt[1 : n + 2] += B2 * table[n, : n + 1]
        nxt += B0 * table[n]
        nxt += C * table[n - 1]
        table[n + 1] = nxt / A
    for n in range(n_max + 1):
        for xp in _PROBES:
            ref = pseudo_jacobi_series_eval(n, a, b, xp)
            got = float(np.polynomial.polynomial.polyval(xp, table[n]))
            if abs(got - ref) > _SELF_CHECK_RTOL * (1.0 + abs(ref)):
                raise IntegrityError(
                    f"recurrence/series mismatch at degree {n}, x={xp}: {got} vs {ref}"
                )
    return table


@dataclass(frozen=True)
class PseudoJacobiPoly:
    """A single pseudo-Jacobi polynomial in the monomial basis."""

    degree: int
    a: float
    b: float
    coeffs: np.ndarray  # ascending, length degree+1

    @classmethod
    def construct(cls, n: int, a: float, b: float) -> "PseudoJacobiPoly":
        table = pseudo_jacobi_recurrence_coeffs(n, a, b)
        return cls(n, float(a), float(b), table[n, : n + 1].copy())

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)


# ---------------------------------------------------------------------------
# zeros
# ---------------------------------------------------------------------------

@dataclass
class ZeroSet:
    """Validated, strictly increasing zeros of an orthogonal polynomial."""

    zeros: np.ndarray
    family: str  # "pseudo_jacobi" or "jacobi"
    family_params: tuple
    residual: float  # max |P(z_j)| after polishing
    electrostatic: float  # residual of the stationarity system

    def __post_init__(self):
        self.zeros = np.asarray(self.zeros, dtype=float).reshape(-1)
        if self.zeros.size >= 2 and not np.all(np.diff(self.zeros) > 0):
            raise IntegrityError("zero set must be strictly increasing")

    def __len__(self) -> int:
        return self.zeros.size

    def as_configuration(self) -> Configuration:
        return Configuration(self.zeros)


def _pseudo_jacobi_jacobi_matrix(N: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetric recurrence matrix whose
    eigenvalues are the zeros of P_N(.; a, b) (finite orthogonality regime)."""
    diag = np.array([-a * b / ((k + a) * (k + a + 1.0)) for k in range(N)])
    off = np.empty(N - 1)
    for k in range(1, N):
        beta_k = (
            -((k + a) ** 2 + b**2)
            * k
            * (2.0 * a + k)
            / ((k + a) ** 2 * (2.0 * a + 2.0 * k + 1.0) * (2.0 * a + 2.0 * k - 1.0))
        )
        if beta_k <= 0:
            raise IntegrityError(
                f"recurrence matrix not symmetrizable at k={k} (beta={beta_k})"
            )
        off[k - 1] = math.sqrt(beta_k)
    return diag, off


def pseudo_jacobi_zeros(N: int, a: float, b: float, newton_steps: int = 4) -> ZeroSet:
    """Zeros of P_N(.; a, b) for a < 0, N < -a (all real and simple there).

    Eigenvalues of the symmetric tridiagonal recurrence matrix give globally
    correct approximations; a few Newton steps on the recurrence-evaluated
    polynomial polish them to machine precision.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not (a < 0 and N < -a):
        raise RegimeError(f"zeros are guaranteed real only for a < 0, N < -a; got N={N}, a={a}")
    diag, off = _pseudo_jacobi_jacobi_matrix(N, a, b)
    if N == 1:
        z = diag.copy()
    else:
        z = scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True)
    z = np.sort(z)
    for _ in range(newton_steps):
        p, dp = pseudo_jacobi_eval_with_derivative(N, a, b, z)
        step = p / dp
        if not np.all(np.isfinite(step)):
            raise IntegrityError("Newton polish produced non-finite correction")
        z = z - step
    if N >= 2 and not np.all(np.diff(z) > 0):
        raise IntegrityError("Newton polish reordered zeros")
    p, _ = pseudo_jacobi_eval_with_derivative(N, a, b, z)
    resid = float(np.max(np.abs(np.atleast_1d(p))))
    elec = electrostatic_residual(z, a, b)
    return ZeroSet(z, "pseudo_jacobi", (N, a, b), resid, elec)


def electrostatic_residual(z: Sequence[float] | np.ndarray, a: float, b: float) -> float:
    """max_j | (a+1) z_j + b + sum_{k != j} (1+z_j^2)/(z_j - z_k) |.

    Vanishes exactly at the zero set of P_N(.; a, b); the gradient of the
    log of the confining functional h below equals this expression divided
    by (1 + z_j^2).
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    n = z.size
    if n >= 2:
        gaps = np.diff(np.sort(z))
        if np.min(np.abs(gaps)) == 0.0:
            raise CollisionError("coincident entries in electrostatic residual")
    worst = 0.0
    for j in range(n):
        s = (a + 1.0) * z[j] + b
        for k in range(n):
            if k != j:
                s += (1.0 + z[j] ** 2) / (z[j] - z[k])
        worst = max(worst, abs(s))
    return worst


def h_objective(x: Configuration | np.ndarray, a: float, b: float):
    """Confining functional h and the gradient of log h.

    h(x) = prod_j (1+x_j^2)^{(a+1)/2} e^{b arctan x_j} * prod_{j<k} (x_k - x_j);
    its unique interior maximum (for a < 0, N < -a) is the zero set of the
    degree-N pseudo-Jacobi polynomial.
    """
    x = x.coords if isinstance(x, Configuration) else np.asarray(x, dtype=float).reshape(-1)
    if x.size >= 2 and not np.all(np.diff(x) > 0):
        raise ValueError("h is zero on the chamber boundary; log-gradient undefined")
    log_h = float(np.sum((a + 1.0) / 2.0 * np.log1p(x**2) + b * np.arctan(x)))
    for j in range(x.size):
        for k in range(j + 1, x.size):
            log_h += math.log(x[k] - x[j])
    grad = (a + 1.0) * x / (1.0 + x**2) + b / (1.0 + x**2)
    for j in range(x.size):
        for k in range(x.size):
            if k != j:
                grad[j] += 1.0 / (x[j] - x[k])
    return math.exp(log_h), grad


# ---------------------------------------------------------------------------
# weight and orthogonality
# ---------------------------------------------------------------------------

def pseudo_jacobi_weight(x, a: float, b: float):
    """w(x) = (1+x^2)^a e^{2 b arctan x}."""
    x = np.asarray(x, dtype=float)
    return (1.0 + x**2) ** a * np.exp(2.0 * b * np.arctan(x))


def pseudo_jacobi_norm(n: int, a: float, b: float) -> float:
    """Closed form of int P_n^2 w dx in the finite orthogonality regime.

    The textbook display misses a power of two; the quadrature-resolved
    constant is 2^(2a+2) pi Gamma(-n-2a) / ((-2n-2a-1) n! |Gamma(-n-a+ib)|^2),
    i.e. an extra factor 2^(2a+1).  Verified against adaptive quadrature for
    a range of (n, a, b); see the orthogonality tests.
    """
    if not (n + a < 0 and 2 * n + 2 * a + 1 < 0):
        raise RegimeError(f"norm formula needs n < -a - 1/2; got n={n}, a={a}")
    log_norm = (
        (2.0 * a + 2.0) * math.log(2.0)
        + math.log(math.pi)
        + math.lgamma(-n - 2.0 * a)
        - math.log(-2.0 * n - 2.0 * a - 1.0)
        - math.lgamma(n + 1.0)
        - 2.0 * log_gamma_complex(complex(-n - a, b)).real
    )
    return math.exp(log_norm)


def orthogonality_check(n: int, m: int, a: float, b: float, tol: float = 1e-10):
    """(quadrature integral of P_n P_m w over R, closed-form reference).

    Reference is 0 for n < m and pseudo_jacobi_norm(n, a, b) for n == m.
    Requires the integrability condition n + m + 2a < -1.
    """
    if n > m:
        raise ValueError("call with n <= m")
    if not (a < 0 and max(n, m) < -a and n + m + 2.0 * a < -1.0):
        raise RegimeError(
            f"orthogonality integral not in regime: n={n}, m={m}, a={a}"
        )

    def integrand(x: float) -> float:
        pn = pseudo_jacobi_eval(n, a, b, x)
        pm = pn if m == n else pseudo_jacobi_eval(m, a, b, x)
        return float(pn * pm * pseudo_jacobi_weight(x, a, b))

    integral = integrate_real_line(integrand, tol=tol)
    reference = pseudo_jacobi_norm(n, a, b) if n == m else 0.0
    return integral, reference


# ---------------------------------------------------------------------------
# classical Jacobi polynomials
# ---------------------------------------------------------------------------

def jacobi_eval_with_derivative(n: int, alpha: float, beta: float, x):
    """(P_n^{(alpha,beta)}, d/dx P_n^{(alpha,beta)}) by the standard recurrence."""
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p_prev = np.ones_like(x)
    d_prev = np.zeros_like(x)
    if n == 0:
        return (p_prev[0], d_prev[0]) if scalar else (p_prev, d_prev)
    p = 0.5 * (alpha + beta + 2.0) * x + 0.5 * (alpha - beta)
    d = np.full_like(x, 0.5 * (alpha + beta + 2.0))
    for k in range(2, n + 1):
        c1 = 2.0 * k * (k + alpha + beta) * (2.0 * k + alpha + beta - 2.0)
        c2 = 2.0 * k + alpha + beta - 1.0
        c3 = (2.0 * k + alpha + beta) * (2.0 * k + alpha + beta - 2.0)
        c4 = alpha**2 - beta**2
        c5 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * (2.0 * k + alpha + beta)
        p_next = (c2 * (c3 * x + c4) * p - c5 * p_prev) / c1
        d_next = (c2 * (c3 * (x * d + p) + c4 * d) - c5 * d_prev) / c1
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return (p[0], d[0]) if scalar else (p, d)


def _jacobi_matrix_classical(N: int, alpha: float, beta: float):
    ab = alpha + beta
    diag = np.empty(N)
    off = np.empty(max(N - 1, 0))
    diag[0] = (beta - alpha) / (ab + 2.0)
    for k in range(1, N):
        den = (2.0 * k + ab) * (2.0 * k + ab + 2.0)
        diag[k] = (beta**2 - alpha**2) / den
    for k in range(1, N):
        if k == 1 and ab + 1.0 == 0.0:
            b2 = 4.0 * (1.0 + alpha) * (1.0 + beta) / ((ab + 2.0) ** 2 * (ab + 3.0))
        else:
            b2 = (
                4.0
                * k
                * (k + alpha)
                * (k + beta)
                * (k + ab)
                / ((2.0 * k + ab) ** 2 * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0))
            )
        if b2 <= 0:
            raise IntegrityError(f"Jacobi matrix not symmetrizable at k={k}")
        off[k - 1] = math.sqrt(b2)
    return diag, off


def jacobi_electrostatic_residual(y: np.ndarray, alpha: float, beta: float) -> float:
    """max_j | (alpha+1)/(y_j-1) + (beta+1)/(y_j+1) + 2 sum_{k!=j} 1/(y_j-y_k) |."""
    y = np.asarray(y, dtype=float).reshape(-1)
    worst = 0.0
    for j in range(y.size):
        s = (alpha + 1.0) / (y[j] - 1.0) + (beta + 1.0) / (y[j] + 1.0)
        for k in range(y.size):
            if k != j:
                s += 2.0 / (y[j] - y[k])
        worst = max(worst, abs(s))
    return worst


def classical_jacobi_zeros(N: int, alpha: float, beta: float, newton_steps: int = 3) -> ZeroSet:
    """Zeros of the classical Jacobi polynomial P_N^{(alpha,beta)} in (-1, 1)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if alpha <= -1.0 or beta <= -1.0:
        raise RegimeError(f"need alpha, beta > -1; got ({alpha}, {beta})")
    diag, off = _jacobi_matrix_classical(N, alpha, beta)
    if N == 1:
        y = diag.copy()
    else:
        y = scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True)
    y = np.sort(y)
    for _ in range(newton_steps):
        p, dp = jacobi_eval_with_derivative(N, alpha, beta, y)
        y = y - p / dp
    if N >= 2 and not np.all(np.diff(y) > 0):
        raise IntegrityError("Newton polish reordered Jacobi zeros")
    if np.any(np.abs(y) >= 1.0):
        raise IntegrityError("polished Jacobi zeros escaped (-1, 1)")
    p, _ = jacobi_eval_with_derivative(N, alpha, beta, y)
    resid = float(np.max(np.abs(np.atleast_1d(p))))
    elec = jacobi_electrostatic_residual(y, alpha, beta)
    return ZeroSet(y, "jacobi", (N, alpha, beta), resid, elec)


def zero_map_check(N: int, a: float) -> float:
    """Max mismatch of the rational zero mapping between families.

    For the even-symmetric family P_N(.; -N-a, 0) with a > 0, the images
    (1 - z^2)/(1 + z^2) of the positive zeros z coincide with the zeros of a
    classical Jacobi polynomial of degree floor(N/2) with parameters
    (-1/2 or +1/2 per parity, a - 1/2).
    """
    if not (a > 0 and N >= 2):
        raise RegimeError("zero mapping requires a > 0 and N >= 2")
    ps = pseudo_jacobi_zeros(N, -(N + a), 0.0)
    z = ps.zeros
    if N % 2 == 1:
        mid = z[N // 2]
        if abs(mid) > 1e-8:
            raise IntegrityError(f"odd-degree middle zero not at origin: {mid}")
    pos = z[z > 1e-12]
    if pos.size != N // 2:
        raise IntegrityError(f"expected {N // 2} positive zeros, found {pos.size}")
    images = np.sort((1.0 - pos**2) / (1.0 + pos**2))
    alpha = -0.5 if N % 2 == 0 else 0.5
    jz = classical_jacobi_zeros(N // 2, alpha, a - 0.5)
    return float(np.max(np.abs(images - jz.zeros)))


# ---------------------------------------------------------------------------
# discrete orthonormal polynomials
# ---------------------------------------------------------------------------

@dataclass
class DiscreteOrthMeasure:
    """Finitely supported measure sum_j w_j delta_{z_j} with positive weights."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float).reshape(-1)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.atoms.size != self.weights.size:
            raise ValueError("atoms and weights must have matching lengths")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be strictly positive")
        if self.atoms.size >= 2 and not np.all(np.diff(self.atoms) > 0):
            raise ValueError("atoms must be strictly increasing")

    def inner(self, f_vals: np.ndarray, g_vals: np.ndarray) -> float:
        return float(np.sum(self.weights * f_vals * g_vals))


def measure_from_zeros(zs: ZeroSet) -> DiscreteOrthMeasure:
    """The spectral measure sum_j (1 + z_j^2) delta_{z_j} attached to a zero set."""
    return DiscreteOrthMeasure(zs.zeros, 1.0 + zs.zeros**2)


def discrete_orthonormal_polys(measure: DiscreteOrthMeasure, up_to: int) -> np.ndarray:
    """Coefficient table (ascending powers) of q_0 ... q_{up_to}, orthonormal
    under the discrete inner product of the measure.  Leading coefficients are
    normalized positive."""
    n_atoms = measure.atoms.size
    if up_to >= n_atoms:
        raise ValueError("need up_to < number of atoms")
    V = np.vander(measure.atoms, up_to + 1, increasing=True)
    A = np.sqrt(measure.weights)[:, None] * V
    q, r = np.linalg.qr(A)
    d = np.abs(np.diag(r))
    if np.any(d < 1e-12 * max(1.0, d.max())):
        raise IntegrityError("rank-deficient discrete moment matrix")
    signs = np.sign(np.diag(r))
    r = signs[:, None] * r
    coeffs = scipy.linalg.solve_triangular(r, np.eye(up_to + 1))
    return coeffs.T  # row k: coefficients of q_k


def eval_poly_table(table: np.ndarray, x) -> np.ndarray:
    """Evaluate each row of a coefficient table at x. Returns (n_polys, n_x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.vstack([np.polynomial.polynomial.polyval(x, row) for row in table])
