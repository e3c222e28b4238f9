"""Deterministic and stochastic Hua-Pickrell particle dynamics.

Contains the frozen (noise-free) flow with an adaptive embedded Runge-Kutta
integrator that rejects chamber-violating steps, Euler-Maruyama simulation of
the finite-temperature SDE in two coordinate charts, the closed lower
triangular flow of the elementary symmetric polynomials, the squared/
exponential-coordinate companion flows, the polynomial heat-equation residual,
and the empirical-moment drift.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import (
    BetaParam,
    CollisionError,
    Configuration,
    ModelParams,
    NonRealRootsError,
    RegimeError,
    StiffnessError,
    Trajectory,
    elementary_symmetric_table,
    power_sum,
    validate_configuration,
)

BOUNDARY_SPLIT_SCALE = 1e-10


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive step-size control for the deterministic flows."""

    t_end: float
    dt_init: float = 1e-3
    # micro-split boundary starts legitimately need dt ~ tol/|rhs| ~ 1e-20;
    # the controller regrows the step geometrically once repulsion spreads
    # the particles, so the underflow floor sits far below that
    dt_min: float = 1e-30
    local_tol: float = 1e-9
    record_every: int = 1
    min_gap_guard: float = 0.0  # 0 -> auto: 1e-8 * (1 + coordinate span)

    def __post_init__(self):
        if self.t_end <= 0 or self.dt_init <= 0 or self.dt_min <= 0 or self.local_tol <= 0:
            raise ValueError("t_end, dt_init, dt_min, local_tol must be positive")
        if self.dt_min > self.dt_init:
            raise ValueError("dt_min must not exceed dt_init")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.min_gap_guard < 0:
            raise ValueError("min_gap_guard must be >= 0")


@dataclass(frozen=True)
class SdeRunConfig:
    """Configuration of a stochastic simulation run."""

    integrator: IntegratorConfig
    seed: int = 0
    coordinate_chart: str = "arsinh"  # or "original"
    n_replicas: int = 1

    def __post_init__(self):
        if self.coordinate_chart not in ("arsinh", "original"):
            raise ValueError(f"unknown chart {self.coordinate_chart!r}")
        if self.n_replicas < 1:
            raise ValueError("n_replicas must be >= 1")


@dataclass
class HeatResidualReport:
    """Per-time maximum mismatch of the polynomial heat identity."""

    times: np.ndarray
    residuals: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        if self.times.shape != self.residuals.shape:
            raise ValueError("times and residuals must align")

    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0


@dataclass
class EspState:
    """Values y_m = e_m(x) of the elementary symmetric polynomials, m = 1..N."""

    y: np.ndarray
    params: ModelParams

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.y.size != self.params.n_particles:
            raise ValueError("EspState length must equal n_particles")

    @classmethod
    def from_configuration(cls, x: Configuration | np.ndarray, params: ModelParams) -> "EspState":
        coords = x.coords if isinstance(x, Configuration) else np.asarray(x, dtype=float)
        return cls(elementary_symmetric_table(coords)[1:], params)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def _pair_gaps(x: np.ndarray) -> np.ndarray:
    return x[:, None] - x[None, :]


def _frozen_rhs_arr(x: np.ndarray, a: float, b: float) -> np.ndarray:
    diff = _pair_gaps(x)
    np.fill_diagonal(diff, np.inf)
    inter = np.sum((x[:, None] * x[None, :] + 1.0) / diff, axis=1)
    return 2.0 * (b - a * x + inter)


def frozen_rhs(x: Configuration | np.ndarray, params: ModelParams) -> np.ndarray:
    """Velocity field 2[b - a x_j + sum_{k!=j} (x_j x_k + 1)/(x_j - x_k)]."""
    coords = x.coords if isinstance(x, Configuration) else np.asarray(x, dtype=float)
    if not validate_configuration(coords, strict=True):
        raise CollisionError("frozen drift requires strictly ordered coordinates")
    return _frozen_rhs_arr(coords, params.a, params.b)


def jacobi_type_rhs(x: np.ndarray, p: float, q: float) -> np.ndarray:
    """Velocity field -p + (p+q) x_j + sum_{k!=j} (2 x_j x_k - x_j - x_k)/(x_j - x_k)
    on ordered vectors with coordinates > 1."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size >= 2 and not np.all(np.diff(x) > 0):
        raise CollisionError("coordinates must be strictly ordered")
    if np.any(x <= 1.0):
        raise RegimeError("chamber requires coordinates > 1")
    diff = _pair_gaps(x)
    np.fill_diagonal(diff, np.inf)
    inter = np.sum(
        (2.0 * x[:, None] * x[None, :] - x[:, None] - x[None, :]) / diff, axis=1
    )
    return -p + (p + q) * x + inter


def jacobi_type_esp_rhs(y: np.ndarray, p: float, q: float) -> np.ndarray:
    """Closed flow of e_m under the jacobi-type dynamics:
    dy_m = m (p+q+1-m) y_m - (p+m-1)(N-m+1) y_{m-1}, with y_0 = 1."""
    y = np.asarray(y, dtype=float).reshape(-1)
    n = y.size
    out = np.empty(n)
    for m in range(1, n + 1):
        prev = 1.0 if m == 1 else y[m - 2]
        out[m - 1] = m * (p + q + 1.0 - m) * y[m - 1] - (p + m - 1.0) * (n - m + 1.0) * prev
    return out


def heckman_rhs(y: np.ndarray) -> np.ndarray:
    """Velocity field -(N-1) y_j + 2 sum_{k!=j} y_j^2/(y_j - y_k) on ordered
    positive vectors (exponential-coordinate type-A frozen flow)."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size >= 2 and not np.all(np.diff(y) > 0):
        raise CollisionError("coordinates must be strictly ordered")
    if np.any(y <= 0.0):
        raise RegimeError("coordinates must be positive")
    n = y.size
    diff = _pair_gaps(y)
    np.fill_diagonal(diff, np.inf)
    inter = np.sum(y[:, None] ** 2 / diff, axis=1)
    return -(n - 1.0) * y + 2.0 * inter


# ---------------------------------------------------------------------------
# adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) with chamber guard
# ---------------------------------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def split_boundary_start(x0: np.ndarray, scale: float = BOUNDARY_SPLIT_SCALE) -> np.ndarray:
    """Symmetrically separate coincident coordinates by a micro amount so the
    repulsive flow can take over; weakly ordered input, strictly ordered output."""
    x = np.asarray(x0, dtype=float).copy().reshape(-1)
    if x.size < 2:
        return x
    span = float(x.max() - x.min())
    eps = scale * (1.0 + span)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[j + 1] == x[i]:
            j += 1
        g = j - i + 1
        if g > 1:
            x[i : j + 1] += eps * (np.arange(g) - (g - 1) / 2.0)
        i = j + 1
    if not np.all(np.diff(x) > 0):
        # groups were closer than the splitting width; spread the whole vector
        x = np.sort(x) + eps * np.arange(x.size) / x.size
    return x


def _integrate_adaptive(
    rhs: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    cfg: IntegratorConfig,
    guard: Callable[[np.ndarray, np.ndarray], bool],
    t_eval: Sequence[float] | None = None,
):
    """Core adaptive stepper.  Returns (times, states) including t=0.

    A step is rejected (and dt halved) when the embedded error estimate
    exceeds local_tol or when the proposed state violates the guard.
    """
    x = np.asarray(x0, dtype=float).copy()
    t = 0.0
    dt = min(cfg.dt_init, cfg.t_end)
    eval_pts = None
    if t_eval is not None:
        eval_pts = np.asarray(t_eval, dtype=float)
        if eval_pts.size and (np.any(np.diff(eval_pts) <= 0) or eval_pts[0] <= 0):
            raise ValueError("t_eval must be strictly increasing and positive")
        if eval_pts.size and eval_pts[-1] > cfg.t_end + 1e-12:
            raise ValueError("t_eval must lie within (0, t_end]")
    times = [0.0]
    states = [x.copy()]
    next_eval = 0
    n_accepted = 0
    k = [np.zeros_like(x) for _ in range(7)]

    while t < cfg.t_end * (1.0 - 1e-15):
        target = cfg.t_end
        if eval_pts is not None and next_eval < eval_pts.size:
            target = min(target, eval_pts[next_eval])
        dt_step = min(dt, target - t)
        if dt_step < cfg.dt_min and target - t > cfg.dt_min:
            raise StiffnessError(
                f"step size underflow at t={t:.6g}", t=t, state=x.copy(), dt=dt_step
            )
        k[0] = rhs(x)
        failed = False
        for s in range(1, 7):
            xs = x + dt_step * sum(_DP_A[s][j] * k[j] for j in range(s))
            if not np.all(np.isfinite(xs)):
                failed = True
                break
            if s < 6:
                try:
                    k[s] = rhs(xs)
                except (CollisionError, RegimeError, FloatingPointError):
                    failed = True
                    break
        if not failed:
            x5 = x + dt_step * sum(_DP_B5[j] * k[j] for j in range(6))
            x4 = x + dt_step * (
                sum(_DP_B4[j] * k[j] for j in range(6)) + _DP_B4[6] * rhs_or_none(rhs, x5)
            )
            err = np.max(np.abs(x5 - x4) / (cfg.local_tol * (1.0 + np.abs(x5))))
            ok = bool(np.all(np.isfinite(x5)) and err <= 1.0 and guard(x5, x))
        else:
            ok = False
            err = np.inf
        if ok:
            t += dt_step
            x = x5
            n_accepted += 1
            if eval_pts is not None:
                if next_eval < eval_pts.size and abs(t - eval_pts[next_eval]) <= 1e-12 * max(
                    1.0, eval_pts[next_eval]
                ):
                    times.append(eval_pts[next_eval])
                    states.append(x.copy())
                    next_eval += 1
            else:
                if n_accepted % cfg.record_every == 0 or t >= cfg.t_end * (1.0 - 1e-15):
                    times.append(t)
                    states.append(x.copy())
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** (-0.2)))
            dt = dt_step * factor
        else:
            dt = dt_step / 2.0
            if dt < cfg.dt_min:
                raise StiffnessError(
                    f"step size underflow after rejection at t={t:.6g}",
                    t=t,
                    state=x.copy(),
                    dt=dt,
                )
    if eval_pts is None and times[-1] < t:
        times.append(t)
        states.append(x.copy())
    return np.asarray(times), np.asarray(states)


def rhs_or_none(rhs, x):
    try:
        return rhs(x)
    except (CollisionError, RegimeError):
        return np.full_like(x, np.nan)


def _ordering_guard(
    cfg: IntegratorConfig, x0: np.ndarray
) -> Callable[[np.ndarray, np.ndarray], bool]:
    """Step acceptance predicate guard(x_new, x_old).

    Hard requirement: strict ordering.  Soft floor: the minimum gap may not
    fall below min(min_gap_guard, min_gap_old / 4) in a single step, so a
    micro-split boundary start (gaps far below the floor) can still evolve
    while ordinary steps cannot dive toward a collision.
    """
    span = float(np.max(x0) - np.min(x0)) if x0.size else 0.0
    gap_floor = cfg.min_gap_guard if cfg.min_gap_guard > 0 else 1e-8 * (1.0 + span)

    def guard(x_new: np.ndarray, x_old: np.ndarray) -> bool:
        if not np.all(np.isfinite(x_new)):
            return False
        if x_new.size < 2:
            return True
        d = np.diff(x_new)
        if not np.all(d > 0):
            return False
        old_min = float(np.min(np.diff(x_old))) if x_old.size >= 2 else np.inf
        return float(np.min(d)) >= min(gap_floor, 0.25 * old_min)

    return guard


def integrate_frozen(
    x0: Configuration | np.ndarray,
    params: ModelParams,
    cfg: IntegratorConfig,
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    """Integrate the frozen flow from a (weakly ordered) start.

    Coincident starting coordinates are separated by a symmetric micro
    splitting; the repulsion then keeps the path strictly inside the chamber.
    For a > 0 the path approaches the zero set of the degree-N pseudo-Jacobi
    polynomial with parameters (-(N+a), b).
    """
    coords = x0.coords if isinstance(x0, Configuration) else np.asarray(x0, dtype=float)
    if not validate_configuration(coords, strict=False):
        raise ValueError("starting configuration must be weakly ordered")
    coords = split_boundary_start(coords)
    rhs = lambda x: _frozen_rhs_arr(x, params.a, params.b)
    times, states = _integrate_adaptive(rhs, coords, cfg, _ordering_guard(cfg, coords), t_eval)
    return Trajectory(times, states, params, seed=0)


def integrate_jacobi_type(
    x0: np.ndarray, p: float, q: float, cfg: IntegratorConfig, t_eval=None
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive integration of the jacobi-type flow on (1, inf)^N."""
    x0 = np.asarray(x0, dtype=float)
    base_guard = _ordering_guard(cfg, x0)
    guard = lambda xn, xo: bool(np.all(xn > 1.0)) and base_guard(xn, xo)
    return _integrate_adaptive(lambda x: jacobi_type_rhs(x, p, q), x0, cfg, guard, t_eval)


def integrate_heckman(
    y0: np.ndarray, cfg: IntegratorConfig, t_eval=None
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive integration of the exponential-coordinate type-A flow."""
    y0 = np.asarray(y0, dtype=float)
    base_guard = _ordering_guard(cfg, y0)
    guard = lambda yn, yo: bool(np.all(yn > 0.0)) and base_guard(yn, yo)
    return _integrate_adaptive(heckman_rhs, y0, cfg, guard, t_eval)


# ---------------------------------------------------------------------------
# stochastic simulation
# ---------------------------------------------------------------------------

def _sde_drift_original(x: np.ndarray, params: ModelParams) -> np.ndarray:
    return _frozen_rhs_arr(x, params.a, params.b)


def _sde_drift_arsinh(y: np.ndarray, params: ModelParams) -> np.ndarray:
    """Drift of Y = arsinh(X) under the time-normalized SDE: the noise becomes
    additive and the interaction splits into coth/tanh terms."""
    beta_inv = params.beta.inverse
    a, b = params.a, params.b
    n = y.size
    drift = (1.0 - n - beta_inv - a) * np.tanh(y) + b / np.cosh(y)
    if n >= 2:
        half_diff = 0.5 * (y[:, None] - y[None, :])
        half_sum = 0.5 * (y[:, None] + y[None, :])
        np.fill_diagonal(half_diff, 1.0)  # placeholder, masked below
        mat = 1.0 / np.tanh(half_diff) + np.tanh(half_sum)
        np.fill_diagonal(mat, 0.0)
        drift = drift + 0.5 * np.sum(mat, axis=1)
    return 2.0 * drift


def simulate_sde(
    x0: Configuration | np.ndarray,
    params: ModelParams,
    cfg: SdeRunConfig,
) -> list[Trajectory]:
    """Euler-Maruyama paths of the time-normalized interacting SDE, one
    trajectory per replica.

    Replica r uses the RNG stream spawned from (seed, r), so replica sets are
    reproducible and independent of scheduling order.  Ordering is enforced by
    rejecting and halving steps (fresh noise on retry).
    """
    if params.beta.is_frozen:
        raise RegimeError("simulate_sde requires finite beta; use integrate_frozen")
    coords = x0.coords if isinstance(x0, Configuration) else np.asarray(x0, dtype=float)
    if not validate_configuration(coords, strict=False):
        raise ValueError("starting configuration must be weakly ordered")
    coords = split_boundary_start(coords)
    return [
        _simulate_one_replica(coords, params, cfg, replica)
        for replica in range(cfg.n_replicas)
    ]


def _simulate_one_replica(
    x0: np.ndarray, params: ModelParams, cfg: SdeRunConfig, replica: int
) -> Trajectory:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(replica,)))
    icfg = cfg.integrator
    beta = params.beta.value
    arsinh_chart = cfg.coordinate_chart == "arsinh"
    state = np.arcsinh(x0) if arsinh_chart else x0.copy()

    def guard(x_new: np.ndarray) -> bool:
        # stochastic steps only need to stay strictly inside the chamber;
        # a rejected step is retried with fresh noise at half the step size
        return bool(np.all(np.isfinite(x_new)) and np.all(np.diff(x_new) > 0))

    t = 0.0
    dt = min(icfg.dt_init, icfg.t_end)
    times = [0.0]
    states = [x0.copy()]
    n_accepted = 0
    noise_amp = 2.0 / math.sqrt(beta)

    while t < icfg.t_end * (1.0 - 1e-15):
        dt_step = min(dt, icfg.t_end - t)
        xi = rng.standard_normal(state.size)
        if arsinh_chart:
            drift = _sde_drift_arsinh(state, params)
            prop = state + dt_step * drift + noise_amp * math.sqrt(dt_step) * xi
        else:
            drift = _sde_drift_original(state, params)
            diffusion = noise_amp * np.sqrt(1.0 + state**2)
            prop = state + dt_step * drift + math.sqrt(dt_step) * diffusion * xi
        if guard(prop):
            state = prop
            t += dt_step
            n_accepted += 1
            if n_accepted % icfg.record_every == 0 or t >= icfg.t_end * (1.0 - 1e-15):
                times.append(t)
                states.append(np.sinh(state) if arsinh_chart else state.copy())
            dt = min(dt * 1.3, icfg.dt_init)
        else:
            dt = dt_step / 2.0
            if dt < icfg.dt_min:
                raise CollisionError(
                    f"persistent ordering violation at t={t:.6g} (replica {replica})"
                )
    if times[-1] < t:
        times.append(t)
        states.append(np.sinh(state) if arsinh_chart else state.copy())
    return Trajectory(np.asarray(times), np.asarray(states), params, seed=cfg.seed)


# ---------------------------------------------------------------------------
# elementary-symmetric flow
# ---------------------------------------------------------------------------

def esp_coefficient(m: int, a: float) -> float:
    """Decay rate c(m) = m (2a + m - 1) of the m-th elementary symmetric mode."""
    return m * (2.0 * a + m - 1.0)


def esp_attracting(params: ModelParams) -> bool:
    """All modes decay iff every c(m) > 0, which holds exactly for a > 0."""
    return all(esp_coefficient(m, params.a) > 0 for m in range(1, params.n_particles + 1))


def esp_rhs(state: EspState) -> np.ndarray:
    """dy_m = -c(m) y_m + 2 b (N-m+1) y_{m-1} - (N-m+2)(N-m+1) y_{m-2},
    with y_0 = 1 and y_{-1} = 0 (linear, lower triangular)."""
    y = state.y
    n = state.params.n_particles
    a, b = state.params.a, state.params.b
    out = np.empty(n)
    for m in range(1, n + 1):
        ym = y[m - 1]
        ym1 = 1.0 if m == 1 else y[m - 2]
        ym2 = 0.0 if m == 1 else (1.0 if m == 2 else y[m - 3])
        out[m - 1] = (
            -esp_coefficient(m, a) * ym
            + 2.0 * b * (n - m + 1.0) * ym1
            - (n - m + 2.0) * (n - m + 1.0) * ym2
        )
    return out


class _ExpPoly:
    """Finite combination sum c * t^p * exp(lam t), keyed by (lam, p)."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[tuple[float, int], float] | None = None):
        self.terms = dict(terms or {})

    def add(self, lam: float, p: int, coef: float) -> None:
        if coef == 0.0:
            return
        key = (lam, p)
        self.terms[key] = self.terms.get(key, 0.0) + coef

    def scaled(self, factor: float) -> "_ExpPoly":
        out = _ExpPoly()
        for (lam, p), c in self.terms.items():
            out.add(lam, p, factor * c)
        return out

    def plus(self, other: "_ExpPoly") -> "_ExpPoly":
        out = _ExpPoly(self.terms)
        for (lam, p), c in other.terms.items():
            out.add(lam, p, c)
        return out

    def __call__(self, t: float) -> float:
        return sum(c * t**p * math.exp(lam * t) for (lam, p), c in self.terms.items())

    def convolved_with_decay(self, c_m: float, rate_match_tol: float = 1e-9) -> "_ExpPoly":
        """exp(-c_m t) * int_0^t exp(c_m r) f(r) dr for f = self, in closed form."""
        out = _ExpPoly()
        for (lam, p), coef in self.terms.items():
            nu = lam + c_m
            if abs(nu) <= rate_match_tol * (1.0 + abs(c_m)):
                # resonant: int r^p dr = t^{p+1}/(p+1), rate stays at -c_m
                out.add(-c_m, p + 1, coef / (p + 1.0))
            else:
                # int_0^t r^p e^{nu r} dr in closed form
                fact = 1.0
                for i in range(p + 1):
                    # coefficient of t^{p-i} e^{nu t}
                    out.add(lam, p - i, coef * ((-1.0) ** i) * fact / nu ** (i + 1))
                    fact *= p - i
                out.add(-c_m, 0, -coef * ((-1.0) ** p) * math.factorial(p) / nu ** (p + 1))
        return out


def esp_closed_form(y0: EspState, t: float) -> np.ndarray:
    """Evaluate the cascade solution of the elementary-symmetric flow at time t.

    Each level solves a scalar linear ODE forced by the two levels below it;
    the variation-of-constants integrals are evaluated level by level in
    closed form (exponential-polynomial terms), so the result is exact up to
    roundoff.  For a <= 0 some modes do not decay; the evaluation still
    proceeds but a non-convergence warning is emitted.
    """
    params = y0.params
    n = params.n_particles
    a, b = params.a, params.b
    if not esp_attracting(params):
        warnings.warn(
            "non-attracting elementary-symmetric mode (a <= 0); no long-time limit",
            RuntimeWarning,
            stacklevel=2,
        )
    levels: list[_ExpPoly] = [_ExpPoly({(0.0, 0): 1.0})]  # y_0 == 1
    for m in range(1, n + 1):
        c_m = esp_coefficient(m, a)
        forcing = _ExpPoly()
        forcing = forcing.plus(levels[m - 1].scaled(2.0 * b * (n - m + 1.0)))
        if m >= 2:
            forcing = forcing.plus(levels[m - 2].scaled(-(n - m + 2.0) * (n - m + 1.0)))
        elif m == 1:
            pass  # y_{-1} == 0
        level = forcing.convolved_with_decay(c_m)
        level.add(-c_m, 0, float(y0.y[m - 1]))
        levels.append(level)
    return np.array([levels[m](t) for m in range(1, n + 1)])


def esp_stationary(params: ModelParams) -> np.ndarray:
    """Fixed point of the elementary-symmetric flow (requires a > 0)."""
    if params.a <= 0:
        raise RegimeError("stationary elementary-symmetric state needs a > 0")
    n = params.n_particles
    y = np.zeros(n)
    for m in range(1, n + 1):
        ym1 = 1.0 if m == 1 else y[m - 2]
        ym2 = 0.0 if m == 1 else (1.0 if m == 2 else y[m - 3])
        y[m - 1] = (
            2.0 * params.b * (n - m + 1.0) * ym1 - (n - m + 2.0) * (n - m + 1.0) * ym2
        ) / esp_coefficient(m, params.a)
    return y


def config_from_esp(state: EspState, imag_tol: float = 1e-8) -> Configuration:
    """Invert y = (e_1, ..., e_N) back to the ordered coordinate vector.

    Roots of z^N - y_1 z^{N-1} + ... + (-1)^N y_N via the companion matrix,
    then one Newton polish per root; complex residue beyond tolerance raises.
    """
    y = state.y
    n = y.size
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    for m in range(1, n + 1):
        coeffs[m] = ((-1.0) ** m) * y[m - 1]
    roots = np.roots(coeffs)
    scale = 1.0 + np.max(np.abs(roots)) if roots.size else 1.0
    if np.any(np.abs(roots.imag) > imag_tol * scale):
        raise NonRealRootsError(
            f"elementary-symmetric state does not invert to real coordinates "
            f"(max imag {np.max(np.abs(roots.imag)):.3g})"
        )
    x = np.sort(roots.real)
    der = np.polyder(coeffs)
    for _ in range(2):
        vals = np.polyval(coeffs, x)
        dvals = np.polyval(der, x)
        safe = np.abs(dvals) > 1e-300
        x = np.where(safe, x - vals / np.where(safe, dvals, 1.0), x)
    x = np.sort(x)
    return Configuration(x)


# ---------------------------------------------------------------------------
# transformed flows
# ---------------------------------------------------------------------------

def is_reciprocal_symmetric(y: np.ndarray, tol: float = 1e-9) -> bool:
    y = np.asarray(y, dtype=float).reshape(-1)
    return bool(np.all(np.abs(y * y[::-1] - 1.0) <= tol * (1.0 + np.abs(y * y[::-1]))))


def heckman_to_hp_transform(y_traj: Trajectory) -> Trajectory:
    """Map an exponential-coordinate path y_t (reciprocal-symmetric at t=0)
    to x_t = f(y_{4t}) with f(y) = (sqrt(y) - 1/sqrt(y))/2.

    The image solves the frozen flow with parameters a = -N + 1/2, b = 0 on a
    time grid compressed by the factor 4.
    """
    y0 = y_traj.states[0]
    if not is_reciprocal_symmetric(y0):
        raise ValueError("input path must be reciprocal-symmetric at t=0")
    if np.any(y_traj.states <= 0):
        raise RegimeError("input path must stay positive")
    f = lambda y: 0.5 * (np.sqrt(y) - 1.0 / np.sqrt(y))
    n = y_traj.n_particles
    params = ModelParams(n, -n + 0.5, 0.0, BetaParam.frozen())
    return Trajectory(y_traj.times / 4.0, f(y_traj.states), params, seed=y_traj.seed)


def squared_coordinates(x: np.ndarray) -> np.ndarray:
    """x_j -> x_j^2 + 1 applied to the top half of a sign-symmetric vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    top = x[(n + 1) // 2 :] if n % 2 == 1 else x[n // 2 :]
    return top**2 + 1.0


def squared_flow_rhs(xt: np.ndarray, n_full: int, a: float) -> np.ndarray:
    """Drift of the squared-coordinate reduction of a symmetric frozen path.

    For even N the half-system of u_j = x_j^2 + 1 satisfies
    du_j = 2(N+2a) - 2(2a+1) u_j + 4 sum_{k!=j} (2 u_j u_k - u_j - u_k)/(u_j - u_k);
    for odd N the constant is 2(N+2a+1) (the middle particle is pinned at 0).
    """
    u = np.asarray(xt, dtype=float).reshape(-1)
    const = 2.0 * (n_full + 2.0 * a) if n_full % 2 == 0 else 2.0 * (n_full + 2.0 * a + 1.0)
    diff = _pair_gaps(u)
    np.fill_diagonal(diff, np.inf)
    inter = np.sum((2.0 * u[:, None] * u[None, :] - u[:, None] - u[None, :]) / diff, axis=1)
    return const - 2.0 * (2.0 * a + 1.0) * u + 4.0 * inter


def trajectory_ode_residual(
    times: np.ndarray,
    states: np.ndarray,
    rhs: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Centered finite-difference residual |dx/dt - rhs(x)| at interior times.

    Returns the max-norm residual per interior record; an independent check
    that a recorded path actually solves a claimed ODE.
    """
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float)
    if times.size < 3:
        return np.zeros(0)
    out = np.empty(times.size - 2)
    for i in range(1, times.size - 1):
        dt = times[i + 1] - times[i - 1]
        deriv = (states[i + 1] - states[i - 1]) / dt
        out[i - 1] = float(np.max(np.abs(deriv - rhs(states[i]))))
    return out


# ---------------------------------------------------------------------------
# heat-equation residual and moment drift
# ---------------------------------------------------------------------------

def _poly_from_roots_derivs(z: float, roots: np.ndarray):
    """H, H_z, H_zz of H(z) = prod (z - x_j) from root products."""
    d = z - roots
    if np.any(d == 0.0):
        raise ValueError("probe point coincides with a particle")
    h = float(np.prod(d))
    s1 = float(np.sum(1.0 / d))
    s2 = float(np.sum(1.0 / d**2))
    return h, h * s1, h * (s1 * s1 - s2)


def heat_rhs_value(z: float, x: np.ndarray, params: ModelParams) -> float:
    """-(1+z^2) H_zz + (-2b + 2(a+N-1) z) H_z - N(2a+N-1) H at the probe z."""
    n = x.size
    a, b = params.a, params.b
    h, hz, hzz = _poly_from_roots_derivs(z, x)
    return (
        -(1.0 + z * z) * hzz + (-2.0 * b + 2.0 * (a + n - 1.0) * z) * hz
        - n * (2.0 * a + n - 1.0) * h
    )


def heat_residual(
    traj: Trajectory, probe_points: Sequence[float], params: ModelParams
) -> HeatResidualReport:
    """Residual of the inverse heat identity for H(t, z) = prod_j (z - x_{j,t}).

    H_t comes from centered differences of the recorded path (so the check is
    independent of the integrator); the spatial side is exact from root
    products.  Reported per interior recorded time, maximized over probes.
    """
    probes = np.asarray(probe_points, dtype=float).reshape(-1)
    times = traj.times
    if times.size < 3:
        return HeatResidualReport(np.zeros(0), np.zeros(0))
    out_t = []
    out_r = []
    for i in range(1, times.size - 1):
        dt = times[i + 1] - times[i - 1]
        worst = 0.0
        for z in probes:
            h_next = float(np.prod(z - traj.states[i + 1]))
            h_prev = float(np.prod(z - traj.states[i - 1]))
            ht = (h_next - h_prev) / dt
            worst = max(worst, abs(ht - heat_rhs_value(float(z), traj.states[i], params)))
        out_t.append(times[i])
        out_r.append(worst)
    return HeatResidualReport(np.asarray(out_t), np.asarray(out_r))


def empirical_moment_drift(x: Configuration | np.ndarray, params: ModelParams, n: int) -> float:
    """Deterministic drift of the n-th empirical moment S_n = (1/N) sum x_j^n
    under the 1/N-rescaled dynamics (time dilated by N, drift prefactor 2/N).

    d S_n = n [ (-(2/N)(a-1) - (n+1)/N + 2(n-1)/(beta N)) S_n + (2b/N) S_{n-1}
              + (1/N)(2/beta - 1)(n-1) S_{n-2}
              + sum_{k=1}^{n-1} S_k S_{n-k} + sum_{k=0}^{n-2} S_k S_{n-2-k} ] dt,
    with 2/beta = 0 in the frozen case and S_{-1} = 0.
    """
    if n < 1:
        raise ValueError("moment order must be >= 1")
    coords = x.coords if isinstance(x, Configuration) else np.asarray(x, dtype=float)
    if coords.size >= 2 and not np.all(np.diff(coords) > 0):
        raise CollisionError("moment drift requires strictly ordered coordinates")
    N = coords.size
    two_over_beta = 2.0 * params.beta.inverse
    S = [power_sum(coords, k) / N for k in range(n + 1)]
    s_nm1 = S[n - 1] if n >= 1 else 0.0
    s_nm2 = S[n - 2] if n >= 2 else 0.0
    lin = (
        (-(2.0 / N) * (params.a - 1.0) - (n + 1.0) / N + two_over_beta * (n - 1.0) / N) * S[n]
        + (2.0 * params.b / N) * s_nm1
        + (1.0 / N) * (two_over_beta - 1.0) * (n - 1.0) * s_nm2
    )
    quad = sum(S[k] * S[n - k] for k in range(1, n)) + sum(
        S[k] * S[n - 2 - k] for k in range(0, n - 1)
    )
    return n * (lin + quad)


# ---------------------------------------------------------------------------
# trajectory export
# ---------------------------------------------------------------------------

def trajectory_content_hash(params: ModelParams, seed: int, cfg: IntegratorConfig) -> str:
    payload = json.dumps(
        {
            "n_particles": params.n_particles,
            "a": params.a,
            "b": params.b,
            "beta": str(params.beta),
            "seed": seed,
            "t_end": cfg.t_end,
            "dt_init": cfg.dt_init,
            "dt_min": cfg.dt_min,
            "local_tol": cfg.local_tol,
            "record_every": cfg.record_every,
            "min_gap_guard": cfg.min_gap_guard,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def export_trajectory(traj: Trajectory, csv_path, cfg: IntegratorConfig) -> None:
    """Write a trajectory as CSV (t, x_1 ... x_N) plus a JSON metadata sidecar."""
    import io
    from pathlib import Path

    csv_path = Path(csv_path)
    n = traj.n_particles
    buf = io.StringIO()
    buf.write("t," + ",".join(f"x_{j + 1}" for j in range(n)) + "\n")
    for i, t in enumerate(traj.times):
        row = [format(t, ".17g")] + [format(v, ".17g") for v in traj.states[i]]
        buf.write(",".join(row) + "\n")
    csv_path.write_text(buf.getvalue())
    meta = {
        "n_particles": n,
        "a": traj.params.a,
        "b": traj.params.b,
        "beta": str(traj.params.beta),
        "seed": traj.seed,
        "integrator": {
            "t_end": cfg.t_end,
            "dt_init": cfg.dt_init,
            "dt_min": cfg.dt_min,
            "local_tol": cfg.local_tol,
            "record_every": cfg.record_every,
            "min_gap_guard": cfg.min_gap_guard,
        },
        "content_hash": trajectory_content_hash(traj.params, traj.seed, cfg),
    }
    csv_path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
