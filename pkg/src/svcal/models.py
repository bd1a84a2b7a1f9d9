"""Model parameter types and affine characteristic functions.

Parameter containers are immutable and validate their admissibility bounds
on construction.  Characteristic functions are of ln(F_T/F_0) under the
forward measure (zero drift); discounting and the forward level live in
:class:`MarketSlice`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Tuple, Union

import numpy as np

from . import _kernels
from .errors import DomainError

ArrayLike = Union[float, complex, np.ndarray]


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DomainError(msg)


@dataclass(frozen=True)
class HestonParams:
    """Square-root variance model parameters.

    v0 and theta are variances (vol^2 units), kappa a mean-reversion speed
    in 1/years, sigma the vol-of-variance, rho the spot/variance correlation.
    """

    v0: float
    theta: float
    kappa: float
    sigma: float
    rho: float

    def __post_init__(self):
        _require(self.v0 > 0, f"v0 must be > 0, got {self.v0}")
        _require(self.theta > 0, f"theta must be > 0, got {self.theta}")
        _require(self.kappa >= 0, f"kappa must be >= 0, got {self.kappa}")
        _require(self.sigma >= 0, f"sigma must be >= 0, got {self.sigma}")
        _require(-1 < self.rho < 1, f"rho must lie in (-1, 1), got {self.rho}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class BatesParams:
    """Heston dynamics plus lognormal jumps of annual frequency jump_intensity.

    mean_jump is the expected fractional jump size k-bar; jump_vol the
    standard deviation of ln(1 + jump).
    """

    heston: HestonParams
    jump_intensity: float
    mean_jump: float
    jump_vol: float

    def __post_init__(self):
        _require(self.jump_intensity >= 0, f"jump_intensity must be >= 0, got {self.jump_intensity}")
        _require(self.jump_vol >= 0, f"jump_vol must be >= 0, got {self.jump_vol}")
        _require(self.mean_jump > -1, f"mean_jump must be > -1, got {self.mean_jump}")

    def as_dict(self) -> dict:
        out = self.heston.as_dict()
        out.update(
            jump_intensity=self.jump_intensity,
            mean_jump=self.mean_jump,
            jump_vol=self.jump_vol,
        )
        return out


@dataclass(frozen=True)
class SchobelZhuParams:
    """Ornstein-Uhlenbeck volatility model parameters (vol units, not variance)."""

    v0: float
    theta: float
    kappa: float
    sigma: float
    rho: float

    def __post_init__(self):
        _require(self.v0 > 0, f"v0 must be > 0, got {self.v0}")
        _require(self.theta >= 0, f"theta must be >= 0, got {self.theta}")
        _require(self.kappa >= 0, f"kappa must be >= 0, got {self.kappa}")
        _require(self.sigma >= 0, f"sigma must be >= 0, got {self.sigma}")
        _require(-1 < self.rho < 1, f"rho must lie in (-1, 1), got {self.rho}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class LognormalVolParams:
    """Lognormal volatility dynamics (mean reversion on v itself).

    Container only: used by the mixing rules, never priced here.
    """

    v0: float
    theta: float
    kappa: float
    sigma: float
    rho: float

    def __post_init__(self):
        _require(self.v0 > 0, f"v0 must be > 0, got {self.v0}")
        _require(self.theta >= 0, f"theta must be >= 0, got {self.theta}")
        _require(self.kappa >= 0, f"kappa must be >= 0, got {self.kappa}")
        _require(self.sigma >= 0, f"sigma must be >= 0, got {self.sigma}")
        _require(-1 < self.rho < 1, f"rho must lie in (-1, 1), got {self.rho}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class PiecewiseHestonParams:
    """Heston with piecewise-constant (theta, kappa, sigma, rho) in time.

    ``breakpoints`` are the segment end times t_1 < ... < t_n; segment i
    covers (t_{i-1}, t_i] with t_0 = 0 and the last segment extending
    beyond t_n.
    """

    v0: float
    breakpoints: Tuple[float, ...]
    segments: Tuple[Tuple[float, float, float, float], ...]  # (theta, kappa, sigma, rho)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(t) for t in self.breakpoints))
        object.__setattr__(self, "segments", tuple(tuple(map(float, s)) for s in self.segments))
        _require(self.v0 > 0, f"v0 must be > 0, got {self.v0}")
        _require(len(self.segments) >= 1, "at least one segment required")
        _require(
            len(self.breakpoints) == len(self.segments),
            "breakpoints and segments must have equal length",
        )
        prev = 0.0
        for t in self.breakpoints:
            _require(t > prev, f"breakpoints must be positive and strictly increasing, got {self.breakpoints}")
            prev = t
        for i, (theta, kappa, sigma, rho) in enumerate(self.segments):
            _require(theta > 0, f"segment {i}: theta must be > 0, got {theta}")
            _require(kappa >= 0, f"segment {i}: kappa must be >= 0, got {kappa}")
            _require(sigma >= 0, f"segment {i}: sigma must be >= 0, got {sigma}")
            _require(-1 < rho < 1, f"segment {i}: rho must lie in (-1, 1), got {rho}")

    def as_dict(self) -> dict:
        return {
            "v0": self.v0,
            "breakpoints": list(self.breakpoints),
            "segments": [list(s) for s in self.segments],
        }


@dataclass(frozen=True)
class MarketSlice:
    """Forward, discount factor and year fraction for one expiry."""

    forward: float
    discount: float
    expiry: float

    def __post_init__(self):
        _require(self.forward > 0, f"forward must be > 0, got {self.forward}")
        _require(0 < self.discount <= 1, f"discount must lie in (0, 1], got {self.discount}")
        _require(self.expiry > 0, f"expiry must be > 0, got {self.expiry}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def feller_ratio(p: HestonParams) -> float:
    """2*kappa*theta / sigma^2; below 1 the variance can reach zero.

    sigma = 0 returns +inf (the condition holds trivially).
    """
    if p.sigma == 0.0:
        return math.inf
    return 2.0 * p.kappa * p.theta / (p.sigma * p.sigma)


def expected_mean_variance(p: HestonParams, T: float) -> float:
    """Mean variance over [0, T]: theta + (v0 - theta)(1 - e^{-kappa T})/(kappa T).

    Continuous at kappa = 0 where the limit is v0.
    """
    _require(T > 0, f"T must be > 0, got {T}")
    x = p.kappa * T
    if x < 1e-8:
        # series of (1 - e^{-x})/x around 0 avoids 0/0
        phi1 = 1.0 - x / 2.0 + x * x / 6.0
    else:
        phi1 = -math.expm1(-x) / x
    return p.theta + (p.v0 - p.theta) * phi1


def _as_u_array(u: ArrayLike) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(u, dtype=np.complex128))
    return arr, np.ndim(u) == 0


def cf_heston(u: ArrayLike, p: HestonParams, T: float) -> ArrayLike:
    """Heston characteristic function of ln(F_T/F_0), trap-free branch.

    Accepts scalar or array ``u`` (complex allowed); must stay finite for
    |u| up to the quadrature truncation bound.
    """
    _require(T > 0, f"T must be > 0, got {T}")
    arr, scalar = _as_u_array(u)
    if p.sigma == 0.0:
        # deterministic variance: exact lognormal limit
        s = arr * arr + 1j * arr
        out = np.exp(-0.5 * s * expected_mean_variance(p, T) * T)
    else:
        out = _kernels.heston_cf_vals(arr, p.v0, p.theta, p.kappa, p.sigma, p.rho, T)
    return out[0] if scalar else out


def cf_bates(u: ArrayLike, p: BatesParams, T: float) -> ArrayLike:
    """Heston CF times the compensated lognormal-jump factor."""
    _require(T > 0, f"T must be > 0, got {T}")
    arr, scalar = _as_u_array(u)
    base = cf_heston(arr, p.heston, T)
    lam, kbar, delta = p.jump_intensity, p.mean_jump, p.jump_vol
    if lam == 0.0:
        out = base
    else:
        gamma = math.log1p(kbar) - 0.5 * delta * delta
        phi_j = np.exp(1j * arr * gamma - 0.5 * arr * arr * delta * delta)
        out = base * np.exp(lam * T * (phi_j - 1.0) - 1j * arr * (lam * kbar * T))
    return out[0] if scalar else out


def cf_schobel_zhu(u: ArrayLike, p: SchobelZhuParams, T: float) -> ArrayLike:
    """Schobel-Zhu characteristic function of ln(F_T/F_0)."""
    _require(T > 0, f"T must be > 0, got {T}")
    arr, scalar = _as_u_array(u)
    out = _kernels.schobel_zhu_cf_vals(arr, p.v0, p.theta, p.kappa, p.sigma, p.rho, T)
    return out[0] if scalar else out


def _effective_segments(p: PiecewiseHestonParams, T: float):
    """Segment durations covering [0, T], chronological order.

    Segments past T are dropped, the one containing T is truncated, and the
    last segment extends when T exceeds the final breakpoint.
    """
    taus, thetas, kappas, sigmas, rhos = [], [], [], [], []
    start = 0.0
    n = len(p.segments)
    for i, (theta, kappa, sigma, rho) in enumerate(p.segments):
        end = p.breakpoints[i] if i < n - 1 else max(p.breakpoints[i], T)
        hi = min(end, T)
        if hi > start:
            taus.append(hi - start)
            thetas.append(theta)
            kappas.append(kappa)
            sigmas.append(sigma)
            rhos.append(rho)
        start = end
        if start >= T:
            break
    return (
        np.asarray(taus),
        np.asarray(thetas),
        np.asarray(kappas),
        np.asarray(sigmas),
        np.asarray(rhos),
    )


def cf_piecewise_heston(u: ArrayLike, p: PiecewiseHestonParams, T: float) -> ArrayLike:
    """Piecewise-constant Heston CF by backward induction over segments.

    Each segment's terminal affine coefficients seed the previous segment;
    one segment reduces exactly to :func:`cf_heston`.
    """
    _require(T > 0, f"T must be > 0, got {T}")
    arr, scalar = _as_u_array(u)
    taus, thetas, kappas, sigmas, rhos = _effective_segments(p, T)
    out = _kernels.piecewise_heston_cf_vals(arr, p.v0, taus, thetas, kappas, sigmas, rhos)
    return out[0] if scalar else out


AffineParams = Union[HestonParams, BatesParams, SchobelZhuParams, PiecewiseHestonParams]


def cf_for(params: AffineParams):
    """Return the CF callable ``cf(u, T)`` matching the parameter type."""
    if isinstance(params, HestonParams):
        return lambda u, T: cf_heston(u, params, T)
    if isinstance(params, BatesParams):
        return lambda u, T: cf_bates(u, params, T)
    if isinstance(params, SchobelZhuParams):
        return lambda u, T: cf_schobel_zhu(u, params, T)
    if isinstance(params, PiecewiseHestonParams):
        return lambda u, T: cf_piecewise_heston(u, params, T)
    raise DomainError(f"no characteristic function for {type(params).__name__}")
