"""Spectral distributions and resolvent transforms for sample covariance models.

This module carries the random-matrix layer the rest of the package sits on:
population spectrum descriptions, the Marchenko-Pastur (M-P) law for identity
covariance, Stieltjes transforms of the feature-by-feature sample spectrum and
of its sample-by-sample companion, and the cubic moment maps linking population
and sample spectral moments at aspect ratio omega = p/n.

Conventions used throughout:
  * omega is the feature-to-sample ratio p/n, strictly positive.
  * Transforms are always evaluated on the negative real axis at z = -lam
    with lam > 0, where both transforms are positive and analytic.
  * g denotes the Stieltjes transform of the p-dimensional sample spectrum,
    v the transform of the n-dimensional companion spectrum. They satisfy
    v(-lam) = omega * g(-lam) + (1 - omega) / lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    InfeasiblePanelError,
    NearSingularityError,
)

# Fixed-point solver controls. The damping factor keeps the iteration stable
# at omega = 1 where the undamped map has slope -1.
FP_DAMPING = 0.5
FP_TOL = 1e-12
FP_MAX_ITER = 10000

# lam values (times lam_scale, trivially 1 under the b1 = 1 normalization)
# used to extrapolate companion transforms to lam -> 0+ when omega > 1.
ZERO_LIMIT_GRID = (1e-2, 5e-3, 2.5e-3)

# Aspect ratios within this band of 1 have no stable zero-regularization
# limit and are rejected.
OMEGA_GUARD_BAND = 1e-6


@dataclass(frozen=True)
class SpectralMoments:
    """First three moments of a spectral distribution.

    source is "population" for moments of the feature covariance spectrum
    and "sample" for moments of an (expected or observed) sample spectrum.
    """

    b1: float
    b2: float
    b3: float
    source: str = "population"

    def __post_init__(self):
        if self.source not in ("population", "sample"):
            raise DomainError(f"unknown moment source {self.source!r}")
        for name in ("b1", "b2", "b3"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise DomainError(f"moment {name} is not finite: {val!r}")


@dataclass(frozen=True)
class SpectralModel:
    """Population covariance spectrum as a finite mixture of atoms.

    kind is one of "identity", "point_masses", "explicit". The identity
    model is the single atom at 1. Explicit models hold one atom per listed
    eigenvalue with uniform weight. All models must describe a correlation
    matrix scale: mean eigenvalue 1 within 1e-9.
    """

    kind: str
    eigenvalues: tuple = (1.0,)
    weights: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in ("identity", "point_masses", "explicit"):
            raise DomainError(f"unknown spectrum kind {self.kind!r}")
        if len(self.eigenvalues) == 0:
            raise DomainError("spectrum needs at least one eigenvalue")
        if len(self.eigenvalues) != len(self.weights):
            raise DomainError("eigenvalues and weights differ in length")
        for t in self.eigenvalues:
            if not (math.isfinite(t) and t > 0):
                raise DomainError(f"eigenvalues must be finite and positive, got {t!r}")
        for w in self.weights:
            if not (math.isfinite(w) and w > 0):
                raise DomainError(f"weights must be finite and positive, got {w!r}")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {total!r}, expected 1")
        b1 = math.fsum(w * t for w, t in zip(self.weights, self.eigenvalues))
        if abs(b1 - 1.0) > 1e-9:
            raise DomainError(
                f"mean eigenvalue {b1!r} violates the correlation normalization b1 = 1"
            )
        if self.kind == "identity" and (
            self.eigenvalues != (1.0,) or self.weights != (1.0,)
        ):
            raise DomainError("identity spectrum must be the single atom at 1")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @classmethod
    def identity(cls) -> "SpectralModel":
        return cls(kind="identity")

    @classmethod
    def from_point_masses(cls, eigenvalues, weights) -> "SpectralModel":
        return cls(
            kind="point_masses",
            eigenvalues=tuple(float(t) for t in eigenvalues),
            weights=tuple(float(w) for w in weights),
        )

    @classmethod
    def from_eigenvalues(cls, eigenvalues) -> "SpectralModel":
        eigs = tuple(float(t) for t in eigenvalues)
        k = len(eigs)
        if k == 0:
            raise DomainError("spectrum needs at least one eigenvalue")
        return cls(kind="explicit", eigenvalues=eigs, weights=(1.0 / k,) * k)

    @classmethod
    def block_equicorrelated(cls, block_size: int, rho: float) -> "SpectralModel":
        """Spectrum of a block-diagonal correlation matrix with equicorrelated
        blocks: one atom 1 + (block_size-1)*rho per block and block_size-1
        atoms 1 - rho."""
        if block_size < 2:
            raise DomainError("block_size must be at least 2")
        if not 0.0 <= rho < 1.0:
            raise DomainError("rho must lie in [0, 1)")
        if rho == 0.0:
            return cls.identity()
        b = block_size
        return cls.from_point_masses(
            (1.0 + (b - 1) * rho, 1.0 - rho),
            (1.0 / b, (b - 1) / b),
        )

    def atoms(self):
        """Eigenvalue atoms and their weights as float arrays."""
        return (
            np.asarray(self.eigenvalues, dtype=float),
            np.asarray(self.weights, dtype=float),
        )

    def moments(self) -> SpectralMoments:
        t, w = self.atoms()
        return SpectralMoments(
            b1=float(w @ t),
            b2=float(w @ t**2),
            b3=float(w @ t**3),
            source="population",
        )


@dataclass(frozen=True)
class TransformValue:
    """A Stieltjes transform and its z-derivative at z = -lam."""

    value: float
    derivative: float
    omega: float
    lam: float
    method: str = "closed_form"  # or "fixed_point"
    derivative_method: str = "analytic"  # or "finite_difference"
    iterations: int = 0
    converged: bool = True


def _check_omega_lam(omega: float, lam: float) -> None:
    if not (math.isfinite(omega) and omega > 0):
        raise DomainError(f"omega must be positive and finite, got {omega!r}")
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"lam must be positive and finite, got {lam!r}")


def mp_support_edges(omega: float):
    """Bulk support [ (1-sqrt(omega))^2, (1+sqrt(omega))^2 ] of the M-P law."""
    if not (math.isfinite(omega) and omega > 0):
        raise DomainError(f"omega must be positive and finite, got {omega!r}")
    r = math.sqrt(omega)
    return ((1.0 - r) ** 2, (1.0 + r) ** 2)


def mp_point_mass(omega: float) -> float:
    """Mass at zero of the p-dimensional sample spectrum: max(0, 1 - 1/omega)."""
    if not (math.isfinite(omega) and omega > 0):
        raise DomainError(f"omega must be positive and finite, got {omega!r}")
    return max(0.0, 1.0 - 1.0 / omega)


def mp_density(x, omega: float):
    """Density of the absolutely continuous M-P part at identity covariance.

    Vectorized in x; zero outside the bulk support. The density integrates
    to min(1, 1/omega); together with mp_point_mass the total mass is 1.
    """
    lo, hi = mp_support_edges(omega)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > lo) & (x < hi) & (x > 0)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2.0 * math.pi * omega * xi)
    return out if out.ndim else float(out)


def mp_stieltjes_closed(omega: float, lam: float) -> TransformValue:
    """Closed-form M-P transform of the sample spectrum at identity covariance.

    Evaluated at z = -lam using the cancellation-free root
        g = 2 / (sqrt(D) + 1 - omega + lam),  D = (1 - omega + lam)^2 + 4*omega*lam,
    with derivative g' = (omega*g^2 + g) / sqrt(D) obtained by differentiating
    the defining quadratic omega*lam*g^2 + (1 - omega + lam)*g - 1 = 0.
    """
    _check_omega_lam(omega, lam)
    a = 1.0 - omega + lam
    disc = a * a + 4.0 * omega * lam
    root = math.sqrt(disc)
    g = 2.0 / (root + a)
    gp = (omega * g * g + g) / root
    return TransformValue(value=g, derivative=gp, omega=omega, lam=lam)


def _identity_companion_closed(omega: float, lam: float) -> TransformValue:
    # Same discriminant as the primal transform; the companion satisfies
    # lam*v^2 + (lam + omega - 1)*v - 1 = 0.
    _check_omega_lam(omega, lam)
    a = lam + omega - 1.0
    disc = a * a + 4.0 * lam
    root = math.sqrt(disc)
    v = 2.0 / (root + a)
    vp = (v * v + v) / root
    return TransformValue(value=v, derivative=vp, omega=omega, lam=lam)


def companion_from_primal(primal: TransformValue, omega: float, lam: float) -> TransformValue:
    """Map the sample-spectrum transform to the companion spectrum transform.

    Uses v(-lam) = omega*g(-lam) + (1-omega)/lam and the differentiated form
    v'(-lam) = omega*g'(-lam) + (1-omega)/lam^2. The map is exact algebra;
    note that on the side where the target diverges as lam -> 0 it loses
    relative precision to cancellation, so internal computations prefer the
    directly solved transform on each side.
    """
    _check_omega_lam(omega, lam)
    v = omega * primal.value + (1.0 - omega) / lam
    vp = omega * primal.derivative + (1.0 - omega) / (lam * lam)
    return TransformValue(
        value=v,
        derivative=vp,
        omega=omega,
        lam=lam,
        method=primal.method,
        derivative_method=primal.derivative_method,
        iterations=primal.iterations,
        converged=primal.converged,
    )


def _damped_iterate(update, x0: float, what: str):
    # Shared damped fixed-point loop; returns (x, iterations). The stop rule
    # extrapolates the geometric tail, resid * rate / (1 - rate), so slow
    # contractions still land within FP_TOL of the true fixed point.
    x = x0
    prev_resid = math.inf
    for it in range(1, FP_MAX_ITER + 1):
        nxt = update(x)
        resid = abs(nxt - x)
        x = x + FP_DAMPING * (nxt - x)
        rate = min(resid / prev_resid, 0.999) if prev_resid > 0 else 0.0
        err_est = resid * max(rate / (1.0 - rate), 1.0)
        if err_est <= FP_TOL * (1.0 + abs(nxt)):
            return x, it
        prev_resid = resid if resid > 0 else math.inf
    raise ConvergenceError(
        f"{what} fixed point did not converge within {FP_MAX_ITER} iterations "
        f"(last residual {resid:.3e})"
    )


def _fd_derivative(value_at, lam: float) -> float:
    # Central difference in lam with relative step 1e-6; the z-derivative
    # at z = -lam is minus the lam-derivative.
    h = 1e-6 * lam
    return -(value_at(lam + h) - value_at(lam - h)) / (2.0 * h)


def _solve_primal(spec: SpectralModel, omega: float, lam: float):
    # Damped iteration on the sample-spectrum equation
    #   s = sum_i w_i / (t_i * (1 - omega + omega*lam*s) + lam),
    # a contraction for omega <= 1 on z = -lam.
    t, w = spec.atoms()

    def update(s):
        u = 1.0 - omega + omega * lam * s
        return float(np.sum(w / (t * u + lam)))

    s, iters = _damped_iterate(update, 1.0 / (1.0 + lam), "sample-spectrum")
    u = 1.0 - omega + omega * lam * s
    den = t * u + lam
    num = float(np.sum(w * (1.0 + t * omega * s) / den**2))
    dnm = 1.0 + lam * omega * float(np.sum(w * t / den**2))
    if dnm > 0 and math.isfinite(num):
        gp = num / dnm
        dmethod = "analytic"
    else:
        def g_at(l2):
            s2, _ = _damped_iterate(
                lambda s: float(np.sum(w / (t * (1.0 - omega + omega * l2 * s) + l2))),
                1.0 / (1.0 + l2),
                "sample-spectrum",
            )
            return s2

        gp = _fd_derivative(g_at, lam)
        dmethod = "finite_difference"
    return s, gp, iters, dmethod


def _solve_companion(spec: SpectralModel, omega: float, lam: float):
    # Damped iteration on the companion equation
    #   v = 1 / (lam + omega * sum_i w_i * t_i / (1 + t_i * v)),
    # a contraction for omega >= 1 on z = -lam.
    t, w = spec.atoms()

    def update(v):
        return 1.0 / (lam + omega * float(np.sum(w * t / (1.0 + t * v))))

    v, iters = _damped_iterate(update, 1.0 / (1.0 + lam), "companion-spectrum")
    j2 = float(np.sum(w * t**2 / (1.0 + t * v) ** 2))
    dnm = 1.0 - omega * v * v * j2
    if dnm > 0:
        vp = v * v / dnm
        dmethod = "analytic"
    else:
        def v_at(l2):
            v2, _ = _damped_iterate(
                lambda v: 1.0 / (l2 + omega * float(np.sum(w * t / (1.0 + t * v)))),
                1.0 / (1.0 + l2),
                "companion-spectrum",
            )
            return v2

        vp = _fd_derivative(v_at, lam)
        dmethod = "finite_difference"
    return v, vp, iters, dmethod


@lru_cache(maxsize=4096)
def _transform_pair_cached(spec: SpectralModel, omega: float, lam: float):
    # Returns (g, v) TransformValues. Identity uses closed forms. Otherwise
    # the equation that stays bounded at the given omega is iterated and the
    # other transform recovered through the companion relation, which on that
    # side only adds positive terms (no cancellation).
    if spec.is_identity:
        return mp_stieltjes_closed(omega, lam), _identity_companion_closed(omega, lam)
    if omega <= 1.0:
        g, gp, iters, dmethod = _solve_primal(spec, omega, lam)
        v = omega * g + (1.0 - omega) / lam
        vp = omega * gp + (1.0 - omega) / (lam * lam)
    else:
        v, vp, iters, dmethod = _solve_companion(spec, omega, lam)
        g = (v + (omega - 1.0) / lam) / omega
        gp = (vp + (omega - 1.0) / (lam * lam)) / omega
    g_tv = TransformValue(
        value=g, derivative=gp, omega=omega, lam=lam,
        method="fixed_point", derivative_method=dmethod,
        iterations=iters, converged=True,
    )
    v_tv = TransformValue(
        value=v, derivative=vp, omega=omega, lam=lam,
        method="fixed_point", derivative_method=dmethod,
        iterations=iters, converged=True,
    )
    return g_tv, v_tv


def transform_pair(spec: SpectralModel, omega: float, lam: float):
    """Sample-spectrum and companion transforms (g, v) at z = -lam.

    Results are memoized per (spec, omega, lam); the cache is safe for
    concurrent readers.
    """
    _check_omega_lam(omega, lam)
    return _transform_pair_cached(spec, float(omega), float(lam))


def solve_mp_fixed_point(spec: SpectralModel, omega: float, lam: float) -> TransformValue:
    """Sample-spectrum transform for an arbitrary atomic population spectrum.

    Solves the M-P self-consistency equation at z = -lam by damped fixed
    point and returns the transform with its analytic derivative (obtained
    by differentiating the converged equation; falls back to a flagged
    finite difference if the analytic form degenerates).
    """
    _check_omega_lam(omega, lam)
    if spec.is_identity:
        # Route through the same machinery closed forms are checked against.
        if omega <= 1.0:
            g, gp, iters, dmethod = _solve_primal(spec, omega, lam)
        else:
            v, vp, iters, dmethod = _solve_companion(spec, omega, lam)
            g = (v + (omega - 1.0) / lam) / omega
            gp = (vp + (omega - 1.0) / (lam * lam)) / omega
        return TransformValue(
            value=g, derivative=gp, omega=omega, lam=lam,
            method="fixed_point", derivative_method=dmethod,
            iterations=iters, converged=True,
        )
    return transform_pair(spec, omega, lam)[0]


@dataclass(frozen=True)
class CompanionZeroLimit:
    """Companion transform and derivative extrapolated to lam -> 0+."""

    value: float
    derivative: float
    omega: float
    extrapolated: bool


def _neville_at_zero(xs, ys) -> float:
    # Polynomial through (xs, ys) evaluated at 0.
    xs = list(xs)
    ys = list(ys)
    n = len(xs)
    for level in range(1, n):
        for i in range(n - level):
            ys[i] = (xs[i + level] * ys[i] - xs[i] * ys[i + 1]) / (
                xs[i + level] - xs[i]
            )
    return ys[0]


def companion_zero_limit(spec: SpectralModel, omega: float) -> CompanionZeroLimit:
    """Companion transform v and derivative v' in the lam -> 0+ limit.

    Defined for omega > 1 where the companion spectrum has no mass at zero.
    Identity covariance uses the exact limits v = 1/(omega-1) and
    v' = omega/(omega-1)^3; other spectra are extrapolated quadratically
    from the small-lam grid, which degrades as omega approaches 1.
    """
    if not (math.isfinite(omega) and omega > 0):
        raise DomainError(f"omega must be positive and finite, got {omega!r}")
    if abs(omega - 1.0) <= OMEGA_GUARD_BAND:
        raise NearSingularityError(
            f"omega = {omega!r} is inside the guard band around 1; "
            "zero-regularization limits are undefined there"
        )
    if omega < 1.0:
        raise DomainError(
            "companion zero limit needs omega > 1; below 1 the unregularized "
            "solve is full rank and has its own closed forms"
        )
    if spec.is_identity:
        return CompanionZeroLimit(
            value=1.0 / (omega - 1.0),
            derivative=omega / (omega - 1.0) ** 3,
            omega=omega,
            extrapolated=False,
        )
    vs = []
    vps = []
    for lam in ZERO_LIMIT_GRID:
        _, v_tv = transform_pair(spec, omega, lam)
        vs.append(v_tv.value)
        vps.append(v_tv.derivative)
    return CompanionZeroLimit(
        value=_neville_at_zero(ZERO_LIMIT_GRID, vs),
        derivative=_neville_at_zero(ZERO_LIMIT_GRID, vps),
        omega=omega,
        extrapolated=True,
    )


def moment_map_forward(pop: SpectralMoments, omega: float) -> SpectralMoments:
    """Population spectral moments to expected sample-spectrum moments.

    b1 -> b1
    b2 -> b2 + omega*b1^2
    b3 -> b3 + 3*omega*b1*b2 + omega^2*b1^3
    """
    if not (math.isfinite(omega) and omega >= 0):
        raise DomainError(f"omega must be nonnegative and finite, got {omega!r}")
    if pop.source != "population":
        raise DomainError("moment_map_forward expects population moments")
    b1, b2, b3 = pop.b1, pop.b2, pop.b3
    return SpectralMoments(
        b1=b1,
        b2=b2 + omega * b1**2,
        b3=b3 + 3.0 * omega * b1 * b2 + omega**2 * b1**3,
        source="sample",
    )


# Slack for feasibility checks on inverted moments; covers roundoff, not
# sampling noise (panel workflows handle that upstream).
_FEAS_TOL = 1e-9


def moment_map_inverse(
    samp: SpectralMoments, omega: float, slack: float = _FEAS_TOL
) -> SpectralMoments:
    """Sample-spectrum moments back to population moments.

    Inverts moment_map_forward and rejects outputs no spectrum can have
    (negative mass, b2 < b1^2, or b1*b3 < b2^2). Violations within the
    relative slack are clamped onto the feasible boundary; the default
    slack covers roundoff only, while observed panels pass a statistical
    slack sized for their sampling noise.
    """
    if not (math.isfinite(omega) and omega >= 0):
        raise DomainError(f"omega must be nonnegative and finite, got {omega!r}")
    if samp.source != "sample":
        raise DomainError("moment_map_inverse expects sample moments")
    b1 = samp.b1
    b2 = samp.b2 - omega * b1**2
    b3 = samp.b3 - 3.0 * omega * b1 * b2 - omega**2 * b1**3
    if b1 <= 0 or b2 <= 0 or b3 <= 0:
        raise InfeasiblePanelError(
            f"inverted moments ({b1!r}, {b2!r}, {b3!r}) are not all positive"
        )
    scale2 = max(b2, b1**2)
    if b2 - b1**2 < -slack * scale2:
        raise InfeasiblePanelError(
            f"inverted moments violate b2 >= b1^2: b1={b1!r}, b2={b2!r}"
        )
    b2 = max(b2, b1**2)
    scale3 = max(b1 * b3, b2**2)
    if b1 * b3 - b2**2 < -slack * scale3:
        raise InfeasiblePanelError(
            f"inverted moments violate b1*b3 >= b2^2: b2={b2!r}, b3={b3!r}"
        )
    b3 = max(b3, b2**2 / b1)
    return SpectralMoments(b1=b1, b2=b2, b3=b3, source="population")


def esd_moments_from_eigenvalues(eigenvalues) -> SpectralMoments:
    """Observed sample-spectrum moments: mean powers of the eigenvalues."""
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.size == 0:
        raise DomainError("need at least one eigenvalue")
    if not np.all(np.isfinite(vals)):
        raise DomainError("eigenvalues must be finite")
    return SpectralMoments(
        b1=float(np.mean(vals)),
        b2=float(np.mean(vals**2)),
        b3=float(np.mean(vals**3)),
        source="sample",
    )
