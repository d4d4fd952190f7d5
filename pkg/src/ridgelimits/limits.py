"""Exact asymptotic R2 and MSE limits for ridge-type estimators.

Every function here returns the deterministic large-system limit of an
empirical metric under the proportional regime p/n -> omega with a fixed
population spectrum. Out-of-sample limits carry the attainable ceiling
h2_eta * phi^2; in-sample limits are plain squared correlations bounded
by 1. Transform values (g for the sample spectrum, v for its companion)
are taken at z = -lam from the spectral module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, NearSingularityError
from .metrics import MseDecomposition
from .spectral import (
    OMEGA_GUARD_BAND,
    SpectralModel,
    SpectralMoments,
    TransformValue,
    companion_zero_limit,
    transform_pair,
)


@dataclass(frozen=True)
class TraitModel:
    """Asymptotic problem description for a pair of traits.

    h2_beta is the training-trait heritability (signal fraction of the
    response variance), h2_eta the target-trait counterpart (defaults to
    h2_beta), phi the cosine similarity of the two effect vectors, and
    omega the feature-to-sample ratio of the training design. kappa and
    rho optionally split phi into overlap and correlation factors; when
    both are given their product must reproduce phi.
    """

    h2_beta: float
    omega: float
    h2_eta: float | None = None
    phi: float = 1.0
    kappa: float | None = None
    rho: float | None = None
    omega_z: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.h2_eta is None:
            object.__setattr__(self, "h2_eta", self.h2_beta)
        if not 0.0 < self.h2_beta <= 1.0:
            raise DomainError(f"h2_beta must lie in (0, 1], got {self.h2_beta!r}")
        if not 0.0 < self.h2_eta <= 1.0:
            raise DomainError(f"h2_eta must lie in (0, 1], got {self.h2_eta!r}")
        if not -1.0 <= self.phi <= 1.0:
            raise DomainError(f"phi must lie in [-1, 1], got {self.phi!r}")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise DomainError(f"omega must be positive and finite, got {self.omega!r}")
        for name in ("kappa", "rho"):
            val = getattr(self, name)
            if val is not None and not -1.0 <= val <= 1.0:
                raise DomainError(f"{name} must lie in [-1, 1], got {val!r}")
        if self.kappa is not None and self.rho is not None:
            if abs(self.kappa * self.rho - self.phi) > 1e-12:
                raise DomainError(
                    f"kappa * rho = {self.kappa * self.rho!r} does not "
                    f"reproduce phi = {self.phi!r}"
                )
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma!r}")

    @classmethod
    def same_trait(cls, h2: float, omega: float) -> "TraitModel":
        return cls(h2_beta=h2, omega=omega, h2_eta=h2, phi=1.0)

    @property
    def ceiling(self) -> float:
        """Largest attainable out-of-sample R2: h2_eta * phi^2."""
        return self.h2_eta * self.phi**2


@dataclass(frozen=True)
class LimitValue:
    value: float
    tag: str
    transforms: tuple = ()


@dataclass(frozen=True)
class PreResult:
    """Relative efficiency of a correlated spectrum over identity for the
    marginal estimator, with the omega where the advantage flips (None when
    the spectrum never trails identity)."""

    delta: float
    omega_transition: float | None


@dataclass(frozen=True)
class OptimalPenalty:
    lam: float
    tau: float


@dataclass(frozen=True)
class EfficiencyRatios:
    """Identity-covariance accuracy ratios against the marginal estimator:
    optimally tuned ridge (r_optimal), untuned interpolation (r_zero), and
    the in-sample counterpart at the tuned penalty (q_in)."""

    r_optimal: float
    r_zero: float
    q_in: float


def _pop_moments(pop) -> SpectralMoments:
    if isinstance(pop, SpectralModel):
        return pop.moments()
    if isinstance(pop, SpectralMoments):
        if pop.source != "population":
            raise DomainError("limits need population moments, not sample moments")
        return pop
    raise DomainError("expected a SpectralModel or population SpectralMoments")


def _a2(value: float, tm: TraitModel, tag: str, transforms=()) -> LimitValue:
    if value < -1e-9 or value > tm.ceiling + 1e-9:
        raise DomainError(
            f"{tag} limit {value!r} escapes [0, h2_eta*phi^2]; inputs are inconsistent"
        )
    return LimitValue(value=min(max(value, 0.0), tm.ceiling), tag=tag, transforms=transforms)


def _e2(value: float, tag: str, transforms=()) -> LimitValue:
    if value < -1e-9 or value > 1.0 + 1e-9:
        raise DomainError(f"{tag} limit {value!r} escapes [0, 1]")
    return LimitValue(value=min(max(value, 0.0), 1.0), tag=tag, transforms=transforms)


def limit_marginal(tm: TraitModel, pop) -> tuple[LimitValue, LimitValue]:
    """Out-of-sample and in-sample R2 limits of the marginal estimator.

    a2 = h2_eta*phi^2 / (b3/b2^2 + omega/(b2*h2_beta))
    e2 = (b2*h2 + omega)^2 /
         ((b2*h2 + omega)^2 + b2*omega + (b3 - b2^2*h2)*h2)

    These limits describe the common-divisor form X'y/n. The exact
    per-feature form shares them whenever the population covariance has
    unit diagonal (identity or block realizations), and differs otherwise.
    """
    m = _pop_moments(pop)
    h2, om = tm.h2_beta, tm.omega
    a2 = tm.ceiling / (m.b3 / m.b2**2 + om / (m.b2 * h2))
    core = m.b2 * h2 + om
    e2 = core**2 / (core**2 + m.b2 * om + (m.b3 - m.b2**2 * h2) * h2)
    return (
        _a2(a2, tm, "marginal_out_of_sample"),
        _e2(e2, "marginal_in_sample"),
    )


def pre_marginal(tm: TraitModel, pop) -> PreResult:
    """Accuracy of the marginal estimator under a correlated spectrum
    relative to identity covariance at the same (h2, omega).

    delta = (h2 + omega) / (h2*b3/b2^2 + omega/b2). The advantage flips at
    omega_0 = h2*(b3 - b2^2)/(b2^2 - b2) when the spectrum is non-degenerate.
    """
    m = _pop_moments(pop)
    h2, om = tm.h2_beta, tm.omega
    delta = (h2 + om) / (h2 * m.b3 / m.b2**2 + om / m.b2)
    if m.b2 <= 1.0 + 1e-12:
        # identity-like spectrum: no transition
        return PreResult(delta=delta, omega_transition=None)
    omega0 = h2 * (m.b3 - m.b2**2) / (m.b2**2 - m.b2)
    return PreResult(delta=delta, omega_transition=max(omega0, 0.0))


def optimal_lambda(tm: TraitModel) -> OptimalPenalty:
    """Penalty maximizing out-of-sample ridge R2 for any spectrum:
    lam* = omega * (1 - h2) / h2, tau* = lam* / omega.

    At h2_beta = 1 the optimum degenerates to the lam -> 0+ boundary;
    callers should use limit_ridgeless there.
    """
    h2 = tm.h2_beta
    if h2 >= 1.0:
        raise DomainError(
            "optimal penalty degenerates to 0 at h2_beta = 1; "
            "use the ridgeless limit instead"
        )
    lam = tm.omega * (1.0 - h2) / h2
    return OptimalPenalty(lam=lam, tau=lam / tm.omega)


def limit_ridge_out(tm: TraitModel, spec: SpectralModel, lam: float) -> LimitValue:
    """Out-of-sample R2 limit of the ridge estimator at penalty lam.

    In companion-transform terms with v = v(-lam), v' = v'(-lam):
        num = (1 + (lam/omega)*(1 - 1/(lam*v)))^2 * h2
        den = (1 + (lam/omega)*(2 - 1/(lam*v) - v'/v^2)) * h2
              + (v'/v^2 - 1) * (1 - h2)
        a2  = h2_eta * phi^2 * num / den
    The same value is the BLUP limit at tau = lam / omega.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"lam must be positive and finite, got {lam!r}")
    h2, om = tm.h2_beta, tm.omega
    _, v_tv = transform_pair(spec, om, lam)
    v, vp = v_tv.value, v_tv.derivative
    inv_lv = 1.0 / (lam * v)
    ratio = vp / v**2
    num = (1.0 + (lam / om) * (1.0 - inv_lv)) ** 2 * h2
    den = (1.0 + (lam / om) * (2.0 - inv_lv - ratio)) * h2 + (ratio - 1.0) * (1.0 - h2)
    return _a2(tm.ceiling * num / den, tm, "ridge_out_of_sample", (v_tv,))


def limit_ridge_optimal(tm: TraitModel, spec: SpectralModel) -> LimitValue:
    """Out-of-sample R2 limit of ridge at the optimal penalty.

    a2 = h2_eta*phi^2 * (1/h2 - 1/(v(-lam*)*omega)) for h2 < 1; at h2 = 1
    the optimum is the ridgeless limit.
    """
    h2, om = tm.h2_beta, tm.omega
    if h2 >= 1.0:
        lv = limit_ridgeless(tm, spec)
        return LimitValue(lv.value, "ridge_optimal_out_of_sample", lv.transforms)
    lam_star = optimal_lambda(tm).lam
    _, v_tv = transform_pair(spec, om, lam_star)
    value = tm.ceiling * (1.0 / h2 - 1.0 / (v_tv.value * om))
    return _a2(value, tm, "ridge_optimal_out_of_sample", (v_tv,))


def limit_ridgeless(tm: TraitModel, spec: SpectralModel) -> LimitValue:
    """Out-of-sample R2 limit of the minimum-norm (lam -> 0+) solve.

    Below omega = 1 this equals the unpenalized least-squares limit; above,
    it uses the companion transform's zero-penalty limit. Aspect ratios
    within 1e-6 of 1 are rejected as unstable.
    """
    h2, om = tm.h2_beta, tm.omega
    if abs(om - 1.0) <= OMEGA_GUARD_BAND:
        raise NearSingularityError(
            "ridgeless limit is unstable at omega = 1; no limit is reported "
            "inside the guard band"
        )
    if om < 1.0:
        ols = limit_ols(tm)
        return LimitValue(ols.value, "ridgeless_out_of_sample", ols.transforms)
    zl = companion_zero_limit(spec, om)
    v0, v0p = zl.value, zl.derivative
    top = 1.0 - 1.0 / (v0 * om)
    spread = v0p / v0**2 - 1.0
    num = top**2 * h2
    den = top * h2 + spread * (1.0 - h2)
    return _a2(tm.ceiling * num / den, tm, "ridgeless_out_of_sample")


def limit_ols(tm: TraitModel) -> LimitValue:
    """Out-of-sample R2 limit of unpenalized least squares (omega < 1):
    a2 = h2_eta*phi^2 / (1 + (1-h2)/h2 * omega/(1-omega)). Spectrum-free."""
    h2, om = tm.h2_beta, tm.omega
    if om >= 1.0:
        raise DomainError(f"unpenalized least squares needs omega < 1, got {om!r}")
    value = tm.ceiling / (1.0 + (1.0 - h2) / h2 * om / (1.0 - om))
    return _a2(value, tm, "ols_out_of_sample")


def limit_ridge_in(tm: TraitModel, spec: SpectralModel, lam: float) -> LimitValue:
    """In-sample R2 limit of the ridge estimator at penalty lam.

    With g = g(-lam), g' = g'(-lam):
        num = (h2*(1 - lam + lam^2*g) + (1-h2)*omega*(1 - lam*g))^2
        den = h2*(1 - 2*lam + 3*lam^2*g - lam^3*g')
              + (1-h2)*omega*(1 - 2*lam*g + lam^2*g')
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"lam must be positive and finite, got {lam!r}")
    h2, om = tm.h2_beta, tm.omega
    g_tv, _ = transform_pair(spec, om, lam)
    g, gp = g_tv.value, g_tv.derivative
    num = (h2 * (1.0 - lam + lam**2 * g) + (1.0 - h2) * om * (1.0 - lam * g)) ** 2
    den = h2 * (1.0 - 2.0 * lam + 3.0 * lam**2 * g - lam**3 * gp) + (
        1.0 - h2
    ) * om * (1.0 - 2.0 * lam * g + lam**2 * gp)
    return _e2(num / den, "ridge_in_sample", (g_tv,))


def limit_ridge_in_zero(tm: TraitModel) -> LimitValue:
    """In-sample R2 limit of the lam -> 0+ ridge solve: h2 + (1-h2)*omega
    below omega = 1 (the unpenalized value) and exactly 1 above."""
    h2, om = tm.h2_beta, tm.omega
    value = h2 + (1.0 - h2) * min(om, 1.0)
    return _e2(value, "ridgeless_in_sample")


def limit_ols_in(tm: TraitModel) -> LimitValue:
    """In-sample R2 limit of unpenalized least squares (omega < 1)."""
    h2, om = tm.h2_beta, tm.omega
    if om >= 1.0:
        raise DomainError(f"unpenalized least squares needs omega < 1, got {om!r}")
    return _e2(h2 + (1.0 - h2) * om, "ols_in_sample")


def limit_ridge_in_optimal(tm: TraitModel, spec: SpectralModel) -> LimitValue:
    """In-sample R2 limit of ridge at the out-of-sample-optimal penalty:
    e2 = h2 / (1 - lam* + lam*^2 * g(-lam*))."""
    h2 = tm.h2_beta
    if h2 >= 1.0:
        return LimitValue(
            limit_ridge_in_zero(tm).value, "ridge_optimal_in_sample", ()
        )
    lam_star = optimal_lambda(tm).lam
    g_tv, _ = transform_pair(spec, tm.omega, lam_star)
    value = h2 / (1.0 - lam_star + lam_star**2 * g_tv.value)
    return _e2(value, "ridge_optimal_in_sample", (g_tv,))


def limit_meta(tm: TraitModel, pop, study_sizes, weights=None):
    """R2 limits of a weighted combination of per-study marginal fits.

    tm.omega must be the pooled aspect ratio p / sum(study_sizes); the
    feature count is recovered from it. Weighting study i by d_i shifts
    the effective aspect ratio to
        omega_eff = p * sum(d_i^2 / n_i) / (sum d_i)^2,
    which equals the pooled omega under size-proportional weights (the
    default). The out-of-sample limit is the marginal limit at omega_eff.
    The in-sample limit is reported only for size-proportional weights,
    where the aggregate reproduces a pooled marginal fit; otherwise None.
    """
    sizes = [int(s) for s in study_sizes]
    if len(sizes) == 0 or any(s <= 0 for s in sizes):
        raise DomainError("study_sizes must be positive integers")
    total = sum(sizes)
    p_eff = tm.omega * total
    if weights is None:
        w = [float(s) for s in sizes]
    else:
        w = [float(x) for x in weights]
        if len(w) != len(sizes) or any(x <= 0 for x in w):
            raise DomainError("need one positive weight per study")
    wsum = sum(w)
    omega_eff = p_eff * sum(x * x / s for x, s in zip(w, sizes)) / wsum**2
    tm_eff = TraitModel(
        h2_beta=tm.h2_beta,
        omega=omega_eff,
        h2_eta=tm.h2_eta,
        phi=tm.phi,
    )
    m = _pop_moments(pop)
    a2_eff, e2_eff = limit_marginal(tm_eff, m)
    a2 = LimitValue(a2_eff.value, "meta_out_of_sample")
    size_proportional = all(
        abs(x / wsum - s / total) <= 1e-12 for x, s in zip(w, sizes)
    )
    e2 = LimitValue(e2_eff.value, "meta_in_sample") if size_proportional else None
    return a2, e2


def pre_ridge(tm: TraitModel, spec: SpectralModel) -> float:
    """Accuracy of optimally tuned ridge under a correlated spectrum relative
    to identity covariance at the same (h2, omega)."""
    h2, om = tm.h2_beta, tm.omega
    if h2 >= 1.0:
        raise DomainError("relative efficiency at the tuned penalty needs h2 < 1")
    ident = limit_ridge_optimal(tm, SpectralModel.identity())
    other = limit_ridge_optimal(tm, spec)
    return other.value / ident.value


def efficiency_ratios(tm: TraitModel) -> EfficiencyRatios:
    """Identity-covariance accuracy ratios against the marginal estimator.

    r_optimal = a2_ridge(lam*) / a2_marginal (always >= 1),
    r_zero    = a2_ridgeless / a2_marginal (either side of 1),
    q_in      = e2_ridge(lam*) / e2_marginal.
    """
    h2, om = tm.h2_beta, tm.omega
    if abs(om - 1.0) <= OMEGA_GUARD_BAND:
        raise NearSingularityError(
            "ridgeless ratio is undefined at omega = 1; move omega off the guard band"
        )
    h4 = h2 * h2
    s = om + h2
    r_optimal = s * (s - math.sqrt(s * s - 4.0 * om * h4)) / (2.0 * h4 * om)
    if om < 1.0:
        r_zero = (h2 + om) / (h2 + om * (1.0 - h2) / (1.0 - om))
    else:
        r_zero = (h2 + om) / (h2 * om + om * om * (1.0 - h2) / (om - 1.0))
    root = math.sqrt((om - h2) ** 2 + 4.0 * om * h2 * (1.0 - h2))
    e2_opt = 2.0 * h2**3 / ((1.0 - h2) * (root - om) + h2 * (3.0 * h2 - 1.0))
    e2_marg = (h2 + om) ** 2 / ((h2 + om) ** 2 + om + h2 * (1.0 - h2))
    return EfficiencyRatios(r_optimal=r_optimal, r_zero=r_zero, q_in=e2_opt / e2_marg)


def mse_limits(
    tm: TraitModel,
    spec: SpectralModel,
    signal_variance: float,
    sigma_eps: float | None = None,
    kind: str = "marginal",
    lam: float | None = None,
) -> MseDecomposition:
    """Limiting bias-variance split of the estimation error in the
    population-covariance norm.

    signal_variance is the aggregate effect variance (sparsity times the
    per-effect variance over the feature count). sigma_eps defaults to the
    noise level implied by h2_beta. kind is one of "marginal", "ols",
    "ridge" (needs lam), "ridge_optimal", "ridgeless".
    """
    if not (math.isfinite(signal_variance) and signal_variance >= 0):
        raise DomainError(f"signal_variance must be nonnegative, got {signal_variance!r}")
    h2, om = tm.h2_beta, tm.omega
    if sigma_eps is None:
        if h2 >= 1.0:
            sigma_eps = 0.0
        else:
            sigma_eps = math.sqrt(signal_variance * (1.0 - h2) / h2)
    noise_var = sigma_eps**2
    m = spec.moments()

    if kind == "marginal":
        bias = signal_variance * (m.b3 + om * m.b2 - 2.0 * m.b2 + 1.0)
        var = noise_var * om * m.b2
        tag = "marginal_mse"
    elif kind == "ols":
        if om >= 1.0:
            raise DomainError(f"unpenalized least squares needs omega < 1, got {om!r}")
        bias = 0.0
        var = noise_var * om / (1.0 - om)
        tag = "ols_mse"
    elif kind == "ridge":
        if lam is None or not (math.isfinite(lam) and lam > 0):
            raise DomainError("ridge needs lam > 0")
        _, v_tv = transform_pair(spec, om, lam)
        v, vp = v_tv.value, v_tv.derivative
        bias = signal_variance * (v - lam * vp) / (v**2 * om)
        var = noise_var * (vp / v**2 - 1.0)
        tag = "ridge_mse"
    elif kind == "ridge_optimal":
        if h2 >= 1.0:
            raise DomainError("tuned penalty is degenerate at h2_beta = 1")
        lam_star = optimal_lambda(tm).lam
        _, v_tv = transform_pair(spec, om, lam_star)
        v, vp = v_tv.value, v_tv.derivative
        bias = signal_variance * (v - lam_star * vp) / (v**2 * om)
        var = noise_var * (vp / v**2 - 1.0)
        tag = "ridge_optimal_mse"
    elif kind == "ridgeless":
        if abs(om - 1.0) <= OMEGA_GUARD_BAND:
            raise NearSingularityError("ridgeless MSE is unstable at omega = 1")
        if om < 1.0:
            bias = 0.0
            var = noise_var * om / (1.0 - om)
        else:
            zl = companion_zero_limit(spec, om)
            bias = signal_variance / (zl.value * om)
            var = noise_var * (zl.derivative / zl.value**2 - 1.0)
        tag = "ridgeless_mse"
    else:
        raise DomainError(f"unknown MSE kind {kind!r}")

    return MseDecomposition(total=bias + var, bias_sq=bias, variance=var, tag=tag)
