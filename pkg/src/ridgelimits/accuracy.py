"""Plug-in accuracy estimation from observed data.

Two routes to the same report:

* a reference-panel eigenvalue summary (no raw data needed), which recovers
  population spectral moments through the sample-to-population moment map
  and, when the panel aspect ratio matches the training one, estimates the
  companion transform directly from the spectrum;
* raw training and target design matrices, where the moment combinations
  enter through Frobenius/trace identities on Gram matrices, so nothing
  p-by-p is ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, NormalizationError
from .limits import (
    TraitModel,
    limit_marginal,
    optimal_lambda,
    pre_marginal,
)
from .spectral import SpectralMoments, moment_map_inverse

# Eigenvalues above SPIKE_FACTOR times the bulk upper edge (1 + sqrt(omega))^2
# are treated as structural outliers when no explicit removal count is given.
SPIKE_FACTOR = 10.0

# The panel's trace rate b1 may be renormalized to 1 within this slack;
# beyond it the scale is considered wrong rather than noisy.
RENORM_SLACK = 0.05

# Panel aspect ratio may differ from the training one by this relative
# amount before the spectrum-based companion estimate is suppressed.
RATIO_SLACK = 0.05

# Working-memory budget for the trace route (Gram matrices).
TRACE_MEMORY_BYTES = 2 * 1024**3

# Statistical slack for the moment-map feasibility checks on observed
# panels: the variance combinations fluctuate at the 1/sqrt(p) scale and
# spike removal perturbs the bulk, so small negative excursions are
# clamped instead of rejected.
PANEL_FEASIBILITY_SLACK = 0.02


@dataclass(frozen=True)
class PanelSummary:
    """Eigenvalue summary of a reference panel with n_w samples and p
    features. eigenvalues may be the p primal values (p <= n_w), the n_w
    companion values (p > n_w), or either list with structural zeros
    included; zeros are inferred from the counts."""

    n_w: int
    p: int
    eigenvalues: tuple

    def __post_init__(self):
        if self.n_w < 2 or self.p < 1:
            raise ConfigError("panel needs n_w >= 2 and p >= 1")
        vals = tuple(float(v) for v in self.eigenvalues)
        if not vals:
            raise ConfigError("panel needs at least one eigenvalue")
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ConfigError("panel eigenvalues must be finite and nonnegative")
        expected = min(self.n_w, self.p)
        if len(vals) not in (expected, self.p, self.n_w):
            raise ConfigError(
                f"expected {expected} (or padded) eigenvalues, got {len(vals)}"
            )
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def omega(self) -> float:
        return self.p / self.n_w


@dataclass(frozen=True)
class PanelMoments:
    population: SpectralMoments
    sample: SpectralMoments
    omega_panel: float
    top_removed: int
    renormalization: float


@dataclass(frozen=True)
class AccuracyReport:
    a2_marginal: float
    e2_marginal: float
    a2_ridge_optimal: float | None
    pre_delta: float | None
    population_moments: SpectralMoments
    omega_panel: float
    top_removed: int
    renormalization: float
    method: str  # "panel" or "traces"
    notes: tuple = ()


def _nonzero(vals: np.ndarray) -> np.ndarray:
    if vals.size == 0:
        return vals
    cut = 1e-12 * float(vals.max())
    return vals[vals > cut]


def moments_from_panel(panel: PanelSummary, remove_top: int | None = None) -> PanelMoments:
    """Population spectral moments recovered from a panel's eigenvalues.

    Sample moments are mean powers over the full p-dimensional sample
    spectrum (implicit zeros contribute nothing). Outlying top eigenvalues
    are removed: the largest remove_top when given, otherwise any above
    SPIKE_FACTOR times the bulk edge. The trace rate is renormalized to 1
    within RENORM_SLACK before inverting the moment map.
    """
    vals = np.sort(np.asarray(panel.eigenvalues, dtype=float))[::-1]
    vals = _nonzero(vals)
    if vals.size == 0:
        raise ConfigError("panel spectrum is entirely zero")
    if remove_top is None:
        edge = (1.0 + math.sqrt(panel.omega)) ** 2
        removed = int(np.sum(vals > SPIKE_FACTOR * edge))
    else:
        removed = int(remove_top)
    if removed < 0 or removed >= vals.size:
        raise ConfigError(f"cannot remove {removed} of {vals.size} eigenvalues")
    kept = vals[removed:]

    p = float(panel.p)
    b1 = float(kept.sum()) / p
    b2 = float((kept**2).sum()) / p
    b3 = float((kept**3).sum()) / p
    if b1 <= 0:
        raise NormalizationError("panel trace rate is not positive")
    if abs(b1 - 1.0) > RENORM_SLACK:
        raise NormalizationError(
            f"panel trace rate {b1:.4f} is too far from 1 to renormalize; "
            "rescale the input covariance"
        )
    sample = SpectralMoments(
        b1=1.0, b2=b2 / b1**2, b3=b3 / b1**3, source="sample"
    )
    population = moment_map_inverse(
        sample, panel.omega, slack=PANEL_FEASIBILITY_SLACK
    )
    return PanelMoments(
        population=population,
        sample=sample,
        omega_panel=panel.omega,
        top_removed=removed,
        renormalization=b1,
    )


def _companion_trace(panel: PanelSummary, renorm: float, lam: float) -> float:
    """Companion-resolvent trace (1/n_w) sum 1/(eig + lam) over the n_w
    companion eigenvalues, zeros included, on the renormalized scale."""
    vals = _nonzero(np.asarray(panel.eigenvalues, dtype=float)) / renorm
    n_zero = max(panel.n_w - vals.size, 0)
    return float((1.0 / (vals + lam)).sum() + n_zero / lam) / panel.n_w


def accuracy_from_panel(
    panel: PanelSummary,
    tm: TraitModel,
    remove_top: int | None = None,
) -> AccuracyReport:
    """Predicted accuracies from a reference-panel spectrum.

    Marginal limits use the recovered population moments, which are valid
    at any panel aspect ratio. The penalized-optimum value instead needs
    the companion transform at the training ratio, so it is estimated from
    the spectrum only when the panel ratio matches tm.omega within
    RATIO_SLACK; otherwise it is None with an explanatory note.
    """
    pm = moments_from_panel(panel, remove_top=remove_top)
    a2_m, e2_m = limit_marginal(tm, pm.population)
    pre = pre_marginal(tm, pm.population)
    notes = []
    a2_r = None
    if tm.h2_beta >= 1.0:
        notes.append("h2 = 1 has no finite optimal penalty; ridge value omitted")
    elif abs(pm.omega_panel - tm.omega) <= RATIO_SLACK * tm.omega:
        lam_star = optimal_lambda(tm).lam
        v_hat = _companion_trace(panel, pm.renormalization, lam_star)
        value = tm.ceiling * (1.0 / tm.h2_beta - 1.0 / (v_hat * tm.omega))
        a2_r = min(max(value, 0.0), tm.ceiling)
    else:
        notes.append(
            f"panel ratio {pm.omega_panel:.3f} differs from training ratio "
            f"{tm.omega:.3f}; spectrum-based ridge estimate suppressed"
        )
    return AccuracyReport(
        a2_marginal=a2_m.value,
        e2_marginal=e2_m.value,
        a2_ridge_optimal=a2_r,
        pre_delta=pre.delta,
        population_moments=pm.population,
        omega_panel=pm.omega_panel,
        top_removed=pm.top_removed,
        renormalization=pm.renormalization,
        method="panel",
        notes=tuple(notes),
    )


def _trace_budget(n: int, n_z: int) -> int:
    # two n*n Grams, the n*n product workspace, and the n*n_z cross matrix
    return 8 * (3 * n * n + n * n_z)


def accuracy_from_traces(X, Z, tm: TraitModel) -> AccuracyReport:
    """Predicted accuracies from raw designs via Gram-trace identities.

    Uses tr(S_x), tr(S_z), tr(S_x S_z), tr(S_x S_z S_x), tr(S_x^2) and
    tr(S_x^3), where S_x = X'X/n and S_z = Z'Z/n_z, all computed from
    n-by-n Gram matrices. Raw moment estimates combine the same traces
    (the cross-panel product debiases b2, the self-products carry the
    aspect-ratio correction for b3).
    """
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.ndim != 2 or Z.ndim != 2:
        raise ConfigError("X and Z must be matrices")
    n, p = X.shape
    n_z, p_z = Z.shape
    if p != p_z:
        raise ConfigError(f"feature counts differ: {p} vs {p_z}")
    if _trace_budget(n, n_z) > TRACE_MEMORY_BYTES:
        raise ConfigError(
            "Gram matrices for the trace route exceed the memory budget; "
            "subsample rows or use the panel route"
        )
    omega = p / n

    G = X @ X.T
    C = X @ Z.T
    t_x = float(np.einsum("ii->", G)) / n
    t_z = float(np.einsum("ij,ij->", Z, Z)) / n_z
    t_xz = float(np.einsum("ij,ij->", C, C)) / (n * n_z)
    t_xzx = float(np.einsum("ij,ij->", G, C @ C.T)) / (n * n * n_z)
    G2 = G @ G
    t_x2 = float(np.einsum("ii->", G2)) / n**2
    t_x3 = float(np.einsum("ij,ji->", G2, G)) / n**3

    h2 = tm.h2_beta
    num_a = n * t_xz**2 * h2
    den_a = n * t_z * t_xzx * h2 + t_z * t_x * t_xz * (1.0 - h2)
    if den_a <= 0:
        raise DomainError("degenerate trace combination in the accuracy formula")
    a2 = tm.ceiling * num_a / den_a

    num_e = (n * t_x2 * h2 + t_x**2 * (1.0 - h2)) ** 2
    den_e = n**2 * t_x * t_x3 * h2 + n * t_x**2 * t_x2 * (1.0 - h2)
    if den_e <= 0:
        raise DomainError("degenerate trace combination in the fit formula")
    e2 = num_e / den_e

    b1 = t_x / p
    b2 = t_xz / p
    b3 = t_xzx / p - omega * b1 * b2
    moments = SpectralMoments(b1=b1, b2=b2, b3=b3, source="population")
    pre = pre_marginal(tm, moments)
    return AccuracyReport(
        a2_marginal=float(a2),
        e2_marginal=float(e2),
        a2_ridge_optimal=None,
        pre_delta=pre.delta,
        population_moments=moments,
        omega_panel=omega,
        top_removed=0,
        renormalization=1.0,
        method="traces",
        notes=("spectrum-based ridge estimate requires panel eigenvalues",),
    )
