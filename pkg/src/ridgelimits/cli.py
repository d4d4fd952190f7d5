"""Command-line interface.

Subcommands: limits (closed-form limit values), simulate (Monte-Carlo runs
from a YAML config), estimate (plug-in accuracy from panels or raw
matrices), meta (aggregate a summary panel), spectrum (transform values),
and report (preset curve/simulation reports with figures rendered next to
the delimited output).

Exit codes: 0 success, 2 configuration problems, 3 numerical failures,
4 partially or fully failed simulation runs.
"""

from __future__ import annotations

import math
import os
import sys
from pathlib import Path

import click
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import io as rio  # noqa: E402
from .accuracy import PanelSummary, accuracy_from_panel, accuracy_from_traces  # noqa: E402
from .errors import ConfigError, RidgeLimitsError, RunError  # noqa: E402
from .estimators import EstimatorKind, meta_aggregate  # noqa: E402
from .limits import (  # noqa: E402
    TraitModel,
    limit_marginal,
    limit_meta,
    limit_ols,
    limit_ols_in,
    limit_ridge_in,
    limit_ridge_in_optimal,
    limit_ridge_in_zero,
    limit_ridge_optimal,
    limit_ridge_out,
    limit_ridgeless,
    mse_limits,
    optimal_lambda,
    pre_marginal,
)
from .simulate import (  # noqa: E402
    EstimatorRequest,
    SimConfig,
    compare_to_limits,
    run_replicates,
)
from .spectral import SpectralModel, transform_pair  # noqa: E402

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

# Deterministic vector output: fixed hash salt, no embedded dates.
matplotlib.rcParams["svg.hashsalt"] = "ridgelimits"


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, str(exc))
        except RunError as exc:
            _fail(EXIT_PARTIAL, str(exc))
        except RidgeLimitsError as exc:
            _fail(EXIT_NUMERICAL, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_spectrum(path) -> SpectralModel:
    if path is None:
        return SpectralModel.identity()
    return rio.load_spectral_model(path)


def _trait_model(h2, omega, h2_eta, phi) -> TraitModel:
    # flag errors are configuration problems, not numerical ones
    try:
        return TraitModel(h2_beta=h2, omega=omega, h2_eta=h2_eta, phi=phi)
    except RidgeLimitsError as exc:
        raise ConfigError(str(exc)) from None


@click.group()
@click.version_option(package_name="ridgelimits")
def main():
    """Exact high-dimensional accuracy limits for ridge-type estimators,
    with a Monte-Carlo engine that checks them."""


@main.command("limits")
@click.option("--h2", type=float, required=True, help="training-trait signal fraction")
@click.option("--omega", type=float, required=True, help="feature/sample ratio p/n")
@click.option("--h2-eta", type=float, default=None, help="target-trait signal fraction")
@click.option("--phi", type=float, default=1.0, help="effect-vector cosine")
@click.option("--spectrum", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--lam", "lams", type=float, multiple=True, help="ridge penalty (repeatable)")
@click.option("--signal-variance", type=float, default=None, help="also report MSE limits")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@_guard
def limits_cmd(h2, omega, h2_eta, phi, spectrum, lams, signal_variance, out):
    """All limit values for one trait model, on stdout and optionally as a
    delimited file."""
    spec = _load_spectrum(spectrum)
    tm = _trait_model(h2, omega, h2_eta, phi)
    rows = []

    def add(lv, lam=None):
        rows.append({"tag": lv.tag, "lam": lam, "value": lv.value})

    a2_m, e2_m = limit_marginal(tm, spec)
    add(a2_m)
    add(e2_m)
    if tm.h2_beta < 1.0:
        opt = optimal_lambda(tm)
        add(limit_ridge_optimal(tm, spec), lam=opt.lam)
        add(limit_ridge_in_optimal(tm, spec), lam=opt.lam)
    try:
        add(limit_ridgeless(tm, spec))
    except RidgeLimitsError as exc:
        click.echo(f"note: ridgeless omitted: {exc}", err=True)
    add(limit_ridge_in_zero(tm))
    if tm.omega < 1.0:
        add(limit_ols(tm))
        add(limit_ols_in(tm))
    for lam in lams:
        add(limit_ridge_out(tm, spec, lam), lam=lam)
        add(limit_ridge_in(tm, spec, lam), lam=lam)
    pre = pre_marginal(tm, spec)
    rows.append({"tag": "pre_marginal", "lam": None, "value": pre.delta})
    if signal_variance is not None:
        for kind in ("marginal", "ridge_optimal", "ridgeless"):
            if kind == "ridge_optimal" and tm.h2_beta >= 1.0:
                continue
            dec = mse_limits(tm, spec, signal_variance, kind=kind)
            rows.append({"tag": f"{kind}_mse", "lam": None, "value": dec.total})
        if tm.omega < 1.0:
            dec = mse_limits(tm, spec, signal_variance, kind="ols")
            rows.append({"tag": "ols_mse", "lam": None, "value": dec.total})
    for row in rows:
        lam_str = "" if row["lam"] is None else f"  lam={row['lam']!r}"
        click.echo(f"{row['tag']}\t{row['value']!r}{lam_str}")
    if out is not None:
        rio.write_rows(_out_dir(out) / "limits.tsv", rows, columns=["tag", "lam", "value"])


def _spectrum_from_entry(entry, base_dir) -> SpectralModel:
    if entry is None:
        return SpectralModel.identity()
    if isinstance(entry, str):
        fpath = Path(entry)
        if not fpath.is_absolute():
            fpath = Path(base_dir) / fpath
        return rio.load_spectral_model(fpath)
    if not isinstance(entry, dict):
        raise ConfigError("spectrum must be a path or a mapping")
    entry = dict(entry)
    if "file" in entry:
        fpath = Path(entry.pop("file"))
        if entry:
            raise ConfigError(f"unexpected spectrum keys {sorted(entry)}")
        if not fpath.is_absolute():
            fpath = Path(base_dir) / fpath
        return rio.load_spectral_model(fpath)
    kind = entry.pop("kind", None)
    if kind == "identity":
        if entry:
            raise ConfigError(f"unexpected spectrum keys {sorted(entry)}")
        return SpectralModel.identity()
    if kind == "point_masses":
        eigs = entry.pop("eigenvalues", None)
        weights = entry.pop("weights", None)
        if eigs is None or weights is None:
            raise ConfigError("point_masses needs eigenvalues and weights")
        if entry:
            raise ConfigError(f"unexpected spectrum keys {sorted(entry)}")
        return SpectralModel.from_point_masses(eigs, weights)
    raise ConfigError(f"unknown spectrum kind {kind!r}")


_ESTIMATOR_KEYS = {"kind", "penalty", "at_optimal", "n_power", "shortcut", "label"}


def _estimators_from_entries(entries) -> tuple:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("estimators must be a non-empty list")
    requests = []
    for entry in entries:
        if isinstance(entry, str):
            entry = {"kind": entry}
        if not isinstance(entry, dict):
            raise ConfigError("each estimator must be a name or a mapping")
        unknown = set(entry) - _ESTIMATOR_KEYS
        if unknown:
            raise ConfigError(f"unknown estimator keys {sorted(unknown)}")
        kind = entry.get("kind")
        if kind is None:
            raise ConfigError("estimator entry needs kind")
        try:
            kind = EstimatorKind(kind)
        except ValueError:
            raise ConfigError(f"unknown estimator kind {kind!r}") from None
        requests.append(
            EstimatorRequest(
                kind=kind,
                penalty=entry.get("penalty"),
                at_optimal=bool(entry.get("at_optimal", False)),
                n_power=int(entry.get("n_power", 0)),
                shortcut=bool(entry.get("shortcut", False)),
                label=entry.get("label"),
            )
        )
    return tuple(requests)


_SIM_KEYS = {
    "n",
    "p",
    "h2_beta",
    "n_z",
    "h2_eta",
    "phi",
    "m_beta",
    "m_eta",
    "m_overlap",
    "spectrum",
    "block",
    "estimators",
    "replicates",
    "seed",
    "effect_dist",
    "design_dist",
    "signal_variance",
    "meta_split",
    "compute_mse",
    "workers",
}


def sim_config_from_mapping(data: dict, base_dir=".") -> SimConfig:
    """Build a SimConfig from a parsed YAML mapping, rejecting unknown keys."""
    unknown = set(data) - _SIM_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = dict(data)
    spectrum_entry = kwargs.pop("spectrum", None)
    block = kwargs.pop("block", None)
    estimators = kwargs.pop("estimators", None)
    meta_split = kwargs.pop("meta_split", None)
    if meta_split is not None:
        kwargs["meta_split"] = tuple(float(f) for f in meta_split)
    if estimators is not None:
        kwargs["estimators"] = _estimators_from_entries(estimators)
    if block is not None:
        if spectrum_entry is not None:
            raise ConfigError("give either block or spectrum, not both")
        if not isinstance(block, (list, tuple)) or len(block) != 2:
            raise ConfigError("block must be [block_size, rho]")
        cfg = SimConfig(**kwargs)
        return cfg.with_block(int(block[0]), float(block[1]))
    kwargs["spectrum"] = _spectrum_from_entry(spectrum_entry, base_dir)
    return SimConfig(**kwargs)


def _default_workers() -> int:
    env = os.environ.get("RIDGELIMITS_WORKERS")
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise ConfigError(f"RIDGELIMITS_WORKERS must be an integer, got {env!r}") from None
    if value < 1:
        raise ConfigError("RIDGELIMITS_WORKERS must be >= 1")
    return value


_ROW_COLUMNS = [
    "estimator",
    "lam_or_tau",
    "replicate",
    "a2",
    "e2",
    "mse_total",
    "bias_sq",
    "variance",
]

_COMPARISON_COLUMNS = [
    "estimator",
    "metric",
    "empirical_mean",
    "empirical_se",
    "limit",
    "gap",
    "tolerance",
    "passed",
    "exact_limit",
]


def _write_run_outputs(out: Path, result, comparisons) -> None:
    rio.write_rows(out / "rows.tsv", list(result.rows), columns=_ROW_COLUMNS)
    rio.write_rows(out / "comparison.tsv", comparisons, columns=_COMPARISON_COLUMNS)
    if result.failures:
        rio.write_rows(
            out / "failures.tsv",
            [{"replicate": r, "message": m} for r, m in result.failures],
            columns=["replicate", "message"],
        )


@main.command("simulate")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(file_okay=False), default=".")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--workers", type=int, default=None, help="process count (default: RIDGELIMITS_WORKERS or 1)")
@_guard
def simulate_cmd(config, out, seed, workers):
    """Monte-Carlo run from a YAML config; writes rows.tsv and
    comparison.tsv (and failures.tsv when replicates failed)."""
    data = rio.load_config_file(config)
    if seed is not None:
        data["seed"] = seed
    if workers is None:
        workers = _default_workers()
    data["workers"] = workers
    cfg = sim_config_from_mapping(data, base_dir=Path(config).parent)
    result = run_replicates(cfg)
    comparisons = compare_to_limits(result)
    _write_run_outputs(_out_dir(out), result, comparisons)
    for c in comparisons:
        lim = "" if c.limit is None else f" limit={c.limit:.6f} gap={c.gap:+.6f}"
        mark = {True: "ok", False: "off", None: "--"}[c.passed]
        click.echo(
            f"[{mark}] {c.estimator} {c.metric}: mean={c.empirical_mean:.6f} se={c.empirical_se:.6f}{lim}"
        )
    if result.failures:
        click.echo(f"{len(result.failures)} of {cfg.replicates} replicates failed", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command("estimate")
@click.option("--panel", type=click.Path(exists=True, dir_okay=False), default=None,
              help="eigenvalue file, one value per line")
@click.option("--n-w", type=int, default=None, help="panel sample count")
@click.option("--p", type=int, default=None, help="panel feature count")
@click.option("--x", "x_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="training design matrix file")
@click.option("--z", "z_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="target design matrix file")
@click.option("--h2", type=float, required=True)
@click.option("--omega", type=float, default=None,
              help="training ratio p/n (panel route; trace route infers it)")
@click.option("--h2-eta", type=float, default=None)
@click.option("--phi", type=float, default=1.0)
@click.option("--remove-top", type=int, default=None, help="drop this many top eigenvalues")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@_guard
def estimate_cmd(panel, n_w, p, x_path, z_path, h2, omega, h2_eta, phi, remove_top, out):
    """Plug-in accuracy estimates from a reference-panel spectrum or from
    raw design matrices."""
    if panel is not None:
        if x_path is not None or z_path is not None:
            raise ConfigError("give either --panel or --x/--z, not both")
        if n_w is None or p is None:
            raise ConfigError("panel route needs --n-w and --p")
        if omega is None:
            raise ConfigError("panel route needs --omega (training ratio)")
        values = [
            float(ln)
            for ln in Path(panel).read_text().split("\n")
            if ln.strip() and not ln.lstrip().startswith("#")
        ]
        summary = PanelSummary(n_w=n_w, p=p, eigenvalues=tuple(values))
        tm = _trait_model(h2, omega, h2_eta, phi)
        report = accuracy_from_panel(summary, tm, remove_top=remove_top)
    else:
        if x_path is None or z_path is None:
            raise ConfigError("trace route needs both --x and --z")
        X = rio.read_matrix(x_path)
        Z = rio.read_matrix(z_path)
        inferred = X.shape[1] / X.shape[0]
        if omega is not None and abs(omega - inferred) > 1e-9 * max(1.0, inferred):
            raise ConfigError(
                f"--omega {omega} conflicts with X shape ratio {inferred}"
            )
        tm = _trait_model(h2, inferred, h2_eta, phi)
        report = accuracy_from_traces(X, Z, tm)
    m = report.population_moments
    rows = [
        {"quantity": "a2_marginal", "value": report.a2_marginal},
        {"quantity": "e2_marginal", "value": report.e2_marginal},
        {"quantity": "a2_ridge_optimal", "value": report.a2_ridge_optimal},
        {"quantity": "pre_marginal", "value": report.pre_delta},
        {"quantity": "b1", "value": m.b1},
        {"quantity": "b2", "value": m.b2},
        {"quantity": "b3", "value": m.b3},
        {"quantity": "omega_panel", "value": report.omega_panel},
        {"quantity": "top_removed", "value": report.top_removed},
        {"quantity": "renormalization", "value": report.renormalization},
    ]
    for row in rows:
        click.echo(f"{row['quantity']}\t{'' if row['value'] is None else repr(row['value'])}")
    for note in report.notes:
        click.echo(f"note: {note}", err=True)
    if out is not None:
        rio.write_rows(_out_dir(out) / "report.tsv", rows, columns=["quantity", "value"])


@main.command("meta")
@click.option("--panel", type=click.Path(exists=True, dir_okay=False), required=True,
              help="summary panel: size line, then one coefficient row per feature")
@click.option("--weights", type=str, default=None, help="comma-separated study weights")
@click.option("--out", type=click.Path(file_okay=False), default=".")
@_guard
def meta_cmd(panel, weights, out):
    """Aggregate per-study coefficient columns into one vector."""
    summary = rio.read_summary_panel(panel)
    w = None
    if weights is not None:
        w = [float(tok) for tok in weights.split(",") if tok.strip() != ""]
    fit = meta_aggregate(summary, weights=w)
    rows = [{"coefficient": float(c)} for c in fit.coefficients]
    rio.write_rows(_out_dir(out) / "coefficients.tsv", rows, columns=["coefficient"])
    click.echo(f"aggregated {summary.p} coefficients from {len(summary.study_sizes)} studies")


@main.command("spectrum")
@click.option("--spectrum", "spectrum_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="model file (default: identity)")
@click.option("--omega", type=float, required=True)
@click.option("--lam", "lams", type=float, multiple=True, required=True)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@_guard
def spectrum_cmd(spectrum_path, omega, lams, out):
    """Spectral-transform values g and v with derivatives at each penalty."""
    spec = _load_spectrum(spectrum_path)
    m = spec.moments()
    click.echo(f"moments\tb1={m.b1!r}\tb2={m.b2!r}\tb3={m.b3!r}")
    rows = []
    for lam in lams:
        g, v = transform_pair(spec, omega, lam)
        rows.append(
            {
                "lam": lam,
                "g": g.value,
                "g_derivative": g.derivative,
                "v": v.value,
                "v_derivative": v.derivative,
                "method": g.method,
            }
        )
        click.echo(
            f"lam={lam!r}\tg={g.value!r}\tg'={g.derivative!r}\tv={v.value!r}\tv'={v.derivative!r}"
        )
    if out is not None:
        rio.write_rows(
            _out_dir(out) / "transforms.tsv",
            rows,
            columns=["lam", "g", "g_derivative", "v", "v_derivative", "method"],
        )


# ---------------------------------------------------------------------------
# report presets


def _preset_ridge_penalty_curve(seed, full_scale, workers):
    spec = SpectralModel.identity()
    rows = []
    lam_grid = np.logspace(-3, 1.5, 61)
    for h2 in (0.2, 0.5, 0.8):
        tm = TraitModel(h2_beta=h2, omega=2.0)
        for lam in lam_grid:
            rows.append(
                {
                    "series": f"h2={h2}",
                    "x": float(lam),
                    "y": limit_ridge_out(tm, spec, float(lam)).value,
                    "y_se": None,
                }
            )
        opt = optimal_lambda(tm)
        rows.append(
            {
                "series": f"h2={h2} optimum",
                "x": opt.lam,
                "y": limit_ridge_optimal(tm, spec).value,
                "y_se": None,
            }
        )
    meta = {
        "xlabel": "ridge penalty",
        "ylabel": "out-of-sample R2 limit",
        "xscale": "log",
        "title": "Ridge accuracy across penalties (p/n = 2)",
        "point_series": [f"h2={h} optimum" for h in (0.2, 0.5, 0.8)],
    }
    return rows, meta


def _omega_grid():
    return np.logspace(math.log10(0.15), math.log10(10.0), 81)


def _preset_accuracy_vs_ratio(seed, full_scale, workers):
    spec = SpectralModel.identity()
    h2 = 0.8
    rows = []
    for om in _omega_grid():
        if abs(om - 1.0) < 1e-3:
            continue
        tm = TraitModel(h2_beta=h2, omega=float(om))
        rows.append({"series": "marginal", "x": float(om),
                     "y": limit_marginal(tm, spec)[0].value, "y_se": None})
        rows.append({"series": "ridge_optimal", "x": float(om),
                     "y": limit_ridge_optimal(tm, spec).value, "y_se": None})
        rows.append({"series": "ridgeless", "x": float(om),
                     "y": limit_ridgeless(tm, spec).value, "y_se": None})
        rows.append({"series": "upper_bound", "x": float(om),
                     "y": min(h2, h2 / float(om)), "y_se": None})
    meta = {
        "xlabel": "feature/sample ratio p/n",
        "ylabel": "out-of-sample R2 limit",
        "xscale": "log",
        "title": "Accuracy limits across ratios (h2 = 0.8)",
        "point_series": [],
    }
    return rows, meta


def _preset_fit_vs_ratio(seed, full_scale, workers):
    spec = SpectralModel.identity()
    rows = []
    for h2 in (0.5, 0.8):
        for om in _omega_grid():
            if abs(om - 1.0) < 1e-3:
                continue
            tm = TraitModel(h2_beta=h2, omega=float(om))
            rows.append({"series": f"marginal h2={h2}", "x": float(om),
                         "y": limit_marginal(tm, spec)[1].value, "y_se": None})
            rows.append({"series": f"ridge_optimal h2={h2}", "x": float(om),
                         "y": limit_ridge_in_optimal(tm, spec).value, "y_se": None})
            rows.append({"series": f"interpolation h2={h2}", "x": float(om),
                         "y": limit_ridge_in_zero(tm).value, "y_se": None})
    meta = {
        "xlabel": "feature/sample ratio p/n",
        "ylabel": "in-sample R2 limit",
        "xscale": "log",
        "title": "In-sample fit limits across ratios",
        "point_series": [],
    }
    return rows, meta


_PROTOCOL_RATIOS = (1.05, 2.0, 4.0, 8.0)


def _protocol_estimators():
    return (
        EstimatorRequest(kind=EstimatorKind.MARGINAL, label="marginal"),
        EstimatorRequest(kind=EstimatorKind.RIDGE, at_optimal=True, label="ridge_optimal"),
        EstimatorRequest(kind=EstimatorKind.RIDGELESS, label="ridgeless"),
        EstimatorRequest(kind=EstimatorKind.META, label="meta"),
    )


def _sim_series(cfg: SimConfig, series_prefix: str = "") -> list:
    result = run_replicates(cfg)
    rows = []
    for name, est_rows in result.by_estimator().items():
        values = [r.a2 for r in est_rows]
        mean = float(np.mean(values))
        se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        rows.append(
            {
                "series": f"{series_prefix}{name} (simulated)",
                "x": cfg.omega,
                "y": mean,
                "y_se": se,
            }
        )
    return rows


def _preset_protocol_identity(seed, full_scale, workers):
    h2 = 0.8
    n = 2000 if full_scale else 500
    reps = 100 if full_scale else 30
    spec = SpectralModel.identity()
    rows = []
    for om in _PROTOCOL_RATIOS:
        cfg = SimConfig(
            n=n,
            p=int(round(om * n)),
            h2_beta=h2,
            replicates=reps,
            seed=seed,
            estimators=_protocol_estimators(),
            workers=workers,
        )
        rows.extend(_sim_series(cfg))
    for om in np.logspace(math.log10(1.02), math.log10(10.0), 61):
        tm = TraitModel(h2_beta=h2, omega=float(om))
        rows.append({"series": "marginal (limit)", "x": float(om),
                     "y": limit_marginal(tm, spec)[0].value, "y_se": None})
        rows.append({"series": "ridge_optimal (limit)", "x": float(om),
                     "y": limit_ridge_optimal(tm, spec).value, "y_se": None})
        rows.append({"series": "ridgeless (limit)", "x": float(om),
                     "y": limit_ridgeless(tm, spec).value, "y_se": None})
    meta = {
        "xlabel": "feature/sample ratio p/n",
        "ylabel": "out-of-sample R2",
        "xscale": "log",
        "title": f"Simulated accuracy vs limits (h2 = 0.8, n = {n})",
        "point_series": None,  # inferred: any series with y_se
    }
    return rows, meta


def _preset_protocol_block(seed, full_scale, workers):
    h2 = 0.8
    n = 2000 if full_scale else 500
    reps = 100 if full_scale else 30
    block_size, rho = 20, 0.8
    block_spec = SpectralModel.block_equicorrelated(block_size, rho)
    rows = []
    for om in (1.05, 8.0):
        p = int(round(om * n))
        p -= p % block_size  # realization needs whole blocks
        base = dict(n=n, h2_beta=h2, replicates=reps, seed=seed, workers=workers,
                    estimators=_protocol_estimators()[:2])
        cfg_i = SimConfig(p=p, **base)
        cfg_b = SimConfig(p=p, **base).with_block(block_size, rho)
        rows.extend(_sim_series(cfg_i, series_prefix="identity "))
        rows.extend(_sim_series(cfg_b, series_prefix="block "))
    for om in np.logspace(math.log10(1.02), math.log10(10.0), 61):
        tm = TraitModel(h2_beta=h2, omega=float(om))
        rows.append({"series": "identity marginal (limit)", "x": float(om),
                     "y": limit_marginal(tm, SpectralModel.identity())[0].value, "y_se": None})
        rows.append({"series": "block marginal (limit)", "x": float(om),
                     "y": limit_marginal(tm, block_spec)[0].value, "y_se": None})
        rows.append({"series": "block ridge_optimal (limit)", "x": float(om),
                     "y": limit_ridge_optimal(tm, block_spec).value, "y_se": None})
    meta = {
        "xlabel": "feature/sample ratio p/n",
        "ylabel": "out-of-sample R2",
        "xscale": "log",
        "title": f"Correlated features vs identity (h2 = 0.8, n = {n})",
        "point_series": None,
    }
    return rows, meta


_PRESETS = {
    "ridge-penalty-curve": _preset_ridge_penalty_curve,
    "accuracy-vs-ratio": _preset_accuracy_vs_ratio,
    "fit-vs-ratio": _preset_fit_vs_ratio,
    "protocol-identity": _preset_protocol_identity,
    "protocol-block": _preset_protocol_block,
}


def _render_figure(rows, meta, fig_base: Path, formats) -> list:
    series_names = []
    for row in rows:
        if row["series"] not in series_names:
            series_names.append(row["series"])
    point_series = meta.get("point_series")
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in series_names:
        pts = [(r["x"], r["y"], r["y_se"]) for r in rows if r["series"] == name]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ses = [p[2] for p in pts]
        as_points = (
            name in point_series
            if point_series is not None
            else any(se is not None for se in ses)
        )
        if as_points:
            err = [0.0 if se is None else 2.0 * se for se in ses]
            ax.errorbar(xs, ys, yerr=err, fmt="o", capsize=3, markersize=4, label=name)
        else:
            style = "--" if "bound" in name or "limit" in name else "-"
            ax.plot(xs, ys, style, linewidth=1.6, label=name)
    ax.set_xlabel(meta["xlabel"])
    ax.set_ylabel(meta["ylabel"])
    if meta.get("xscale") == "log":
        ax.set_xscale("log")
    ax.set_title(meta["title"])
    ax.legend(fontsize=7, loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    written = []
    for fmt in formats:
        target = fig_base.with_suffix(f".{fmt}")
        if fmt == "svg":
            fig.savefig(target, metadata={"Date": None})
        else:
            fig.savefig(target, dpi=150)
        written.append(target)
    plt.close(fig)
    return written


@main.command("report")
@click.option("--preset", type=click.Choice(sorted(_PRESETS)), required=True)
@click.option("--seed", type=int, default=42)
@click.option("--out", type=click.Path(file_okay=False), default=".")
@click.option("--full-scale", is_flag=True, help="protocol presets at n = 2000, 100 replicates")
@click.option("--format", "formats", type=click.Choice(["svg", "png"]), multiple=True,
              default=("svg",), help="figure format (repeatable)")
@click.option("--workers", type=int, default=None)
@_guard
def report_cmd(preset, seed, out, full_scale, formats, workers):
    """Preset report: long-format series data plus a rendered figure."""
    if workers is None:
        workers = _default_workers()
    out_path = _out_dir(out)
    rows, meta = _PRESETS[preset](seed, full_scale, workers)
    data_path = out_path / f"{preset}.tsv"
    rio.write_rows(data_path, rows, columns=["series", "x", "y", "y_se"])
    figures = _render_figure(rows, meta, out_path / preset, formats)
    click.echo(f"wrote {data_path}")
    for fig_path in figures:
        click.echo(f"wrote {fig_path}")


if __name__ == "__main__":
    main()
