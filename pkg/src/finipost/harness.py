"""Seeded experiment runner: priors -> continuations and posterior draws ->
distances -> closed-form bounds, with machine-readable reports.

Five experiment kinds share one report schema:

* ``bound_finite`` / ``bound_real`` -- plug-in transport distance between
  posterior draws of the directing measure and empirical-measure draws,
  against the matching rate bound (total variation / bounded Lipschitz).
* ``bound_mean``     -- scalar pushforward distance for a named test
  function against the mean bounds.
* ``estimator_sweep`` -- finite-horizon vs classical estimator gap with
  its algebraic envelope across the horizon grid.
* ``median_law``     -- empirical law of the odd-sample median against the
  exact beta law and its tail inequalities.

Determinism contract: every cell of the (N, replicate) grid derives its
own counter-based stream from ``(master_seed, replicate, stream_id)``, so
reports are byte-identical across runs and thread counts.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds as bd
from .errors import FiniPostError
from .measures import AtomicMeasure, FiniteAlphabet, RealLine, Sample, cdf_of, empirical, l21_functional
from .priors import (
    ExchangeableModel,
    FiniteDirichletModel,
    FixedLawModel,
    PolyaTreeModel,
    batched_fd_empirical_counts,
    batched_posterior_integrals,
    batched_sequences,
    continue_sequence,
    model_from_spec,
    model_space,
    posterior_draw,
    predictive_expectation,
    sample_sequence,
)
from .estimators import (
    EstimatorInputs,
    cdf_estimators,
    gini_estimators,
    mean_estimators,
    variance_estimators,
)
from .rng import RngState, derive_key, state_from_key
from .transport import meta_w1_matched

__all__ = [
    "ExperimentConfig",
    "ReportRow",
    "ExperimentReport",
    "run_experiment",
    "run_bound_experiment",
    "run_mean_experiment",
    "run_estimator_sweep",
    "run_median_experiment",
    "emit",
    "report_to_csv",
    "report_to_json",
]

ARTIFACT_VERSION = "0.1.0"

_EXPERIMENTS = ("bound_finite", "bound_real", "bound_mean", "estimator_sweep", "median_law")
_BOOTSTRAP_RESAMPLES = 200

# Stream ids: replicate-level history stream, then per-(N, phase) streams.
_STREAM_HISTORY = 0


def _cell_stream(n_index: int, phase: int) -> int:
    return 8 * (1 + n_index) + phase


# ---------------------------------------------------------------------------
# Configuration and report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: dict
    n: int
    N_grid: tuple[int, ...]
    m_samples: int
    replicates: int
    ground: str = "TV"
    master_seed: int = 0
    output: str | None = None
    f_spec: dict | None = None
    threads: int = 1
    coupling: str = "posterior"

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise FiniPostError("config-error", f"unknown experiment {self.experiment!r}")
        if not self.N_grid:
            raise FiniPostError("config-error", "empty N grid")
        floor = max(self.n, 1) if self.experiment == "estimator_sweep" else self.n + 1
        if any(N < floor for N in self.N_grid):
            raise FiniPostError("config-error", f"every N in the grid must be >= {floor}")
        if self.m_samples < 2:
            raise FiniPostError("config-error", "m_samples must be >= 2")
        if self.replicates < 1:
            raise FiniPostError("config-error", "replicates must be >= 1")
        if self.threads < 1:
            raise FiniPostError("config-error", "threads must be >= 1")
        if self.coupling not in ("posterior", "independent"):
            raise FiniPostError("config-error", f"unknown coupling {self.coupling!r}")
        object.__setattr__(self, "N_grid", tuple(int(N) for N in self.N_grid))

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        try:
            return cls(
                experiment=obj["experiment"],
                model=obj["model"],
                n=int(obj.get("n", 0)),
                N_grid=tuple(obj["N_grid"]),
                m_samples=int(obj.get("m_samples", 2000)),
                replicates=int(obj.get("replicates", 1)),
                ground=obj.get("ground", "TV"),
                master_seed=int(obj.get("master_seed", 0)),
                output=obj.get("output"),
                f_spec=obj.get("f_spec"),
                threads=int(obj.get("threads", 1)),
                coupling=obj.get("coupling", "posterior"),
            )
        except KeyError as exc:
            raise FiniPostError("config-error", f"config missing field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "model": self.model,
            "n": self.n,
            "N_grid": list(self.N_grid),
            "m_samples": self.m_samples,
            "replicates": self.replicates,
            "ground": self.ground,
            "master_seed": self.master_seed,
            "output": self.output,
            "f_spec": self.f_spec,
            "threads": self.threads,
            "coupling": self.coupling,
        }


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    N: int
    n: int
    replicate: int
    seed: int
    estimate: float
    stderr: float | None
    bound: float
    slack: float
    violated: bool


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    metadata: dict = field(default_factory=dict)

    @property
    def any_violation(self) -> bool:
        return any(r.violated for r in self.rows)


# ---------------------------------------------------------------------------
# Named test functions
# ---------------------------------------------------------------------------

def _test_function(f_spec: dict | None) -> tuple[Callable, Callable, str]:
    """Scalar and vectorized forms of a named test function."""
    if f_spec is None:
        raise FiniPostError("config-error", "this experiment needs an f_spec")
    kind = f_spec.get("kind")
    if kind == "identity":
        return (lambda x: float(x)), (lambda a: a), "identity"
    if kind == "square":
        return (lambda x: float(x) ** 2), (lambda a: a * a), "square"
    if kind == "indicator":
        if "y" not in f_spec:
            raise FiniPostError("config-error", "indicator f_spec needs a threshold y")
        y = float(f_spec["y"])
        return (
            lambda x: 1.0 if float(x) <= y else 0.0,
            lambda a: (a <= y).astype(float),
            f"indicator({y})",
        )
    if kind == "gini":
        return (lambda x: float(x)), (lambda a: a), "gini"
    raise FiniPostError("config-error", f"unknown f_spec kind {f_spec!r}")


def _bootstrap_se(matched: np.ndarray, rng: RngState, resamples: int = _BOOTSTRAP_RESAMPLES) -> float:
    """Standard error of the mean matched cost under resampling of the
    matched pair costs (the plug-in estimate is their mean)."""
    m = matched.size
    idx = rng.integers(0, m, size=(resamples, m))
    return float(matched[idx].mean(axis=1).std(ddof=1))


# ---------------------------------------------------------------------------
# Experiment dispatch
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    model = model_from_spec(cfg.model)
    if cfg.experiment in ("bound_finite", "bound_real"):
        return run_bound_experiment(cfg, model)
    if cfg.experiment == "bound_mean":
        return run_mean_experiment(cfg, model)
    if cfg.experiment == "estimator_sweep":
        return run_estimator_sweep(cfg, model)
    return run_median_experiment(cfg, model)


def _metadata(cfg: ExperimentConfig) -> dict:
    return {"config": cfg.to_dict(), "artifact_version": ARTIFACT_VERSION}


def _run_cells(cfg: ExperimentConfig, worker: Callable[[int, int], list[ReportRow]]) -> list[ReportRow]:
    """Evaluate the (N, replicate) grid, deterministically ordered by index."""
    cells = [(ni, r) for ni in range(len(cfg.N_grid)) for r in range(cfg.replicates)]
    if cfg.threads == 1:
        results = [worker(ni, r) for ni, r in cells]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda cell: worker(*cell), cells))
    return [row for rows in results for row in rows]


# ---------------------------------------------------------------------------
# bound_finite / bound_real
# ---------------------------------------------------------------------------

def run_bound_experiment(cfg: ExperimentConfig, model: ExchangeableModel | None = None) -> ExperimentReport:
    """Plug-in meta distance between posterior draws and empirical draws,
    per (N, replicate), against the matching closed-form bound.

    Per cell: one history draw (shared across the N grid within a
    replicate), ``m_samples`` posterior draws, ``m_samples`` empirical
    measures at horizon N.  Under the default ``coupling="posterior"``
    each empirical measure is grown from the matching posterior draw (the
    de Finetti coupling: history plus i.i.d. draws from that measure),
    which leaves both marginal laws exact while keeping the plug-in bias
    at desk scale; ``coupling="independent"`` grows them from the
    marginal predictive chain instead, which over-states the distance
    badly in the bounded-Lipschitz geometry (see README).  Slack is three
    bootstrap standard errors of the plug-in (matched-cost resampling);
    the real-line bound folds in three standard errors of the estimated
    posterior mean of the sqrt(F(1-F)) integral.  A half-sample estimate
    is recorded in the metadata so bias stabilization is visible.
    """
    model = model_from_spec(cfg.model) if model is None else model
    _check_bound_config(cfg, model)
    stabilization: list[dict] = []

    def worker(ni: int, rep: int) -> list[ReportRow]:
        N = cfg.N_grid[ni]
        history = _replicate_history(cfg, model, rep)
        post_rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 0)))
        cont_rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 1)))
        boot_rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 2)))

        posts = [posterior_draw(model, history, post_rng) for _ in range(cfg.m_samples)]
        if cfg.coupling == "posterior":
            emps = _coupled_empiricals(model, history, posts, N, cont_rng)
        elif isinstance(model, FiniteDirichletModel):
            counts = batched_fd_empirical_counts(model, history, N, cfg.m_samples, cont_rng)
            space = model_space(model)
            emps = [
                AtomicMeasure(list(zip(model.atoms, row / N)), space=space) for row in counts
            ]
        else:
            emps = [
                empirical(continue_sequence(model, history, N, cont_rng)) for _ in range(cfg.m_samples)
            ]
        estimate, matched = meta_w1_matched(posts, emps, cfg.ground)
        se = _bootstrap_se(matched, boot_rng)
        slack = 3.0 * se

        if cfg.experiment == "bound_finite":
            bound = bd.finite_bound(model.k, cfg.n, N)
        else:
            l21s = np.array([l21_functional(cdf_of(p)) for p in posts])
            l21_mean = float(l21s.mean())
            l21_se = float(l21s.std(ddof=1) / math.sqrt(len(l21s)))
            bound = bd.real_bound(cfg.n, N, l21_mean)
            slack += 3.0 * l21_se / math.sqrt(N - cfg.n)

        half = cfg.m_samples // 2
        if half >= 2:
            est_half, _ = meta_w1_matched(posts[:half], emps[:half], cfg.ground)
            stabilization.append(
                {"N": N, "replicate": rep, "estimate_half": est_half, "estimate_full": estimate}
            )

        return [
            ReportRow(
                cfg.experiment, N, cfg.n, rep,
                derive_key(cfg.master_seed, rep, _cell_stream(ni, 0)),
                estimate, se, bound, slack, estimate > bound + slack,
            )
        ]

    rows = _run_cells(cfg, worker)
    meta = _metadata(cfg)
    meta["stabilization"] = sorted(stabilization, key=lambda d: (d["N"], d["replicate"]))
    return ExperimentReport(rows, meta)


def _check_bound_config(cfg: ExperimentConfig, model: ExchangeableModel) -> None:
    space = model_space(model)
    if cfg.experiment == "bound_finite":
        if cfg.ground != "TV" or not isinstance(model, FiniteDirichletModel) or not isinstance(
            space, FiniteAlphabet
        ):
            raise FiniPostError("config-error", "bound_finite needs a label alphabet model and TV ground")
    else:
        if cfg.ground != "BL" or not isinstance(space, RealLine):
            raise FiniPostError("config-error", "bound_real needs a scalar model and BL ground")
        if isinstance(model, FixedLawModel):
            raise FiniPostError("config-error", "bound_real needs a model with posterior draws")


def _replicate_history(cfg: ExperimentConfig, model: ExchangeableModel, rep: int) -> Sample:
    if cfg.n == 0:
        return Sample((), space=model_space(model))
    rng = state_from_key(derive_key(cfg.master_seed, rep, _STREAM_HISTORY))
    return sample_sequence(model, cfg.n, rng)


def _coupled_empiricals(
    model: ExchangeableModel,
    history: Sample,
    posts: list[AtomicMeasure],
    N: int,
    rng: RngState,
) -> list[AtomicMeasure]:
    """Empirical measures grown from the matching posterior draws.

    Given a directing-measure draw, the remaining N - n observations are
    i.i.d. from it, so each empirical measure mixes the history with
    fresh draws from its paired posterior measure.  Marginally each
    empirical measure follows the conditional law of the horizon-N
    empirical measure (up to the documented truncation tolerance).
    """
    from .priors import _fd_counts, _iid_from_measure

    n = len(history)
    space = model_space(model)
    if isinstance(model, FiniteDirichletModel):
        base_counts = _fd_counts(model, history)
        W = np.stack([[p.mass_at(a) for a in model.atoms] for p in posts])
        W = W / W.sum(axis=1, keepdims=True)
        counts = base_counts[None, :] + rng.multinomial(N - n, W)
        return [AtomicMeasure(list(zip(model.atoms, row / N)), space=space) for row in counts]
    out = []
    for post in posts:
        values = tuple(history.values) + _iid_from_measure(post, N - n, rng)
        out.append(empirical(Sample(values, space=space)))
    return out


# ---------------------------------------------------------------------------
# bound_mean
# ---------------------------------------------------------------------------

def run_mean_experiment(cfg: ExperimentConfig, model: ExchangeableModel | None = None) -> ExperimentReport:
    """Scalar pushforward check: the plug-in distance between f-means of
    full sequences and f-integrals of posterior draws, against the mean
    bound (unconditional when n = 0, conditional otherwise)."""
    model = model_from_spec(cfg.model) if model is None else model
    if not isinstance(model_space(model), RealLine):
        raise FiniPostError("config-error", "bound_mean needs a scalar model")
    f, fvec, _name = _test_function(cfg.f_spec)
    f2 = lambda x: f(x) ** 2  # noqa: E731

    def worker(ni: int, rep: int) -> list[ReportRow]:
        N = cfg.N_grid[ni]
        history = _replicate_history(cfg, model, rep)
        seq_rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 1)))
        post_rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 0)))
        boot_rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 2)))

        xs = _batched_f_means(model, history, N, fvec, cfg.m_samples, seq_rng)
        ys = batched_posterior_integrals(model, history, fvec, cfg.m_samples, post_rng)
        matched = np.abs(np.sort(xs) - np.sort(ys))
        estimate = float(matched.mean())
        se = _bootstrap_se(matched, boot_rng)

        if cfg.n == 0:
            Ef2 = predictive_expectation(model, history, f2)
            bound = bd.mean_bound_unconditional(N, Ef2)
        else:
            sample_mean_f = float(np.mean([f(v) for v in history.values]))
            post_mean_f = predictive_expectation(model, history, f)
            pred_f2 = predictive_expectation(model, history, f2)
            bound = bd.mean_bound_conditional(cfg.n, N, sample_mean_f, post_mean_f, pred_f2)

        slack = 3.0 * se
        return [
            ReportRow(
                cfg.experiment, N, cfg.n, rep,
                derive_key(cfg.master_seed, rep, _cell_stream(ni, 0)),
                estimate, se, bound, slack, estimate > bound + slack,
            )
        ]

    return ExperimentReport(_run_cells(cfg, worker), _metadata(cfg))


def _batched_f_means(
    model: ExchangeableModel,
    history: Sample,
    N: int,
    fvec: Callable[[np.ndarray], np.ndarray],
    draws: int,
    rng: RngState,
) -> np.ndarray:
    """Row-chunked f-means of full continuations (bounds peak memory)."""
    out = np.empty(draws)
    chunk = max(1, 4_000_000 // max(N, 1))
    done = 0
    while done < draws:
        take = min(chunk, draws - done)
        block = batched_sequences(model, history, N, take, rng)
        out[done : done + take] = fvec(block).mean(axis=1)
        done += take
    return out


# ---------------------------------------------------------------------------
# estimator_sweep
# ---------------------------------------------------------------------------

def run_estimator_sweep(cfg: ExperimentConfig, model: ExchangeableModel | None = None) -> ExperimentReport:
    """Gap between the finite-horizon and classical estimators across the
    horizon grid, with its algebraic triangle-inequality envelope.

    The estimator family follows f_spec: identity selects the mean,
    indicator(y) the CDF at y, square the variance, gini the mean
    absolute difference.  One history per replicate, shared across N.
    """
    model = model_from_spec(cfg.model) if model is None else model
    if not isinstance(model_space(model), RealLine):
        raise FiniPostError("config-error", "estimator_sweep needs a scalar model")
    _f, _fvec, name = _test_function(cfg.f_spec)

    def worker(ni: int, rep: int) -> list[ReportRow]:
        N = cfg.N_grid[ni]
        history = _replicate_history(cfg, model, rep)
        inputs = EstimatorInputs(model, history, N)
        n = cfg.n
        if name == "identity":
            pair = mean_estimators(inputs)
            envelope = (n / N) * (abs(pair.components["mu_bar_n"]) + abs(pair.components["mu_hat_n"]))
        elif name.startswith("indicator"):
            y = float(cfg.f_spec["y"])
            pair = cdf_estimators(inputs, y)
            envelope = (n / N) * (pair.components["ecdf_at_y"] + pair.components["pred_cdf_at_y"])
        elif name == "square":
            pair = variance_estimators(inputs)
            c = pair.components
            coef_s2 = (N - n + n / N - 1.0) / N
            coef_c12 = (N - n) * (N - n - 1.0) / N**2
            envelope = (
                (n / N) * abs(c["s2_bar_n"])
                + abs(coef_s2 - 1.0) * abs(c["s2_hat_n"])
                + (n / N) ** 2 * abs(c["c12_bar_n"])
                + abs(1.0 - coef_c12) * abs(c["c12_hat_n"])
                + 2.0 * (N - n) * n / N**2 * abs(c["mu_bar_n"] * c["mu_hat_n"])
            )
        elif name == "gini":
            pair = gini_estimators(inputs)
            c = pair.components
            coef_pair = ((N - n) ** 2 - (N - n)) / N**2
            envelope = (
                (n / N) ** 2 * abs(c["gini_bar_n"])
                + abs(1.0 - coef_pair) * abs(c["pair_abs_hat"])
                + 2.0 * (N - n) / N**2 * abs(c["cross_sum"])
            )
        else:
            raise FiniPostError("config-error", f"estimator_sweep cannot use f_spec {name!r}")
        gap = abs(pair.finitary - pair.classical)
        stderr = pair.components.get("stderr")
        slack = 1e-9 + 3.0 * (stderr or 0.0)
        return [
            ReportRow(
                cfg.experiment, N, cfg.n, rep,
                derive_key(cfg.master_seed, rep, _cell_stream(ni, 0)),
                gap, stderr, envelope, slack, gap > envelope + slack,
            )
        ]

    return ExperimentReport(_run_cells(cfg, worker), _metadata(cfg))


# ---------------------------------------------------------------------------
# median_law
# ---------------------------------------------------------------------------

def run_median_experiment(cfg: ExperimentConfig, model: ExchangeableModel | None = None) -> ExperimentReport:
    """Empirical CDF of the median of 2N+1 observations on a grid of
    predictive quantile points, against the tail inequality.

    The replicate index enumerates the grid: replicate r targets the
    predictive CDF level (r+1)/(replicates+1).  Each row estimates
    P{median <= x_r} from m_samples independent sequences.
    """
    model = model_from_spec(cfg.model) if model is None else model
    if not isinstance(model_space(model), RealLine):
        raise FiniPostError("config-error", "median_law needs a scalar model")
    if cfg.n != 0:
        raise FiniPostError("config-error", "median_law runs with n = 0 (prior law of the median)")
    history = Sample((), space=model_space(model))

    levels = [(r + 1) / (cfg.replicates + 1) for r in range(cfg.replicates)]

    def worker(ni: int, rep: int) -> list[ReportRow]:
        N = cfg.N_grid[ni]
        size = 2 * N + 1
        level = levels[rep]
        x = _predictive_quantile(model, level)
        F_x = predictive_expectation(model, history, lambda v: 1.0 if float(v) <= x else 0.0)
        rng = state_from_key(derive_key(cfg.master_seed, rep, _cell_stream(ni, 1)))
        block = batched_sequences(model, history, size, cfg.m_samples, rng)
        medians = np.median(block, axis=1)
        estimate = float(np.mean(medians <= x))
        se = math.sqrt(max(estimate * (1.0 - estimate), 1e-12) / cfg.m_samples)
        left_bound, right_bound = bd.median_tail_bounds(bd.MedianLawInputs(N, F_x), F_x, 1.0 - F_x)
        slack = 3.0 * se
        violated = estimate > left_bound + slack or (1.0 - estimate) > right_bound + slack
        return [
            ReportRow(
                cfg.experiment, N, cfg.n, rep,
                derive_key(cfg.master_seed, rep, _cell_stream(ni, 1)),
                estimate, se, left_bound, slack, violated,
            )
        ]

    return ExperimentReport(_run_cells(cfg, worker), _metadata(cfg))


def _predictive_quantile(model: ExchangeableModel, u: float) -> float:
    """Smallest x with prior predictive CDF at least u."""
    if isinstance(model, (FixedLawModel,)):
        return float(model.base.quantile(u))
    if isinstance(model, FiniteDirichletModel):
        atoms = np.asarray(model.atoms, dtype=float)
        order = np.argsort(atoms)
        w = np.asarray(model.concentration, dtype=float)
        cum = np.cumsum(w[order] / w.sum())
        return float(atoms[order][int(np.searchsorted(cum, u - 1e-12))])
    if isinstance(model, PolyaTreeModel):
        from .priors import polya_tree_marginal

        leaves = [format(i, f"0{model.depth}b") for i in range(2**model.depth)]
        cum = np.cumsum([polya_tree_marginal(model, leaf) for leaf in leaves])
        return model.leaf_point(leaves[int(np.searchsorted(cum, u - 1e-12))])
    return float(model.base.quantile(u))


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

_CSV_HEADER = "experiment,N,n,replicate,seed,estimate,stderr,bound,slack,violated"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def report_to_csv(report: ExperimentReport) -> str:
    lines = [_CSV_HEADER]
    for r in report.rows:
        stderr = "na" if r.stderr is None else _fmt(r.stderr)
        lines.append(
            f"{r.experiment},{r.N},{r.n},{r.replicate},{r.seed},"
            f"{_fmt(r.estimate)},{stderr},{_fmt(r.bound)},{_fmt(r.slack)},"
            f"{'true' if r.violated else 'false'}"
        )
    return "\n".join(lines) + "\n"


def report_to_json(report: ExperimentReport) -> str:
    obj = {
        "metadata": report.metadata,
        "rows": [
            {
                "experiment": r.experiment,
                "N": r.N,
                "n": r.n,
                "replicate": r.replicate,
                "seed": r.seed,
                "estimate": r.estimate,
                "stderr": r.stderr,
                "bound": r.bound,
                "slack": r.slack,
                "violated": r.violated,
            }
            for r in report.rows
        ],
    }
    return json.dumps(obj, indent=2) + "\n"


def emit(report: ExperimentReport, path: str, format: str = "csv") -> None:
    """Write the report; CSV columns are fixed, JSON mirrors rows plus
    metadata.  Floats keep 17 significant digits (exact round-trip)."""
    if format not in ("csv", "json"):
        raise FiniPostError("config-error", f"unknown format {format!r}")
    text = report_to_csv(report) if format == "csv" else report_to_json(report)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise FiniPostError("io-error", f"cannot write report to {path}: {exc}") from exc
