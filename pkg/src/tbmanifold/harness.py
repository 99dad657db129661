"""Experiment protocol: sweeps, threshold tuning, repetitions, reports.

One repetition of one configuration:

1. derive the repetition seed from ``(master_seed, dataset, repetition)``;
2. draw ``n`` training points and an independent hold-out set;
3. fit MoPPCA with ``k = round(n / n_over_k)`` and extract the bundle;
4. tune the method's hyperparameters by random search (M2, M3);
5. build the estimate and compare it with a true-manifold sample.

The repetition seed does not depend on ``n``, ``n/k`` or the method, so runs
that differ only in those are paired.  Methods sharing a data set and fit
reuse one MoPPCA model.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ManifoldError, TuningFailure
from .fne import estimate_m1, estimate_m2, estimate_m3, fit_latent_densities, frame_latents
from .gmm import EmConfig, fit_gmm
from .metrics import DEFAULT_METRIC_M, compare, evaluate_estimate
from .moppca import extract_tangent_bundle, fit_moppca, responsibilities
from .rng import derive_seed, make_rng
from .synth import ManifoldSpec, PointCloud, generate_dataset, sample_true_manifold

log = logging.getLogger(__name__)

METHODS = ("m1", "m2", "m3")

CSV_COLUMNS = [
    "dataset", "n", "n_over_k", "k", "method", "repetition", "seed",
    "threshold_log", "gmm_components", "sym_ere", "hausdorff", "asym_ere",
    "wall_time_s", "error",
]

# training-set sizes per dataset
GRID_N = {
    "spiral": [1500, 1700, 1900, 2100, 2300],
    "swissroll": [1500, 1700, 1900, 2100, 2300],
    "sine": [700, 900, 1100, 1300, 1500],
    "scurve": [700, 900, 1100, 1300, 1500],
}
GRID_N_OVER_K = [55, 65, 75, 85, 95]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: ManifoldSpec
    n: int
    n_over_k: int
    method: str = "m1"
    repetitions: int = 10
    search_iters: int = 10
    holdout_fraction: float = 0.2
    metric_m: int = DEFAULT_METRIC_M
    master_seed: int = 0
    tune_m: int = 5000
    gmm_choices: tuple = (1, 2, 3)
    percentile_range: tuple = (1.0, 60.0)
    ambient: str = "moppca"  # or "gmm": independently fitted ambient mixture
    reference: str = "true"  # or "noisy": compare with a fresh noisy sample
    record_wall_time: bool = False
    em: EmConfig = EmConfig()

    def __post_init__(self):
        if isinstance(self.dataset, str):
            object.__setattr__(self, "dataset", ManifoldSpec.preset(self.dataset))
        object.__setattr__(self, "method", self.method.lower())
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.k < 1:
            raise ValueError("round(n / n_over_k) must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in (0, 1)")

    @property
    def k(self):
        return int(round(self.n / self.n_over_k))

    @property
    def key(self):
        return (self.dataset.name, self.n, self.n_over_k, self.method)


@dataclass
class Row:
    dataset: str
    n: int
    n_over_k: int
    k: int
    method: str
    repetition: int
    seed: int
    threshold_log: float | None = None
    gmm_components: int | None = None
    sym_ere: float | None = None
    hausdorff: float | None = None
    asym_ere: float | None = None
    wall_time_s: float | None = None
    error: str = ""
    report: object = field(default=None, repr=False)

    @property
    def ok(self):
        return not self.error

    @property
    def key(self):
        return (self.dataset, self.n, self.n_over_k, self.method)

    def csv_fields(self, with_time):
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(v)
            return str(v)
        vals = {c: getattr(self, c) for c in CSV_COLUMNS}
        if not with_time:
            vals["wall_time_s"] = None
        return [fmt(vals[c]) for c in CSV_COLUMNS]


def rep_seed(master_seed, dataset_name, repetition):
    return derive_seed(master_seed, dataset_name, repetition)


# ---------------------------------------------------------------- tuning


def random_search(candidates, objective):
    """Evaluate every candidate; return ``(best_index, scores)``.

    Candidates whose objective raises a :class:`ManifoldError` score +inf.
    Ties go to the earliest candidate.
    """
    scores = []
    for cand in candidates:
        try:
            scores.append(float(objective(cand)))
        except ManifoldError as exc:
            log.debug("candidate %r failed: %s", cand, exc)
            scores.append(math.inf)
    if not scores or not np.isfinite(np.min(scores)):
        raise TuningFailure("every candidate produced an unusable estimate")
    return int(np.argmin(scores)), scores


def holdout_latent_log_densities(bundle, fits, holdout):
    """Log-density of each hold-out point under the latent GMM of its frame."""
    hard = np.argmax(responsibilities(bundle.model, holdout), axis=1)
    pts = holdout.points if isinstance(holdout, PointCloud) else holdout
    out = []
    for i, (chart, gmm) in enumerate(zip(bundle.frames, fits.gmms)):
        sel = hard == i
        if gmm is None or not sel.any():
            continue
        out.append(gmm.log_density(chart.forward(pts[sel])))
    return np.concatenate(out) if out else np.empty(0)


@dataclass
class Tuned:
    threshold_log: float | None = None
    gmm_components: int | None = None
    score: float | None = None

    def as_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None and k != "score"}


def tune_threshold(train, holdout, method, bundle, search_iters, seed, *, spec,
                   tune_m=5000, gmm_choices=(1, 2, 3), percentile_range=(1.0, 60.0),
                   ambient_density=None, em=EmConfig(), objective=None):
    """Random search over the density threshold (and, for M2, latent GMM size).

    Thresholds are drawn uniformly in log-density between the given
    percentiles of the hold-out log-densities under the relevant fitted
    density.  The score is the symmetric ERE against a true-manifold sample
    of ``tune_m`` points; ``objective(estimate)`` overrides it.
    """
    method = method.lower()
    if method == "m1":
        return Tuned()
    if holdout is None or len(holdout) == 0:
        raise ValueError("tuning needs a non-empty hold-out set")
    rng = make_rng(derive_seed(seed, "candidates"))
    lo_pct, hi_pct = percentile_range
    est_seed = derive_seed(seed, "estimate")

    if objective is None:
        U = sample_true_manifold(spec, tune_m, derive_seed(seed, "truth"))
        sample_seed = derive_seed(seed, "sample")

        def objective(est):
            return compare(U, est.sample(tune_m, sample_seed)).symmetric_ere

    if method == "m2":
        fits_by_m = {}
        ranges = {}

        def fits_for(m):
            if m not in fits_by_m:
                fits = fit_latent_densities(bundle, train, m, em, derive_seed(seed, "latent", m))
                fits_by_m[m] = fits
                dens = holdout_latent_log_densities(bundle, fits, holdout)
                if dens.size == 0:
                    dens = np.concatenate([g.log_density(Y) for g, Y in
                                           zip(fits.gmms, frame_latents(bundle, train))
                                           if g is not None])
                ranges[m] = np.percentile(dens, [lo_pct, hi_pct])
            return fits_by_m[m]

        candidates = []
        for _ in range(search_iters):
            m = int(rng.choice(gmm_choices))
            fits_for(m)
            candidates.append(Tuned(float(rng.uniform(*ranges[m])), m))

        def run(c):
            est = estimate_m2(bundle, train, c.gmm_components, c.threshold_log, est_seed,
                              fits=fits_by_m[c.gmm_components])
            return objective(est)
    elif method == "m3":
        if ambient_density is None:
            ambient_density = bundle.model.to_gmm()
        pts = holdout.points if isinstance(holdout, PointCloud) else holdout
        lo, hi = np.percentile(ambient_density.log_density(pts), [lo_pct, hi_pct])
        candidates = [Tuned(float(rng.uniform(lo, hi))) for _ in range(search_iters)]

        def run(c):
            est = estimate_m3(bundle, train, ambient_density, c.threshold_log, est_seed)
            return objective(est)
    else:
        raise ValueError(f"unknown method {method!r}")

    best, scores = random_search(candidates, run)
    out = candidates[best]
    out.score = scores[best]
    return out


# ---------------------------------------------------------------- runs


def _build(method, bundle, train, tuned, seed, ambient_density, em):
    if method == "m1":
        return estimate_m1(bundle, train)
    if method == "m2":
        return estimate_m2(bundle, train, tuned.gmm_components, tuned.threshold_log, seed,
                           config=em)
    return estimate_m3(bundle, train, ambient_density, tuned.threshold_log, seed)


def _run_task(configs, repetition):
    """All methods of one (dataset, n, n/k) cell for one repetition."""
    base = configs[0]
    spec = base.dataset
    seed = rep_seed(base.master_seed, spec.name, repetition)
    rows = [Row(spec.name, c.n, c.n_over_k, c.k, c.method, repetition, seed) for c in configs]
    overlays = {}
    t0 = time.perf_counter()
    try:
        train = generate_dataset(spec, base.n, derive_seed(seed, "data"))
        n_hold = max(1, int(round(base.holdout_fraction * base.n)))
        holdout = generate_dataset(spec, n_hold, derive_seed(seed, "holdout"))
        model = fit_moppca(train, base.k, spec.d, base.em, derive_seed(seed, "fit"))
        bundle = extract_tangent_bundle(model, train)
    except ManifoldError as exc:
        for row in rows:
            row.error = f"{type(exc).__name__}: {exc}"
            row.wall_time_s = time.perf_counter() - t0
        return rows, overlays
    shared = time.perf_counter() - t0
    ambient_gmm = None
    for cfg, row in zip(configs, rows):
        t1 = time.perf_counter()
        try:
            ambient = None
            if cfg.method == "m3":
                if cfg.ambient == "gmm":
                    if ambient_gmm is None:
                        ambient_gmm = fit_gmm(train.points, cfg.k, cfg.em,
                                              derive_seed(seed, "ambient"))
                    ambient = ambient_gmm
                else:
                    ambient = model.to_gmm()
            tuned = tune_threshold(
                train, holdout, cfg.method, bundle, cfg.search_iters, derive_seed(seed, "tune"),
                spec=spec, tune_m=cfg.tune_m, gmm_choices=cfg.gmm_choices,
                percentile_range=cfg.percentile_range, ambient_density=ambient, em=cfg.em)
            est = _build(cfg.method, bundle, train, tuned, derive_seed(seed, "estimate"),
                         ambient, cfg.em)
            eval_seed = derive_seed(seed, "eval")
            if cfg.reference == "noisy":
                U = generate_dataset(spec, cfg.metric_m, derive_seed(eval_seed, "true"))
                V = est.sample(cfg.metric_m, derive_seed(eval_seed, "estimate"))
                report = compare(U, V, seeds=(U.seed, V.seed))
            else:
                report = evaluate_estimate(spec, est, cfg.metric_m, eval_seed)
            row.threshold_log = tuned.threshold_log
            row.gmm_components = tuned.gmm_components
            row.sym_ere = report.symmetric_ere
            row.hausdorff = report.hausdorff
            row.asym_ere = report.asymmetric_ere
            row.report = report
            overlays[row.key] = (train.points, est.sample(min(3000, cfg.metric_m),
                                                          derive_seed(seed, "overlay")).points)
        except ManifoldError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        row.wall_time_s = shared + time.perf_counter() - t1
    return rows, overlays


def _task_entry(args):
    return _run_task(*args)


@dataclass
class SweepResult:
    configs: list
    rows: list
    overlays: dict = field(default_factory=dict, repr=False)

    def rows_for(self, key):
        return [r for r in self.rows if r.key == key]

    def summary(self):
        """Per configuration: mean, population std and best (min) symmetric ERE."""
        out = []
        for cfg in self.configs:
            rows = self.rows_for(cfg.key)
            ok = [r for r in rows if r.ok]
            vals = np.array([r.sym_ere for r in ok], dtype=float)
            haus = np.array([r.hausdorff for r in ok], dtype=float)
            entry = {
                "dataset": cfg.dataset.name, "n": cfg.n, "n_over_k": cfg.n_over_k,
                "k": cfg.k, "method": cfg.method, "repetitions": len(rows),
                "failed": len(rows) - len(ok),
            }
            if len(ok):
                best = ok[int(np.argmin(vals))]
                entry.update(
                    mean_sym_ere=float(vals.mean()), std_sym_ere=float(vals.std()),
                    best_sym_ere=float(vals.min()), best_repetition=best.repetition,
                    mean_hausdorff=float(haus.mean()), std_hausdorff=float(haus.std()),
                    best_hausdorff=float(best.hausdorff),
                )
            out.append(entry)
        return out

    def normalized(self):
        """Min-max normalised best ERE across methods for every (dataset, n, n/k)."""
        cells = {}
        for entry in self.summary():
            if "best_sym_ere" not in entry:
                continue
            cell = (entry["dataset"], entry["n"], entry["n_over_k"])
            cells.setdefault(cell, {})[entry["method"]] = entry["best_sym_ere"]
        out = {}
        for cell, by_method in cells.items():
            if len(by_method) < 2:
                continue
            methods = sorted(by_method)
            normed = min_max_normalize([by_method[m] for m in methods])
            out[cell] = dict(zip(methods, normed))
        return out


def run_sweep(configs, jobs=1):
    """Run every configuration; output order follows ``configs`` then repetition."""
    configs = list(configs)
    groups = {}
    for cfg in configs:
        cell = (cfg.dataset, cfg.n, cfg.n_over_k, cfg.repetitions, cfg.master_seed)
        groups.setdefault(cell, []).append(cfg)
    tasks = [(group, rep) for group in groups.values()
             for rep in range(group[0].repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task_entry, tasks))
    else:
        results = [_run_task(*t) for t in tasks]
    by_key = {}
    overlays_all = {}
    for rows, overlays in results:
        for row in rows:
            by_key.setdefault(row.key, []).append(row)
        for key, ov in overlays.items():
            overlays_all.setdefault(key, {})[rows[0].repetition] = ov
    ordered = []
    for cfg in configs:
        ordered.extend(sorted(by_key.get(cfg.key, []), key=lambda r: r.repetition))
    result = SweepResult(configs, ordered)
    for entry in result.summary():
        key = (entry["dataset"], entry["n"], entry["n_over_k"], entry["method"])
        if "best_repetition" in entry:
            result.overlays[key] = overlays_all[key][entry["best_repetition"]]
    return result


def run_experiment(config, jobs=1):
    """All repetitions of one configuration."""
    return run_sweep([config], jobs=jobs)


def min_max_normalize(values):
    """``(v - min) / (max - min)``; all-equal input maps to zeros."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return [0.0] * len(v)
    return [float(x) for x in (v - lo) / (hi - lo)]


# ---------------------------------------------------------------- config files


def configs_from_dict(data):
    """Expand a sweep description into ExperimentConfigs.

    ``n_values`` may be a list (shared by all datasets) or a mapping from
    dataset name to list; it defaults to the standard grid per dataset.
    ``metric_m`` may be the string ``"n"`` to evaluate with as many points
    as the training set.
    """
    datasets = data.get("datasets", list(GRID_N))
    n_values = data.get("n_values")
    nks = data.get("n_over_k", GRID_N_OVER_K)
    methods = data.get("methods", list(METHODS))
    common = {k: data[k] for k in (
        "repetitions", "search_iters", "holdout_fraction", "metric_m", "master_seed",
        "tune_m", "ambient", "reference", "record_wall_time") if k in data}
    for k in ("gmm_choices", "percentile_range"):
        if k in data:
            common[k] = tuple(data[k])
    out = []
    for name in datasets:
        if isinstance(n_values, dict):
            ns = n_values[name]
        elif n_values is not None:
            ns = n_values
        else:
            ns = GRID_N[name]
        spec = ManifoldSpec.preset(name)
        for n in ns:
            for nk in nks:
                for method in methods:
                    kw = dict(common)
                    if kw.get("metric_m") == "n":
                        kw["metric_m"] = int(n)
                    out.append(ExperimentConfig(spec, int(n), int(nk), method, **kw))
    return out


def load_sweep_config(path):
    with open(path) as fh:
        return configs_from_dict(json.load(fh))


# ---------------------------------------------------------------- reports


def results_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in result.rows:
        cfg_time = any(c.record_wall_time for c in result.configs if c.key == row.key)
        writer.writerow(row.csv_fields(cfg_time))
    return buf.getvalue()


def emit_reports(result, out_dir, plots=True):
    """Write results.csv, summary.json, timings.json and SVG figures."""
    if not result.rows:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    (out / "results.csv").write_text(results_csv(result))
    written.append(out / "results.csv")
    summary = {
        "configs": result.summary(),
        "normalized": [
            {"dataset": cell[0], "n": cell[1], "n_over_k": cell[2], **vals}
            for cell, vals in result.normalized().items()
        ],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    written.append(out / "summary.json")
    timings = [{"dataset": r.dataset, "n": r.n, "n_over_k": r.n_over_k, "method": r.method,
                "repetition": r.repetition, "wall_time_s": r.wall_time_s} for r in result.rows]
    (out / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    written.append(out / "timings.json")
    if plots:
        from . import plots as _plots
        written.extend(_plots.render_all(result, out))
    return written


def load_results_csv(path):
    """Rows of a results.csv as dicts with numeric fields converted."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            for col in ("n", "n_over_k", "k", "repetition", "seed", "gmm_components"):
                rec[col] = int(rec[col]) if rec[col] else None
            for col in ("threshold_log", "sym_ere", "hausdorff", "asym_ere", "wall_time_s"):
                rec[col] = float(rec[col]) if rec[col] else None
            rows.append(rec)
    return rows


def with_overrides(config, **kw):
    return replace(config, **kw)
