"""Command line entry point: ``tbmanifold <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, kernels
from .errors import ManifoldError
from .fne import ManifoldEstimate, estimate_m1, estimate_m2, estimate_m3
from .gmm import EmConfig
from .metrics import DEFAULT_METRIC_M, evaluate_estimate
from .moppca import MoppcaModel, extract_tangent_bundle, fit_moppca
from .rng import derive_seed
from .synth import ManifoldSpec, generate_dataset, read_csv, write_csv

log = logging.getLogger("tbmanifold")


def load_spec(value):
    """A preset name (spiral, sine, scurve, swissroll) or a ManifoldSpec JSON file."""
    p = Path(value)
    if p.suffix == ".json" or p.exists():
        return ManifoldSpec.from_dict(json.loads(p.read_text()))
    return ManifoldSpec.preset(value)


def _write_json(obj, out):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_generate(a):
    spec = load_spec(a.dataset)
    n = a.n or harness.GRID_N[spec.name][0]
    cloud = generate_dataset(spec, n, a.seed)
    write_csv(cloud, a.out, header=a.header)
    if a.spec_out:
        Path(a.spec_out).write_text(spec.to_json() + "\n")
    log.info("wrote %d points to %s", n, a.out)


def cmd_fit(a):
    X = read_csv(a.data, a.d)
    if a.k is not None:
        k = a.k
    else:
        k = max(1, int(round(X.n / a.n_over_k)))
    model = fit_moppca(X, k, a.d, EmConfig(tol=a.tol, max_iters=a.max_iters), a.seed)
    model.save(a.out)
    log.info("k=%d iterations=%d log-likelihood=%.6g", k, model.iterations_used,
             model.final_log_likelihood)


def cmd_estimate(a):
    model = MoppcaModel.load(a.model)
    X = read_csv(a.data, model.d)
    bundle = extract_tangent_bundle(model, X)
    method = a.method
    threshold, comps = a.threshold_log, a.gmm_components
    if method != "m1" and threshold is None:
        if a.dataset is None:
            raise SystemExit("m2/m3 need --threshold-log or --dataset for tuning")
        spec = load_spec(a.dataset)
        hold = generate_dataset(spec, max(1, int(round(0.2 * X.n))), derive_seed(a.seed, "holdout"))
        tuned = harness.tune_threshold(X, hold, method, bundle, a.search_iters,
                                       derive_seed(a.seed, "tune"), spec=spec)
        threshold = tuned.threshold_log
        comps = tuned.gmm_components or comps
        log.info("tuned threshold_log=%.6g gmm_components=%s", threshold, comps)
    if method == "m1":
        est = estimate_m1(bundle, X)
    elif method == "m2":
        est = estimate_m2(bundle, X, comps or 1, threshold, a.seed)
    else:
        est = estimate_m3(bundle, X, None, threshold, a.seed)
    est.save(a.out)
    log.info("%s estimate with %d neighborhoods", method, len(est))


def cmd_sample(a):
    est = ManifoldEstimate.load(a.estimate)
    write_csv(est.sample(a.n, a.seed), a.out, header=a.header)


def cmd_evaluate(a):
    spec = load_spec(a.dataset)
    est = ManifoldEstimate.load(a.estimate)
    report = evaluate_estimate(spec, est, a.metric_m, a.seed)
    _write_json(report.to_dict(), a.out)


def _sweep_configs(a):
    if a.config:
        data = json.loads(Path(a.config).read_text())
    else:
        data = {}
        if a.dataset:
            data["datasets"] = a.dataset
    for flag, key in (("n", "n_values"), ("n_over_k", "n_over_k"), ("method", "methods")):
        val = getattr(a, flag)
        if val:
            data[key] = val
    for flag, key in (("reps", "repetitions"), ("metric_m", "metric_m"), ("seed", "master_seed"),
                      ("search_iters", "search_iters")):
        val = getattr(a, flag)
        if val is not None:
            data[key] = val
    if a.reference:
        data["reference"] = a.reference
    if a.wall_time:
        data["record_wall_time"] = True
    return harness.configs_from_dict(data)


def _metric_m(value):
    return value if value == "n" else int(value)


def cmd_sweep(a):
    configs = _sweep_configs(a)
    log.info("%d configurations, backend=%s", len(configs), kernels.BACKEND_NAME)
    result = harness.run_sweep(configs, jobs=a.jobs)
    files = harness.emit_reports(result, a.out, plots=not a.no_plots)
    failed = sum(not r.ok for r in result.rows)
    log.info("wrote %d files to %s (%d failed rows)", len(files), a.out, failed)


def cmd_plot(a):
    from . import plots
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if a.results:
        summary = plots.summary_from_rows(harness.load_results_csv(a.results))
        written.extend(plots.render_heatmaps(summary, out))
        normed = plots.normalized_from_summary(summary)
        if normed:
            written.append(plots.normalized_histograms(normed, out / "normalized_hist.svg"))
    if a.estimate:
        est = ManifoldEstimate.load(a.estimate)
        train = read_csv(a.data, est.d).points if a.data else np.empty((0, est.D))
        written.append(plots.scatter_overlay(train, est.sample(a.samples, a.seed).points,
                                             out / "scatter.svg", est.method.upper()))
    if not written:
        raise SystemExit("plot needs a results CSV and/or --estimate")
    for p in written:
        log.info("wrote %s", p)


def build_parser():
    p = argparse.ArgumentParser(prog="tbmanifold", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=out_required)

    g = sub.add_parser("generate", help="sample a dataset to CSV")
    g.add_argument("--dataset", default="spiral", help="preset name or spec JSON")
    g.add_argument("--n", type=int)
    g.add_argument("--header", action="store_true")
    g.add_argument("--spec-out", help="also write the ManifoldSpec JSON here")
    common(g)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit MoPPCA to a CSV, write model JSON")
    f.add_argument("data")
    f.add_argument("--d", type=int, required=True, help="intrinsic dimension")
    grp = f.add_mutually_exclusive_group()
    grp.add_argument("--k", type=int)
    grp.add_argument("--n-over-k", type=int, default=55)
    f.add_argument("--tol", type=float, default=1e-6)
    f.add_argument("--max-iters", type=int, default=500)
    common(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("estimate", help="build a manifold estimate from a model")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--method", choices=harness.METHODS, default="m1")
    e.add_argument("--threshold-log", type=float)
    e.add_argument("--gmm-components", type=int)
    e.add_argument("--dataset", help="tune m2/m3 against this manifold when no threshold is given")
    e.add_argument("--search-iters", type=int, default=10)
    common(e)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("sample", help="draw points from an estimate")
    s.add_argument("estimate")
    s.add_argument("--n", type=int, default=DEFAULT_METRIC_M)
    s.add_argument("--header", action="store_true")
    common(s)
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("evaluate", help="compare an estimate with the true manifold")
    v.add_argument("estimate")
    v.add_argument("--dataset", required=True, help="preset name or spec JSON")
    v.add_argument("--metric-m", type=int, default=DEFAULT_METRIC_M)
    common(v, out_required=False)
    v.set_defaults(func=cmd_evaluate)

    w = sub.add_parser("sweep", help="run a sweep and write reports")
    w.add_argument("config", nargs="?", help="sweep config JSON")
    w.add_argument("--dataset", nargs="+")
    w.add_argument("--n", type=int, nargs="+")
    w.add_argument("--n-over-k", type=int, nargs="+")
    w.add_argument("--method", choices=harness.METHODS, nargs="+")
    w.add_argument("--reps", type=int)
    w.add_argument("--metric-m", type=_metric_m, help='points per side, or "n" for the training size')
    w.add_argument("--reference", choices=["true", "noisy"],
                   help="compare with noise-free (default) or fresh noisy manifold samples")
    w.add_argument("--search-iters", type=int)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--wall-time", action="store_true", help="fill wall_time_s in results.csv")
    w.add_argument("--no-plots", action="store_true")
    w.add_argument("--seed", type=int)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="render SVG figures")
    pl.add_argument("results", nargs="?", help="results.csv from a sweep")
    pl.add_argument("--estimate")
    pl.add_argument("--data", help="training CSV for the scatter overlay")
    pl.add_argument("--samples", type=int, default=3000)
    common(pl)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ManifoldError, ValueError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
