"""Command-line experiment runner.

    bpnm run --config painleve [--seed 3] [--output-dir out] [--workers 2] [--paper-scale]
    bpnm validate --config my.json

``--config`` takes a path or the name of a bundled config (``bpnm list``
prints them).  Exit codes: 0 success, 2 config error, 3 sampler failure,
4 numerical (conditioning) error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .chebbasis import BasisSet, points_grid
from .conjugate import ConditioningError, KernelSpec, bq_posterior
from .decision import discrete_counterexample, mc_bayes_risk, optimal_trapezium, risk_ratio
from .disintegration import MalaConfig, RelaxationKernel, SamplerFailure, TemperatureSchedule, pt_nd, smc_nd
from .evidence import EvidenceUnavailableError, estimate_log_evidence
from .infoops import painleve_negative_slope, painleve_operator, poisson_operator
from .pipeline import (CoherenceDeclaration, check_coherence, dependence_graph, distributed_integration,
                       distributed_integration_sources, distributed_integration_witness, execute, joint_quadrature)
from .seriesprior import ScaleSequence, SeriesPrior, make_rng

__all__ = ["main", "run_experiment", "EXIT_OK", "EXIT_CONFIG", "EXIT_SAMPLER", "EXIT_NUMERICAL"]

EXIT_OK, EXIT_CONFIG, EXIT_SAMPLER, EXIT_NUMERICAL = 0, 2, 3, 4

FUNCTIONS = {
    "sin": lambda t: np.sin(3.0 * t),
    "exp": lambda t: np.expm1(t),
    "sqrt": lambda t: np.sqrt(t),
    "poly": lambda t: t * (1.0 - t) + t**3,
}
FUNCTION_INTEGRALS = {
    "sin": (1.0 - np.cos(3.0)) / 3.0,
    "exp": np.e - 2.0,
    "sqrt": 2.0 / 3.0,
    "poly": 1.0 / 6.0 + 0.25,
}

_QUAD = 61


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_samples(path: Path, samples: np.ndarray, prefix: str = "u") -> None:
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        names = [prefix] if samples.shape[1] == 1 and prefix == "q" else [f"{prefix}_{i}" for i in
                                                                          range(samples.shape[1])]
        w.writerow(["sample_index"] + names)
        for i, row in enumerate(samples):
            w.writerow([i] + [_fmt(v) for v in row])


def write_grid(path: Path, points: np.ndarray, mean: np.ndarray, std: np.ndarray) -> None:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    cols = ["t"] if points.shape[1] == 1 else [f"t{i + 1}" for i in range(points.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["mean", "std"])
        for p, m, s in zip(points, mean, std):
            w.writerow([_fmt(v) for v in p] + [_fmt(m), _fmt(s)])


def write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------------------
# experiments


def _prior(cfg, basis) -> SeriesPrior:
    p = cfg["prior"]
    g = p["gamma"]
    return SeriesPrior(p["family"], ScaleSequence(g["kind"], g["alpha"], g["rate"]), basis, p.get("offset", 0.0))


def _run_sampler(cfg, prior, A, cons, seed, workers):
    s = cfg["sampler"]
    sch = s["schedule"]
    schedule = TemperatureSchedule.log_uniform(sch["start"], sch["stop"], sch["m"])
    mala = MalaConfig(tau0=s.get("tau0", "auto"), steps=s.get("steps", 10), scale=s.get("scale", 0.5),
                      preconditioner=s.get("preconditioner", "gamma"))
    phi = RelaxationKernel(s.get("relaxation", "sqexp"))
    summary = {}
    if s["algorithm"] == "smc":
        res = smc_nd(prior, A, phi, schedule, s["particles"], mala, seed=seed, constraints=cons, workers=workers)
        if res.failed:
            raise SamplerFailure("particle weights degenerated", res.ensemble.failed_at)
        samples = res.ensemble.states
        summary["ess_history"] = list(res.ensemble.ess)
        summary["acceptance"] = list(res.ensemble.acceptance)
    else:
        res = pt_nd(prior, A, phi, schedule, s["iterations"], mala, seed=seed, constraints=cons,
                    burn_in=s.get("burn_in", 0), thin=s.get("thin", 1), replicas=s.get("replicas", 1))
        samples = res.chains.reshape(-1, prior.n_terms)
        summary["acceptance"] = res.acceptance.tolist()
        summary["swap_rate"] = res.swap_rate.tolist()
    summary["rungs"] = [r.to_dict() for r in res.history]
    if phi.kind == "sqexp":
        try:
            summary["evidence"] = estimate_log_evidence(res).to_dict()
        except EvidenceUnavailableError as exc:
            raise SamplerFailure(str(exc), exc.rung) from None
    return samples, summary


def _field_summary(prior, samples, points):
    B = prior.basis.design(points)
    vals = samples @ B.T + prior.offset
    return vals.mean(axis=0), vals.std(axis=0, ddof=1)


def run_painleve(cfg, seed, workers):
    info = cfg["information"]
    n_terms = cfg["prior"]["N"]
    basis = BasisSet.line(n_terms - 1, 0.0, 10.0)
    prior = _prior(cfg, basis)
    A = painleve_operator(info.get("n", 17) - 2, 10.0, info.get("threshold", 1e6))
    cons = (painleve_negative_slope(),) if info.get("negative_slope", False) else ()
    samples, summary = _run_sampler(cfg, prior, A, cons, seed, workers)
    t = np.linspace(0.0, 10.0, 201)
    mean, std = _field_summary(prior, samples, t)
    return samples, (t, mean, std), summary


def run_poisson(cfg, seed, workers):
    info = cfg["information"]
    basis = BasisSet.triangle(cfg["prior"]["N"])
    prior = _prior(cfg, basis)
    A = poisson_operator(info.get("n", 16), info.get("threshold"))
    samples, summary = _run_sampler(cfg, prior, A, (), seed, workers)
    pts = points_grid((0.0, 0.0), (1.0, 1.0), 21)
    mean, std = _field_summary(prior, samples, pts)
    return samples, (pts, mean, std), summary


def _kernel(name, lengthscale=None) -> KernelSpec:
    if name == "sqexp":
        return KernelSpec.sqexp(lengthscale)
    return getattr(KernelSpec, name)()


def run_quadrature(cfg, seed, workers):
    q = cfg.get("quadrature", {})
    kern = _kernel(q.get("kernel", "wiener"), q.get("lengthscale"))
    n = q.get("n", 5)
    f = FUNCTIONS[q.get("function", "sin")]
    knots = 2.0 * np.arange(1, n + 1) / (2 * n + 1) if kern.kind == "wiener" else (np.arange(n) + 0.5) / n
    post = bq_posterior(kern, knots, f(knots), (0.0, 1.0))
    draws = post.sample(make_rng(seed, _QUAD), q.get("draws", 1000))
    # pointwise posterior of x on a grid
    t = np.linspace(0.0, 1.0, 101)
    K = kern(knots, knots)
    Ks = kern(t, knots)
    sol = np.linalg.solve(K + 1e-10 * np.trace(K) / n * np.eye(n), np.column_stack([f(knots), Ks.T]))
    mean = Ks @ sol[:, 0]
    var = np.diag(kern(t, t)) - np.sum(Ks * sol[:, 1:].T, axis=1)
    summary = {"knots": knots, "posterior_mean": post.mean, "posterior_variance": post.cov,
               "true_integral": FUNCTION_INTEGRALS[q.get("function", "sin")]}
    return draws[:, None], (t, mean, np.sqrt(np.maximum(var, 0.0))), summary


def run_pipeline_demo(cfg, seed, workers):
    p = cfg.get("pipeline", {})
    m = p.get("m", 3)
    kern = _kernel(p.get("kernel", "wiener"))
    f = FUNCTIONS[p.get("function", "sin")]
    P, methods = distributed_integration(m, kern)
    vals = f(np.arange(1, 2 * m + 1) / (2.0 * m))
    src = distributed_integration_sources(m, vals)
    analytic = execute(P, methods, src, "analytic")
    anc = execute(P, methods, src, "ancestral", n_samples=p.get("paths", 10_000), seed=seed)
    joint = joint_quadrature(m, kern, vals)
    G = dependence_graph(P)
    rep = check_coherence(G, CoherenceDeclaration(witness=distributed_integration_witness(m, kern)))
    summary = {
        "analytic": {"mean": analytic.mean, "variance": analytic.cov},
        "ancestral": {"mean": anc.mean, "variance": anc.var, "mean_se": anc.mean_se},
        "joint": {"mean": joint.mean, "variance": joint.cov},
        "dependence_graph": {"nodes": list(G.nodes), "edges": sorted(map(list, G.edges))},
        "coherence": {"status": rep.status, "incoherent": [str(s) for s in rep.incoherent],
                      "verified": [str(s) for s in rep.verified]},
    }
    return anc.samples, None, summary


def run_risk(cfg, seed, workers):
    r = cfg.get("risk", {})
    draws = r.get("draws", 100_000)
    rows = []
    kern = KernelSpec.wiener()
    for n in r.get("n_values", [1, 2, 3]):
        t, w, risk = optimal_trapezium(n, r.get("starts", 20), seed)
        ratio, ratio_se = risk_ratio(kern, t, n_draws=draws, seed=seed)
        br = mc_bayes_risk(kern, "bayes_rule", t, n_draws=draws, seed=seed)
        rows.append([n, risk, 1.0 / (3.0 * (2 * n + 1) ** 2), br.bayes_risk, br.standard_error, ratio, ratio_se,
                     " ".join(_fmt(x) for x in t), " ".join(_fmt(x) for x in w)])
    header = ["n", "optimal_risk", "closed_form_risk", "mc_bayes_rule_risk", "mc_se", "bpnm_to_bayes_rule_ratio",
              "ratio_se", "knots", "weights"]
    return None, None, {"risk_table": {"header": header, "rows": rows}}


def run_counterexample(cfg, seed, workers):
    table = discrete_counterexample()
    rows = [[kind, "{" + ",".join(S) + "}", str(v)] for (kind, S), v in table.items()]
    for r in rows:
        print(f"{r[0]:>9s}  S={r[1]:<22s} risk={r[2]}")
    return None, None, {"risk_table": {"header": ["method", "S", "risk"], "rows": rows}}


RUNNERS = {
    "painleve": run_painleve,
    "poisson": run_poisson,
    "quadrature": run_quadrature,
    "pipeline-demo": run_pipeline_demo,
    "risk": run_risk,
    "counterexample": run_counterexample,
}


def run_experiment(cfg: dict, output_dir, workers: int = 1) -> dict:
    """Run a validated config and write its outputs; returns the summary dict."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = {"samples": "samples.csv", "grid": "grid.csv", "summary": "summary.json", "risk_table": "risk.csv"}
    names.update(cfg.get("output", {}))
    seed = cfg.get("seed", 0)
    t0 = time.perf_counter()
    samples, grid, summary = RUNNERS[cfg["experiment"]](cfg, seed, workers)
    wall = time.perf_counter() - t0
    if samples is not None:
        write_samples(out / names["samples"], samples, "q" if samples.shape[1] == 1 else "u")
    if grid is not None:
        write_grid(out / names["grid"], *grid)
    if "risk_table" in summary:
        write_table(out / names["risk_table"], summary["risk_table"]["header"], summary["risk_table"]["rows"])
    summary = dict(summary, config=cfg, seed=seed, wall_time=wall, experiment=cfg["experiment"])
    with open(out / names["summary"], "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bpnm", description="Bayesian probabilistic numerical methods experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config path or bundled config name")
        p.add_argument("--paper-scale", action="store_true", help="apply the config's paper-scale overrides")
        if name == "run":
            p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
            p.add_argument("--output-dir", default=".", help="directory for the output files")
            p.add_argument("--workers", type=int, default=1, help="threads for particle moves")
    sub.add_parser("list", help="print bundled config names")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list":
        root = Path(str(cfgmod.resources.files("bpnm").joinpath("configs")))
        for p in sorted(root.rglob("*.json")):
            print(p.relative_to(root).with_suffix(""))
        return EXIT_OK
    try:
        cfg = cfgmod.load_config(args.config, args.paper_scale)
    except cfgmod.ConfigError as exc:
        print(f"config error in {args.config}:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: valid")
        return EXIT_OK
    if args.seed is not None:
        if args.seed < 0:
            print("config error: --seed must be nonnegative", file=sys.stderr)
            return EXIT_CONFIG
        cfg["seed"] = args.seed
    if args.workers < 1:
        print("config error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_experiment(cfg, args.output_dir, args.workers)
    except SamplerFailure as exc:
        print(f"sampler failure: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    except (ConditioningError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
