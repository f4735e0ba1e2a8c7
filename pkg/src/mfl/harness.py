"""Run one configured experiment and write its artifacts.

Artifacts are written to a sibling temporary directory which replaces the
output directory only after every file is complete, so a failed run leaves
nothing behind.  The manifest records SHA-256 hashes of the canonical config
and of every artifact; ``RunManifest.digest`` covers exactly those hashes
and is what determinism checks compare (wall-clock time is recorded but not
part of the digest).
"""
from __future__ import annotations

import hashlib
import platform
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from mfl import diagnostics as dg
from mfl import io
from mfl.errors import ExperimentError, MflError
from mfl.estimate import mle_linear, mle_numeric
from mfl.kernels import BACKEND
from mfl.likelihood import empirical_fisher, log_likelihood_discrete
from mfl.models import EmpiricalMeasure
from mfl.parallel import map_reps
from mfl.simulate import draw_noise, simulate_particles

MANIFEST = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    kind: str
    config_hash: str
    artifacts: dict  # file name -> sha256
    versions: dict
    wall_clock: float
    passed: bool | None
    summary: dict = field(default_factory=dict)
    children: tuple = ()

    @property
    def digest(self):
        h = hashlib.sha256(self.config_hash.encode())
        for name in sorted(self.artifacts):
            h.update(f"{name}={self.artifacts[name]}".encode())
        for child in self.children:
            h.update(child.digest.encode())
        return h.hexdigest()

    def to_dict(self):
        return {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "artifacts": self.artifacts,
            "versions": self.versions,
            "wall_clock_seconds": self.wall_clock,
            "passed": self.passed,
            "summary": self.summary,
            "digest": self.digest,
            "children": [c.to_dict() for c in self.children],
        }


def config_hash(config):
    return hashlib.sha256(io.canonical_json(config.canonical()).encode()).hexdigest()


def versions():
    from mfl import __version__

    return {"mfl": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": BACKEND}


def run(config, out=None, threads=None):
    """Execute ``config`` and write artifacts into ``out`` (or the config's ``out``)."""
    out = Path(out or config.get("out") or f"mfl-{config.kind}")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    start = time.perf_counter()
    try:
        children = config.children()
        if len(children) == 1 and not config.sweep:
            manifest = _run_single(config, tmp, threads, start)
        else:
            subs = []
            for idx, child in enumerate(children):
                sub = tmp / f"child_{idx:03d}"
                sub.mkdir()
                subs.append(_run_single(child, sub, threads, time.perf_counter()))
            passes = [c.passed for c in subs if c.passed is not None]
            manifest = RunManifest(config.kind, config_hash(config), {}, versions(),
                                   time.perf_counter() - start,
                                   all(passes) if passes else None, {"children": len(subs)},
                                   tuple(subs))
            io.write_json(tmp / MANIFEST, manifest.to_dict())
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    tmp.rename(out)
    return manifest


def _run_single(config, outdir, threads, start):
    try:
        summary, passed = RUNNERS[config.kind](config, outdir, threads)
    except MflError as exc:
        exc.args = (_context(config) + str(exc),) + exc.args[1:]
        raise
    artifacts = {p.name: io.sha256_file(p) for p in sorted(outdir.iterdir()) if p.is_file()}
    manifest = RunManifest(config.kind, config_hash(config), artifacts, versions(),
                           time.perf_counter() - start, passed, summary)
    io.write_json(outdir / MANIFEST, manifest.to_dict())
    return manifest


def _context(config):
    return f"[{config.kind} experiment, model={config['model']}, seed={config['seed']}] "


# -- per-kind runners: each returns (summary dict, pass flag or None) ----------------

def _simulate(cfg, outdir, threads):
    model, theta, grid, init = cfg.model(), cfg.theta(), cfg.grid(), cfg.init()
    paths = map_reps(lambda r: simulate_particles(model, theta, cfg["N"], grid, init, cfg["seed"], rep=r),
                     cfg["R"], threads)
    io.write_paths(outdir / "paths", paths)
    final = np.concatenate([p.data[:, -1, 0] for p in paths])
    return {"particles": cfg["N"], "replications": cfg["R"], "final_mean": float(final.mean()),
            "final_var": float(final.var())}, None


def _estimate_one(model, paths, cfg, r):
    if cfg["method"] == "linear":
        return mle_linear(model, paths)
    return mle_numeric(model, paths, n_starts=cfg["n_starts"], seed=cfg["seed"] + r)


def _estimate(cfg, outdir, threads):
    model, theta, grid, init = cfg.model(), cfg.theta(), cfg.grid(), cfg.init()

    def one(r):
        paths = simulate_particles(model, theta, cfg["N"], grid, init, cfg["seed"], rep=r, stream="estimate")
        return paths, _estimate_one(model, paths, cfg, r)

    results = map_reps(one, cfg["R"], threads)
    p = model.p
    io.write_csv(
        outdir / "estimates.csv",
        ["rep", "method", "converged", "iters"] + [f"theta_hat_{k}" for k in range(p)]
        + ["score_norm", "boundary_flags"],
        ([r, est.method, est.converged, est.iterations, *est.theta_hat, est.score_norm,
          est.boundary_flags()] for r, (_, est) in enumerate(results)),
    )
    if cfg["scan_points"] > 0:
        paths, est = results[0]
        rows = []
        for k in range(p):
            lo, hi = model.box.interval(k)
            for val in np.linspace(lo, hi, cfg["scan_points"]):
                th = est.theta_hat.copy()
                th[k] = val
                if model.validate(th).ok:
                    rows.append([k, *th, float(log_likelihood_discrete(model, th, paths))])
        io.write_csv(outdir / "loglik_scan.csv",
                     ["axis"] + [f"theta_{k}" for k in range(p)] + ["loglik"], rows)
    hats = np.array([est.theta_hat for _, est in results])
    return {"replications": cfg["R"], "mean_theta_hat": hats.mean(axis=0),
            "converged": sum(est.converged for _, est in results)}, None


def _fisher(cfg, outdir, threads):
    model, theta, grid, init = cfg.model(), cfg.theta(), cfg.grid(), cfg.init()
    limit = dg.limit_information(model, theta, grid, init, cfg["seed"], cfg.get("N_ref", 10_000))
    io.write_matrix(outdir / "fisher_limit.csv", limit.matrix)
    emp = map_reps(lambda r: empirical_fisher(
        model, theta, simulate_particles(model, theta, cfg["N"], grid, init, cfg["seed"], rep=r,
                                         stream="fisher")).matrix, cfg["R"], threads)
    emp = np.mean(emp, axis=0)
    io.write_matrix(outdir / "fisher_empirical.csv", emp)
    return {"det_limit": limit.det, "threshold": limit.threshold, "degenerate": limit.degenerate,
            "frobenius_gap": float(np.linalg.norm(emp - limit.matrix))}, None


def _lan(cfg, outdir, threads):
    model, theta = cfg.model(), cfg.theta()
    u = np.array(cfg["u"]) if cfg["u"] is not None else np.ones(model.p) / np.sqrt(model.p)
    rep = dg.lan_experiment(model, theta, u, cfg["N"], cfg.grid(), cfg["R"], cfg["seed"], cfg.init(),
                            threads=threads, N_ref=cfg.get("N_ref", 10_000))
    io.write_csv(outdir / "lan.csv", ["rep", "zeta", "standardized"],
                 ([r, z, s] for r, (z, s) in enumerate(zip(rep.zeta, rep.standardized))))
    summary = {"u": rep.u, "theta_local": rep.theta_local, "mean": rep.mean, "var": rep.var,
               "predicted_mean": rep.predicted_mean, "predicted_var": rep.predicted_var,
               "ks_stat": rep.ks_stat, "ks_pvalue": rep.ks_pvalue, "pass_mean": rep.pass_mean,
               "pass_ks": rep.pass_ks, "degenerate": rep.degenerate}
    io.write_summary(outdir / "summary.txt", summary)
    return summary, rep.passed


def _z_rows(runs):
    return ([int(r), bool(c), *z] for r, c, z in zip(runs.reps, runs.converged, runs.z))


def _normality(cfg, outdir, threads):
    model = cfg.model()
    rep = dg.normality_experiment(model, cfg.theta(), cfg["N"], cfg.grid(), cfg["R"], cfg["seed"],
                                  cfg.init(), cfg["method"], threads=threads,
                                  N_ref=cfg.get("N_ref", 10_000))
    io.write_csv(outdir / "normality.csv", ["rep", "converged"] + [f"z_{k}" for k in range(model.p)],
                 _z_rows(rep.runs))
    io.write_matrix(outdir / "covariance.csv", rep.cov)
    summary = {"replications": len(rep.runs.reps), "failures": rep.runs.failures,
               "ks_stats": rep.ks_stats, "ks_pvalues": rep.ks_pvalues, "cov_error": rep.cov_error,
               "cov_tol": rep.cov_tol, "passed": rep.passed}
    io.write_summary(outdir / "summary.txt", summary)
    return summary, rep.passed


def _risk(cfg, outdir, threads):
    model = cfg.model()
    rep = dg.risk_experiment(model, cfg.theta(), cfg["loss"], cfg["N"], cfg.grid(), cfg["R"],
                             cfg["seed"], cfg.init(), cfg["method"], c=cfg["loss_c"], threads=threads,
                             N_ref=cfg.get("N_ref", 10_000))
    io.write_csv(outdir / "risk.csv", ["rep", "loss"], enumerate(rep.losses))
    summary = {"loss": rep.loss, "empirical_risk": rep.empirical, "se": rep.se,
               "gaussian_bound": rep.bound, "ratio": rep.ratio, "passed": rep.passed}
    io.write_summary(outdir / "summary.txt", summary)
    return summary, rep.passed


def _chaos(cfg, outdir, threads):
    rep = dg.chaos_rate(cfg.model(), cfg.theta(), cfg["N_levels"], cfg.grid(), cfg["R"], cfg["seed"],
                        cfg.init(), N_ref=cfg["N_ref"], band=cfg["band"], threads=threads)
    io.write_csv(outdir / "chaos.csv", ["N", "rep", "distance"],
                 ([n, r, d] for n, row in zip(rep.levels, rep.distances) for r, d in enumerate(row)))
    summary = {"metric": rep.metric, "reference": rep.reference, "reference_atoms": rep.reference_atoms,
               "levels": rep.levels, "medians": rep.medians, "slope": rep.slope,
               "intercept": rep.intercept, "passed": rep.passed}
    io.write_summary(outdir / "summary.txt", summary)
    return summary, rep.passed


def _kl(cfg, outdir, threads):
    rep = dg.kl_experiment(cfg.model(), cfg.theta(), cfg["N_levels"], cfg.grid(), cfg["R"], cfg["seed"],
                           cfg.init(), threads=threads, N_ref=cfg.get("N_ref", 10_000))
    io.write_csv(outdir / "kl.csv", ["N", "rep", "value"],
                 ([e.N, r, v] for e in rep.estimates for r, v in enumerate(e.samples)))
    summary = {"levels": [e.N for e in rep.estimates], "values": rep.values,
               "se": [e.se for e in rep.estimates], "ratio": rep.ratio, "passed": rep.passed}
    io.write_summary(outdir / "summary.txt", summary)
    return summary, rep.passed


def _nondegeneracy(cfg, outdir, threads):
    model, init = cfg.model(), cfg.init()
    atoms = draw_noise(cfg["N"], cfg.grid(), model.d, init, cfg["seed"], 0, "nondegeneracy")[0]
    verdict = dg.nondegeneracy_t0(model, model.box, EmpiricalMeasure(atoms),
                                  n_pairs=cfg["n_pairs"], n_directions=cfg["n_directions"],
                                  seed=cfg["seed"])
    io.write_csv(outdir / "nondegeneracy.csv", ["segment", "min_statistic"],
                 enumerate(verdict.segment_minima))
    summary = {"nondegenerate": verdict.nondegenerate, "min_statistic": verdict.min_value,
               "threshold": verdict.threshold, "segments": verdict.n_segments,
               "directions": verdict.n_directions}
    if verdict.witness is not None:
        a, b, z = verdict.witness
        summary.update({"witness_theta": a, "witness_theta2": b, "witness_z": z})
    io.write_summary(outdir / "summary.txt", summary)
    return summary, verdict.nondegenerate


def _identifiability(cfg, outdir, threads):
    model = cfg.model()
    xi = np.linspace(0.0, cfg["xi_max"], cfg["n_xi"])
    th, th2 = cfg.theta(), np.array(cfg["theta2"])
    diff = dg.fourier_grad_potential(th, xi, model.d) - dg.fourier_grad_potential(th2, xi, model.d)
    gaps = np.linalg.norm(diff, axis=1)
    io.write_csv(outdir / "fourier.csv", ["xi", "gap"], zip(xi, gaps))
    gap = dg.identifiability_fourier_check(model, th, th2, xi)
    summary = {"max_gap": gap, "distinguishable": gap > 0}
    io.write_summary(outdir / "summary.txt", summary)
    return summary, gap > 0


RUNNERS = {
    "simulate": _simulate,
    "estimate": _estimate,
    "fisher": _fisher,
    "lan": _lan,
    "normality": _normality,
    "risk": _risk,
    "chaos-rate": _chaos,
    "kl-proxy": _kl,
    "nondegeneracy": _nondegeneracy,
    "identifiability": _identifiability,
}


def load_manifest(outdir):
    return io.read_json(Path(outdir) / MANIFEST)


def compare_artifacts(a, b):
    """Names of files whose bytes differ between two run directories (manifests excluded)."""
    a, b = Path(a), Path(b)
    names = {p.relative_to(a) for p in a.rglob("*") if p.is_file()}
    names |= {p.relative_to(b) for p in b.rglob("*") if p.is_file()}
    diff = []
    for name in sorted(names):
        if name.name == MANIFEST:
            continue
        pa, pb = a / name, b / name
        if not (pa.exists() and pb.exists()) or pa.read_bytes() != pb.read_bytes():
            diff.append(str(name))
    return diff


__all__ = ["RunManifest", "run", "config_hash", "compare_artifacts", "load_manifest", "ExperimentError"]
