"""Command line entry point: ``latgauge <experiment> --config FILE [--set k=v]... [--out DIR]``.

Every run writes ``report.json`` (config, manifest, results, pass flag) and
one or more CSV tables into the output directory.  Exit codes: 0 when the
experiment's assertion holds, 2 when it ran but the assertion failed, 1 on
errors.  ``latgauge rerun REPORT`` repeats a run from the config embedded in
its report and checks that every CSV hash is reproduced.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import __version__
from . import curvature as C
from . import io
from . import sigma as S
from .chains import sample
from .config import EXPERIMENTS, ExperimentConfig, parse_config
from .errors import LatGaugeError
from .groups import Family, GroupSpec, haar_batch
from .seeding import derive_aux_rng, stream_state
from .ym import GaugeField, LinkTrace, RectangleSet, YMSampler, make_params

log = logging.getLogger("latgauge")


@dataclass
class RunManifest:
    config_sha256: str
    version: str
    started: str
    finished: str = ""
    chain_seeds: list = field(default_factory=list)
    files: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config_sha256": self.config_sha256, "version": self.version, "started": self.started,
                "finished": self.finished, "chain_seeds": self.chain_seeds, "files": self.files}


@dataclass
class Outcome:
    results: dict
    tables: dict
    passed: bool


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _derived_seed(master: int, index: int, tag: str) -> int:
    return int(derive_aux_rng(master, index, tag).integers(0, 2 ** 63))


def _spec(cfg: ExperimentConfig) -> GroupSpec:
    return GroupSpec(Family(cfg.family), cfg.n)


def _sigma_params(cfg: ExperimentConfig) -> S.SigmaParams:
    return S.make_sigma_params(cfg.family, cfg.n, cfg.beta, cfg.m, cfg.L)


def _boundaries(cfg: ExperimentConfig, params: S.SigmaParams):
    bseed = cfg["boundary"]["seed"]
    return S.boundary_ensemble(params.slice, params.spec, cfg["boundary"]["kinds"],
                               cfg.seed if bseed is None else bseed)


def _est_row(e):
    return (float(np.real(e.mean)), float(np.imag(e.mean)), e.stderr, e.tau_int, e.n_samples)


# --- experiments -----------------------------------------------------------------


def run_thresholds(cfg: ExperimentConfig, out: Path) -> Outcome:
    rows = C.threshold_table()
    ok = all(r["K_at_beta_star"] is None or abs(r["K_at_beta_star"]) <= 1e-15 for r in rows)
    spec = _spec(cfg)
    here = {"beta_star": C.beta_threshold(spec.family, spec.n, cfg.d)}
    if spec.family is not Family.U:
        here["K"] = C.bakry_emery_constant(spec.family, spec.n, cfg.beta, cfg.d)
    table = [(r["family"], r["n"], r["d"], r["beta_star"], r["K_at_beta_star"]) for r in rows]
    return Outcome({"grid_ok": ok, "requested": here},
                   {"thresholds.csv": (("family", "n", "d", "beta_star", "K_at_beta_star"), table)}, ok)


def run_sample_ym(cfg: ExperimentConfig, out: Path) -> Outcome:
    params = make_params(cfg.family, cfg.n, cfg.beta, cfg.d, cfg.L)
    chain = cfg.chain_config()
    obs = _PlaquetteAndLink()
    trace = sample(obs, params, chain, cfg["method"], workers=cfg["workers"])
    plaq, link = trace.estimates()
    results = {"plaquette": plaq.to_dict(), "link_trace": link.to_dict(),
               "acceptance": trace.acceptance.tolist()}
    passed = True
    if cfg.beta == 0:
        ref = haar_batch(params.spec, derive_aux_rng(cfg.seed, 0, "haar-reference"), trace.values[:, :, 1].size)
        ref_tr = np.real(np.trace(ref, axis1=-2, axis2=-1)) / cfg.n
        ks = sps.ks_2samp(trace.values[:, :, 1].real.ravel(), ref_tr)
        results["haar_ks"] = {"statistic": float(ks.statistic), "pvalue": float(ks.pvalue)}
        passed = ks.pvalue >= 0.01
    if cfg["checkpoint"]:
        _write_checkpoint(cfg, params, out / "checkpoint.lgck")
        results["checkpoint"] = "checkpoint.lgck"
    return Outcome(results, {"trace.csv": (io.TRACE_HEADER, list(io.trace_rows(trace, 0)))}, passed)


class _PlaquetteAndLink:
    """Average 1x1 loop and the normalized trace of link 0."""

    def __init__(self):
        self.plaq = RectangleSet(((1, 1),))
        self.link = LinkTrace(0)

    def __call__(self, field, params):
        return np.concatenate([self.plaq(field, params), self.link(field, params)])


def _write_checkpoint(cfg: ExperimentConfig, params, path: Path) -> None:
    from .seeding import derive_chain_seed
    rng = derive_chain_seed(cfg.seed, 0)
    field = GaugeField.identity(params.lattice, params.spec)
    sampler = YMSampler(params, cfg["method"])
    for _ in range(cfg.sweeps):
        sampler.tune(sampler.sweep(field, rng))
    io.save_checkpoint(path, field, params, cfg.sweeps, rng, sampler.proposal_scale)


def _loop_estimates(cfg: ExperimentConfig):
    params = make_params(cfg.family, cfg.n, cfg.beta, cfg.d, cfg.L)
    shapes = tuple(tuple(lp) for lp in cfg["loops"])
    improved = params.spec.family is Family.SU and params.spec.n == 2 and cfg.beta > 0
    trace = sample(RectangleSet(shapes, improved), params, cfg.chain_config(), cfg["method"], workers=cfg["workers"])
    return params, shapes, trace


def run_wilson(cfg: ExperimentConfig, out: Path) -> Outcome:
    params, shapes, trace = _loop_estimates(cfg)
    ests = trace.estimates()
    rows = [(r, t, r * t) + _est_row(e) for (r, t), e in zip(shapes, ests)]
    tables = {"wilson.csv": (("R", "T", "area", "re", "im", "stderr", "tau_int", "n_samples"), rows)}
    for k, (r, t) in enumerate(shapes):
        tables[f"trace_{r}x{t}.csv"] = (io.TRACE_HEADER, list(io.trace_rows(trace, k)))
    results = {"loops": [{"R": r, "T": t, **e.to_dict()} for (r, t), e in zip(shapes, ests)]}
    passed = True
    su2 = params.spec.family is Family.SU and params.spec.n == 2
    if cfg.d == 2 and (su2 or (params.spec.family is Family.U and params.spec.n == 1)):
        c = C.d2_wilson_oracle(params.spec, cfg.beta)
        checks = []
        for (r, t), e in zip(shapes, ests):
            target = c ** (r * t)
            checks.append({"R": r, "T": t, "oracle": target, "ok": bool(abs(e.mean - target) <= 3 * e.stderr)})
        results["oracle_checks"] = checks
        passed = all(ch["ok"] for ch in checks)
    return Outcome(results, tables, passed)


def run_area_fit(cfg: ExperimentConfig, out: Path) -> Outcome:
    params = make_params(cfg.family, cfg.n, cfg.beta, cfg.d, cfg.L)
    res = C.area_law_experiment(params, cfg["loops"], cfg.chain_config(), method=cfg["method"],
                                workers=cfg["workers"])
    rows = [(r, t, r * t) + _est_row(e) + (inc,) for (r, t), e, inc in zip(res.shapes, res.estimates, res.included)]
    results = res.to_dict()
    if res.fit is not None and res.oracle_rate is not None:
        results["oracle_rate_match_10pct"] = abs(res.fit.rate - res.oracle_rate) <= 0.1 * res.oracle_rate
    header = ("R", "T", "area", "re", "im", "stderr", "tau_int", "n_samples", "included")
    return Outcome(results, {"area_fit.csv": (header, rows)}, res.passed)


def run_sigma_cov(cfg: ExperimentConfig, out: Path) -> Outcome:
    params = _sigma_params(cfg)
    bcs = _boundaries(cfg, params)
    res = C.covariance_decay_experiment(params, bcs, cfg["distances"], cfg.chain_config(), workers=cfg["workers"])
    rows = []
    for r in res:
        for c, (o1, o2) in zip(r.covariances, C.decay_pairs(params.slice, cfg["distances"])):
            rows.append((r.boundary_id, json.dumps(list(o1.x)), json.dumps(list(o2.x)), c.distance, o1.i, o1.j,
                         o2.i, o2.j, c.value.real, c.value.imag, c.stderr))
    return Outcome({"boundaries": [r.to_dict() for r in res]}, {"covariance.csv": (io.COV_HEADER, rows)},
                   all(r.passed for r in res))


def run_one_point(cfg: ExperimentConfig, out: Path) -> Outcome:
    params = _sigma_params(cfg)
    S.require_center(params.spec)
    n = params.spec.n
    entries = cfg["entries"] or [[i, j] for i in range(1, n + 1) for j in range(1, n + 1)]
    origin = (0,) * params.m
    obs = [S.EntryObservable("f", origin, i, j) for i, j in entries]
    rows, blocks, ok = [], [], True
    for bc in _boundaries(cfg, params):
        ests = S.one_point_scan(bc, params, obs, cfg.chain_config(), method=cfg["method"], workers=cfg["workers"])
        block = []
        for o, e in zip(obs, ests):
            zero = bool(abs(e.mean) <= 3 * e.stderr)
            ok &= zero
            rows.append((bc.label, o.i, o.j) + _est_row(e) + (zero,))
            block.append({"i": o.i, "j": o.j, "consistent_with_zero": zero, **e.to_dict()})
        blocks.append({"boundary_id": bc.label, "entries": block})
    header = ("boundary_id", "i", "j", "re", "im", "stderr", "tau_int", "n_samples", "consistent_with_zero")
    return Outcome({"boundaries": blocks}, {"one_point.csv": (header, rows)}, ok)


def run_hessian(cfg: ExperimentConfig, out: Path) -> Outcome:
    spec = _spec(cfg)
    rep = C.hessian_check(spec, cfg.m, cfg.beta, cfg["n_trials"], derive_aux_rng(cfg.seed, 0, "hessian"))
    row = (cfg.family, cfg.n, cfg.m, cfg.beta, rep.n_trials, rep.max_ratio, rep.violations)
    return Outcome(rep.to_dict(), {"hessian.csv": (("family", "n", "m", "beta", "n_trials", "max_ratio",
                                                    "violations"), [row])}, rep.violations == 0)


def run_disintegration(cfg: ExperimentConfig, out: Path) -> Outcome:
    params = _sigma_params(cfg)
    bc = _boundaries(cfg, params)[0]
    meas = S.Stack((S.EdgeTerm(0, 0), S.TraceSquare(0)))
    names = ("edge_term", "trace_square")
    ests = {}
    for k, method in enumerate(("metropolis", "disintegration")):
        chain = cfg.chain_config(seed=_derived_seed(cfg.seed, k, "sampler"))
        ests[method] = S.sigma_sample(meas, bc, params, chain, method, cfg["workers"]).estimates()
    rows, checks = [], []
    for k, name in enumerate(names):
        a, b = ests["metropolis"][k], ests["disintegration"][k]
        comb = math.hypot(a.stderr, b.stderr)
        agree = bool(abs(a.mean - b.mean) <= 3 * comb)
        checks.append({"observable": name, "direct": a.to_dict(), "disintegration": b.to_dict(), "agree": agree})
        for method, e in (("direct", a), ("disintegration", b)):
            rows.append((method, name) + _est_row(e))
    header = ("sampler", "observable", "re", "im", "stderr", "tau_int", "n_samples")
    return Outcome({"boundary_id": bc.label, "checks": checks}, {"disintegration.csv": (header, rows)},
                   all(c["agree"] for c in checks))


def run_coupling(cfg: ExperimentConfig, out: Path) -> Outcome:
    params = _sigma_params(cfg)
    bc = _boundaries(cfg, params)[0]
    res = C.coupling_contraction(params, bc, cfg["dt"], cfg["horizon"], derive_aux_rng(cfg.seed, 0, "coupling"),
                                 cfg["n_pairs"], cfg["separation"])
    results = {**res.to_dict(), "boundary_id": bc.label, "diagnostic_within_30pct": res.within(0.3)}
    rows = list(zip(res.times, res.mean_distance))
    return Outcome(results, {"coupling.csv": (("t", "mean_distance"), rows)}, res.rate > 0)


RUNNERS = {
    "thresholds": run_thresholds,
    "sample-ym": run_sample_ym,
    "wilson": run_wilson,
    "area-fit": run_area_fit,
    "sigma-cov": run_sigma_cov,
    "one-point": run_one_point,
    "hessian-check": run_hessian,
    "disintegration-test": run_disintegration,
    "coupling": run_coupling,
}


# --- orchestration -----------------------------------------------------------------


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(json.dumps(cfg.raw, sort_keys=True).encode()).hexdigest()


def run(cfg: ExperimentConfig, out_dir=None) -> tuple[RunManifest, bool]:
    """Execute the configured experiment and write the report and CSV tables."""
    out = Path(out_dir or cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash(cfg), __version__, _now())
    manifest.chain_seeds = [
        {"chain": i, "pcg64_state": str(s), "pcg64_inc": str(inc)}
        for i, (s, inc) in enumerate(stream_state(cfg.seed, i) for i in range(cfg.n_chains))
    ]
    for w in cfg.warnings:
        log.warning(w["message"])
    outcome = RUNNERS[cfg.experiment](cfg, out)
    for name, (header, rows) in outcome.tables.items():
        manifest.files[name] = io.write_csv(out / name, header, rows)
    manifest.finished = _now()
    report = {"experiment": cfg.experiment, "config": cfg.raw, "warnings": cfg.warnings,
              "manifest": manifest.to_dict(), "results": outcome.results, "passed": bool(outcome.passed)}
    io.write_json(out / "report.json", report)
    return manifest, bool(outcome.passed)


def rerun(report_path, out_dir) -> tuple[bool, dict]:
    """Repeat a run from its report; returns (all CSV hashes equal, per-file comparison)."""
    report = json.loads(Path(report_path).read_text())
    cfg = parse_config(json.dumps(report["config"]))
    manifest, _ = run(cfg, out_dir)
    before = report["manifest"]["files"]
    cmp = {name: {"recorded": h, "rerun": manifest.files.get(name)} for name, h in before.items()}
    same = set(before) == set(manifest.files) and all(v["recorded"] == v["rerun"] for v in cmp.values())
    return same, cmp


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latgauge", description="Lattice Yang-Mills and slab sigma-model experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS + ("rerun",))
    p.add_argument("report", nargs="?", help="report.json to repeat (rerun only)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (dotted keys reach nested tables)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.experiment == "rerun":
            if not args.report:
                raise LatGaugeError("rerun needs the path of a report.json")
            out = args.out or str(Path(args.report).parent / "rerun")
            same, cmp = rerun(args.report, out)
            print(json.dumps({"identical": same, "files": cmp}, indent=2))
            return 0 if same else 2
        text = Path(args.config).read_text() if args.config else "{}"
        cfg = parse_config(text, args.overrides + [f"experiment={json.dumps(args.experiment)}"])
        manifest, passed = run(cfg, args.out)
        out = Path(args.out or cfg["output_dir"])
        print(f"{cfg.experiment}: {'PASS' if passed else 'FAIL'} ({out / 'report.json'})")
        return 0 if passed else 2
    except LatGaugeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
