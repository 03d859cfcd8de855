"""Experiment configuration: JSON documents with defaults and total validation.

Example::

    {
      "experiment": "area-fit",
      "group": {"family": "SU", "N": 2},
      "d": 2, "L": 12, "beta": 0.06,
      "chain": {"sweeps": 200000, "thinning": 5, "n_chains": 4},
      "seed": 7,
      "loops": [[1, 1], [1, 2], [2, 2]]
    }

Sigma-model experiments use the (d-1)-dimensional slice of side L.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .errors import ParseError, ValidationError
from .groups import Family
from .sigma import BOUNDARY_KINDS
from .thresholds import beta_threshold

EXPERIMENTS = ("thresholds", "sample-ym", "wilson", "area-fit", "sigma-cov", "one-point", "hessian-check",
               "disintegration-test", "coupling")
METHODS = ("auto", "heatbath", "metropolis")
MAX_SEED = (1 << 64) - 1

DEFAULTS = {
    "experiment": "thresholds",
    "group": {"family": "SU", "N": 2},
    "d": 2,
    "L": 8,
    "beta": 0.05,
    "chain": {"sweeps": 2000, "burn_in": None, "thinning": 1, "n_chains": 4},
    "seed": 0,
    "method": "auto",
    "loops": [[1, 1], [1, 2], [2, 2]],
    "distances": [1, 2, 3],
    "boundary": {"kinds": list(BOUNDARY_KINDS), "seed": None},
    "entries": None,
    "n_trials": 100,
    "dt": 0.01,
    "horizon": 1.0,
    "n_pairs": 16,
    "separation": 0.2,
    "checkpoint": False,
    "workers": None,
    "output_dir": "latgauge-out",
}
_NESTED = ("group", "chain", "boundary")


@dataclass
class ExperimentConfig:
    """Validated configuration; ``raw`` is the fully defaulted document."""

    experiment: str
    family: str
    n: int
    d: int
    L: int
    beta: float
    sweeps: int
    burn_in: int
    thinning: int
    n_chains: int
    seed: int
    raw: dict = field(repr=False)
    warnings: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def m(self) -> int:
        return self.d - 1

    def chain_config(self, seed: int | None = None):
        from .chains import ChainConfig
        return ChainConfig(self.sweeps, self.burn_in, self.thinning, self.n_chains,
                           self.seed if seed is None else seed)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key=value`` strings; dotted keys reach into tables, values parse as JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not of the form key=value", field=item)
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        target = doc
        for p in parts[:-1]:
            nxt = target.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ParseError(f"cannot set {key!r}: {p!r} is not a table", field=key)
            target = nxt
        target[parts[-1]] = _parse_value(value)
    return doc


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _merge_defaults(doc: dict, problems: list) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for key, value in doc.items():
        if key not in DEFAULTS:
            problems.append(f"unknown key {key!r}")
            continue
        if key in _NESTED:
            if not isinstance(value, dict):
                problems.append(f"{key}: expected a table")
                continue
            for sub, v in value.items():
                if sub not in DEFAULTS[key]:
                    problems.append(f"unknown key {key}.{sub!r}")
                else:
                    out[key][sub] = v
        else:
            out[key] = value
    return out


def validate(doc: dict) -> ExperimentConfig:
    """Fill defaults and check every constraint, collecting all violations."""
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ValidationError(["top level must be a JSON object"])
    c = _merge_defaults(doc, problems)

    def need(ok, msg):
        if not ok:
            problems.append(msg)
        return ok

    need(c["experiment"] in EXPERIMENTS, f"experiment: must be one of {list(EXPERIMENTS)}")
    g = c["group"]
    fam_ok = need(g["family"] in ("U", "SU", "SO"), "group.family: must be U, SU or SO")
    n_ok = need(_is_int(g["N"]) and 1 <= g["N"] <= 8, "group.N: integer in [1, 8]")
    if fam_ok and n_ok and g["family"] == "SU":
        n_ok = need(g["N"] >= 2, "group.N: SU(1) is the trivial group; need N >= 2")
    d_ok = need(_is_int(c["d"]) and 2 <= c["d"] <= 6, "d: integer in [2, 6]")
    L_ok = need(_is_int(c["L"]) and 2 <= c["L"] <= 64, "L: integer in [2, 64]")
    b_ok = need(_is_num(c["beta"]) and c["beta"] >= 0, "beta: non-negative number")

    ch = c["chain"]
    sw_ok = need(_is_int(ch["sweeps"]) and ch["sweeps"] >= 1, "chain.sweeps: positive integer")
    if ch["burn_in"] is None and sw_ok:
        ch["burn_in"] = ch["sweeps"] // 5
    if need(_is_int(ch["burn_in"]) and ch["burn_in"] >= 0, "chain.burn_in: non-negative integer") and sw_ok:
        need(ch["burn_in"] < ch["sweeps"], "chain.burn_in: must be smaller than chain.sweeps")
    need(_is_int(ch["thinning"]) and ch["thinning"] >= 1, "chain.thinning: positive integer")
    need(_is_int(ch["n_chains"]) and 1 <= ch["n_chains"] <= 256, "chain.n_chains: integer in [1, 256]")
    need(_is_int(c["seed"]) and 0 <= c["seed"] <= MAX_SEED, "seed: unsigned 64-bit integer")
    need(c["method"] in METHODS, f"method: one of {list(METHODS)}")

    # side and distance ranges only bind the experiments that use them, so a small L
    # does not trip over the defaults of unrelated experiments
    half = c["L"] // 2 if L_ok else None
    loop_half = half if c["experiment"] in ("wilson", "area-fit") else None
    dist_half = half if c["experiment"] == "sigma-cov" else None
    loops = c["loops"]
    if need(isinstance(loops, list) and len(loops) >= 1, "loops: non-empty list of [R, T] pairs"):
        for k, lp in enumerate(loops):
            if not (isinstance(lp, list) and len(lp) == 2 and all(_is_int(v) for v in lp)):
                problems.append(f"loops[{k}]: expected [R, T] integers")
            elif not all(v >= 1 for v in lp) or (loop_half is not None and not all(v <= loop_half for v in lp)):
                problems.append(f"loops[{k}]: sides {lp} must lie in [1, L/2] = [1, {half}]")
    dists = c["distances"]
    if need(isinstance(dists, list) and len(dists) >= 1, "distances: non-empty list of integers"):
        for k, r in enumerate(dists):
            if not _is_int(r):
                problems.append(f"distances[{k}]: expected an integer")
            elif r < 1 or (dist_half is not None and r > dist_half):
                problems.append(f"distances[{k}]: {r} outside [1, L/2] = [1, {half}]")
    if c["experiment"] == "area-fit" and isinstance(loops, list):
        need(len(loops) >= 3, "loops: area-fit needs at least 3 loop shapes to fit a rate")
    if c["experiment"] == "sigma-cov" and isinstance(dists, list) and _is_num(c["beta"]) and c["beta"] > 0:
        need(len(dists) >= 3, "distances: sigma-cov needs at least 3 distances to fit a rate")
    kinds = c["boundary"]["kinds"]
    if need(isinstance(kinds, list) and len(kinds) >= 1, "boundary.kinds: non-empty list"):
        for k, kind in enumerate(kinds):
            need(kind in BOUNDARY_KINDS, f"boundary.kinds[{k}]: one of {list(BOUNDARY_KINDS)}")
    bseed = c["boundary"]["seed"]
    need(bseed is None or (_is_int(bseed) and 0 <= bseed <= MAX_SEED), "boundary.seed: unsigned 64-bit integer")
    entries = c["entries"]
    if entries is not None and need(isinstance(entries, list), "entries: list of [i, j] pairs or null"):
        for k, e in enumerate(entries):
            ok = isinstance(e, list) and len(e) == 2 and all(_is_int(v) for v in e)
            if not ok:
                problems.append(f"entries[{k}]: expected [i, j] integers")
            elif n_ok and not all(1 <= v <= g["N"] for v in e):
                problems.append(f"entries[{k}]: indices must lie in [1, N]")
    need(_is_int(c["n_trials"]) and c["n_trials"] >= 1, "n_trials: positive integer")
    need(_is_num(c["dt"]) and 0 < c["dt"] <= 0.1, "dt: number in (0, 0.1]")
    if c["experiment"] == "coupling" and _is_num(c["dt"]):
        need(c["dt"] <= 0.01, "dt: the coupling experiment needs dt <= 0.01")
    need(_is_num(c["horizon"]) and c["horizon"] > 0, "horizon: positive number")
    need(_is_int(c["n_pairs"]) and c["n_pairs"] >= 2, "n_pairs: integer >= 2")
    need(_is_num(c["separation"]) and 0 < c["separation"] <= 1, "separation: number in (0, 1]")
    need(isinstance(c["checkpoint"], bool), "checkpoint: boolean")
    need(c["workers"] is None or (_is_int(c["workers"]) and c["workers"] >= 1), "workers: positive integer or null")
    need(isinstance(c["output_dir"], str) and c["output_dir"] != "", "output_dir: non-empty string")

    if c["experiment"] == "disintegration-test" and fam_ok:
        need(g["family"] == "U", "group.family: disintegration-test needs family U")
    if c["experiment"] in ("coupling",) and fam_ok:
        need(g["family"] in ("SU", "SO"), "group.family: coupling needs SU or SO (K is undefined for U)")

    if problems:
        raise ValidationError(problems)

    warnings = []
    if c["experiment"] != "thresholds" and fam_ok and b_ok and d_ok:
        star = beta_threshold(Family(g["family"]), g["N"], c["d"])
        if c["beta"] >= star:
            warnings.append({"kind": "outside_regime", "beta": c["beta"], "beta_star": star,
                             "message": f"beta = {c['beta']} is not below beta* = {star}"})
    return ExperimentConfig(c["experiment"], g["family"], g["N"], c["d"], c["L"], float(c["beta"]), ch["sweeps"],
                            ch["burn_in"], ch["thinning"], ch["n_chains"], c["seed"], c, warnings)


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse and validate a JSON config document.

    Raises
    ------
    ParseError
        Malformed JSON (with line and column) or a malformed override.
    ValidationError
        Listing every violated constraint.
    """
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict):
        raise ValidationError(["top level must be a JSON object"])
    return validate(apply_overrides(doc, overrides))
