"""Experiment configuration: JSON schema, validation, canonical emission.

A config document has four sections::

    {
      "market":     {"curve": [[maturity, price], ...], "short_rate": 0.03},
      "vol":        {"family": "ho-lee", "params": {"betas": [0.1]}},
      "instrument": {"kind": "bond-call", "underlying": 2.0,
                     "exercise": 1.0, "strike": 0.94},
      "run":        {"paths": 10000, "inner_paths": 10000,
                     "steps": [25, 50, 100, 200], "seed": 1,
                     "threads": 1, "rebalance_every": 1,
                     "strategy": "clark-ocone", "out_dir": "out"}
    }

Instrument fields per kind:

* ``bond-call``: underlying, exercise, strike (price);
* ``caplet``: fixing, payment, strike (rate);
* ``swaption``: tenor (list of dates), strike (rate), optional exercise
  (default: first tenor date);
* ``exchange``: mu, nu (atom lists [[maturity, weight], ...]), strike,
  exercise.

Validation collects every violation instead of stopping at the first;
parsing then emitting is idempotent, and emission is canonical (sorted
keys), so identical configs hash identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .instruments import InstrumentSpec
from .market import BondCurve, DiscreteMeasure, TenorStructure
from .seeding import SeedSpec
from .volatility import VolSurface

DEFAULT_INNER_PATHS = 10_000
DEFAULT_STEPS = [25, 50, 100, 200]
VOL_FAMILIES = ("constant", "ho-lee", "vasicek", "piecewise")
INSTRUMENT_KINDS = ("bond-call", "caplet", "swaption", "exchange")


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid config:\n  " + "\n  ".join(violations))
        self.violations = violations


@dataclass
class ExperimentConfig:
    curve: list[tuple[float, float]]
    short_rate: float
    vol_family: str
    vol_params: dict
    instrument: dict
    paths: int
    inner_paths: int
    steps: list[int]
    seed: int
    threads: int = 1
    rebalance_every: int = 1
    strategy: str = "clark-ocone"
    out_dir: str = "out"

    # -- builders ------------------------------------------------------------

    def build_curve(self) -> BondCurve:
        return BondCurve.from_pairs(0.0, self.curve)

    def build_vol(self) -> VolSurface:
        p = self.vol_params
        if self.vol_family == "constant":
            return VolSurface.constant(p["levels"])
        if self.vol_family == "ho-lee":
            return VolSurface.ho_lee(p["betas"])
        if self.vol_family == "vasicek":
            return VolSurface.vasicek(p["sigmas"], p["speeds"])
        if self.vol_family == "piecewise":
            return VolSurface.piecewise(p["nodes"], p["levels"])
        raise ValueError(f"unknown vol family {self.vol_family!r}")

    def build_instrument(self) -> InstrumentSpec:
        ins = self.instrument
        kind = ins["kind"]
        if kind == "bond-call":
            return InstrumentSpec.bond_call(ins["underlying"], ins["exercise"], ins["strike"])
        if kind == "caplet":
            return InstrumentSpec.caplet(ins["fixing"], ins["payment"], ins["strike"])
        if kind == "swaption":
            tenor = TenorStructure(
                tuple(ins["tenor"]),
                exercise=ins.get("exercise", ins["tenor"][0]),
                settlement=ins.get("exercise", ins["tenor"][0]),
            )
            return InstrumentSpec.swaption(tenor, ins["strike"])
        if kind == "exchange":
            return InstrumentSpec.exchange(
                DiscreteMeasure(tuple((y, w) for y, w in ins["mu"])),
                DiscreteMeasure(tuple((y, w) for y, w in ins["nu"])),
                ins["strike"],
                ins["exercise"],
            )
        raise ValueError(f"unknown instrument kind {kind!r}")

    def build_seeds(self) -> SeedSpec:
        return SeedSpec(self.seed)

    def to_dict(self) -> dict:
        return {
            "market": {"curve": [[y, p] for y, p in self.curve], "short_rate": self.short_rate},
            "vol": {"family": self.vol_family, "params": self.vol_params},
            "instrument": self.instrument,
            "run": {
                "paths": self.paths,
                "inner_paths": self.inner_paths,
                "steps": self.steps,
                "seed": self.seed,
                "threads": self.threads,
                "rebalance_every": self.rebalance_every,
                "strategy": self.strategy,
                "out_dir": self.out_dir,
            },
        }


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON rendering; emit(parse(x)) is a fixed point of parse."""
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the experiment-defining fields.

    Excludes ``threads`` and ``out_dir``: they affect where and how fast
    results are produced, never the results, so outputs stay byte-identical
    across worker counts.
    """
    doc = cfg.to_dict()
    doc["run"].pop("threads")
    doc["run"].pop("out_dir")
    canonical = json.dumps(doc, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document.

    Raises :class:`ConfigError` carrying the full list of violations, or a
    syntax error message with line and column for malformed JSON.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"])
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a JSON object"])

    bad: list[str] = []
    market = _section(doc, "market", bad)
    vol = _section(doc, "vol", bad)
    instrument = _section(doc, "instrument", bad)
    run = _section(doc, "run", bad, required=False)

    curve = _check_curve(market, bad)
    short_rate = _check_number(market, "market", "short_rate", bad, default=0.0)
    vol_family, vol_params = _check_vol(vol, bad)
    ins = _check_instrument(instrument, curve, bad)
    run_fields = _check_run(run, bad)

    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(
        curve=curve,
        short_rate=short_rate,
        vol_family=vol_family,
        vol_params=vol_params,
        instrument=ins,
        **run_fields,
    )


def _section(doc, name, bad, required=True):
    sec = doc.get(name)
    if sec is None:
        if required:
            bad.append(f"{name}: section is required")
        return {}
    if not isinstance(sec, dict):
        bad.append(f"{name}: must be an object")
        return {}
    return sec


def _check_number(sec, where, key, bad, default=None, minimum=None):
    val = sec.get(key, default)
    if val is None:
        bad.append(f"{where}.{key}: field is required")
        return default
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        bad.append(f"{where}.{key}: must be a number, got {val!r}")
        return default
    if minimum is not None and val < minimum:
        bad.append(f"{where}.{key}: must be >= {minimum}, got {val}")
    return float(val)


def _check_curve(market, bad) -> list[tuple[float, float]]:
    raw = market.get("curve")
    if not isinstance(raw, list) or not raw:
        bad.append("market.curve: a nonempty list of [maturity, price] pairs is required")
        return []
    out = []
    for i, entry in enumerate(raw):
        if (not isinstance(entry, list)) or len(entry) != 2 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in entry
        ):
            bad.append(f"market.curve[{i}]: must be a [maturity, price] number pair")
            continue
        y, p = float(entry[0]), float(entry[1])
        if y <= 0.0:
            bad.append(f"market.curve[{i}]: maturity must be positive, got {y}")
        if p <= 0.0:
            bad.append(f"market.curve[{i}]: price must be positive, got {p}")
        out.append((y, p))
    mats = [y for y, _ in out]
    if len(set(mats)) != len(mats):
        bad.append("market.curve: maturities must be distinct")
    return sorted(out)


def _check_vol(vol, bad):
    family = vol.get("family")
    if family not in VOL_FAMILIES:
        bad.append(f"vol.family: must be one of {VOL_FAMILIES}, got {family!r}")
        return "constant", {"levels": [0.0]}
    params = vol.get("params")
    if not isinstance(params, dict):
        bad.append("vol.params: an object of family parameters is required")
        return family, {}
    needed = {
        "constant": ("levels",),
        "ho-lee": ("betas",),
        "vasicek": ("sigmas", "speeds"),
        "piecewise": ("nodes", "levels"),
    }[family]
    for key in needed:
        if key not in params:
            bad.append(f"vol.params.{key}: required for family {family!r}")
    if family == "vasicek" and all(k in params for k in needed):
        if len(params["sigmas"]) != len(params["speeds"]):
            bad.append("vol.params: sigmas and speeds must have the same length")
        elif any(a <= 0 for a in params["speeds"]):
            bad.append("vol.params.speeds: must be positive")
    if family == "piecewise" and all(k in params for k in needed):
        nodes = params["nodes"]
        if sorted(nodes) != nodes or len(set(nodes)) != len(nodes):
            bad.append("vol.params.nodes: must be strictly increasing")
        if len(params["levels"]) != len(nodes):
            bad.append("vol.params.levels: need one level row per node")
    return family, params


def _instrument_maturities(kind: str, ins: dict) -> list[float]:
    if kind == "bond-call":
        return [ins.get("underlying"), ins.get("exercise")]
    if kind == "caplet":
        return [ins.get("fixing"), ins.get("payment")]
    if kind == "swaption":
        return list(ins.get("tenor") or [])
    if kind == "exchange":
        out = []
        for name in ("mu", "nu"):
            out.extend(y for y, _ in (ins.get(name) or []))
        return out
    return []


def _check_instrument(ins, curve, bad) -> dict:
    kind = ins.get("kind")
    if kind not in INSTRUMENT_KINDS:
        bad.append(f"instrument.kind: must be one of {INSTRUMENT_KINDS}, got {kind!r}")
        return dict(ins)
    required = {
        "bond-call": ("underlying", "exercise", "strike"),
        "caplet": ("fixing", "payment", "strike"),
        "swaption": ("tenor", "strike"),
        "exchange": ("mu", "nu", "strike", "exercise"),
    }[kind]
    for key in required:
        if key not in ins:
            bad.append(f"instrument.{key}: required for kind {kind!r}")
    if kind == "bond-call" and all(k in ins for k in ("underlying", "exercise")):
        if ins["underlying"] <= ins["exercise"]:
            bad.append("instrument: the underlying bond must mature after the exercise date")
    if kind == "caplet" and all(k in ins for k in ("fixing", "payment")):
        if ins["payment"] <= ins["fixing"]:
            bad.append("instrument: the payment date must follow the fixing date")
    if kind == "swaption" and isinstance(ins.get("tenor"), list):
        tenor = ins["tenor"]
        if len(tenor) < 2:
            bad.append("instrument.tenor: needs at least two dates")
        elif any(b <= a for a, b in zip(tenor, tenor[1:])):
            bad.append("instrument.tenor: maturities must be strictly increasing (first < ... < last)")
        if "exercise" in ins and tenor and ins["exercise"] > tenor[0]:
            bad.append("instrument.exercise: must not exceed the first tenor date")
    if kind == "exchange":
        for name in ("mu", "nu"):
            atoms = ins.get(name)
            if atoms is not None and (
                not isinstance(atoms, list)
                or not all(isinstance(a, list) and len(a) == 2 for a in atoms)
            ):
                bad.append(f"instrument.{name}: must be a list of [maturity, weight] pairs")
        if isinstance(ins.get("nu"), list) and all(
            isinstance(a, list) and len(a) == 2 for a in ins["nu"]
        ):
            if any(w <= 0 for _, w in ins["nu"]):
                bad.append("instrument.nu: numeraire weights must be strictly positive")
    if "strike" in ins and isinstance(ins["strike"], (int, float)) and ins["strike"] < 0:
        bad.append("instrument.strike: must be nonnegative")

    curve_mats = {y for y, _ in curve}
    for y in _instrument_maturities(kind, ins):
        if isinstance(y, (int, float)) and not any(abs(y - c) <= 1e-9 for c in curve_mats):
            bad.append(f"instrument: maturity {y} is not on the initial curve")
    return dict(ins)


def _check_run(run, bad) -> dict:
    out = {
        "paths": 10_000,
        "inner_paths": DEFAULT_INNER_PATHS,
        "steps": list(DEFAULT_STEPS),
        "seed": 1,
        "threads": 1,
        "rebalance_every": 1,
        "strategy": "clark-ocone",
        "out_dir": "out",
    }
    ints = {"paths": 1, "inner_paths": 1, "seed": None, "threads": 1, "rebalance_every": 1}
    for key, minimum in ints.items():
        if key in run:
            val = run[key]
            if not isinstance(val, int) or isinstance(val, bool):
                bad.append(f"run.{key}: must be an integer, got {val!r}")
            elif minimum is not None and val < minimum:
                bad.append(f"run.{key}: must be >= {minimum}, got {val}")
            else:
                out[key] = val
    if "steps" in run:
        steps = run["steps"]
        if (
            not isinstance(steps, list)
            or not steps
            or not all(isinstance(s, int) and s > 0 for s in steps)
            or sorted(steps) != steps
        ):
            bad.append("run.steps: must be a nonempty increasing list of positive integers")
        else:
            out["steps"] = steps
    if "strategy" in run:
        if run["strategy"] not in ("clark-ocone", "delta", "instrument"):
            bad.append(f"run.strategy: unknown strategy {run['strategy']!r}")
        else:
            out["strategy"] = run["strategy"]
    if "out_dir" in run:
        if not isinstance(run["out_dir"], str) or not run["out_dir"]:
            bad.append("run.out_dir: must be a nonempty string")
        else:
            out["out_dir"] = run["out_dir"]
    return out
