"""Command-line entry point: price, hedge, backtest, and verify.

Outputs are CSV files with a ``#``-prefixed metadata block (package
version, command, effective config hash, seed) followed by a one-line
header.  Identical configs and seeds produce byte-identical files,
regardless of the worker-thread count.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import FROZEN_VOL_LABEL, effective_vol, forward_call_price, integrated_vol, nd1_nd2
from .backtest import (
    build_ledger,
    forward_price_euler,
    forward_price_exact_reweighted,
    replication_report,
)
from .config import ConfigError, ExperimentConfig, config_hash, emit_config, parse_config
from .hedging import (
    clark_ocone_strategy,
    delta_strategy,
    hedge_value,
    instrument_strategy,
    jamshidian_strategy,
    swaption_delta_strategy,
)
from .instruments import InstrumentSpec
from .malliavin import bump_check, co_representation_residual
from .market import ForwardCurve, forward_normalize, measure_pair
from .simulation import (
    normalization_gap,
    rn_weights,
    simulate_discounted_exact,
    simulate_forward_euler,
)

COMMANDS = ("price", "hedge", "backtest", "verify")

_TINY = 1e-15


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, meta: list[str], header: list[str], rows: list[tuple]) -> None:
    lines = [f"# {m}" for m in meta]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _meta(cfg: ExperimentConfig, command: str) -> list[str]:
    return [
        f"curvehedge {__version__}",
        f"command: {command}",
        f"config-hash: {config_hash(cfg)}",
        f"seed: {cfg.seed}",
    ]


# -- commands ------------------------------------------------------------------


def _cmd_price(cfg: ExperimentConfig, out: Path) -> int:
    curve0 = cfg.build_curve()
    zeta = cfg.build_vol()
    spec = cfg.build_instrument()
    seeds = cfg.build_seeds()
    nu_value = measure_pair(curve0, spec.nu)
    steps = cfg.steps[-1]
    rows = []

    if spec.kind in ("bond-call", "caplet", "swaption"):
        model = effective_vol(zeta, spec, curve0)
        v = integrated_vol(model, 0.0, spec.exercise)
        fwd = forward_call_price(model.x0, spec.forward_strike, v)
        note = model.label or "exact lognormal ratio"
        rows.append(("analytic", "forward", fwd, 0.0, note))
        rows.append(("analytic", "cash", nu_value * fwd, 0.0, note))

    p_eu, se_eu = forward_price_euler(
        curve0, spec, zeta, cfg.paths, steps, seeds.child("price-euler"), threads=cfg.threads
    )
    rows.append(("mc-forward-euler", "forward", p_eu, se_eu, ""))
    rows.append(("mc-forward-euler", "cash", nu_value * p_eu, nu_value * se_eu, ""))

    p_ex, se_ex = forward_price_exact_reweighted(
        curve0, spec, zeta, cfg.paths, steps, seeds.child("price-exact"), threads=cfg.threads
    )
    rows.append(("mc-exact-reweighted", "forward", p_ex, se_ex, ""))
    rows.append(("mc-exact-reweighted", "cash", nu_value * p_ex, nu_value * se_ex, ""))
    # future value at settlement under the configured flat short rate
    fv = float(np.exp(cfg.short_rate * spec.settlement))
    rows.append(("mc-exact-reweighted", "cash-at-settlement", nu_value * p_ex * fv,
                 nu_value * se_ex * fv, f"flat short rate {cfg.short_rate}"))

    _write_csv(out / "price.csv", _meta(cfg, "price"),
               ["method", "units", "value", "se", "note"], rows)
    return 0


def _cmd_hedge(cfg: ExperimentConfig, out: Path) -> int:
    curve0 = cfg.build_curve()
    zeta = cfg.build_vol()
    spec = cfg.build_instrument()
    seeds = cfg.build_seeds()
    f0 = forward_normalize(curve0, spec.nu)
    steps = cfg.steps[0]
    grid = np.linspace(0.0, spec.exercise, steps + 1)
    bundle = simulate_forward_euler(
        f0, zeta, grid, seeds.child("hedge-path"), 1, threads=1
    )
    model = None
    if cfg.strategy == "delta":
        model = effective_vol(zeta, spec, curve0)
    ledger = build_ledger(
        bundle.path(0), spec, cfg.strategy, zeta, model=model,
        inner_paths=cfg.inner_paths, seeds=seeds.child("hedge"),
        rebalance_every=cfg.rebalance_every,
    )
    rows = []
    for date, phi, diag in zip(ledger.dates, ledger.strategies, ledger.diagnostics):
        for y, w in phi.atoms:
            se = diag.atom_se.get(y, 0.0) if diag is not None and diag.atom_se else 0.0
            rows.append((date, y, w, se))
    meta = _meta(cfg, "hedge") + [
        f"strategy: {cfg.strategy}",
        f"max-abs-eta: {_fmt(max((abs(e) for e in ledger.etas), default=0.0))}",
    ]
    if cfg.strategy == "delta" and spec.kind == "swaption":
        meta.append(f"note: {FROZEN_VOL_LABEL}")
    _write_csv(out / "hedge.csv", meta, ["date", "maturity", "weight", "se"], rows)
    return 0


def _cmd_backtest(cfg: ExperimentConfig, out: Path) -> int:
    curve0 = cfg.build_curve()
    zeta = cfg.build_vol()
    spec = cfg.build_instrument()
    seeds = cfg.build_seeds()
    n_paths = cfg.paths
    if cfg.strategy in ("clark-ocone", "instrument") and spec.kind in ("swaption", "exchange"):
        n_paths = min(n_paths, 8)  # nested route: one inner batch per (path, date)
    report = replication_report(
        spec, cfg.strategy, curve0, zeta, n_paths, cfg.steps, seeds.child("backtest"),
        inner_paths=cfg.inner_paths, rebalance_every=cfg.rebalance_every,
        threads=cfg.threads,
    )
    meta = _meta(cfg, "backtest") + [
        f"strategy: {cfg.strategy}",
        f"paths: {n_paths}",
        f"price: {_fmt(report.price)}",
        f"price-se: {_fmt(report.price_se)}",
        f"sd-slope: {_fmt(report.slope)}",
    ]
    rows = [
        (r.n_steps, r.mean_error, r.sd_error, r.max_abs_error, r.se, r.max_sf_gap)
        for r in report.rows
    ]
    _write_csv(out / "backtest.csv", meta,
               ["n_steps", "mean_error", "sd_error", "max_abs_error", "se", "max_sf_gap"],
               rows)
    return 0


# -- verify --------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.value <= self.bound


def _z(diff: float, se: float) -> float:
    """Statistical margin |diff| / (3 SE + floor); passes at <= 1."""
    return abs(diff) / (3.0 * se + _TINY)


def verify_checks(cfg: ExperimentConfig) -> list[Check]:
    curve0 = cfg.build_curve()
    zeta = cfg.build_vol()
    spec = cfg.build_instrument()
    seeds = cfg.build_seeds()
    f0 = forward_normalize(curve0, spec.nu)
    checks: list[Check] = []

    # normalization along every state of a fully recorded forward run
    n_norm = min(cfg.paths, 5_000)
    m_norm = min(cfg.steps[-1], 200)
    grid = np.linspace(0.0, spec.exercise, m_norm + 1)
    fwd = simulate_forward_euler(
        f0, zeta, grid, seeds.child("verify-euler"), n_norm, threads=cfg.threads
    )
    checks.append(Check("normalization-euler", normalization_gap(fwd), 1e-12))

    # martingale property, forward route
    worst = 0.0
    for k, y in enumerate(fwd.maturities):
        diff = float(fwd.terminal[:, k].mean() - f0.values[k])
        se = float(fwd.terminal[:, k].std(ddof=1) / np.sqrt(n_norm))
        worst = max(worst, _z(diff, se))
    checks.append(Check("martingale-forward-euler", worst, 1.0))

    # martingale property and density normalization, risk-neutral route
    rn = simulate_discounted_exact(
        curve0, zeta, grid, seeds.child("verify-exact"), n_norm,
        record="terminal", threads=cfg.threads,
    )
    worst = 0.0
    for k in range(len(rn.maturities)):
        diff = float(rn.terminal[:, k].mean() - curve0.values[k])
        se = float(rn.terminal[:, k].std(ddof=1) / np.sqrt(n_norm))
        worst = max(worst, _z(diff, se))
    checks.append(Check("martingale-exact", worst, 1.0))
    w = rn_weights(rn, spec.nu)
    checks.append(
        Check("density-mean-one", _z(float(w.mean() - 1.0), float(w.std(ddof=1) / np.sqrt(n_norm))), 1.0)
    )

    # the two pricing routes agree
    p_eu, se_eu = forward_price_euler(
        curve0, spec, zeta, cfg.paths, m_norm, seeds.child("verify-price-e"), threads=cfg.threads
    )
    p_ex, se_ex = forward_price_exact_reweighted(
        curve0, spec, zeta, cfg.paths, m_norm, seeds.child("verify-price-x"), threads=cfg.threads
    )
    checks.append(
        Check("price-route-agreement", abs(p_eu - p_ex) / (3.0 * float(np.hypot(se_eu, se_ex)) + _TINY), 1.0)
    )

    # closed form against Monte Carlo, where a closed form exists
    if spec.kind in ("bond-call", "caplet", "swaption"):
        model = effective_vol(zeta, spec, curve0)
        v = integrated_vol(model, 0.0, spec.exercise)
        fwd_price = forward_call_price(model.x0, spec.forward_strike, v)
        combined = 3.0 * float(np.hypot(se_eu, se_ex)) + _TINY
        reference = p_ex if spec.kind == "swaption" else 0.5 * (p_eu + p_ex)
        # the frozen-vol swap model is an approximation; allow a 2% band on top
        slack = 0.02 * abs(fwd_price) if spec.kind == "swaption" else 0.0
        checks.append(
            Check("price-analytic-vs-mc", max(abs(fwd_price - reference) - slack, 0.0) / combined, 1.0)
        )

        # analytic slope against a central finite difference
        x = model.x0
        if v > 0.0 and spec.forward_strike > 0.0:
            h = 1e-5 * x
            slope = nd1_nd2(x, spec.forward_strike, v)[0]
            fd = (
                forward_call_price(x + h, spec.forward_strike, v)
                - forward_call_price(x - h, spec.forward_strike, v)
            ) / (2.0 * h)
            checks.append(Check("delta-finite-difference", abs(slope - fd) / max(abs(slope), _TINY), 1e-6))

    # hedge-strategy checks on a short path
    m_led = min(cfg.steps[0], 25)
    led_grid = np.linspace(0.0, spec.exercise, m_led + 1)
    led_bundle = simulate_forward_euler(
        f0, zeta, led_grid, seeds.child("verify-ledger"), 1, threads=1
    )
    path = led_bundle.path(0)
    inner = min(cfg.inner_paths, 4_000)
    ledger = build_ledger(
        path, spec, "clark-ocone", zeta, inner_paths=inner,
        seeds=seeds.child("verify-co"), rebalance_every=max(1, m_led // 5),
    )
    worst = 0.0
    for eta, diag in zip(ledger.etas, ledger.diagnostics):
        worst = max(worst, abs(eta) / (3.0 * diag.value_se + 1e-12))
    checks.append(Check("zero-eta", worst, 1.0))

    if spec.kind in ("bond-call", "caplet"):
        model = effective_vol(zeta, spec, curve0)
        worst = 0.0
        for l in (0, m_led // 2):
            state = path.curve(l)
            phi_co, diag = clark_ocone_strategy(
                state, spec, zeta, inner, seeds.child("verify-coin", l)
            )
            phi_d, _ = delta_strategy(state, spec, model)
            for y in spec.support():
                gap = abs(phi_co.weight_at(y) - phi_d.weight_at(y))
                worst = max(worst, gap / (3.0 * diag.atom_se[y] + _TINY))
        checks.append(Check("strategy-coincidence", worst, 1.0))
    elif spec.kind == "swaption":
        model = effective_vol(zeta, spec, curve0)
        state = path.curve(0)
        a = swaption_delta_strategy(state, spec, model)
        b = jamshidian_strategy(state, spec, model)
        gap = abs(hedge_value(state, a) - hedge_value(state, b))
        checks.append(Check("swap-grouping-identity", gap, 1e-12))
        phi_co, diag = clark_ocone_strategy(state, spec, zeta, inner, seeds.child("verify-sw"))
        phi_in = instrument_strategy(
            state, spec, zeta, inner_paths=inner, seeds=seeds.child("verify-sw")
        )
        gap = max(abs(phi_co.weight_at(y) - phi_in.weight_at(y)) for y in spec.support())
        checks.append(Check("specialization-identity", gap, 1e-10))

    # representation residual has zero mean (general instruments run one
    # nested batch per path and date, so they get a small outer budget)
    from .hedging import single_asset_ratio_kind

    n_res = min(cfg.paths, 2_000) if single_asset_ratio_kind(spec) else 64
    res = co_representation_residual(
        f0, spec, zeta, [m_led], n_res,
        min(cfg.inner_paths, 2_000), seeds.child("verify-res"),
    )
    checks.append(Check("residual-mean-zero", _z(res.rows[0].mean, res.rows[0].se), 1.0))

    # pathwise noise-derivative check
    y_probe = spec.mu.support[0]
    fd, an = bump_check(
        curve0, spec.nu, zeta, spec.exercise, y_probe,
        steps=min(cfg.steps[-1], 200), seeds=seeds.child("verify-bump"),
    )
    denom = max(abs(an), 1e-10)
    checks.append(Check("noise-derivative-bump", abs(fd - an) / denom, 1e-2))

    # config round-trip stability
    checks.append(
        Check("config-round-trip", 0.0 if emit_config(cfg) == emit_config(parse_config(emit_config(cfg))) else 1.0, 0.5)
    )
    return checks


def _cmd_verify(cfg: ExperimentConfig, out: Path) -> int:
    checks = verify_checks(cfg)
    rows = [(c.name, "pass" if c.passed else "FAIL", c.value, c.bound) for c in checks]
    _write_csv(out / "verify.csv", _meta(cfg, "verify"),
               ["check", "status", "value", "bound"], rows)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: value={_fmt(c.value)} bound={_fmt(c.bound)}")
    return 0 if all(c.passed for c in checks) else 1


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvehedge",
        description="Bond-market hedging engine: price, hedge, backtest, verify.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--paths", type=int, help="override run.paths")
    parser.add_argument("--inner-paths", type=int, help="override run.inner_paths")
    parser.add_argument("--steps", type=str, help="override run.steps, e.g. 25,50,100")
    parser.add_argument("--threads", type=int, help="override run.threads")
    parser.add_argument("--out", type=str, help="override run.out_dir")
    return parser


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.paths is not None:
        cfg.paths = args.paths
    if args.inner_paths is not None:
        cfg.inner_paths = args.inner_paths
    if args.steps is not None:
        steps = [int(s) for s in args.steps.split(",") if s]
        if not steps or sorted(steps) != steps or any(s <= 0 for s in steps):
            raise ConfigError(["--steps: must be an increasing list of positive integers"])
        cfg.steps = steps
    if args.threads is not None:
        cfg.threads = max(1, args.threads)
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def run_command(command: str, cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = {
        "price": _cmd_price,
        "hedge": _cmd_hedge,
        "backtest": _cmd_backtest,
        "verify": _cmd_verify,
    }[command]
    return handler(cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        cfg = apply_overrides(cfg, args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return 2
    return run_command(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
