"""Command-line front end.

One subcommand per module capability; every run is deterministic given
--seed.  Exit codes: 0 success, 1 usage error, 2 resource limit, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from fractions import Fraction

import numpy as np

from . import balls as balls_mod
from . import coupling as coupling_mod
from . import harness as harness_mod
from . import spectral as spectral_mod
from .domain import Params, exact_error, sample_training_set
from .errors import ResourceLimitError, UsageError, VerificationError
from .learner import (
    SharedKey,
    enumerate_acceptance_ball,
    estimate_transitions,
    exact_mode,
    replicable_learn,
)
from .rng import ROLE_KEY, ROLE_SAMPLE1, ROLE_TARGET, substream


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as UsageError."""

    def error(self, message):
        raise UsageError(message)


def _add_params_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--d", type=int, default=None)
    sub.add_argument("--k", type=int, default=None)
    sub.add_argument("--epsilon", type=float, default=None)
    sub.add_argument("--rho", type=float, default=None)
    sub.add_argument("--delta", type=float, default=None)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--beta-constant", dest="beta_constant", type=float,
                     default=None)
    sub.add_argument("--radius-fraction", dest="radius_fraction", type=float,
                     default=None)


def _params_from_flags(ns, base: Params | None = None) -> Params:
    """Params from CLI flags, overlaid on an optional config-file base."""
    fields = ("d", "k", "epsilon", "rho", "delta", "n",
              "beta_constant", "radius_fraction")
    overrides = {f: getattr(ns, f) for f in fields if getattr(ns, f) is not None}
    if base is not None:
        return replace(base, **overrides) if overrides else base
    defaults = {"delta": 0.05, "beta_constant": 1.0, "radius_fraction": 0.25}
    merged = {**defaults, **overrides}
    missing = [f for f in ("d", "k", "epsilon", "rho", "n") if f not in merged]
    if missing:
        raise UsageError(
            "missing required parameters: " + ", ".join(f"--{m}" for m in missing)
        )
    return Params(**merged)


def _load_config(ns) -> harness_mod.ExperimentConfig | None:
    if ns.config is None:
        return None
    if not os.path.exists(ns.config):
        raise UsageError(f"config file not found: {ns.config}")
    with open(ns.config, "r", encoding="utf-8") as fh:
        return harness_mod.parse_config(fh.read())


def _emit(ns, text: str, payload: dict) -> None:
    """Write the run's output: JSON if requested, text otherwise."""
    body = json.dumps(payload, indent=2, default=_json_default) if ns.json else text
    if getattr(ns, "out", None):
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write(body if body.endswith("\n") else body + "\n")
    else:
        print(body)


def _json_default(obj):
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cmd_learn(ns) -> int:
    params = _params_from_flags(ns, _load_config(ns).params if ns.config else None)
    target = tuple(
        int(c) for c in substream(ns.seed, 0, ROLE_TARGET).integers(0, params.k,
                                                                    size=params.d)
    )
    key = SharedKey.from_rng(substream(ns.seed, 0, ROLE_KEY))
    sample = sample_training_set(params, target, substream(ns.seed, 0, ROLE_SAMPLE1))
    transitions = estimate_transitions(sample, params)
    output = replicable_learn(sample, params, key)
    err = exact_error(output, target, params)
    text = "\n".join([
        f"target      {target}",
        f"transitions {transitions}",
        f"output      {output}",
        f"exact_error {err:.17g}",
        f"radius      {params.radius}",
    ])
    _emit(ns, text, {
        "target": list(target),
        "transitions": list(transitions),
        "output": list(output),
        "exact_error": err,
        "radius": params.radius,
        "seed": ns.seed,
    })
    return 0


def _config_for_run(ns) -> harness_mod.ExperimentConfig:
    base = _load_config(ns)
    params = _params_from_flags(ns, base.params if base else None)
    kwargs = {}
    if base is not None:
        kwargs = {
            "trials": base.trials,
            "master_seed": base.master_seed,
            "out": base.out,
            "sweep_n": base.sweep_n,
            "sweep_epsilon": base.sweep_epsilon,
            "sweep_rho": base.sweep_rho,
            "sweep_d": base.sweep_d,
            "sweep_k": base.sweep_k,
        }
    if ns.trials is not None:
        kwargs["trials"] = ns.trials
    if ns.seed_given:
        kwargs["master_seed"] = ns.seed
    return harness_mod.ExperimentConfig(params=params, **kwargs)


def _cmd_replicate(ns) -> int:
    config = _config_for_run(ns)
    report = harness_mod.run_replication_experiment(config, threads=ns.threads)
    csv_text = harness_mod.CSV_HEADER + "\n" + report.csv_row() + "\n"
    payload = {
        "rho_hat": report.rho_hat,
        "rho_lo": report.rho_lo,
        "rho_hi": report.rho_hi,
        "err_rate": report.err_rate,
        "mean_err": report.mean_err,
        "median_err": report.median_err,
        "trials": report.trials,
        "disagreements": report.disagreements,
        "master_seed": report.master_seed,
    }
    _emit(ns, csv_text.rstrip("\n"), payload)
    return 0


def _cmd_sweep(ns) -> int:
    config = _config_for_run(ns)
    out_path = ns.out or config.out
    if out_path is None:
        raise UsageError("sweep needs --out (or out= in the config file)")
    rows = harness_mod.sweep_experiments(
        config, out_path=out_path, resume=ns.resume, threads=ns.threads
    )
    print(f"wrote {len(rows)} rows to {out_path}")
    return 0


def _cmd_mode(ns) -> int:
    params = _params_from_flags(ns, _load_config(ns).params if ns.config else None)
    target = tuple(
        int(c) for c in substream(ns.seed, 0, ROLE_TARGET).integers(0, params.k,
                                                                    size=params.d)
    )
    key = SharedKey.from_rng(substream(ns.seed, 0, ROLE_KEY))
    result = exact_mode(params, target, key)
    bits = "".join(str(b) for b in result.mode_labeling)
    text = "\n".join([
        f"target            {target}",
        f"mode_probability  {result.mode_probability} "
        f"({float(result.mode_probability):.6g})",
        f"mode_labeling     {bits}",
        f"support_size      {len(result.distribution)}",
    ])
    _emit(ns, text, {
        "target": list(target),
        "mode_probability": float(result.mode_probability),
        "mode_labeling": bits,
        "support_size": len(result.distribution),
        "seed": ns.seed,
    })
    return 0


def _cmd_spectrum(ns) -> int:
    d, k = ns.d, ns.k
    if d is None or k is None:
        raise UsageError("spectrum needs --d and --k")
    dense = k**d <= spectral_mod.DENSE_ORACLE_LIMIT and not ns.no_dense
    report = (spectral_mod.eigen_check(d, k) if dense
              else spectral_mod.spectrum_report(d, k))
    lines = [f"eigenvalues ({len(report.analytic_sorted)}, descending):"]
    shown = report.analytic_sorted[:20]
    lines.append("  " + ", ".join(f"{x:.10g}" for x in shown)
                 + (" ..." if len(report.analytic_sorted) > 20 else ""))
    lines.append(f"trace        {report.trace:.10g} (expected {k**d})")
    if report.max_abs_deviation is not None:
        lines.append(f"dense_max_dev {report.max_abs_deviation:.3e}")
        lines.append(f"gram_dev      {report.gram_deviation:.3e}")
    if ns.out and not ns.json:
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write("index,eigenvalue\n")
            for i, lam in report.csv_rows():
                fh.write(f"{i},{lam:.17g}\n")
        print(f"wrote {len(report.analytic_sorted)} eigenvalues to {ns.out}")
        return 0
    _emit(ns, "\n".join(lines), {
        "d": d,
        "k": k,
        "eigenvalues": list(report.analytic_sorted),
        "trace": report.trace,
        "max_abs_deviation": report.max_abs_deviation,
        "gram_deviation": report.gram_deviation,
    })
    return 0


def _cmd_expansion(ns) -> int:
    d, k = ns.d, ns.k
    if d is None or k is None:
        raise UsageError("expansion needs --d and --k")
    params = Params(d=d, k=k, epsilon=0.1, rho=0.1, delta=0.05, n=1)
    points = list(enumerate_acceptance_ball((0,) * d, ns.ball_radius, params))
    internal = spectral_mod.internal_edge_count(points, d, k)
    ratio = spectral_mod.expansion_ratio(points, d, k)
    total = len(points) * 3**d
    text = "\n".join([
        f"set_size       {len(points)} (ball radius {ns.ball_radius})",
        f"internal_edges {internal} of {total}",
        f"expansion      {ratio:.17g}",
        f"escaping       {1 - ratio:.17g}",
    ])
    _emit(ns, text, {
        "d": d, "k": k, "ball_radius": ns.ball_radius,
        "set_size": len(points), "internal_edges": internal,
        "directed_total": total, "expansion_ratio": ratio,
    })
    return 0


def _cmd_tail(ns) -> int:
    d, k = ns.d, ns.k
    if d is None or k is None:
        raise UsageError("tail needs --d and --k")
    rng = substream(ns.seed, 0, 0)
    report = spectral_mod.tail_and_moment_estimate(d, k, ns.r, ns.trials, rng)
    lines = [
        f"p_hat        {report.p_hat:.6g} [{report.p_lo:.6g}, {report.p_hi:.6g}]",
        f"moment_{report.r}     {report.moment_hat:.10g}",
        f"mean_exact   {float(report.mean_exact):.10g}",
        f"implication  {report.implication_violations} violations "
        f"of {report.implication_checked} checked",
        f"r_in_range   {report.r_in_valid_range}",
    ]
    if k**d <= spectral_mod.ENUMERATION_LIMIT:
        exact = spectral_mod.exact_tail_probability(d, k)
        lines.append(f"p_exact      {exact} ({float(exact):.10g})")
    _emit(ns, "\n".join(lines), report.csv_row())
    if report.implication_violations:
        raise VerificationError(
            f"{report.implication_violations} tail implication violations"
        )
    return 0


def _parse_law(text: str, flag: str) -> list[Fraction]:
    try:
        return [Fraction(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag}: cannot parse {text!r}") from exc


def _cmd_coupling(ns) -> int:
    if ns.x is not None or ns.y is not None:
        if ns.x is None or ns.y is None:
            raise UsageError("coupling needs both --x and --y, or neither")
        matrix = coupling_mod.majorization_coupling(
            _parse_law(ns.x, "--x"), _parse_law(ns.y, "--y")
        )
        lines = ["coupling rows (row i = conditional law given source size i):"]
        for i, row in enumerate(matrix.rows):
            lines.append(
                f"  {i}: " + ", ".join(f"{float(p):.10g}" for p in row)
            )
        _emit(ns, "\n".join(lines), {
            "rows": [[float(p) for p in row] for row in matrix.rows],
        })
        return 0

    d, k = ns.d, ns.k
    if d is None or k is None or ns.n is None:
        raise UsageError("coupling needs --x/--y, or --d/--k/--n")
    params = Params(d=d, k=k, epsilon=0.1, rho=0.1, delta=0.05, n=max(ns.n, 1))
    rng = substream(ns.seed, 0, 0)
    built = coupling_mod.build_step_coupling(
        params, rng, n=ns.n, pre_trials=ns.pre_trials
    )
    lines = [
        f"size_law   " + ", ".join(f"{float(p):.6g}" for p in built.size_law),
        f"target_law " + ", ".join(f"{float(p):.6g}" for p in built.target_law),
        f"regime     k >= {built.regime_threshold:.1f}: "
        f"{'holds' if built.regime_ok else 'fails'} (k={k})",
        f"dkw_margin {built.dkw_margin:.6g}",
    ]
    _emit(ns, "\n".join(lines), {
        "size_law": [float(p) for p in built.size_law],
        "target_law": [float(p) for p in built.target_law],
        "regime_ok": built.regime_ok,
        "regime_threshold": built.regime_threshold,
        "dkw_margin": built.dkw_margin,
    })
    return 0


def _cmd_step_verify(ns) -> int:
    d, k = ns.d, ns.k
    if d is None or k is None or ns.n is None:
        raise UsageError("step-verify needs --d, --k and --n")
    params = Params(d=d, k=k, epsilon=0.1, rho=0.1, delta=0.05, n=max(ns.n, 1))
    rng = substream(ns.seed, 0, 0)
    report = coupling_mod.verify_step_distribution(
        params, ns.trials, rng, n=ns.n, buckets=ns.buckets,
        pre_trials=ns.pre_trials,
    )
    text = "\n".join([
        f"tv_direction {report.tv_direction:.6g}",
        f"tv_v_binned  {report.tv_v_binned:.6g}",
        f"tv_u_binned  {report.tv_u_binned:.6g}",
        f"chi2         stat {report.chi2_stat:.6g}, dof {report.chi2_dof}, "
        f"p {report.chi2_pvalue:.6g}",
        f"regime       k >= {report.regime_threshold:.1f}: "
        f"{'holds' if report.regime_ok else 'fails'}",
    ])
    _emit(ns, text, report.csv_row())
    return 0


def _cmd_balls(ns) -> int:
    if ns.d is None or ns.r is None:
        raise UsageError("balls needs --d and --r")
    table = balls_mod.build_ball_table(ns.d, ns.r, ns.k)
    lines = [f"count {table.total}"]
    lines.append("shells " + ", ".join(str(c) for c in table.counts))
    if ns.out and not ns.json:
        with open(ns.out, "w", encoding="utf-8") as fh:
            fh.write("t,count,cumulative\n")
            for t, c, cum in table.csv_rows():
                fh.write(f"{t},{c},{cum}\n")
        print(f"wrote {len(table.counts)} shells to {ns.out}")
        return 0
    _emit(ns, "\n".join(lines), {
        "d": ns.d, "radius": ns.r, "k": ns.k,
        "count": table.total, "shells": list(table.counts),
    })
    return 0


def _cmd_lo_check(ns) -> int:
    if ns.coeffs is None:
        raise UsageError("lo-check needs --coeffs")
    if ns.k is None:
        raise UsageError("lo-check needs --k")
    try:
        coeffs = [int(p.strip()) for p in ns.coeffs.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"--coeffs: cannot parse {ns.coeffs!r}") from exc
    rng = substream(ns.seed, 0, 0)
    report = spectral_mod.littlewood_offord_estimate(
        coeffs, ns.y, ns.k, ns.trials, rng
    )
    text = "\n".join([
        f"estimate {report.estimate:.10g} ({'exact' if report.exact else 'sampled'})",
        f"bound    {report.bound:.10g}",
        f"s        {report.s}",
    ])
    _emit(ns, text, {
        "estimate": report.estimate, "bound": report.bound,
        "s": report.s, "k": report.k, "y": report.y, "exact": report.exact,
    })
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="replearn",
        description="Replicable wrap-around interval learning experiments.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p, params=False):
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int,
                       default=max(1, os.cpu_count() or 1))
        p.add_argument("--json", action="store_true")
        if params:
            _add_params_flags(p)

    p = sub.add_parser("learn", help="one training run of the learner")
    common(p, params=True)
    p.set_defaults(handler=_cmd_learn)

    p = sub.add_parser("replicate", help="paired-run replication experiment")
    common(p, params=True)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(handler=_cmd_replicate)

    p = sub.add_parser("sweep", help="replication experiments over a grid")
    common(p, params=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("mode", help="exact output distribution and its mode")
    common(p, params=True)
    p.set_defaults(handler=_cmd_mode)

    p = sub.add_parser("spectrum", help="analytic spectrum and dense oracle")
    common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--no-dense", action="store_true")
    p.set_defaults(handler=_cmd_spectrum)

    p = sub.add_parser("expansion", help="internal edge fraction of a ball")
    common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--ball-radius", dest="ball_radius", type=int, default=1)
    p.set_defaults(handler=_cmd_expansion)

    p = sub.add_parser("tail", help="tail indicator and moment estimates")
    common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--trials", type=int, default=10000)
    p.set_defaults(handler=_cmd_tail)

    p = sub.add_parser("coupling", help="majorization coupling of size laws")
    common(p)
    p.add_argument("--x", type=str, default=None)
    p.add_argument("--y", type=str, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--pre-trials", dest="pre_trials", type=int,
                   default=coupling_mod.DEFAULT_PRE_TRIALS)
    p.set_defaults(handler=_cmd_coupling)

    p = sub.add_parser("step-verify", help="distributional checks of the sampler")
    common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--buckets", type=int, default=16)
    p.add_argument("--pre-trials", dest="pre_trials", type=int,
                   default=coupling_mod.DEFAULT_PRE_TRIALS)
    p.set_defaults(handler=_cmd_step_verify)

    p = sub.add_parser("balls", help="wrap-ball counts and shell profile")
    common(p)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(handler=_cmd_balls)

    p = sub.add_parser("lo-check", help="signed-sum anticoncentration check")
    common(p)
    p.add_argument("--coeffs", type=str, default=None)
    p.add_argument("--y", type=int, default=0)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--trials", type=int, default=100000)
    p.set_defaults(handler=_cmd_lo_check)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return 0 if (exc.code in (0, None)) else 1
    if getattr(ns, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    if ns.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    # an explicit --seed overrides a config master_seed; its absence must not
    ns.seed_given = ns.seed is not None
    if ns.seed is None:
        ns.seed = 0
    try:
        return ns.handler(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 2
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
