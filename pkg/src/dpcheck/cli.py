"""Command-line front end: run mechanisms, audits, divergence computations,
and the report-noisy-max verification suite from JSON configuration files.

All reports are JSON with sorted keys and every report embeds the seed, so
a fixed (config, seed) pair reproduces byte-identical output.  Exit codes:
0 pass or no violation found, 1 violation (witness in the report), 2 usage
or configuration error, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .datasets import (
    CountingQuerySet,
    Dataset,
    counting_query,
    counting_sensitivity_analytic,
    pairs_within_distance,
)
from .divergence import (
    DiscreteDistribution,
    coordinate_interval_events,
    divergence_discrete,
    divergence_laplace_pair,
    divergence_monte_carlo,
    divergence_report_json,
    interval_events,
    label_subset_events,
)
from .errors import ConfigError, DpcheckError
from .laplace import LaplaceDistribution, RandomSource, laplace_sample_block
from .mechanisms import (
    Mechanism,
    PrivacyBudget,
    SensitivitySpec,
    add_budgets,
    check_dp_exact,
    check_dp_laplace,
    check_dp_statistical,
    group_budget,
    laplace_mechanism,
    pair_compose,
    post_process,
    randomized_response,
    weaken_budget,
)
from .rnm import rnm_mechanism, verify_rnm_dp_finer

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3

_VERDICT_EXIT = {
    "pass": EXIT_PASS,
    "no-violation-found": EXIT_PASS,
    "violation": EXIT_VIOLATION,
    "inconclusive": EXIT_INCONCLUSIVE,
}


def exit_code_for(verdict: str) -> int:
    """Total map from verdict to process exit code."""
    try:
        return _VERDICT_EXIT[verdict]
    except KeyError:
        raise ConfigError(f"unknown verdict {verdict!r}") from None


@dataclass
class RunConfig:
    command: str
    config: dict
    seed: int = 0
    samples: int = 10_000
    tol: float = 1e-9
    alpha: float = 0.05
    method: str = "auto"
    out: str | None = None


def _require(cfg: dict, key: str, context: str):
    if key not in cfg:
        raise ConfigError(f"{context}: missing required field {key!r}")
    return cfg[key]


def _parse_queries(obj) -> CountingQuerySet:
    try:
        return CountingQuerySet.from_json(obj)
    except DpcheckError as exc:
        raise ConfigError(f"bad query set: {exc}") from exc


def _parse_input(obj):
    if isinstance(obj, dict) and "histogram" in obj:
        return Dataset.from_json(obj)
    if isinstance(obj, str):
        # a path to a dataset JSON file
        try:
            with open(obj, "r", encoding="utf-8") as fh:
                return Dataset.from_json(json.load(fh))
        except (OSError, json.JSONDecodeError, DpcheckError) as exc:
            raise ConfigError(f"cannot load dataset from {obj!r}: {exc}") from exc
    if isinstance(obj, int):
        return obj
    raise ConfigError(f"cannot interpret input {obj!r}")


def build_mechanism(cfg: dict) -> Mechanism:
    kind = _require(cfg, "kind", "mechanism")
    if kind == "laplace":
        q = _parse_queries(_require(cfg, "queries", "laplace mechanism"))
        eps = float(_require(cfg, "epsilon", "laplace mechanism"))
        sens_value = cfg.get("sensitivity")
        if sens_value is None:
            sens = SensitivitySpec(float(counting_sensitivity_analytic(q)), "analytic")
        else:
            sens = SensitivitySpec(float(sens_value), "declared")
        return laplace_mechanism(
            lambda d, q=q: [float(v) for v in counting_query(q, d)],
            q.m,
            sens,
            eps,
            input_desc=q.n,
        )
    if kind == "rnm":
        q = _parse_queries(_require(cfg, "queries", "rnm mechanism"))
        eps = float(_require(cfg, "epsilon", "rnm mechanism"))
        return rnm_mechanism(q, eps, noise_mask=cfg.get("noise_mask"))
    if kind == "randomized-response":
        return randomized_response(float(_require(cfg, "flip_prob", "randomized response")))
    if kind == "composed":
        op = _require(cfg, "op", "composed mechanism")
        if op == "pair":
            components = _require(cfg, "components", "pair composition")
            if len(components) != 2:
                raise ConfigError("pair composition takes exactly two components")
            return pair_compose(build_mechanism(components[0]), build_mechanism(components[1]))
        if op == "post":
            base = build_mechanism(_require(cfg, "base", "post composition"))
            mapping = _require(cfg, "map", "post composition")
            return post_process(base, lambda y: mapping[str(y)])
        raise ConfigError(f"unknown composition op {op!r}")
    raise ConfigError(f"unknown mechanism kind {kind!r}")


def build_adjacency(cfg: dict) -> list[tuple]:
    kind = _require(cfg, "kind", "adjacency")
    if kind == "l1":
        n = int(_require(cfg, "n", "l1 adjacency"))
        max_entry = int(_require(cfg, "max_entry", "l1 adjacency"))
        k = int(cfg.get("k", 1))
        return pairs_within_distance(n, max_entry, k)
    if kind == "pairs":
        items = _require(cfg, "items", "pair list")
        return [(_parse_input(a), _parse_input(b)) for a, b in items]
    raise ConfigError(f"unknown adjacency kind {kind!r}")


def _parse_budget(cfg: dict) -> PrivacyBudget:
    try:
        return PrivacyBudget(float(_require(cfg, "epsilon", "budget")), float(cfg.get("delta", 0.0)))
    except DpcheckError as exc:
        raise ConfigError(f"bad budget: {exc}") from exc


def _jsonable_output(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable_output(v) for v in value]
    return value


def _dump(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Subcommands; each returns (exit_code, report_text)
# ---------------------------------------------------------------------------


def cmd_sample(run: RunConfig) -> tuple[int, str]:
    cfg = run.config
    mech = build_mechanism(_require(cfg, "mechanism", "sample"))
    value = _parse_input(_require(cfg, "input", "sample"))
    rng = RandomSource(run.seed)
    header = {
        "command": "sample",
        "seed": run.seed,
        "samples": run.samples,
        "mechanism": cfg["mechanism"],
    }
    lines = [json.dumps(header, sort_keys=True)]
    for _ in range(run.samples):
        lines.append(
            json.dumps({"output": _jsonable_output(mech.sample(value, rng))}, sort_keys=True)
        )
    return EXIT_PASS, "\n".join(lines) + "\n"


def _dist_spec(obj: dict):
    """Classify a distribution spec: ('discrete', dist) | ('laplace', d) | ('sampler', fn, shape)."""
    kind = _require(obj, "kind", "distribution spec")
    if kind == "discrete":
        dist = DiscreteDistribution(
            tuple(_require(obj, "support", "discrete spec")),
            tuple(float(p) for p in _require(obj, "probs", "discrete spec")),
        )
        return ("discrete", dist)
    if kind == "laplace":
        return ("laplace", LaplaceDistribution(float(_require(obj, "b", "laplace spec")), float(obj.get("z", 0.0))))
    if kind == "mechanism":
        mech = build_mechanism(_require(obj, "mechanism", "mechanism spec"))
        value = _parse_input(_require(obj, "input", "mechanism spec"))
        return ("mechanism", mech, value)
    raise ConfigError(f"unknown distribution kind {kind!r}")


def _spec_sampler(spec, rng: RandomSource) -> tuple[Callable[[int], Any], str]:
    """Sampler function plus its output shape tag: 'labels' | 'scalar' | 'vector'."""
    if spec[0] == "discrete":
        dist = spec[1]

        def draw(n: int):
            idx = dist.sample_index_block(rng, n)
            return [dist.support[i] for i in idx]

        return draw, "labels"
    if spec[0] == "laplace":
        d = spec[1]
        return (lambda n: laplace_sample_block(d, rng, n)), "scalar"
    mech, value = spec[1], spec[2]
    kind = mech.output_desc[0]
    if kind == "finite":
        shape = "labels"
    elif kind == "real-vector":
        shape = "scalar" if mech.output_desc[1] == 1 else "vector"
    else:
        shape = "scalar"

    def draw(n: int):
        if mech.sample_block is not None:
            block = mech.sample_block(value, rng, n)
            if shape == "scalar" and getattr(block, "ndim", 1) == 2:
                return np.asarray(block)[:, 0]
            return block
        out = [mech.sample(value, rng) for _ in range(n)]
        if shape == "scalar":
            return np.asarray([v[0] if isinstance(v, (list, tuple)) else v for v in out], dtype=float)
        if shape == "vector":
            return np.asarray(out, dtype=float)
        return out

    return draw, shape


def _spec_labels(spec) -> tuple | None:
    if spec[0] == "discrete":
        return spec[1].support
    if spec[0] == "mechanism" and spec[1].output_desc[0] == "finite":
        return spec[1].output_desc[1]
    return None


def cmd_divergence(run: RunConfig) -> tuple[int, str]:
    cfg = run.config
    eps = float(_require(cfg, "epsilon", "divergence"))
    lhs = _dist_spec(_require(cfg, "lhs", "divergence"))
    rhs = _dist_spec(_require(cfg, "rhs", "divergence"))
    method = run.method

    if method == "auto":
        if lhs[0] == "discrete" and rhs[0] == "discrete":
            method = "exact"
        elif lhs[0] == "laplace" and rhs[0] == "laplace" and lhs[1].b == rhs[1].b and lhs[1].b > 0:
            method = "quadrature"
        else:
            method = "monte-carlo"

    if method == "exact":
        if lhs[0] != "discrete" or rhs[0] != "discrete":
            raise ConfigError("exact method needs two discrete specs")
        result = divergence_discrete(lhs[1], rhs[1], eps)
    elif method == "quadrature":
        if lhs[0] != "laplace" or rhs[0] != "laplace" or lhs[1].b != rhs[1].b:
            raise ConfigError("quadrature method needs two laplace specs with a common scale")
        result = divergence_laplace_pair(lhs[1].b, lhs[1].z, rhs[1].z, eps, run.tol)
    elif method == "monte-carlo":
        rng = RandomSource(run.seed)
        draw_mu, shape_mu = _spec_sampler(lhs, rng.fork(0))
        draw_nu, shape_nu = _spec_sampler(rhs, rng.fork(1))
        if shape_mu != shape_nu:
            raise ConfigError(f"incompatible spec pair: {shape_mu} vs {shape_nu}")
        xs, ys = draw_mu(run.samples), draw_nu(run.samples)
        if shape_mu == "labels":
            labels_mu = _spec_labels(lhs) or tuple(dict.fromkeys(list(xs) + list(ys)))
            events = label_subset_events(labels_mu)
        elif shape_mu == "vector":
            if np.asarray(xs).shape[1] != np.asarray(ys).shape[1]:
                raise ConfigError("incompatible spec pair: vector lengths differ")
            events = coordinate_interval_events(np.vstack([xs, ys]))
        else:
            events = interval_events(np.concatenate([np.asarray(xs), np.asarray(ys)]))
        result = divergence_monte_carlo(
            lambda n: xs, lambda n: ys, events, eps, run.samples, run.alpha
        )
    else:
        raise ConfigError(f"unknown divergence method {method!r}")

    report = {
        "command": "divergence",
        "seed": run.seed,
        **divergence_report_json(eps, result),
    }
    return EXIT_PASS, _dump(report)


def cmd_audit(run: RunConfig) -> tuple[int, str]:
    cfg = run.config
    mech = build_mechanism(_require(cfg, "mechanism", "audit"))
    budget = _parse_budget(_require(cfg, "budget", "audit"))
    pairs = build_adjacency(_require(cfg, "adjacency", "audit"))
    method = run.method
    if method == "auto":
        if mech.pmf is not None:
            method = "exact"
        elif mech.densities is not None:
            method = "quadrature"
        else:
            method = "statistical"

    detail: dict[str, Any] = {}
    witness_json = None
    if method == "exact":
        ok, witness = check_dp_exact(mech, pairs, budget)
        verdict = "pass" if ok else "violation"
        witness_json = witness.to_json() if witness else None
    elif method == "quadrature":
        ok, witness = check_dp_laplace(mech, pairs, budget, tol=run.tol)
        verdict = "pass" if ok else "violation"
        witness_json = witness.to_json() if witness else None
    elif method == "statistical":
        report = check_dp_statistical(
            mech, pairs, budget, run.samples, run.alpha, RandomSource(run.seed)
        )
        verdict = report.verdict
        witness_json = report.witness.to_json() if report.witness else None
        detail = report.to_json()
    else:
        raise ConfigError(f"unknown audit method {method!r}")

    report_obj = {
        "command": "audit",
        "seed": run.seed,
        "method": method,
        "budget": {"epsilon": budget.eps, "delta": budget.delta},
        "pairs": len(pairs),
        "verdict": verdict,
        "witness": witness_json,
        "detail": detail,
    }
    return exit_code_for(verdict), _dump(report_obj)


# Deterministic query-set families exercised by rnm-verify.  "identical"
# stresses the naive sensitivity bound (every query counts the changed
# type); "contrast" drives the observed ratio toward its exp(eps) ceiling
# (one query counts the changed type, the rest count a different one).
def rnm_query_families(n: int, m: int) -> dict[str, CountingQuerySet]:
    families = {
        "identical": CountingQuerySet(n, tuple(frozenset({0}) for _ in range(m))),
        "singletons": CountingQuerySet(n, tuple(frozenset({j % n}) for j in range(m))),
        "prefixes": CountingQuerySet(
            n, tuple(frozenset(range(min(j + 1, n))) for j in range(m))
        ),
    }
    if n >= 2:
        families["contrast"] = CountingQuerySet(
            n, tuple(frozenset({0}) if j == 0 else frozenset({1}) for j in range(m))
        )
    return families


def cmd_rnm_verify(run: RunConfig) -> tuple[int, str]:
    cfg = run.config
    n = int(cfg.get("n", 3))
    max_entry = int(cfg.get("max_entry", 2))
    m_max = int(cfg.get("m_max", 3))
    eps = float(_require(cfg, "epsilon", "rnm-verify"))
    if run.tol <= 0:
        raise ConfigError("tolerance must be positive")
    wanted = cfg.get("families")

    sections = []
    all_pass = True
    max_ratio = 0.0
    for m in range(1, m_max + 1):
        for name, q in sorted(rnm_query_families(n, m).items()):
            if wanted is not None and name not in wanted:
                continue
            rep = verify_rnm_dp_finer(q, eps, max_entry=max_entry, tol=run.tol)
            all_pass = all_pass and rep.all_pass
            max_ratio = max(max_ratio, rep.max_ratio)
            sections.append({"family": name, "queries": q.to_json(), **rep.to_json()})

    report = {
        "command": "rnm-verify",
        "seed": run.seed,
        "epsilon": eps,
        "tol": run.tol,
        "n": n,
        "max_entry": max_entry,
        "m_max": m_max,
        "finer_bound": float(np.exp(eps)),
        "naive_bound_at_m_max": float(np.exp(m_max * eps)),
        "max_ratio": max_ratio,
        "all_pass": all_pass,
        "sections": sections,
    }
    return (EXIT_PASS if all_pass else EXIT_VIOLATION), _dump(report)


def fold_budget_tree(node: dict) -> PrivacyBudget:
    kind = _require(node, "kind", "budget tree")
    if kind == "budget":
        return _parse_budget(node)
    if kind in ("seq", "adaptive"):
        children = _require(node, "children", f"{kind} node")
        if not children:
            raise ConfigError(f"{kind} node needs at least one child")
        total = fold_budget_tree(children[0])
        for child in children[1:]:
            total = add_budgets(total, fold_budget_tree(child))
        return total
    if kind == "post":
        return fold_budget_tree(_require(node, "child", "post node"))
    if kind == "group":
        k = int(_require(node, "k", "group node"))
        try:
            return group_budget(fold_budget_tree(_require(node, "child", "group node")), k)
        except DpcheckError as exc:
            raise ConfigError(str(exc)) from exc
    if kind == "weaken":
        target = _parse_budget(node)
        try:
            return weaken_budget(fold_budget_tree(_require(node, "child", "weaken node")), target)
        except DpcheckError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown budget tree node kind {kind!r}")


def cmd_accountant(run: RunConfig) -> tuple[int, str]:
    total = fold_budget_tree(_require(run.config, "tree", "accountant"))
    report = {
        "command": "accountant",
        "seed": run.seed,
        "epsilon": total.eps,
        "delta": total.delta,
    }
    return EXIT_PASS, _dump(report)


_COMMANDS = {
    "sample": cmd_sample,
    "divergence": cmd_divergence,
    "audit": cmd_audit,
    "rnm-verify": cmd_rnm_verify,
    "accountant": cmd_accountant,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpcheck",
        description="Run and audit differential-privacy mechanisms from JSON configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--method", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
    return parser


def _load_run(args: argparse.Namespace) -> RunConfig:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    run = RunConfig(command=args.command, config=cfg)
    run.seed = int(cfg.get("seed", run.seed))
    run.samples = int(cfg.get("samples", run.samples))
    run.tol = float(cfg.get("tol", run.tol))
    run.alpha = float(cfg.get("alpha", run.alpha))
    run.method = str(cfg.get("method", run.method))
    for field in ("seed", "samples", "tol", "alpha", "method", "out"):
        value = getattr(args, field)
        if value is not None:
            setattr(run, field, value)
    return run


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize other codes
        return EXIT_CONFIG if exc.code not in (0,) else 0
    try:
        run = _load_run(args)
        code, text = _COMMANDS[run.command](run)
    except DpcheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if run.out:
        with open(run.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
