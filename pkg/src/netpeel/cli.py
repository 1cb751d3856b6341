"""Command-line front end for generation, extraction, and verification runs.

Every run is deterministic given its flags; all randomness flows from
`--seed`.  Exit codes: 0 success (or verification pass), 1 verification
fail, 2 usage error, 3 a geometric assumption did not hold, 4 a piece or
width budget ran out.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .extract2 import extract_two_layer
from .extract3 import extract_three_layer
from .oracle.generate import GenerationError, generate_three_layer, generate_two_layer
from .oracle.nets import ThreeLayerFunction, ThreeLayerNet, TwoLayerNet
from .oracle.query import AccessAudit, as_oracle
from .pwl import GeneralPositionError, PieceBudgetError
from .oracle.serialize import (
    document_to_net,
    dumps_document,
    load_net,
    loads_document,
    net_to_document,
    save_net,
)
from .verify import (
    bench_to_csv,
    bound_to_csv,
    empirical_orthant_bound,
    fit_query_bound,
    functional_equivalence,
    query_complexity_bench,
)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_ASSUMPTION = 3
EXIT_BUDGET = 4

REPORT_FORMAT = "netpeel-report"


@dataclass
class RunConfig:
    """Parsed flags for one command; every field maps to one kebab-case flag."""

    command: str
    depth: int = 2
    d: int = 2
    d1: int = 2
    d2: int = 6
    delta: float = 1e-4
    tau: float = 1e-6
    seed: int = 0
    d1_max: int = 512
    m_max: int = 256
    d2_max: int = 512
    trials: int = 100_000
    samples: int = 10_000
    lo: float | None = None
    hi: float | None = None
    input: str | None = None
    truth: str | None = None
    candidate: str | None = None
    out: str | None = None
    d_list: tuple[int, ...] = field(default_factory=tuple)
    d1_list: tuple[int, ...] = field(default_factory=tuple)
    d2_list: tuple[int, ...] = field(default_factory=tuple)
    deltas: tuple[float, ...] = field(default_factory=tuple)
    seeds: tuple[int, ...] = field(default_factory=tuple)


class UsageError(Exception):
    pass


def _positive(cfg: RunConfig, names: list[str]) -> None:
    for name in names:
        value = getattr(cfg, name)
        if value is not None and value <= 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netpeel",
        description="Recover piecewise-linear networks from query access.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="draw a ground-truth network file")
    gen.add_argument("--depth", type=int, choices=(2, 3), default=2)
    gen.add_argument("--d", type=int, default=2, help="input dimension")
    gen.add_argument("--d1", type=int, default=2, help="hidden width")
    gen.add_argument("--d2", type=int, default=6, help="second hidden width (depth 3)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="network file to write")

    ext = sub.add_parser("extract", help="recover a network from a file-backed oracle")
    ext.add_argument("--input", required=True, help="network file to mount as oracle")
    ext.add_argument("--delta", type=float, default=1e-4)
    ext.add_argument("--d1-max", type=int, default=512, dest="d1_max")
    ext.add_argument("--m-max", type=int, default=256, dest="m_max")
    ext.add_argument("--d2-max", type=int, default=512, dest="d2_max")
    ext.add_argument("--out", required=True, help="extraction report file to write")

    ver = sub.add_parser("verify", help="compare two network or report files")
    ver.add_argument("--truth", required=True, help="reference network file")
    ver.add_argument("--candidate", required=True, help="network or report file")
    ver.add_argument("--tau", type=float, default=1e-6)
    ver.add_argument("--samples", type=int, default=10_000)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--lo", type=float, default=None, help="box lower edge")
    ver.add_argument("--hi", type=float, default=None, help="box upper edge")

    bench = sub.add_parser("bench", help="query-count sweep with fitted constants")
    bench.add_argument("--depth", type=int, choices=(2, 3), default=2)
    bench.add_argument("--d-list", type=_int_list, default=(2, 4), dest="d_list")
    bench.add_argument("--d1-list", type=_int_list, default=(2, 4), dest="d1_list")
    bench.add_argument("--d2-list", type=_int_list, default=(6,), dest="d2_list")
    bench.add_argument("--deltas", type=_float_list, default=(1e-4,))
    bench.add_argument("--seeds", type=_int_list, default=(0,))
    bench.add_argument("--out", required=True, help="CSV file to write")

    bound = sub.add_parser(
        "bound-experiment", help="negative-orthant hit rate vs the closed-form bound"
    )
    bound.add_argument("--d", type=int, default=2)
    bound.add_argument("--d1", type=int, default=30)
    bound.add_argument("--trials", type=int, default=100_000)
    bound.add_argument("--seed", type=int, default=0)
    bound.add_argument("--out", default=None, help="optional CSV file")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__}
    return RunConfig(**fields)


def cmd_generate(cfg: RunConfig) -> int:
    _positive(cfg, ["d", "d1", "d2", "depth"])
    if cfg.depth == 3 and not (1 <= cfg.d1 <= cfg.d):
        raise UsageError("depth 3 requires 1 <= d1 <= d")
    rng = np.random.default_rng(cfg.seed)
    if cfg.depth == 2:
        net = generate_two_layer(cfg.d, cfg.d1, rng)
    else:
        net = generate_three_layer(cfg.d, cfg.d1, cfg.d2, rng)
    save_net(cfg.out, net, seed=cfg.seed)
    print(f"wrote depth-{cfg.depth} network to {cfg.out}")
    return EXIT_OK


def _load_file(path: str):
    """A network from either a bare network file or an extraction report."""
    with open(path) as fh:
        doc = json.loads(fh.read())
    if isinstance(doc, dict) and doc.get("format") == REPORT_FORMAT:
        return document_to_net(loads_document(json.dumps(doc["network"])))
    return document_to_net(loads_document(json.dumps(doc)))


def cmd_extract(cfg: RunConfig) -> int:
    _positive(cfg, ["delta", "d1_max", "m_max", "d2_max"])
    try:
        truth = load_net(cfg.input)
    except FileNotFoundError:
        raise UsageError(f"input file not found: {cfg.input}")
    audit = AccessAudit(truth)
    oracle = as_oracle(audit)
    audit.arm()
    t0 = time.perf_counter()
    if isinstance(truth, TwoLayerNet):
        result = extract_two_layer(oracle, oracle.dim, cfg.delta, cfg.d1_max)
        depth = 2
    else:
        result = extract_three_layer(
            oracle,
            oracle.dim,
            cfg.delta,
            m_max=cfg.m_max,
            d1_max=cfg.d1_max,
            d2_max=cfg.d2_max,
        )
        depth = 3
    seconds = time.perf_counter() - t0
    audit.disarm()
    if audit.reads:
        raise RuntimeError(f"extraction read {audit.reads} ground-truth attributes")
    report = {
        "format": REPORT_FORMAT,
        "depth": depth,
        "delta": cfg.delta,
        "total_queries": oracle.count,
        "phase_queries": dict(result.phase_queries),
        "seconds": round(seconds, 4),
        "parameter_reads": audit.reads,
        "network": net_to_document(result.network()),
    }
    with open(cfg.out, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(
        f"extracted depth-{depth} network with {oracle.count} queries "
        f"in {seconds:.2f}s -> {cfg.out}"
    )
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    _positive(cfg, ["tau", "samples"])
    try:
        truth = _load_file(cfg.truth)
        candidate = _load_file(cfg.candidate)
    except FileNotFoundError as err:
        raise UsageError(str(err))
    depth2 = isinstance(truth, TwoLayerNet)
    lo = cfg.lo if cfg.lo is not None else (0.0 if depth2 else -5.0)
    hi = cfg.hi if cfg.hi is not None else (10.0 if depth2 else 5.0)
    try:
        report = functional_equivalence(
            truth,
            candidate,
            lo,
            hi,
            n_samples=cfg.samples,
            tau=cfg.tau,
            seed=cfg.seed,
        )
    except ValueError as err:
        raise UsageError(str(err))
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VERIFY_FAIL


def cmd_bench(cfg: RunConfig) -> int:
    _positive(cfg, ["depth"])
    if not cfg.d_list or not cfg.d1_list or not cfg.deltas or not cfg.seeds:
        raise UsageError("bench needs non-empty --d-list, --d1-list, --deltas, --seeds")
    shapes = []
    for d in cfg.d_list:
        for d1 in cfg.d1_list:
            if cfg.depth == 2:
                shapes.append((2, d, d1, 0))
            else:
                if d1 > d:
                    continue
                for d2 in cfg.d2_list:
                    shapes.append((3, d, d1, d2))
    if not shapes:
        raise UsageError("grid is empty after the d1 <= d filter")
    rows = query_complexity_bench(shapes, deltas=cfg.deltas, seeds=cfg.seeds)
    bench_to_csv(rows, cfg.out)
    n_ok = sum(r.ok for r in rows)
    print(f"{n_ok}/{len(rows)} cells succeeded -> {cfg.out}")
    if n_ok == 0:
        print("every cell failed", file=sys.stderr)
        return EXIT_ASSUMPTION
    fit = fit_query_bound(rows, cfg.depth)
    print(
        f"depth-{fit.depth} fit: queries ~ {fit.constant:.2f} * predictor, "
        f"worst ratio {fit.worst_ratio:.2f} over {fit.n_rows} rows"
    )
    return EXIT_OK


def cmd_bound_experiment(cfg: RunConfig) -> int:
    _positive(cfg, ["d", "d1", "trials"])
    exp = empirical_orthant_bound(cfg.d, cfg.d1, cfg.trials, seed=cfg.seed)
    print(
        f"d={exp.d} d1={exp.d1}: {exp.hits}/{exp.trials} hits "
        f"(rate {exp.rate:.3e}), bound {exp.bound:.3e}"
    )
    if cfg.out:
        bound_to_csv([exp], cfg.out)
        print(f"wrote {cfg.out}")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "extract": cmd_extract,
    "verify": cmd_verify,
    "bench": cmd_bench,
    "bound-experiment": cmd_bound_experiment,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_USAGE if err.code else EXIT_OK
    cfg = _config_from_args(args)
    try:
        return _COMMANDS[cfg.command](cfg)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationError as err:
        print(f"generation failed: {err}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except GeneralPositionError as err:
        print(f"geometric assumption failed: {err}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except PieceBudgetError as err:
        print(f"budget exhausted: {err}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
