"""Command line harness: ``metastab run <config.json>`` and ``metastab suite <name>``.

Exit codes: 0 all gates pass, 1 a numeric gate failed, 2 the configuration is invalid (nothing is
written), 3 the problem exceeds the resource limits.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from .experiments import RUNNERS, SUITES, Outcome, ResourceError, check_resolved, resolve, suite_outcome

EXIT_OK, EXIT_GATE, EXIT_SCHEMA, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("metastab").joinpath("schemas/experiment.schema.json").read_text())


def validate_config(config) -> None:
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(exc)) from None
    validate_config(config)
    return config


def code_version() -> str:
    """SHA-256 over the package sources and schema, in sorted path order (first 16 hex digits)."""
    root = resources.files("metastab")
    h = hashlib.sha256()
    paths = sorted(p for p in Path(str(root)).rglob("*") if p.suffix in (".py", ".json") and "__pycache__" not in p.parts)
    for p in paths:
        h.update(str(p.relative_to(str(root))).encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


# ------------------------------------------------------------------ serialization


def _plain(x):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to strings, tuples to lists."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [_plain(x.real), _plain(x.imag)]
    return x


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip float repr, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _cell(v) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return " ".join(_cell(u) for u in v)
    return str(v)


def csv_text(rows: list, columns=None) -> str:
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(out_dir: Path, record: dict, outcome: Outcome, wall: float) -> None:
    for name, rows in outcome.series.items():
        write_atomic(out_dir / "series" / f"{name}.csv", csv_text(rows, outcome.columns.get(name)))
    write_atomic(out_dir / "result.json", dumps(record))
    # wall time lives apart so result.json stays byte-identical across runs
    write_atomic(out_dir / "timing.json", dumps({"wall_seconds": wall}))


def build_record(kind: str, name: str, config: dict, outcome: Outcome, strict: bool) -> dict:
    return {
        "kind": kind,
        "name": name,
        "config": config,
        "code_version": code_version(),
        "scalars": outcome.scalars,
        "gates": {g.name: g.to_dict() for g in outcome.gates},
        "passed": outcome.passed(strict),
        "strict": strict,
        "series": sorted(f"series/{k}.csv" for k in outcome.series),
    }


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if args.seed is not None:
        config["seed"] = args.seed
    cfg = resolve(config)
    try:
        check_resolved(cfg)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out_dir = Path(args.out or cfg.get("output") or "results")
    cfg["output"] = str(out_dir)
    t0 = time.perf_counter()
    try:
        outcome = RUNNERS[cfg["experiment"]](cfg)
    except (ResourceError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    record = build_record("experiment", cfg["experiment"], cfg, outcome, args.strict)
    write_outputs(out_dir, record, outcome, time.perf_counter() - t0)
    for g in outcome.gates:
        print(f"{'pass' if g.passed else 'FAIL'}  {g.name}  {g.value:.3e} (threshold {g.threshold:.3e}, {g.kind})")
    return EXIT_OK if record["passed"] else EXIT_GATE


def cmd_suite(args) -> int:
    seed = 0 if args.seed is None else args.seed
    out_dir = Path(args.out or f"results/suite-{args.name}")
    t0 = time.perf_counter()
    try:
        outcome = suite_outcome(args.name, seed, args.strict, log=print)
    except (ResourceError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    config = {"suite": args.name, "seed": seed, "output": str(out_dir)}
    record = build_record("suite", args.name, config, outcome, args.strict)
    record["traceability"] = outcome.series["traceability"]
    write_outputs(out_dir, record, outcome, time.perf_counter() - t0)
    return EXIT_OK if record["passed"] else EXIT_GATE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    common.add_argument("--seed", type=int, default=None, help="override the master seed")
    common.add_argument("--strict", action="store_true",
                        help="count trend gates too; suites stop at the first failing criterion")
    p = argparse.ArgumentParser(prog="metastab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one experiment from a JSON config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("suite", parents=[common], help="run an acceptance suite")
    s.add_argument("name", choices=sorted(SUITES))
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("--threads must be positive", file=sys.stderr)
        return EXIT_SCHEMA
    if args.threads:
        with threadpool_limits(args.threads):
            return args.func(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
