"""``ergokit`` command line front end.

Structured results are JSON, curves are CSV.  Exit status: 0 success,
1 malformed input, 2 internal certificate inconsistency, 3 fuzz
counterexample.  Errors are reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import invariant, kernel, simulate, structure
from .errors import CertificateError, ErgokitError, InputError
from .examples import example_from_json
from .fuzz import run_fuzz, suite_kernel
from .invariant import ergodic_decomposition, ergodic_measures, uniqueness_certificate
from .kernel import (
    ProbMeasure,
    ResolventParams,
    StateFunction,
    kernel_to_json,
    load_kernel,
    resolvent,
    resolvent_series,
)
from .simulate import cesaro_tv_curve, doeblin_rate_check, duflo_check
from .structure import class_decomposition, indecomposability_certificate, reachability

COMMANDS = ("analyze", "invariants", "certify", "resolvent", "simulate", "cesaro", "doeblin", "example", "fuzz")

EXIT_OK, EXIT_INPUT, EXIT_CERTIFICATE, EXIT_FUZZ = 0, 1, 2, 3

#: names accepted by ``--tol NAME=VALUE`` and the module constants they override
TOLERANCES = {
    "invariance": (invariant, "INVARIANCE_TOL"),
    "density": (invariant, "DENSITY_TOL"),
    "mass": (invariant, "MASS_TOL"),
    "support": (invariant, "SUPPORT_THRESHOLD"),
    "rank": (invariant, "RANK_TOL"),
    "absorb": (structure, "ABSORB_TOL"),
    "clamp": (kernel, "CLAMP_TOL"),
}


@dataclass
class RunConfig:
    command: str
    input_path: Path | None = None
    output_path: Path | None = None
    seed: int = 0
    tolerances: dict[str, float] = field(default_factory=dict)
    params: dict = field(default_factory=dict)


@contextlib.contextmanager
def tolerance_overrides(overrides: dict[str, float]):
    saved = []
    try:
        for name, value in overrides.items():
            if name not in TOLERANCES:
                raise InputError(f"unknown tolerance {name!r}; known: {sorted(TOLERANCES)}")
            module, attr = TOLERANCES[name]
            saved.append((module, attr, getattr(module, attr)))
            setattr(module, attr, float(value))
        yield
    finally:
        for module, attr, value in reversed(saved):
            setattr(module, attr, value)


def _read_json(path: Path | None, what: str):
    if path is None:
        raise InputError(f"{what} requires --input")
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _read_vector(path: str | None, key: str):
    """Vector from a JSON file, or inline JSON when the argument starts with ``[`` or ``{``."""
    if path is None:
        return None
    if path.lstrip()[:1] in ("[", "{"):
        try:
            obj = json.loads(path)
        except json.JSONDecodeError as exc:
            raise InputError(f"--{key}: invalid JSON ({exc})") from exc
    else:
        obj = _read_json(Path(path), key)
    if isinstance(obj, dict):
        obj = obj.get(key, obj.get("values"))
    try:
        return np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected a numeric vector") from exc


def _kernel(config: RunConfig):
    if config.input_path is None:
        raise InputError(f"{config.command} requires --input")
    try:
        return load_kernel(config.input_path)
    except OSError as exc:
        raise InputError(f"cannot read {config.input_path}: {exc}") from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cmd_analyze(config: RunConfig):
    P = _kernel(config)
    cert = indecomposability_certificate(P)
    out = cert.to_json()
    out["classes"] = class_decomposition(P).to_json()["classes"]
    return dumps(out)


def _cmd_invariants(config: RunConfig):
    P = _kernel(config)
    dec = class_decomposition(P)
    out = {
        "closed_classes": [c.indices for c in dec.closed_classes],
        "ergodic_measures": [m.weights.tolist() for m in ergodic_measures(P)],
        "transient": dec.transient_states.indices,
    }
    mu = _read_vector(config.params.get("mu"), "measure")
    if mu is not None:
        out["decomposition"] = ergodic_decomposition(P, ProbMeasure(mu)).to_json()
    return dumps(out)


def _cmd_certify(config: RunConfig):
    P = _kernel(config)
    return dumps(uniqueness_certificate(P).to_json())


def _cmd_resolvent(config: RunConfig):
    P = _kernel(config)
    a = config.params.get("a", 0.5)
    terms = config.params.get("terms")
    if terms is None:
        R, tail, mode = resolvent(P, ResolventParams(a)), 0.0, "closed_form"
    else:
        R, tail = resolvent_series(P, a, terms)
        mode = "series"
    pattern = R.matrix > 0
    out = {
        "a": a,
        "mode": mode,
        "tail_bound": tail,
        "kernel": kernel_to_json(R),
        "positivity": {
            "pattern": pattern.astype(int).tolist(),
            "matches_reachability": bool(np.array_equal(pattern, reachability(P))),
        },
    }
    return dumps(out)


def _cmd_simulate(config: RunConfig):
    P = _kernel(config)
    values = _read_vector(config.params.get("observable"), "observable")
    if values is None:
        values = np.zeros(P.n)
        values[0] = 1.0
    report = duflo_check(P, StateFunction(values), config.params.get("x", 0), config.params.get("steps", 10_000), config.seed)
    return dumps(report.to_json())


def _curve_text(rows, header: list[str], fmt: str) -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(dict(zip(header, row)), sort_keys=True) + "\n" for row in rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows((n, *(repr(float(v)) for v in rest)) for n, *rest in rows)
    return buf.getvalue()


def _cmd_cesaro(config: RunConfig):
    P = _kernel(config)
    rows = cesaro_tv_curve(P, config.params.get("x", 0), config.params.get("n_max", 1000))
    return _curve_text(rows, ["n", "tv"], config.params.get("format", "csv"))


def _cmd_doeblin(config: RunConfig):
    P = _kernel(config)
    nu = _read_vector(config.params.get("nu"), "nu")
    nu = ProbMeasure.uniform(P.n) if nu is None else ProbMeasure(nu)
    eps = config.params.get("eps")
    if eps is None:
        raise InputError("doeblin requires --eps")
    report = doeblin_rate_check(P, eps, nu, config.params.get("n_max", 100))
    summary = {"passed": report.passed, "eps": eps, "n_max": len(report.rows), "worst_excess": report.worst_excess()}
    text = _curve_text(report.rows, ["n", "tv", "bound"], config.params.get("format", "csv"))
    return text, summary, (EXIT_OK if report.passed else EXIT_CERTIFICATE)


def _cmd_example(config: RunConfig):
    obj = _read_json(config.input_path, "example")
    P, ref, spec = example_from_json(obj)
    out = {
        "example": obj.get("example"),
        "kernel": kernel_to_json(P),
        "reference": None if ref is None else ref.weights.tolist(),
        "spec": None if spec is None else asdict(spec),
    }
    return dumps(out)


def _cmd_fuzz(config: RunConfig):
    count = config.params.get("count", 1000)
    n_max = config.params.get("n_max") or 12
    reports = run_fuzz(count, config.seed, n_max)
    failures = [r for r in reports if r.violations]
    summary = {
        "count": count,
        "seed": config.seed,
        "n_max": n_max,
        "unique": sum(r.unique for r in reports),
        "multiple": sum(not r.unique for r in reports),
        "violations": sum(len(r.violations) for r in failures),
        "failures": [{"index": r.index, "n": r.n, "violations": r.violations} for r in failures],
    }
    if not failures:
        return dumps(summary), None, EXIT_OK
    dump = {
        "summary": summary,
        "counterexamples": [kernel_to_json(suite_kernel(config.seed, r.index, (2, n_max))) for r in failures],
    }
    return dumps(summary), dumps(dump), EXIT_FUZZ


def run(config: RunConfig, stdout=None, stderr=None) -> int:
    """Execute one command; returns the process exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        with tolerance_overrides(config.tolerances):
            result = HANDLERS[config.command](config)
    except CertificateError as exc:
        stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return EXIT_CERTIFICATE
    except ErgokitError as exc:
        stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return EXIT_INPUT

    status = EXIT_OK
    if config.command == "fuzz":
        summary, dump, status = result
        stdout.write(summary)
        if dump is not None and config.output_path is not None:
            Path(config.output_path).write_text(dump)
        return status
    if config.command == "doeblin":
        text, summary, status = result
        _emit(text, config.output_path, stdout)
        stderr.write(json.dumps(summary, sort_keys=True) + "\n")
        return status
    _emit(result, config.output_path, stdout)
    return status


def _emit(text: str, path: Path | None, stdout) -> None:
    if path is None:
        stdout.write(text)
    else:
        Path(path).write_text(text)


HANDLERS = {
    "analyze": _cmd_analyze,
    "invariants": _cmd_invariants,
    "certify": _cmd_certify,
    "resolvent": _cmd_resolvent,
    "simulate": _cmd_simulate,
    "cesaro": _cmd_cesaro,
    "doeblin": _cmd_doeblin,
    "example": _cmd_example,
    "fuzz": _cmd_fuzz,
}


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    return name, float(value)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergokit", description="Invariant-measure certificates for finite Markov kernels.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=Path, help="kernel JSON (example spec JSON for 'example')")
    common.add_argument("--output", type=Path, help="write the artifact here instead of stdout")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                        help=f"override a tolerance ({', '.join(sorted(TOLERANCES))})")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="class decomposition and indecomposability certificate")
    p = sub.add_parser("invariants", parents=[common], help="ergodic measures, optional decomposition of --mu")
    p.add_argument("--mu", help="JSON vector (inline or file) of an invariant measure to decompose")
    sub.add_parser("certify", parents=[common], help="uniqueness certificate")
    p = sub.add_parser("resolvent", parents=[common], help="resolvent kernel and its positivity pattern")
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--terms", type=int, help="use the truncated series with this many terms")
    p = sub.add_parser("simulate", parents=[common], help="Duflo stability report from one seeded path")
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--observable", help="JSON vector (inline or file) of observable values")
    for name, help_text in (("cesaro", "exact TV curve of the averaged iterates"),
                            ("doeblin", "Doeblin rate check curve")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--n-max", type=int, default=1000 if name == "cesaro" else 100)
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        if name == "cesaro":
            p.add_argument("--x", type=int, default=0)
        else:
            p.add_argument("--eps", type=float, required=True)
            p.add_argument("--nu", help="JSON vector (inline or file) of the minorizing measure (default uniform)")
    sub.add_parser("example", parents=[common], help="build an example kernel and its reference measure")
    p = sub.add_parser("fuzz", parents=[common], help="randomized property suite")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--n-max", type=int, default=12, help="largest state count")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    skip = {"command", "input", "output", "seed", "tol"}
    params = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    return RunConfig(
        command=args.command,
        input_path=args.input,
        output_path=args.output,
        seed=args.seed,
        tolerances=dict(args.tol),
        params=params,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except BrokenPipeError:
        # downstream reader closed early (e.g. ``| head``)
        sys.stderr.close()
        return 0


if __name__ == "__main__":
    raise SystemExit(main())
