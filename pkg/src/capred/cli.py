"""Command-line front end.

Commands: capacity, decompose, reduce, verify-lemma1, restriction, additivity,
tensor-id.  Map arguments are either JSON files or constructor expressions:

    id:[2]                        identity map
    pinch:[3];blocks=1,2          pinching onto diagonal blocks of those sizes
    depol:[2]                     full depolarization
    depolcorner:[3];rank=2        depolarize the leading corner of that rank
    dstoch:[[0.9,0.1],[0.1,0.9]]  doubly stochastic matrix on [1,...,1]
    tensor(A,B) compose(A,B) dsum(A,B)   combinators, recursively

Reports are wrapped as {"job", "settings", "result", "timings_ms"}; JSON
output is canonical and byte-identical for identical jobs (timings go to
stderr unless --timings is given, so reruns stay reproducible).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .algebra import AlgebraShape, Element, diagonal_projection
from .capacity import OptimizerSettings, blahut_arimoto, optimize_capacity
from .definite import definite_set, extract_partition, _corner_pair
from .errors import (
    CapredError,
    CertificateError,
    DomainError,
    ExtractionError,
    InconsistencyError,
    ParseError,
    ShapeError,
)
from .maps import (
    PtpuMap,
    compose_maps,
    direct_sum,
    identity_map,
    make_classical_stochastic,
    make_depolarize_corner,
    make_pinching,
    tensor_product,
)
from .reduction import (
    additivity_experiment,
    pinching_entropy_suite,
    reduce_capacity,
    restriction_equality,
    tensor_with_identity,
)
from .report import canonical_json, convert_units, render_csv, render_human

COMMANDS = ("capacity", "decompose", "reduce", "verify-lemma1", "restriction",
            "additivity", "tensor-id")
_COMBINATORS = ("tensor", "compose", "dsum")
_ATOMS = ("id", "pinch", "depol", "depolcorner", "dstoch")


@dataclass(frozen=True)
class JobSettings:
    restarts: int = 16
    max_iter: int = 2000
    tol: float = 1e-7
    seed: int = 42
    output: str = "json"
    log_base: str = "nat"
    threads: int = 1
    figures: str | None = None
    timings: bool = False
    shape: str | None = None
    samples: int = 1000
    id_shape: str | None = None


@dataclass(frozen=True)
class JobSpec:
    command: str
    map_sources: tuple[str, ...] = ()
    settings: JobSettings = field(default_factory=JobSettings)


def _validate_settings(s: JobSettings) -> None:
    if not 1 <= s.restarts <= 1024:
        raise DomainError(f"restarts must lie in [1, 1024], got {s.restarts}")
    if not 0.0 < s.tol <= 1e-2:
        raise DomainError(f"tol must lie in (0, 1e-2], got {s.tol!r}")
    if not 0 <= s.seed < 2**64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {s.seed}")
    if s.max_iter < 1:
        raise DomainError(f"maxIter must be positive, got {s.max_iter}")
    if s.threads < 1:
        raise DomainError(f"threads must be positive, got {s.threads}")


# -- constructor mini-language --------------------------------------------------


def _top_level_commas(text: str) -> list[int]:
    depth = 0
    out = []
    for i, ch in enumerate(text):
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append(i)
    return out


def _parse_json_payload(text: str, base: int):
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"malformed JSON payload: {err.msg}", base + err.pos) from None


def _parse_shape(text: str, base: int) -> AlgebraShape:
    payload = _parse_json_payload(text, base)
    if not isinstance(payload, list):
        raise ParseError("shape must be a JSON list of block dimensions", base)
    try:
        return AlgebraShape(payload)
    except ShapeError as err:
        raise ParseError(str(err), base) from None


def _parse_expr(text: str, base: int) -> PtpuMap:
    s = text.strip()
    offset = base + (len(text) - len(text.lstrip()))
    for comb in _COMBINATORS:
        if s.startswith(comb + "(") and s.endswith(")"):
            inner = s[len(comb) + 1:-1]
            inner_base = offset + len(comb) + 1
            commas = _top_level_commas(inner)
            if not commas:
                raise ParseError("combinator needs two comma-separated arguments", inner_base)
            # parameter lists also use bare commas, so try every candidate split
            first_error: ParseError | None = None
            for cut in commas:
                left, right = inner[:cut], inner[cut + 1:]
                try:
                    a = _parse_expr(left, inner_base)
                    b = _parse_expr(right, inner_base + cut + 1)
                except ParseError as err:
                    first_error = first_error or err
                    continue
                if comb == "tensor":
                    return tensor_product(a, b)
                if comb == "compose":
                    return compose_maps(a, b)
                return direct_sum(a, b)
            raise first_error
    head, sep, rest = s.partition(":")
    if not sep or head not in _ATOMS:
        path = Path(s)
        if path.exists() and path.is_file():
            with open(path, "r", encoding="utf-8") as fh:
                try:
                    return PtpuMap.from_json(json.load(fh))
                except json.JSONDecodeError as err:
                    raise ParseError(f"malformed map JSON in {s}: {err.msg}",
                                     offset + err.pos) from None
        raise ParseError(f"unknown constructor {s.split(':')[0]!r}", offset)
    payload, _, params_text = rest.partition(";")
    payload_base = offset + len(head) + 1
    params = {}
    if params_text:
        for item in params_text.split(";"):
            key, psep, val = item.partition("=")
            if not psep:
                raise ParseError(f"malformed parameter {item!r}", payload_base + len(payload) + 1)
            params[key.strip()] = val.strip()

    if head == "dstoch":
        matrix = _parse_json_payload(payload, payload_base)
        return make_classical_stochastic(matrix)
    shape = _parse_shape(payload, payload_base)
    if head == "id":
        return identity_map(shape)
    if head == "depol":
        return make_depolarize_corner(shape, Element.identity(shape), name=f"depol{shape}")
    if head == "depolcorner":
        if "rank" not in params:
            raise ParseError("depolcorner needs rank=<int>", payload_base)
        rank = int(params["rank"])
        if not 1 <= rank <= shape.total_rank:
            raise ParseError(f"rank {rank} out of range for shape {shape}", payload_base)
        return make_depolarize_corner(shape, diagonal_projection(shape, range(rank)))
    # pinch
    if "blocks" in params:
        sizes = [int(v) for v in params["blocks"].split(",")]
    else:
        sizes = [1] * shape.total_rank
    if any(v < 1 for v in sizes) or sum(sizes) != shape.total_rank:
        raise ParseError(
            f"pinch blocks {sizes} must be positive and sum to {shape.total_rank}",
            payload_base)
    projections = []
    pos = 0
    for size in sizes:
        projections.append(diagonal_projection(shape, range(pos, pos + size)))
        pos += size
    return make_pinching(shape, projections)


def parse_map_source(source: str) -> PtpuMap:
    s = source.strip()
    head = s.split(":", 1)[0].split("(", 1)[0]
    if head in _ATOMS or head in _COMBINATORS or Path(s).exists():
        return _parse_expr(source, 0)
    raise ParseError(f"map source {s!r} is neither a constructor nor an existing file", 0)


# -- job execution ---------------------------------------------------------------


def _optimizer_settings(s: JobSettings) -> OptimizerSettings:
    return OptimizerSettings(restarts=s.restarts, max_iter=s.max_iter, tol=s.tol,
                             seed=s.seed, threads=s.threads)


def _settings_echo(spec: JobSpec) -> dict:
    s = spec.settings
    echo = {
        "restarts": s.restarts,
        "maxIter": s.max_iter,
        "tol": float(s.tol),
        "seed": s.seed,
        "logBase": "bits" if s.log_base == "bits" else "nat",
        "threads": s.threads,
    }
    if spec.command == "verify-lemma1":
        echo["samples"] = s.samples
        echo["shape"] = s.shape
    if spec.command == "tensor-id":
        echo["idShape"] = s.id_shape
    return echo


def _run_command(spec: JobSpec) -> dict:
    s = spec.settings
    opt = _optimizer_settings(s)
    maps = [parse_map_source(src) for src in spec.map_sources]

    if spec.command == "capacity":
        phi = maps[0]
        if phi.certificate == "ClassicalStochastic" and phi.source.is_abelian \
                and phi.target.is_abelian:
            result = blahut_arimoto(phi.matrix)
        else:
            result = optimize_capacity(phi, opt)
        return result.to_json()

    if spec.command == "decompose":
        phi = maps[0]
        ds = definite_set(phi)
        partition = extract_partition(ds, s.seed)
        parts = []
        for e, f in zip(partition.projections, partition.images):
            src_emb, tgt_emb, _ = _corner_pair(phi, e, f)
            parts.append({
                "rank": int(round(e.trace().real)),
                "cornerSourceShape": list(src_emb.corner_shape.blocks),
                "cornerTargetShape": list(tgt_emb.corner_shape.blocks),
            })
        out = {
            "definiteDim": ds.dimension,
            "ergodic": ds.dimension == 1,
            "partition": parts,
            "gramSpectrum": [float(v) for v in ds.gram_eigenvalues],
        }
        if not ds.positivity_verified:
            out["positivityUnverified"] = True
        return out

    if spec.command == "reduce":
        return reduce_capacity(maps[0], opt).to_json()

    if spec.command == "verify-lemma1":
        if not s.shape:
            raise DomainError("verify-lemma1 needs --shape")
        shape = _parse_shape(s.shape, 0)
        out = pinching_entropy_suite(shape, s.samples, s.seed)
        out["pass"] = bool(out["minSlack"] >= -1e-9 and out["maxEqualityResidual"] <= 1e-9)
        if not out["pass"]:
            raise InconsistencyError(
                f"entropy bound violated: min slack {out['minSlack']:.3e}, "
                f"max residual {out['maxEqualityResidual']:.3e}")
        return out

    if spec.command == "restriction":
        phi = maps[0]
        partition = extract_partition(definite_set(phi), s.seed)
        report = restriction_equality(phi, partition, opt)
        out = report.to_json()
        out["partitionRanks"] = list(partition.ranks)
        return out

    if spec.command == "additivity":
        return additivity_experiment(maps[0], maps[1], opt).to_json()

    if spec.command == "tensor-id":
        if not s.id_shape:
            raise DomainError("tensor-id needs --id-shape")
        shape = _parse_shape(s.id_shape, 0)
        return tensor_with_identity(maps[0], shape, opt).to_json()

    raise DomainError(f"unknown command {spec.command!r}")


def run_job(spec: JobSpec) -> tuple[int, str]:
    """Execute a job; returns (exit status, report text for stdout)."""
    _validate_settings(spec.settings)
    started = time.perf_counter()
    result = _run_command(spec)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    s = spec.settings
    result = convert_units(result, "bits" if s.log_base == "bits" else "nat")
    report = {
        "job": spec.command,
        "settings": _settings_echo(spec),
        "result": result,
        "timings_ms": {"total": elapsed_ms} if s.timings else None,
    }
    if s.figures:
        unit = "bits" if s.log_base == "bits" else "nats"
        report["figures"] = render_figures(spec.command, result, s.figures, unit)
    if not s.timings:
        print(f"# timings_ms total={elapsed_ms:.1f}", file=sys.stderr)
    if s.output == "json":
        text = canonical_json(report)
    elif s.output == "csv":
        text = render_csv(spec.command, report)
    else:
        text = render_human(spec.command, report)
    return 0, text


def render_figures(command: str, result: dict, outdir: str, unit: str) -> list[str]:
    from .figures import render_figures as render
    return render(command, result, outdir, unit)


# -- argument parsing --------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capred", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--restarts", type=int, default=16)
        p.add_argument("--max-iter", type=int, default=2000)
        p.add_argument("--tol", type=float, default=1e-7)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--output", choices=("json", "csv", "human"), default="json")
        p.add_argument("--log-base", choices=("nat", "bits"), default="nat")
        p.add_argument("--threads", type=int, default=None,
                       help="internal parallelism; CAPRED_THREADS overrides")
        p.add_argument("--figures", default=None, metavar="DIR",
                       help="render figures to this directory")
        p.add_argument("--timings", action="store_true",
                       help="embed wall-clock timings in the report "
                            "(breaks byte-identical reruns)")

    for name in ("capacity", "decompose", "reduce", "restriction"):
        p = sub.add_parser(name)
        p.add_argument("map", help="map JSON file or constructor expression")
        common(p)
    p = sub.add_parser("additivity")
    p.add_argument("map_a")
    p.add_argument("map_b")
    common(p)
    p = sub.add_parser("tensor-id")
    p.add_argument("map")
    p.add_argument("--id-shape", required=True, metavar="SHAPE",
                   help="shape of the identity factor, e.g. [2]")
    common(p)
    p = sub.add_parser("verify-lemma1")
    p.add_argument("--shape", required=True, metavar="SHAPE")
    p.add_argument("--samples", type=int, default=1000)
    common(p)
    return parser


def _resolve_threads(flag_value: int | None) -> int:
    env = os.environ.get("CAPRED_THREADS")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise DomainError(f"CAPRED_THREADS must be an integer, got {env!r}") from None
    if flag_value is not None:
        return flag_value
    return os.cpu_count() or 1


def spec_from_args(args: argparse.Namespace) -> JobSpec:
    sources: tuple[str, ...] = ()
    if hasattr(args, "map"):
        sources = (args.map,)
    elif hasattr(args, "map_a"):
        sources = (args.map_a, args.map_b)
    settings = JobSettings(
        restarts=args.restarts,
        max_iter=args.max_iter,
        tol=args.tol,
        seed=args.seed,
        output=args.output,
        log_base=args.log_base,
        threads=_resolve_threads(args.threads),
        figures=args.figures,
        timings=args.timings,
        shape=getattr(args, "shape", None),
        samples=getattr(args, "samples", 1000),
        id_shape=getattr(args, "id_shape", None),
    )
    return JobSpec(args.command, sources, settings)


def run_cli(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        code, text = run_job(spec)
    except (ParseError, DomainError, ShapeError, CertificateError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ExtractionError, InconsistencyError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except CapredError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run_cli())
