"""Canonical report serialization: JSON, CSV and human-readable tables.

JSON output is canonical so identical jobs produce byte-identical reports:
keys sorted, reals printed with 12 significant digits (round-trip relative
error below 1e-11), no locale- or time-dependent content.
"""

from __future__ import annotations

import csv
import io
import json
import math

from .errors import DomainError

LN2 = math.log(2.0)

# fields holding nat-valued quantities, converted in bits mode at display time
NAT_KEYS = frozenset({
    "value", "lowerBound", "upperBound", "capacity", "assembledEnsembleChi",
    "sum", "deficit", "expected", "gap", "slack", "minSlack", "slacks",
    "restrictedEntropy", "weightedForm",
})


def fmt_float(x: float) -> str:
    if isinstance(x, bool):  # bools are not numbers here
        raise DomainError("boolean passed to float formatter")
    if math.isnan(x) or math.isinf(x):
        raise DomainError(f"non-finite value {x!r} in a report")
    if x == 0.0:
        return "0"
    return format(float(x), ".12g")


def _encode(obj) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{json.dumps(k)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise DomainError(f"cannot serialize {type(obj).__name__} in a report")


def canonical_json(obj) -> str:
    return _encode(obj) + "\n"


def convert_units(obj, log_base: str):
    """Divide nat-valued fields by log 2 when bits output is requested."""
    if log_base == "nat":
        return obj
    if log_base != "bits":
        raise DomainError(f"unknown log base {log_base!r}")

    def walk(node, convert=False):
        if isinstance(node, dict):
            return {k: walk(v, convert=k in NAT_KEYS) for k, v in node.items()}
        if isinstance(node, (list, tuple)):
            return [walk(v, convert=convert) for v in node]
        if convert and isinstance(node, float):
            return node / LN2
        return node

    return walk(obj)


# -- CSV ----------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(list(v))
    return str(v)


def _csv_rows(command: str, result: dict) -> tuple[list[str], list[list]]:
    if command == "reduce":
        header = ["child", "cornerRank", "capacity", "method"]
        rows = [[i, c["cornerRank"], c["capacity"], c["method"]]
                for i, c in enumerate(result["children"])]
    elif command == "capacity":
        header = ["value", "lowerBound", "upperBound", "method", "iterations", "converged"]
        rows = [[result[k] for k in header]]
    elif command == "decompose":
        header = ["index", "rank", "cornerSourceShape", "cornerTargetShape"]
        rows = [[i, p["rank"], p["cornerSourceShape"], p["cornerTargetShape"]]
                for i, p in enumerate(result["partition"])]
    elif command == "verify-lemma1":
        header = ["sample", "slack", "equalityResidual"]
        rows = [[i, s, r] for i, (s, r) in
                enumerate(zip(result["slacks"], result["equalityResiduals"]))]
    elif command == "restriction":
        header = ["side", "value", "lowerBound", "upperBound", "method"]
        rows = [[side] + [result[side][k] for k in header[1:]]
                for side in ("full", "restricted")]
    elif command == "additivity":
        header = ["component", "value"]
        rows = [["factorA", result["factorA"]["value"]],
                ["factorB", result["factorB"]["value"]],
                ["sum", result["sum"]],
                ["tensor", result["tensor"]["value"]],
                ["deficit", result["deficit"]]]
    elif command == "tensor-id":
        header = ["component", "value"]
        rows = [["factor", result["factor"]["value"]],
                ["expected", result["expected"]],
                ["tensor", result["tensor"]["value"]],
                ["gap", result["gap"]]]
    else:
        raise DomainError(f"no CSV schema for command {command!r}")
    return header, rows


def render_csv(command: str, report: dict) -> str:
    header, rows = _csv_rows(command, report["result"])
    buf = io.StringIO()
    settings = report.get("settings", {})
    meta = " ".join(f"{k}={_cell(v)}" for k, v in sorted(settings.items()))
    buf.write(f"# job={report['job']} {meta}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


# -- human --------------------------------------------------------------------


def _table(header: list[str], rows: list[list]) -> list[str]:
    cells = [[str(h) for h in header]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = []
    for j, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return lines


def render_human(command: str, report: dict) -> str:
    result = report["result"]
    settings = report.get("settings", {})
    unit = "bits" if settings.get("logBase") == "bits" else "nats"
    lines = [f"job: {report['job']}  ({unit})"]
    lines.append("settings: " + " ".join(f"{k}={_cell(v)}" for k, v in sorted(settings.items())))
    header, rows = _csv_rows(command, result)
    lines.extend(_table(header, rows))
    for key in ("value", "assembledEnsembleChi", "definiteDim", "ergodic", "gap",
                "deficit", "sum", "expected", "minSlack", "maxEqualityResidual"):
        if key in result and not isinstance(result[key], (dict, list)):
            lines.append(f"{key}: {_cell(result[key])}")
    timings = report.get("timings_ms")
    if timings:
        lines.append("timings_ms: " + " ".join(f"{k}={_cell(v)}" for k, v in sorted(timings.items())))
    return "\n".join(lines) + "\n"
