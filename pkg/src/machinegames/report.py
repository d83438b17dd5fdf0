"""Rendering of run results.

The structured form is JSON with sorted keys and rationals as ``"p/q"``,
so equal exact runs give byte-identical documents.  The human form is a
short verdict line followed by the same content as YAML.
"""

from __future__ import annotations

import json
from fractions import Fraction

import yaml

from .expr import format_rational

SCHEMA_VERSION = 1


def plain(v):
    """Recursively convert a result into JSON-ready values."""
    if hasattr(v, "as_dict"):
        return plain(v.as_dict())
    if isinstance(v, bool) or v is None or isinstance(v, (int, str)):
        return v
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, float):
        return float(repr(v))
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, set, frozenset)):
        items = [plain(x) for x in v]
        return sorted(items, key=repr) if isinstance(v, (set, frozenset)) else items
    return str(v)


def document(command: str, result, status: str, **extra) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "status": status,
           "result": plain(result)}
    doc.update({k: plain(v) for k, v in extra.items()})
    return doc


def _headline(doc: dict) -> str:
    res = doc.get("result")
    cmd = doc.get("command", "")
    if isinstance(res, dict):
        if "holds" in res:
            line = f"{cmd}: {'HOLDS' if res['holds'] else 'FAILS'}"
            if res.get("candidate_class"):
                line += f" over class {res['candidate_class']}"
            if res.get("epsilon") is not None:
                line += f" at epsilon={res['epsilon']}"
            return line
        if "passed" in res:
            return f"{cmd} {res.get('case', '')}: {'PASS' if res['passed'] else 'FAIL'}"
        if res.get("mode") == "exact":
            return f"{cmd}: {res.get('value')} (exact, residual {res.get('residual')})"
        if res.get("mode") == "sampled":
            return (f"{cmd}: {res.get('estimate')} +/- {res.get('half_width')} "
                    f"at {res.get('confidence')} ({res.get('samples')} samples, seed {res.get('seed')})")
    return f"{cmd}: {doc.get('status')}"


def _gap_lines(res) -> list:
    lines = []
    for s in res.get("subjects", []) if isinstance(res, dict) else []:
        lines.append(f"  subject {s['subject']}: incumbent {s['incumbent']} "
                     f"u={s['incumbent_utility']} max gap {s['max_gap']} via {s['witness']}")
    return lines


def emit_report(doc: dict, fmt: str = "structured") -> str:
    """``fmt`` is ``structured`` (alias ``json``) or ``human``."""
    if fmt in ("structured", "json"):
        return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if fmt != "human":
        raise ValueError(f"unknown report format {fmt!r}")
    head = [_headline(doc)] + _gap_lines(doc.get("result"))
    body = yaml.safe_dump(doc, sort_keys=True, allow_unicode=True, width=100)
    return "\n".join(head) + "\n\n" + body


__all__ = ["SCHEMA_VERSION", "document", "emit_report", "plain"]
