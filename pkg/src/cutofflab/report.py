"""Machine (JSON) and human (Markdown) reports for a set of check results."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from pathlib import Path

from .suite import CheckResult, _clean

__all__ = ["ReportError", "config_hash", "emit_report", "render_markdown", "report_document"]

SCHEMA = "cutofflab-report/1"


class ReportError(OSError):
    """The output directory cannot be created or written."""


def config_hash(config: dict) -> str:
    """Short SHA-256 of the canonical JSON form of ``config``."""
    blob = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _order(result: CheckResult):
    return (result.criterion if result.criterion is not None else 10**6, result.key)


def report_document(results, config: dict) -> dict:
    results = sorted(results, key=_order)
    n_fail = sum(not r.passed for r in results)
    return {
        "schema": SCHEMA,
        "config_hash": config_hash(config),
        "config": _clean(config),
        "summary": {"total": len(results), "passed": len(results) - n_fail, "failed": n_fail},
        "results": [r.to_dict() for r in results],
    }


def render_markdown(doc: dict) -> str:
    lines = [
        "# cutofflab verification report",
        "",
        f"Config hash: `{doc['config_hash']}`",
        "",
        f"{doc['summary']['passed']} of {doc['summary']['total']} checks passed.",
        "",
    ]
    entries = doc["results"]
    failed = [e for e in entries if not e["passed"]]
    passed = [e for e in entries if e["passed"]]
    for heading, group in (("Failures", failed), ("Passes", passed)):
        if not group:
            continue
        lines += [f"## {heading}", "", "| check | margin | inequality | detail |", "|---|---|---|---|"]
        for e in group:
            name = e["title"] if e["criterion"] is None else f"{e['criterion']}. {e['title']}"
            margin = e["margin"] if isinstance(e["margin"], str) else f"{e['margin']:.3g}"
            cells = [name, margin, e["reference"], e["detail"]]
            lines.append("| " + " | ".join(str(c).replace("|", "\\|") for c in cells) + " |")
        lines.append("")
    if not entries:
        lines += ["No checks were run.", ""]
    return "\n".join(lines)


def emit_report(results, out_dir, config: dict, name: str = "report") -> dict:
    """Write ``<name>.json``, ``<name>.md`` and ``<name>.timing.json``.

    The JSON report is deterministic for a fixed config; wall-clock data go
    to the separate timing file.
    """
    results = list(results)
    out = Path(out_dir)
    doc = report_document(results, config)
    timing = {
        "config_hash": doc["config_hash"],
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seconds": {r.key: round(r.seconds, 3) for r in sorted(results, key=_order)},
    }
    paths = {
        "json": out / f"{name}.json",
        "markdown": out / f"{name}.md",
        "timing": out / f"{name}.timing.json",
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths["markdown"].write_text(render_markdown(doc), encoding="utf-8")
        paths["timing"].write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return {"document": doc, "paths": paths}
