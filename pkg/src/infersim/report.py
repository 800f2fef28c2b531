"""Export runs as summary JSON, telemetry CSV and declarative plot-data files.

Every writer is deterministic: identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Sequence

from infersim.engine import TELEMETRY_HEADER, RunSummary, Telemetry

FAMILIES = ("throughput_timeline", "kv_util_timeline", "request_state_timeline", "latency_vs_axis")


@dataclass(frozen=True)
class RunResult:
    label: str
    telemetry: Telemetry
    summary: RunSummary
    axis_value: Any = None


def _clean(obj: Any) -> Any:
    """JSON-safe copy: NaN/inf become null, tuples become lists."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_summary_json(summary: RunSummary, path: str | Path) -> Path:
    return _write(Path(path), dumps(summary.to_dict()))


def telemetry_csv_text(telemetry: Telemetry) -> str:
    if not telemetry.samples:
        raise ValueError("telemetry is empty")
    rows = sorted(telemetry.samples, key=lambda s: (s.replica, s.sim_time))
    lines = [",".join(TELEMETRY_HEADER)]
    for s in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in (getattr(s, f) for f in TELEMETRY_HEADER)))
    return "\n".join(lines) + "\n"


def write_telemetry_csv(telemetry: Telemetry, path: str | Path) -> Path:
    return _write(Path(path), telemetry_csv_text(telemetry))


def read_telemetry_csv(path: str | Path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TELEMETRY_HEADER:
            raise ValueError(f"{path}: unexpected telemetry header {reader.fieldnames}")
        return [{k: float(v) for k, v in row.items()} for row in reader]


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_") or "run"


def _timeline(results: Sequence[RunResult], family: str, fields: Sequence[str],
              title: str, y_label: str) -> dict:
    series = []
    for res in results:
        merged = res.telemetry.merged()
        x = merged["sim_time"].tolist()
        for f in fields:
            name = res.label if len(fields) == 1 else f"{res.label}:{f}"
            series.append({"name": name, "run": res.label, "field": f, "x": x, "y": merged[f].tolist()})
    return {
        "family": family,
        "title": title,
        "mark": "line",
        "x": {"field": "sim_time", "label": "simulated time (s)"},
        "y": {"fields": list(fields), "label": y_label},
        "series": series,
    }


def _latency(results: Sequence[RunResult], axis: str | None) -> dict:
    xs = [r.axis_value if r.axis_value is not None else r.label for r in results]
    xs = [x if isinstance(x, (int, float)) else str(x) for x in xs]
    series = []
    for metric in ("ttft", "tpot", "e2e"):
        for stat in ("mean", "p50", "p99"):
            ys = [getattr(getattr(r.summary, metric), stat) for r in results]
            series.append({"name": f"{metric}_{stat}", "field": metric, "stat": stat, "x": xs, "y": ys})
    return {
        "family": "latency_vs_axis",
        "title": "Latency versus swept value",
        "mark": "line+point",
        "x": {"field": axis or "run", "label": axis or "run"},
        "y": {"fields": ["ttft", "tpot", "e2e"], "label": "seconds"},
        "series": series,
    }


def plot_data(results: Sequence[RunResult], axis: str | None = None) -> dict[str, dict]:
    return {
        "throughput_timeline": _timeline(results, "throughput_timeline", ["tokens_per_s"],
                                         "Generation throughput", "tokens/s (cluster)"),
        "kv_util_timeline": _timeline(results, "kv_util_timeline", ["kv_util"],
                                      "Aggregated KV cache utilisation", "fraction of pool"),
        "request_state_timeline": _timeline(results, "request_state_timeline",
                                            ["running", "waiting", "preempted_cum"],
                                            "Request analysis", "requests"),
        "latency_vs_axis": _latency(results, axis),
    }


def report(results: Sequence[RunResult], out_dir: str | Path, axis: str | None = None) -> dict[str, Path]:
    """Write the report bundle into ``out_dir``; returns the written paths keyed by role."""
    if not results:
        raise ValueError("report needs at least one run")
    for res in results:
        if not res.telemetry.samples:
            raise ValueError(f"run '{res.label}' has empty telemetry; lower telemetry_sample_interval")
    out = Path(out_dir)
    written: dict[str, Path] = {}
    summaries = {
        "axis": axis,
        "runs": [{"label": r.label, "axis_value": r.axis_value, **r.summary.to_dict()} for r in results],
    }
    written["summary"] = _write(out / "summary.json", dumps(summaries))
    for r in results:
        written[f"telemetry:{r.label}"] = write_telemetry_csv(r.telemetry, out / f"telemetry_{_slug(r.label)}.csv")
    for family, spec in plot_data(results, axis).items():
        written[f"plot:{family}"] = _write(out / f"plot_{family}.json", dumps(spec))
    return written


def summary_brief(summary: RunSummary) -> dict:
    """Headline numbers for terminal output."""
    return _clean({
        "makespan_s": summary.makespan,
        "tokens_per_s": summary.tokens_per_s,
        "finished": summary.finished,
        "unfinished": summary.unfinished,
        "preemptions": summary.total_preemptions,
        "ttft": asdict(summary.ttft),
        "tpot": asdict(summary.tpot),
        "e2e": asdict(summary.e2e),
        "max_kv_util": summary.max_kv_util,
        "decode_fraction": summary.decode_fraction,
    })
