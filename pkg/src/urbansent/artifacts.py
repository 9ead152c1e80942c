"""Stage artifact formats: schema-versioned CSVs, manifest, model sidecars.

Every intermediate CSV opens with a one-line schema comment so stages can be
rerun independently and stale files fail loudly instead of being misread.
All writers format floats explicitly, keeping reruns byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

SCHEMA_VERSIONS = {
    "pois": 1,
    "reviews": 1,
    "flagged": 1,
    "sentences": 1,
    "predictions": 1,
    "sentence_scores": 1,
    "review_sentiment": 1,
    "poi_sentiment": 1,
    "cbg_sentiment": 1,
    "lsva": 1,
    "tests": 1,
    "pls_coefficients": 1,
    "pls_fitstats": 1,
    "rmsep_curve": 1,
    "cv_report": 1,
}


class SchemaVersionError(ValueError):
    """Artifact schema line missing or at the wrong version."""


def schema_line(name: str) -> str:
    return f"# schema: urbansent/{name} v{SCHEMA_VERSIONS[name]}"


def fmt(value: float, places: int = 6) -> str:
    """Fixed-point float formatting with negative zero normalized away."""
    out = f"{value:.{places}f}"
    if float(out) == 0.0:
        out = f"{0.0:.{places}f}"
    return out


def write_artifact(path, name: str, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(schema_line(name) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_artifact(path, name: str) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing stage artifact {path}; run the producing stage first")
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != schema_line(name):
            raise SchemaVersionError(
                f"{path}: expected {schema_line(name)!r}, found {first!r}; rerun the producing stage"
            )
        return list(csv.DictReader(fh))


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"


def load_manifest(out_dir, version: str, seed: int, config_snapshot: dict) -> dict:
    """Existing manifest, or a fresh skeleton for this run."""
    path = Path(out_dir) / MANIFEST_NAME
    if path.exists():
        manifest = read_json(path)
    else:
        manifest = {"order": [], "stages": {}}
    manifest["version"] = version
    manifest["seed"] = seed
    manifest["config"] = config_snapshot
    return manifest


def record_stage(manifest: dict, stage: str, entry: dict) -> None:
    if stage not in manifest["order"]:
        manifest["order"].append(stage)
    manifest["stages"][stage] = entry


def save_manifest(out_dir, manifest: dict) -> None:
    write_json(Path(out_dir) / MANIFEST_NAME, manifest)


def update_timings(out_dir, stage: str, seconds: float) -> None:
    """Wall-clock timings live outside the manifest so reruns stay identical."""
    path = Path(out_dir) / TIMINGS_NAME
    timings = read_json(path) if path.exists() else {}
    timings[stage] = round(seconds, 3)
    write_json(path, timings)
