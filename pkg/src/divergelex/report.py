"""Divergence report serialization: grep-able TSV plus a full JSON variant."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .divergence import DivergenceReport, InterpretingSet


def config_digest(config: dict) -> str:
    """Stable hex digest of a resolved run configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _format_set(iset: InterpretingSet) -> str:
    return ",".join(f"{nb.token}:{nb.similarity:.6f}" for nb in iset.neighbors)


def write_tsv(report: DivergenceReport, path) -> None:
    """word/score/set_1/set_2 rows with '#' metadata preamble."""
    meta = report.metadata
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(meta):
            value = meta[key]
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True, separators=(",", ":"))
            fh.write(f"# {key}={value}\n")
        fh.write("word\tscore\tset_1\tset_2\n")
        for e in report.entries:
            fh.write(
                f"{e.word}\t{e.score:.6f}\t{_format_set(e.set_1)}\t"
                f"{_format_set(e.set_2)}\n"
            )


def _set_to_dict(iset: InterpretingSet) -> dict:
    return {
        "word": iset.word,
        "group_tag": iset.group_tag,
        "neighbors": [
            {"token": nb.token, "similarity": nb.similarity} for nb in iset.neighbors
        ],
    }


def write_json(report: DivergenceReport, path) -> None:
    payload = {
        "metadata": report.metadata,
        "entries": [
            {
                "word": e.word,
                "score": e.score,
                "set_1": _set_to_dict(e.set_1),
                "set_2": _set_to_dict(e.set_2),
                "dropped_neighbors_1": e.dropped_neighbors_1,
                "dropped_neighbors_2": e.dropped_neighbors_2,
            }
            for e in report.entries
        ],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
