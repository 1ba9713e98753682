"""
JSONL helpers for metrics logs, score outputs and suite indexes.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List

logger = logging.getLogger(__name__)


def dumps_line(entry: Dict) -> str:
    return json.dumps(entry, ensure_ascii=False) + "\n"


def append_jsonl(path, entry: Dict) -> None:
    """Append one record, creating parent directories as needed."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as f:
        f.write(dumps_line(entry))


def write_jsonl(path, entries: Iterable[Dict]) -> None:
    """Overwrite `path` with the given records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for entry in entries:
            f.write(dumps_line(entry))


def read_jsonl(path, strict: bool = False) -> List[Dict]:
    """
    Read all records. Invalid lines are skipped with a warning unless
    `strict`, in which case the JSON error propagates.
    """
    rows: List[Dict] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for i, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                if strict:
                    raise
                logger.warning(f"Skipping invalid JSON on line {i} of {path}: {e}")
    return rows


def truncate_jsonl(path, keep: int) -> None:
    """Keep only the first `keep` records; used when a run resumes from a checkpoint."""
    path = Path(path)
    if not path.exists():
        return
    rows = read_jsonl(path)[:keep]
    write_jsonl(path, rows)
