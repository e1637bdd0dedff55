""" Question dataset files. """

import hashlib
import json
from pathlib import Path

import numpy as np

from ..core.errors import MalformedLine, TkgIoError

REQUIRED_FIELDS = ("question_id", "question")


def load_dataset(path):
    """
    Reads a JSON-lines question file.

    Each line holds ``question_id``, ``question`` and optionally ``qtype``,
    ``answer_type``, ``time_level``, ``answers`` (list of strings) and
    ``gold_fact_ids`` (list of ints).

    :param path: Dataset path.
    :type path: str or :class:`pathlib.Path`
    :rtype: list[dict]
    :raises TkgIoError: the file cannot be read.
    :raises MalformedLine: a line is not a valid question object.
    """
    path = Path(path)
    try:
        lines = path.read_bytes().splitlines()
    except OSError as exc:
        raise TkgIoError(f"cannot read dataset {path}: {exc}") from exc

    rows, seen = [], set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise MalformedLine(line_no, f"invalid UTF-8 at byte {exc.start}") from exc
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(row, dict) or any(not str(row.get(f) or "").strip() for f in REQUIRED_FIELDS):
            raise MalformedLine(line_no, "question lines need question_id and question")
        row["question_id"] = str(row["question_id"])
        if row["question_id"] in seen:
            raise MalformedLine(line_no, f"duplicate question_id {row['question_id']!r}")
        seen.add(row["question_id"])
        if not isinstance(row.get("answers", []), list):
            raise MalformedLine(line_no, "answers must be a list")
        rows.append(row)
    return rows


def sample_questions(rows, limit=None, seed=None):
    """
    Takes the first ``limit`` questions, or a seeded random sample of that
    size (kept in file order) when ``seed`` is given.
    """
    if limit is None or limit >= len(rows):
        return list(rows)
    if seed is None:
        return list(rows[:limit])
    picked = np.random.default_rng(seed).choice(len(rows), size=limit, replace=False)
    return [rows[i] for i in sorted(int(i) for i in picked)]


def file_hash(path):
    """SHA-256 of a file's bytes, or None when there is no file."""
    if path is None or not Path(path).exists():
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
