"""File formats: Matrix Market matrices, complex vectors, CSV tables."""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np
import scipy.io


class ParseError(ValueError):
    """Malformed input file; the message names the offending line where possible."""


_FIELDS = {"real", "complex", "integer", "pattern"}
_SYMMETRY = {"general", "symmetric", "hermitian", "skew-symmetric"}


def _locate_mm_error(lines: list[str]) -> str | None:
    """Scan a coordinate Matrix Market file; describe the first bad line, or None."""
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        return "line 1: missing %%MatrixMarket header"
    head = lines[0].split()
    if len(head) != 5 or head[1].lower() != "matrix":
        return "line 1: header must read '%%MatrixMarket matrix <format> <field> <symmetry>'"
    fmt, fld, sym = (h.lower() for h in head[2:])
    if fmt not in ("coordinate", "array") or fld not in _FIELDS or sym not in _SYMMETRY:
        return f"line 1: unsupported header {' '.join(head[2:])!r}"
    want = {"complex": 2, "pattern": 0}.get(fld, 1)
    size_line = None
    entries = 0
    expected = None
    for no, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if size_line is None:
            size_line = no
            n_size = 3 if fmt == "coordinate" else 2
            try:
                dims = [int(p) for p in parts]
            except ValueError:
                return f"line {no}: size line must hold integers, got {text!r}"
            if len(dims) != n_size or min(dims) < 0:
                return f"line {no}: expected {n_size} non-negative integers on the size line"
            rows, cols = dims[0], dims[1]
            expected = dims[2] if fmt == "coordinate" else rows * cols
            continue
        entries += 1
        if fmt == "coordinate":
            if len(parts) != 2 + want:
                return f"line {no}: expected {2 + want} fields, got {len(parts)}"
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                return f"line {no}: indices must be integers"
            if not (1 <= i <= rows and 1 <= j <= cols):
                return f"line {no}: index ({i}, {j}) outside {rows}x{cols}"
            values = parts[2:]
        else:
            if len(parts) != want:
                return f"line {no}: expected {want} fields, got {len(parts)}"
            values = parts
        try:
            [float(v) for v in values]
        except ValueError:
            return f"line {no}: non-numeric value in {text!r}"
    if size_line is None:
        return f"line {len(lines)}: missing size line"
    if entries != expected:
        return f"line {len(lines)}: expected {expected} entries, found {entries}"
    return None


def read_matrix(path) -> np.ndarray:
    """Dense complex matrix from a Matrix Market file."""
    text = Path(path).read_text()
    problem = _locate_mm_error(text.splitlines())
    if problem is not None:
        raise ParseError(f"{path}: {problem}")
    try:
        m = scipy.io.mmread(_io.StringIO(text))
    except Exception as exc:  # scipy reports without line context
        raise ParseError(f"{path}: {exc}") from exc
    m = m.toarray() if hasattr(m, "toarray") else np.asarray(m)
    return m.astype(complex)


def write_matrix(path, a) -> None:
    """Coordinate, complex, general."""
    a = np.asarray(a, dtype=complex)
    rows, cols = np.nonzero(a)
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate complex general\n")
        fh.write(f"{a.shape[0]} {a.shape[1]} {len(rows)}\n")
        for i, j in zip(rows, cols):
            z = a[i, j]
            fh.write(f"{i + 1} {j + 1} {float(z.real)!r} {float(z.imag)!r}\n")


def read_vector(path) -> np.ndarray:
    """Complex vector from JSON ``[[re, im], ...]`` (plain numbers allowed) or CSV ``re,im`` rows."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, list):
            raise ParseError(f"{path}: expected a JSON array")
        out = []
        for k, item in enumerate(data):
            if isinstance(item, (int, float)):
                out.append(complex(item))
            elif isinstance(item, list) and len(item) == 2 and all(isinstance(v, (int, float)) for v in item):
                out.append(complex(item[0], item[1]))
            else:
                raise ParseError(f"{path}: element {k} is not a number or [re, im] pair")
        return np.array(out, dtype=complex)
    out = []
    for no, row in enumerate(csv.reader(_io.StringIO(text)), start=1):
        if not row or not "".join(row).strip():
            continue
        try:
            vals = [float(v) for v in row]
        except ValueError:
            if no == 1:  # header
                continue
            raise ParseError(f"{path}: line {no}: non-numeric value in {row!r}") from None
        if len(vals) not in (1, 2):
            raise ParseError(f"{path}: line {no}: expected re[,im], got {len(vals)} fields")
        out.append(complex(vals[0], vals[1] if len(vals) == 2 else 0.0))
    if not out:
        raise ParseError(f"{path}: no vector entries")
    return np.array(out, dtype=complex)


def write_vector(path, v) -> None:
    v = np.asarray(v, dtype=complex)
    write_json(path, [[float(z.real), float(z.imag)] for z in v])


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
