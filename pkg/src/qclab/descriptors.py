"""Parser for body descriptor strings.

Grammar::

    body := "lp(p=" REAL ",n=" INT ")"
          | "ellipsoid(diag=" REAL ("," REAL)* ")"
          | "scale(" body "," REAL ")"
          | "linimg(" body "," PATH ")"

``PATH`` names a plain-text matrix file: one row per line, whitespace
separated reals.  Relative paths resolve against ``base_dir``.
"""
from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .bodies import Body, Ellipsoid, LinearImage, LpBall, Scaled


class DescriptorError(ValueError):
    """Malformed body descriptor."""


def _split_top(s: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(s):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise DescriptorError(f"unbalanced parentheses in {s!r}")
        elif ch == "," and depth == 0:
            parts.append(s[start:i])
            start = i + 1
    if depth != 0:
        raise DescriptorError(f"unbalanced parentheses in {s!r}")
    parts.append(s[start:])
    return [p.strip() for p in parts]


def _real(s: str, what: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise DescriptorError(f"{what}: expected a real number, got {s!r}") from None
    if not np.isfinite(v):
        raise DescriptorError(f"{what}: value must be finite, got {s!r}")
    return v


def _kwargs(parts: list[str], name: str) -> dict[str, str]:
    out = {}
    for part in parts:
        if "=" not in part:
            raise DescriptorError(f"{name}: expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def read_matrix(path: str) -> np.ndarray:
    """Read a whitespace-separated plain-text matrix."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(tok) for tok in line.split()])
    if not rows or len({len(r) for r in rows}) != 1:
        raise DescriptorError(f"matrix file {path!r} must hold equal-length rows")
    return np.array(rows, dtype=np.float64)


def parse_body(text: str, base_dir: Optional[str] = None) -> Body:
    """Build a :class:`~qclab.bodies.Body` from a descriptor string."""
    s = text.strip()
    if "(" not in s or not s.endswith(")"):
        raise DescriptorError(f"not a body descriptor: {text!r}")
    name, inner = s.split("(", 1)
    name = name.strip().lower()
    inner = inner[:-1]
    parts = _split_top(inner)
    try:
        if name == "lp":
            kw = _kwargs(parts, "lp")
            if set(kw) != {"p", "n"}:
                raise DescriptorError(f"lp expects keys p and n, got {sorted(kw)}")
            n_val = _real(kw["n"], "lp n")
            if n_val != int(n_val):
                raise DescriptorError(f"lp n must be an integer, got {kw['n']!r}")
            return LpBall(int(n_val), _real(kw["p"], "lp p"))
        if name == "ellipsoid":
            if not parts or not parts[0].startswith("diag="):
                raise DescriptorError("ellipsoid expects diag=<csv>")
            vals = [parts[0][len("diag="):]] + parts[1:]
            diag = [_real(v, "ellipsoid diag") for v in vals]
            if min(diag) <= 0:
                raise DescriptorError("ellipsoid diag entries must be positive")
            return Ellipsoid.from_diag(diag)
        if name == "scale":
            if len(parts) != 2:
                raise DescriptorError("scale expects (<body>,<t>)")
            return Scaled(parse_body(parts[0], base_dir), _real(parts[1], "scale t"))
        if name == "linimg":
            if len(parts) != 2:
                raise DescriptorError("linimg expects (<body>,<matrix-file>)")
            path = parts[1]
            full = path if os.path.isabs(path) or base_dir is None else os.path.join(base_dir, path)
            try:
                mat = read_matrix(full)
            except OSError as exc:
                raise DescriptorError(f"cannot read matrix file {path!r}: {exc}") from None
            return LinearImage(parse_body(parts[0], base_dir), mat, source=path)
    except DescriptorError:
        raise
    except ValueError as exc:
        raise DescriptorError(f"{text!r}: {exc}") from None
    raise DescriptorError(f"unknown body type {name!r}")
