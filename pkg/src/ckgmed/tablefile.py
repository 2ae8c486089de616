"""Tab-separated output files with a commented provenance header.

Every file the pipeline writes starts with '#' comment lines (tool version,
config hash, seed) followed by a header row. Readers skip comment lines, so
outputs can be fed back in as inputs.
"""

from __future__ import annotations

import math

from .errors import ParseError


def format_value(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_table(path, columns: list[str], rows, comments=()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row width {len(row)} != {len(columns)} columns")
            fh.write("\t".join(format_value(v) for v in row) + "\n")


def read_table(path, expected_columns: list[str] | None = None) -> list[dict[str, str]]:
    """Rows as dicts keyed by header names; '#' lines and blanks are skipped."""
    header: list[str] | None = None
    out: list[dict[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if header is None:
                header = [p.strip() for p in parts]
                if expected_columns is not None and header != list(expected_columns):
                    raise ParseError(
                        f"expected columns {expected_columns}, got {header}", path=path,
                        line_no=line_no)
                continue
            if len(parts) != len(header):
                raise ParseError(
                    f"expected {len(header)} columns, got {len(parts)}", path=path,
                    line_no=line_no)
            out.append(dict(zip(header, parts)))
    if header is None:
        raise ParseError("missing header row", path=path)
    return out
