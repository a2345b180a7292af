"""Serialization of experiment results: CSV summaries and plot-data series.

Floats are printed with 17 significant digits so values round-trip exactly;
rows are written in a fixed order with ``\n`` newlines, which makes reruns
byte-comparable.
"""

from __future__ import annotations

from pathlib import Path


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path, columns, rows) -> Path:
    """Write rows (mappings) under a fixed column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_value(row.get(col, "")) for col in columns))
    path.write_text("\n".join(lines) + "\n", newline="")
    return path


def write_plotdata(out_path, series: dict) -> list[Path]:
    """Write each named series as a plain two-column text file.

    Files land next to ``out_path`` as ``<stem>__<series>.dat``.
    """
    out_path = Path(out_path)
    written = []
    for name, (xs, ys) in series.items():
        p = out_path.with_name(f"{out_path.stem}__{name}.dat")
        p.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{format_value(float(x))} {format_value(float(y))}" for x, y in zip(xs, ys)]
        p.write_text("\n".join(lines) + "\n", newline="")
        written.append(p)
    return written
