"""
Result tables (ablation, sweep, comparison) as CSV plus an .xlsx workbook.
"""
import csv
import logging
from pathlib import Path

from openpyxl import Workbook
from openpyxl.styles import Font

logger = logging.getLogger(__name__)


def _cell(value):
    if isinstance(value, float):
        return round(value, 6)
    return value


def write_table(out_dir, name, headers, rows, sheet_title=None):
    """Write <name>.csv and <name>.xlsx; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    xlsx_path = out_dir / f"{name}.xlsx"

    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(headers)
        for row in rows:
            writer.writerow([_cell(v) for v in row])

    wb = Workbook()
    ws = wb.active
    ws.title = (sheet_title or name)[:31]
    ws.append(list(headers))
    for cell in ws[1]:
        cell.font = Font(bold=True)
    for row in rows:
        ws.append([_cell(v) for v in row])
    for column, header in zip(ws.columns, headers):
        width = max(len(str(header)), *(len(str(c.value)) for c in column if c.value is not None))
        ws.column_dimensions[column[0].column_letter].width = width + 2
    wb.save(xlsx_path)

    logger.info("table written name=%s rows=%d out=%s", name, len(rows), out_dir)
    return csv_path, xlsx_path


def format_table(headers, rows) -> str:
    """Fixed-width text rendering for command output."""
    cells = [[str(h) for h in headers]] + [
        [f"{v:.4f}" if isinstance(v, float) else str(v) for v in row] for row in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines)
