"""pandas views over run outputs, plus the spreadsheet report."""
import io
from pathlib import Path

import pandas as pd

from storage.records import read_records


def records_frame(path):
    """One row per frame record: frame, E, active, box count, best box, gaze."""
    rows = []
    for record in read_records(path):
        boxes = record.get("boxes", [])
        best = boxes[0] if boxes else [None] * 5
        rows.append({
            "frame": record["frame"],
            "E": record["E"],
            "active": record["active"],
            "boxes": len(boxes),
            "x1": best[0], "y1": best[1], "x2": best[2], "y2": best[3],
            "energy": best[4],
            "gaze_x": record["gaze"][0],
            "gaze_y": record["gaze"][1],
        })
    return pd.DataFrame(rows, columns=["frame", "E", "active", "boxes", "x1", "y1", "x2", "y2", "energy", "gaze_x", "gaze_y"])


def tubes_frame(path):
    rows = []
    for record in read_records(path):
        frames = record.get("frames", [])
        rows.append({
            "video": record["video"],
            "tube": record["tube"],
            "start": frames[0]["frame"] if frames else None,
            "end": frames[-1]["frame"] if frames else None,
            "length": len(frames),
            "carried": sum(1 for f in frames if f.get("carried")),
            "energy": record["energy"],
        })
    return pd.DataFrame(rows, columns=["video", "tube", "start", "end", "length", "carried", "energy"])


def metrics_frame(records):
    """Metric records ``{"metric", "sigma", "value", ...}`` as a table."""
    df = pd.DataFrame(list(records))
    for column in ("metric", "sigma", "value"):
        if column not in df.columns:
            df[column] = None
    front = ["metric", "sigma", "value"]
    return df[front + [c for c in df.columns if c not in front]]


def excel_report(sheets):
    """Write ``{sheet name: DataFrame}`` into an in-memory .xlsx; returns bytes."""
    buffer = io.BytesIO()
    with pd.ExcelWriter(buffer, engine="xlsxwriter") as writer:
        workbook = writer.book
        header_format = workbook.add_format({
            "bold": True,
            "bg_color": "#0E1117",
            "font_color": "white",
            "border": 1,
        })
        for name, df in sheets.items():
            df.to_excel(writer, sheet_name=name, index=False)
            worksheet = writer.sheets[name]
            for col_num, value in enumerate(df.columns.values):
                worksheet.write(0, col_num, value, header_format)
                width = max(df[value].astype(str).apply(len).max() if len(df) else 0, len(str(value)))
                worksheet.set_column(col_num, col_num, width + 2)
    return buffer.getvalue()


def write_excel_report(path, sheets):
    Path(path).write_bytes(excel_report(sheets))
    return path
