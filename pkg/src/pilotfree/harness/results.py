"""CSV persistence of sweep results plus a JSON metadata sidecar."""

import csv
import io
import json
import math

from ..grid import PatternKind
from .config import format_point

__all__ = ["CSV_HEADER", "to_csv_text", "write_csv", "read_csv", "write_meta"]

CSV_HEADER = ["sweep_axis", "point", "receiver", "layer", "ser", "err_count",
              "re_count", "mean_rho", "erasures", "seconds"]


def _g6(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.6g}"


def _point_key(p):
    if isinstance(p, (str, PatternKind)):
        return (1, 0.0, str(getattr(p, "value", p)))
    return (0, float(p), "")


def to_csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=lambda r: (_point_key(r.point), r.receiver, r.layer)):
        w.writerow([
            r.sweep_axis, format_point(r.point), r.receiver, r.layer, _g6(r.ser),
            r.err_count, r.re_count, _g6(r.mean_rho), r.erasures, _g6(r.seconds),
        ])
    return buf.getvalue()


def write_csv(rows, path):
    """Write rows sorted by (point, receiver, layer); floats to 6 significant digits."""
    text = to_csv_text(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_meta(meta, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
