"""CSV and text serialisation.

Floats are written with 12 significant digits and ``v2 = INF`` as ``inf``;
rows follow the space's enumeration order, so identical inputs give
byte-identical files.
"""
from __future__ import annotations

import csv
import io
import os
import tempfile

from .model import INF


def fmt(x) -> str:
    if isinstance(x, float) or hasattr(x, "dtype"):
        x = float(x)
        if x == INF:
            return "inf"
        return format(x, ".12g")
    return str(x)


def fmt_v2(v2) -> str:
    return "inf" if v2 == INF else str(int(v2))


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) for c in row])
    return buf.getvalue()


def values_csv(values) -> str:
    rows = ((s.v1, fmt_v2(s.v2), s.b, float(v)) for s, v in zip(values.space, values.values))
    return to_csv(["v1", "v2", "b", "value"], rows)


def policy_csv(policy) -> str:
    rows = ((s.v1, fmt_v2(s.v2), s.b, int(a)) for s, a in zip(policy.space, policy.actions))
    return to_csv(["v1", "v2", "b", "action"], rows)


def violations_csv(reports) -> str:
    rows = []
    for rep in reports:
        for v in rep.violations:
            rows.append((v.check, v.v1, fmt_v2(v.v2), v.b, v.x, v.y, float(v.lhs), float(v.rhs)))
    return to_csv(["check", "v1", "v2", "b", "x", "y", "lhs", "rhs"], rows)


def report_text(reports) -> str:
    return "".join(rep.summary() + "\n" for rep in reports)


STATS_HEADER = ["p", "q1", "q2", "policy_name", "horizon", "seed", "avg_age", "half_width_99"]


def stats_row(stats):
    prm = stats.params
    return [float(prm.p), float(prm.q1), float(prm.q2), stats.policy_name, stats.horizon,
            stats.seed, float(stats.time_average_age), float(stats.confidence_half_width_99)]


SWEEP_HEADER = ["p", "q1", "q2", "N", "gain", "iterations", "residual"]
