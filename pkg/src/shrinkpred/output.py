"""CSV result files and a small dependency-free SVG line chart."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "CSV_MAGIC",
    "RISK_COLUMNS",
    "MalformedCSV",
    "format_value",
    "write_csv",
    "read_risk_csv",
    "RiskSeries",
    "render_svg",
]

CSV_MAGIC = "# shrinkpred-csv v1"
RISK_COLUMNS = ("method", "mu_norm", "d", "u", "v", "trials", "seed", "kl_risk", "std_err")

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
_LABELS = {
    "pu": "p_U (uniform Bayes)",
    "e1": "plug-in N(mu, xi I)",
    "e2": "plug-in N(mu, Sigma)",
    "eb": "empirical Bayes",
    "ps": "p_S (Stein Bayes)",
}


class MalformedCSV(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(columns: Sequence[str], rows: Iterable[Sequence], stream) -> None:
    """Write the versioned header comment, the column row and ``rows``."""
    stream.write(CSV_MAGIC + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


@dataclass
class RiskSeries:
    method: str
    mu_norm: list[float]
    kl_risk: list[float]
    std_err: list[float]


def read_risk_csv(text: str) -> list[RiskSeries]:
    """Parse a risk-curve CSV into one series per method, in first-seen order."""
    lines = text.splitlines()
    header_line = None
    for i, line in enumerate(lines, start=1):
        if line.strip() and not line.startswith("#"):
            header_line = i
            break
    if header_line is None:
        raise MalformedCSV(len(lines) or 1, "no header row")
    reader = csv.reader(io.StringIO("\n".join(lines[header_line - 1:])))
    header = next(reader)
    missing = [c for c in ("method", "mu_norm", "kl_risk") if c not in header]
    if missing:
        raise MalformedCSV(header_line, f"missing column(s) {', '.join(missing)}")
    col = {name: header.index(name) for name in header}
    series: dict[str, RiskSeries] = {}
    for offset, row in enumerate(reader, start=1):
        lineno = header_line + offset
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].startswith("#"):
            continue
        if len(row) != len(header):
            raise MalformedCSV(lineno, f"expected {len(header)} fields, found {len(row)}")
        try:
            mu = float(row[col["mu_norm"]])
            risk = float(row[col["kl_risk"]])
            se = float(row[col["std_err"]]) if "std_err" in col else 0.0
        except ValueError as exc:
            raise MalformedCSV(lineno, f"non-numeric value ({exc})") from None
        name = row[col["method"]]
        s = series.setdefault(name, RiskSeries(name, [], [], []))
        s.mu_norm.append(mu)
        s.kl_risk.append(risk)
        s.std_err.append(se)
    if not series:
        raise MalformedCSV(header_line + 1, "no data rows")
    return list(series.values())


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def render_svg(
    series: Sequence[RiskSeries],
    error_bars: bool = False,
    title: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Line chart of KL risk against ``||mu||``, one polyline per series."""
    left, right, top, bottom = 70, 180, 40, 55
    pw, ph = width - left - right, height - top - bottom
    xs = [x for s in series for x in s.mu_norm]
    lows = [y - (e if error_bars else 0.0) for s in series for y, e in zip(s.kl_risk, s.std_err)]
    highs = [y + (e if error_bars else 0.0) for s in series for y, e in zip(s.kl_risk, s.std_err)]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(lows), max(highs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad

    def px(x: float) -> float:
        return left + (x - x0) / (x1 - x0) * pw

    def py(y: float) -> float:
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    out.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>'
    )
    for tx in _ticks(x0, x1):
        out.append(f'<line x1="{px(tx):.2f}" y1="{top + ph}" x2="{px(tx):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(tx):.2f}" y="{top + ph + 18}" text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{py(ty):.2f}" x2="{left}" y2="{py(ty):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(ty) + 4:.2f}" text-anchor="end">{ty:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">||mu||</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2:.2f})">Kullback-Leibler risk</text>'
    )

    for k, s in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.mu_norm, s.kl_risk))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        if error_bars:
            for x, y, e in zip(s.mu_norm, s.kl_risk, s.std_err):
                out.append(
                    f'<line x1="{px(x):.2f}" y1="{py(y - e):.2f}" x2="{px(x):.2f}" y2="{py(y + e):.2f}" '
                    f'stroke="{color}" stroke-width="1"/>'
                )
        ly = top + 16 + 18 * k
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{_esc(_LABELS.get(s.method, s.method))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
