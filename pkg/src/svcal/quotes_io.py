"""Quote-file CSV schema: parse, validate, emit.

Columns (header required, decimal units; a ``%`` suffix divides by 100):

    tenor,expiry_years,forward,discount,atm_vol,ms25,rr25

Rows must have strictly increasing expiries.  Raw field text is retained so
that pass-through emission (e.g. a markdown with weight 1) is byte-exact.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from .errors import DomainError, QuoteParseError
from .fx_quotes import TenorQuote
from .models import MarketSlice

HEADER = ("tenor", "expiry_years", "forward", "discount", "atm_vol", "ms25", "rr25")


@dataclass(frozen=True)
class QuoteRow:
    tenor_label: str
    expiry: float
    forward: float
    discount: float
    atm_vol: float
    ms25: float
    rr25: float
    raw: Tuple[str, ...]  # original field text, len 7

    def quote(self) -> TenorQuote:
        return TenorQuote(self.tenor_label, self.expiry, self.atm_vol, self.ms25, self.rr25)

    def slice(self) -> MarketSlice:
        return MarketSlice(self.forward, self.discount, self.expiry)


def parse_number(text: str) -> float:
    t = text.strip()
    if t.endswith("%"):
        return float(t[:-1]) / 100.0
    return float(t)


def parse_quotes(text: str) -> List[QuoteRow]:
    lines = [ln for ln in text.splitlines()]
    rows: List[QuoteRow] = []
    if not lines:
        raise QuoteParseError(1, "empty quote file")
    header = tuple(f.strip() for f in lines[0].split(","))
    if header != HEADER:
        raise QuoteParseError(1, f"expected header {','.join(HEADER)!r}, got {lines[0]!r}")
    prev_expiry = 0.0
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = tuple(f.strip() for f in line.split(","))
        if len(fields) != 7:
            raise QuoteParseError(i, f"expected 7 fields, got {len(fields)}")
        try:
            expiry = parse_number(fields[1])
            forward = parse_number(fields[2])
            discount = parse_number(fields[3])
            atm = parse_number(fields[4])
            ms = parse_number(fields[5])
            rr = parse_number(fields[6])
        except ValueError as exc:
            raise QuoteParseError(i, str(exc)) from exc
        row = QuoteRow(fields[0], expiry, forward, discount, atm, ms, rr, fields)
        try:
            row.quote()
            row.slice()
        except DomainError as exc:
            raise QuoteParseError(i, str(exc)) from exc
        if expiry <= prev_expiry:
            raise QuoteParseError(i, f"expiries must be strictly increasing, got {expiry}")
        prev_expiry = expiry
        rows.append(row)
    if not rows:
        raise QuoteParseError(len(lines), "no quotes")
    return rows


def load_quotes(path: Union[str, Path]) -> List[QuoteRow]:
    return parse_quotes(Path(path).read_text())


def emit_quotes(rows: Sequence[QuoteRow]) -> str:
    """Rows back to CSV text, preserving each row's raw field text."""
    out = [",".join(HEADER)]
    for row in rows:
        out.append(",".join(row.raw))
    return "\n".join(out) + "\n"


def scale_row(row: QuoteRow, lam: float) -> QuoteRow:
    """Markdown helper: ms25/rr25 scaled by lam, raw text kept when unchanged."""
    if lam == 1.0:
        return row
    ms, rr = row.ms25 * lam, row.rr25 * lam
    raw = row.raw[:5] + (repr(ms), repr(rr))
    return QuoteRow(row.tenor_label, row.expiry, row.forward, row.discount,
                    row.atm_vol, ms, rr, raw)


def quotes_digest(data: Union[str, bytes, Path]) -> str:
    """sha256 of the quote file content."""
    if isinstance(data, Path):
        payload = data.read_bytes()
    elif isinstance(data, str):
        payload = data.encode()
    else:
        payload = data
    return hashlib.sha256(payload).hexdigest()


VARSWAP_HEADER = ("expiry_years", "fair_variance")


def parse_varswap_curve(text: str) -> List[Tuple[float, float]]:
    """Quoted variance-swap curve CSV: header + (expiry_years, fair_variance) rows."""
    lines = text.splitlines()
    if not lines:
        raise QuoteParseError(1, "empty variance-swap file")
    header = tuple(f.strip() for f in lines[0].split(","))
    if header != VARSWAP_HEADER:
        raise QuoteParseError(1, f"expected header {','.join(VARSWAP_HEADER)!r}, got {lines[0]!r}")
    out: List[Tuple[float, float]] = []
    prev = 0.0
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise QuoteParseError(i, f"expected 2 fields, got {len(fields)}")
        try:
            expiry, var = parse_number(fields[0]), parse_number(fields[1])
        except ValueError as exc:
            raise QuoteParseError(i, str(exc)) from exc
        if expiry <= prev:
            raise QuoteParseError(i, f"expiries must be strictly increasing, got {expiry}")
        if var <= 0:
            raise QuoteParseError(i, f"fair variance must be > 0, got {var}")
        prev = expiry
        out.append((expiry, var))
    if not out:
        raise QuoteParseError(len(lines), "no variance-swap points")
    return out


def load_varswap_curve(path: Union[str, Path]) -> List[Tuple[float, float]]:
    return parse_varswap_curve(Path(path).read_text())
