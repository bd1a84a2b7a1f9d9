"""Timestamped persistence of calibrated parameter sets.

Append-only JSON-lines file, one self-describing record per line.  Floats
are serialized as shortest round-trip decimal text, so a store round trip
is bit-exact.  Writes are serialized through a process-level lock
(single-writer contract); reads re-scan the file.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

from .errors import DomainError, RecordNotFoundError
from .quotes_io import QuoteRow, quotes_digest

ENV_STORE = "SVCAL_STORE"
_FILE_NAME = "params.jsonl"


@dataclass(frozen=True)
class ParamRecord:
    """One calibrated parameter set: flat params or a per-tenor map."""

    model_kind: str
    params: Mapping
    timestamp: str  # ISO-8601
    quote_digest: str
    strategy: Mapping = field(default_factory=dict)
    diagnostics: Mapping = field(default_factory=dict)
    record_id: Optional[int] = None
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.timestamp:
            raise DomainError("timestamp required")
        datetime.fromisoformat(self.timestamp)  # raises on malformed input
        if not self.quote_digest:
            raise DomainError("quote digest required")
        if not self.params:
            raise DomainError("params required")

    def flat_params(self, tenor: Optional[str] = None) -> Mapping[str, float]:
        """The parameter dict, selecting a tenor when the record is per-tenor."""
        if self.is_per_tenor:
            if tenor is None:
                raise DomainError(
                    f"record {self.record_id} is per-tenor; choose one of {sorted(self.params)}"
                )
            if tenor not in self.params:
                raise DomainError(f"tenor {tenor!r} not in record (has {sorted(self.params)})")
            return self.params[tenor]
        return self.params

    @property
    def is_per_tenor(self) -> bool:
        return any(isinstance(v, dict) for v in self.params.values())


def _record_to_json(rec: ParamRecord) -> str:
    payload = {
        "record_id": rec.record_id,
        "model_kind": rec.model_kind,
        "params": rec.params,
        "timestamp": rec.timestamp,
        "quote_digest": rec.quote_digest,
        "strategy": rec.strategy,
        "diagnostics": rec.diagnostics,
        "warnings": list(rec.warnings),
    }
    return json.dumps(payload, sort_keys=True)


def _record_from_json(line: str) -> ParamRecord:
    d = json.loads(line)
    return ParamRecord(
        model_kind=d["model_kind"],
        params=d["params"],
        timestamp=d["timestamp"],
        quote_digest=d["quote_digest"],
        strategy=d.get("strategy", {}),
        diagnostics=d.get("diagnostics", {}),
        record_id=d.get("record_id"),
        warnings=tuple(d.get("warnings", ())),
    )


def default_store_path() -> Path:
    return Path(os.environ.get(ENV_STORE, "./svcal_store"))


class ParamStore:
    """Append-only record store rooted at a directory."""

    def __init__(self, root: Union[str, Path, None] = None):
        self.root = Path(root) if root is not None else default_store_path()
        self._lock = threading.Lock()

    @property
    def path(self) -> Path:
        return self.root / _FILE_NAME

    def _read_all(self) -> List[ParamRecord]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text().splitlines():
            if line.strip():
                out.append(_record_from_json(line))
        return out

    def save(self, record: ParamRecord, quotes: Union[str, bytes, Path, None] = None) -> int:
        """Persist the record; returns its id (unique, monotone).

        When the source quotes are supplied, their digest is checked against
        the record's; a mismatch stores a ``digest_mismatch`` warning flag.
        """
        with self._lock:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
                existing = self._read_all()
                next_id = 1 + max((r.record_id or 0) for r in existing) if existing else 1
                rec = replace(record, record_id=next_id)
                if quotes is not None and quotes_digest(quotes) != rec.quote_digest:
                    rec = replace(rec, warnings=rec.warnings + ("digest_mismatch",))
                with self.path.open("a") as fh:
                    fh.write(_record_to_json(rec) + "\n")
                return next_id
            except OSError as exc:
                raise DomainError(f"store write to {self.path} failed: {exc}") from exc

    def load(self, record_id: int) -> ParamRecord:
        for rec in self._read_all():
            if rec.record_id == record_id:
                return rec
        raise RecordNotFoundError(f"no record with id {record_id} in {self.path}")

    def latest(self, model_kind: str, as_of: Union[str, datetime, None] = None) -> ParamRecord:
        """Most recent record for the model kind at or before ``as_of``."""
        cutoff = None
        if as_of is not None:
            cutoff = as_of if isinstance(as_of, datetime) else datetime.fromisoformat(as_of)
        best = None
        for rec in self._read_all():
            if rec.model_kind != model_kind:
                continue
            ts = datetime.fromisoformat(rec.timestamp)
            if cutoff is not None and ts > cutoff:
                continue
            if best is None or (ts, rec.record_id) > best[0]:
                best = ((ts, rec.record_id), rec)
        if best is None:
            raise RecordNotFoundError(
                f"no {model_kind!r} record at or before {as_of}" if as_of
                else f"no {model_kind!r} record in {self.path}"
            )
        return best[1]

    def list_records(self, model_kind: Optional[str] = None) -> List[ParamRecord]:
        return [r for r in self._read_all() if model_kind is None or r.model_kind == model_kind]


def live_calibrate(rows: Sequence[QuoteRow], config, tenor: Optional[str] = None):
    """Calibrate at valuation time without touching any store.

    Delegates to the same strategy runner as the up-front workflow, so
    identical inputs produce identical parameters.  For the tenor strategy,
    ``tenor`` restricts the run to the one maturity of interest and a single
    result is returned; otherwise a list of (label, result) pairs.
    """
    from .workflows import run_strategy

    use_rows = list(rows)
    if tenor is not None:
        use_rows = [r for r in use_rows if r.tenor_label == tenor]
        if not use_rows:
            raise DomainError(f"tenor {tenor!r} not present in quotes")
    results = run_strategy(use_rows, config)
    if tenor is not None or config.strategy != "tenor":
        return results[0][1]
    return results
