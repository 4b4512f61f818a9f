"""Byte-exact record of every simulated transfer."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass

CSV_COLUMNS = ("step", "pass", "kind", "src", "dst", "bytes")
PASSES = ("cond", "uncond")
KINDS = ("scatter", "gather", "activation")


@dataclass(frozen=True)
class CommRecord:
    step: int
    pass_: str
    kind: str
    src: int
    dst: int
    elements: int
    dtype_bytes: int
    nbytes: int

    def as_row(self) -> tuple:
        return (self.step, self.pass_, self.kind, self.src, self.dst, self.nbytes)


class CommLedger:
    def __init__(self):
        self.records: list[CommRecord] = []

    def record(self, step, pass_, kind, src, dst, elements, dtype_bytes, nbytes=None) -> CommRecord:
        if pass_ not in PASSES:
            raise ValueError(f"unknown pass {pass_!r}")
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}")
        if src == dst:
            raise ValueError("a transfer needs two distinct endpoints")
        expected = elements * dtype_bytes
        if nbytes is None:
            nbytes = expected
        if nbytes != expected:
            raise ValueError(f"payload of {nbytes} bytes is not {elements} x {dtype_bytes}")
        rec = CommRecord(step, pass_, kind, src, dst, int(elements), int(dtype_bytes), int(nbytes))
        self.records.append(rec)
        return rec

    def __len__(self):
        return len(self.records)

    @property
    def grand_total(self) -> int:
        return sum(r.nbytes for r in self.records)

    def per_step(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for r in self.records:
            out[r.step] += r.nbytes
        return dict(sorted(out.items()))

    def per_worker(self) -> dict[int, int]:
        """Bytes touching each worker; a transfer counts toward both endpoints."""
        out: dict[int, int] = defaultdict(int)
        for r in self.records:
            out[r.src] += r.nbytes
            out[r.dst] += r.nbytes
        return dict(sorted(out.items()))

    def by_kind(self) -> dict[str, int]:
        out = {k: 0 for k in KINDS}
        for r in self.records:
            out[r.kind] += r.nbytes
        return out

    def finalize(self) -> int:
        total = self.grand_total
        if total != sum(self.per_step().values()):
            raise AssertionError("ledger step totals disagree with the record sum")
        if 2 * total != sum(self.per_worker().values()):
            raise AssertionError("ledger worker totals disagree with the record sum")
        return total

    def summary(self, expected_total: int | None = None) -> dict:
        total = self.finalize()
        return {
            "per_worker_totals": {str(k): v for k, v in self.per_worker().items()},
            "grand_total": total,
            "formula_check": expected_total is not None and expected_total == total,
            "expected_total": expected_total,
            "by_kind": self.by_kind(),
        }

    def to_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow(r.as_row())

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, fh, dtype_bytes: int = 1) -> "CommLedger":
        """Rebuild a ledger from its CSV export.

        The CSV carries bytes only, so element counts are ``bytes / dtype_bytes``.
        """
        ledger = cls()
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected ledger columns {reader.fieldnames}")
        for row in reader:
            nbytes = int(row["bytes"])
            ledger.record(
                int(row["step"]), row["pass"], row["kind"], int(row["src"]), int(row["dst"]),
                nbytes // dtype_bytes, dtype_bytes, nbytes,
            )
        return ledger
