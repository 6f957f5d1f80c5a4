"""HTTP backend for pairwise scenario annotation.

Serves scenario pairs as playback geometry, records annotator choices in
an append-only file (fsynced before each acknowledgment, first write per
pair wins), and exports the effective records in the preferences format
the ranking trainer consumes. The whole service can restart without losing
a single acknowledged label.
"""
from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from random import Random

from .errors import DataError
from .ranking import PreferenceRecord
from .scenario import Scenario, ScenarioSet, canonical_segment, scenario_to_json

STRATEGIES = ("uniform-random", "coverage-balanced")


@dataclass
class PairAssignment:
    pair_id: str
    annotator: str
    a: str
    b: str
    served_at: float


@dataclass
class StoredLabel:
    pair_id: str
    annotator: str
    a: str
    b: str
    choice: str
    ts: float
    superseded: bool = False


def render_payload(scenario: Scenario) -> dict:
    """Playback geometry for one scenario, self-contained for a client."""
    obj = scenario_to_json(scenario)
    seg = canonical_segment(scenario)
    return {
        "scenario_id": scenario.scenario_id,
        "dt": scenario.dt,
        "split_index": seg.split_index,
        "n_steps": scenario.n_steps,
        "agents": [
            {
                "id": a["id"],
                "kind": a["kind"],
                "length": a["length"],
                "width": a["width"],
                "states": a["states"],
            }
            for a in obj["agents"]
        ],
        "lanes": obj["lanes"],
        "drivable_area": obj["drivable_area"],
        "ego_id": scenario.ego_id,
    }


class LabelStore:
    """Append-only JSONL store with a served-pair registry sidecar.

    A torn trailing line (interrupted append) is discarded on load with a
    diagnostic; any earlier malformed line is corruption and a hard error.
    """

    def __init__(self, path: str):
        self.path = path
        self.registry_path = path + ".served"
        self.labels: list[StoredLabel] = []
        self.by_pair: dict[str, StoredLabel] = {}
        self.assignments: dict[str, PairAssignment] = {}
        self.diagnostics: list[str] = []
        self._load()

    def _read_jsonl(self, path: str) -> list[dict]:
        if not os.path.exists(path):
            return []
        with open(path, "rb") as fh:
            raw = fh.read()
        rows: list[dict] = []
        lines = raw.split(b"\n")
        torn = lines[-1] if lines and lines[-1] else None
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                rows.append(json.loads(line.decode("utf-8")))
            except (ValueError, UnicodeDecodeError) as exc:
                if line is torn:
                    self.diagnostics.append(
                        f"{path}: discarded torn trailing line ({len(line)} bytes)"
                    )
                    self._truncate_torn(path, raw, line)
                    continue
                raise DataError(f"{path}: corrupt record on line {i + 1}: {exc}") from exc
        return rows

    def _truncate_torn(self, path: str, raw: bytes, torn: bytes) -> None:
        with open(path, "wb") as fh:
            fh.write(raw[: len(raw) - len(torn)])
            fh.flush()
            os.fsync(fh.fileno())

    def _load(self) -> None:
        for obj in self._read_jsonl(self.registry_path):
            assignment = PairAssignment(
                pair_id=str(obj["pair_id"]),
                annotator=str(obj["annotator"]),
                a=str(obj["a"]),
                b=str(obj["b"]),
                served_at=float(obj["served_at"]),
            )
            self.assignments[assignment.pair_id] = assignment
        for obj in self._read_jsonl(self.path):
            label = StoredLabel(
                pair_id=str(obj["pair_id"]),
                annotator=str(obj["annotator"]),
                a=str(obj["a"]),
                b=str(obj["b"]),
                choice=str(obj["choice"]),
                ts=float(obj["ts"]),
                superseded=bool(obj.get("superseded", False)),
            )
            self.labels.append(label)
            if label.pair_id not in self.by_pair:
                self.by_pair[label.pair_id] = label

    def _append(self, path: str, obj: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def record_assignment(self, assignment: PairAssignment) -> None:
        self.assignments[assignment.pair_id] = assignment
        self._append(
            self.registry_path,
            {
                "pair_id": assignment.pair_id,
                "annotator": assignment.annotator,
                "a": assignment.a,
                "b": assignment.b,
                "served_at": assignment.served_at,
            },
        )

    def record_label(self, label: StoredLabel) -> StoredLabel:
        """Append durably; returns the effective record for the pair (the
        first write, when this one arrives late)."""
        effective = self.by_pair.get(label.pair_id)
        if effective is not None:
            label.superseded = True
        self.labels.append(label)
        if not label.superseded:
            self.by_pair[label.pair_id] = label
            effective = label
        self._append(
            self.path,
            {
                "pair_id": label.pair_id,
                "annotator": label.annotator,
                "a": label.a,
                "b": label.b,
                "choice": label.choice,
                "ts": label.ts,
                "superseded": label.superseded,
            },
        )
        return effective

    def effective_records(self) -> list[PreferenceRecord]:
        ordered = sorted(self.by_pair.values(), key=lambda l: (l.ts, l.pair_id))
        return [
            PreferenceRecord(annotator=l.annotator, a=l.a, b=l.b, choice=l.choice, ts=l.ts)
            for l in ordered
        ]

    def labeled_pairs_for(self, annotator: str) -> set[frozenset]:
        return {
            frozenset((l.a, l.b)) for l in self.by_pair.values() if l.annotator == annotator
        }

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for l in self.by_pair.values():
            counts[l.a] = counts.get(l.a, 0) + 1
            counts[l.b] = counts.get(l.b, 0) + 1
        return counts


@dataclass
class AnnotationService:
    data: ScenarioSet
    store: LabelStore
    default_strategy: str = "uniform-random"
    seed: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _counter: int = 0
    _rng: Random | None = None

    def __post_init__(self) -> None:
        if len(self.data) < 2:
            raise DataError("annotation needs at least 2 scenarios")
        if self.default_strategy not in STRATEGIES:
            raise DataError(f"strategy must be one of {STRATEGIES}")
        self._rng = Random(self.seed)
        # pair ids keep increasing across restarts so old ids never collide
        for pid in self.store.assignments:
            try:
                self._counter = max(self._counter, int(pid.split("-")[-1]) + 1)
            except ValueError:
                continue

    def _remaining(self, annotator: str) -> list[tuple[str, str]]:
        labeled = self.store.labeled_pairs_for(annotator)
        ids = self.data.ids()
        out = []
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                if frozenset((ids[i], ids[j])) not in labeled:
                    out.append((ids[i], ids[j]))
        return out

    def next_pair(self, annotator: str, strategy: str | None = None) -> tuple[PairAssignment, dict, dict]:
        strategy = strategy or self.default_strategy
        if strategy not in STRATEGIES:
            raise DataError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
        if not annotator:
            raise DataError("annotator id required")
        with self._lock:
            remaining = self._remaining(annotator)
            if not remaining:
                raise ExhaustedError(f"annotator {annotator!r} has labeled every pair")
            if strategy == "uniform-random":
                a, b = remaining[self._rng.randrange(len(remaining))]
            else:
                counts = self.store.label_counts()
                remaining_set = set(remaining)
                by_need = sorted(self.data.ids(), key=lambda sid: (counts.get(sid, 0), sid))
                a, b = remaining[0]
                found = False
                for i in range(len(by_need)):
                    for j in range(i + 1, len(by_need)):
                        pair = (by_need[i], by_need[j])
                        if pair in remaining_set or pair[::-1] in remaining_set:
                            a, b = min(pair), max(pair)
                            found = True
                            break
                    if found:
                        break
            assignment = PairAssignment(
                pair_id=f"pair-{self._counter:06d}",
                annotator=annotator,
                a=a,
                b=b,
                served_at=time.time(),
            )
            self._counter += 1
            self.store.record_assignment(assignment)
        return (
            assignment,
            render_payload(self.data.get(a)),
            render_payload(self.data.get(b)),
        )

    def submit(self, pair_id: str, choice: str) -> dict:
        if choice not in ("A", "B", "skip"):
            raise DataError(f"choice must be A, B, or skip, got {choice!r}")
        with self._lock:
            assignment = self.store.assignments.get(pair_id)
            if assignment is None:
                raise UnknownPairError(f"unknown pair id {pair_id!r}")
            label = StoredLabel(
                pair_id=pair_id,
                annotator=assignment.annotator,
                a=assignment.a,
                b=assignment.b,
                choice=choice,
                ts=time.time(),
            )
            effective = self.store.record_label(label)
        return {
            "pair_id": pair_id,
            "accepted": not label.superseded,
            "effective_choice": effective.choice,
        }

    def export_text(self) -> str:
        lines = [
            json.dumps({"annotator": r.annotator, "a": r.a, "b": r.b, "choice": r.choice, "ts": r.ts})
            for r in self.store.effective_records()
        ]
        return "\n".join(lines) + ("\n" if lines else "")


class ExhaustedError(DataError):
    """Every unordered pair is already labeled by this annotator."""


class UnknownPairError(DataError):
    """Label submitted for a pair id that was never served."""


def build_app(service: AnnotationService, ui_dir: str | None = None):
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import PlainTextResponse

    app = FastAPI(title="scenario annotation service")

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "scenarios": len(service.data),
            "labels": len(service.store.by_pair),
            "diagnostics": service.store.diagnostics,
        }

    @app.get("/api/pair")
    def pair(annotator: str, strategy: str | None = None) -> dict:
        try:
            assignment, payload_a, payload_b = service.next_pair(annotator, strategy)
        except ExhaustedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except DataError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"pair_id": assignment.pair_id, "a": payload_a, "b": payload_b}

    @app.post("/api/label")
    def label(body: dict) -> dict:
        pair_id = body.get("pair_id")
        choice = body.get("choice")
        if not isinstance(pair_id, str) or not isinstance(choice, str):
            raise HTTPException(status_code=400, detail="body needs pair_id and choice strings")
        try:
            return service.submit(pair_id, choice)
        except UnknownPairError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except DataError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/api/export", response_class=PlainTextResponse)
    def export() -> str:
        return service.export_text()

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app


def serve(
    data: ScenarioSet,
    labels_path: str,
    port: int = 8700,
    strategy: str = "uniform-random",
    seed: int = 0,
    ui_dir: str | None = None,
    host: str = "127.0.0.1",
) -> None:
    import uvicorn

    service = AnnotationService(
        data=data, store=LabelStore(labels_path), default_strategy=strategy, seed=seed
    )
    app = build_app(service, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
