"""HTTP facade and review-queue backend.

The queue realizes the human-review step: flagged images are enqueued as
review items, annotators lease items FIFO and submit verdicts, and the
loop drains completed verdicts at its round merge barrier. A file-based
export/import path covers review without the UI.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import FileResponse, JSONResponse, RedirectResponse

from .errors import TreemapperError
from .loop import ReviewItem, ReviewVerdict

DEFAULT_LEASE_SECONDS = 300.0


class LeaseConflictError(TreemapperError):
    """Verdict submitted for an image that holds no active lease."""


@dataclass
class _Lease:
    item: ReviewItem
    expires_at: float


@dataclass
class ReviewQueue:
    """FIFO review queue with leases and idempotent verdict submission.

    Conservation invariant: every enqueued item is exactly one of pending,
    leased, or completed. Mutations are serialized by an internal lock so
    the HTTP handlers can share one instance.
    """

    lease_seconds: float = DEFAULT_LEASE_SECONDS
    pending: list[ReviewItem] = field(default_factory=list)
    leased: dict[str, _Lease] = field(default_factory=dict)
    completed: dict[str, ReviewVerdict] = field(default_factory=dict)
    round: int = 0

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    # -- core operations -------------------------------------------------

    def enqueue(self, items: list[ReviewItem]) -> int:
        """Add items not already tracked; returns how many were added."""
        with self._lock:
            known = (
                {i.image_id for i in self.pending}
                | set(self.leased)
                | set(self.completed)
            )
            added = 0
            for item in items:
                if item.image_id in known:
                    continue
                self.pending.append(item)
                known.add(item.image_id)
                added += 1
                self.round = max(self.round, item.round)
            return added

    def _reclaim_expired(self, now: float) -> None:
        expired = [k for k, lease in self.leased.items() if lease.expires_at <= now]
        # Expired leases rejoin the front so FIFO age order is preserved.
        for k in sorted(expired, reverse=True):
            self.pending.insert(0, self.leased.pop(k).item)

    def next_item(self, now: float | None = None) -> ReviewItem | None:
        """Lease and return the oldest pending item, or None when drained."""
        now = time.monotonic() if now is None else now
        with self._lock:
            self._reclaim_expired(now)
            if not self.pending:
                return None
            item = self.pending.pop(0)
            self.leased[item.image_id] = _Lease(item, now + self.lease_seconds)
            return item

    def submit(self, verdict: ReviewVerdict, now: float | None = None) -> None:
        """Record a verdict for a leased item.

        Duplicate submissions for an image already completed replace the
        stored verdict (last write wins) without creating a second entry.
        """
        now = time.monotonic() if now is None else now
        with self._lock:
            self._reclaim_expired(now)
            if verdict.image_id in self.leased:
                del self.leased[verdict.image_id]
                self.completed[verdict.image_id] = verdict
            elif verdict.image_id in self.completed:
                self.completed[verdict.image_id] = verdict
            else:
                raise LeaseConflictError(
                    f"no active lease for image {verdict.image_id}"
                )

    def drain_completed(self) -> list[ReviewVerdict]:
        """Hand the completed verdicts to the caller (the round merge point)."""
        with self._lock:
            verdicts = list(self.completed.values())
            self.completed.clear()
            return verdicts

    def outstanding(self) -> list[ReviewItem]:
        with self._lock:
            return list(self.pending) + [l.item for l in self.leased.values()]

    def counts(self) -> dict[str, int]:
        with self._lock:
            return {
                "pending": len(self.pending),
                "leased": len(self.leased),
                "completed": len(self.completed),
            }

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "lease_seconds": self.lease_seconds,
                "round": self.round,
                "pending": [i.to_dict() for i in self.pending],
                "leased": [l.item.to_dict() for l in self.leased.values()],
                "completed": [v.to_dict() for v in self.completed.values()],
            }

    @classmethod
    def from_dict(cls, data: dict) -> "ReviewQueue":
        queue = cls(lease_seconds=data.get("lease_seconds", DEFAULT_LEASE_SECONDS))
        queue.round = data.get("round", 0)
        # Leases do not survive persistence; leased items rejoin pending.
        queue.pending = [ReviewItem.from_dict(d) for d in data.get("leased", [])]
        queue.pending += [ReviewItem.from_dict(d) for d in data.get("pending", [])]
        for v in data.get("completed", []):
            verdict = ReviewVerdict.from_dict(v)
            queue.completed[verdict.image_id] = verdict
        return queue

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "ReviewQueue":
        return cls.from_dict(json.loads(Path(path).read_text()))


class QueueAnnotator:
    """Annotator backed by a ReviewQueue (service or file based).

    Enqueues this round's items, drains whatever verdicts have been
    submitted so far (possibly answering earlier rounds), and carries the
    rest forward.
    """

    def __init__(self, queue: ReviewQueue) -> None:
        self.queue = queue

    def review(
        self, items: list[ReviewItem]
    ) -> tuple[list[ReviewVerdict], list[ReviewItem]]:
        self.queue.enqueue(items)
        verdicts = self.queue.drain_completed()
        return verdicts, self.queue.outstanding()


# ---------------------------------------------------------------------------
# file-based review fallback


def export_pending(queue: ReviewQueue, path: str | Path) -> int:
    """Write outstanding review items to a JSON file; returns the count."""
    items = queue.outstanding()
    Path(path).write_text(json.dumps([i.to_dict() for i in items], indent=2))
    return len(items)


def import_verdicts(queue: ReviewQueue, path: str | Path) -> int:
    """Ingest verdicts from a JSON file, leasing items as needed."""
    records = json.loads(Path(path).read_text())
    outstanding = {i.image_id for i in queue.outstanding()}
    imported = 0
    for rec in records:
        verdict = ReviewVerdict.from_dict(rec)
        if verdict.image_id in outstanding:
            # Lease cycle: take items until this one is leased.
            while verdict.image_id not in queue.leased:
                if queue.next_item() is None:
                    break
        queue.submit(verdict)
        imported += 1
    return imported


# ---------------------------------------------------------------------------
# HTTP facade


def create_app(
    queue: ReviewQueue,
    reports_path: str | Path | None = None,
    queue_path: str | Path | None = None,
    image_uris: dict[str, str] | None = None,
) -> FastAPI:
    """Service wiring: queue endpoints plus campaign status.

    Campaign status is read from the checkpoint directory written by
    run_campaign, so pollers always see a consistent prefix of rounds.
    Image bytes are passed through by URI (redirect or local file), never
    proxied or cached.
    """
    app = FastAPI(title="treemapper review service")

    def persist() -> None:
        if queue_path is not None:
            queue.save(queue_path)

    @app.get("/queue/next")
    def queue_next() -> Response:
        item = queue.next_item()
        if item is None:
            return Response(status_code=204)
        persist()
        return JSONResponse(item.to_dict())

    @app.post("/queue/verdict")
    def queue_verdict(payload: dict) -> Response:
        try:
            queue.submit(ReviewVerdict.from_dict(payload))
        except LeaseConflictError as exc:
            return JSONResponse({"error": str(exc)}, status_code=409)
        persist()
        return JSONResponse({"status": "ok"})

    @app.get("/queue/stats")
    def queue_stats() -> JSONResponse:
        return JSONResponse(queue.counts())

    @app.get("/images/{image_id}")
    def image_bytes(image_id: str) -> Response:
        uri = (image_uris or {}).get(image_id)
        if uri is None:
            return JSONResponse({"error": f"unknown image {image_id}"}, status_code=404)
        if uri.startswith(("http://", "https://")):
            return RedirectResponse(uri, status_code=307)
        path = Path(uri.removeprefix("file://"))
        if not path.is_file():
            return JSONResponse({"error": f"missing file {path}"}, status_code=404)
        return FileResponse(path)

    @app.get("/campaign/status")
    def campaign_status() -> JSONResponse:
        if reports_path is None:
            return JSONResponse([])
        from .loop import latest_checkpoint

        latest = latest_checkpoint(reports_path)
        if latest is None:
            return JSONResponse([])
        data = json.loads(latest.read_text())
        return JSONResponse(data["reports"])

    return app
