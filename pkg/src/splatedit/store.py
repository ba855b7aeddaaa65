"""Content-addressed blob store and a one-at-a-time background job queue.

Every artifact is immutable: its ID is a short digest of the stored bytes,
so repeating a write returns the same ID and never rewrites the blob.
Job records are flushed to disk on every state change, which means a
service restart finds each past job as done or failed, never half-running.
"""

from __future__ import annotations

import hashlib
import json
import os
import queue
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .ply import load_ply, save_ply
from .scene import GaussianScene, Variation, load_variation, variation_to_bytes

KINDS = ("scenes", "variations", "weights", "datasets", "jobs")
SUFFIXES = {"scenes": ".ply", "variations": ".splv", "weights": ".ckpt"}
JOB_STATUSES = ("queued", "running", "done", "failed")
_STATUS_RANK = {s: i for i, s in enumerate(JOB_STATUSES)}


class StoreError(KeyError):
    pass


class JobError(ValueError):
    pass


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass
class JobRecord:
    id: str
    kind: str
    status: str = "queued"
    progress: float = 0.0
    loss_tail: list = field(default_factory=list)
    error: str = ""
    result: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


class Store:
    """Filesystem-backed immutable artifact store rooted at ``root``."""

    def __init__(self, root):
        self.root = Path(root)
        for kind in KINDS:
            (self.root / kind).mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, kind: str, blob_id: str) -> Path:
        return self.root / kind / (blob_id + SUFFIXES.get(kind, ""))

    def put_bytes(self, kind: str, data: bytes) -> str:
        blob_id = digest(data)
        path = self._path(kind, blob_id)
        with self._write_lock:
            if not path.exists():
                tmp = path.with_suffix(path.suffix + ".tmp")
                tmp.write_bytes(data)
                os.replace(tmp, path)
        return blob_id

    def get_bytes(self, kind: str, blob_id: str) -> bytes:
        path = self._path(kind, blob_id)
        if not path.exists():
            raise StoreError(f"no {kind[:-1]} with id {blob_id!r}")
        return path.read_bytes()

    def has(self, kind: str, blob_id: str) -> bool:
        return self._path(kind, blob_id).exists()

    def list_ids(self, kind: str) -> list:
        suffix = SUFFIXES.get(kind, "")
        return sorted(p.name[:len(p.name) - len(suffix)] if suffix else p.stem
                      for p in (self.root / kind).iterdir()
                      if p.is_file() and p.name.endswith(suffix))

    # typed helpers ------------------------------------------------------

    def put_scene(self, scene: GaussianScene) -> str:
        import io
        buf = io.BytesIO()
        save_ply(scene, buf)
        return self.put_bytes("scenes", buf.getvalue())

    def get_scene(self, scene_id: str) -> GaussianScene:
        import io
        return load_ply(io.BytesIO(self.get_bytes("scenes", scene_id)))

    def put_variation(self, v: Variation) -> str:
        return self.put_bytes("variations", variation_to_bytes(v))

    def get_variation(self, variation_id: str) -> Variation:
        return load_variation(self.get_bytes("variations", variation_id))

    def put_weights_file(self, path) -> str:
        return self.put_bytes("weights", Path(path).read_bytes())

    def weights_path(self, weights_id: str) -> Path:
        path = self._path("weights", weights_id)
        if not path.exists():
            raise StoreError(f"no weights with id {weights_id!r}")
        return path

    # jobs ---------------------------------------------------------------

    def _job_path(self, job_id: str) -> Path:
        return self.root / "jobs" / (job_id + ".json")

    def write_job(self, record: JobRecord):
        path = self._job_path(record.id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(record.to_json()))
        os.replace(tmp, path)

    def read_job(self, job_id: str) -> JobRecord:
        path = self._job_path(job_id)
        if not path.exists():
            raise StoreError(f"no job with id {job_id!r}")
        return JobRecord(**json.loads(path.read_text()))

    def list_jobs(self) -> list:
        return sorted(p.stem for p in (self.root / "jobs").glob("*.json"))

    def recover_jobs(self):
        """Mark jobs left queued or running by a dead process as failed."""
        for job_id in self.list_jobs():
            record = self.read_job(job_id)
            if record.status in ("queued", "running"):
                record.status = "failed"
                record.error = "interrupted by service restart"
                self.write_job(record)


class JobQueue:
    """Single-worker queue; at most one job runs at a time."""

    def __init__(self, store: Store):
        self.store = store
        self._queue = queue.Queue()
        self._counter = 0
        self._lock = threading.Lock()
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def submit(self, kind: str, fn) -> str:
        """``fn(record, flush)`` does the work; it may update progress via
        ``flush()`` and should return a result dict."""
        with self._lock:
            self._counter += 1
            job_id = f"job{self._counter:06d}-{int(time.time())}"
        record = JobRecord(id=job_id, kind=kind)
        self.store.write_job(record)
        self._queue.put((record, fn))
        return job_id

    def _advance(self, record: JobRecord, status: str):
        if _STATUS_RANK[status] < _STATUS_RANK[record.status]:
            raise JobError(f"illegal transition {record.status} -> {status}")
        record.status = status
        self.store.write_job(record)

    def _run(self):
        while True:
            record, fn = self._queue.get()
            self._advance(record, "running")
            try:
                result = fn(record, lambda: self.store.write_job(record))
                record.progress = 1.0
                record.result = result or {}
                self._advance(record, "done")
            except Exception as exc:  # noqa: BLE001 - job isolation boundary
                record.error = f"{type(exc).__name__}: {exc}"
                self._advance(record, "failed")
            finally:
                self._queue.task_done()

    def wait_idle(self, timeout: float | None = None):
        deadline = None if timeout is None else time.monotonic() + timeout
        while self._queue.unfinished_tasks:
            if deadline is not None and time.monotonic() > deadline:
                raise TimeoutError("jobs still running")
            time.sleep(0.01)
