"""Asynchronous stage jobs with polling state."""

from __future__ import annotations

import threading
import traceback
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


@dataclass
class Job:
    id: str
    session_id: str
    stage: str
    state: str = "queued"  # queued | running | done | failed
    error: str | None = None
    detail: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"id": self.id, "session": self.session_id, "stage": self.stage, "state": self.state}
        if self.error:
            out["error"] = self.error
        return out


class JobRunner:
    def __init__(self, max_workers: int = 2):
        self._executor = ThreadPoolExecutor(max_workers=max_workers)
        self._jobs: dict[str, Job] = {}
        self._guard = threading.Lock()

    def submit(self, session_id: str, stage: str, fn, lock) -> Job:
        """Run ``fn`` under the session's writer lock; caller pre-acquired it."""
        job = Job(id=uuid.uuid4().hex[:10], session_id=session_id, stage=stage)
        with self._guard:
            self._jobs[job.id] = job

        def run():
            job.state = "running"
            try:
                fn()
                job.state = "done"
            except Exception as exc:
                job.state = "failed"
                job.error = f"{type(exc).__name__}: {exc}"
                job.detail["traceback"] = traceback.format_exc()
            finally:
                lock.release_write()

        self._executor.submit(run)
        return job

    def get(self, job_id: str) -> Job | None:
        return self._jobs.get(job_id)

    def for_session(self, session_id: str) -> list[Job]:
        return [j for j in self._jobs.values() if j.session_id == session_id]

    def shutdown(self) -> None:
        self._executor.shutdown(wait=True)
