"""Background job registry for long-running harness work.

Jobs run on daemon threads inside the service process. Runs are minutes
long at most and the registry is in-memory, so a restart forgets finished
jobs while their artifacts stay on disk. Job ids come from a counter, not
a clock, so test runs are reproducible.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass


@dataclass
class Job:
    job_id: str
    kind: str
    state: str = "queued"
    error: str = ""
    summary: dict | None = None

    def view(self) -> dict:
        return {"job_id": self.job_id, "kind": self.kind, "state": self.state,
                "error": self.error, "summary": self.summary}


class JobRegistry:
    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._counter = itertools.count(1)

    def submit(self, kind: str, work) -> Job:
        """Start `work` (a no-argument callable returning a summary dict)."""
        with self._lock:
            job = Job(job_id=f"job-{next(self._counter):04d}", kind=kind)
            self._jobs[job.job_id] = job
            self._order.append(job.job_id)
        thread = threading.Thread(target=self._run, args=(job, work), daemon=True)
        thread.start()
        return job

    def _run(self, job: Job, work):
        job.state = "running"
        try:
            job.summary = work()
        except Exception as exc:  # report the failure, never kill the service
            job.error = f"{type(exc).__name__}: {exc}"
            job.state = "failed"
        else:
            job.state = "done"

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def list(self) -> list[Job]:
        with self._lock:
            return [self._jobs[job_id] for job_id in self._order]
