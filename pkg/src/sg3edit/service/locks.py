"""Per-session reader-writer locks: previews read, stage jobs write."""

from __future__ import annotations

import threading
from contextlib import contextmanager

from sg3edit.errors import SessionLockError


class SessionLock:
    """Many concurrent readers, one writer, writer never queues twice."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                self._cond.notify_all()

    def try_acquire_write(self) -> bool:
        with self._cond:
            if self._writer:
                return False
            self._writer = True
            while self._readers:
                self._cond.wait()
            return True

    def release_write(self) -> None:
        with self._cond:
            self._writer = False
            self._cond.notify_all()

    @contextmanager
    def write(self):
        if not self.try_acquire_write():
            raise SessionLockError("a writer job already holds this session")
        try:
            yield
        finally:
            self.release_write()

    @property
    def writing(self) -> bool:
        return self._writer


class LockRegistry:
    def __init__(self):
        self._locks: dict[str, SessionLock] = {}
        self._guard = threading.Lock()

    def get(self, session_id: str) -> SessionLock:
        with self._guard:
            return self._locks.setdefault(session_id, SessionLock())
