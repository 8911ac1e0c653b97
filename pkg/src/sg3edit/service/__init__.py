from sg3edit.service.app import ServiceState, create_app
from sg3edit.service.jobs import Job, JobRunner
from sg3edit.service.locks import LockRegistry, SessionLock

__all__ = ["Job", "JobRunner", "LockRegistry", "ServiceState", "SessionLock", "create_app"]
