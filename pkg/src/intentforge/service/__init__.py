from .app import create_app
from .store import ProjectStore, ServiceBackends

__all__ = ["ProjectStore", "ServiceBackends", "create_app"]
