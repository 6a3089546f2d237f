"""Mock inference backend serving the gateway's POST /analyze contract."""

from .app import MockBehavior, create_app

__version__ = "0.1.0"
