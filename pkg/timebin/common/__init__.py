"""
Utility package

Logging, HTTP status codes, error handlers and command line extensions
shared by the service and the presets
"""
from .log_handlers import init_logging

__all__ = ("init_logging",)
