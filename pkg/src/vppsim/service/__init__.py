"""HTTP service exposing the simulation core and the run harness."""

from .app import create_app

__all__ = ["create_app"]
