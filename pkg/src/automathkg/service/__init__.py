"""HTTP retrieval service over a knowledge graph and vector index."""

from .app import AppState, build_state, create_app, serve

__all__ = ["AppState", "build_state", "create_app", "serve"]
