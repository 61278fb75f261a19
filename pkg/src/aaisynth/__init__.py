"""Synthetic attachment-interview agents and their alignment with human interviews."""

from __future__ import annotations

__version__ = "0.1.0"
