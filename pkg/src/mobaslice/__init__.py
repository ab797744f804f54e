"""Match outcome and remaining-time evaluation from per-minute game slices."""

from __future__ import annotations

__version__ = "0.1.0"
