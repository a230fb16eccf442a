"""Training checkpoint file: one torch.save archive with a format tag."""

import os
from pathlib import Path
from typing import Any

import torch

from src.errors import DataError


def save_checkpoint(state: dict[str, Any], path: Path | str) -> Path:
    """Atomically write the trainer state."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    torch.save(state, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise DataError(f"unreadable checkpoint {path}: {e}") from e
    if not isinstance(state, dict) or "format_version" not in state:
        raise DataError(f"{path} is not a training checkpoint")
    return state
