"""Storage layer for run artifacts."""

from .json_store import RunStore, load_image_folder, load_scene
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = ["RunStore", "load_image_folder", "load_scene", "load_checkpoint", "save_checkpoint"]
