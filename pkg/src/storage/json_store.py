"""File-based storage for run artifacts: JSON documents, CSV tables and PNG folders."""

import csv
import io
import json
import os
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from src.errors import DataError, SceneError
from src.models import RunManifest, SceneFile
from src.services.imaging import Image, load_image, save_image


ModelT = TypeVar("ModelT", bound=BaseModel)

MANIFEST_FILE = "run_manifest.json"


def atomic_write_text(path: Path, text: str) -> Path:
    """Write to a sibling temp file, then rename over the target."""
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        f.write(text)
    os.replace(tmp, path)
    return path


def load_scene(path: Path | str) -> SceneFile:
    """Load and validate a scene file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"scene file not found: {path}")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"malformed scene file {path}: {e}") from e
    try:
        return SceneFile.model_validate(data)
    except ValidationError as e:
        raise SceneError(f"invalid scene file {path}: {e.error_count()} problem(s): {e.errors()[0]['msg']}") from e


class RunStore:
    """Output directory of one command."""

    def __init__(self, out_dir: Path | str):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataError(f"cannot create output directory {self.out_dir}: {e}") from e

    def path(self, name: str) -> Path:
        return self.out_dir / name

    # JSON documents

    def save_model(self, name: str, model: BaseModel) -> Path:
        text = json.dumps(model.model_dump(mode="json"), indent=2, default=str)
        return atomic_write_text(self.path(name), text + "\n")

    def load_model(self, name: str, model_cls: type[ModelT]) -> ModelT | None:
        file_path = self.path(name)
        if not file_path.exists():
            return None
        with open(file_path) as f:
            data = json.load(f)
        return model_cls.model_validate(data)

    def save_scene(self, scene: SceneFile, name: str = "scene.json") -> Path:
        return self.save_model(name, scene)

    def save_manifest(self, manifest: RunManifest) -> Path:
        return self.save_model(MANIFEST_FILE, manifest)

    # CSV tables

    def save_csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return atomic_write_text(self.path(name), buffer.getvalue())

    # Image folders

    def image_dir(self, name: str) -> Path:
        folder = self.path(name)
        folder.mkdir(parents=True, exist_ok=True)
        return folder

    def save_images(self, folder: str, images: dict[str, Image], bits: int = 8) -> Path:
        """Write `<folder>/<view_id>.png` for every image."""
        target = self.image_dir(folder)
        for view_id, image in images.items():
            save_image(image, target / f"{view_id}.png", bits=bits)
        return target


def load_image_folder(folder: Path | str) -> dict[str, Image]:
    """All PNGs of a folder keyed by file stem, in name order."""
    folder = Path(folder)
    if not folder.is_dir():
        raise DataError(f"image folder not found: {folder}")
    images = {p.stem: load_image(p) for p in sorted(folder.glob("*.png"))}
    if not images:
        raise DataError(f"no PNG images in {folder}")
    return images
