"""Contact sheets: all rendered views of a run composed into one grid PNG."""

import math
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from src.errors import ImagingError
from .imaging import Image


def calculate_grid_dimensions(num_images: int, max_cols: int = 5) -> tuple[int, int]:
    """Calculate grid dimensions for n images.

    Returns (cols, rows) tuple.
    """
    if num_images == 0:
        return (0, 0)
    if num_images <= 2:
        return (num_images, 1)
    if num_images <= 4:
        return (2, 2)
    if num_images <= 6:
        return (3, 2)
    if num_images <= 9:
        return (3, 3)

    cols = min(max_cols, math.ceil(math.sqrt(num_images)))
    rows = math.ceil(num_images / cols)
    return (cols, rows)


def to_pil(image: Image) -> PILImage.Image:
    codes = np.floor(np.clip(image.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return PILImage.fromarray(codes)


def create_grid_image(
    images: list[Image],
    scale: int = 2,
    padding: int = 2,
    bg_color: tuple[int, int, int] = (255, 255, 255),
) -> PILImage.Image:
    """Grid composite; every cell is the largest view upscaled by `scale` (nearest neighbour)."""
    if not images:
        raise ImagingError("contact sheet needs at least one image")
    if scale < 1:
        raise ImagingError("contact sheet scale must be >= 1")

    cols, rows = calculate_grid_dimensions(len(images))
    cell_width = max(img.width for img in images) * scale
    cell_height = max(img.height for img in images) * scale

    total_width = cols * cell_width + (cols + 1) * padding
    total_height = rows * cell_height + (rows + 1) * padding
    canvas = PILImage.new("RGB", (total_width, total_height), bg_color)

    for idx, img in enumerate(images):
        row, col = divmod(idx, cols)
        tile = to_pil(img).resize((img.width * scale, img.height * scale), PILImage.Resampling.NEAREST)
        # Centered in its cell.
        x = padding + col * (cell_width + padding) + (cell_width - tile.width) // 2
        y = padding + row * (cell_height + padding) + (cell_height - tile.height) // 2
        canvas.paste(tile, (x, y))

    return canvas


def save_contact_sheet(images: list[Image], path: Path | str, scale: int = 2) -> Path:
    path = Path(path)
    create_grid_image(images, scale=scale).save(path, format="PNG")
    return path
