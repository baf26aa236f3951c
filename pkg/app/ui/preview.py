"""PNG preview of a segmentation: one colour per label, a legend strip underneath."""

from typing import Dict, Tuple

import numpy as np
from PIL import Image, ImageDraw

from app.models import LABEL_BACKGROUND, LABEL_NON_CLOTH, ClothSegmentation, ClothType
from app.ui.fonts import load_font

Color = Tuple[int, int, int]

LABEL_COLORS: Dict[int, Color] = {
    LABEL_BACKGROUND: (0, 0, 0),
    LABEL_NON_CLOTH: (224, 182, 150),
    ClothType.UPPER.label: (66, 135, 245),
    ClothType.COAT.label: (40, 60, 150),
    ClothType.PANTS.label: (90, 170, 90),
    ClothType.SKIRT.label: (200, 90, 170),
    ClothType.SHOES.label: (240, 200, 60),
}

LABEL_NAMES: Dict[int, str] = {LABEL_NON_CLOTH: "skin", **{c.label: c.value for c in ClothType}}

_ROW = 16


def colorize(seg: ClothSegmentation) -> Image.Image:
    lut = np.zeros((256, 3), dtype=np.uint8)
    for label, color in LABEL_COLORS.items():
        lut[label] = color
    return Image.fromarray(np.ascontiguousarray(lut[seg.labels]))


def render_preview(seg: ClothSegmentation, scale: int = 2) -> Image.Image:
    """Upscaled label image; the legend lists only labels present in the raster."""
    base = colorize(seg).resize((seg.width * scale, seg.height * scale), Image.NEAREST)
    present = [l for l in LABEL_NAMES if np.any(seg.labels == l)]
    w, h = base.size
    img = Image.new("RGB", (w, h + _ROW * len(present) + 8), (0, 0, 0))
    img.paste(base, (0, 0))
    draw = ImageDraw.Draw(img)
    font = load_font(12)
    for i, label in enumerate(present):
        y = h + 4 + i * _ROW
        draw.rectangle([6, y + 2, 18, y + 12], fill=LABEL_COLORS[label], outline=(255, 255, 255))
        count = int(np.sum(seg.labels == label))
        draw.text((26, y), f"{LABEL_NAMES[label]}  {count} px", font=font, fill=(255, 255, 255))
    return img


def save_preview(path: str, seg: ClothSegmentation, scale: int = 2) -> None:
    render_preview(seg, scale).save(path, format="PNG")
