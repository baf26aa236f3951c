import numpy as np
from PIL import Image

from app.models import LABEL_BACKGROUND, LABEL_NON_CLOTH, ClothSegmentation, ClothType
from app.ui.fonts import load_font
from app.ui.preview import LABEL_COLORS, colorize, render_preview, save_preview


def _segmentation():
    labels = np.full((10, 12), LABEL_BACKGROUND, dtype=np.uint8)
    labels[2:5, 3:9] = ClothType.UPPER.label
    labels[5:8, 3:9] = LABEL_NON_CLOTH
    return ClothSegmentation(labels)


def test_colorize_uses_label_colors():
    img = colorize(_segmentation())
    assert img.mode == "RGB"
    assert img.size == (12, 10)
    assert img.getpixel((0, 0)) == LABEL_COLORS[LABEL_BACKGROUND]
    assert img.getpixel((4, 3)) == LABEL_COLORS[ClothType.UPPER.label]
    assert img.getpixel((4, 6)) == LABEL_COLORS[LABEL_NON_CLOTH]


def test_legend_lists_present_labels_only():
    img = render_preview(_segmentation(), scale=3)
    # two legend rows: skin and upper
    assert img.size == (36, 30 + 16 * 2 + 8)
    assert img.getpixel((12, 9)) == LABEL_COLORS[ClothType.UPPER.label]


def test_preview_is_a_png(tmp_path):
    path = str(tmp_path / "seg.png")
    save_preview(path, _segmentation())
    with Image.open(path) as img:
        assert img.format == "PNG"
        assert img.size[0] == 24


def test_a_font_is_always_available():
    assert load_font(12) is not None
