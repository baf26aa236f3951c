import os

from PIL import ImageFont

_FONT_CANDIDATES = (
    "/usr/share/fonts/truetype/dejavu/DejaVuSansMono.ttf",
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSansMono.ttf",
    "/Library/Fonts/Arial.ttf",
)


def load_font(size: int) -> ImageFont.ImageFont:
    # common system monospace fonts, then Pillow's bitmap font
    for p in _FONT_CANDIDATES:
        try:
            if os.path.exists(p):
                return ImageFont.truetype(p, size)
        except OSError:
            pass
    return ImageFont.load_default()
