"""Color resolvers for records whose predicted color is "unknown".

The production resolver is meant to be a zero-shot image-embedding model;
that lives behind the :class:`fashiontag.gateway.ColorResolver` protocol.
This module ships a deliberately simple stand-in based on dominant-pixel
palette distance so the pipeline is runnable end to end without model
weights.  Treat its answers as placeholders, not production quality.
"""

from __future__ import annotations

from io import BytesIO

from PIL import Image, ImageStat

# Reference RGB anchors for the resolvable palette entries.  "multi" and
# "unknown" are not reachable by nearest-color matching.
_PALETTE: tuple[tuple[str, tuple[int, int, int]], ...] = (
    ("black", (20, 20, 20)),
    ("white", (245, 245, 245)),
    ("gray", (128, 128, 128)),
    ("beige", (222, 200, 164)),
    ("brown", (120, 72, 36)),
    ("blue", (60, 110, 220)),
    ("navy", (25, 35, 90)),
    ("green", (50, 140, 60)),
    ("yellow", (240, 220, 50)),
    ("orange", (240, 140, 30)),
    ("red", (210, 40, 40)),
    ("pink", (240, 150, 190)),
    ("purple", (130, 60, 170)),
    ("metallic", (190, 190, 200)),
)


def nearest_palette_color(rgb: tuple[float, float, float]) -> str:
    """Closest palette anchor by squared Euclidean distance in RGB."""
    best_name = _PALETTE[0][0]
    best_dist = float("inf")
    for name, anchor in _PALETTE:
        dist = sum((a - b) ** 2 for a, b in zip(anchor, rgb))
        if dist < best_dist:
            best_name, best_dist = name, dist
    return best_name


class PaletteColorResolver:
    """Dominant-color resolver: mean RGB of a center crop vs. palette anchors.

    The center crop (middle half of each dimension) biases toward the
    garment rather than the backdrop.  Unreadable images raise, which the
    gateway absorbs into a no-op resolution.
    """

    def resolve(self, image: bytes) -> str:
        with Image.open(BytesIO(image)) as img:
            rgb = img.convert("RGB")
            width, height = rgb.size
            crop = rgb.crop(
                (width // 4, height // 4, max(width * 3 // 4, width // 4 + 1),
                 max(height * 3 // 4, height // 4 + 1))
            )
            small = crop.resize((16, 16))
            mean = tuple(ImageStat.Stat(small).mean[:3])
        return nearest_palette_color(mean)
