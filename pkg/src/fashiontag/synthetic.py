"""Deterministic synthetic annotation corpora for demos and harness tests.

The upstream image dataset is not bundled (and downloading it is out of
scope), so fixtures are generated: fine-category names drawn from
per-category name pools that the default rules file fully covers, with
colors, materials, and style labels cycled pseudo-randomly from a seeded
generator.  Identical (counts, seed) inputs produce identical corpora.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .labeling import RawAnnotation
from .rng import SplitMix64

# Per-category counts of the reference training distribution used by the
# distribution-table fixtures (total 4,610).
REFERENCE_COUNTS: dict[str, int] = {
    "dress": 1684,
    "top": 1450,
    "bottom": 917,
    "layer": 489,
    "shoes": 68,
    "accessory": 2,
}

FINE_NAMES: dict[str, tuple[str, ...]] = {
    "dress": (
        "Maxi Dresses", "Clubbing Dresses", "Evening Dresses", "Cocktail Dresses",
        "Summer Dresses", "Shift Dresses", "Wrap Dresses", "Gowns", "Jumpsuits",
        "Rompers",
    ),
    "top": (
        "T-Shirts", "Dress Shirts", "Blouses", "Tank Tops", "Polo Shirts",
        "Athletic Shirts", "Camisoles", "Sweaters", "Hoodies", "Tunics",
    ),
    "bottom": (
        "Jeans", "Chinos", "Trousers", "Shorts", "Skirts", "Leggings",
        "Joggers", "Culottes", "Cargo Pants", "Dress Pants",
    ),
    "layer": (
        "Suits & Blazers", "Jackets", "Coats", "Cardigans", "Vests", "Parkas",
        "Trench Coats", "Kimonos", "Denim Jackets", "Leather Jackets",
    ),
    "shoes": (
        "Sneakers", "Boots", "Heels", "Sandals", "Flats", "Loafers", "Pumps",
        "Running Shoes", "Ankle Boots", "Ballet Flats",
    ),
    "accessory": (
        "Handbags", "Belts", "Hats", "Scarves", "Necklaces", "Earrings",
        "Watches", "Sunglasses", "Gloves", "Socks",
    ),
}

DISCARD_NAMES: tuple[str, ...] = (
    "Swimwear", "Bikinis", "Underwear", "Lingerie", "Costumes", "Swimsuits",
)

_SOURCE_COLORS: tuple[Optional[str], ...] = (
    "black", "white", "gray", "beige", "brown", "blue", "navy", "green",
    "yellow", "orange", "red", "pink", "purple", "gold", "silver",
    "multicolor", "khaki", "burgundy", "teal", None,
)

_SOURCE_MATERIALS: tuple[Optional[str], ...] = (
    "Cotton", "Silk", "Denim", "Wool", "Leather", "Linen", "Polyester",
    "Satin", "Chiffon", "Knit", "Lace", "Velvet", "Suede", "Cashmere",
    "Viscose", None,
)

_SOURCE_STYLE_LABELS: tuple[str, ...] = (
    "Bodycon", "Floral", "Vintage", "Punk", "Chic", "Minimal",
)


def generate_annotations(
    counts: Optional[Mapping[str, int]] = None,
    seed: int = 2024,
    id_prefix: str = "item",
) -> list[RawAnnotation]:
    """Mappable annotations matching the given per-category counts, shuffled
    into a seed-determined interleaving."""
    counts = dict(counts) if counts is not None else dict(REFERENCE_COUNTS)
    rng = SplitMix64(seed)
    rows: list[tuple[str, int]] = []
    for category, count in counts.items():
        if category not in FINE_NAMES:
            raise ValueError(f"no fine-name pool for category {category!r}")
        rows.extend((category, i) for i in range(count))
    # Deterministic interleave so categories are not contiguous blocks.
    for i in range(len(rows) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        rows[i], rows[j] = rows[j], rows[i]

    annotations = []
    for serial, (category, _) in enumerate(rows):
        names = FINE_NAMES[category]
        fine = names[rng.randbelow(len(names))]
        color = _SOURCE_COLORS[rng.randbelow(len(_SOURCE_COLORS))]
        material = _SOURCE_MATERIALS[rng.randbelow(len(_SOURCE_MATERIALS))]
        styles: tuple[str, ...] = ()
        if rng.randbelow(3) == 0:  # roughly a third of rows carry a style label
            styles = (_SOURCE_STYLE_LABELS[rng.randbelow(len(_SOURCE_STYLE_LABELS))],)
        annotations.append(
            RawAnnotation(
                item_id=f"{id_prefix}-{serial:05d}",
                image_ref=f"images/{id_prefix}-{serial:05d}.jpg",
                fine_category=fine,
                color_label=color,
                material_label=material,
                style_labels=styles,
            )
        )
    return annotations


def generate_discard_annotations(n: int, seed: int = 7, id_prefix: str = "reject") -> list[RawAnnotation]:
    """Rows whose fine categories hit the deliberate discard rules."""
    rng = SplitMix64(seed)
    return [
        RawAnnotation(
            item_id=f"{id_prefix}-{i:04d}",
            image_ref=f"images/{id_prefix}-{i:04d}.jpg",
            fine_category=DISCARD_NAMES[rng.randbelow(len(DISCARD_NAMES))],
        )
        for i in range(n)
    ]
