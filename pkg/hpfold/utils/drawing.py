"""Conformation drawings: vector graphics through PyMuPDF, and ASCII."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import fitz

from hpfold.core.lattice import Coord, as_sequence, contact_pairs

logger = logging.getLogger(__name__)

BACKBONE_COLOR = (0, 0, 0)
CONTACT_COLOR = (0.85, 0.1, 0.1)
H_FILL = (0, 0, 0)
P_FILL = (1, 1, 1)


def _bounds(placed: Sequence[Coord]) -> Tuple[int, int, int, int]:
    xs = [x for x, _ in placed]
    ys = [y for _, y in placed]
    return min(xs), min(ys), max(xs), max(ys)


def draw_conformation(
    placed: Sequence[Coord],
    seq,
    path: Path,
    fmt: str = "pdf",
    cell: float = 28.0,
    title: Optional[str] = None,
) -> Path:
    """Draw a chain: backbone polyline, H filled, P open, contacts dashed.

    :param placed: monomer coordinates
    :param seq: HP sequence
    :param path: output file
    :param fmt: "pdf" or "svg"
    :param cell: lattice spacing in points
    :param title: optional caption (e.g. energy and action string)
    :return: the written path
    """
    if fmt not in ("pdf", "svg"):
        raise ValueError(f"Unsupported drawing format {fmt!r}")
    seq = as_sequence(seq)
    min_x, min_y, max_x, max_y = _bounds(placed)
    margin = cell
    top = margin + (12 if title else 0)
    width = (max_x - min_x) * cell + 2 * margin
    height = (max_y - min_y) * cell + top + margin

    def point(c: Coord) -> fitz.Point:
        x, y = c
        # page y grows downwards
        return fitz.Point(margin + (x - min_x) * cell, top + (max_y - y) * cell)

    doc = fitz.open()
    page = doc.new_page(width=width, height=height)
    for i, j in contact_pairs(placed, seq):
        page.draw_line(point(placed[i]), point(placed[j]), color=CONTACT_COLOR, width=1, dashes="[3 3] 0")
    page.draw_polyline([point(c) for c in placed], color=BACKBONE_COLOR, width=2)
    radius = cell * 0.22
    for i, c in enumerate(placed):
        fill = H_FILL if seq.is_h(i) else P_FILL
        page.draw_circle(point(c), radius, color=BACKBONE_COLOR, fill=fill, width=1.2)
    if title:
        page.insert_text(fitz.Point(margin / 2, margin / 2 + 6), title, fontsize=8)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "svg":
        path.write_text(page.get_svg_image())
    else:
        doc.save(str(path), garbage=4, deflate=True)
    doc.close()
    logger.debug(f"Drew {len(placed)}-monomer chain to {path}")
    return path


def render_ascii(placed: Sequence[Coord], seq) -> str:
    """Text picture of a (partial) chain, top row = largest y.

    Monomers print as H/P, bonds as ``-`` and ``|``.
    """
    seq = as_sequence(seq)
    min_x, min_y, max_x, max_y = _bounds(placed)
    cols = 2 * (max_x - min_x) + 1
    rows = 2 * (max_y - min_y) + 1
    grid = [[" "] * cols for _ in range(rows)]

    def cell(c: Coord) -> Tuple[int, int]:
        return 2 * (max_y - c[1]), 2 * (c[0] - min_x)

    for i, c in enumerate(placed):
        r, k = cell(c)
        grid[r][k] = seq[i]
    for a, b in zip(placed, placed[1:]):
        (r1, k1), (r2, k2) = cell(a), cell(b)
        grid[(r1 + r2) // 2][(k1 + k2) // 2] = "-" if r1 == r2 else "|"
    return "\n".join("".join(row).rstrip() for row in grid)
