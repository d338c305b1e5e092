"""
Gráficos SVG autónomos: diagrama de barras para los histogramas de homofilia
y curva con barras de error para el barrido de capas.

Cada barra y cada punto llevan sus valores en atributos `data-*`.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from collections.abc import Sequence
from pathlib import Path

WIDTH = 480
HEIGHT = 320
MARGIN = 40

SVG_NS = "http://www.w3.org/2000/svg"


def _canvas(title: str) -> ET.Element:
    svg = ET.Element(
        "svg",
        xmlns=SVG_NS,
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    ET.SubElement(svg, "title").text = title
    ET.SubElement(
        svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white"
    )
    text = ET.SubElement(
        svg, "text", x=str(WIDTH // 2), y="20", attrib={"text-anchor": "middle"}
    )
    text.text = title
    # ejes
    bottom, right = HEIGHT - MARGIN, WIDTH - MARGIN
    for x2, y2 in [(right, bottom), (MARGIN, MARGIN)]:
        ET.SubElement(
            svg, "line",
            x1=str(MARGIN), y1=str(bottom), x2=str(x2), y2=str(y2), stroke="black",
        )
    return svg


def _label(svg: ET.Element, x: float, y: float, text: str) -> None:
    t = ET.SubElement(
        svg, "text",
        x=f"{x:.2f}", y=f"{y:.2f}",
        attrib={"text-anchor": "middle", "font-size": "10"},
    )
    t.text = text


def _write(svg: ET.Element, path: Path | str | None) -> str:
    text = ET.tostring(svg, encoding="unicode")
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf8")
    return text


def histogram_svg(
    bins: Sequence[tuple[tuple[float, float], int]],
    title: str = "",
    path: Path | str | None = None,
) -> str:
    """
    Diagrama de barras de un histograma `[((lo, hi), count), ...]`.

    Returns:
        el documento SVG; si hay `path`, también se escribe en él.
    """
    svg = _canvas(title)
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN
    top = max((count for _, count in bins), default=0) or 1
    bar_w = plot_w / max(len(bins), 1)
    for i, ((lo, hi), count) in enumerate(bins):
        h = plot_h * count / top
        x = MARGIN + i * bar_w
        ET.SubElement(
            svg, "rect",
            x=f"{x:.2f}", y=f"{HEIGHT - MARGIN - h:.2f}",
            width=f"{bar_w * 0.9:.2f}", height=f"{h:.2f}",
            fill="steelblue",
            attrib={"data-low": repr(lo), "data-high": repr(hi), "data-count": str(count)},
        )
    if bins:
        _label(svg, MARGIN, HEIGHT - MARGIN + 15, f"{bins[0][0][0]:g}")
        _label(svg, WIDTH - MARGIN, HEIGHT - MARGIN + 15, f"{bins[-1][0][1]:g}")
    _label(svg, MARGIN - 15, MARGIN, str(top))
    return _write(svg, path)


def line_svg(
    points: Sequence[tuple[float, float, float]],
    title: str = "",
    path: Path | str | None = None,
) -> str:
    """
    Curva de puntos `(x, media, desviación)` con barras de error. El eje y va
    de 0 a 1.
    """
    svg = _canvas(title)
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN
    xs = [x for x, _, _ in points]
    lo, hi = min(xs, default=0.0), max(xs, default=1.0)
    span = (hi - lo) or 1.0

    def to_px(x: float, y: float) -> tuple[float, float]:
        y = min(max(y, 0.0), 1.0)
        return MARGIN + plot_w * (x - lo) / span, HEIGHT - MARGIN - plot_h * y

    coords = [to_px(x, mean) for x, mean, _ in points]
    if coords:
        ET.SubElement(
            svg, "polyline",
            points=" ".join(f"{px:.2f},{py:.2f}" for px, py in coords),
            fill="none", stroke="steelblue",
        )
    for (x, mean, std), (px, py) in zip(points, coords):
        _, top = to_px(x, mean + std)
        _, bottom = to_px(x, mean - std)
        ET.SubElement(
            svg, "line",
            x1=f"{px:.2f}", y1=f"{top:.2f}", x2=f"{px:.2f}", y2=f"{bottom:.2f}",
            stroke="gray",
        )
        ET.SubElement(
            svg, "circle",
            cx=f"{px:.2f}", cy=f"{py:.2f}", r="3", fill="steelblue",
            attrib={"data-x": repr(x), "data-mean": repr(mean), "data-std": repr(std)},
        )
        _label(svg, px, HEIGHT - MARGIN + 15, f"{x:g}")
    return _write(svg, path)
