"""SVG rendering of solved scenes, plus a small rasterizer for that SVG."""

from __future__ import annotations

import io
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .dsl import GeoProgram
from .solver import SolveResult


class NotSolved(ValueError):
    pass


class RasterBackendUnavailable(RuntimeError):
    pass


@dataclass
class RenderConfig:
    width: int = 512
    height: int = 512
    margin: float = 0.08
    stroke_width: float = 2.0
    font_size: float = 16.0
    marker_radius: float = 3.5
    stroke_color: str = "#d62728"
    label_color: str = "#000000"
    background: str = "#ffffff"
    line_extension: float = 0.05

    def __post_init__(self):
        if self.width < 64 or self.height < 64:
            raise ValueError("width and height must be at least 64 pixels")
        if not 0.0 <= self.margin < 0.4:
            raise ValueError("margin must lie in [0, 0.4)")


class CanvasTransform:
    """Affine map from the [-1, 1]^2 canvas to pixel coordinates (y down)."""

    def __init__(self, cfg: RenderConfig):
        self.scale = min(cfg.width * (1 - 2 * cfg.margin), cfg.height * (1 - 2 * cfg.margin)) / 2.0
        self.cx = cfg.width / 2.0
        self.cy = cfg.height / 2.0

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        return self.cx + self.scale * x, self.cy - self.scale * y

    def inverse(self, px: float, py: float) -> tuple[float, float]:
        return (px - self.cx) / self.scale, (self.cy - py) / self.scale

    def length(self, d: float) -> float:
        return self.scale * d


def _f(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _line_segment(abc, pts: np.ndarray, extension: float):
    a, b, c = abc
    n2 = a * a + b * b
    if n2 == 0.0 or len(pts) == 0:
        return None
    # foot of the perpendicular from the origin, direction along the line
    base = np.array([-a * c / n2, -b * c / n2])
    d = np.array([-b, a]) / math.sqrt(n2)
    ts = (pts - base) @ d
    lo, hi = float(ts.min()), float(ts.max())
    pad = extension * (hi - lo)
    return base + (lo - pad) * d, base + (hi + pad) * d


def render_svg(scene: SolveResult, program: GeoProgram, cfg: RenderConfig | None = None) -> str:
    cfg = cfg or RenderConfig()
    if not scene.solved:
        raise NotSolved("only solved scenes can be rendered")
    tf = CanvasTransform(cfg)
    pts = scene.params.points
    idx = program.point_index()
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{cfg.width}" height="{cfg.height}" '
        f'viewBox="0 0 {cfg.width} {cfg.height}">',
        f'<rect x="0" y="0" width="{cfg.width}" height="{cfg.height}" fill="{cfg.background}"/>',
        f'<g id="lines" stroke="{cfg.stroke_color}" stroke-width="{_f(cfg.stroke_width)}" stroke-linecap="round">',
    ]
    for j, (line, abc) in enumerate(zip(program.lines, scene.params.lines)):
        on = np.array([pts[idx[p]] for p in dict.fromkeys(line.through)])
        seg = _line_segment(abc, on, cfg.line_extension)
        if seg is None:
            continue
        (x1, y1), (x2, y2) = tf(*seg[0]), tf(*seg[1])
        out.append(f'<line id="line_{j + 1}" x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}"/>')
    out.append("</g>")
    out.append(f'<g id="circles" stroke="{cfg.stroke_color}" stroke-width="{_f(cfg.stroke_width)}" fill="none">')
    for k, (cx, cy, r) in enumerate(scene.params.circles):
        px, py = tf(cx, cy)
        out.append(f'<circle id="circle_{k + 1}" cx="{_f(px)}" cy="{_f(py)}" r="{_f(tf.length(r))}"/>')
    out.append("</g>")

    out.append(f'<g id="points" fill="{cfg.label_color}">')
    centroid = pts.mean(axis=0) if len(pts) else np.zeros(2)
    labels = []
    for i, p in enumerate(program.points):
        x, y = pts[i]
        px, py = tf(x, y)
        out.append(f'<circle class="point" id="pt_{p.name}" cx="{_f(px)}" cy="{_f(py)}" r="{_f(cfg.marker_radius)}"/>')
        if p.label is None:
            continue
        away = np.array([x, y]) - centroid
        norm = float(np.hypot(*away))
        ux, uy = (away / norm) if norm > 1e-9 else (0.7071, 0.7071)
        off = cfg.font_size * 0.9
        lx, ly = px + off * ux, py - off * uy + cfg.font_size * 0.35
        labels.append(
            f'<text x="{_f(lx)}" y="{_f(ly)}" font-family="sans-serif" font-size="{_f(cfg.font_size)}" '
            f'text-anchor="middle">{p.label}</text>'
        )
    out.append("</g>")
    out.append(f'<g id="labels" fill="{cfg.label_color}">')
    out.extend(labels)
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------- rasterizing

_SVG_NS = "{http://www.w3.org/2000/svg}"


def _color(value: str | None, default=(0, 0, 0)):
    from PIL import ImageColor

    if not value or value == "none":
        return default
    return ImageColor.getrgb(value)


def rasterize(svg: str, cfg: RenderConfig | None = None) -> np.ndarray:
    """Draw the SVG subset emitted by ``render_svg``. Returns an H x W x 3 uint8 array."""
    cfg = cfg or RenderConfig()
    try:
        from PIL import Image, ImageDraw, ImageFont
    except ImportError as exc:  # pragma: no cover
        raise RasterBackendUnavailable("Pillow is required for rasterization") from exc

    root = ET.fromstring(svg.encode("utf-8"))
    img = Image.new("RGB", (cfg.width, cfg.height), _color(cfg.background))
    draw = ImageDraw.Draw(img)

    def walk(node, inherited: dict):
        attrs = dict(inherited)
        attrs.update(node.attrib)
        tag = node.tag.replace(_SVG_NS, "")
        width = max(1, round(float(attrs.get("stroke-width", 1))))
        if tag == "rect":
            x, y = float(attrs["x"]), float(attrs["y"])
            draw.rectangle([x, y, x + float(attrs["width"]), y + float(attrs["height"])], fill=_color(attrs.get("fill")))
        elif tag == "line":
            draw.line([float(attrs["x1"]), float(attrs["y1"]), float(attrs["x2"]), float(attrs["y2"])],
                      fill=_color(attrs.get("stroke")), width=width)
        elif tag == "circle":
            cx, cy, r = float(attrs["cx"]), float(attrs["cy"]), float(attrs["r"])
            box = [cx - r, cy - r, cx + r, cy + r]
            fill = attrs.get("fill")
            if fill and fill != "none":
                draw.ellipse(box, fill=_color(fill))
            else:
                draw.ellipse(box, outline=_color(attrs.get("stroke")), width=width)
        elif tag == "text":
            size = float(attrs.get("font-size", 12))
            try:
                font = ImageFont.load_default(size=size)
            except TypeError:  # Pillow < 10.1
                font = ImageFont.load_default()
            draw.text((float(attrs["x"]), float(attrs["y"])), node.text or "", fill=_color(attrs.get("fill")),
                      font=font, anchor="ms")
        for child in node:
            walk(child, {k: v for k, v in attrs.items() if k in ("stroke", "stroke-width", "fill", "font-size")})

    for child in root:
        walk(child, {})
    return np.asarray(img, dtype=np.uint8)


def to_png(pixels: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, format="PNG")
    return buf.getvalue()


def blank_svg(cfg: RenderConfig | None = None) -> str:
    cfg = cfg or RenderConfig()
    return (
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{cfg.width}" height="{cfg.height}">\n'
        f'<rect x="0" y="0" width="{cfg.width}" height="{cfg.height}" fill="{cfg.background}"/>\n</svg>\n'
    )
