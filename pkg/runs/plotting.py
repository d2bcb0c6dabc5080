"""
SVG rendering of a 2-D embedding: one dashed circle per assigned radius,
a ray per scaled proxy and the samples colored by class.

Viewport: with extent = 1.05 * max(largest radius, largest |coordinate|)
and scale = (size / 2 - margin) / extent, a point (x, y) is drawn at
(cx + scale * x, cy - scale * y), where (cx, cy) is the canvas center.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.template.loader import render_to_string

from numkit.exceptions import ContractViolation

logger = logging.getLogger(__name__)

TEMPLATE = "runs/latent_space.svg"

CANVAS_SIZE = 600
MARGIN = 20
POINT_RADIUS = 2.0
EXTENT_PADDING = 1.05
COORD_FORMAT = "%.6f"

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class Viewport:
    size: float
    margin: float
    extent: float

    @property
    def center(self) -> float:
        return self.size / 2.0

    @property
    def scale(self) -> float:
        return (self.size / 2.0 - self.margin) / self.extent

    def to_canvas(self, x, y):
        return self.center + self.scale * x, self.center - self.scale * y


def class_color(label: int) -> str:
    return PALETTE[int(label) % len(PALETTE)]


def fit_viewport(features, radii, size=CANVAS_SIZE, margin=MARGIN) -> Viewport:
    reach = 0.0
    if len(radii):
        reach = max(reach, float(np.max(radii)))
    if len(features):
        reach = max(reach, float(np.max(np.abs(features))))
    extent = EXTENT_PADDING * reach if reach > 0 else 1.0
    return Viewport(size=float(size), margin=float(margin), extent=extent)


def render_latent_svg(features, labels, radii, proxies=None, title="latent space", size=CANVAS_SIZE) -> str:
    """
    features is N x 2, radii one entry per class, proxies (optional) the
    2 x K scaled proxy matrix drawn as rays from the origin.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != 2:
        raise ContractViolation(f"plotting needs 2-D features, got shape {features.shape}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    radii = np.asarray(radii, dtype=np.float64).reshape(-1)
    view = fit_viewport(features, radii, size=size)

    shells = [
        {"radius": COORD_FORMAT % r, "r": COORD_FORMAT % (view.scale * r)}
        for r in sorted(set(radii.tolist()))
    ]
    rays = []
    if proxies is not None:
        proxies = np.asarray(proxies, dtype=np.float64)
        if proxies.shape[0] != 2:
            raise ContractViolation("proxy matrix must have 2 rows")
        for k in range(proxies.shape[1]):
            x, y = view.to_canvas(proxies[0, k], proxies[1, k])
            rays.append({"x": COORD_FORMAT % x, "y": COORD_FORMAT % y, "color": class_color(k), "label": k})
    points = []
    for (fx, fy), label in zip(features.tolist(), labels.tolist()):
        x, y = view.to_canvas(fx, fy)
        points.append({"x": COORD_FORMAT % x, "y": COORD_FORMAT % y, "color": class_color(label), "label": label})

    return render_to_string(TEMPLATE, {
        "title": title,
        "size": int(view.size),
        "cx": COORD_FORMAT % view.center,
        "cy": COORD_FORMAT % view.center,
        "point_radius": POINT_RADIUS,
        "shells": shells,
        "rays": rays,
        "points": points,
    })


def write_latent_svg(path, features, labels, radii, proxies=None, title="latent space") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_latent_svg(features, labels, radii, proxies, title), encoding="utf-8")
    logger.info("plot written path=%s points=%d shells=%d", path, len(labels), len(set(np.asarray(radii).tolist())))
    return path
