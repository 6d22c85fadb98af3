"""File emission: cloud CSV, PGM rasters, delimited tables, figures.

Delimited output uses repr() for floats so reruns are byte-identical.
Figures are matplotlib renderings of the same data the CSVs carry;
summary JSON never depends on them.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from gwflab.errors import ConfigError, DomainError
from gwflab.geometry import PointCloud
from gwflab.util import to_jsonable


def write_json(path, payload) -> None:
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text)


def dump_json(payload) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2)


def write_cloud_csv(cloud: PointCloud, path) -> None:
    lines = [f"# pointcloud ambient_dim={cloud.ambient_dim} epsilon={cloud.epsilon!r}"]
    lines.append(",".join(f"x{k}" for k in range(cloud.ambient_dim)))
    for row in cloud.points:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_cloud_csv(path) -> PointCloud:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# pointcloud"):
        raise ConfigError(f"{path}: missing point-cloud header")
    fields = dict(part.split("=", 1) for part in lines[0].split()[2:])
    epsilon = float(fields["epsilon"])
    rows = [
        [float(v) for v in line.split(",")]
        for line in lines[2:]
        if line.strip()
    ]
    return PointCloud(np.asarray(rows), epsilon)


def write_table_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [repr(float(v)) if isinstance(v, float) else str(v) for v in row]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def rasterize(cloud: PointCloud, pixels: int = 512, bounds=None) -> np.ndarray:
    """Occupancy image of a 1D or 2D cloud (0 = occupied, 255 = empty)."""
    d = cloud.ambient_dim
    if d > 2:
        raise DomainError(f"rasterization supports 1 or 2 dimensions, not {d}")
    if bounds is None:
        lo = cloud.points.min(axis=0)
        hi = cloud.points.max(axis=0)
        pad = 0.02 * float(np.max(hi - lo) or 1.0)
        lo, hi = lo - pad, hi + pad
    else:
        lo = np.asarray(bounds[0], dtype=np.float64)
        hi = np.asarray(bounds[1], dtype=np.float64)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (cloud.points - lo) / span
    idx = np.clip((scaled * pixels).astype(np.int64), 0, pixels - 1)
    if d == 1:
        height = max(8, pixels // 16)
        img = np.full((height, pixels), 255, dtype=np.uint8)
        img[:, idx[:, 0]] = 0
    else:
        img = np.full((pixels, pixels), 255, dtype=np.uint8)
        # row 0 at the top of the image = max y
        img[pixels - 1 - idx[:, 1], idx[:, 0]] = 0
    return img


def write_pgm(cloud: PointCloud, path, pixels: int = 512, bounds=None) -> None:
    """Binary (P5) raster for quick visual inspection."""
    img = rasterize(cloud, pixels=pixels, bounds=bounds)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def figure_cloud(cloud: PointCloud, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    if cloud.ambient_dim == 1:
        ax.scatter(cloud.points[:, 0], np.zeros(len(cloud)), s=2, marker="|", color="k")
        ax.set_ylim(-1, 1)
        ax.set_yticks([])
    else:
        ax.scatter(cloud.points[:, 0], cloud.points[:, 1], s=1.5, color="k", linewidths=0)
        ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def figure_box_counts(rs, counts, slope: float, path) -> None:
    rs = np.asarray(rs, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    x = np.log(1.0 / rs)
    y = np.log(counts)
    coeffs = np.polyfit(x, y, 1)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(x, y, "o", color="k", label="counts")
    ax.plot(x, np.polyval(coeffs, x), "-", color="tab:red", label=f"slope {slope:.4f}")
    ax.set_xlabel("log 1/r")
    ax.set_ylabel("log N(r)")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def figure_zoom(steps, path) -> None:
    n = len(steps)
    cols = min(4, n)
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 3 * rows), squeeze=False)
    for k, step in enumerate(steps):
        ax = axes[k // cols][k % cols]
        pts = step.miniset_cloud.points
        if pts.shape[1] == 1:
            ax.scatter(pts[:, 0], np.zeros(len(pts)), s=2, marker="|", color="k")
            ax.set_ylim(-1, 1)
        else:
            ax.scatter(pts[:, 0], pts[:, 1], s=2, color="k", linewidths=0)
            ax.set_aspect("equal")
        label = "".join(str(s) for s in step.node) or "root"
        ax.set_title(label, fontsize=9)
        ax.set_xlim(-0.05, 1.05)
    for k in range(n, rows * cols):
        axes[k // cols][k % cols].axis("off")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
