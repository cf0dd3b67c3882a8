"""Procedural 16x16 grayscale shape datasets.

Each task renders a fixed palette of shapes (rectangle, disc, cross, ring,
plus extras on the larger tasks) at random positions and sizes.  Tasks
differ in rendering style and class count:

* ``taskA`` (4 classes): crisp bright shapes, light clutter.
* ``taskB`` (5 classes): dimmer shapes, heavier dropout and clutter; adds
  triangles.
* ``taskC`` (6 classes): speckled medium-contrast shapes, adds bars.

Regeneration is bit-deterministic given (task_id, seed, n); labels are
assigned round-robin so classes are balanced to within one sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import derive_seed

IMG = 16
MIN_SAMPLES = 200

_YY, _XX = np.mgrid[0:IMG, 0:IMG].astype(np.float64)


def _rectangle(cx, cy, size, aspect):
    w = size
    h = max(1.8, size * aspect)
    return (np.abs(_XX - cx) <= w) & (np.abs(_YY - cy) <= h)


def _disc(cx, cy, size, aspect):
    return (_XX - cx) ** 2 + (_YY - cy) ** 2 <= size**2


def _cross(cx, cy, size, aspect):
    t = max(1.0, size * 0.35)
    arm = size * 1.25
    horiz = (np.abs(_XX - cx) <= arm) & (np.abs(_YY - cy) <= t)
    vert = (np.abs(_YY - cy) <= arm) & (np.abs(_XX - cx) <= t)
    return horiz | vert


def _ring(cx, cy, size, aspect):
    d2 = (_XX - cx) ** 2 + (_YY - cy) ** 2
    inner = max(1.0, size - 1.8)
    return (d2 <= size**2) & (d2 >= inner**2)


def _triangle(cx, cy, size, aspect):
    rel_y = _YY - (cy - size)
    inside_band = (rel_y >= 0) & (rel_y <= 2 * size)
    half_width = rel_y / 2.0
    return inside_band & (np.abs(_XX - cx) <= half_width)


def _bars(cx, cy, size, aspect):
    gap = max(2.0, size)
    within = np.abs(_XX - cx) <= size * 1.3
    bar1 = np.abs(_YY - (cy - gap / 2)) <= 1.0
    bar2 = np.abs(_YY - (cy + gap / 2)) <= 1.0
    return within & (bar1 | bar2)


_SHAPES = ("rectangle", "disc", "cross", "ring", "triangle", "bars")
_RENDERERS = {
    "rectangle": _rectangle,
    "disc": _disc,
    "cross": _cross,
    "ring": _ring,
    "triangle": _triangle,
    "bars": _bars,
}

TASKS = {
    "taskA": {"classes": _SHAPES[:4], "style": "crisp"},
    "taskB": {"classes": _SHAPES[:5], "style": "dim"},
    "taskC": {"classes": _SHAPES[:6], "style": "speckled"},
}


@dataclass
class ShapesDataset:
    images: np.ndarray  # [n, 1, 16, 16] float32 in [0, 1]
    labels: np.ndarray  # [n] int64
    task_id: str
    generator_seed: int

    @property
    def n_classes(self) -> int:
        return len(TASKS[self.task_id]["classes"])

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "ShapesDataset":
        return ShapesDataset(
            images=self.images[idx].copy(),
            labels=self.labels[idx].copy(),
            task_id=self.task_id,
            generator_seed=self.generator_seed,
        )


def _clutter(img, rng, n_blobs, lo, hi):
    for _ in range(n_blobs):
        bx = rng.uniform(1, IMG - 2)
        by = rng.uniform(1, IMG - 2)
        r = rng.uniform(0.8, 1.6)
        blob = (_XX - bx) ** 2 + (_YY - by) ** 2 <= r**2
        img[blob] = rng.uniform(lo, hi)


def _render(task_id, cls_name, rng):
    cx = rng.uniform(4.5, 11.5)
    cy = rng.uniform(4.5, 11.5)
    size = rng.uniform(2.5, 4.5)
    aspect = rng.uniform(0.5, 1.0)
    mask = _RENDERERS[cls_name](cx, cy, size, aspect)

    # degraded rendering on purpose: dropout and clutter keep the tasks
    # learnable but leave genuinely ambiguous examples, so independently
    # trained models disagree near their decision boundaries
    style = TASKS[task_id]["style"]
    if style == "crisp":
        img = rng.uniform(0.0, 0.14, size=(IMG, IMG))
        keep = rng.random(size=(IMG, IMG)) < 0.87
        img[mask & keep] = rng.uniform(0.7, 1.0)
        _clutter(img, rng, int(rng.integers(1, 3)), 0.2, 0.4)
    elif style == "dim":
        img = rng.uniform(0.0, 0.18, size=(IMG, IMG))
        keep = rng.random(size=(IMG, IMG)) < 0.82
        img[mask & keep] = rng.uniform(0.55, 0.85)
        _clutter(img, rng, int(rng.integers(1, 3)), 0.28, 0.45)
    else:  # speckled
        img = rng.uniform(0.05, 0.28, size=(IMG, IMG))
        keep = rng.random(size=(IMG, IMG)) < 0.84
        img[mask & keep] = rng.uniform(0.75, 1.0)
        img += rng.normal(0.0, 0.02, size=(IMG, IMG))
    return np.clip(img, 0.0, 1.0)


def make_dataset(task_id: str, seed: int, n: int) -> ShapesDataset:
    """Deterministic dataset of n labeled shape images for one task."""
    if task_id not in TASKS:
        raise ValueError(f"unknown task {task_id!r}; expected one of {sorted(TASKS)}")
    if n < MIN_SAMPLES:
        raise ValueError(f"n must be >= {MIN_SAMPLES} (train/test split needs it), got {n}")
    classes = TASKS[task_id]["classes"]
    rng = np.random.default_rng(derive_seed(seed, "shapes", task_id, n))
    labels = np.arange(n, dtype=np.int64) % len(classes)
    order = rng.permutation(n)
    labels = labels[order]
    images = np.empty((n, 1, IMG, IMG), dtype=np.float32)
    for i in range(n):
        images[i, 0] = _render(task_id, classes[labels[i]], rng)
    return ShapesDataset(images=images, labels=labels, task_id=task_id, generator_seed=seed)
