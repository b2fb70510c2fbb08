"""Light-field data model, dataset ingestion, and sub-lightfield extraction.

A light field is a 5-D array of view images with layout ``(s, t, y, x, c)``:
axis 0 is the horizontal angular index ``s`` (paired with image ``x``),
axis 1 the vertical angular index ``t`` (paired with image ``y``). Angular
indices are centered, so view ``(s, t)`` with ``s, t`` in ``[-N, N]`` lives
at ``samples[s + N, t + N]``.

On disk a light field is a directory of PNG files named
``view_{row}_{col}.png`` with zero-based, top-left-origin grid coordinates:
``row`` maps to ``t`` (increasing downward), ``col`` to ``s`` (increasing
rightward), so file ``(0, 0)`` holds the angular ``(-N, -N)`` view. An
optional ``manifest.txt`` (lines ``grid=9x9``, ``pattern=...``) overrides
the defaults. 8-bit and 16-bit PNG are accepted; samples are normalized to
``[0, 1]`` by 255 or 65535.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import imageio.v3 as iio
import numpy as np

DEFAULT_PATTERN = "view_{row}_{col}.png"
MANIFEST_NAME = "manifest.txt"

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class View:
    """A single 2-D image, optionally tagged with its angular index.

    ``data`` always has shape ``(H, W, C)`` with ``C`` in ``{1, 3}``.
    Derived images (refocused slices, luma conversions of them) carry
    ``index=None``.
    """

    data: np.ndarray
    index: tuple[int, int] | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"view data must be (H, W, C) with C in {{1, 3}}, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("view data contains non-finite samples")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


class LightField:
    """Immutable stack of views indexed by centered angular coordinates.

    Samples are stored as float64. Finiteness is always enforced; the
    ``[0, 1]`` range is enforced at ingestion only, because losses and
    optimizers legitimately operate on unclamped intermediate fields.
    """

    __slots__ = ("samples",)

    def __init__(self, samples: np.ndarray, require_unit_range: bool = False):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 4:
            samples = samples[..., None]
        if samples.ndim != 5:
            raise ValueError(f"expected samples with layout (s, t, y, x, c), got ndim={samples.ndim}")
        a0, a1 = samples.shape[:2]
        if a0 != a1:
            raise ValueError(f"angular grid must be square, got {a0}x{a1}")
        if a0 % 2 == 0:
            raise ValueError(f"angular grid must be odd-sized (needs a central view), got {a0}x{a1}")
        if samples.shape[4] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {samples.shape[4]}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("light field contains non-finite samples")
        if require_unit_range and (samples.min() < 0.0 or samples.max() > 1.0):
            raise ValueError("light field samples outside [0, 1]")
        samples = samples.copy()
        samples.flags.writeable = False
        self.samples = samples

    @property
    def angular_radius(self) -> int:
        return (self.samples.shape[0] - 1) // 2

    @property
    def grid_size(self) -> int:
        return self.samples.shape[0]

    @property
    def num_views(self) -> int:
        return self.grid_size ** 2

    @property
    def height(self) -> int:
        return self.samples.shape[2]

    @property
    def width(self) -> int:
        return self.samples.shape[3]

    @property
    def channels(self) -> int:
        return self.samples.shape[4]

    @property
    def view_shape(self) -> tuple[int, int, int]:
        return self.samples.shape[2:]

    def view(self, s: int, t: int) -> View:
        n = self.angular_radius
        if not (-n <= s <= n and -n <= t <= n):
            raise ValueError(f"angular index ({s}, {t}) outside [-{n}, {n}]^2")
        return View(self.samples[s + n, t + n], index=(s, t))

    def iter_views(self):
        """Yield ``((s, t), image)`` in fixed lexicographic angular order."""
        n = self.angular_radius
        for a in range(self.grid_size):
            for b in range(self.grid_size):
                yield (a - n, b - n), self.samples[a, b]

    def same_shape_as(self, other: "LightField") -> bool:
        return self.samples.shape == other.samples.shape

    def __repr__(self) -> str:
        a, _, h, w, c = self.samples.shape
        return f"LightField(angular={a}x{a}, spatial={h}x{w}, channels={c})"


@dataclass(frozen=True)
class ViewSet:
    """Ordered collection of views with a role tag per view."""

    views: tuple[View, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        if len(self.views) != len(self.roles):
            raise ValueError("one role per view required")
        indices = [v.index for v in self.views]
        if any(ix is None for ix in indices):
            raise ValueError("every view in a ViewSet needs an angular index")
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate angular indices in ViewSet")
        for role in self.roles:
            if role not in ("center", "corner"):
                raise ValueError(f"unknown view role {role!r}")

    @property
    def center(self) -> View:
        return self.views[self.roles.index("center")]

    def __len__(self) -> int:
        return len(self.views)


@dataclass(frozen=True)
class DatasetLayout:
    """Where a light field lives on disk and how its files are named."""

    directory: Path
    rows: int
    cols: int
    pattern: str = DEFAULT_PATTERN

    def __post_init__(self):
        object.__setattr__(self, "directory", Path(self.directory))
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")

    def path(self, row: int, col: int) -> Path:
        return self.directory / self.pattern.format(row=row, col=col)


def discover_layout(directory: str | Path) -> DatasetLayout:
    """Infer a DatasetLayout from ``manifest.txt`` or from the files present."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such light-field directory: {directory}")
    pattern = DEFAULT_PATTERN
    grid: tuple[int, int] | None = None
    manifest = directory / MANIFEST_NAME
    if manifest.is_file():
        for line in manifest.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "pattern":
                pattern = value
            elif key == "grid":
                m = re.fullmatch(r"(\d+)x(\d+)", value)
                if m is None:
                    raise ValueError(f"bad grid spec in manifest: {value!r}")
                grid = (int(m.group(1)), int(m.group(2)))
            else:
                raise ValueError(f"unknown manifest key {key!r}")
    if grid is None:
        regex = re.escape(pattern).replace(r"\{row\}", r"(\d+)").replace(r"\{col\}", r"(\d+)")
        rows = cols = 0
        for p in directory.iterdir():
            m = re.fullmatch(regex, p.name)
            if m is not None:
                rows = max(rows, int(m.group(1)) + 1)
                cols = max(cols, int(m.group(2)) + 1)
        if rows == 0:
            raise FileNotFoundError(f"no files matching {pattern!r} under {directory}")
        grid = (rows, cols)
    return DatasetLayout(directory=directory, rows=grid[0], cols=grid[1], pattern=pattern)


def _decode_image(path: Path) -> np.ndarray:
    raw = iio.imread(path)
    if raw.dtype == np.uint8:
        img = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        img = raw.astype(np.float64) / 65535.0
    else:
        raise ValueError(f"{path}: unsupported sample type {raw.dtype} (want 8- or 16-bit)")
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"{path}: unsupported channel layout {raw.shape}")
    return img


def load_lightfield(source: str | Path | DatasetLayout) -> LightField:
    """Load a light field from a directory of view images.

    File grid position ``(row, col) = (0, 0)`` maps to angular index
    ``(-N, -N)``. The grid must be square with odd side length.
    """
    layout = source if isinstance(source, DatasetLayout) else discover_layout(source)
    if layout.rows != layout.cols:
        raise ValueError(f"angular grid must be square, got {layout.rows}x{layout.cols}")
    if layout.rows % 2 == 0:
        raise ValueError(f"angular grid must be odd-sized (needs a central view), got {layout.rows}x{layout.cols}")
    grid = layout.rows
    samples = None
    for row in range(grid):
        for col in range(grid):
            path = layout.path(row, col)
            if not path.is_file():
                raise FileNotFoundError(f"missing view file: {path}")
            img = _decode_image(path)
            if samples is None:
                samples = np.empty((grid, grid) + img.shape)
            elif img.shape != samples.shape[2:]:
                raise ValueError(f"{path}: view shape {img.shape} differs from {samples.shape[2:]}")
            # col indexes the horizontal angular axis s, row the vertical t
            samples[col, row] = img
    return LightField(samples, require_unit_range=True)


def save_lightfield(lf: LightField, directory: str | Path, pattern: str = DEFAULT_PATTERN,
                    bit_depth: int = 8) -> DatasetLayout:
    """Write a light field as a grid of PNGs (plus a manifest) after clamping to [0, 1]."""
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    peak = 255 if bit_depth == 8 else 65535
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    grid = lf.grid_size
    for (s, t), img in lf.iter_views():
        row, col = t + lf.angular_radius, s + lf.angular_radius
        quantized = np.rint(np.clip(img, 0.0, 1.0) * peak).astype(dtype)
        if quantized.shape[2] == 1:
            quantized = quantized[:, :, 0]
        iio.imwrite(directory / pattern.format(row=row, col=col), quantized)
    (directory / MANIFEST_NAME).write_text(f"grid={grid}x{grid}\npattern={pattern}\n")
    return DatasetLayout(directory=directory, rows=grid, cols=grid, pattern=pattern)


def extract_sublightfields(lf: LightField, window: int) -> list[LightField]:
    """Extract every contiguous ``window x window`` angular block as its own light field.

    Blocks are returned in row-major order over window positions and are
    re-indexed to their own centered angular coordinates. Views are copies:
    mutating a sub-lightfield never touches the source.
    """
    grid = lf.grid_size
    if window % 2 == 0:
        raise ValueError(f"window must be odd, got {window}")
    if window > grid:
        raise ValueError(f"window {window} exceeds angular grid {grid}")
    out = []
    for a in range(grid - window + 1):
        for b in range(grid - window + 1):
            out.append(LightField(lf.samples[a:a + window, b:b + window]))
    return out


def sample_inputs(lf: LightField) -> ViewSet:
    """Pick the central view and the four corner views as synthesis inputs."""
    n = lf.angular_radius
    if n < 1:
        raise ValueError("need angular radius >= 1 so the corners are distinct from the center")
    corners = [(-n, -n), (-n, n), (n, -n), (n, n)]
    views = [lf.view(0, 0)] + [lf.view(s, t) for (s, t) in corners]
    return ViewSet(views=tuple(views), roles=("center",) + ("corner",) * 4)


def to_luma(view: View) -> View:
    """Convert an RGB view to single-channel luma (BT.601 weights); identity on C=1."""
    if view.channels == 1:
        return view
    w = np.asarray(LUMA_WEIGHTS)
    luma = view.data @ w
    return View(luma[:, :, None], index=view.index)
