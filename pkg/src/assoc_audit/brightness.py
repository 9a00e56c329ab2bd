"""Crop-brightness measurement across image-generation iterations.

Brightness of a pixel is the unweighted channel mean (R+G+B)/3 on the
stored 8-bit values, no gamma correction; a luma mode (ITU BT.601 weights)
is available for sensitivity checks. Crop rectangles are supplied
externally via a manifest CSV:

    image_path,image_id,group,iteration,x,y,w,h

where each row is one frame of one image's generation run. PNG and
baseline JPEG containers are supported.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DataError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

MANIFEST_HEADER = ["image_path", "image_id", "group", "iteration", "x", "y", "w", "h"]


@dataclass
class RasterImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3), values in [0, 255]

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.shape != (self.height, self.width, 3):
            raise DataError(
                f"pixel grid shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )


@dataclass
class CropRect:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise DataError("crop origin must be non-negative")
        if self.w < 1 or self.h < 1:
            raise DataError("crop extent must be positive")


@dataclass
class BrightnessSeries:
    image_id: str
    group: str
    samples: list[tuple[int, float]]  # (iteration, brightness), iteration 0 first

    def __post_init__(self):
        if not self.samples:
            raise DataError(f"series {self.image_id!r} is empty")
        if self.samples[0][0] != 0:
            raise DataError(f"series {self.image_id!r} must start at iteration 0")
        iters = [it for it, _ in self.samples]
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise DataError(f"series {self.image_id!r} iterations must strictly increase")

    @property
    def iterations(self) -> list[int]:
        return [it for it, _ in self.samples]

    @property
    def values(self) -> np.ndarray:
        return np.asarray([v for _, v in self.samples], dtype=np.float64)


def load_image(path) -> RasterImage:
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")  # drops alpha if present
            arr = np.asarray(rgb, dtype=np.float64)
    except FileNotFoundError:
        raise DataError(f"{path}: image file not found") from None
    except Exception as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from None
    return RasterImage(width=arr.shape[1], height=arr.shape[0], pixels=arr)


def mean_crop_brightness(image: RasterImage, rect: CropRect, luma: bool = False) -> float:
    """Mean per-pixel brightness of the crop, in [0, 255]."""
    if rect.x + rect.w > image.width or rect.y + rect.h > image.height:
        raise DataError(
            f"crop {rect.w}x{rect.h}+{rect.x}+{rect.y} exceeds image "
            f"{image.width}x{image.height}"
        )
    crop = image.pixels[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w]
    if luma:
        return float((crop @ np.asarray(LUMA_WEIGHTS)).mean())
    return float(crop.mean())


def percent_change_to_peak(series: BrightnessSeries) -> float:
    """Percent change from the iteration-0 brightness to the series maximum."""
    values = series.values
    start = values[0]
    if start <= 0.0:
        raise DataError(f"series {series.image_id!r} starts at zero brightness")
    return float(100.0 * (values.max() - start) / start)


def peak_iteration(series: BrightnessSeries) -> int:
    """Iteration of the series maximum (earliest, if attained repeatedly)."""
    return series.iterations[int(np.argmax(series.values))]


def group_series_aggregate(series_list) -> dict[str, BrightnessSeries]:
    """Pointwise per-group mean series; all inputs must share one grid."""
    series_list = list(series_list)
    if not series_list:
        raise DataError("no series to aggregate")
    grid = series_list[0].iterations
    off_grid = [s.image_id for s in series_list if s.iterations != grid]
    if off_grid:
        raise DataError(f"iteration grids differ for series {off_grid!r}")
    groups: dict[str, list[BrightnessSeries]] = {}
    for s in series_list:
        groups.setdefault(s.group, []).append(s)
    out = {}
    for group, members in groups.items():
        mean = np.mean([m.values for m in members], axis=0)
        out[group] = BrightnessSeries(
            image_id=f"{group}-mean",
            group=group,
            samples=list(zip(grid, mean.tolist())),
        )
    return out


def series_from_manifest(path, luma: bool = False) -> list[BrightnessSeries]:
    """Measure every frame listed in a crop manifest CSV into series."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty manifest") from None
        if header != MANIFEST_HEADER:
            raise DataError(f"{path}: expected header {','.join(MANIFEST_HEADER)}")
        frames: dict[str, list] = {}
        group_of: dict[str, str] = {}
        base = os.path.dirname(os.fspath(path))
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 8:
                raise DataError(f"{path}:{lineno}: expected 8 fields, got {len(row)}")
            image_path, image_id, group, *numbers = row
            try:
                iteration, x, y, w, h = (int(v) for v in numbers)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer crop field") from None
            if image_id in group_of and group_of[image_id] != group:
                raise DataError(
                    f"{path}:{lineno}: series {image_id!r} listed under two groups"
                )
            group_of[image_id] = group
            resolved = image_path if os.path.isabs(image_path) else os.path.join(base, image_path)
            value = mean_crop_brightness(load_image(resolved), CropRect(x, y, w, h), luma=luma)
            frames.setdefault(image_id, []).append((iteration, value))
    series = []
    for image_id, samples in frames.items():
        samples.sort(key=lambda sv: sv[0])
        iters = [it for it, _ in samples]
        if len(set(iters)) != len(iters):
            raise DataError(f"series {image_id!r} has duplicate iterations")
        series.append(BrightnessSeries(image_id=image_id, group=group_of[image_id],
                                       samples=samples))
    return series


def series_to_csv(series_list, header_lines=()) -> str:
    lines = list(header_lines)
    lines.append("image_id,group,iteration,brightness")
    for s in series_list:
        for iteration, value in s.samples:
            lines.append(f"{s.image_id},{s.group},{iteration},{value!r}")
    return "\n".join(lines) + "\n"


def aggregate_to_csv(aggregates: dict[str, BrightnessSeries], header_lines=()) -> str:
    lines = list(header_lines)
    lines.append("group,iteration,mean_brightness")
    for group in sorted(aggregates):
        for iteration, value in aggregates[group].samples:
            lines.append(f"{group},{iteration},{value!r}")
    return "\n".join(lines) + "\n"


def series_from_csv(path) -> list[BrightnessSeries]:
    """Read back a series CSV (image_id,group,iteration,brightness)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].startswith("#")]
    if not rows or rows[0] != ["image_id", "group", "iteration", "brightness"]:
        raise DataError(f"{path}: expected header image_id,group,iteration,brightness")
    frames: dict[str, list] = {}
    group_of: dict[str, str] = {}
    for row in rows[1:]:
        if len(row) != 4:
            raise DataError(f"{path}: malformed series row {row!r}")
        image_id, group, iteration, value = row
        group_of[image_id] = group
        frames.setdefault(image_id, []).append((int(iteration), float(value)))
    out = []
    for image_id, samples in frames.items():
        samples.sort(key=lambda sv: sv[0])
        out.append(BrightnessSeries(image_id=image_id, group=group_of[image_id],
                                    samples=samples))
    return out
