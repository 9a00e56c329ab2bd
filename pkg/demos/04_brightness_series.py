#!/usr/bin/env python3
"""Walkthrough: crop-brightness tracking across generated image frames.

Synthesizes frame dumps for two image-generation runs whose face region
brightens over iterations, measures a fixed forehead crop per frame via a
manifest, aggregates per group, and reports the percent change to peak.
An SVG line chart of the aggregate curves is written next to the CSVs.
"""

import os
import tempfile

import numpy as np
from PIL import Image

import assoc_audit as aa
from assoc_audit.brightness import aggregate_to_csv, series_from_manifest, series_to_csv
from assoc_audit.charts import render_series_svg

rng = np.random.default_rng(13)
workdir = tempfile.mkdtemp(prefix="brightness_demo_")
iterations = list(range(0, 201, 10))

# Brightness trajectories: rise to a peak around iteration 80, then fade.
def trajectory(start, peak):
    curve = []
    for it in iterations:
        rise = min(it, 80) / 80
        fade = max(0, it - 80) / 120
        curve.append(start + (peak - start) * rise - 12 * fade)
    return curve

runs = {
    "subject1": ("group_a", trajectory(135, 182)),
    "subject2": ("group_a", trajectory(142, 175)),
    "subject3": ("group_b", trajectory(178, 214)),
}

rows = ["image_path,image_id,group,iteration,x,y,w,h"]
for image_id, (group, curve) in runs.items():
    for it, level in zip(iterations, curve):
        # frame: noise background, uniform "forehead" patch at the crop
        frame = rng.integers(0, 255, size=(120, 120, 3), dtype=np.uint8)
        frame[30:80, 35:85] = int(round(level))
        name = f"{image_id}_{it:03d}.png"
        Image.fromarray(frame).save(os.path.join(workdir, name))
        rows.append(f"{name},{image_id},{group},{it},35,30,50,50")

manifest = os.path.join(workdir, "crops.csv")
with open(manifest, "w") as fh:
    fh.write("\n".join(rows) + "\n")

series = series_from_manifest(manifest)
aggregates = aa.group_series_aggregate(series)

print("percent change from iteration 0 to the brightness peak")
for group in sorted(aggregates):
    s = aggregates[group]
    print(f"  {group}: start {s.values[0]:6.1f}, peak {s.values.max():6.1f} "
          f"-> +{aa.percent_change_to_peak(s):.1f}%")

series_csv = os.path.join(workdir, "series.csv")
aggregate_csv = os.path.join(workdir, "aggregate.csv")
svg_path = os.path.join(workdir, "aggregate.svg")
with open(series_csv, "w") as fh:
    fh.write(series_to_csv(series))
with open(aggregate_csv, "w") as fh:
    fh.write(aggregate_to_csv(aggregates))
with open(svg_path, "w") as fh:
    fh.write(render_series_svg(aggregates))

print(f"\nwrote {series_csv}")
print(f"wrote {aggregate_csv}")
print(f"wrote {svg_path}")
