"""Regenerate the deterministic fixtures shipped under data/.

Run from the repository root:  python scripts/make_fixtures.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from plr.core import seeded_rng
from plr.synthdata import write_pgm

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


def blob_image(n_rows, n_cols, blobs, background=8.0):
    """Sum of Gaussian bumps on a faint background, quantized to [0, 255]."""
    r = np.arange(n_rows)[:, None]
    c = np.arange(n_cols)[None, :]
    img = np.full((n_rows, n_cols), background)
    for amp, cr, cc, sr, sc in blobs:
        img += amp * np.exp(-((r - cr) ** 2 / (2 * sr**2) + (c - cc) ** 2 / (2 * sc**2)))
    return np.clip(np.rint(img), 0, 255)


def make_solar48():
    blobs = [
        (235.0, 14.0, 16.0, 5.5, 7.0),
        (170.0, 30.0, 31.0, 9.0, 6.5),
        (120.0, 21.0, 38.0, 4.0, 5.0),
        (60.0, 38.0, 10.0, 7.0, 10.0),
    ]
    write_pgm(os.path.join(DATA, "solar48.pgm"), blob_image(48, 48, blobs))


def make_phantom16():
    blobs = [
        (220.0, 5.0, 4.0, 2.5, 3.0),
        (150.0, 11.0, 10.0, 3.5, 2.5),
    ]
    write_pgm(os.path.join(DATA, "phantom16.pgm"), blob_image(16, 16, blobs))


def make_bike_toy():
    """24 hours x 8 days of counts from a two-peak daily profile.

    Days 6 and 7 weight the midday profile (weekend riding), the rest the
    commute profile; the rank-2 structure is what the completion demo digs
    back out of subsampled counts.
    """
    rng = seeded_rng(20260808)
    hours = np.arange(24)
    commute = np.exp(-((hours - 8.5) ** 2) / 4.0) + 1.2 * np.exp(-((hours - 17.5) ** 2) / 6.0)
    leisure = np.exp(-((hours - 14.0) ** 2) / 18.0)
    day_mix = 3.5 * np.array([[60, 15], [65, 18], [58, 12], [70, 20],
                              [75, 22], [20, 90], [15, 95], [62, 16]], dtype=float)
    intensity = np.outer(commute, day_mix[:, 0]) + np.outer(leisure, day_mix[:, 1]) + 10.0
    counts = rng.poisson(intensity)
    lines = ["hour,day,count"]
    for h in range(24):
        for d in range(8):
            lines.append(f"{h + 1},{d + 1},{counts[h, d]}")
    with open(os.path.join(DATA, "bike_toy.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    make_solar48()
    make_phantom16()
    make_bike_toy()
    print("fixtures written to", os.path.abspath(DATA))
