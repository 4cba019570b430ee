"""Shared helpers for the experiment scripts."""

import math
from pathlib import Path

import numpy as np

from strainplan.maps import build_library, dense_grid_from_map, load_library, save_library
from strainplan.shoulder import AGGREGATE, default_model

DEG = math.pi / 180.0
RESULTS = Path(__file__).resolve().parent.parent / "results"


def get_model():
    return default_model()


def get_library(model, cache_dir: Path | None = None):
    """Aggregate + infraspinatus library at the locked axial rotation,
    cached on disk because the scripts share it."""
    cache = cache_dir or (RESULTS / "library")
    if (cache / "index.json").exists():
        return load_library(cache)
    library = build_library(
        model,
        tendons=["infraspinatus", AGGREGATE],
        ar_bins=[0.0],
        activation_bins=np.arange(0.0, 0.251, 0.05),
        resolution=32,
        n_centers=(9, 9),
    )
    save_library(library, cache)
    return library


def draw_map(ax, smap, resolution=80):
    pe_axis, se_axis, values = dense_grid_from_map(smap, resolution)
    mesh = ax.pcolormesh(
        np.degrees(pe_axis), np.degrees(se_axis), values,
        shading="auto", cmap="viridis", vmin=0.0, vmax=15.0,
    )
    ax.contour(
        np.degrees(pe_axis), np.degrees(se_axis), values,
        levels=[2.0], colors="white", linewidths=1.0,
    )
    ax.set_xlabel("plane of elevation [deg]")
    ax.set_ylabel("shoulder elevation [deg]")
    return mesh
