"""Strain surrogates over the (PE, SE) plane.

A dense grid of clamped tendon strain is sampled from the shoulder model at
fixed axial rotation and activation, then approximated by a sum of 2D
Gaussian bumps plus a constant bias.  Amplitudes are solved by ridge least
squares on a fixed lattice of centers, which keeps the fit convex and
reproducible.  Libraries hold one surrogate per (tendon, AR bin, activation
bin) and are immutable once built.
"""

from __future__ import annotations

import base64
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import FitError, StrainPlanError
from .shoulder import AGGREGATE, EPS_SINGULAR, ShoulderModel

SCHEMA_VERSION = 1
MAGIC = b"SMAP1\x00"
N_PARAMS_PER_GAUSSIAN = 5  # amplitude, center_pe, center_se, width_pe, width_se

# below this raw surrogate value the planner sees a frozen value and zero
# gradient; the reported strain is clamped at 0 separately
PLANNER_FLOOR = -0.5


@dataclass(frozen=True)
class StrainGrid:
    pe_axis: np.ndarray
    se_axis: np.ndarray
    ar: float
    activation_level: float
    values: np.ndarray  # shape (len(se_axis), len(pe_axis)), percent, >= 0
    tendon_id: str

    def __post_init__(self):
        if self.values.shape != (len(self.se_axis), len(self.pe_axis)):
            raise ValueError("grid shape does not match axes")
        if np.any(self.values < 0):
            raise ValueError("grid values must be non-negative")
        for arr in (self.pe_axis, self.se_axis, self.values):
            arr.flags.writeable = False


class MapSample(NamedTuple):
    value: float
    d_pe: float
    d_se: float
    clipped: bool


@dataclass(frozen=True)
class StrainMap:
    """Gaussian-RBF surrogate with analytic gradients."""

    params: np.ndarray  # (N_G, 5)
    bias: float
    ar: float
    activation_level: float
    tendon_id: str
    fit_rms: float
    pe_range: tuple[float, float]
    se_range: tuple[float, float]

    def __post_init__(self):
        p = np.asarray(self.params, dtype=float)
        if p.ndim != 2 or p.shape[1] != N_PARAMS_PER_GAUSSIAN:
            raise ValueError("params must be (N_G, 5)")
        if np.any(p[:, 3] <= 0) or np.any(p[:, 4] <= 0):
            raise ValueError("Gaussian widths must be positive")
        object.__setattr__(self, "params", p)
        p.flags.writeable = False

    @property
    def n_gaussians(self) -> int:
        return self.params.shape[0]

    # -- evaluation ----------------------------------------------------------

    def _clip_query(self, pe, se):
        pe_c = np.clip(pe, *self.pe_range)
        se_c = np.clip(se, *self.se_range)
        clipped = np.any(pe_c != pe) or np.any(se_c != se)
        return pe_c, se_c, bool(clipped)

    def raw_terms(self, pe, se):
        """Unclamped surrogate value, gradient and Hessian entries.

        Broadcasts over array queries; returns (val, d_pe, d_se, h_pp,
        h_ss, h_ps).
        """
        pe = np.asarray(pe, dtype=float)[..., None]
        se = np.asarray(se, dtype=float)[..., None]
        amp = self.params[:, 0]
        dx = pe - self.params[:, 1]
        dy = se - self.params[:, 2]
        wx2 = self.params[:, 3] ** 2
        wy2 = self.params[:, 4] ** 2
        g = amp * np.exp(-(dx * dx / (2 * wx2) + dy * dy / (2 * wy2)))
        val = g.sum(axis=-1) + self.bias
        d_pe = (g * (-dx / wx2)).sum(axis=-1)
        d_se = (g * (-dy / wy2)).sum(axis=-1)
        h_pp = (g * (dx * dx / wx2**2 - 1.0 / wx2)).sum(axis=-1)
        h_ss = (g * (dy * dy / wy2**2 - 1.0 / wy2)).sum(axis=-1)
        h_ps = (g * (dx * dy / (wx2 * wy2))).sum(axis=-1)
        return val, d_pe, d_se, h_pp, h_ss, h_ps

    def evaluate(self, pe: float, se: float) -> MapSample:
        """Clamped strain (>= 0) and its gradient; zero gradient where the
        clamp is active.  Out-of-range queries use boundary extension."""
        pe_c, se_c, clipped = self._clip_query(pe, se)
        val, d_pe, d_se, *_ = self.raw_terms(pe_c, se_c)
        val = float(val)
        if val <= 0.0:
            return MapSample(0.0, 0.0, 0.0, clipped)
        return MapSample(val, float(d_pe), float(d_se), clipped)

    def evaluate_batch(self, pe, se):
        """Vectorized clamped evaluation: (values, d_pe, d_se)."""
        pe_c, se_c, _ = self._clip_query(np.asarray(pe), np.asarray(se))
        val, d_pe, d_se, *_ = self.raw_terms(pe_c, se_c)
        mask = val > 0.0
        return val * mask, d_pe * mask, d_se * mask

    def planner_terms(self, pe, se):
        """Smoothed terms for the optimizer: raw surrogate floored just
        below zero so the active clamp boundary stays differentiable.

        Returns (value, d_pe, d_se, h_pp, h_ss, h_ps) with zero gradient
        and curvature below the floor.
        """
        pe_c, se_c, _ = self._clip_query(np.asarray(pe), np.asarray(se))
        val, d_pe, d_se, h_pp, h_ss, h_ps = self.raw_terms(pe_c, se_c)
        mask = val > PLANNER_FLOOR
        val = np.where(mask, val, PLANNER_FLOOR)
        return val, d_pe * mask, d_se * mask, h_pp * mask, h_ss * mask, h_ps * mask


# ---------------------------------------------------------------------------
# sampling and fitting


def sample_grid(
    model: ShoulderModel,
    tendon_id: str,
    ar: float,
    activation_level: float,
    resolution: int | tuple[int, int] = 40,
) -> StrainGrid:
    """Dense clamped-strain grid over the joint box at fixed (ar, alpha).

    ``tendon_id`` may be a muscle name or AGGREGATE (elementwise max over
    all units, every activation set to the level).
    """
    if isinstance(resolution, int):
        n_pe = n_se = resolution
    else:
        n_pe, n_se = resolution
    if n_pe < 8 or n_se < 8:
        raise ValueError("resolution must be at least 8 per axis")
    if not 0.0 <= activation_level <= 1.0:
        raise ValueError("activation_level must be in [0, 1]")
    bounds = model.bounds
    pe_axis = np.linspace(bounds.pe[0], bounds.pe[1], n_pe)
    se_axis = np.linspace(bounds.se[0], bounds.se[1], n_se)
    # rows at the elevation singularity evaluate just inside the band
    se_eval = np.clip(se_axis, EPS_SINGULAR, np.pi - EPS_SINGULAR)
    grid_pe, grid_se = np.meshgrid(pe_axis, se_eval)
    if tendon_id == AGGREGATE:
        stacks = [
            model.tendon_strain_arrays(m, grid_pe, grid_se, ar, activation_level)
            for m in model.muscles
        ]
        values = np.max(stacks, axis=0)
    else:
        unit = model.muscle(tendon_id)
        values = model.tendon_strain_arrays(unit, grid_pe, grid_se, ar, activation_level)
    return StrainGrid(pe_axis, se_axis, float(ar), float(activation_level),
                      values, tendon_id)


def lattice_basis(grid: StrainGrid, n_centers: tuple[int, int],
                  width_factor: float = 1.5):
    """Fixed lattice of Gaussian centers spanning the grid, with per-axis
    widths proportional to the lattice spacing."""
    n_pe, n_se = n_centers
    c_pe = np.linspace(grid.pe_axis[0], grid.pe_axis[-1], n_pe)
    c_se = np.linspace(grid.se_axis[0], grid.se_axis[-1], n_se)
    spacing_pe = (grid.pe_axis[-1] - grid.pe_axis[0]) / max(n_pe - 1, 1)
    spacing_se = (grid.se_axis[-1] - grid.se_axis[0]) / max(n_se - 1, 1)
    cc_pe, cc_se = np.meshgrid(c_pe, c_se)
    centers = np.column_stack([cc_pe.ravel(), cc_se.ravel()])
    widths = np.tile(
        [width_factor * spacing_pe, width_factor * spacing_se], (len(centers), 1)
    )
    return centers, widths


def _design_matrix(pe, se, centers, widths):
    dx = pe[:, None] - centers[None, :, 0]
    dy = se[:, None] - centers[None, :, 1]
    phi = np.exp(
        -(dx * dx / (2 * widths[None, :, 0] ** 2) + dy * dy / (2 * widths[None, :, 1] ** 2))
    )
    return np.column_stack([phi, np.ones(len(pe))])


def fit_rbf(
    grid: StrainGrid,
    n_centers: tuple[int, int] | int = (9, 9),
    regularization: float = 1e-6,
    centers: np.ndarray | None = None,
    widths: np.ndarray | None = None,
    rms_tolerance: float = 0.05,
) -> StrainMap:
    """Ridge least-squares fit of Gaussian amplitudes plus bias.

    Retries once with a 1000x stiffer ridge on a singular system; raises
    FitError if the residual stays above ``rms_tolerance`` of the grid max.
    """
    if centers is None:
        if isinstance(n_centers, int):
            side = max(int(round(n_centers**0.5)), 1)
            n_centers = (side, side)
        centers, widths = lattice_basis(grid, n_centers)
    else:
        centers = np.asarray(centers, dtype=float)
        widths = np.asarray(widths, dtype=float)
    if len(centers) < 1:
        raise ValueError("need at least one Gaussian")

    grid_pe, grid_se = np.meshgrid(grid.pe_axis, grid.se_axis)
    phi = _design_matrix(grid_pe.ravel(), grid_se.ravel(), centers, widths)
    target = grid.values.ravel()
    gram = phi.T @ phi
    rhs = phi.T @ target
    penalty = np.ones(phi.shape[1]) * regularization
    penalty[-1] = 0.0  # bias is not shrunk

    lam = regularization
    coeffs = None
    for attempt in range(2):
        try:
            coeffs = np.linalg.solve(gram + np.diag(penalty * (lam / regularization)),
                                     rhs)
            break
        except np.linalg.LinAlgError:
            lam *= 1000.0
    if coeffs is None:
        raise FitError(
            f"{grid.tendon_id}: design matrix singular even at ridge {lam:g}"
        )

    fitted = np.maximum(phi @ coeffs, 0.0)
    rms = float(np.sqrt(np.mean((fitted - target) ** 2)))
    limit = max(rms_tolerance * float(grid.values.max()), 1e-9)
    if rms > limit:
        raise FitError(
            f"{grid.tendon_id} at ar={grid.ar:.3f} act={grid.activation_level:.2f}: "
            f"fit rms {rms:.4f}% exceeds {limit:.4f}% "
            f"(grid max {grid.values.max():.3f}%, N_G={len(centers)})"
        )
    return StrainMap(
        params=np.column_stack([coeffs[:-1], centers, widths]),
        bias=float(coeffs[-1]),
        ar=grid.ar,
        activation_level=grid.activation_level,
        tendon_id=grid.tendon_id,
        fit_rms=rms,
        pe_range=(float(grid.pe_axis[0]), float(grid.pe_axis[-1])),
        se_range=(float(grid.se_axis[0]), float(grid.se_axis[-1])),
    )


# ---------------------------------------------------------------------------
# library


@dataclass(frozen=True)
class MapLibrary:
    """Complete lattice of surrogates over (tendon, AR bin, activation bin)."""

    ar_bins: np.ndarray
    activation_bins: np.ndarray
    tendons: tuple[str, ...]
    maps: dict[tuple[str, int, int], StrainMap] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if len(self.ar_bins) == 0 or len(self.activation_bins) == 0 or not self.tendons:
            raise StrainPlanError("map library must not be empty")
        for t in self.tendons:
            for i in range(len(self.ar_bins)):
                for j in range(len(self.activation_bins)):
                    if (t, i, j) not in self.maps:
                        raise StrainPlanError(
                            f"library lattice incomplete: missing {(t, i, j)}"
                        )

    def get(self, tendon_id: str, i_ar: int, i_act: int) -> StrainMap:
        return self.maps[(tendon_id, i_ar, i_act)]


class MapSelection(NamedTuple):
    map: StrainMap
    i_ar: int
    i_act: int
    clamped: bool  # query fell outside the bin range on some axis


def _nearest_bin(value: float, bins: np.ndarray, previous: int | None):
    """Nearest-bin index with a half-bin-wide hysteresis band around each
    boundary, so a noisy signal cannot chatter between bins."""
    clamped = value < bins[0] or value > bins[-1]
    nearest = int(np.argmin(np.abs(bins - value)))
    if previous is None or previous == nearest:
        return nearest, clamped
    spacing = float(bins[1] - bins[0]) if len(bins) > 1 else 1.0
    if abs(value - bins[previous]) - abs(value - bins[nearest]) > spacing / 2.0:
        return nearest, clamped
    return previous, clamped


def select_map(
    lib: MapLibrary,
    tendon_id: str,
    ar: float,
    activation: float,
    previous: tuple[int, int] | None = None,
) -> MapSelection:
    """Deterministic nearest-bin selection with hysteresis.

    ``previous`` is the (i_ar, i_act) of the previous selection; queries
    outside the bin range clamp to the edge bin and set the flag.
    """
    if tendon_id not in lib.tendons:
        raise KeyError(f"tendon {tendon_id!r} not in library {lib.tendons}")
    prev_ar = previous[0] if previous else None
    prev_act = previous[1] if previous else None
    i_ar, clamped_ar = _nearest_bin(ar, lib.ar_bins, prev_ar)
    i_act, clamped_act = _nearest_bin(activation, lib.activation_bins, prev_act)
    return MapSelection(lib.get(tendon_id, i_ar, i_act), i_ar, i_act,
                        clamped_ar or clamped_act)


class MapSelector:
    """Stateful wrapper remembering the previous selection per tendon."""

    def __init__(self, lib: MapLibrary):
        self.lib = lib
        self._previous: dict[str, tuple[int, int]] = {}

    def select(self, tendon_id: str, ar: float, activation: float) -> MapSelection:
        sel = select_map(self.lib, tendon_id, ar, activation,
                         self._previous.get(tendon_id))
        self._previous[tendon_id] = (sel.i_ar, sel.i_act)
        return sel


def build_library(
    model: ShoulderModel,
    tendons: Sequence[str] | None = None,
    ar_bins: Sequence[float] | None = None,
    activation_bins: Sequence[float] | None = None,
    resolution: int | tuple[int, int] = 40,
    n_centers: tuple[int, int] = (9, 9),
    regularization: float = 1e-6,
) -> MapLibrary:
    """Sample and fit every (tendon, ar, activation) bin; AR bins default to
    15 degree steps over the joint range, activation bins to 0..0.25 by 0.05."""
    if tendons is None:
        tendons = list(model.muscle_names) + [AGGREGATE]
    if ar_bins is None:
        step = np.deg2rad(15.0)
        lo, hi = model.bounds.ar
        ar_bins = np.arange(lo, hi + 1e-9, step)
    if activation_bins is None:
        activation_bins = np.arange(0.0, 0.25 + 1e-9, 0.05)
    ar_bins = np.asarray(ar_bins, dtype=float)
    activation_bins = np.asarray(activation_bins, dtype=float)
    maps = {}
    for tendon in tendons:
        for i, ar in enumerate(ar_bins):
            for j, act in enumerate(activation_bins):
                grid = sample_grid(model, tendon, float(ar), float(act), resolution)
                maps[(tendon, i, j)] = fit_rbf(grid, n_centers, regularization)
    return MapLibrary(ar_bins, activation_bins, tuple(tendons), maps)


# ---------------------------------------------------------------------------
# persistence: one binary file per map plus a JSON index


def _map_key(smap: StrainMap, i_ar: int, i_act: int) -> str:
    return f"{smap.tendon_id}_ar{i_ar:02d}_act{i_act:02d}"


def save_map(smap: StrainMap, path: Path) -> None:
    name = smap.tendon_id.encode()
    header = MAGIC + struct.pack("<H", len(name)) + name
    header += struct.pack(
        "<ddIIdddddd",
        smap.ar,
        smap.activation_level,
        smap.n_gaussians,
        N_PARAMS_PER_GAUSSIAN,
        smap.bias,
        smap.fit_rms,
        smap.pe_range[0],
        smap.pe_range[1],
        smap.se_range[0],
        smap.se_range[1],
    )
    body = np.ascontiguousarray(smap.params, dtype="<f8").tobytes()
    path.write_bytes(header + body)


def load_map(path: Path) -> StrainMap:
    blob = path.read_bytes()
    if blob[: len(MAGIC)] != MAGIC:
        raise StrainPlanError(f"{path}: not a strain map file")
    off = len(MAGIC)
    (name_len,) = struct.unpack_from("<H", blob, off)
    off += 2
    name = blob[off : off + name_len].decode()
    off += name_len
    ar, act, n_g, n_p, bias, fit_rms, pe0, pe1, se0, se1 = struct.unpack_from(
        "<ddIIdddddd", blob, off
    )
    off += struct.calcsize("<ddIIdddddd")
    if n_p != N_PARAMS_PER_GAUSSIAN:
        raise StrainPlanError(f"{path}: unsupported parameter layout N_p={n_p}")
    params = np.frombuffer(blob, dtype="<f8", count=n_g * n_p, offset=off)
    return StrainMap(
        params=params.reshape(n_g, n_p).copy(),
        bias=bias,
        ar=ar,
        activation_level=act,
        tendon_id=name,
        fit_rms=fit_rms,
        pe_range=(pe0, pe1),
        se_range=(se0, se1),
    )


def save_library(lib: MapLibrary, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for (tendon, i, j), smap in sorted(lib.maps.items()):
        key = _map_key(smap, i, j)
        save_map(smap, out_dir / f"{key}.smap")
        entries.append(
            {
                "key": key,
                "file": f"{key}.smap",
                "tendon": tendon,
                "i_ar": i,
                "i_act": j,
                "ar": smap.ar,
                "activation": smap.activation_level,
                "fit_rms": smap.fit_rms,
            }
        )
    index = {
        "schema_version": SCHEMA_VERSION,
        "ar_bins": lib.ar_bins.tolist(),
        "activation_bins": lib.activation_bins.tolist(),
        "tendons": list(lib.tendons),
        "maps": entries,
    }
    (out_dir / "index.json").write_text(json.dumps(index, indent=1))
    return out_dir / "index.json"


def load_library(lib_dir: Path) -> MapLibrary:
    lib_dir = Path(lib_dir)
    index = json.loads((lib_dir / "index.json").read_text())
    if index.get("schema_version") != SCHEMA_VERSION:
        raise StrainPlanError(
            f"unsupported map library schema {index.get('schema_version')}"
        )
    maps = {}
    for entry in index["maps"]:
        smap = load_map(lib_dir / entry["file"])
        maps[(entry["tendon"], entry["i_ar"], entry["i_act"])] = smap
    return MapLibrary(
        np.asarray(index["ar_bins"], dtype=float),
        np.asarray(index["activation_bins"], dtype=float),
        tuple(index["tendons"]),
        maps,
    )


# ---------------------------------------------------------------------------
# dense export for plots and the UI


def dense_grid_from_map(smap: StrainMap, resolution: int = 60):
    pe_axis = np.linspace(*smap.pe_range, resolution)
    se_axis = np.linspace(*smap.se_range, resolution)
    grid_pe, grid_se = np.meshgrid(pe_axis, se_axis)
    values, _, _ = smap.evaluate_batch(grid_pe, grid_se)
    return pe_axis, se_axis, values


def export_grid(smap: StrainMap, fmt: str, resolution: int = 60) -> str:
    """Serialize a dense grid as 'csv' or 'json' text."""
    pe_axis, se_axis, values = dense_grid_from_map(smap, resolution)
    if fmt == "json":
        return json.dumps(
            {
                "tendon": smap.tendon_id,
                "ar": smap.ar,
                "activation": smap.activation_level,
                "pe_axis": pe_axis.tolist(),
                "se_axis": se_axis.tolist(),
                "values": values.tolist(),
            }
        )
    if fmt == "csv":
        lines = ["se\\pe," + ",".join(f"{v:.6f}" for v in pe_axis)]
        for i, se in enumerate(se_axis):
            lines.append(f"{se:.6f}," + ",".join(f"{v:.6f}" for v in values[i]))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {fmt!r}")


def encode_map_slice(smap: StrainMap, resolution: int = 60) -> dict:
    """Streaming payload: base64 row-major float32 grid with declared shape."""
    pe_axis, se_axis, values = dense_grid_from_map(smap, resolution)
    raw = np.ascontiguousarray(values, dtype="<f4").tobytes()
    return {
        "tendon": smap.tendon_id,
        "ar": smap.ar,
        "activation": smap.activation_level,
        "pe_range": [float(pe_axis[0]), float(pe_axis[-1])],
        "se_range": [float(se_axis[0]), float(se_axis[-1])],
        "shape": [int(values.shape[0]), int(values.shape[1])],
        "dtype": "f4",
        "values_b64": base64.b64encode(raw).decode(),
    }
