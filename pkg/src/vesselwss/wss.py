"""Wall shear stress fields from per-vertex traction or stress samples.

All maps are pure per-(vertex, time) operations on immutable series, so they
are deterministic and safe to parallelize over vertices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricTensorError,
    DimensionMismatchError,
    ParseError,
    WindowOutOfRangeError,
)

KIND_SHAPES = {
    "traction_vector": 3,  # (T, N, 3)
    "stress_tensor": 4,    # (T, N, 3, 3)
    "scalar": 2,           # (T, N)
}


@dataclass
class WallFieldSeries:
    """Time-stamped per-vertex samples over an analysis window.

    times: strictly increasing instants (s); samples: (T, N[, ...]) in N/m2;
    window: analysis interval within the sampled range (defaults to the full
    range); mask: per-vertex invalid flags propagated through indicators.
    """

    times: np.ndarray
    kind: str
    samples: np.ndarray
    window: tuple[float, float] | None = None
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.samples = np.asarray(self.samples, dtype=float)
        if self.kind not in KIND_SHAPES:
            raise ParseError(f"unknown series kind {self.kind!r}")
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ParseError("times must be a non-empty 1-d array")
        if np.any(np.diff(self.times) <= 0):
            raise ParseError("times must be strictly increasing")
        want = KIND_SHAPES[self.kind]
        if self.samples.ndim != want or len(self.samples) != len(self.times):
            raise ParseError(
                f"samples for kind {self.kind!r} must have {want} axes with "
                f"one leading entry per time, got shape {self.samples.shape}"
            )
        if self.kind in ("traction_vector",) and self.samples.shape[-1] != 3:
            raise ParseError("traction samples must be 3-vectors")
        if self.kind == "stress_tensor" and self.samples.shape[-2:] != (3, 3):
            raise ParseError("stress samples must be 3x3 tensors")
        if self.window is None:
            self.window = (float(self.times[0]), float(self.times[-1]))
        ta, tb = self.window
        if not (self.times[0] <= ta < tb <= self.times[-1]):
            raise WindowOutOfRangeError(
                f"window [{ta}, {tb}] not inside sampled range "
                f"[{self.times[0]}, {self.times[-1]}]"
            )
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (self.n_vertices,):
                raise DimensionMismatchError("mask must have one flag per vertex")

    @property
    def n_times(self) -> int:
        return len(self.times)

    @property
    def n_vertices(self) -> int:
        return self.samples.shape[1]

    def replace(self, kind: str, samples: np.ndarray,
                mask: np.ndarray | None = None) -> "WallFieldSeries":
        """Derived series on the same time grid and window."""
        if mask is None:
            mask = self.mask
        elif self.mask is not None:
            mask = mask | self.mask
        return WallFieldSeries(self.times, kind, samples, self.window, mask)


def _check_normals(series: WallFieldSeries, normals: np.ndarray) -> np.ndarray:
    normals = np.asarray(normals, dtype=float)
    if normals.shape != (series.n_vertices, 3):
        raise DimensionMismatchError(
            f"normals shape {normals.shape} does not match "
            f"{series.n_vertices} series vertices"
        )
    return normals


def traction_from_stress(stress: WallFieldSeries, normals) -> WallFieldSeries:
    """Normal stress vector -T.n per vertex and time."""
    if stress.kind != "stress_tensor":
        raise ParseError(f"expected stress_tensor series, got {stress.kind!r}")
    normals = _check_normals(stress, normals)
    s = stress.samples
    asym = np.abs(s - np.swapaxes(s, -1, -2)).max()
    scale = np.abs(s).max()
    if scale > 0 and asym > 1e-9 * scale:
        raise AsymmetricTensorError(
            f"stress tensor asymmetry {asym:.3e} exceeds 1e-9 relative"
        )
    traction = -np.einsum("tnij,nj->tni", s, normals)
    return stress.replace("traction_vector", traction)


def wss_vector(traction: WallFieldSeries, normals) -> WallFieldSeries:
    """Tangential projection t - (t.n) n of the traction."""
    if traction.kind != "traction_vector":
        raise ParseError(f"expected traction_vector series, got {traction.kind!r}")
    normals = _check_normals(traction, normals)
    t = traction.samples
    tn = np.einsum("tni,ni->tn", t, normals)
    return traction.replace("traction_vector", t - tn[..., None] * normals)


def wss_amplitude(tau: WallFieldSeries) -> WallFieldSeries:
    """Euclidean magnitude of the WSS vector."""
    if tau.kind != "traction_vector":
        raise ParseError(f"expected traction_vector series, got {tau.kind!r}")
    return tau.replace("scalar", np.linalg.norm(tau.samples, axis=2))


def wss_longitudinal(traction: WallFieldSeries, tangent_field) -> WallFieldSeries:
    """Signed component of the traction along the longitudinal tangent.

    Vertices with a degenerate tangent are masked, not zero-filled.
    """
    if traction.kind != "traction_vector":
        raise ParseError(f"expected traction_vector series, got {traction.kind!r}")
    t_ell = np.asarray(tangent_field.vectors, dtype=float)
    if t_ell.shape != (traction.n_vertices, 3):
        raise DimensionMismatchError("tangent field does not match series vertices")
    values = np.einsum("tni,ni->tn", traction.samples, t_ell)
    return traction.replace("scalar", values,
                            mask=np.asarray(tangent_field.degenerate_mask, bool))


def wss_transversal(traction: WallFieldSeries, tangent_field, normals) -> WallFieldSeries:
    """Component of the traction along n x t_l, the in-plane transversal axis."""
    if traction.kind != "traction_vector":
        raise ParseError(f"expected traction_vector series, got {traction.kind!r}")
    normals = _check_normals(traction, normals)
    t_ell = np.asarray(tangent_field.vectors, dtype=float)
    if t_ell.shape != (traction.n_vertices, 3):
        raise DimensionMismatchError("tangent field does not match series vertices")
    transversal_axis = np.cross(normals, t_ell)
    values = np.einsum("tni,ni->tn", traction.samples, transversal_axis)
    return traction.replace("scalar", values,
                            mask=np.asarray(tangent_field.degenerate_mask, bool))
