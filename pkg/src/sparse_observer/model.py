"""Plant, observer and error-system data model.

An :class:`LtiPlant` is the continuous LTI system

    dx/dt = A x + B_u u + B_w w,      w = [d; n]  (process + sensor noise)
    y     = C_y x + D_u u + D_w w,
    z     = C_z x,

with the disturbance partition B_w = [B_d, B_n], D_w = [D_d, D_n] and the
structural assumptions B_n = 0 (process noise independent of sensors) and
D_n = I (sensor channels independent).  Only B_d and D_d are stored; the
sensor-noise channels are implicit.  Per-channel noise is scaled by the
diagonal matrix S_n whose inverse is diag(kappa); kappa^2 is the sensor
precision vector (inverse noise variance).

Plants are immutable values; every operation returns a new object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from . import linalg

__all__ = [
    "LtiPlant",
    "NormWeights",
    "PrecisionVector",
    "ErrorSystem",
    "StructureError",
    "NotDetectableError",
    "apply_weights",
    "build_error_system",
    "restrict_sensors",
    "check_detectability",
    "load_plant",
    "f16_model_path",
    "load_f16",
]

DETECTABILITY_RTOL = 1e-8


class StructureError(ValueError):
    """Data violates a structural assumption (B_n = 0, D_n = I, support)."""


class NotDetectableError(ValueError):
    """(A, C_y) fails the PBH detectability test."""


@dataclass(frozen=True)
class LtiPlant:
    A: np.ndarray
    B_u: np.ndarray
    B_d: np.ndarray
    C_y: np.ndarray
    C_z: np.ndarray
    D_u: np.ndarray
    D_d: np.ndarray
    S_d: np.ndarray
    state_names: tuple[str, ...] | None = None
    sensor_names: tuple[str, ...] | None = None

    def __post_init__(self):
        for name in ("A", "B_u", "B_d", "C_y", "C_z", "D_u", "D_d", "S_d"):
            object.__setattr__(
                self, name, linalg.check_matrix(getattr(self, name), name))
        nx = self.A.shape[0]
        if self.A.shape != (nx, nx):
            raise ValueError("A must be square")
        ny, nu, nd, nz = (self.C_y.shape[0], self.B_u.shape[1],
                          self.B_d.shape[1], self.C_z.shape[0])
        checks = {
            "B_u": (nx, nu), "B_d": (nx, nd), "C_y": (ny, nx),
            "C_z": (nz, nx), "D_u": (ny, nu), "D_d": (ny, nd),
            "S_d": (nd, nd),
        }
        for name, shape in checks.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")
        if np.any(self.S_d - np.diag(np.diag(self.S_d)) != 0.0):
            raise ValueError("S_d must be diagonal")
        if np.any(np.diag(self.S_d) < 0.0):
            raise ValueError("S_d must have nonnegative entries")
        if self.state_names is not None and len(self.state_names) != nx:
            raise ValueError("state_names length must equal the state count")
        if self.sensor_names is not None and len(self.sensor_names) != ny:
            raise ValueError("sensor_names length must equal the sensor count")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.C_y.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B_u.shape[1]

    @property
    def n_dist(self) -> int:
        return self.B_d.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C_z.shape[0]

    def sensor_labels(self) -> tuple[str, ...]:
        if self.sensor_names is not None:
            return self.sensor_names
        return tuple(f"y{i + 1}" for i in range(self.n_sensors))

    def state_labels(self) -> tuple[str, ...]:
        if self.state_names is not None:
            return self.state_names
        return tuple(f"x{i + 1}" for i in range(self.n_states))


@dataclass(frozen=True)
class NormWeights:
    """Normalization weights: inputs W_u, disturbances W_w, outputs W_z."""

    W_u: np.ndarray
    W_w: np.ndarray
    W_z: np.ndarray

    def __post_init__(self):
        for name in ("W_u", "W_w", "W_z"):
            m = linalg.check_matrix(getattr(self, name), name, square=True)
            object.__setattr__(self, name, m)
            if abs(np.linalg.det(m)) < 1e-300:
                raise ValueError(f"{name} is singular")


@dataclass(frozen=True)
class PrecisionVector:
    """Sensor precisions kappa^2 with the retained-sensor index set."""

    kappa_sq: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.kappa_sq, dtype=float))
        if k.ndim != 1 or not np.all(np.isfinite(k)):
            raise ValueError("kappa_sq must be a finite 1-D vector")
        if np.any(k < 0):
            raise ValueError("precisions must be nonnegative")
        object.__setattr__(self, "kappa_sq", k)
        sup = tuple(sorted(int(i) for i in self.support))
        if any(i < 0 or i >= k.size for i in sup):
            raise ValueError("support index out of range")
        object.__setattr__(self, "support", sup)

    @classmethod
    def from_values(cls, kappa_sq, support_tol: float = 1e-6) -> "PrecisionVector":
        """Build with support = entries above ``support_tol * max(kappa_sq)``."""
        k = np.atleast_1d(np.asarray(kappa_sq, dtype=float))
        kmax = k.max() if k.size else 0.0
        if kmax <= 0.0:
            return cls(np.maximum(k, 0.0), ())
        sup = tuple(int(i) for i in np.flatnonzero(k > support_tol * kmax))
        return cls(k, sup)

    @property
    def n_active(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class ErrorSystem:
    """Closed observation-error dynamics: de/dt = A_cl e + B_cl wbar, eps = C_z e."""

    A_cl: np.ndarray
    B_cl: np.ndarray
    C_z: np.ndarray


def apply_weights(plant: LtiPlant, weights: NormWeights) -> LtiPlant:
    """Normalize a plant by input/disturbance/output weighting matrices.

    Returns a new plant with B_u W_u, D_u W_u, W_z C_z and the disturbance
    channels rescaled through W_w.  W_w must be block diagonal with an
    identity sensor-noise block, since the normalized plant must preserve
    the structural convention D_n = I; anything else raises
    :class:`StructureError`.
    """
    nd, ny, nu, nz = plant.n_dist, plant.n_sensors, plant.n_inputs, plant.n_outputs
    if weights.W_u.shape != (nu, nu):
        raise ValueError(f"W_u must be {nu}x{nu}")
    if weights.W_w.shape != (nd + ny, nd + ny):
        raise ValueError(f"W_w must be {(nd + ny)}x{(nd + ny)}")
    if weights.W_z.shape != (nz, nz):
        raise ValueError(f"W_z must be {nz}x{nz}")
    Ww = weights.W_w
    W_dd = Ww[:nd, :nd]
    off_upper = Ww[:nd, nd:]
    off_lower = Ww[nd:, :nd]
    W_nn = Ww[nd:, nd:]
    scale = max(1.0, float(np.abs(Ww).max()))
    if (np.abs(off_upper).max(initial=0.0) > 1e-12 * scale
            or np.abs(off_lower).max(initial=0.0) > 1e-12 * scale):
        raise StructureError(
            "W_w must be block diagonal over (disturbance, sensor) channels")
    if np.abs(W_nn - np.eye(ny)).max() > 1e-12 * scale:
        raise StructureError(
            "the sensor-noise block of W_w must be identity: sensor scaling "
            "is owned by the precision vector, not the normalization")
    return replace(
        plant,
        B_u=plant.B_u @ weights.W_u,
        D_u=plant.D_u @ weights.W_u,
        B_d=plant.B_d @ W_dd,
        D_d=plant.D_d @ W_dd,
        C_z=weights.W_z @ plant.C_z,
    )


def build_error_system(plant: LtiPlant, L, precision: PrecisionVector) -> ErrorSystem:
    """Assemble the closed error system for gain L and sensor precisions.

    Sensor-noise columns are L[:, i] / kappa_i for retained sensors only;
    removed sensors contribute neither a noise channel nor a measurement,
    so their gain columns must be exactly zero.
    """
    L = linalg.check_matrix(L, "L")
    nx, ny = plant.n_states, plant.n_sensors
    if L.shape != (nx, ny):
        raise ValueError(f"L has shape {L.shape}, expected {(nx, ny)}")
    if precision.kappa_sq.size != ny:
        raise ValueError("precision length must equal the sensor count")
    support = list(precision.support)
    off = [i for i in range(ny) if i not in precision.support]
    if any(precision.kappa_sq[i] <= 0.0 for i in support):
        raise ValueError("retained sensors must have positive precision")
    if off and np.any(L[:, off] != 0.0):
        raise StructureError(
            "nonzero gain column on a removed (zero-precision) sensor")
    A_cl = plant.A + L @ plant.C_y
    BdS = plant.B_d @ plant.S_d
    DdS = plant.D_d @ plant.S_d
    noise_cols = L[:, support] / np.sqrt(precision.kappa_sq[support])[None, :]
    B_cl = np.hstack([BdS + L @ DdS, noise_cols])
    return ErrorSystem(A_cl=A_cl, B_cl=B_cl, C_z=plant.C_z.copy())


def restrict_sensors(plant: LtiPlant, support) -> LtiPlant:
    """Plant with only the given sensor rows retained (order preserved)."""
    idx = sorted(int(i) for i in support)
    if any(i < 0 or i >= plant.n_sensors for i in idx):
        raise ValueError("sensor index out of range")
    names = (tuple(plant.sensor_names[i] for i in idx)
             if plant.sensor_names is not None else None)
    return replace(
        plant,
        C_y=plant.C_y[idx, :],
        D_u=plant.D_u[idx, :],
        D_d=plant.D_d[idx, :],
        sensor_names=names,
    )


def check_detectability(plant: LtiPlant, rtol: float = DETECTABILITY_RTOL) -> None:
    """PBH test on the unstable eigenvalues of A; raises when it fails."""
    eigs = np.linalg.eigvals(plant.A)
    tol = rtol * max(np.linalg.norm(plant.A), 1.0)
    nx = plant.n_states
    for lam in eigs:
        if lam.real < 0.0:
            continue
        pencil = np.vstack([plant.A - lam * np.eye(nx), plant.C_y])
        smin = np.linalg.svd(pencil, compute_uv=False)[-1]
        if smin <= tol:
            raise NotDetectableError(
                f"(A, C_y) not detectable: PBH pencil at eigenvalue {lam:.6g} "
                f"has smallest singular value {smin:.3e} <= {tol:.3e}")


def _matrix_from_json(obj, name):
    try:
        return np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"field {name!r} is not a numeric matrix") from exc


def load_plant(path) -> tuple[LtiPlant, NormWeights | None, dict]:
    """Load a plant (and optional weights) from a JSON model file.

    The format is a JSON object with row-major nested arrays for the
    matrices A, B_u, B_d, C_y, C_z, D_u, D_d, optional diagonal "S_d"
    (list of diagonal entries; defaults to identity), optional "states" /
    "sensors" name lists, an optional "weights" object with W_u, W_w, W_z,
    and an optional free-form "metadata" object.

    Detectability of (A, C_y) is checked on load.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed model file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError("model file must contain a JSON object")
    required = ["A", "B_u", "B_d", "C_y", "C_z", "D_u", "D_d"]
    missing = [k for k in required if k not in raw]
    if missing:
        raise ValueError(f"model file is missing fields: {missing}")
    mats = {k: _matrix_from_json(raw[k], k) for k in required}
    nd = mats["B_d"].shape[1]
    if "S_d" in raw:
        sd_diag = np.atleast_1d(np.asarray(raw["S_d"], dtype=float))
        if sd_diag.ndim != 1 or sd_diag.size != nd:
            raise ValueError("S_d must be a list of diagonal entries")
        S_d = np.diag(sd_diag)
    else:
        S_d = np.eye(nd)
    plant = LtiPlant(
        A=mats["A"], B_u=mats["B_u"], B_d=mats["B_d"], C_y=mats["C_y"],
        C_z=mats["C_z"], D_u=mats["D_u"], D_d=mats["D_d"], S_d=S_d,
        state_names=tuple(raw["states"]) if "states" in raw else None,
        sensor_names=tuple(raw["sensors"]) if "sensors" in raw else None,
    )
    check_detectability(plant)
    weights = None
    if "weights" in raw:
        wraw = raw["weights"]
        for k in ("W_u", "W_w", "W_z"):
            if k not in wraw:
                raise ValueError(f"weights object is missing {k!r}")
        weights = NormWeights(
            W_u=_matrix_from_json(wraw["W_u"], "W_u"),
            W_w=_matrix_from_json(wraw["W_w"], "W_w"),
            W_z=_matrix_from_json(wraw["W_z"], "W_z"),
        )
    return plant, weights, dict(raw.get("metadata", {}))


def f16_model_path():
    """Path of the bundled longitudinal F-16 model (trim at 1000 ft/s)."""
    return resources.files("sparse_observer").joinpath("data/f16_v1000.json")


def load_f16(normalized: bool = True):
    """Bundled F-16 model; normalized through its weights by default.

    Returns ``(plant, weights, metadata)``; ``plant`` already has the
    weights applied when ``normalized`` is true.
    """
    plant, weights, meta = load_plant(f16_model_path())
    if normalized and weights is not None:
        plant = apply_weights(plant, weights)
    return plant, weights, meta
