"""Reflective-surface geometry, steering vectors, and array factors.

Three element layouts are supported: a dual-polarized line array whose
elements alternate polarization along y, a dual-polarized planar array
whose rows alternate polarization, and a uni-polarized planar array.  The
power-domain array factor is the sum over polarizations of the squared
magnitude of the configuration / equivalent-response inner product; the
3GPP single-element gain pattern turns it into a radiation pattern.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

ULA_INTERLEAVED = "ula-interleaved"
UPA_ROW_INTERLEAVED = "upa-row-interleaved"
UPA_UNI_POLARIZED = "upa-uni-polarized"
LAYOUTS = (ULA_INTERLEAVED, UPA_ROW_INTERLEAVED, UPA_UNI_POLARIZED)


@dataclass(frozen=True)
class RisGeometry:
    """Element arrangement of the reflecting surface.

    n_y counts elements per row; n_z counts rows.  The line layout uses a
    single row (n_z = 1) with n_y even, holding both polarizations
    interleaved along y.  The row-interleaved planar layout requires n_z
    even so both polarizations get the same number of rows.
    """

    layout: str
    n_y: int
    n_z: int
    delta_y: float
    delta_z: float
    wavelength: float

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.n_y < 1 or self.n_z < 1:
            raise ValueError("element counts must be positive")
        if self.delta_y <= 0 or self.delta_z <= 0 or self.wavelength <= 0:
            raise ValueError("spacings and wavelength must be positive")
        if self.layout == ULA_INTERLEAVED:
            if self.n_z != 1:
                raise ValueError("line layout uses a single row (n_z = 1)")
            if self.n_y % 2 != 0:
                raise ValueError("line layout needs an even element count")
        if self.layout == UPA_ROW_INTERLEAVED and self.n_z % 2 != 0:
            raise ValueError("row-interleaved layout needs an even row count")

    @property
    def dual_polarized(self) -> bool:
        return self.layout != UPA_UNI_POLARIZED

    @property
    def per_pol_elements(self) -> int:
        if self.layout == UPA_UNI_POLARIZED:
            return self.n_y * self.n_z
        return self.n_y * self.n_z // 2

    @property
    def total_elements(self) -> int:
        return self.n_y * self.n_z

    @property
    def pol_shape(self) -> tuple[int, int]:
        """Shape of one polarization's configuration matrix (rows = y)."""
        if self.layout == ULA_INTERLEAVED:
            return (self.n_y // 2, 1)
        if self.layout == UPA_ROW_INTERLEAVED:
            return (self.n_y, self.n_z // 2)
        return (self.n_y, self.n_z)


@dataclass(frozen=True)
class Direction:
    """Azimuth/elevation pair, both within [-pi/2, pi/2]."""

    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        half = math.pi / 2 + 1e-12
        if not (-half <= self.azimuth <= half and -half <= self.elevation <= half):
            raise ValueError("direction angles must lie in [-pi/2, pi/2]")


def phase_shifts(geometry: RisGeometry, d: Direction) -> tuple[float, float]:
    """Inter-element phase shifts (psi_y, psi_z) for a plane wave from d."""
    k = 2 * np.pi / geometry.wavelength
    return (
        k * geometry.delta_y * np.sin(d.azimuth) * np.cos(d.elevation),
        k * geometry.delta_z * np.sin(d.elevation),
    )


def _steering_from_psis(geometry: RisGeometry, psi_y, psi_z, pol: str) -> np.ndarray:
    """Steering vectors from phase-shift variables; psi arrays broadcast.

    Returns shape (..., N) where N is the per-polarization element count.
    Kronecker ordering is z-major / y-minor so a column-major reshape of a
    configuration vector lines up rows with y.
    """
    psi_y = np.asarray(psi_y, dtype=float)
    psi_z = np.asarray(psi_z, dtype=float)
    if geometry.layout == ULA_INTERLEAVED:
        n = geometry.per_pol_elements
        base = np.exp(-1j * 2 * psi_y[..., None] * np.arange(n))
        if pol == "H":
            return base
        if pol == "V":
            return np.exp(-1j * psi_y)[..., None] * base
        raise ValueError(f"unknown polarization {pol!r}")
    if geometry.layout == UPA_ROW_INTERLEAVED:
        nzt = geometry.n_z // 2
        ay = np.exp(-1j * psi_y[..., None] * np.arange(geometry.n_y))
        az = np.exp(-1j * 2 * psi_z[..., None] * np.arange(nzt))
        out = (az[..., :, None] * ay[..., None, :]).reshape(*ay.shape[:-1], -1)
        if pol == "V":
            return out
        if pol == "H":
            return np.exp(-1j * psi_z)[..., None] * out
        raise ValueError(f"unknown polarization {pol!r}")
    # uni-polarized planar array: unit row stride, polarization ignored
    ay = np.exp(-1j * psi_y[..., None] * np.arange(geometry.n_y))
    az = np.exp(-1j * psi_z[..., None] * np.arange(geometry.n_z))
    return (az[..., :, None] * ay[..., None, :]).reshape(*ay.shape[:-1], -1)


def steering_vector(geometry: RisGeometry, d: Direction, pol: str = "V") -> np.ndarray:
    """Per-polarization array response for a direction (unit-magnitude entries)."""
    psi_y, psi_z = phase_shifts(geometry, d)
    return _steering_from_psis(geometry, psi_y, psi_z, pol)


def steering_matrix(geometry: RisGeometry, azimuths, elevations, pol: str = "V") -> np.ndarray:
    """Stacked steering vectors for arrays of directions; shape (len, N)."""
    az = np.asarray(azimuths, dtype=float)
    el = np.asarray(elevations, dtype=float)
    k = 2 * np.pi / geometry.wavelength
    psi_y = k * geometry.delta_y * np.sin(az) * np.cos(el)
    psi_z = k * geometry.delta_z * np.sin(el)
    return _steering_from_psis(geometry, psi_y, psi_z, pol)


def steering_from_phase_shifts(geometry: RisGeometry, psi_y, psi_z, pol: str = "V") -> np.ndarray:
    """Steering parameterized directly by (psi_y, psi_z); used for transform-domain checks."""
    return _steering_from_psis(geometry, psi_y, psi_z, pol)


def equivalent_response(geometry: RisGeometry, obs: Direction, incident: Direction,
                        pol: str = "V") -> np.ndarray:
    """Elementwise product of observation and incident steering vectors."""
    return steering_vector(geometry, obs, pol) * steering_vector(geometry, incident, pol)


def reshape_vec_to_matrix(phi, n_y: int) -> np.ndarray:
    """Column-major reshape: the first n_y entries form the first column."""
    phi = np.asarray(phi)
    if phi.ndim != 1 or phi.size == 0 or phi.size % n_y != 0:
        raise ValueError(f"vector of size {phi.size} not divisible into columns of {n_y}")
    return phi.reshape(n_y, phi.size // n_y, order="F")


def reshape_matrix_to_vec(mat) -> np.ndarray:
    """Inverse of :func:`reshape_vec_to_matrix`."""
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ValueError("expected a matrix")
    return mat.reshape(-1, order="F")


@dataclass(frozen=True)
class ConfigPair:
    """Unimodular phase configurations for the two polarizations."""

    phi_h: np.ndarray
    phi_v: np.ndarray

    def __post_init__(self):
        ph = np.asarray(self.phi_h, dtype=complex)
        pv = np.asarray(self.phi_v, dtype=complex)
        if ph.ndim != 1 or pv.ndim != 1 or ph.size != pv.size or ph.size == 0:
            raise ValueError("configurations must be equal-length nonempty vectors")
        for name, x in (("phi_h", ph), ("phi_v", pv)):
            dev = np.abs(np.abs(x) - 1.0).max()
            if dev > 1e-12:
                raise ValueError(f"{name} is not unimodular (deviation {dev:.3e})")
        object.__setattr__(self, "phi_h", ph)
        object.__setattr__(self, "phi_v", pv)

    @property
    def n(self) -> int:
        return self.phi_h.size

    def matrix_h(self, geometry: RisGeometry) -> np.ndarray:
        return reshape_vec_to_matrix(self.phi_h, geometry.pol_shape[0])

    def matrix_v(self, geometry: RisGeometry) -> np.ndarray:
        return reshape_vec_to_matrix(self.phi_v, geometry.pol_shape[0])

    @classmethod
    def from_matrices(cls, mat_h, mat_v) -> "ConfigPair":
        return cls(reshape_matrix_to_vec(mat_h), reshape_matrix_to_vec(mat_v))

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "h_phases_rad": np.mod(np.angle(self.phi_h), 2 * np.pi).tolist(),
            "v_phases_rad": np.mod(np.angle(self.phi_v), 2 * np.pi).tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ConfigPair":
        return cls(
            np.exp(1j * np.asarray(doc["h_phases_rad"], dtype=float)),
            np.exp(1j * np.asarray(doc["v_phases_rad"], dtype=float)),
        )


def _check_length(vec, geometry, name):
    if np.asarray(vec).shape[-1] != geometry.per_pol_elements:
        raise ValueError(
            f"{name} has {np.asarray(vec).shape[-1]} entries, geometry wants "
            f"{geometry.per_pol_elements}")


def array_factor_effective_parts(phi_hat_h, phi_hat_v, geometry: RisGeometry,
                                 azimuths, elevations):
    """Per-polarization power array factors of effective vectors over directions.

    The effective vector is whatever multiplies the observation steering:
    h_p * phi_p in the arbitrary-channel model, phi_p * a_p(incident) in
    the line-of-sight model.
    """
    phi_hat_h = np.asarray(phi_hat_h, dtype=complex)
    phi_hat_v = np.asarray(phi_hat_v, dtype=complex)
    _check_length(phi_hat_h, geometry, "phi_hat_h")
    _check_length(phi_hat_v, geometry, "phi_hat_v")
    ah = steering_matrix(geometry, azimuths, elevations, "H")
    av = steering_matrix(geometry, azimuths, elevations, "V")
    af_h = np.abs(ah @ phi_hat_h) ** 2
    af_v = np.abs(av @ phi_hat_v) ** 2
    return af_h, af_v


def array_factor_effective(phi_hat_h, phi_hat_v, geometry: RisGeometry,
                           obs: Direction) -> float:
    """Total power array factor of a pair of effective vectors at one direction."""
    af_h, af_v = array_factor_effective_parts(
        phi_hat_h, phi_hat_v, geometry, obs.azimuth, obs.elevation)
    return float(af_h + af_v)


def array_factor_los_parts(config: ConfigPair, geometry: RisGeometry,
                           incident: Direction, azimuths, elevations):
    """Per-polarization array factors for a line-of-sight backhaul."""
    _check_length(config.phi_h, geometry, "config")
    eh = config.phi_h * steering_vector(geometry, incident, "H")
    ev = config.phi_v * steering_vector(geometry, incident, "V")
    return array_factor_effective_parts(eh, ev, geometry, azimuths, elevations)


def array_factor_los(config: ConfigPair, geometry: RisGeometry, incident: Direction,
                     obs: Direction) -> float:
    """Total power array factor at one observation direction (LoS backhaul)."""
    af_h, af_v = array_factor_los_parts(
        config, geometry, incident, obs.azimuth, obs.elevation)
    return float(af_h + af_v)


def array_factor_uni(phi_hat, geometry: RisGeometry, azimuths, elevations) -> np.ndarray:
    """Power array factor of a uni-polarized surface (single configuration)."""
    phi_hat = np.asarray(phi_hat, dtype=complex)
    _check_length(phi_hat, geometry, "phi_hat")
    a = steering_matrix(geometry, azimuths, elevations)
    return np.abs(a @ phi_hat) ** 2


def user_specific_config(geometry: RisGeometry, incident: Direction,
                         target: Direction) -> ConfigPair:
    """Configuration steering the reflected beam at one target direction.

    Each polarization conjugates the phase of its equivalent response at
    the target, so the per-polarization inner product there equals N.
    """
    return ConfigPair(
        np.conj(equivalent_response(geometry, target, incident, "H")),
        np.conj(equivalent_response(geometry, target, incident, "V")),
    )


def element_gain_db(azimuth, elevation) -> np.ndarray | float:
    """3GPP single-element gain pattern in dBi (8 dBi peak at broadside)."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    half = np.pi / 2
    a = np.minimum(12.0 * (az / half) ** 2, 30.0)
    b = np.minimum(12.0 * (el / half) ** 2, 30.0)
    g = 8.0 - np.minimum(a + b, 30.0)
    return float(g) if g.ndim == 0 else g


def db10(x) -> np.ndarray | float:
    """Power ratio to decibels; zeros map to -inf without warnings."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(x)
    return float(out) if out.ndim == 0 else out


def angle_grid(n_azimuth: int = 181, n_elevation: int = 181):
    """Flattened uniform azimuth x elevation grid over [-pi/2, pi/2]."""
    az = np.linspace(-np.pi / 2, np.pi / 2, n_azimuth)
    el = np.linspace(-np.pi / 2, np.pi / 2, n_elevation)
    pp, tt = np.meshgrid(az, el, indexing="ij")
    return pp.ravel(), tt.ravel()


def pattern_grid(geometry: RisGeometry, azimuths, elevations, *, config: ConfigPair = None,
                 incident: Direction = None, effective=None) -> dict:
    """Array-factor and radiation-pattern table over a direction grid.

    Either a (config, incident) pair for the LoS model or an
    ``effective = (phi_hat_h, phi_hat_v)`` pair must be given.  Returns
    columns keyed like the CSV header; dB conversion happens here, at the
    output boundary.
    """
    azimuths = np.asarray(azimuths, dtype=float)
    elevations = np.asarray(elevations, dtype=float)
    if (config is None) == (effective is None):
        raise ValueError("give exactly one of config+incident or effective")
    if config is not None:
        if incident is None:
            raise ValueError("the LoS form needs the incident direction")
        af_h, af_v = array_factor_los_parts(config, geometry, incident, azimuths, elevations)
    else:
        af_h, af_v = array_factor_effective_parts(
            effective[0], effective[1], geometry, azimuths, elevations)
    total = af_h + af_v
    gain = element_gain_db(azimuths, elevations)
    return {
        "phi_rad": azimuths,
        "theta_rad": elevations,
        "af_h_db": db10(af_h),
        "af_v_db": db10(af_v),
        "af_total_db": db10(total),
        "pattern_db": db10(total) + gain,
    }


PATTERN_COLUMNS = ("phi_rad", "theta_rad", "af_h_db", "af_v_db", "af_total_db", "pattern_db")


def write_pattern_csv(path, table: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(PATTERN_COLUMNS)
        cols = [np.asarray(table[c]) for c in PATTERN_COLUMNS]
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])


def write_pattern_json(path, table: dict) -> None:
    doc = {c: [float(x) for x in np.asarray(table[c])] for c in PATTERN_COLUMNS}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True)
        f.write("\n")
