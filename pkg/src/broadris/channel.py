"""Transmitter-side models and effective reflecting-surface channels.

Covers the base-station line array response, the rank-1 line-of-sight
backhaul, correlated Rician fading with a Gaussian local-scattering
spatial correlation model (Gauss-Hermite quadrature), transmit
beamforming, and the per-polarization effective channel vectors that the
configuration multiplies elementwise.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermite

from . import surface
from .rng import STREAM_CHANNEL_H, STREAM_CHANNEL_UNI, STREAM_CHANNEL_V, make_rng

EIG_FLOOR = -1e-10


@dataclass(frozen=True)
class BsGeometry:
    """Transmit line array: antennas per polarization and their spacing."""

    m: int
    delta_b: float
    wavelength: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("antenna count must be positive")
        if self.delta_b <= 0 or self.wavelength <= 0:
            raise ValueError("spacing and wavelength must be positive")


@dataclass(frozen=True)
class ScenarioAngles:
    """Departure angle at the transmitter, arrival angles at the surface."""

    aod: float
    aoa_azimuth: float
    aoa_elevation: float = 0.0

    def __post_init__(self):
        half = np.pi / 2 + 1e-12
        for v in (self.aod, self.aoa_azimuth, self.aoa_elevation):
            if not -half <= v <= half:
                raise ValueError("angles must lie in [-pi/2, pi/2]")


@dataclass(frozen=True)
class RicianParams:
    kappa: float
    asd: float
    rng_seed: int
    quadrature_order: int = 31

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("Rician factor must be nonnegative")
        if self.asd <= 0:
            raise ValueError("angular standard deviation must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """Effective per-polarization channel vectors and their provenance."""

    h_h: np.ndarray
    h_v: np.ndarray
    provenance: str

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "h_h": [[float(z.real), float(z.imag)] for z in self.h_h],
            "h_v": [[float(z.real), float(z.imag)] for z in self.h_v],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChannelRealization":
        h_h = np.array([complex(re, im) for re, im in doc["h_h"]])
        h_v = np.array([complex(re, im) for re, im in doc["h_v"]])
        return cls(h_h, h_v, doc.get("provenance", ""))

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, sort_keys=True)
            f.write("\n")

    @classmethod
    def load_json(cls, path) -> "ChannelRealization":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def bs_steering(bs: BsGeometry, aod: float) -> np.ndarray:
    """Transmit array response [1, e^{-j psi_B}, ..., e^{-j (M-1) psi_B}]."""
    psi_b = 2 * np.pi / bs.wavelength * bs.delta_b * np.sin(aod)
    return np.exp(-1j * psi_b * np.arange(bs.m))


def mrt_weights(bs: BsGeometry, aod: float) -> np.ndarray:
    """Matched-filter beamformer conj(b)/||b||."""
    b = bs_steering(bs, aod)
    return np.conj(b) / np.linalg.norm(b)


def backhaul_gain(angles: ScenarioAngles, use_element_gains: bool = True) -> float:
    """Amplitude factor sqrt(G_B(aod) * G_R(aoa)) from the element patterns."""
    if not use_element_gains:
        return 1.0
    g_b = surface.element_gain_db(angles.aod, 0.0)
    g_r = surface.element_gain_db(angles.aoa_azimuth, angles.aoa_elevation)
    return float(10 ** ((g_b + g_r) / 20))


def los_channel(geometry: surface.RisGeometry, bs: BsGeometry, angles: ScenarioAngles,
                pol: str = "V", use_element_gains: bool = True) -> np.ndarray:
    """Rank-1 free-space backhaul: sqrt(G_R G_B) a_p(aoa) b^T(aod)."""
    a = surface.steering_vector(
        geometry, surface.Direction(angles.aoa_azimuth, angles.aoa_elevation), pol)
    b = bs_steering(bs, angles.aod)
    return backhaul_gain(angles, use_element_gains) * np.outer(a, b)


def _hermite_nodes(asd: float, order: int):
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    x, w = roots_hermite(order)
    return np.sqrt(2.0) * asd * x, w / np.sqrt(np.pi)


def correlation_matrix_ula(geometry: surface.RisGeometry, aoa_azimuth: float,
                           asd: float, order: int = 31) -> np.ndarray:
    """Spatial correlation of one polarization's elements on the line layout.

    Entry (n, n') integrates exp(j k 2 dy (n - n') sin(aoa + eta)) against a
    zero-mean Gaussian with std ``asd``.  The quadrature is a positively
    weighted Gram sum, so the result is positive semidefinite at any order
    with an exactly unit diagonal.
    """
    if geometry.layout != surface.ULA_INTERLEAVED:
        raise ValueError("this correlation model is for the line layout")
    eta, w = _hermite_nodes(asd, order)
    n = geometry.per_pol_elements
    k = 2 * np.pi / geometry.wavelength
    lags = np.arange(-(n - 1), n)
    vals = np.exp(1j * k * 2 * geometry.delta_y *
                  np.sin(aoa_azimuth + eta)[None, :] * lags[:, None]) @ w
    idx = np.subtract.outer(np.arange(n), np.arange(n)) + n - 1
    return vals[idx]


def correlation_matrix_upa(geometry: surface.RisGeometry, aoa_azimuth: float,
                           aoa_elevation: float, asd: float, order: int = 31) -> np.ndarray:
    """Spatial correlation of one polarization's elements on a planar layout.

    Element n decomposes as (n_y, n_z) with n_y = mod(n-1, N_y) + 1 and
    n_z = ceil(n / N_y); same-polarization rows sit two physical rows apart
    on the row-interleaved layout and one row apart on the uni-polarized
    layout.  Double Gauss-Hermite over independent azimuth and elevation
    perturbations.
    """
    if geometry.layout == surface.ULA_INTERLEAVED:
        raise ValueError("use correlation_matrix_ula for the line layout")
    eta1, w1 = _hermite_nodes(asd, order)
    eta2, w2 = _hermite_nodes(asd, order)
    k = 2 * np.pi / geometry.wavelength
    n_y = geometry.n_y
    row_stride = 2 if geometry.layout == surface.UPA_ROW_INTERLEAVED else 1
    n_rows = geometry.pol_shape[1]
    dy_lags = np.arange(-(n_y - 1), n_y)
    dz_lags = np.arange(-(n_rows - 1), n_rows)
    # separable in the two eta integrals: y term depends on (eta1, eta2), z on eta2
    sin_az = np.sin(aoa_azimuth + eta1)
    cos_el = np.cos(aoa_elevation + eta2)
    sin_el = np.sin(aoa_elevation + eta2)
    y_phase = np.exp(1j * k * geometry.delta_y *
                     dy_lags[:, None, None] * sin_az[None, :, None] * cos_el[None, None, :])
    z_phase = np.exp(1j * k * row_stride * geometry.delta_z *
                     dz_lags[:, None] * sin_el[None, :])
    # vals[dy, dz] = sum_{i,j} w1_i w2_j y_phase[dy, i, j] z_phase[dz, j]
    yw = np.tensordot(y_phase, w1, axes=([1], [0]))  # contract eta1 -> (dy, eta2)
    vals = np.einsum("aj,bj,j->ab", yw, z_phase, w2)
    n = geometry.per_pol_elements
    elems = np.arange(n)
    ny_idx = elems % n_y
    nz_idx = elems // n_y
    dy = np.subtract.outer(ny_idx, ny_idx) + n_y - 1
    dz = np.subtract.outer(nz_idx, nz_idx) + n_rows - 1
    return vals[dy, dz]


def psd_clip(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose a Hermitian matrix and clip tiny negative eigenvalues.

    Eigenvalues below the quadrature noise floor raise; values in
    [floor, 0) clip to zero.  Returns (eigenvalues, eigenvectors).
    """
    matrix = np.asarray(matrix)
    if not np.allclose(matrix, matrix.conj().T, atol=1e-10):
        raise ValueError("correlation matrix must be Hermitian")
    evals, evecs = np.linalg.eigh(matrix)
    if evals.min() < EIG_FLOOR:
        raise ValueError(f"correlation matrix has negative eigenvalue {evals.min():.3e}")
    return np.clip(evals, 0.0, None), evecs


def rician_channel(geometry: surface.RisGeometry, bs: BsGeometry, angles: ScenarioAngles,
                   params: RicianParams, correlation: np.ndarray, pol: str = "V",
                   use_element_gains: bool = True) -> np.ndarray:
    """Correlated Rician backhaul draw, deterministic given params.rng_seed.

    The line-of-sight part is the rank-1 steering outer product; each
    diffuse column is colored by the Hermitian square root of the
    correlation matrix.  The element-gain amplitude multiplies the whole
    sum.  kappa may be inf (pure LoS limit).
    """
    evals, evecs = psd_clip(correlation)
    sqrt_r = (evecs * np.sqrt(evals)) @ evecs.conj().T
    a = surface.steering_vector(
        geometry, surface.Direction(angles.aoa_azimuth, angles.aoa_elevation), pol)
    b = bs_steering(bs, angles.aod)
    h_los = np.outer(a, b)
    if np.isinf(params.kappa):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los = np.sqrt(params.kappa / (params.kappa + 1))
        w_nlos = np.sqrt(1 / (params.kappa + 1))
    stream = {"H": STREAM_CHANNEL_H, "V": STREAM_CHANNEL_V, "U": STREAM_CHANNEL_UNI}[pol]
    rng = make_rng(params.rng_seed, stream)
    n = correlation.shape[0]
    if a.size != n:
        raise ValueError("correlation size disagrees with the steering length")
    iid = (rng.standard_normal((n, bs.m)) + 1j * rng.standard_normal((n, bs.m))) / np.sqrt(2)
    h_nlos = sqrt_r @ iid
    gain = backhaul_gain(angles, use_element_gains)
    return gain * (w_los * h_los + w_nlos * h_nlos)


def eigen_beamformer(h_matrix: np.ndarray) -> np.ndarray:
    """Unit-norm transmit vector maximizing ||H f||.

    Top eigenvector of H^H H, with the global phase fixed so the first
    entry of nonnegligible magnitude is real-positive (determinism under
    degenerate spectra).
    """
    h_matrix = np.asarray(h_matrix, dtype=complex)
    if h_matrix.ndim != 2 or not np.any(h_matrix):
        raise ValueError("channel matrix must be a nonzero 2D array")
    gram = h_matrix.conj().T @ h_matrix
    _, evecs = np.linalg.eigh(gram)
    f = evecs[:, -1]
    nz = np.flatnonzero(np.abs(f) > 1e-8 * np.abs(f).max())
    ref = f[nz[0]]
    f = f * (np.conj(ref) / abs(ref))
    return f / np.linalg.norm(f)


def effective_channel(h_matrix: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Surface-side vector h = H f after transmit beamforming."""
    h_matrix = np.asarray(h_matrix)
    f = np.asarray(f)
    if h_matrix.ndim != 2 or h_matrix.shape[1] != f.shape[0]:
        raise ValueError("dimension mismatch between channel and beamformer")
    return h_matrix @ f


def effective_realization(geometry: surface.RisGeometry, bs: BsGeometry,
                          angles: ScenarioAngles, *, kind: str = "los",
                          params: RicianParams = None,
                          use_element_gains: bool = True) -> ChannelRealization:
    """Build the per-polarization effective vectors for a scenario.

    kind "los" uses matched-filter transmit weights on the rank-1 channel;
    kind "rician" draws the fading channel (per-polarization independent
    streams) and applies eigen-beamforming.
    """
    if kind == "los":
        out = []
        for pol in ("H", "V"):
            h_mat = los_channel(geometry, bs, angles, pol, use_element_gains)
            out.append(effective_channel(h_mat, mrt_weights(bs, angles.aod)))
        return ChannelRealization(out[0], out[1], "LoS")
    if kind == "rician":
        if params is None:
            raise ValueError("Rician scenario needs RicianParams")
        if geometry.layout == surface.ULA_INTERLEAVED:
            corr = correlation_matrix_ula(
                geometry, angles.aoa_azimuth, params.asd, params.quadrature_order)
        else:
            corr = correlation_matrix_upa(
                geometry, angles.aoa_azimuth, angles.aoa_elevation, params.asd,
                params.quadrature_order)
        out = []
        for pol in ("H", "V"):
            h_mat = rician_channel(geometry, bs, angles, params, corr, pol, use_element_gains)
            out.append(effective_channel(h_mat, eigen_beamformer(h_mat)))
        return ChannelRealization(out[0], out[1], f"Rician(seed={params.rng_seed})")
    raise ValueError(f"unknown channel kind {kind!r}")
