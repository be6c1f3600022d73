"""Aperiodic autocorrelation and complementary pair construction.

A complementary (Golay) pair is two unimodular sequences or 2D arrays whose
aperiodic autocorrelations sum to a delta at zero lag, equivalently whose
power spectra sum to a constant.  This module computes ACFs by direct
summation, verifies pairs, carries a catalog of known sequence pairs, and
builds array pairs out of sequence pairs (and bigger array pairs out of
smaller ones).
"""

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

UNIMODULAR_TOL = 1e-12


def _as_complex_vector(u, name="sequence"):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 1 or u.size == 0:
        raise ValueError(f"{name} must be a nonempty 1D sequence")
    if not (np.all(np.isfinite(u.real)) and np.all(np.isfinite(u.imag))):
        raise ValueError(f"{name} contains non-finite entries")
    return u


def _as_complex_matrix(U, name="array"):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.size == 0:
        raise ValueError(f"{name} must be a nonempty 2D array")
    if not (np.all(np.isfinite(U.real)) and np.all(np.isfinite(U.imag))):
        raise ValueError(f"{name} contains non-finite entries")
    return U


def _require_unimodular(x, name):
    dev = np.abs(np.abs(x) - 1.0).max()
    if dev > UNIMODULAR_TOL:
        raise ValueError(f"{name} is not unimodular (max |.|-1 deviation {dev:.3e})")


class AcfTable1D:
    """Aperiodic autocorrelation over lags -(N-1)..N-1, dense storage.

    ``table[xi]`` indexes by signed lag.  Zero lag equals the sequence
    energy; the table is conjugate-symmetric.
    """

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 1 or values.size % 2 != 1:
            raise ValueError("ACF table must hold an odd number of lags")
        self.values = values
        self.n = (values.size + 1) // 2

    def __getitem__(self, xi: int) -> complex:
        if abs(xi) >= self.n:
            return 0.0 + 0.0j
        return self.values[xi + self.n - 1]

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-(self.n - 1), self.n)

    def max_sidepeak(self) -> float:
        mask = self.lags != 0
        if not mask.any():
            return 0.0
        return float(np.abs(self.values[mask]).max())


class AcfTable2D:
    """2D aperiodic autocorrelation over lags (-(N1-1)..N1-1, -(N2-1)..N2-1)."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] % 2 != 1 or values.shape[1] % 2 != 1:
            raise ValueError("2D ACF table must hold odd numbers of lags")
        self.values = values
        self.n1 = (values.shape[0] + 1) // 2
        self.n2 = (values.shape[1] + 1) // 2

    def __getitem__(self, key) -> complex:
        xi1, xi2 = key
        if abs(xi1) >= self.n1 or abs(xi2) >= self.n2:
            return 0.0 + 0.0j
        return self.values[xi1 + self.n1 - 1, xi2 + self.n2 - 1]

    def max_sidepeak(self) -> float:
        flat = np.abs(self.values).ravel().copy()
        flat[(self.n1 - 1) * self.values.shape[1] + self.n2 - 1] = 0.0
        return float(flat.max()) if flat.size else 0.0


def acf_1d(u) -> AcfTable1D:
    """Direct-summation aperiodic ACF of a sequence.

    R[xi] = sum_n u[n] * conj(u[n+xi]) with zero padding outside the
    support, so R[0] is the energy and R[-xi] = conj(R[xi]).
    """
    u = _as_complex_vector(u)
    n = u.size
    values = np.empty(2 * n - 1, dtype=complex)
    for xi in range(n):
        v = np.dot(u[: n - xi], np.conj(u[xi:]))
        values[n - 1 + xi] = v
        values[n - 1 - xi] = np.conj(v)
    return AcfTable1D(values)


def acf_2d(U) -> AcfTable2D:
    """Direct-summation 2D aperiodic ACF of a matrix.

    Four-quadrant lag support; R[0,0] is the total energy and
    R[-xi1,-xi2] = conj(R[xi1,xi2]).
    """
    U = _as_complex_matrix(U)
    n1, n2 = U.shape
    values = np.zeros((2 * n1 - 1, 2 * n2 - 1), dtype=complex)
    for xi1 in range(n1):
        for xi2 in range(-(n2 - 1), n2):
            a = U[: n1 - xi1, :]
            b = U[xi1:, :]
            if xi2 >= 0:
                v = np.sum(a[:, : n2 - xi2] * np.conj(b[:, xi2:]))
            else:
                v = np.sum(a[:, -xi2:] * np.conj(b[:, : n2 + xi2]))
            values[n1 - 1 + xi1, n2 - 1 + xi2] = v
            values[n1 - 1 - xi1, n2 - 1 - xi2] = np.conj(v)
    return AcfTable2D(values)


class GolayCheck(NamedTuple):
    is_pair: bool
    max_sidepeak: float


def is_golay_pair_1d(u, v, tol: float | None = None) -> GolayCheck:
    """Check the complementarity condition R_u + R_v = 2N * delta.

    Returns the verdict together with the worst sidepeak magnitude of the
    summed ACF.  ``tol`` defaults to 1e-10 scaled by the pair energy.
    """
    u = _as_complex_vector(u, "u")
    v = _as_complex_vector(v, "v")
    if u.size != v.size:
        raise ValueError(f"length mismatch: {u.size} vs {v.size}")
    _require_unimodular(u, "u")
    _require_unimodular(v, "v")
    if tol is None:
        tol = 1e-10 * u.size
    total = acf_1d(u).values + acf_1d(v).values
    n = u.size
    side = np.abs(np.delete(total, n - 1)).max() if n > 1 else 0.0
    zero_dev = abs(total[n - 1] - 2 * n)
    return GolayCheck(bool(side <= tol and zero_dev <= tol), float(side))


def is_golay_pair_2d(U, V, tol: float | None = None) -> GolayCheck:
    """2D analogue of :func:`is_golay_pair_1d` (sum to 2*N1*N2 * delta)."""
    U = _as_complex_matrix(U, "U")
    V = _as_complex_matrix(V, "V")
    if U.shape != V.shape:
        raise ValueError(f"shape mismatch: {U.shape} vs {V.shape}")
    _require_unimodular(U, "U")
    _require_unimodular(V, "V")
    n1, n2 = U.shape
    if tol is None:
        tol = 1e-10 * n1 * n2
    total = acf_2d(U).values + acf_2d(V).values
    center = total[n1 - 1, n2 - 1]
    flat = np.abs(total).ravel().copy()
    flat[(n1 - 1) * (2 * n2 - 1) + n2 - 1] = 0.0
    side = float(flat.max()) if flat.size > 1 else 0.0
    zero_dev = abs(center - 2 * n1 * n2)
    return GolayCheck(bool(side <= tol and zero_dev <= tol), side)


def exchange_matrix(L: int) -> np.ndarray:
    """L x L matrix with ones on the anti-diagonal."""
    return np.fliplr(np.eye(L))


@dataclass(frozen=True)
class SeedPair:
    """A verified complementary sequence pair from the built-in catalog."""

    length: int
    a: np.ndarray
    b: np.ndarray
    source: str


def _doubling(a, b):
    # (x, y) -> ([x y], [x -y]) preserves complementarity
    return np.concatenate([a, b]), np.concatenate([a, -b])


def seed_pairs() -> list[SeedPair]:
    """Catalog of known complementary sequence pairs (lengths 1..16).

    Contains the trivial pairs, binary pairs from recursive doubling, and
    two quaternary-phase length-8 pairs.  Every entry is re-verified at
    construction time; the catalog makes no completeness claim about which
    lengths admit pairs.
    """
    pi = np.pi
    entries: list[tuple[np.ndarray, np.ndarray, str]] = []
    one = np.ones(1, dtype=complex)
    entries.append((one, one.copy(), "trivial"))
    a, b = np.array([1, 1], dtype=complex), np.array([1, -1], dtype=complex)
    entries.append((a, b, "binary"))
    for _ in range(3):  # lengths 4, 8, 16
        a, b = _doubling(a, b)
        entries.append((a, b, "binary doubling"))
    entries.append((
        np.exp(1j * np.array([0, 0, 0, 0, 0, pi, pi, 0])),
        np.exp(1j * np.array([0, 0, pi, pi, 0, pi, 0, pi])),
        "catalog binary-8",
    ))
    entries.append((
        np.exp(1j * np.array([0, 0, 0, 0, pi / 2, -pi / 2, -pi / 2, pi / 2])),
        np.exp(1j * np.array([0, 0, pi, pi, pi / 2, -pi / 2, pi / 2, -pi / 2])),
        "catalog quaternary-8",
    ))
    out = []
    for a, b, source in entries:
        check = is_golay_pair_1d(a, b, tol=1e-10 * a.size)
        if not check.is_pair:
            raise AssertionError(f"catalog entry {source} failed verification")
        out.append(SeedPair(a.size, a, b, source))
    return out


def seed_pair(length: int, index: int = 0) -> SeedPair:
    """Fetch a catalog pair by length (index disambiguates same-length entries)."""
    matches = [p for p in seed_pairs() if p.length == length]
    if not matches:
        raise ValueError(f"no catalog pair of length {length}")
    if index >= len(matches):
        raise ValueError(f"only {len(matches)} pairs of length {length} in catalog")
    return matches[index]


def _verified_seq_pair(u, v, name):
    u = _as_complex_vector(u, name)
    v = _as_complex_vector(v, name)
    if not is_golay_pair_1d(u, v).is_pair:
        raise ValueError(f"input {name} is not a complementary sequence pair")
    return u, v


def construct_array_pair_vertical(u1, u1t, u2, u2t):
    """Build a 2L1 x L2 complementary array pair from two sequence pairs.

    U  = [ u1 u2^T        ]      Ut = [ u1 u2t^T       ]
         [ -u1t u2t^H E_L2 ]          [ u1t u2^H E_L2  ]
    """
    u1, u1t = _verified_seq_pair(u1, u1t, "(u1, u1t)")
    u2, u2t = _verified_seq_pair(u2, u2t, "(u2, u2t)")
    E = exchange_matrix(u2.size)
    U = np.vstack([np.outer(u1, u2), -np.outer(u1t, np.conj(u2t)) @ E])
    Ut = np.vstack([np.outer(u1, u2t), np.outer(u1t, np.conj(u2)) @ E])
    return U, Ut


def construct_array_pair_horizontal(u1, u1t, u2, u2t):
    """Row-wise variant of :func:`construct_array_pair_vertical` (L1 x 2L2)."""
    u1, u1t = _verified_seq_pair(u1, u1t, "(u1, u1t)")
    u2, u2t = _verified_seq_pair(u2, u2t, "(u2, u2t)")
    E = exchange_matrix(u2.size)
    U = np.hstack([np.outer(u1, u2), -np.outer(u1t, np.conj(u2t)) @ E])
    Ut = np.hstack([np.outer(u1, u2t), np.outer(u1t, np.conj(u2)) @ E])
    return U, Ut


def _verified_array_pair(U, V, name):
    U = _as_complex_matrix(U, name)
    V = _as_complex_matrix(V, name)
    if not is_golay_pair_2d(U, V).is_pair:
        raise ValueError(f"input {name} is not a complementary array pair")
    return U, V


def expand_array_pair_vertical(U1, U1t, U2, U2t):
    """Expand two array pairs (L1xJ1, L2xJ2) into a 2*L1*L2 x J1*J2 pair."""
    U1, U1t = _verified_array_pair(U1, U1t, "(U1, U1t)")
    U2, U2t = _verified_array_pair(U2, U2t, "(U2, U2t)")
    L2, J2 = U2.shape
    El, Ej = exchange_matrix(L2), exchange_matrix(J2)
    W = np.vstack([np.kron(U1, U2), -np.kron(U1t, El @ np.conj(U2t) @ Ej)])
    Wt = np.vstack([np.kron(U1, U2t), np.kron(U1t, El @ np.conj(U2) @ Ej)])
    return W, Wt


def expand_array_pair_horizontal(U1, U1t, U2, U2t):
    """Expand two array pairs into an L1*L2 x 2*J1*J2 pair (side by side)."""
    U1, U1t = _verified_array_pair(U1, U1t, "(U1, U1t)")
    U2, U2t = _verified_array_pair(U2, U2t, "(U2, U2t)")
    L2, J2 = U2.shape
    El, Ej = exchange_matrix(L2), exchange_matrix(J2)
    W = np.hstack([np.kron(U1, U2), -np.kron(U1t, El @ np.conj(U2t) @ Ej)])
    Wt = np.hstack([np.kron(U1, U2t), np.kron(U1t, El @ np.conj(U2) @ Ej)])
    return W, Wt


def psd_1d(u, psi) -> np.ndarray | float:
    """Power spectral density |sum_n u[n] exp(-j 2 pi psi (n-1))|^2.

    ``psi`` may be a scalar or an array of normalized spatial frequencies.
    """
    u = _as_complex_vector(u)
    psi = np.asarray(psi, dtype=float)
    phase = np.exp(-2j * np.pi * np.multiply.outer(psi, np.arange(u.size)))
    s = np.abs(phase @ u) ** 2
    return float(s) if s.ndim == 0 else s


def psd_sum_check(u, v, grid) -> float:
    """Max deviation of S_u + S_v from the flat level 2N over a psi grid."""
    u = _as_complex_vector(u, "u")
    v = _as_complex_vector(v, "v")
    if u.size != v.size:
        raise ValueError("length mismatch")
    total = psd_1d(u, grid) + psd_1d(v, grid)
    return float(np.abs(total - 2 * u.size).max())


def pair_to_dict(a, b, source: str = "") -> dict:
    """JSON-ready form of a pair; 1D pairs keyed by length, 2D by shape."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("pair members must share a shape")
    _require_unimodular(a, "a")
    _require_unimodular(b, "b")
    if a.ndim == 1:
        return {
            "length": int(a.size),
            "a_phases_rad": np.angle(a).tolist(),
            "b_phases_rad": np.angle(b).tolist(),
            "source": source,
        }
    if a.ndim == 2:
        return {
            "shape": [int(a.shape[0]), int(a.shape[1])],
            "a_phases_rad": np.angle(a).tolist(),
            "b_phases_rad": np.angle(b).tolist(),
            "source": source,
        }
    raise ValueError("pair must be 1D or 2D")


def pair_from_dict(doc: dict):
    """Inverse of :func:`pair_to_dict`; returns (a, b, source)."""
    a = np.exp(1j * np.asarray(doc["a_phases_rad"], dtype=float))
    b = np.exp(1j * np.asarray(doc["b_phases_rad"], dtype=float))
    if "length" in doc and (a.ndim != 1 or a.size != doc["length"]):
        raise ValueError("length field disagrees with phase lists")
    if "shape" in doc and (a.ndim != 2 or list(a.shape) != list(doc["shape"])):
        raise ValueError("shape field disagrees with phase lists")
    if a.shape != b.shape:
        raise ValueError("pair members must share a shape")
    return a, b, doc.get("source", "")


def save_pair_json(path, a, b, source: str = "") -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(pair_to_dict(a, b, source), f, indent=2, sort_keys=True)
        f.write("\n")


def load_pair_json(path):
    with open(path, encoding="utf-8") as f:
        return pair_from_dict(json.load(f))
