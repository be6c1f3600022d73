"""Stochastic coordinate refinement of phase configurations.

The main entry point finds a practically-complementary configuration pair
for arbitrary effective channels: it drives the summed-ACF sidepeak level
below a threshold set relative to the starting level, refining one phase
at a time with shrinking random increments.  The same refinement pass
maximizes grid power objectives (sum over users, minimum over an angular
grid), which back the comparison benchmarks.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, golay, surface
from .channel import ChannelRealization
from .rng import STREAM_OPTIMIZER, make_rng

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs of the refinement loop.

    epsilon_fraction sets the stop threshold as a fraction of the starting
    sidepeak level; alpha shrinks a coordinate's increment on a failed
    +/- trial pair; l1_max bounds outer sweeps and l2_max bounds trials
    per coordinate.
    """

    epsilon_fraction: float = 0.02
    alpha: float = 0.97
    l1_max: int = 1000
    l2_max: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.epsilon_fraction <= 0:
            raise ValueError("epsilon_fraction must be positive")
        if self.l1_max < 0 or self.l2_max < 1:
            raise ValueError("iteration caps out of range")


class PhaseState:
    """Phases, effective vectors, and the cached summed-ACF lag table.

    The effective vector is h * exp(j omega) with the two polarizations
    concatenated; each polarization reshapes column-major to ``shape``.
    The cache admits O(N) single-coordinate updates and can always be
    cross-checked against a from-scratch recomputation.
    """

    def __init__(self, h: np.ndarray, shape: tuple[int, int], omega: np.ndarray):
        h = np.asarray(h, dtype=complex)
        omega = np.asarray(omega, dtype=float)
        n1, n2 = shape
        if h.size != 2 * n1 * n2 or omega.size != h.size:
            raise ValueError("channel/phase sizes disagree with the pol shape")
        self.h = h
        self.shape = (n1, n2)
        self.omega = omega.copy()
        self.v = h * np.exp(1j * self.omega)
        self.rsum = np.empty((2 * n1 - 1) * (2 * n2 - 1), dtype=complex)
        self.rebuild_cache()

    @property
    def n_per_pol(self) -> int:
        return self.shape[0] * self.shape[1]

    def pol_matrix(self, pol: int) -> np.ndarray:
        npp = self.n_per_pol
        return self.v[pol * npp:(pol + 1) * npp].reshape(self.shape, order="F")

    def rebuild_cache(self) -> None:
        """Recompute the summed lag table by direct summation."""
        n1, n2 = self.shape
        npp = n1 * n2
        t_h = np.empty_like(self.rsum)
        t_v = np.empty_like(self.rsum)
        _kernels.acf_fill(np.ascontiguousarray(self.v[:npp]), n1, n2, t_h)
        _kernels.acf_fill(np.ascontiguousarray(self.v[npp:]), n1, n2, t_v)
        self.rsum[:] = t_h + t_v

    def sum_acf(self) -> golay.AcfTable2D:
        n1, n2 = self.shape
        return golay.AcfTable2D(self.rsum.reshape(2 * n1 - 1, 2 * n2 - 1).copy())

    def max_sidepeak(self) -> float:
        if self.rsum.size == 1:
            return 0.0
        m, _ = _kernels.table_max(self.rsum, *self.shape)
        return float(m)

    def utility(self) -> float:
        return -self.max_sidepeak()

    def apply_phase_update(self, n: int, new_phase: float) -> None:
        """Move one phase and update the cached table in O(N) work.

        The zero lag is analytically invariant under phase-only moves and
        is left bitwise untouched.
        """
        n1, n2 = self.shape
        npp = n1 * n2
        if not 0 <= n < 2 * npp:
            raise ValueError("coordinate out of range")
        pol, k = divmod(n, npp)
        k1, k2 = k % n1, k // n1
        old = self.v[n]
        new = self.h[n] * np.exp(1j * new_phase)
        d = new - old
        vmat = self.pol_matrix(pol)
        table = self.rsum.reshape(2 * n1 - 1, 2 * n2 - 1)
        center = table[n1 - 1, n2 - 1]
        table[n1 - 1 - k1:2 * n1 - 1 - k1, n2 - 1 - k2:2 * n2 - 1 - k2] += d * np.conj(vmat)
        table[k1:k1 + n1, k2:k2 + n2] += np.conj(d) * vmat[::-1, ::-1]
        table[n1 - 1, n2 - 1] = center
        self.omega[n] = new_phase
        self.v[n] = new

    def cache_deviation(self) -> float:
        """Max abs difference between the cache and a from-scratch table."""
        n1, n2 = self.shape
        npp = n1 * n2
        fresh = (golay.acf_2d(self.v[:npp].reshape(self.shape, order="F")).values +
                 golay.acf_2d(self.v[npp:].reshape(self.shape, order="F")).values)
        mask = np.ones_like(fresh, dtype=bool)
        mask[n1 - 1, n2 - 1] = False  # zero lag pinned, not drift-tracked
        diff = np.abs(self.rsum.reshape(fresh.shape) - fresh)
        return float(diff[mask].max()) if mask.any() else 0.0


def incremental_acf_update(state: PhaseState, n: int, new_phase: float) -> golay.AcfTable2D:
    """Update one coordinate's phase; returns the refreshed cached table."""
    state.apply_phase_update(n, new_phase)
    return state.sum_acf()


def utility_ula(phi_hat_h, phi_hat_v) -> float:
    """Sidepeak utility of effective line-layout vectors, by direct summation."""
    total = golay.acf_1d(phi_hat_h).values + golay.acf_1d(phi_hat_v).values
    n = np.asarray(phi_hat_h).size
    if n == 1:
        return 0.0
    return -float(np.abs(np.delete(total, n - 1)).max())


def utility_upa(mat_hat_h, mat_hat_v) -> float:
    """Sidepeak utility of effective planar-layout matrices, by direct summation."""
    th = golay.acf_2d(mat_hat_h)
    tv = golay.acf_2d(mat_hat_v)
    total = golay.AcfTable2D(th.values + tv.values)
    return -total.max_sidepeak()


@dataclass
class TracePoint:
    outer_iter: int
    utility: float
    epsilon: float


@dataclass
class EpsCompResult:
    config: surface.ConfigPair
    omega: np.ndarray
    trace: list[TracePoint]
    reason: str
    epsilon: float
    initial_utility: float
    final_utility: float


def _channel_vectors(channels) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(channels, ChannelRealization):
        return np.asarray(channels.h_h, dtype=complex), np.asarray(channels.h_v, dtype=complex)
    h_h, h_v = channels
    return np.asarray(h_h, dtype=complex), np.asarray(h_v, dtype=complex)


def epsilon_complementary(channels, geometry: surface.RisGeometry,
                          settings: OptimizerSettings) -> EpsCompResult:
    """Find a practically-complementary configuration pair for given channels.

    Starts from uniformly random phases; while the worst sidepeak of the
    summed effective ACF stays above epsilon (a fraction of its starting
    value) and sweeps remain, draws a fresh uniform increment vector and
    refines every coordinate in turn: try +increment, on strict worsening
    try -increment, restore and shrink the coordinate's increment when
    both worsen, keep anything not strictly worse, and give up on a
    coordinate after l2_max trials.  Trials never worsen the kept utility.
    """
    if not geometry.dual_polarized:
        raise ValueError("the complementary design needs a dual-polarized layout")
    h_h, h_v = _channel_vectors(channels)
    n = geometry.per_pol_elements
    if h_h.size != n or h_v.size != n:
        raise ValueError("channel vectors disagree with the geometry")
    if not np.any(h_h) or not np.any(h_v):
        raise ValueError("channel vectors must be nonzero")
    n1, n2 = geometry.pol_shape
    rng = make_rng(settings.rng_seed, STREAM_OPTIMIZER)
    omega0 = rng.uniform(0.0, TWO_PI, 2 * n)
    state = PhaseState(np.concatenate([h_h, h_v]), (n1, n2), omega0)

    m = state.max_sidepeak()
    m0 = m
    eps = settings.epsilon_fraction * m0
    trace = [TracePoint(0, -m0, eps)]
    if state.rsum.size > 1:
        _, hot = _kernels.table_max(state.rsum, n1, n2)
    else:
        hot = 0
    l1 = 0
    while m > eps and l1 < settings.l1_max:
        l1 += 1
        domega = rng.uniform(0.0, TWO_PI, 2 * n)
        state.rebuild_cache()  # reset any incremental drift each sweep
        m, hot = _kernels.table_max(state.rsum, n1, n2)
        m, hot = _kernels.acf_refine_pass(
            state.v, state.omega, state.h, domega, state.rsum, n1, n2,
            settings.l2_max, settings.alpha, m, hot)
        trace.append(TracePoint(l1, -m, eps))
    reason = "converged" if m <= eps else "iteration-capped"
    wrapped = np.mod(state.omega, TWO_PI)
    config = surface.ConfigPair(np.exp(1j * wrapped[:n]), np.exp(1j * wrapped[n:]))
    return EpsCompResult(config, wrapped, trace, reason, float(eps), -float(m0), -float(m))


@dataclass
class GridPowerObjective:
    """Power objective over a fixed set of directions.

    kind "max-sum" maximizes the weighted sum of per-direction powers
    (weights carry each user's link budget); kind "max-min" maximizes the
    worst per-direction power with unit weights.  ``steering`` holds the
    per-polarization equivalent responses, shape (n_pol, N, n_dir).
    """

    kind: str
    steering: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("max-sum", "max-min"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        self.steering = np.ascontiguousarray(self.steering, dtype=complex)
        if self.steering.ndim != 3 or self.steering.shape[2] == 0:
            raise ValueError("steering must be (n_pol, N, n_dir) and nonempty")
        g = self.steering.shape[2]
        if self.weights is None:
            self.weights = np.ones(g)
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.weights.shape != (g,):
            raise ValueError("weights must match the direction count")

    @property
    def mode(self) -> int:
        return 0 if self.kind == "max-sum" else 1

    def evaluate(self, v: np.ndarray) -> float:
        """Objective of a stacked effective vector (n_pol * N,)."""
        npol, npp, _ = self.steering.shape
        s = np.einsum("pkg,pk->pg", self.steering, v.reshape(npol, npp))
        power = np.abs(s) ** 2
        total = power.sum(axis=0)
        if self.mode == 0:
            return float(self.weights @ total)
        return float(total.min())


def objective_max_sum(v, steering, weights) -> float:
    """Weighted sum of per-direction powers; independent reference path."""
    obj = GridPowerObjective("max-sum", steering, weights)
    return obj.evaluate(np.asarray(v, dtype=complex))


def objective_max_min_grid(v, steering) -> float:
    """Minimum per-direction power; independent reference path."""
    obj = GridPowerObjective("max-min", steering)
    return obj.evaluate(np.asarray(v, dtype=complex))


@dataclass
class GridRefineResult:
    phases: np.ndarray
    effective: np.ndarray
    trace: list[TracePoint]
    reason: str
    initial_objective: float
    final_objective: float
    configs: list[np.ndarray] = field(default_factory=list)


def maximize_grid_objective(h, objective: GridPowerObjective,
                            settings: OptimizerSettings,
                            stall_rel: float = 1e-6) -> GridRefineResult:
    """Coordinate-refine a power objective with the same trial rule.

    No epsilon target exists for these objectives, so the outer loop stops
    when a full sweep improves the objective by less than ``stall_rel``
    relative, or at the sweep cap.
    """
    h = np.asarray(h, dtype=complex)
    npol, npp, g = objective.steering.shape
    if h.size != npol * npp:
        raise ValueError("channel vector disagrees with the steering shape")
    if not np.any(h):
        raise ValueError("channel vector must be nonzero")
    rng = make_rng(settings.rng_seed, STREAM_OPTIMIZER)
    omega = rng.uniform(0.0, TWO_PI, h.size)
    v = h * np.exp(1j * omega)

    def fresh_sums():
        return np.ascontiguousarray(
            np.einsum("pkg,pk->pg", objective.steering, v.reshape(npol, npp)))

    s = fresh_sums()
    f = _kernels.grid_objective(s, objective.weights, objective.mode)
    f0 = f
    trace = [TracePoint(0, float(f), np.nan)]
    reason = "iteration-capped"
    for l1 in range(1, settings.l1_max + 1):
        domega = rng.uniform(0.0, TWO_PI, h.size)
        s = fresh_sums()
        f_prev = _kernels.grid_objective(s, objective.weights, objective.mode)
        f = _kernels.grid_refine_pass(
            v, omega, h, domega, s, objective.steering, objective.weights,
            objective.mode, settings.l2_max, settings.alpha, f_prev)
        trace.append(TracePoint(l1, float(f), np.nan))
        if f - f_prev < stall_rel * max(abs(f_prev), 1e-300):
            reason = "stalled"
            break
    wrapped = np.mod(omega, TWO_PI)
    configs = [np.exp(1j * wrapped[p * npp:(p + 1) * npp]) for p in range(npol)]
    return GridRefineResult(wrapped, v.copy(), trace, reason, float(f0), float(f), configs)


def write_trace_csv(path, trace: list[TracePoint]) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["outer_iter", "utility", "epsilon"])
        for p in trace:
            w.writerow([p.outer_iter, repr(float(p.utility)), repr(float(p.epsilon))])
