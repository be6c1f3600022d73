"""End-to-end link evaluation of broad-beam schemes.

Builds per-user SNR and spectral efficiency for a population of users
around the surface, under either a line-of-sight or a Rician backhaul,
for the proposed complementary designs and the comparison schemes
(sum-power and max-min benchmarks, a uni-polarized max-min arm, and
user-specific beamforming).  Produces CDF/min-SE reports and transmit
power sweeps.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import channel as chan
from . import golay, optimizer, surface
from .rng import STREAM_USERS, make_rng

SCHEMES = ("Proposed-Golay", "Proposed-EpsComp", "DP-MaxSum", "DP-MaxMin",
           "UP-MaxMin", "UserSpecific")
_ARM_SEED_OFFSET = {"Proposed-EpsComp": 0, "DP-MaxSum": 1, "DP-MaxMin": 2, "UP-MaxMin": 3}


@dataclass(frozen=True)
class LinkBudget:
    """Transmit/noise powers, link distances, and user placement bounds."""

    p_t_dbm: float = 30.0
    sigma2_dbm: float = -110.0
    d_bs_ris_m: float = 50.0
    user_distance_m: tuple[float, float] = (50.0, 80.0)
    user_azimuth_rad: tuple[float, float] = (-math.pi / 3, math.pi / 3)
    user_elevation_rad: tuple[float, float] = (-math.pi / 6, math.pi / 6)

    def __post_init__(self):
        if self.d_bs_ris_m <= 0 or self.user_distance_m[0] <= 0:
            raise ValueError("distances must be positive")
        if self.user_distance_m[0] > self.user_distance_m[1]:
            raise ValueError("distance bounds out of order")


@dataclass(frozen=True)
class UserSample:
    d: float
    direction: surface.Direction


def pathloss_db(d) -> np.ndarray | float:
    """Distance-dependent loss -37.5 - 22 log10(d / 1 m) in dB."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = -37.5 - 22.0 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def spectral_efficiency(snr) -> np.ndarray | float:
    """log2(1 + SNR) in bps/Hz."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("SNR must be nonnegative")
    out = np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def sample_users(k: int, budget: LinkBudget, seed: int) -> list[UserSample]:
    """k i.i.d. draws from the configured uniform placement distributions."""
    if k < 1:
        raise ValueError("need at least one user")
    rng = make_rng(seed, STREAM_USERS)
    d = rng.uniform(*budget.user_distance_m, k)
    az = rng.uniform(*budget.user_azimuth_rad, k)
    el = rng.uniform(*budget.user_elevation_rad, k)
    return [UserSample(float(d[i]), surface.Direction(float(az[i]), float(el[i])))
            for i in range(k)]


def _users_arrays(users: list[UserSample]):
    d = np.array([u.d for u in users])
    az = np.array([u.direction.azimuth for u in users])
    el = np.array([u.direction.elevation for u in users])
    return d, az, el


def gamma_los(bs: chan.BsGeometry, angles: chan.ScenarioAngles, budget: LinkBudget,
              d, azimuth, elevation) -> np.ndarray:
    """Direction/distance factor multiplying the array factor (LoS backhaul).

    Carries the transmit-side array gain M, both path losses, the element
    gains at the fixed backhaul angles, and the user-side element gain,
    all over the noise power.
    """
    num_db = (10 * np.log10(bs.m) + budget.p_t_dbm - 30.0
              + pathloss_db(budget.d_bs_ris_m) + pathloss_db(d)
              + surface.element_gain_db(angles.aod, 0.0)
              + surface.element_gain_db(angles.aoa_azimuth, angles.aoa_elevation)
              + surface.element_gain_db(azimuth, elevation)
              - (budget.sigma2_dbm - 30.0))
    return 10 ** (np.asarray(num_db, dtype=float) / 10)


def gamma_arbitrary(budget: LinkBudget, d, azimuth, elevation) -> np.ndarray:
    """Direction/distance factor for the arbitrary-backhaul model.

    The transmit gain and backhaul element gains live inside the effective
    channel here, so only the powers, path losses, and the user-side
    element gain remain.
    """
    num_db = (budget.p_t_dbm - 30.0
              + pathloss_db(budget.d_bs_ris_m) + pathloss_db(d)
              + surface.element_gain_db(azimuth, elevation)
              - (budget.sigma2_dbm - 30.0))
    return 10 ** (np.asarray(num_db, dtype=float) / 10)


def snr_los(config: surface.ConfigPair, geometry: surface.RisGeometry,
            bs: chan.BsGeometry, angles: chan.ScenarioAngles, budget: LinkBudget,
            user: UserSample) -> float:
    """Received SNR of one user under the LoS backhaul model."""
    af = surface.array_factor_los(
        config, geometry, surface.Direction(angles.aoa_azimuth, angles.aoa_elevation),
        user.direction)
    g = gamma_los(bs, angles, budget, user.d, user.direction.azimuth,
                  user.direction.elevation)
    return float(g * af)


def snr_arbitrary(config: surface.ConfigPair, channels: chan.ChannelRealization,
                  geometry: surface.RisGeometry, budget: LinkBudget,
                  user: UserSample) -> float:
    """Received SNR of one user given effective backhaul vectors."""
    af = surface.array_factor_effective(
        channels.h_h * config.phi_h, channels.h_v * config.phi_v, geometry,
        user.direction)
    g = gamma_arbitrary(budget, user.d, user.direction.azimuth, user.direction.elevation)
    return float(g * af)


@dataclass(frozen=True)
class EvalScenario:
    """Everything a scheme needs: plant, budget, channel kind, and seeds."""

    geometry: surface.RisGeometry
    bs: chan.BsGeometry
    angles: chan.ScenarioAngles
    budget: LinkBudget = field(default_factory=LinkBudget)
    channel_kind: str = "los"
    rician: chan.RicianParams = None
    users_seed: int = 1
    design_seed: int = 1
    settings: optimizer.OptimizerSettings = None
    maxmin_grid: tuple[int, int] = (100, 100)
    user_specific_target: surface.Direction = surface.Direction(math.pi / 6, math.pi / 6)

    def __post_init__(self):
        if self.channel_kind not in ("los", "rician"):
            raise ValueError(f"unknown channel kind {self.channel_kind!r}")
        if self.channel_kind == "rician" and self.rician is None:
            raise ValueError("Rician scenario needs RicianParams")

    @property
    def incident(self) -> surface.Direction:
        return surface.Direction(self.angles.aoa_azimuth, self.angles.aoa_elevation)

    def optimizer_settings(self, scheme: str) -> optimizer.OptimizerSettings:
        base = self.settings or optimizer.OptimizerSettings()
        return replace(base, rng_seed=self.design_seed + _ARM_SEED_OFFSET[scheme])

    def realization(self) -> chan.ChannelRealization:
        """Frozen effective backhaul realization of the dual-polarized surface."""
        return _cached_realization(self)

    def uni_geometry(self) -> surface.RisGeometry:
        g = self.geometry
        if g.layout == surface.ULA_INTERLEAVED:
            return surface.RisGeometry(
                surface.UPA_UNI_POLARIZED, g.n_y, 1, g.delta_y, g.delta_z, g.wavelength)
        return surface.RisGeometry(
            surface.UPA_UNI_POLARIZED, g.n_y, g.n_z, g.delta_y, g.delta_z, g.wavelength)

    def uni_effective(self) -> np.ndarray:
        """Effective channel of the uni-polarized comparison surface."""
        return _cached_uni_effective(self)


@lru_cache(maxsize=8)
def _cached_realization(scenario: "EvalScenario") -> chan.ChannelRealization:
    return chan.effective_realization(
        scenario.geometry, scenario.bs, scenario.angles,
        kind=scenario.channel_kind, params=scenario.rician)


@lru_cache(maxsize=8)
def _cached_uni_effective(scenario: "EvalScenario") -> np.ndarray:
    geo = scenario.uni_geometry()
    if scenario.channel_kind == "los":
        a = surface.steering_vector(geo, scenario.incident)
        b = chan.bs_steering(scenario.bs, scenario.angles.aod)
        gain = chan.backhaul_gain(scenario.angles)
        h_mat = gain * np.outer(a, b)
        return chan.effective_channel(h_mat, chan.mrt_weights(scenario.bs, scenario.angles.aod))
    corr = chan.correlation_matrix_upa(
        geo, scenario.angles.aoa_azimuth, scenario.angles.aoa_elevation,
        scenario.rician.asd, scenario.rician.quadrature_order)
    h_mat = chan.rician_channel(geo, scenario.bs, scenario.angles, scenario.rician, corr, "U")
    return chan.effective_channel(h_mat, chan.eigen_beamformer(h_mat))


def golay_config(geometry: surface.RisGeometry) -> surface.ConfigPair:
    """Exact complementary configuration pair matched to the geometry.

    Builds the per-polarization matrix shape from catalog sequence pairs:
    a 2L1 x L2 stack for planar layouts, a plain sequence pair for the
    line layout (power-of-two lengths via doubling).
    """
    n1, n2 = geometry.pol_shape
    if n2 == 1:
        p = _pair_of_length(n1)
        return surface.ConfigPair(p[0], p[1])
    if n1 % 2 != 0:
        raise ValueError("planar construction needs an even per-pol row count")
    p1 = _pair_of_length(n1 // 2)
    p2 = _pair_of_length(n2)
    u, ut = golay.construct_array_pair_vertical(p1[0], p1[1], p2[0], p2[1])
    return surface.ConfigPair.from_matrices(u, ut)


def _pair_of_length(length: int):
    for p in golay.seed_pairs():
        if p.length == length:
            return p.a, p.b
    # power-of-two lengths beyond the catalog: recursive doubling
    if length >= 1 and length & (length - 1) == 0:
        a = np.ones(1, dtype=complex)
        b = np.ones(1, dtype=complex)
        while a.size < length:
            a, b = np.concatenate([a, b]), np.concatenate([a, -b])
        return a, b
    raise ValueError(f"no complementary pair of length {length} available")


def _design_grid(scenario: EvalScenario):
    n_az, n_el = scenario.maxmin_grid
    az = np.linspace(-np.pi / 2, np.pi / 2, n_az)
    el = np.linspace(-np.pi / 2, np.pi / 2, n_el)
    pp, tt = np.meshgrid(az, el, indexing="ij")
    return pp.ravel(), tt.ravel()


def _dual_design_inputs(scenario: EvalScenario, az, el):
    """(h stacked, steering (2, N, G)) so that power = sum_p |(h_p phi_p)^T a_p|^2."""
    geo = scenario.geometry
    sh = surface.steering_matrix(geo, az, el, "H").T
    sv = surface.steering_matrix(geo, az, el, "V").T
    steer = np.stack([sh, sv])
    if scenario.channel_kind == "los":
        inc = scenario.incident
        h = np.concatenate([surface.steering_vector(geo, inc, "H"),
                            surface.steering_vector(geo, inc, "V")])
    else:
        re = scenario.realization()
        h = np.concatenate([re.h_h, re.h_v])
    return h, steer


def _uni_design_inputs(scenario: EvalScenario, az, el):
    geo = scenario.uni_geometry()
    steer = surface.steering_matrix(geo, az, el).T[None, :, :]
    if scenario.channel_kind == "los":
        h = surface.steering_vector(geo, scenario.incident)
    else:
        h = scenario.uni_effective()
    return h, steer


def design_configuration(scheme: str, scenario: EvalScenario, users: list[UserSample]):
    """Produce the scheme's configuration (ConfigPair or uni-pol vector)."""
    geo = scenario.geometry
    if scheme == "Proposed-Golay":
        if scenario.channel_kind != "los":
            raise ValueError("the exact complementary design needs a LoS backhaul")
        return golay_config(geo)
    if scheme == "UserSpecific":
        if scenario.channel_kind != "los":
            raise ValueError("user-specific steering is defined for the LoS scenario")
        return surface.user_specific_config(geo, scenario.incident,
                                            scenario.user_specific_target)
    if scheme == "Proposed-EpsComp":
        res = optimizer.epsilon_complementary(
            scenario.realization(), geo, scenario.optimizer_settings(scheme))
        return res.config
    if scheme == "DP-MaxSum":
        if not users:
            raise ValueError("the sum-power design needs the user set")
        d, az, el = _users_arrays(users)
        if scenario.channel_kind == "los":
            w = gamma_los(scenario.bs, scenario.angles, scenario.budget, d, az, el)
        else:
            w = gamma_arbitrary(scenario.budget, d, az, el)
        h, steer = _dual_design_inputs(scenario, az, el)
        obj = optimizer.GridPowerObjective("max-sum", steer, w)
        res = optimizer.maximize_grid_objective(h, obj, scenario.optimizer_settings(scheme))
        return surface.ConfigPair(res.configs[0], res.configs[1])
    if scheme == "DP-MaxMin":
        az, el = _design_grid(scenario)
        h, steer = _dual_design_inputs(scenario, az, el)
        obj = optimizer.GridPowerObjective("max-min", steer)
        res = optimizer.maximize_grid_objective(h, obj, scenario.optimizer_settings(scheme))
        return surface.ConfigPair(res.configs[0], res.configs[1])
    if scheme == "UP-MaxMin":
        az, el = _design_grid(scenario)
        h, steer = _uni_design_inputs(scenario, az, el)
        obj = optimizer.GridPowerObjective("max-min", steer)
        res = optimizer.maximize_grid_objective(h, obj, scenario.optimizer_settings(scheme))
        return res.configs[0]
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class SeReport:
    """Per-user spectral efficiencies of one scheme plus summary statistics."""

    scheme: str
    seed: int
    d_m: np.ndarray
    azimuth_rad: np.ndarray
    elevation_rad: np.ndarray
    snr_linear: np.ndarray
    se_bpshz: np.ndarray

    @property
    def min_se(self) -> float:
        return float(self.se_bpshz.min())

    def cdf_points(self) -> list[list[float]]:
        """Empirical CDF as right-continuous steps [[se, p], ...]."""
        se = np.sort(self.se_bpshz)
        k = se.size
        return [[float(se[i]), float((i + 1) / k)] for i in range(k)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["user_id", "d_m", "phi_rad", "theta_rad", "snr_linear", "se_bpshz"])
            for i in range(self.se_bpshz.size):
                w.writerow([i, repr(float(self.d_m[i])), repr(float(self.azimuth_rad[i])),
                            repr(float(self.elevation_rad[i])),
                            repr(float(self.snr_linear[i])), repr(float(self.se_bpshz[i]))])

    def summary_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "seed": int(self.seed),
            "min_se": self.min_se,
            "cdf": self.cdf_points(),
        }

    def write_summary_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.summary_dict(), f, sort_keys=True)
            f.write("\n")


def _user_array_factors(scheme: str, config, scenario: EvalScenario, az, el):
    geo = scenario.geometry
    if scheme == "UP-MaxMin":
        ugeo = scenario.uni_geometry()
        h = scenario.uni_effective()
        return surface.array_factor_uni(h * config, ugeo, az, el)
    if scenario.channel_kind == "los":
        inc = scenario.incident
        af_h, af_v = surface.array_factor_los_parts(config, geo, inc, az, el)
        return af_h + af_v
    re = scenario.realization()
    af_h, af_v = surface.array_factor_effective_parts(
        re.h_h * config.phi_h, re.h_v * config.phi_v, geo, az, el)
    return af_h + af_v


def _user_snrs(scheme: str, config, scenario: EvalScenario, users: list[UserSample]):
    d, az, el = _users_arrays(users)
    af = _user_array_factors(scheme, config, scenario, az, el)
    if scenario.channel_kind == "los":
        g = gamma_los(scenario.bs, scenario.angles, scenario.budget, d, az, el)
    else:
        g = gamma_arbitrary(scenario.budget, d, az, el)
    return g * af


def run_scheme(scheme: str, scenario: EvalScenario, users: list[UserSample],
               config=None) -> SeReport:
    """Design (or reuse) a scheme's configuration and evaluate every user."""
    if not users:
        raise ValueError("user set must be nonempty")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if config is None:
        config = design_configuration(scheme, scenario, users)
    snr = _user_snrs(scheme, config, scenario, users)
    d, az, el = _users_arrays(users)
    return SeReport(scheme, scenario.users_seed, d, az, el, snr, spectral_efficiency(snr))


def min_se_sweep(schemes_configs: dict, p_t_values_dbm, scenario: EvalScenario,
                 users: list[UserSample]) -> list[dict]:
    """Minimum SE per scheme per transmit power (configurations fixed).

    SNR is linear in transmit power, so each scheme's per-user SNRs are
    evaluated once at the scenario budget and rescaled.
    """
    rows = []
    base_p = scenario.budget.p_t_dbm
    for scheme, config in schemes_configs.items():
        snr0 = _user_snrs(scheme, config, scenario, users)
        for p in p_t_values_dbm:
            snr = snr0 * 10 ** ((p - base_p) / 10)
            rows.append({
                "scheme": scheme,
                "p_t_dbm": float(p),
                "min_se_bpshz": float(spectral_efficiency(snr).min()),
            })
    return rows


def write_sweep_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["scheme", "p_t_dbm", "min_se_bpshz"])
        for r in rows:
            w.writerow([r["scheme"], repr(r["p_t_dbm"]), repr(r["min_se_bpshz"])])


def fraction_better(a: SeReport, b: SeReport) -> float:
    """Fraction of users with strictly higher SE under scheme a than b."""
    if a.se_bpshz.size != b.se_bpshz.size:
        raise ValueError("reports cover different user sets")
    return float(np.mean(a.se_bpshz > b.se_bpshz))
