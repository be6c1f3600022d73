"""Command-line front end.

Subcommands construct and verify complementary pairs, export pattern
grids, run the phase optimizer, evaluate spectral-efficiency reports, and
sweep transmit power.  A reproduce command replays checked-in scenario
configs.  All outputs are pure functions of the config file and flags;
exit codes: 0 success, 1 usage/config error, 2 verification failure,
3 optimizer hit its iteration cap.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import channel as chan
from . import evaluate, golay, optimizer, surface

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_VERIFY = 2
_EXIT_NOCONV = 3

_CHUNK_ROWS = 1024  # fixed so results never depend on the thread count


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(_EXIT_USAGE)


class ConfigError(ValueError):
    pass


_BOUNDS2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "seed": {"type": "integer"},
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "required": ["geometry", "bs", "angles", "channel"],
            "properties": {
                "geometry": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["layout", "n_y", "n_z", "delta_y", "delta_z", "wavelength"],
                    "properties": {
                        "layout": {"enum": list(surface.LAYOUTS)},
                        "n_y": {"type": "integer"},
                        "n_z": {"type": "integer"},
                        "delta_y": {"type": "number"},
                        "delta_z": {"type": "number"},
                        "wavelength": {"type": "number"},
                    },
                },
                "bs": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["m", "delta_b"],
                    "properties": {"m": {"type": "integer"}, "delta_b": {"type": "number"}},
                },
                "angles": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["aod_rad", "aoa_azimuth_rad"],
                    "properties": {
                        "aod_rad": {"type": "number"},
                        "aoa_azimuth_rad": {"type": "number"},
                        "aoa_elevation_rad": {"type": "number"},
                    },
                },
                "budget": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "p_t_dbm": {"type": "number"},
                        "sigma2_dbm": {"type": "number"},
                        "d_bs_ris_m": {"type": "number"},
                        "user_distance_m": _BOUNDS2,
                        "user_azimuth_rad": _BOUNDS2,
                        "user_elevation_rad": _BOUNDS2,
                    },
                },
                "channel": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["los", "rician"]},
                        "kappa": {"type": "number"},
                        "asd_rad": {"type": "number"},
                        "seed": {"type": "integer"},
                        "quadrature_order": {"type": "integer"},
                    },
                },
            },
        },
        "schemes": {"type": "array", "items": {"enum": list(evaluate.SCHEMES)}},
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon_fraction": {"type": "number"},
                "alpha": {"type": "number"},
                "l1_max": {"type": "integer"},
                "l2_max": {"type": "integer"},
            },
        },
        "users": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"count": {"type": "integer"}},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_azimuth": {"type": "integer"}, "n_elevation": {"type": "integer"}},
        },
        "maxmin_grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_azimuth": {"type": "integer"}, "n_elevation": {"type": "integer"}},
        },
        "target": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"azimuth_rad": {"type": "number"}, "elevation_rad": {"type": "number"}},
        },
        "pattern": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"source": {"enum": ["golay", "user-specific", "eps-comp"]}},
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"p_t_dbm": {"type": "array", "items": {"type": "number"}}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ConfigError(f"config schema violation: {e.message}") from e
    return doc


def _scenario_from_config(doc: dict, seed: int) -> evaluate.EvalScenario:
    sc = doc["scenario"]
    g = sc["geometry"]
    geometry = surface.RisGeometry(g["layout"], g["n_y"], g["n_z"],
                                   g["delta_y"], g["delta_z"], g["wavelength"])
    bs = chan.BsGeometry(sc["bs"]["m"], sc["bs"]["delta_b"], g["wavelength"])
    a = sc["angles"]
    angles = chan.ScenarioAngles(a["aod_rad"], a["aoa_azimuth_rad"],
                                 a.get("aoa_elevation_rad", 0.0))
    b = sc.get("budget", {})
    budget = evaluate.LinkBudget(
        p_t_dbm=b.get("p_t_dbm", 30.0),
        sigma2_dbm=b.get("sigma2_dbm", -110.0),
        d_bs_ris_m=b.get("d_bs_ris_m", 50.0),
        user_distance_m=tuple(b.get("user_distance_m", (50.0, 80.0))),
        user_azimuth_rad=tuple(b.get("user_azimuth_rad", (-np.pi / 3, np.pi / 3))),
        user_elevation_rad=tuple(b.get("user_elevation_rad", (-np.pi / 6, np.pi / 6))),
    )
    ch = sc["channel"]
    rician = None
    if ch["kind"] == "rician":
        if "seed" not in ch:
            raise ConfigError("rician channel needs an explicit scenario seed")
        rician = chan.RicianParams(ch.get("kappa", 3.0), ch.get("asd_rad", np.pi / 18),
                                   ch["seed"], ch.get("quadrature_order", 31))
    o = doc.get("optimizer", {})
    settings = optimizer.OptimizerSettings(
        epsilon_fraction=o.get("epsilon_fraction", 0.02),
        alpha=o.get("alpha", 0.97),
        l1_max=o.get("l1_max", 1000),
        l2_max=o.get("l2_max", 1000),
        rng_seed=seed,
    )
    mm = doc.get("maxmin_grid", {})
    t = doc.get("target", {})
    return evaluate.EvalScenario(
        geometry=geometry, bs=bs, angles=angles, budget=budget,
        channel_kind=ch["kind"], rician=rician,
        users_seed=seed, design_seed=seed, settings=settings,
        maxmin_grid=(mm.get("n_azimuth", 100), mm.get("n_elevation", 100)),
        user_specific_target=surface.Direction(
            t.get("azimuth_rad", np.pi / 6), t.get("elevation_rad", np.pi / 6)),
    )


def _resolve_seed(args, doc) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in doc:
        return doc["seed"]
    raise ConfigError("stochastic command needs --seed or a seed field in the config")


def _outdir(args, doc) -> Path:
    out = getattr(args, "out", None) or doc.get("output", {}).get("dir", ".")
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _chunked_parts(func, azimuths, elevations, threads: int):
    """Evaluate per-direction arrays in fixed-size chunks, optionally threaded.

    Chunk boundaries are independent of the thread count so the assembled
    floats are bitwise identical for any --threads value.
    """
    az = np.asarray(azimuths)
    el = np.asarray(elevations)
    chunks = [(az[i:i + _CHUNK_ROWS], el[i:i + _CHUNK_ROWS])
              for i in range(0, az.size, _CHUNK_ROWS)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda c: func(*c), chunks))
    else:
        parts = [func(*c) for c in chunks]
    return [np.concatenate([p[i] for p in parts]) for i in range(len(parts[0]))]


# ---------------------------------------------------------------- golay

def cmd_golay(args) -> int:
    if args.action == "construct":
        first = args.first_index
        second = args.second_index
        if first is None:
            first = 1 if args.seed_len == 8 else 0
        if second is None:
            second = 2 if args.seed_len == 8 else first
        try:
            p1 = golay.seed_pair(args.seed_len, first)
            p2 = golay.seed_pair(args.seed_len, second)
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return _EXIT_USAGE
        if args.method == "prop2-vertical":
            u, ut = golay.construct_array_pair_vertical(p1.a, p1.b, p2.a, p2.b)
        elif args.method == "prop2-horizontal":
            u, ut = golay.construct_array_pair_horizontal(p1.a, p1.b, p2.a, p2.b)
        else:
            print(f"error: unknown method {args.method}", file=sys.stderr)
            return _EXIT_USAGE
        check = golay.is_golay_pair_2d(u, ut)
        golay.save_pair_json(args.out, u, ut,
                             f"{args.method} from lengths {p1.length}/{p2.length}")
        print(f"wrote {u.shape[0]}x{u.shape[1]} pair to {args.out} "
              f"(max sidepeak {check.max_sidepeak:.3e})")
        return _EXIT_OK if check.is_pair else _EXIT_VERIFY
    if args.action == "verify":
        try:
            a, b, source = golay.load_pair_json(args.pair)
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
            print(f"error: cannot load pair: {e}", file=sys.stderr)
            return _EXIT_USAGE
        if a.ndim == 1:
            check = golay.is_golay_pair_1d(a, b, args.tol)
        else:
            check = golay.is_golay_pair_2d(a, b, args.tol)
        verdict = "PASS" if check.is_pair else "FAIL"
        print(f"{verdict}: max sidepeak {check.max_sidepeak:.6e} (source: {source or 'n/a'})")
        return _EXIT_OK if check.is_pair else _EXIT_VERIFY
    if args.action == "expand":
        try:
            a1, b1, _ = golay.load_pair_json(args.first)
            a2, b2, _ = golay.load_pair_json(args.second)
        except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
            print(f"error: cannot load pair: {e}", file=sys.stderr)
            return _EXIT_USAGE
        a1 = np.atleast_2d(a1).T if a1.ndim == 1 else a1
        b1 = np.atleast_2d(b1).T if b1.ndim == 1 else b1
        a2 = np.atleast_2d(a2).T if a2.ndim == 1 else a2
        b2 = np.atleast_2d(b2).T if b2.ndim == 1 else b2
        try:
            if args.method == "vertical":
                w, wt = golay.expand_array_pair_vertical(a1, b1, a2, b2)
            else:
                w, wt = golay.expand_array_pair_horizontal(a1, b1, a2, b2)
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return _EXIT_USAGE
        check = golay.is_golay_pair_2d(w, wt)
        golay.save_pair_json(args.out, w, wt, f"expanded {args.method}")
        print(f"wrote {w.shape[0]}x{w.shape[1]} pair to {args.out} "
              f"(max sidepeak {check.max_sidepeak:.3e})")
        return _EXIT_OK if check.is_pair else _EXIT_VERIFY
    print(f"error: unknown golay action {args.action}", file=sys.stderr)
    return _EXIT_USAGE


# ---------------------------------------------------------------- pattern

def cmd_pattern(args) -> int:
    doc = load_config(args.config)
    source = doc.get("pattern", {}).get("source", "golay")
    needs_seed = source == "eps-comp" or doc["scenario"]["channel"]["kind"] == "rician"
    seed = _resolve_seed(args, doc) if needs_seed else doc.get("seed", 0)
    scenario = _scenario_from_config(doc, seed)
    g = doc.get("grid", {})
    az, el = surface.angle_grid(g.get("n_azimuth", 181), g.get("n_elevation", 181))
    geometry = scenario.geometry
    exit_code = _EXIT_OK
    if source == "golay":
        config = evaluate.golay_config(geometry)
        parts = _chunked_parts(
            lambda a, e: surface.array_factor_los_parts(config, geometry, scenario.incident, a, e),
            az, el, args.threads)
    elif source == "user-specific":
        config = surface.user_specific_config(geometry, scenario.incident,
                                              scenario.user_specific_target)
        parts = _chunked_parts(
            lambda a, e: surface.array_factor_los_parts(config, geometry, scenario.incident, a, e),
            az, el, args.threads)
    else:  # eps-comp
        res = optimizer.epsilon_complementary(
            scenario.realization(), geometry, scenario.optimizer_settings("Proposed-EpsComp"))
        if res.reason != "converged":
            exit_code = _EXIT_NOCONV
        re = scenario.realization()
        eff_h = re.h_h * res.config.phi_h
        eff_v = re.h_v * res.config.phi_v
        parts = _chunked_parts(
            lambda a, e: surface.array_factor_effective_parts(eff_h, eff_v, geometry, a, e),
            az, el, args.threads)
    af_h, af_v = parts
    total = af_h + af_v
    table = {
        "phi_rad": az,
        "theta_rad": el,
        "af_h_db": surface.db10(af_h),
        "af_v_db": surface.db10(af_v),
        "af_total_db": surface.db10(total),
        "pattern_db": surface.db10(total) + surface.element_gain_db(az, el),
    }
    out = _outdir(args, doc)
    surface.write_pattern_csv(out / "pattern.csv", table)
    surface.write_pattern_json(out / "pattern.json", table)
    print(f"pattern over {az.size} directions -> {out / 'pattern.csv'} "
          f"(total AF {surface.db10(total.min()):.2f}..{surface.db10(total.max()):.2f} dB)")
    return exit_code


# ---------------------------------------------------------------- optimize

def cmd_optimize(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(args, doc)
    scenario = _scenario_from_config(doc, seed)
    if scenario.channel_kind == "rician":
        channels = scenario.realization()
    else:
        geo = scenario.geometry
        channels = (surface.steering_vector(geo, scenario.incident, "H"),
                    surface.steering_vector(geo, scenario.incident, "V"))
    res = optimizer.epsilon_complementary(
        channels, scenario.geometry, scenario.optimizer_settings("Proposed-EpsComp"))
    out = _outdir(args, doc)
    with open(out / "config_pair.json", "w", encoding="utf-8") as f:
        json.dump(res.config.to_dict(), f, sort_keys=True)
        f.write("\n")
    optimizer.write_trace_csv(out / "trace.csv", res.trace)
    _write_sum_acf_csv(out / "sum_acf.csv", res, scenario, channels)
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump({
            "reason": res.reason,
            "epsilon": res.epsilon,
            "initial_utility": res.initial_utility,
            "final_utility": res.final_utility,
            "outer_iterations": len(res.trace) - 1,
            "seed": seed,
        }, f, sort_keys=True)
        f.write("\n")
    print(f"{res.reason}: sidepeak {-res.initial_utility:.3f} -> {-res.final_utility:.3f} "
          f"(epsilon {res.epsilon:.3f}) in {len(res.trace) - 1} sweeps")
    return _EXIT_OK if res.reason == "converged" else _EXIT_NOCONV


def _write_sum_acf_csv(path, res, scenario, channels) -> None:
    if isinstance(channels, tuple):
        h_h, h_v = channels
    else:
        h_h, h_v = channels.h_h, channels.h_v
    n1, n2 = scenario.geometry.pol_shape
    mat_h = surface.reshape_vec_to_matrix(h_h * res.config.phi_h, n1)
    mat_v = surface.reshape_vec_to_matrix(h_v * res.config.phi_v, n1)
    total = golay.acf_2d(mat_h).values + golay.acf_2d(mat_v).values
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["xi1", "xi2", "re", "im", "abs"])
        for i1 in range(total.shape[0]):
            for i2 in range(total.shape[1]):
                z = total[i1, i2]
                w.writerow([i1 - (n1 - 1), i2 - (n2 - 1),
                            repr(z.real), repr(z.imag), repr(abs(z))])


# ---------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(args, doc)
    scenario = _scenario_from_config(doc, seed)
    schemes = doc.get("schemes")
    if not schemes:
        print("error: config lists no schemes", file=sys.stderr)
        return _EXIT_USAGE
    k = doc.get("users", {}).get("count", 1000)
    users = evaluate.sample_users(k, scenario.budget, seed)
    out = _outdir(args, doc)
    reports = {}
    for scheme in schemes:
        try:
            reports[scheme] = evaluate.run_scheme(scheme, scenario, users)
        except ValueError as e:
            print(f"error: {scheme}: {e}", file=sys.stderr)
            return _EXIT_USAGE
        slug = scheme.lower()
        reports[scheme].write_csv(out / f"report_{slug}.csv")
        reports[scheme].write_summary_json(out / f"summary_{slug}.json")
        print(f"{scheme}: min SE {reports[scheme].min_se:.4f} bps/Hz, "
              f"median {float(np.median(reports[scheme].se_bpshz)):.4f}")
    comparison = {"seed": seed, "schemes": {}}
    proposed = next((s for s in schemes if s.startswith("Proposed")), None)
    for scheme, rep in reports.items():
        entry = {"min_se": rep.min_se}
        if proposed and scheme != proposed:
            entry["fraction_proposed_better"] = evaluate.fraction_better(
                reports[proposed], rep)
        comparison["schemes"][scheme] = entry
    with open(out / "comparison.json", "w", encoding="utf-8") as f:
        json.dump(comparison, f, sort_keys=True)
        f.write("\n")
    return _EXIT_OK


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    doc = load_config(args.config)
    seed = _resolve_seed(args, doc)
    scenario = _scenario_from_config(doc, seed)
    schemes = doc.get("schemes")
    if not schemes:
        print("error: config lists no schemes", file=sys.stderr)
        return _EXIT_USAGE
    p_values = doc.get("sweep", {}).get("p_t_dbm", [20, 25, 30, 35, 40])
    k = doc.get("users", {}).get("count", 1000)
    users = evaluate.sample_users(k, scenario.budget, seed)
    configs = {}
    for scheme in schemes:
        try:
            configs[scheme] = evaluate.design_configuration(scheme, scenario, users)
        except ValueError as e:
            print(f"error: {scheme}: {e}", file=sys.stderr)
            return _EXIT_USAGE
    rows = evaluate.min_se_sweep(configs, p_values, scenario, users)
    out = _outdir(args, doc)
    evaluate.write_sweep_csv(out / "min_se_sweep.csv", rows)
    for r in rows:
        print(f"{r['scheme']:16s} P_T={r['p_t_dbm']:5.1f} dBm  min SE {r['min_se_bpshz']:.4f}")
    return _EXIT_OK


# ---------------------------------------------------------------- reproduce

def cmd_reproduce(args) -> int:
    name = f"fig{args.figure}.json"
    ref = resources.files("broadris.configs") / name
    if not ref.is_file():
        print(f"error: no packaged config for figure {args.figure}", file=sys.stderr)
        return _EXIT_USAGE
    with resources.as_file(ref) as path:
        cfg_path = str(path)
        doc = load_config(cfg_path)
        mode = {3: "pattern", 4: "pattern", 5: "optimize", 6: "optimize",
                7: "evaluate", 8: "evaluate", 9: "sweep"}[args.figure]
        sub = argparse.Namespace(config=cfg_path, seed=args.seed, out=args.out,
                                 threads=args.threads)
        print(f"reproducing figure {args.figure} via {mode}")
        return {"pattern": cmd_pattern, "optimize": cmd_optimize,
                "evaluate": cmd_evaluate, "sweep": cmd_sweep}[mode](sub)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="broadris", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("golay", help="construct/verify/expand complementary pairs")
    g.add_argument("action", choices=["construct", "verify", "expand"])
    g.add_argument("pair", nargs="?", help="pair file for verify")
    g.add_argument("--seed-len", type=int, default=8)
    g.add_argument("--first-index", type=int, default=None)
    g.add_argument("--second-index", type=int, default=None)
    g.add_argument("--method", default="prop2-vertical",
                   choices=["prop2-vertical", "prop2-horizontal", "vertical", "horizontal"])
    g.add_argument("--first", help="first array pair file (expand)")
    g.add_argument("--second", help="second array pair file (expand)")
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--out", default="pair.json")
    g.set_defaults(func=cmd_golay)

    for name, fn, needs_seed in (("pattern", cmd_pattern, False),
                                 ("optimize", cmd_optimize, True),
                                 ("evaluate", cmd_evaluate, True),
                                 ("sweep", cmd_sweep, True)):
        q = sub.add_parser(name)
        q.add_argument("--config", required=True)
        q.add_argument("--seed", type=int, default=None,
                       help="run seed (mandatory for stochastic commands unless the "
                            "config carries one)")
        q.add_argument("--out", default=None)
        q.add_argument("--threads", type=int, default=1)
        q.set_defaults(func=fn)

    r = sub.add_parser("reproduce", help="replay a packaged scenario config")
    r.add_argument("--figure", type=int, required=True, choices=[3, 4, 5, 6, 7, 8, 9])
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else _EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
