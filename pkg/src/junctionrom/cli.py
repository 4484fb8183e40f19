"""Command-line interface.

Subcommands cover the full workflow: ``generate`` builds a dataset of virtual
experiments, ``train`` fits regressors on it, ``evaluate`` writes the RMSE
report, ``simulate`` runs the junction network with a chosen closure, and
``sweep`` emits the pressure-difference curve data.  Report-producing
commands render matplotlib figures next to their CSV/JSON outputs.

Configuration comes from flags, optionally seeded by a JSON config file
(flags win).  Exit codes: 0 success, 2 configuration error, 3 missing or
mismatched artifacts, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .errors import (
    ConfigurationError,
    DatasetError,
    DegenerateDataError,
    FingerprintError,
    JunctionRomError,
    SolverError,
    TrainingError,
)
from .geometry import (
    BUILTIN_COHORTS,
    BifurcationGeometry,
    CohortSpec,
    FluidProperties,
    feature_vector,
    swap_outlets,
)
from .junctions import RRICoefficients, RRILaw, make_law
from .oracle import (
    DEFAULT_BC_RESISTANCE,
    DEFAULT_PERIOD,
    DEFAULT_TIME_STEP,
    OracleMode,
    inlet_waveform,
)
from .pipeline import (
    DEFAULT_COHORT_SIZES,
    ModelBundle,
    build_dataset,
    evaluate_rmse,
    load_dataset,
    run_figure_sweep,
    save_dataset,
    train_models,
)
from .regressors import REGRESSOR_KINDS, default_hyperparameters
from .solver import BoundaryCondition, solve_transient

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ARTIFACTS = 3
EXIT_NUMERICAL = 4

_CONFIG_KEYS = {
    "cohort",
    "cohort_file",
    "n_geometries",
    "oracle_mode",
    "noise_std",
    "dt",
    "period",
    "bc_resistance",
    "bc_distal_pressure",
    "four_point_steady",
    "seeds",
    "kinds",
    "modality",
    "fluid",
    "hyperparameters",
    "output_dir",
    "jobs",
}


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    with open(path) as handle:
        try:
            config = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise ConfigurationError("config file must hold a JSON object")
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(
            f"unknown config field(s): {', '.join(sorted(unknown))}"
        )
    return config


def _pick(flag_value, config: dict, key: str, default):
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _seed_from(config: dict, name: str, flag_value, default=0) -> int:
    if flag_value is not None:
        return int(flag_value)
    seeds = config.get("seeds", {})
    if not isinstance(seeds, dict):
        raise ConfigurationError("config field 'seeds' must be an object")
    value = seeds.get(name, default)
    if not isinstance(value, int):
        raise ConfigurationError(f"config field seeds.{name} must be an integer")
    return value


def _resolve_cohort(args, config: dict) -> CohortSpec:
    name = _pick(getattr(args, "cohort", None), config, "cohort", None)
    spec_file = _pick(getattr(args, "cohort_file", None), config, "cohort_file", None)
    if name is not None and spec_file is not None:
        raise ConfigurationError("give either a cohort name or a cohort file, not both")
    if spec_file is not None:
        if not os.path.exists(spec_file):
            raise ConfigurationError(f"cohort file not found: {spec_file}")
        return CohortSpec.from_json_file(spec_file)
    if name is None:
        raise ConfigurationError("a cohort is required (--cohort or --cohort-file)")
    if name not in BUILTIN_COHORTS:
        known = ", ".join(sorted(BUILTIN_COHORTS))
        raise ConfigurationError(f"unknown cohort {name!r}; choose one of: {known}")
    return BUILTIN_COHORTS[name]


def _resolve_fluid(config: dict) -> FluidProperties:
    fluid = config.get("fluid", {})
    if not isinstance(fluid, dict):
        raise ConfigurationError("config field 'fluid' must be an object")
    return FluidProperties(
        density=float(fluid.get("density", 1.06)),
        viscosity=float(fluid.get("viscosity", 0.04)),
    )


def _resolve_oracle(args, config: dict) -> OracleMode:
    mode = _pick(getattr(args, "oracle_mode", None), config, "oracle_mode", "pure_rri")
    noise = _pick(getattr(args, "noise_std", None), config, "noise_std", 0.0)
    return OracleMode(mode=mode, noise_std=float(noise))


def _resolve_out(args, config: dict) -> str:
    out = _pick(getattr(args, "out", None), config, "output_dir", None)
    if out is None:
        raise ConfigurationError("an output directory is required (--out)")
    os.makedirs(out, exist_ok=True)
    return out


def _parse_kinds(args, config: dict):
    raw = _pick(getattr(args, "kinds", None), config, "kinds", None)
    if raw is None:
        return REGRESSOR_KINDS
    if isinstance(raw, str):
        raw = [k.strip() for k in raw.split(",") if k.strip()]
    for kind in raw:
        if kind not in REGRESSOR_KINDS:
            raise ConfigurationError(
                f"unknown regressor kind {kind!r}; choose from: "
                + ", ".join(REGRESSOR_KINDS)
            )
    return tuple(raw)


def _parse_modalities(args, config: dict):
    value = _pick(getattr(args, "modality", None), config, "modality", "both")
    if value == "both":
        return ("standard", "to")
    if value in ("standard", "to"):
        return (value,)
    raise ConfigurationError(
        f"unknown modality {value!r}; choose standard, to, or both"
    )


# --- commands ------------------------------------------------------------------


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    cohort = _resolve_cohort(args, config)
    n = _pick(args.n, config, "n_geometries", DEFAULT_COHORT_SIZES.get(cohort.name))
    if n is None:
        raise ConfigurationError("--n is required for custom cohorts")
    dataset = build_dataset(
        cohort,
        int(n),
        oracle=_resolve_oracle(args, config),
        seed=_seed_from(config, "geometry", args.seed),
        fluid=_resolve_fluid(config),
        dt=float(_pick(args.dt, config, "dt", DEFAULT_TIME_STEP)),
        period=float(_pick(args.period, config, "period", DEFAULT_PERIOD)),
        bc_resistance=float(
            _pick(args.bc_resistance, config, "bc_resistance", DEFAULT_BC_RESISTANCE)
        ),
        bc_distal_pressure=float(
            _pick(args.bc_distal, config, "bc_distal_pressure", 0.0)
        ),
        four_point_steady=bool(
            _pick(args.four_point or None, config, "four_point_steady", False)
        ),
        jobs=int(_pick(args.jobs, config, "jobs", 1)),
    )
    out = _resolve_out(args, config)
    save_dataset(dataset, out, force=args.force)
    print(
        f"dataset {dataset.fingerprint}: {len(dataset.records)} records "
        f"({len(dataset.geometry_ids())} geometries, {len(dataset.failures)} failures) -> {out}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_config(args.config)
    dataset = load_dataset(args.dataset)
    hp_overrides = config.get("hyperparameters", {})
    if not isinstance(hp_overrides, dict):
        raise ConfigurationError("config field 'hyperparameters' must be an object")
    bundle = train_models(
        dataset,
        kinds=_parse_kinds(args, config),
        modalities=_parse_modalities(args, config),
        split_seed=_seed_from(config, "split", args.split_seed),
        train_seed=_seed_from(config, "training", args.train_seed),
        hyperparameters=default_hyperparameters(dataset.cohort_name, **hp_overrides),
    )
    out = _resolve_out(args, config)
    bundle.save(out, force=args.force)
    print(
        f"trained {len(bundle.models)} models on dataset {bundle.dataset_fingerprint} "
        f"({len(bundle.train_geometry_ids)} train / {len(bundle.test_geometry_ids)} test geometries) -> {out}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    dataset = load_dataset(args.dataset)
    bundle = ModelBundle.load(args.models)
    report = evaluate_rmse(bundle, dataset)
    out = _resolve_out(args, config)
    report.save(out, force=args.force)
    if not args.no_figures:
        from .figures import render_report_figure

        figures_dir = os.path.join(out, "figures")
        os.makedirs(figures_dir, exist_ok=True)
        render_report_figure(
            report, os.path.join(figures_dir, f"report_{report.cohort}.png")
        )
    best = min(
        (r for r in report.rows if r.regime == "steady"),
        key=lambda r: r.test_rmse_mmhg,
        default=None,
    )
    if best is not None:
        print(
            f"{report.cohort}: best steady test RMSE {best.test_rmse_mmhg:.4g} mmHg "
            f"({best.kind}), baseline {report.baseline_steady_test_rmse_mmhg:.4g} mmHg"
        )
    print(f"report -> {out}")
    return EXIT_OK


def _load_geometry_file(path: str):
    if not os.path.exists(path):
        raise ConfigurationError(f"geometry file not found: {path}")
    with open(path) as handle:
        data = json.load(handle)
    try:
        geom = BifurcationGeometry.from_dict(data["geometry"] if "geometry" in data else data)
    except KeyError as exc:
        raise ConfigurationError(f"geometry file is missing field {exc}")
    fluid_data = data.get("fluid", {}) if isinstance(data, dict) else {}
    fluid = FluidProperties(
        density=float(fluid_data.get("density", 1.06)),
        viscosity=float(fluid_data.get("viscosity", 0.04)),
    )
    return geom, fluid


def _laws_for_closure(args, geom, fluid):
    closure = args.closure
    swapped = swap_outlets(geom)
    if closure == "rri":
        if args.models is None:
            raise ConfigurationError("--models is required for the rri closure")
        bundle = ModelBundle.load(args.models)
        kind = args.kind or "gpr"
        if kind not in REGRESSOR_KINDS:
            raise ConfigurationError(f"unknown regressor kind {kind!r}")
        modality = args.modality or "standard"
        laws = []
        for outlet in (1, 2):
            features = feature_vector(geom, outlet)
            if modality == "standard":
                steady = bundle.model(kind, "steady_rr").predict(features)
                inductance = bundle.model(kind, "inductance").predict(features)
                coeffs = RRICoefficients(steady[0], steady[1], inductance[0])
            elif modality == "to":
                triple = bundle.model(kind, "transient_to").predict(features)
                coeffs = RRICoefficients(triple[0], triple[1], triple[2])
            else:
                raise ConfigurationError("--modality must be standard or to")
            laws.append(RRILaw(coeffs))
        return tuple(laws)
    return (
        make_law(closure, geom=geom, fluid=fluid),
        make_law(closure, geom=swapped, fluid=fluid),
    )


def cmd_simulate(args) -> int:
    geom, fluid = _load_geometry_file(args.geometry)
    laws = _laws_for_closure(args, geom, fluid)
    bc = BoundaryCondition(args.bc_resistance, args.bc_distal)
    q_max = args.q_max
    if args.constant:
        waveform = lambda t: q_max
    else:
        waveform = lambda t: inlet_waveform(t, q_max, args.period)
    total = geom.area_outlet_1 + geom.area_outlet_2
    series = solve_transient(
        laws,
        (bc, bc),
        waveform,
        duration=args.period,
        dt=args.dt,
        initial_split=(geom.area_outlet_1 / total, geom.area_outlet_2 / total),
    )
    out = args.out
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, "timeseries.csv")
    if os.path.exists(csv_path) and not args.force:
        raise ConfigurationError(f"{csv_path} already exists; pass --force to overwrite")
    series.to_csv(csv_path)
    if not args.no_figures:
        from .figures import render_timeseries_figure

        figures_dir = os.path.join(out, "figures")
        os.makedirs(figures_dir, exist_ok=True)
        render_timeseries_figure(series, os.path.join(figures_dir, "simulation.png"))
    print(f"simulated {len(series.times)} steps with {args.closure} closure -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    cohort = _resolve_cohort(args, config)
    radii = None
    if args.radii:
        radii = [float(v) for v in args.radii.split(",") if v.strip()]
        if len(radii) < 1:
            raise ConfigurationError("at least one sweep radius is required")
    bundle = ModelBundle.load(args.models) if args.models else None
    sweep = run_figure_sweep(
        cohort,
        radius_values=radii,
        oracle=_resolve_oracle(args, config),
        fluid=_resolve_fluid(config),
        bundle=bundle,
        dt=float(_pick(args.dt, config, "dt", DEFAULT_TIME_STEP)),
        period=float(_pick(args.period, config, "period", DEFAULT_PERIOD)),
        bc_resistance=float(
            _pick(args.bc_resistance, config, "bc_resistance", DEFAULT_BC_RESISTANCE)
        ),
    )
    out = _resolve_out(args, config)
    csv_path = os.path.join(out, "curves.csv")
    if os.path.exists(csv_path) and not args.force:
        raise ConfigurationError(f"{csv_path} already exists; pass --force to overwrite")
    sweep.to_csv(csv_path)
    if not args.no_figures:
        from .figures import render_sweep_figures

        render_sweep_figures(sweep, os.path.join(out, "figures"))
    print(
        f"swept {cohort.name} outlet radius over {sweep.radius_values} -> {out}"
    )
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="junctionrom",
        description="Reduced-order junction pressure-difference toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    cohort_names = sorted(BUILTIN_COHORTS)

    generate = sub.add_parser("generate", help="build a virtual-experiment dataset")
    generate.add_argument("--cohort", choices=cohort_names)
    generate.add_argument("--cohort-file", help="JSON cohort specification")
    generate.add_argument("--n", type=int, help="number of geometries")
    generate.add_argument("--seed", type=int, help="geometry sampling seed")
    generate.add_argument("--oracle-mode", choices=("pure_rri", "nonideal"))
    generate.add_argument("--noise-std", type=float, help="measurement noise, dyn/cm^2")
    generate.add_argument("--dt", type=float, help="transient time step, s")
    generate.add_argument("--period", type=float, help="transient pulse duration, s")
    generate.add_argument("--bc-resistance", type=float)
    generate.add_argument("--bc-distal", type=float)
    generate.add_argument("--four-point", action="store_true", default=False,
                          help="fit resistances from four steady points")
    generate.add_argument("--jobs", type=int, help="parallel geometry workers")
    add_common(generate)
    generate.set_defaults(func=cmd_generate)

    train_p = sub.add_parser("train", help="train regressors on a dataset")
    train_p.add_argument("--dataset", required=True, help="dataset directory")
    train_p.add_argument("--kinds", help="comma list of regressor kinds")
    train_p.add_argument("--modality", choices=("standard", "to", "both"))
    train_p.add_argument("--split-seed", type=int)
    train_p.add_argument("--train-seed", type=int)
    add_common(train_p)
    train_p.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("evaluate", help="write the RMSE report")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--models", required=True)
    evaluate.add_argument("--no-figures", action="store_true")
    add_common(evaluate)
    evaluate.set_defaults(func=cmd_evaluate)

    simulate = sub.add_parser("simulate", help="run the junction network")
    simulate.add_argument("--geometry", required=True, help="JSON geometry file")
    simulate.add_argument(
        "--closure", choices=("rri", "static", "total", "unified0d"), default="rri"
    )
    simulate.add_argument("--models", help="model directory (rri closure)")
    simulate.add_argument("--kind", help="regressor kind for the rri closure")
    simulate.add_argument("--modality", choices=("standard", "to"))
    simulate.add_argument("--q-max", type=float, required=True, help="peak inlet flow")
    simulate.add_argument("--period", type=float, default=DEFAULT_PERIOD)
    simulate.add_argument("--dt", type=float, default=DEFAULT_TIME_STEP)
    simulate.add_argument("--constant", action="store_true",
                          help="constant inlet flow instead of one pulse")
    simulate.add_argument("--bc-resistance", type=float, default=DEFAULT_BC_RESISTANCE)
    simulate.add_argument("--bc-distal", type=float, default=0.0)
    simulate.add_argument("--no-figures", action="store_true")
    simulate.add_argument("--out", required=True)
    simulate.add_argument("--force", action="store_true")
    simulate.set_defaults(func=cmd_simulate)

    sweep = sub.add_parser("sweep", help="emit pressure-difference curve data")
    sweep.add_argument("--cohort", choices=cohort_names)
    sweep.add_argument("--cohort-file")
    sweep.add_argument("--radii", help="comma list of outlet radii, cm")
    sweep.add_argument("--oracle-mode", choices=("pure_rri", "nonideal"))
    sweep.add_argument("--noise-std", type=float)
    sweep.add_argument("--models", help="optional model directory to overlay")
    sweep.add_argument("--dt", type=float)
    sweep.add_argument("--period", type=float)
    sweep.add_argument("--bc-resistance", type=float)
    sweep.add_argument("--no-figures", action="store_true")
    add_common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    return parser


_EXIT_CODES = (
    (FingerprintError, EXIT_ARTIFACTS),
    (ConfigurationError, EXIT_CONFIG),
    (SolverError, EXIT_NUMERICAL),
    (DegenerateDataError, EXIT_NUMERICAL),
    (TrainingError, EXIT_NUMERICAL),
    (DatasetError, EXIT_NUMERICAL),
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except JunctionRomError as exc:
        code = EXIT_NUMERICAL
        for klass, klass_code in _EXIT_CODES:
            if isinstance(exc, klass):
                code = klass_code
                break
        error = {
            "error": {
                "type": type(exc).__name__,
                "message": str(exc),
                "exit_code": code,
            }
        }
        print(json.dumps(error), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
