"""End-to-end orchestration: datasets, training, evaluation, figure sweeps.

A dataset is built per cohort by sampling geometries, running the virtual
experiments (two steady operating points at 50% and 100% of the sampled
inlet flow plus one transient pulse), and fitting both coefficient routes
per outlet.  Models are trained on a geometry-level 80/20 split and
evaluated as root-mean-squared error of the composed pressure difference,
reported in mmHg, against the recorded experiment data.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigurationError,
    DatasetError,
    FingerprintError,
    JunctionRomError,
)
from .fitting import (
    fit_inductance,
    fit_record,
    fit_steady,
    fit_transient_optimized,
)
from .geometry import (
    BifurcationGeometry,
    CohortSpec,
    FluidProperties,
    feature_vector,
    swap_outlets,
    to_mmhg,
)
from .junctions import RRICoefficients, dp_unified0d_poiseuille
from .oracle import (
    DEFAULT_BC_RESISTANCE,
    DEFAULT_PERIOD,
    DEFAULT_TIME_STEP,
    OracleMode,
    SteadySample,
    TransientTrace,
    run_steady,
    run_transient,
)
from .regressors import (
    REGRESSOR_KINDS,
    Hyperparameters,
    TraceSamples,
    TrainedRegressor,
    default_hyperparameters,
    load_model,
    split_dataset,
    train,
)
from .solver import BoundaryCondition

DATASET_FORMAT_VERSION = 1

# Cohort sizes matching the published experiment, and the small preset used
# for continuous integration.
DEFAULT_COHORT_SIZES = {"isoradial": 187, "pulmonary": 123, "brachiocephalic": 110}
CI_PRESET_SIZE = 30

# Fraction of geometries allowed to fail (solver or fitting) before the
# whole dataset is rejected.
MAX_FAILURE_FRACTION = 0.05

STEADY_FRACTIONS = (0.5, 1.0)
FOUR_POINT_FRACTIONS = (0.25, 0.5, 0.75, 1.0)

# Report modalities: "standard" composes the steady-resistance model with the
# inductance model; "to" uses the single transient-optimized model.
REPORT_MODALITIES = ("standard", "to")
MODEL_MODALITIES = {"standard": ("steady_rr", "inductance"), "to": ("transient_to",)}


@dataclass
class DatasetRecord:
    """One geometry-outlet pair: experiment data plus fitted coefficients."""

    geometry_id: int
    geometry: BifurcationGeometry
    outlet_index: int
    inlet_velocity: float
    q_inlet_peak: float
    steady_samples: List[SteadySample]
    steady_coefficients: Tuple[float, float]
    inductance: float
    to_coefficients: RRICoefficients
    to_residual_rms: float
    trace: Optional[TransientTrace] = None
    trace_file: Optional[str] = None

    @property
    def standard_coefficients(self) -> RRICoefficients:
        r_linear, r_quadratic = self.steady_coefficients
        return RRICoefficients(r_linear, r_quadratic, self.inductance)

    @property
    def features(self) -> np.ndarray:
        return feature_vector(self.geometry, self.outlet_index)

    def outlet_geometry(self) -> BifurcationGeometry:
        """Geometry with this record's outlet in the modeled position."""
        if self.outlet_index == 1:
            return self.geometry
        return swap_outlets(self.geometry)

    def to_dict(self) -> dict:
        return {
            "geometry_id": self.geometry_id,
            "geometry": self.geometry.to_dict(),
            "outlet_index": self.outlet_index,
            "inlet_velocity": self.inlet_velocity,
            "q_inlet_peak": self.q_inlet_peak,
            "steady_samples": [s.to_dict() for s in self.steady_samples],
            "steady_coefficients": list(self.steady_coefficients),
            "inductance": self.inductance,
            "to_coefficients": self.to_coefficients.to_dict(),
            "to_residual_rms": self.to_residual_rms,
            "trace_file": self.trace_file,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetRecord":
        return cls(
            geometry_id=int(data["geometry_id"]),
            geometry=BifurcationGeometry.from_dict(data["geometry"]),
            outlet_index=int(data["outlet_index"]),
            inlet_velocity=float(data["inlet_velocity"]),
            q_inlet_peak=float(data["q_inlet_peak"]),
            steady_samples=[SteadySample.from_dict(s) for s in data["steady_samples"]],
            steady_coefficients=tuple(float(v) for v in data["steady_coefficients"]),
            inductance=float(data["inductance"]),
            to_coefficients=RRICoefficients.from_dict(data["to_coefficients"]),
            to_residual_rms=float(data["to_residual_rms"]),
            trace_file=data.get("trace_file"),
        )


@dataclass
class GenerationFailure:
    geometry_id: int
    stage: str
    message: str

    def to_dict(self) -> dict:
        return {
            "geometry_id": self.geometry_id,
            "stage": self.stage,
            "message": self.message,
        }


@dataclass
class DatasetConfig:
    """Everything that determines a dataset bit for bit."""

    cohort: CohortSpec
    n_geometries: int
    oracle: OracleMode
    seed: int
    fluid: FluidProperties = FluidProperties()
    dt: float = DEFAULT_TIME_STEP
    period: float = DEFAULT_PERIOD
    bc_resistance: float = DEFAULT_BC_RESISTANCE
    bc_distal_pressure: float = 0.0
    four_point_steady: bool = False

    def to_dict(self) -> dict:
        return {
            "format_version": DATASET_FORMAT_VERSION,
            "cohort": self.cohort.to_dict(),
            "n_geometries": self.n_geometries,
            "oracle": self.oracle.to_dict(),
            "seed": self.seed,
            "fluid": {
                "density": self.fluid.density,
                "viscosity": self.fluid.viscosity,
            },
            "dt": self.dt,
            "period": self.period,
            "bc_resistance": self.bc_resistance,
            "bc_distal_pressure": self.bc_distal_pressure,
            "four_point_steady": self.four_point_steady,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetConfig":
        return cls(
            cohort=CohortSpec.from_dict(data["cohort"]),
            n_geometries=int(data["n_geometries"]),
            oracle=OracleMode.from_dict(data["oracle"]),
            seed=int(data["seed"]),
            fluid=FluidProperties(**data["fluid"]),
            dt=float(data["dt"]),
            period=float(data["period"]),
            bc_resistance=float(data["bc_resistance"]),
            bc_distal_pressure=float(data["bc_distal_pressure"]),
            four_point_steady=bool(data["four_point_steady"]),
        )

    @property
    def fingerprint(self) -> str:
        return fingerprint_of(self.to_dict())

    @property
    def bcs(self) -> Tuple[BoundaryCondition, BoundaryCondition]:
        bc = BoundaryCondition(self.bc_resistance, self.bc_distal_pressure)
        return (bc, bc)


def fingerprint_of(data: dict) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass
class Dataset:
    config: DatasetConfig
    records: List[DatasetRecord]
    failures: List[GenerationFailure] = field(default_factory=list)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint

    @property
    def cohort_name(self) -> str:
        return self.config.cohort.name

    def geometry_ids(self) -> List[int]:
        seen: List[int] = []
        for record in self.records:
            if record.geometry_id not in seen:
                seen.append(record.geometry_id)
        return seen


def _geometry_seeds(seed: int, geometry_id: int, n_streams: int = 8) -> np.ndarray:
    # One child stream per virtual experiment so results do not depend on
    # execution order or the number of worker processes.
    return np.random.SeedSequence([seed, geometry_id]).generate_state(n_streams)


def _build_geometry_records(config: DatasetConfig, geometry_id: int):
    from .geometry import sample_cohort_case

    seeds = _geometry_seeds(config.seed, geometry_id)
    case = sample_cohort_case(config.cohort, int(seeds[0]))
    geometry = case.geometry
    q_peak = case.q_inlet
    fractions = (
        FOUR_POINT_FRACTIONS if config.four_point_steady else STEADY_FRACTIONS
    )
    steady: Dict[float, tuple] = {}
    for i, fraction in enumerate(fractions):
        steady[fraction] = run_steady(
            geometry,
            config.fluid,
            fraction * q_peak,
            config.oracle,
            bcs=config.bcs,
            inlet_fraction=fraction,
            seed=int(seeds[1 + i]),
        )
    traces = run_transient(
        geometry,
        config.fluid,
        q_peak,
        period=config.period,
        dt=config.dt,
        mode=config.oracle,
        bcs=config.bcs,
        seed=int(seeds[7]),
    )
    records = []
    for outlet in (1, 2):
        samples = [steady[f][outlet - 1] for f in fractions]
        fitted = fit_record(
            geometry,
            outlet,
            samples,
            traces[outlet - 1],
            use_steady_least_squares=config.four_point_steady,
        )
        records.append(
            DatasetRecord(
                geometry_id=geometry_id,
                geometry=geometry,
                outlet_index=outlet,
                inlet_velocity=case.inlet_velocity,
                q_inlet_peak=q_peak,
                steady_samples=samples,
                steady_coefficients=fitted.steady_coefficients,
                inductance=fitted.inductance,
                to_coefficients=fitted.to_coefficients,
                to_residual_rms=fitted.residual_rms,
                trace=traces[outlet - 1],
            )
        )
    return records


def _build_one(args):
    config_dict, geometry_id = args
    config = DatasetConfig.from_dict(config_dict)
    try:
        return geometry_id, _build_geometry_records(config, geometry_id), None
    except JunctionRomError as exc:
        return geometry_id, None, f"{type(exc).__name__}: {exc}"


def build_dataset(
    cohort: CohortSpec,
    n_geometries: int,
    oracle: OracleMode = OracleMode(),
    seed: int = 0,
    fluid: FluidProperties = FluidProperties(),
    dt: float = DEFAULT_TIME_STEP,
    period: float = DEFAULT_PERIOD,
    bc_resistance: float = DEFAULT_BC_RESISTANCE,
    bc_distal_pressure: float = 0.0,
    four_point_steady: bool = False,
    jobs: int = 1,
) -> Dataset:
    """Sample geometries, run the virtual experiments, and fit every record.

    Per-geometry failures are recorded and skipped; the dataset is rejected
    outright when more than 5% of geometries fail.  Deterministic in the
    seed regardless of ``jobs``.
    """
    if n_geometries < 2:
        raise ConfigurationError("need at least two geometries")
    config = DatasetConfig(
        cohort=cohort,
        n_geometries=n_geometries,
        oracle=oracle,
        seed=seed,
        fluid=fluid,
        dt=dt,
        period=period,
        bc_resistance=bc_resistance,
        bc_distal_pressure=bc_distal_pressure,
        four_point_steady=four_point_steady,
    )
    tasks = [(config.to_dict(), gid) for gid in range(n_geometries)]
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_build_one, tasks))
    else:
        results = [_build_one(task) for task in tasks]
    records: List[DatasetRecord] = []
    failures: List[GenerationFailure] = []
    for geometry_id, geometry_records, error in sorted(results, key=lambda r: r[0]):
        if error is None:
            records.extend(geometry_records)
        else:
            failures.append(
                GenerationFailure(geometry_id=geometry_id, stage="experiment", message=error)
            )
    if len(failures) > MAX_FAILURE_FRACTION * n_geometries:
        raise DatasetError(
            f"{len(failures)}/{n_geometries} geometries failed "
            f"(limit {MAX_FAILURE_FRACTION:.0%}); first failure: "
            f"{failures[0].message}"
        )
    return Dataset(config=config, records=records, failures=failures)


# --- dataset persistence -----------------------------------------------------


def _trace_filename(record: DatasetRecord) -> str:
    return f"traces/geometry{record.geometry_id:04d}_outlet{record.outlet_index}.csv"


def _write_trace_csv(trace: TransientTrace, path: str) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "q", "q_dot", "dp"])
        for i in range(len(trace)):
            writer.writerow(
                [
                    repr(float(trace.times[i])),
                    repr(float(trace.q[i])),
                    repr(float(trace.q_dot[i])),
                    repr(float(trace.dp[i])),
                ]
            )


def _read_trace_csv(path: str, dt: float) -> TransientTrace:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    return TransientTrace(
        times=data[:, 0], q=data[:, 1], q_dot=data[:, 2], dp=data[:, 3], dt=dt
    )


def save_dataset(dataset: Dataset, out_dir: str, force: bool = False) -> None:
    """Write manifest.json, dataset.jsonl, and one trace CSV per record."""
    manifest_path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(manifest_path) and not force:
        raise ConfigurationError(
            f"{manifest_path} already exists; pass force=True to overwrite"
        )
    os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
    manifest = {
        "config": dataset.config.to_dict(),
        "fingerprint": dataset.fingerprint,
        "n_records": len(dataset.records),
        "n_geometries_built": len(dataset.geometry_ids()),
        "failures": [f.to_dict() for f in dataset.failures],
    }
    with open(manifest_path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    with open(os.path.join(out_dir, "dataset.jsonl"), "w") as handle:
        for record in dataset.records:
            record.trace_file = _trace_filename(record)
            _write_trace_csv(
                record.trace, os.path.join(out_dir, record.trace_file)
            )
            handle.write(json.dumps(record.to_dict(), sort_keys=True))
            handle.write("\n")


def load_dataset(in_dir: str) -> Dataset:
    manifest_path = os.path.join(in_dir, "manifest.json")
    if not os.path.exists(manifest_path):
        raise FingerprintError(f"no dataset manifest at {manifest_path}")
    with open(manifest_path) as handle:
        manifest = json.load(handle)
    config = DatasetConfig.from_dict(manifest["config"])
    if config.fingerprint != manifest["fingerprint"]:
        raise FingerprintError(
            "dataset manifest fingerprint does not match its configuration"
        )
    records = []
    with open(os.path.join(in_dir, "dataset.jsonl")) as handle:
        for line in handle:
            record = DatasetRecord.from_dict(json.loads(line))
            record.trace = _read_trace_csv(
                os.path.join(in_dir, record.trace_file), config.dt
            )
            records.append(record)
    failures = [
        GenerationFailure(f["geometry_id"], f["stage"], f["message"])
        for f in manifest.get("failures", [])
    ]
    return Dataset(config=config, records=records, failures=failures)


# --- training ----------------------------------------------------------------


def _targets_for(records: Sequence[DatasetRecord], model_modality: str) -> np.ndarray:
    if model_modality == "steady_rr":
        return np.array([list(r.steady_coefficients) for r in records])
    if model_modality == "inductance":
        return np.array([[r.inductance] for r in records])
    return np.array(
        [
            [
                r.to_coefficients.r_linear,
                r.to_coefficients.r_quadratic,
                r.to_coefficients.inductance,
            ]
            for r in records
        ]
    )


def _traces_for(records: Sequence[DatasetRecord], model_modality: str) -> List[TraceSamples]:
    samples = []
    for record in records:
        if model_modality == "steady_rr":
            q = np.array([s.q_outlet for s in record.steady_samples])
            samples.append(
                TraceSamples(q=q, q_dot=np.zeros_like(q), dp=np.array([s.dp for s in record.steady_samples]))
            )
            continue
        trace = record.trace
        q, q_dot, dp = trace.q[1:], trace.q_dot[1:], trace.dp[1:]
        if model_modality == "inductance":
            r_linear, r_quadratic = record.steady_coefficients
            dp = dp - r_linear * q - r_quadratic * q * q
        samples.append(TraceSamples(q=q, q_dot=q_dot, dp=dp))
    return samples


@dataclass
class ModelBundle:
    """All trained models of one run plus the split that produced them."""

    cohort_name: str
    dataset_fingerprint: str
    split_seed: int
    train_seed: int
    train_geometry_ids: List[int]
    test_geometry_ids: List[int]
    hyperparameters: Hyperparameters
    models: Dict[Tuple[str, str], TrainedRegressor]

    def model(self, kind: str, model_modality: str) -> TrainedRegressor:
        try:
            return self.models[(kind, model_modality)]
        except KeyError:
            raise ConfigurationError(
                f"bundle has no {kind}/{model_modality} model"
            ) from None

    def kinds(self) -> List[str]:
        return sorted({kind for kind, _ in self.models})

    def report_modalities(self) -> List[str]:
        available = {modality for _, modality in self.models}
        out = []
        if {"steady_rr", "inductance"} <= available:
            out.append("standard")
        if "transient_to" in available:
            out.append("to")
        return out

    def save(self, out_dir: str, force: bool = False) -> None:
        manifest_path = os.path.join(out_dir, "models.json")
        if os.path.exists(manifest_path) and not force:
            raise ConfigurationError(
                f"{manifest_path} already exists; pass force=True to overwrite"
            )
        os.makedirs(out_dir, exist_ok=True)
        manifest = {
            "cohort": self.cohort_name,
            "dataset_fingerprint": self.dataset_fingerprint,
            "split_seed": self.split_seed,
            "train_seed": self.train_seed,
            "train_geometry_ids": self.train_geometry_ids,
            "test_geometry_ids": self.test_geometry_ids,
            "hyperparameters": self.hyperparameters.to_dict(),
            "models": [
                {"kind": kind, "modality": modality, "file": f"{kind}_{modality}.json"}
                for kind, modality in sorted(self.models)
            ],
        }
        with open(manifest_path, "w") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")
        for (kind, modality), model in self.models.items():
            model.save(os.path.join(out_dir, f"{kind}_{modality}.json"))

    @classmethod
    def load(cls, in_dir: str) -> "ModelBundle":
        manifest_path = os.path.join(in_dir, "models.json")
        if not os.path.exists(manifest_path):
            raise FingerprintError(f"no model manifest at {manifest_path}")
        with open(manifest_path) as handle:
            manifest = json.load(handle)
        models = {}
        for entry in manifest["models"]:
            models[(entry["kind"], entry["modality"])] = load_model(
                os.path.join(in_dir, entry["file"])
            )
        return cls(
            cohort_name=manifest["cohort"],
            dataset_fingerprint=manifest["dataset_fingerprint"],
            split_seed=int(manifest["split_seed"]),
            train_seed=int(manifest["train_seed"]),
            train_geometry_ids=list(manifest["train_geometry_ids"]),
            test_geometry_ids=list(manifest["test_geometry_ids"]),
            hyperparameters=Hyperparameters.from_dict(manifest["hyperparameters"]),
            models=models,
        )


def train_models(
    dataset: Dataset,
    kinds: Sequence[str] = REGRESSOR_KINDS,
    modalities: Sequence[str] = REPORT_MODALITIES,
    split_seed: int = 0,
    train_seed: int = 0,
    hyperparameters: Optional[Hyperparameters] = None,
) -> ModelBundle:
    """Train every requested kind in every requested report modality."""
    for modality in modalities:
        if modality not in REPORT_MODALITIES:
            raise ConfigurationError(
                f"unknown modality {modality!r}; choose from {REPORT_MODALITIES}"
            )
    hp = hyperparameters or default_hyperparameters(dataset.cohort_name)
    train_records, test_records = split_dataset(dataset.records, seed=split_seed)
    features = np.array([r.features for r in train_records])
    model_modalities = sorted(
        {m for modality in modalities for m in MODEL_MODALITIES[modality]}
    )
    models: Dict[Tuple[str, str], TrainedRegressor] = {}
    for model_modality in model_modalities:
        targets = _targets_for(train_records, model_modality)
        traces = None
        for kind in kinds:
            if kind == "nn" and traces is None:
                traces = _traces_for(train_records, model_modality)
            models[(kind, model_modality)] = train(
                kind,
                model_modality,
                features,
                targets,
                traces=traces if kind == "nn" else None,
                hyperparameters=hp,
                seed=train_seed,
                dataset_fingerprint=dataset.fingerprint,
            )
    return ModelBundle(
        cohort_name=dataset.cohort_name,
        dataset_fingerprint=dataset.fingerprint,
        split_seed=split_seed,
        train_seed=train_seed,
        train_geometry_ids=sorted({r.geometry_id for r in train_records}),
        test_geometry_ids=sorted({r.geometry_id for r in test_records}),
        hyperparameters=hp,
        models=models,
    )


# --- evaluation ----------------------------------------------------------------


@dataclass
class ReportRow:
    kind: str
    modality: str
    regime: str
    train_rmse_mmhg: float
    test_rmse_mmhg: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "modality": self.modality,
            "regime": self.regime,
            "train_rmse_mmhg": self.train_rmse_mmhg,
            "test_rmse_mmhg": self.test_rmse_mmhg,
        }


@dataclass
class PerGeometryRow:
    kind: str
    modality: str
    regime: str
    geometry_id: int
    rmse_mmhg: float
    percentile: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "modality": self.modality,
            "regime": self.regime,
            "geometry_id": self.geometry_id,
            "rmse_mmhg": self.rmse_mmhg,
            "percentile": self.percentile,
        }


@dataclass
class EvaluationReport:
    cohort: str
    dataset_fingerprint: str
    hyperparameters: dict
    rows: List[ReportRow]
    baseline_steady_test_rmse_mmhg: float
    per_geometry: List[PerGeometryRow]
    train_geometry_ids: List[int]
    test_geometry_ids: List[int]

    def row(self, kind: str, modality: str, regime: str) -> ReportRow:
        for row in self.rows:
            if (row.kind, row.modality, row.regime) == (kind, modality, regime):
                return row
        raise KeyError((kind, modality, regime))

    def to_dict(self) -> dict:
        return {
            "cohort": self.cohort,
            "dataset_fingerprint": self.dataset_fingerprint,
            "hyperparameters": self.hyperparameters,
            "baseline_steady_test_rmse_mmhg": self.baseline_steady_test_rmse_mmhg,
            "rows": [row.to_dict() for row in self.rows],
            "per_geometry": [row.to_dict() for row in self.per_geometry],
            "train_geometry_ids": self.train_geometry_ids,
            "test_geometry_ids": self.test_geometry_ids,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, out_dir: str, force: bool = False) -> None:
        report_path = os.path.join(out_dir, "report.json")
        if os.path.exists(report_path) and not force:
            raise ConfigurationError(
                f"{report_path} already exists; pass force=True to overwrite"
            )
        os.makedirs(out_dir, exist_ok=True)
        with open(report_path, "w") as handle:
            handle.write(self.to_json())
        with open(os.path.join(out_dir, "report.csv"), "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["cohort", "kind", "modality", "regime", "train_rmse_mmhg", "test_rmse_mmhg"]
            )
            for row in self.rows:
                writer.writerow(
                    [
                        self.cohort,
                        row.kind,
                        row.modality,
                        row.regime,
                        repr(row.train_rmse_mmhg),
                        repr(row.test_rmse_mmhg),
                    ]
                )
            writer.writerow(
                [
                    self.cohort,
                    "unified0d",
                    "baseline",
                    "steady",
                    "",
                    repr(self.baseline_steady_test_rmse_mmhg),
                ]
            )
        with open(os.path.join(out_dir, "per_geometry.csv"), "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["cohort", "kind", "modality", "regime", "geometry_id", "rmse_mmhg", "percentile"]
            )
            for row in self.per_geometry:
                writer.writerow(
                    [
                        self.cohort,
                        row.kind,
                        row.modality,
                        row.regime,
                        row.geometry_id,
                        repr(row.rmse_mmhg),
                        repr(row.percentile),
                    ]
                )


def _predicted_coefficients(
    bundle: ModelBundle, records: Sequence[DatasetRecord], kind: str, modality: str
) -> np.ndarray:
    """(n, 3) physical coefficients per record for one report modality."""
    features = np.array([r.features for r in records])
    if modality == "standard":
        steady = bundle.model(kind, "steady_rr").predict_many(features)
        inductance = bundle.model(kind, "inductance").predict_many(features)
        return np.column_stack([steady, inductance[:, 0]])
    return bundle.model(kind, "transient_to").predict_many(features)


def _steady_errors(records, coefficients):
    """Squared errors (mmHg^2) per record over the steady operating points."""
    errors = []
    for record, c in zip(records, coefficients):
        per_record = []
        for sample in record.steady_samples:
            pred = c[0] * sample.q_outlet + c[1] * sample.q_outlet**2
            per_record.append(to_mmhg(pred - sample.dp) ** 2)
        errors.append(per_record)
    return errors


def _transient_errors(records, coefficients):
    """Squared errors (mmHg^2) per record over all trace rows past t = 0."""
    errors = []
    for record, c in zip(records, coefficients):
        trace = record.trace
        q, q_dot, dp = trace.q[1:], trace.q_dot[1:], trace.dp[1:]
        pred = c[0] * q + c[1] * q * q + c[2] * q_dot
        errors.append(((pred - dp) / 1333.22) ** 2)
    return errors


def _rmse(per_record_errors) -> float:
    pooled = np.concatenate([np.asarray(e, dtype=float) for e in per_record_errors])
    return float(np.sqrt(np.mean(pooled)))


def _per_geometry_rows(records, per_record_errors, kind, modality, regime):
    by_geometry: Dict[int, list] = {}
    for record, errors in zip(records, per_record_errors):
        by_geometry.setdefault(record.geometry_id, []).append(np.asarray(errors))
    ids = sorted(by_geometry)
    rmses = np.array(
        [float(np.sqrt(np.mean(np.concatenate(by_geometry[g])))) for g in ids]
    )
    if len(ids) > 1:
        order = rmses.argsort(kind="stable").argsort(kind="stable")
        percentiles = 100.0 * order / (len(ids) - 1)
    else:
        percentiles = np.zeros(1)
    return [
        PerGeometryRow(
            kind=kind,
            modality=modality,
            regime=regime,
            geometry_id=g,
            rmse_mmhg=float(r),
            percentile=float(p),
        )
        for g, r, p in zip(ids, rmses, percentiles)
    ]


def _baseline_errors(records, fluid):
    errors = []
    for record in records:
        geom = record.outlet_geometry()
        per_record = []
        for sample in record.steady_samples:
            q_inlet = sample.inlet_fraction * record.q_inlet_peak
            pred = dp_unified0d_poiseuille(geom, q_inlet, sample.q_outlet, fluid)
            per_record.append(to_mmhg(pred - sample.dp) ** 2)
        errors.append(per_record)
    return errors


def evaluate_rmse(
    bundle: ModelBundle,
    dataset: Dataset,
    regimes: Sequence[str] = ("steady", "transient"),
) -> EvaluationReport:
    """Pressure-difference RMSE of every trained model, in mmHg.

    Steady evaluation scores the recorded operating points with the
    steady-resistance predictions (standard modality); transient evaluation
    scores every trace row past t = 0 with the full coefficient triple of
    each modality.  The analytic station-to-station model, driven by the
    recorded flows, provides the steady baseline on the test split.
    """
    if bundle.dataset_fingerprint != dataset.fingerprint:
        raise FingerprintError(
            "model bundle was trained on a different dataset "
            f"({bundle.dataset_fingerprint} vs {dataset.fingerprint})"
        )
    train_ids = set(bundle.train_geometry_ids)
    test_ids = set(bundle.test_geometry_ids)
    train_records = [r for r in dataset.records if r.geometry_id in train_ids]
    test_records = [r for r in dataset.records if r.geometry_id in test_ids]
    rows: List[ReportRow] = []
    per_geometry: List[PerGeometryRow] = []
    for kind in bundle.kinds():
        for modality in bundle.report_modalities():
            coeff_train = _predicted_coefficients(bundle, train_records, kind, modality)
            coeff_test = _predicted_coefficients(bundle, test_records, kind, modality)
            if "steady" in regimes and modality == "standard":
                train_errors = _steady_errors(train_records, coeff_train)
                test_errors = _steady_errors(test_records, coeff_test)
                rows.append(
                    ReportRow(
                        kind=kind,
                        modality=modality,
                        regime="steady",
                        train_rmse_mmhg=_rmse(train_errors),
                        test_rmse_mmhg=_rmse(test_errors),
                    )
                )
                per_geometry.extend(
                    _per_geometry_rows(test_records, test_errors, kind, modality, "steady")
                )
            if "transient" in regimes:
                train_errors = _transient_errors(train_records, coeff_train)
                test_errors = _transient_errors(test_records, coeff_test)
                rows.append(
                    ReportRow(
                        kind=kind,
                        modality=modality,
                        regime="transient",
                        train_rmse_mmhg=_rmse(train_errors),
                        test_rmse_mmhg=_rmse(test_errors),
                    )
                )
                per_geometry.extend(
                    _per_geometry_rows(
                        test_records, test_errors, kind, modality, "transient"
                    )
                )
    rows.sort(key=lambda r: (r.kind, r.modality, r.regime))
    baseline = _rmse(_baseline_errors(test_records, dataset.config.fluid))
    return EvaluationReport(
        cohort=dataset.cohort_name,
        dataset_fingerprint=dataset.fingerprint,
        hyperparameters=bundle.hyperparameters.to_dict(),
        rows=rows,
        baseline_steady_test_rmse_mmhg=baseline,
        per_geometry=per_geometry,
        train_geometry_ids=bundle.train_geometry_ids,
        test_geometry_ids=bundle.test_geometry_ids,
    )


# --- figure sweeps -------------------------------------------------------------


@dataclass
class SweepCurve:
    regime: str  # steady | transient
    series: str  # oracle | rr_fit | rri_fit | rr_fit_loop | unified0d | model:<kind>
    outlet_radius: float
    q: np.ndarray
    dp: np.ndarray
    t: Optional[np.ndarray] = None


@dataclass
class SweepResult:
    cohort: str
    radius_values: List[float]
    curves: List[SweepCurve]

    def curve(self, regime: str, series: str, outlet_radius: float) -> SweepCurve:
        for c in self.curves:
            if (
                c.regime == regime
                and c.series == series
                and c.outlet_radius == outlet_radius
            ):
                return c
        raise KeyError((regime, series, outlet_radius))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["cohort", "regime", "series", "outlet_radius", "t", "q", "dp", "dp_mmhg"]
            )
            for curve in self.curves:
                for i in range(len(curve.q)):
                    t = "" if curve.t is None else repr(float(curve.t[i]))
                    writer.writerow(
                        [
                            self.cohort,
                            curve.regime,
                            curve.series,
                            repr(curve.outlet_radius),
                            t,
                            repr(float(curve.q[i])),
                            repr(float(curve.dp[i])),
                            repr(to_mmhg(float(curve.dp[i]))),
                        ]
                    )


def nominal_geometry(cohort: CohortSpec) -> Tuple[BifurcationGeometry, float]:
    """Midpoint geometry of a cohort box and its peak inlet flow."""

    def mid(interval):
        return 0.5 * (interval[0] + interval[1])

    r_inlet = mid(cohort.inlet_radius)
    if cohort.radius_ratio is not None:
        r_out = r_inlet * mid(cohort.radius_ratio)
    else:
        r_out = mid(cohort.outlet_radius)
    theta = math.radians(mid(cohort.outlet_angle_deg))
    length = 21.0 * r_inlet  # station distance plus mid jitter
    geom = BifurcationGeometry(
        r_inlet=r_inlet,
        r_outlet_1=r_out,
        r_outlet_2=r_out,
        theta_1=theta,
        theta_2=theta,
        l_outlet_1=length,
        l_outlet_2=length,
        l_inlet=length,
    )
    velocity = mid(cohort.inlet_velocity)
    return geom, velocity * geom.area_inlet


def default_radius_values(cohort: CohortSpec) -> List[float]:
    if cohort.radius_ratio is not None:
        r_mid = 0.5 * (cohort.inlet_radius[0] + cohort.inlet_radius[1])
        lo = r_mid * cohort.radius_ratio[0]
        hi = r_mid * cohort.radius_ratio[1]
    else:
        lo, hi = cohort.outlet_radius
    return [lo, 0.5 * (lo + hi), hi]


def run_figure_sweep(
    cohort: CohortSpec,
    radius_values: Optional[Sequence[float]] = None,
    oracle: OracleMode = OracleMode(),
    fluid: FluidProperties = FluidProperties(),
    bundle: Optional[ModelBundle] = None,
    dt: float = DEFAULT_TIME_STEP,
    period: float = DEFAULT_PERIOD,
    bc_resistance: float = DEFAULT_BC_RESISTANCE,
    n_steady_points: int = 19,
    n_grid: int = 50,
) -> SweepResult:
    """Pressure-difference curves for the nominal cohort geometry.

    The modeled outlet's radius is swept over ``radius_values`` while
    everything else is held fixed.  Steady curves cover a dense inlet-flow
    grid: the oracle and the analytic baseline are sampled at the converged
    operating points, and block-model curves (fitted, plus any trained
    models) are evaluated on one shared outlet-flow grid so curves of
    different radii are pointwise comparable.  Transient loops replay the
    single-pulse experiment.
    """
    base, q_peak = nominal_geometry(cohort)
    radii = list(radius_values) if radius_values is not None else default_radius_values(cohort)
    bc = BoundaryCondition(bc_resistance, 0.0)
    bcs = (bc, bc)
    fractions = sorted(set(np.linspace(0.1, 1.0, n_steady_points)) | {0.5, 1.0})
    per_radius = {}
    for radius in radii:
        geom = BifurcationGeometry(
            r_inlet=base.r_inlet,
            r_outlet_1=radius,
            r_outlet_2=base.r_outlet_2,
            theta_1=base.theta_1,
            theta_2=base.theta_2,
            l_outlet_1=base.l_outlet_1,
            l_outlet_2=base.l_outlet_2,
            l_inlet=base.l_inlet,
        )
        samples = {
            fraction: run_steady(
                geom, fluid, fraction * q_peak, oracle, bcs=bcs,
                inlet_fraction=1.0,
            )[0]
            for fraction in fractions
        }
        traces = run_transient(
            geom, fluid, q_peak, period=period, dt=dt, mode=oracle, bcs=bcs
        )
        per_radius[radius] = (geom, samples, traces[0])
    q_max_common = min(
        max(s.q_outlet for s in samples.values())
        for _, samples, _ in per_radius.values()
    )
    q_grid = np.linspace(0.0, q_max_common, n_grid)
    curves: List[SweepCurve] = []
    for radius, (geom, samples, trace) in per_radius.items():
        q_points = np.array([samples[f].q_outlet for f in fractions])
        dp_points = np.array([samples[f].dp for f in fractions])
        curves.append(
            SweepCurve("steady", "oracle", radius, q_points, dp_points)
        )
        baseline = np.array(
            [
                dp_unified0d_poiseuille(
                    geom, f * q_peak, samples[f].q_outlet, fluid
                )
                for f in fractions
            ]
        )
        curves.append(SweepCurve("steady", "unified0d", radius, q_points, baseline))
        r_linear, r_quadratic = fit_steady(samples[0.5], samples[1.0])
        rr = r_linear * q_grid + r_quadratic * q_grid**2
        curves.append(SweepCurve("steady", "rr_fit", radius, q_grid.copy(), rr))
        inductance = fit_inductance(trace, r_linear, r_quadratic)
        standard = RRICoefficients(r_linear, r_quadratic, inductance)
        to_coeffs, _ = fit_transient_optimized(trace)
        loops = {
            "oracle": trace.dp,
            "rri_fit": standard.r_linear * trace.q
            + standard.r_quadratic * trace.q**2
            + standard.inductance * trace.q_dot,
            "rri_to_fit": to_coeffs.r_linear * trace.q
            + to_coeffs.r_quadratic * trace.q**2
            + to_coeffs.inductance * trace.q_dot,
            "rr_fit_loop": r_linear * trace.q + r_quadratic * trace.q**2,
        }
        for series, dp in loops.items():
            curves.append(
                SweepCurve(
                    "transient", series, radius, trace.q.copy(), np.asarray(dp),
                    t=trace.times.copy(),
                )
            )
        if bundle is not None:
            features = feature_vector(geom, 1)
            for kind in bundle.kinds():
                for modality in bundle.report_modalities():
                    if modality == "standard":
                        steady_pred = bundle.model(kind, "steady_rr").predict(features)
                        inductance_pred = bundle.model(kind, "inductance").predict(features)
                        coeffs = np.concatenate([steady_pred, inductance_pred])
                    else:
                        coeffs = bundle.model(kind, "transient_to").predict(features)
                    if modality == "standard":
                        steady_curve = coeffs[0] * q_grid + coeffs[1] * q_grid**2
                        curves.append(
                            SweepCurve(
                                "steady", f"model:{kind}", radius,
                                q_grid.copy(), steady_curve,
                            )
                        )
                    loop = (
                        coeffs[0] * trace.q
                        + coeffs[1] * trace.q**2
                        + coeffs[2] * trace.q_dot
                    )
                    curves.append(
                        SweepCurve(
                            "transient", f"model:{kind}:{modality}", radius,
                            trace.q.copy(), loop, t=trace.times.copy(),
                        )
                    )
    return SweepResult(cohort=cohort.name, radius_values=radii, curves=curves)
