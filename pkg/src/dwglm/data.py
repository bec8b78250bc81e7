"""Longitudinal datasets, CSV interchange, and analysis configuration.

Data interchange is CSV (UTF-8, comma-delimited, header row, "." decimal);
configuration and run manifests are JSON.

Long format: one row per (subject, stage), keyed by the subject and stage
columns, with the binary outcome filled in on each subject's final-stage row
and blank elsewhere. A covariate column may be blank for every row of a
stage (not recorded at that stage) but must otherwise be filled for all of
them. The optional design-weight column is read from each subject's
first-stage row.

Wide format: one row per subject with stage-specific column names; each
stage model in the configuration then names its own treatment column.

Floats are written with ``repr`` so a write/parse round trip reproduces
every value bit-for-bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, MissingColumn, NonBinaryValue, ParseError,
                     RaggedStages)
from .links import LINK_NAMES

METHOD_NAMES = ("m0", "m1", "m2")
METHOD_TO_WEIGHT_MODE = {"m0": "none", "m1": "dwols", "m2": "dwglm"}


def _check_binary(values: np.ndarray, what: str):
    if not np.isin(values, (0.0, 1.0)).all():
        raise ValueError(f"{what} must be binary (0/1)")


@dataclass
class StageData:
    """One stage's covariates (name -> length-n vector) and treatment."""

    covariates: dict
    treatment: np.ndarray

    def __post_init__(self):
        self.treatment = np.asarray(self.treatment, dtype=float)
        _check_binary(self.treatment, "treatment")
        self.covariates = {k: np.asarray(v, dtype=float) for k, v in self.covariates.items()}
        for name, col in self.covariates.items():
            if col.shape != self.treatment.shape:
                raise ValueError(f"covariate {name!r} length mismatch")


@dataclass
class LongitudinalDataset:
    """Per-subject stage records, final binary outcome, design weights."""

    stages: list
    outcome: np.ndarray
    design_weight: np.ndarray = None

    def __post_init__(self):
        self.outcome = np.asarray(self.outcome, dtype=float)
        _check_binary(self.outcome, "outcome")
        if self.design_weight is None:
            self.design_weight = np.ones_like(self.outcome)
        self.design_weight = np.asarray(self.design_weight, dtype=float)
        if np.any(self.design_weight < 0):
            raise ValueError("design weights must be non-negative")
        for stage in self.stages:
            if len(stage.treatment) != len(self.outcome):
                raise ValueError("stage length mismatch with outcome")

    @property
    def n_subjects(self) -> int:
        return len(self.outcome)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


@dataclass(frozen=True)
class AnalysisConfig:
    """Validated analysis configuration (see docs/data_format.md)."""

    stages: int
    stage_models: tuple          # per stage: dict with treatment_free/blip/treatment lists
    method: str = "m2"
    link: str = "logit"
    data_format: str = "long"
    pseudo_replicates: int = 25  # R
    seed: int = 0
    subject_col: str = "id"
    stage_col: str = "stage"
    treatment_col: str = "a"
    outcome_col: str = "y"
    design_weight_col: str = None
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ConfigError(f"method must be one of {METHOD_NAMES}, got {self.method!r}")
        if self.link not in LINK_NAMES:
            raise ConfigError(f"link must be one of {LINK_NAMES}, got {self.link!r}")
        if self.data_format not in ("long", "wide"):
            raise ConfigError("format must be 'long' or 'wide'")
        if self.stages < 1:
            raise ConfigError("stages must be >= 1")
        if len(self.stage_models) != self.stages:
            raise ConfigError("stage_models must list one model per stage")
        if self.pseudo_replicates < 1:
            raise ConfigError("R must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for j, model in enumerate(self.stage_models, start=1):
            for key in ("treatment_free", "blip", "treatment"):
                if key not in model:
                    raise ConfigError(f"stage {j} model is missing {key!r}")
            if not set(model["blip"]) <= set(model["treatment_free"]):
                extra = sorted(set(model["blip"]) - set(model["treatment_free"]))
                raise ConfigError(
                    f"stage {j}: blip columns {extra} are not in the treatment-free "
                    "model (strong heredity)"
                )
            if self.data_format == "wide" and "treatment_col" not in model:
                raise ConfigError(f"stage {j}: wide format needs a per-stage treatment_col")

    @classmethod
    def from_json(cls, path) -> "AnalysisConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {
            "stages", "stage_models", "method", "link", "format", "R", "seed",
            "subject_col", "stage_col", "treatment_col", "outcome_col",
            "design_weight_col", "solver",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "format" in kwargs:
            kwargs["data_format"] = kwargs.pop("format")
        if "R" in kwargs:
            kwargs["pseudo_replicates"] = kwargs.pop("R")
        if "method" in kwargs:
            kwargs["method"] = str(kwargs["method"]).lower()
        if "stage_models" in kwargs:
            kwargs["stage_models"] = tuple(kwargs["stage_models"])
        return cls(**kwargs)


def _parse_cell(text, row_num, column):
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"row {row_num}, column {column!r}: cannot parse {text!r} as a number"
        ) from None


def _binary_cell(value, row_num, column):
    if value not in (0.0, 1.0):
        raise NonBinaryValue(
            f"row {row_num}, column {column!r}: value {value!r} is not 0/1"
        )
    return value


def parse_dataset(csv_path, config: AnalysisConfig) -> LongitudinalDataset:
    """Read and validate a CSV file into a :class:`LongitudinalDataset`."""
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{csv_path}: empty file")
        header = list(reader.fieldnames)
        rows = list(reader)

    if config.data_format == "long":
        return _parse_long(rows, header, config)
    return _parse_wide(rows, header, config)


def _require_columns(header, names):
    missing = [c for c in names if c not in header]
    if missing:
        raise MissingColumn(f"columns {missing} not found in CSV header")


def _parse_long(rows, header, config):
    key_cols = [config.subject_col, config.stage_col, config.treatment_col,
                config.outcome_col]
    if config.design_weight_col:
        key_cols.append(config.design_weight_col)
    _require_columns(header, key_cols)
    covariate_cols = [c for c in header if c not in key_cols]

    by_subject = {}
    order = []
    for i, row in enumerate(rows, start=2):  # header is line 1
        sid = row[config.subject_col]
        stage_text = row[config.stage_col]
        try:
            stage = int(stage_text)
        except ValueError:
            raise ParseError(
                f"row {i}, column {config.stage_col!r}: bad stage {stage_text!r}"
            ) from None
        if sid not in by_subject:
            by_subject[sid] = {}
            order.append(sid)
        if stage in by_subject[sid]:
            raise ParseError(f"row {i}: duplicate stage {stage} for subject {sid!r}")
        by_subject[sid][stage] = (i, row)

    k = config.stages
    for sid, stages in by_subject.items():
        if sorted(stages) != list(range(1, k + 1)):
            raise RaggedStages(
                f"subject {sid!r} has stages {sorted(stages)}, expected 1..{k}"
            )

    n = len(order)
    outcome = np.empty(n)
    weight = np.ones(n)
    stage_data = []
    for stage in range(1, k + 1):
        treatment = np.empty(n)
        cells = {c: [] for c in covariate_cols}
        for s_idx, sid in enumerate(order):
            i, row = by_subject[sid][stage]
            treatment[s_idx] = _binary_cell(
                _parse_cell(row[config.treatment_col], i, config.treatment_col),
                i, config.treatment_col)
            for c in covariate_cols:
                text = row.get(c, "")
                cells[c].append(None if text == "" else _parse_cell(text, i, c))
            if stage == k:
                text = row[config.outcome_col]
                if text == "":
                    raise ParseError(
                        f"row {i}: final-stage outcome {config.outcome_col!r} is blank"
                    )
                outcome[s_idx] = _binary_cell(
                    _parse_cell(text, i, config.outcome_col), i, config.outcome_col)
            if stage == 1 and config.design_weight_col:
                text = row[config.design_weight_col]
                weight[s_idx] = 1.0 if text == "" else _parse_cell(
                    text, i, config.design_weight_col)
        covariates = {}
        for c in covariate_cols:
            filled = [v is not None for v in cells[c]]
            if all(filled):
                covariates[c] = np.array(cells[c], dtype=float)
            elif any(filled):
                raise ParseError(
                    f"column {c!r} is filled for some but not all stage-{stage} rows"
                )
        stage_data.append(StageData(covariates=covariates, treatment=treatment))

    dataset = LongitudinalDataset(stages=stage_data, outcome=outcome,
                                  design_weight=weight)
    _check_model_columns(dataset, config)
    return dataset


def _parse_wide(rows, header, config):
    needed = [config.outcome_col]
    if config.design_weight_col:
        needed.append(config.design_weight_col)
    for model in config.stage_models:
        needed.append(model["treatment_col"])
        needed.extend(model["treatment_free"])
        needed.extend(model["blip"])
        needed.extend(model["treatment"])
    _require_columns(header, sorted(set(needed)))

    n = len(rows)
    outcome = np.empty(n)
    weight = np.ones(n)
    for s_idx, row in enumerate(rows):
        i = s_idx + 2
        outcome[s_idx] = _binary_cell(
            _parse_cell(row[config.outcome_col], i, config.outcome_col),
            i, config.outcome_col)
        if config.design_weight_col:
            weight[s_idx] = _parse_cell(row[config.design_weight_col], i,
                                        config.design_weight_col)

    stage_data = []
    for model in config.stage_models:
        treat_col = model["treatment_col"]
        names = sorted(set(model["treatment_free"]) | set(model["blip"])
                       | set(model["treatment"]))
        treatment = np.empty(n)
        covariates = {c: np.empty(n) for c in names}
        for s_idx, row in enumerate(rows):
            i = s_idx + 2
            treatment[s_idx] = _binary_cell(
                _parse_cell(row[treat_col], i, treat_col), i, treat_col)
            for c in names:
                covariates[c][s_idx] = _parse_cell(row[c], i, c)
        stage_data.append(StageData(covariates=covariates, treatment=treatment))

    return LongitudinalDataset(stages=stage_data, outcome=outcome,
                               design_weight=weight)


def _check_model_columns(dataset, config):
    for j, model in enumerate(config.stage_models, start=1):
        available = set(dataset.stages[j - 1].covariates)
        wanted = set(model["treatment_free"]) | set(model["blip"]) | set(model["treatment"])
        missing = sorted(wanted - available)
        if missing:
            raise MissingColumn(f"stage {j}: model columns {missing} absent from data")


def write_long_csv(dataset: LongitudinalDataset, path, *, subject_col="id",
                   stage_col="stage", treatment_col="a", outcome_col="y",
                   design_weight_col="design_weight"):
    """Serialize a dataset in long format; floats use repr for exact round trips."""
    all_covs = []
    for stage in dataset.stages:
        for name in stage.covariates:
            if name not in all_covs:
                all_covs.append(name)
    header = [subject_col, stage_col] + all_covs + [treatment_col, outcome_col,
                                                    design_weight_col]
    k = dataset.n_stages
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s_idx in range(dataset.n_subjects):
            for stage_num in range(1, k + 1):
                stage = dataset.stages[stage_num - 1]
                row = [s_idx + 1, stage_num]
                for c in all_covs:
                    col = stage.covariates.get(c)
                    row.append("" if col is None else repr(float(col[s_idx])))
                row.append(repr(float(stage.treatment[s_idx])))
                row.append(repr(float(dataset.outcome[s_idx])) if stage_num == k else "")
                row.append(repr(float(dataset.design_weight[s_idx])) if stage_num == 1 else "")
                writer.writerow(row)
