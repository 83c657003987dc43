"""YAML run configuration: parsing, strict validation, and the resolved echo.

Unknown keys are hard errors so a typo cannot silently fall back to a
default. The echo embedded in every result record is itself a valid config
(with the seed resolved), so any run can be reproduced byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .criteria import CriterionConfig
from .experiment import ALGORITHMS, ExperimentSpec
from .model import FactorGrid, TermSet, expand_presets, termset_from_exponents

PRESET_ALIASES = {
    "main_effects", "quadratic_terms", "linear_interactions",
    "second_order", "cubic_terms", "third_order_terms",
}


class ConfigError(ValueError):
    """A named-field schema or validation failure in a run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """An ExperimentSpec plus the run plumbing that never affects results."""

    experiment: ExperimentSpec
    out_dir: str = "out"
    workers: int | None = None
    design_csv: bool = True
    result_json: bool = True
    report_txt: bool = True


def _require_mapping(node, where: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping of keys to values")
    return node


def _check_keys(node: dict, allowed: set[str], where: str):
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _presets_list(value, where: str) -> list[str]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{where}: expected a preset name or list of preset names")
    for v in value:
        if v not in PRESET_ALIASES:
            raise ConfigError(f"{where}: unknown model preset {v!r}")
    return value


def _exponent_vectors(value, where: str) -> list[list[int]]:
    if not isinstance(value, list) or not all(isinstance(v, list) for v in value):
        raise ConfigError(f"{where}: expected a list of exponent vectors")
    out = []
    for v in value:
        if not all(isinstance(e, int) and e >= 0 for e in v):
            raise ConfigError(f"{where}: exponents must be non-negative integers")
        out.append([int(e) for e in v])
    return out


def _terms_from_model(node: dict, key: str, k: int, role: str, default) -> TermSet:
    terms_key = f"{key}_terms"
    try:
        if terms_key in node and node[terms_key] is not None:
            vectors = _exponent_vectors(node[terms_key], f"model.{terms_key}")
            return termset_from_exponents(vectors, k, role=role)
        if key in node and node[key] is not None:
            presets = _presets_list(node[key], f"model.{key}")
            return expand_presets(presets, k, role=role)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(f"model.{key}: {err}") from err
    return default(k, role)


def _default_primary(k: int, role: str) -> TermSet:
    return expand_presets(["main_effects"], k, role=role)


def _default_potential(k: int, role: str) -> TermSet:
    return TermSet(tuple(), role=role)


def config_from_dict(doc: dict, source: str = "config") -> RunConfig:
    doc = _require_mapping(doc, source)
    _check_keys(doc, {"factors", "runs", "model", "criterion", "search", "output"}, source)

    factors = _require_mapping(doc.get("factors"), "factors")
    _check_keys(factors, {"count", "levels"}, "factors")
    if "count" not in factors:
        raise ConfigError("factors.count: required")
    k = factors["count"]
    if not isinstance(k, int) or k < 1:
        raise ConfigError("factors.count: must be an integer >= 1")
    levels = factors.get("levels", 2)
    try:
        grid = FactorGrid.regular(k, levels)
    except ValueError as err:
        raise ConfigError(f"factors.levels: {err}") from err

    if "runs" not in doc:
        raise ConfigError("runs: required")
    n_runs = doc["runs"]
    if not isinstance(n_runs, int) or n_runs < 1:
        raise ConfigError("runs: must be an integer >= 1")

    model = _require_mapping(doc.get("model"), "model")
    _check_keys(model, {"primary", "potential", "primary_terms", "potential_terms"}, "model")
    primary = _terms_from_model(model, "primary", k, "primary", _default_primary)
    potential = _terms_from_model(model, "potential", k, "potential", _default_potential)

    crit = _require_mapping(doc.get("criterion"), "criterion")
    _check_keys(crit, {"family", "kappa", "tau2", "alpha", "alpha_lof", "mc_samples"},
                "criterion")
    kwargs = {}
    if "family" in crit:
        kwargs["family"] = crit["family"]
    if "kappa" in crit:
        kap = crit["kappa"]
        if not isinstance(kap, list) or len(kap) != 3:
            raise ConfigError("criterion.kappa: expected three weights")
        kwargs["kappa"] = tuple(float(v) for v in kap)
    for key in ("tau2", "alpha", "alpha_lof"):
        if key in crit:
            kwargs[key] = float(crit[key])
    if "mc_samples" in crit:
        kwargs["mc_samples"] = int(crit["mc_samples"])
    try:
        criterion = CriterionConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(f"criterion: {err}") from err

    search = _require_mapping(doc.get("search"), "search")
    _check_keys(search, {"starts", "algorithm", "seed", "workers"}, "search")
    n_starts = search.get("starts", 10)
    if not isinstance(n_starts, int) or n_starts < 1:
        raise ConfigError("search.starts: must be an integer >= 1")
    algorithm = search.get("algorithm")
    if algorithm is not None and algorithm not in ALGORITHMS:
        raise ConfigError(f"search.algorithm: must be one of {ALGORITHMS}")
    seed = search.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        raise ConfigError("search.seed: must be a non-negative integer")
    workers = search.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        raise ConfigError("search.workers: must be an integer >= 1")

    output = _require_mapping(doc.get("output"), "output")
    _check_keys(output, {"dir", "design_csv", "result_json", "report_txt"}, "output")
    out_dir = output.get("dir", "out")
    flags = {name: bool(output.get(name, True))
             for name in ("design_csv", "result_json", "report_txt")}

    try:
        experiment = ExperimentSpec(
            grid=grid, n_runs=n_runs, primary=primary, potential=potential,
            criterion=criterion, n_starts=n_starts, algorithm=algorithm, seed=seed,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err

    return RunConfig(experiment=experiment, out_dir=str(out_dir), workers=workers,
                     **flags)


def parse_config(path) -> RunConfig:
    """Load and validate a YAML run configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: not valid YAML ({err})") from err
    return config_from_dict(doc, source=str(path))


def resolved_config_dict(run: RunConfig, master_seed: int, workers: int | None) -> dict:
    """Echo of the fully resolved configuration; feeding it back reproduces the run.

    Models are echoed as explicit exponent vectors so the echo does not
    depend on preset expansion staying stable across versions.
    """
    spec = run.experiment
    return {
        "factors": {"count": spec.k, "levels": list(spec.grid.levels)},
        "runs": spec.n_runs,
        "model": {
            "primary_terms": [list(t.exponents) for t in spec.primary.terms],
            "potential_terms": [list(t.exponents) for t in spec.potential.terms],
        },
        "criterion": {
            "family": spec.criterion.family,
            "kappa": list(spec.criterion.kappa),
            "tau2": spec.criterion.tau2,
            "alpha": spec.criterion.alpha,
            "alpha_lof": spec.criterion.alpha_lof,
            "mc_samples": spec.criterion.mc_samples,
        },
        "search": {
            "starts": spec.n_starts,
            "algorithm": spec.algorithm,
            "seed": master_seed,
            "workers": workers,
        },
        "output": {
            "dir": run.out_dir,
            "design_csv": run.design_csv,
            "result_json": run.result_json,
            "report_txt": run.report_txt,
        },
    }
