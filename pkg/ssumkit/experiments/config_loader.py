"""
Strict loader for TOML experiment configurations.

Every table and key is known in advance; unknown keys, wrong types and
out-of-range values raise ConfigError naming the offending key path.

    [experiment]   name, problem, methods, r_max, seed, n_mc, eval_every,
                   output_dir, threads, mean_variant, write_xlsx
    [network]      n_cells, users_per_cell, tx_antennas, rx_antennas, streams,
                   power, noise, rho, snr_db, eta_db, gamma_csi,
                   path_loss_exponent, reference_distance, wrap_around
    [dictionary]   n, k, sparsity, noise_std, lam, gamma_prox, corpus
    [sg]           dim, noise_std, l1, allow_constant_step, constant_step
    [properties]   see PropertyParams
"""

import logging
import math
import tomllib
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Optional, Union

from ssumkit.config import get_default_threads, get_results_dir
from ssumkit.errors import ConfigError
from ssumkit.models.experiment import (
    METHODS_BY_PROBLEM,
    DictionaryParams,
    ExperimentConfig,
    Method,
    ProblemKind,
    PropertyParams,
    SGParams,
)
from ssumkit.models.network import (
    CsiParams,
    MeanChannelVariant,
    NetworkConfig,
    PathLossParams,
)

logger = logging.getLogger(__name__)

_REQUIRED = object()

EXPERIMENT_KEYS = {
    "name": str,
    "problem": str,
    "methods": list,
    "r_max": int,
    "seed": int,
    "n_mc": int,
    "eval_every": int,
    "output_dir": str,
    "threads": int,
    "mean_variant": str,
    "write_xlsx": bool,
}

NETWORK_KEYS = {
    "n_cells": int,
    "users_per_cell": int,
    "tx_antennas": int,
    "rx_antennas": int,
    "streams": int,
    "power": float,
    "noise": float,
    "rho": float,
    "snr_db": float,
    "eta_db": float,
    "gamma_csi": float,
    "path_loss_exponent": float,
    "reference_distance": float,
    "wrap_around": bool,
}

TABLES = ("experiment", "network", "dictionary", "sg", "properties")


def _type_name(kind: type) -> str:
    return {int: "an integer", float: "a number", bool: "a boolean"}.get(
        kind, f"a {kind.__name__}"
    )


def _check_type(value: Any, kind: type, path: str) -> Any:
    # bool is an int subclass; never accept it where a number is expected
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok:
            value = float(value)
            if math.isnan(value):
                raise ConfigError(f"{path}: must not be NaN")
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"{path}: expected {_type_name(kind)}, got {value!r}")
    return value


def _reject_unknown(table: dict, known, prefix: str) -> None:
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigError(f"{prefix}.{unknown[0]}: unknown key")


def _get(table: dict, key: str, kind: type, prefix: str, default: Any = _REQUIRED):
    path = f"{prefix}.{key}"
    if key not in table:
        if default is _REQUIRED:
            raise ConfigError(f"{path}: required key is missing")
        return default
    return _check_type(table[key], kind, path)


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ConfigError(f"{path}: {message}")


def _parse_enum(enum_type, value: str, path: str):
    try:
        return enum_type(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum_type)
        raise ConfigError(f"{path}: {value!r} is not one of {choices}") from None


def _parse_dataclass(cls, table: dict, prefix: str):
    """Fill a flat parameter dataclass, typing every key by its default."""
    known = {f.name: f for f in fields(cls)}
    _reject_unknown(table, known, prefix)
    defaults = cls()
    values = {}
    for name in table:
        default = getattr(defaults, name)
        kind = str if default is None else type(default)
        values[name] = _check_type(table[name], kind, f"{prefix}.{name}")
    return cls(**values)


def parse_network(table: dict) -> NetworkConfig:
    """Build a uniform NetworkConfig from the [network] table."""
    p = "network"
    _reject_unknown(table, NETWORK_KEYS, p)
    n_cells = _get(table, "n_cells", int, p)
    users = _get(table, "users_per_cell", int, p, 1)
    M = _get(table, "tx_antennas", int, p, 2)
    N = _get(table, "rx_antennas", int, p, 2)
    _require(n_cells >= 1, f"{p}.n_cells", "must be at least 1")
    _require(users >= 1, f"{p}.users_per_cell", "must be at least 1")
    _require(M >= 1, f"{p}.tx_antennas", "must be at least 1")
    _require(N >= 1, f"{p}.rx_antennas", "must be at least 1")
    streams = _get(table, "streams", int, p, min(M, N))
    _require(
        1 <= streams <= min(M, N), f"{p}.streams", f"must lie in [1, {min(M, N)}]"
    )
    power = _get(table, "power", float, p, 1.0)
    noise = _get(table, "noise", float, p, 1.0)
    _require(power > 0, f"{p}.power", "must be positive")
    _require(noise > 0, f"{p}.noise", "must be positive")
    rho = _get(table, "rho", float, p, None)
    _require(rho is None or rho > 0, f"{p}.rho", "must be positive")

    csi = CsiParams(
        eta_db=_get(table, "eta_db", float, p, CsiParams.eta_db),
        gamma_csi=_get(table, "gamma_csi", float, p, CsiParams.gamma_csi),
        snr_db=_get(table, "snr_db", float, p, CsiParams.snr_db),
    )
    _require(csi.gamma_csi >= 0, f"{p}.gamma_csi", "must be nonnegative")
    path_loss = PathLossParams(
        exponent=_get(table, "path_loss_exponent", float, p, PathLossParams.exponent),
        reference_distance=_get(
            table, "reference_distance", float, p, PathLossParams.reference_distance
        ),
        wrap_around=_get(table, "wrap_around", bool, p, PathLossParams.wrap_around),
    )
    _require(path_loss.exponent > 0, f"{p}.path_loss_exponent", "must be positive")
    _require(
        0 < path_loss.reference_distance < 0.5,
        f"{p}.reference_distance",
        "must lie in (0, 0.5)",
    )
    return NetworkConfig.uniform(
        n_cells,
        users_per_cell=users,
        tx_antennas=M,
        rx_antennas=N,
        streams=streams,
        power=power,
        noise=noise,
        rho=rho,
        csi=csi,
        path_loss=path_loss,
    )


def _validate_params(
    dictionary: DictionaryParams, sg: SGParams, properties: PropertyParams
) -> None:
    d = "dictionary"
    _require(dictionary.n >= 1, f"{d}.n", "must be at least 1")
    _require(dictionary.k >= 1, f"{d}.k", "must be at least 1")
    _require(
        1 <= dictionary.sparsity <= dictionary.k,
        f"{d}.sparsity",
        f"must lie in [1, {dictionary.k}]",
    )
    _require(dictionary.noise_std >= 0, f"{d}.noise_std", "must be nonnegative")
    _require(dictionary.lam >= 0, f"{d}.lam", "must be nonnegative")
    _require(dictionary.gamma_prox >= 0, f"{d}.gamma_prox", "must be nonnegative")

    _require(sg.dim >= 1, "sg.dim", "must be at least 1")
    _require(sg.noise_std >= 0, "sg.noise_std", "must be nonnegative")
    _require(sg.l1 >= 0, "sg.l1", "must be nonnegative")
    _require(sg.constant_step > 0, "sg.constant_step", "must be positive")

    pr = "properties"
    for name in ("n_trials", "n_convexity_checks", "r_start", "gap_early", "gap_seeds"):
        _require(getattr(properties, name) >= 1, f"{pr}.{name}", "must be at least 1")
    _require(
        properties.r_start <= properties.r_min, f"{pr}.r_start", "must be <= r_min"
    )
    _require(
        properties.r_max > 2 * properties.r_min,
        f"{pr}.r_max",
        "must exceed 2 * r_min",
    )
    _require(
        properties.gap_early < properties.r_max,
        f"{pr}.gap_early",
        "must be below r_max",
    )
    _require(properties.slack > 0, f"{pr}.slack", "must be positive")
    _require(0 < properties.gap_ratio, f"{pr}.gap_ratio", "must be positive")
    _require(properties.sg_iterations >= 1, f"{pr}.sg_iterations", "must be >= 1")


def parse_config(data: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    Validate a parsed TOML document and build the ExperimentConfig.

    Args:
        data: Parsed TOML document
        base_dir: Directory relative paths in the document resolve against

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: If the document violates the schema
    """
    unknown = sorted(set(data) - set(TABLES))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown table")
    for table in TABLES:
        if table in data and not isinstance(data[table], dict):
            raise ConfigError(f"{table}: expected a table")
    if "experiment" not in data:
        raise ConfigError("experiment: required table is missing")

    exp = data["experiment"]
    p = "experiment"
    _reject_unknown(exp, EXPERIMENT_KEYS, p)
    problem = _parse_enum(ProblemKind, _get(exp, "problem", str, p), f"{p}.problem")

    method_names = _get(exp, "methods", list, p)
    _require(len(method_names) > 0, f"{p}.methods", "must not be empty")
    methods = []
    for i, name in enumerate(method_names):
        path = f"{p}.methods[{i}]"
        method = _parse_enum(Method, _check_type(name, str, path), path)
        _require(
            method in METHODS_BY_PROBLEM[problem],
            path,
            f"{method.value} does not apply to problem {problem.value}",
        )
        _require(method not in methods, path, f"{method.value} is listed twice")
        methods.append(method)

    r_max = _get(exp, "r_max", int, p)
    _require(r_max >= 1, f"{p}.r_max", "must be at least 1")
    seed = _get(exp, "seed", int, p)
    _require(0 <= seed < 2**64, f"{p}.seed", "must be an unsigned 64-bit integer")
    n_mc = _get(exp, "n_mc", int, p, ExperimentConfig.n_mc)
    _require(n_mc >= 1, f"{p}.n_mc", "must be at least 1")
    eval_every = _get(exp, "eval_every", int, p, ExperimentConfig.eval_every)
    _require(eval_every >= 0, f"{p}.eval_every", "must be nonnegative")
    if "threads" in exp:
        threads = _get(exp, "threads", int, p)
    else:
        try:
            threads = get_default_threads()
        except ValueError as e:
            raise ConfigError(f"{p}.threads: {e}") from None
    _require(threads >= 1, f"{p}.threads", "must be at least 1")

    if "output_dir" in exp:
        output_dir = Path(_get(exp, "output_dir", str, p))
        if not output_dir.is_absolute() and base_dir is not None:
            output_dir = base_dir / output_dir
    else:
        output_dir = get_results_dir()

    network = None
    if "network" in data:
        network = parse_network(data["network"])
    elif problem == ProblemKind.WMMSE:
        raise ConfigError("network: required table is missing for problem wmmse")

    dictionary = _parse_dataclass(
        DictionaryParams, data.get("dictionary", {}), "dictionary"
    )
    if dictionary.corpus is not None:
        corpus = Path(dictionary.corpus)
        if not corpus.is_absolute() and base_dir is not None:
            corpus = base_dir / corpus
        dictionary = replace(dictionary, corpus=str(corpus))
    sg = _parse_dataclass(SGParams, data.get("sg", {}), "sg")
    properties = _parse_dataclass(
        PropertyParams, data.get("properties", {}), "properties"
    )
    _validate_params(dictionary, sg, properties)
    if Method.SG_CONSTANT in methods and not sg.allow_constant_step:
        raise ConfigError(
            "sg.allow_constant_step: must be true to run sg_constant"
        )

    return ExperimentConfig(
        name=_get(exp, "name", str, p),
        problem=problem,
        methods=tuple(methods),
        r_max=r_max,
        seed=seed,
        n_mc=n_mc,
        eval_every=eval_every,
        output_dir=output_dir,
        threads=threads,
        write_xlsx=_get(exp, "write_xlsx", bool, p, False),
        network=network,
        mean_variant=_parse_enum(
            MeanChannelVariant,
            _get(exp, "mean_variant", str, p, MeanChannelVariant.PATH_LOSS.value),
            f"{p}.mean_variant",
        ),
        dictionary=dictionary,
        sg=sg,
        properties=properties,
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate an experiment configuration file.

    Relative paths inside the file resolve against the file's directory.

    Raises:
        ConfigError: If the file is missing, not valid TOML or off-schema
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    config = parse_config(data, base_dir=path.parent)
    logger.info(f"Loaded config '{config.name}' from {path}")
    return config
