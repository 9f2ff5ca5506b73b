"""
Experiment configuration and result models.
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import pandas as pd

from ssumkit.config import DEFAULT_EVAL_EVERY, DEFAULT_GAMMA_PROX, DEFAULT_N_MC
from ssumkit.models.network import MeanChannelVariant, NetworkConfig

RESULT_COLUMNS = ["method", "iteration", "value", "stderr"]
# Fields left out of ExperimentConfig.to_dict and so out of the config hash
HASH_EXCLUDED_FIELDS = ("output_dir", "threads", "write_xlsx")


class ProblemKind(str, Enum):
    """Problem families the experiment runner knows."""

    WMMSE = "wmmse"
    DICTIONARY = "dictionary"
    SG = "sg"


class Method(str, Enum):
    """Methods by problem family."""

    STOCHASTIC_WMMSE = "stochastic_wmmse"
    ONE_SAMPLE_WMMSE = "one_sample_wmmse"
    MEAN_WMMSE = "mean_wmmse"
    SG_BEAMFORMING = "sg"
    DICTIONARY_PROX = "dictionary_prox"
    DICTIONARY_CLASSIC = "dictionary_classic"
    SG_DIMINISHING = "sg_diminishing"
    SSUM_SG = "ssum_sg"
    L1_SSUM_SG = "l1_ssum_sg"
    SG_CONSTANT = "sg_constant"


METHODS_BY_PROBLEM = {
    ProblemKind.WMMSE: (
        Method.STOCHASTIC_WMMSE,
        Method.ONE_SAMPLE_WMMSE,
        Method.MEAN_WMMSE,
        Method.SG_BEAMFORMING,
    ),
    ProblemKind.DICTIONARY: (Method.DICTIONARY_PROX, Method.DICTIONARY_CLASSIC),
    ProblemKind.SG: (
        Method.SG_DIMINISHING,
        Method.SSUM_SG,
        Method.L1_SSUM_SG,
        Method.SG_CONSTANT,
    ),
}


@dataclass(frozen=True)
class DictionaryParams:
    """Planted-dictionary experiment settings."""

    n: int = 8
    k: int = 10
    sparsity: int = 3
    noise_std: float = 0.01
    lam: float = 0.05
    gamma_prox: float = DEFAULT_GAMMA_PROX
    corpus: Optional[str] = None  # CSV or .npy of signals; planted source if unset


@dataclass(frozen=True)
class SGParams:
    """Stochastic least-squares demo settings."""

    dim: int = 5
    noise_std: float = 0.1
    l1: float = 0.01
    allow_constant_step: bool = False
    constant_step: float = 0.1


@dataclass(frozen=True)
class PropertyParams:
    """Sample sizes and thresholds of the property suite."""

    n_trials: int = 1000
    n_convexity_checks: int = 200
    tightness_tol: float = 1e-7
    convexity_tol: float = 1e-8
    r_max: int = 500
    r_min: int = 50
    r_start: int = 5
    slack: float = 5.0
    gap_early: int = 10
    gap_ratio: float = 0.5
    gap_seeds: int = 5
    sg_iterations: int = 1000
    inject_negative_rho: bool = False


@dataclass
class ExperimentConfig:
    """
    One experiment: a problem, the methods to compare and how to score them.

    Attributes:
        name: Scenario name
        problem: Problem family
        methods: Methods to run, in order
        r_max: Iterations per method
        n_mc: Monte-Carlo evaluation samples
        eval_every: Score every this many iterations; 0 scores nothing
        seed: Master seed every random stream is derived from
        output_dir: Where results are written
        threads: Worker threads for Monte-Carlo scoring
        write_xlsx: Also write the result table as an XLSX workbook
        network: Network settings of WMMSE experiments
        mean_variant: Mean-channel treatment of Rayleigh-only links
        dictionary: Dictionary-learning settings
        sg: Stochastic-gradient demo settings
        properties: Property-suite settings
    """

    name: str
    problem: ProblemKind
    methods: tuple[Method, ...]
    r_max: int
    seed: int
    n_mc: int = DEFAULT_N_MC
    eval_every: int = DEFAULT_EVAL_EVERY
    output_dir: Path = Path("results")
    threads: int = 1
    write_xlsx: bool = False
    network: Optional[NetworkConfig] = None
    mean_variant: MeanChannelVariant = MeanChannelVariant.PATH_LOSS
    dictionary: DictionaryParams = field(default_factory=DictionaryParams)
    sg: SGParams = field(default_factory=SGParams)
    properties: PropertyParams = field(default_factory=PropertyParams)

    @property
    def schedule(self) -> list[int]:
        """Iterations at which every method is scored."""
        if self.eval_every <= 0:
            return []
        return list(range(self.eval_every, self.r_max + 1, self.eval_every))

    def to_dict(self) -> dict:
        """Canonical dictionary of every field that influences results."""
        return {
            "name": self.name,
            "problem": self.problem.value,
            "methods": [m.value for m in self.methods],
            "r_max": self.r_max,
            "seed": self.seed,
            "n_mc": self.n_mc,
            "eval_every": self.eval_every,
            "mean_variant": self.mean_variant.value,
            "network": self.network.to_dict() if self.network else None,
            "dictionary": asdict(self.dictionary),
            "sg": asdict(self.sg),
            "properties": asdict(self.properties),
        }


@dataclass
class ResultRow:
    """Score of one method at one scheduled iteration."""

    method: str
    iteration: int
    value: float
    stderr: float
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        """Convert to dictionary representation (without the wall time)."""
        return {
            "method": self.method,
            "iteration": self.iteration,
            "value": self.value,
            "stderr": self.stderr,
        }

    @classmethod
    def from_row(cls, row: dict) -> "ResultRow":
        """Create a ResultRow from a parsed CSV row."""
        return cls(
            method=str(row["method"]),
            iteration=int(row["iteration"]),
            value=float(row["value"]),
            stderr=float(row["stderr"]),
        )


@dataclass
class ResultTable:
    """Rows of (method, iteration, value, stderr, wall time)."""

    rows: list[ResultRow] = field(default_factory=list)

    def add(self, row: ResultRow) -> None:
        self.rows.append(row)

    def extend(self, rows: list[ResultRow]) -> None:
        self.rows.extend(rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def methods(self) -> list[str]:
        """Methods in first-appearance order."""
        return list(dict.fromkeys(row.method for row in self.rows))

    def for_method(self, method: str) -> list[ResultRow]:
        return [row for row in self.rows if row.method == method]

    def final(self, method: str) -> ResultRow:
        """Row at the largest scheduled iteration of a method."""
        rows = self.for_method(method)
        if not rows:
            raise KeyError(f"no results for method {method}")
        return max(rows, key=lambda row: row.iteration)

    def to_frame(self, include_wall_time: bool = False) -> pd.DataFrame:
        """Rows as a DataFrame with the result columns."""
        columns = RESULT_COLUMNS + (["wall_time"] if include_wall_time else [])
        records = []
        for row in self.rows:
            record = row.to_dict()
            if include_wall_time:
                record["wall_time"] = row.wall_time
            records.append(record)
        return pd.DataFrame.from_records(records, columns=columns)
