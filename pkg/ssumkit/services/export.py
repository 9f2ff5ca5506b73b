"""
Export service for experiment outputs.

Writes result tables as CSV or XLSX, per-method plot data with a manifest,
run traces, channel dumps and dictionary checkpoints. Every CSV is written
with a fixed float format and newline so reruns are byte-identical.
"""

import csv
import hashlib
import io
import json
import logging
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional, Union, cast

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils import get_column_letter
from openpyxl.worksheet.worksheet import Worksheet

from ssumkit.config import CSV_FLOAT_FORMAT, MANIFEST_FILE, RESULTS_FILE
from ssumkit.errors import DimensionMismatch, NonFinite
from ssumkit.models.experiment import (
    HASH_EXCLUDED_FIELDS,
    RESULT_COLUMNS,
    ExperimentConfig,
    ResultRow,
    ResultTable,
)
from ssumkit.models.network import ChannelRealization
from ssumkit.models.trace import TRACE_COLUMNS, RunTrace, TraceRecord

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PLOT_COLUMNS = ["iteration", "value", "stderr"]
CHANNEL_COLUMNS = ["user", "tx", "row", "col", "re", "im"]


class ExportFormat(str, Enum):
    """Supported export formats."""

    CSV = "csv"
    XLSX = "xlsx"


def format_float(value: float) -> str:
    return CSV_FLOAT_FORMAT % value


def _csv_text(header: list[str], rows: list[list]) -> str:
    text_buffer = io.StringIO()
    writer = csv.writer(text_buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_float(v) if isinstance(v, float) else v for v in row]
        )
    return text_buffer.getvalue()


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    return path


def file_sha256(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of every result-relevant field."""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Run traces


def write_trace_csv(trace: RunTrace, path: PathLike) -> Path:
    """Write the traced records as ``r,step_norm,surrogate_gap,sampled_obj``."""
    rows = [
        [rec.r, float(rec.step_norm), float(rec.surrogate_gap), float(rec.sampled_obj)]
        for rec in trace.records
    ]
    return _write_text(Path(path), _csv_text(list(TRACE_COLUMNS), rows))


def read_trace_csv(path: PathLike) -> list[TraceRecord]:
    with open(path, encoding="utf-8", newline="") as f:
        return [TraceRecord.from_row(row) for row in csv.DictReader(f)]


# Channels, dictionaries and corpora


def write_channels_csv(H: ChannelRealization, path: PathLike) -> Path:
    """Dump every channel entry as ``user,tx,row,col,re,im``."""
    rows = []
    for u in range(H.n_users):
        for j in range(H.n_tx):
            M = H[u, j]
            for i in range(M.shape[0]):
                for c in range(M.shape[1]):
                    z = complex(M[i, c])
                    rows.append([u, j, i, c, z.real, z.imag])
    return _write_text(Path(path), _csv_text(CHANNEL_COLUMNS, rows))


def read_channels_csv(path: PathLike, serving) -> ChannelRealization:
    """
    Rebuild a channel realization from a dump.

    Args:
        path: CSV written by write_channels_csv
        serving: Serving transmitter of every user

    Returns:
        ChannelRealization with the dumped entries
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = set(CHANNEL_COLUMNS) - set(frame.columns)
    if missing:
        raise DimensionMismatch(f"channel dump lacks columns {sorted(missing)}")
    n_users = int(frame["user"].max()) + 1
    n_tx = int(frame["tx"].max()) + 1
    links = []
    for u in range(n_users):
        row = []
        for j in range(n_tx):
            block = frame[(frame["user"] == u) & (frame["tx"] == j)]
            shape = (int(block["row"].max()) + 1, int(block["col"].max()) + 1)
            H = np.zeros(shape, dtype=complex)
            H[block["row"].to_numpy(), block["col"].to_numpy()] = (
                block["re"].to_numpy() + 1j * block["im"].to_numpy()
            )
            row.append(H)
        links.append(row)
    return ChannelRealization.from_lists(links, serving)


def save_dictionary(D: np.ndarray, path: PathLike) -> Path:
    """Checkpoint a dictionary: one row per dimension, one column per atom."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(D, dtype=float), delimiter=",", fmt=CSV_FLOAT_FORMAT)
    return path


def load_dictionary(path: PathLike) -> np.ndarray:
    D = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(D)):
        raise NonFinite(f"dictionary checkpoint {path} holds non-finite values")
    return D


def load_corpus(path: PathLike) -> np.ndarray:
    """Signals as rows, from a ``.npy`` array or a headerless CSV."""
    path = Path(path)
    if path.suffix == ".npy":
        corpus = np.atleast_2d(np.load(path))
    else:
        corpus = np.loadtxt(path, delimiter=",", ndmin=2)
    if corpus.size == 0:
        raise ValueError(f"corpus {path} is empty")
    if not np.all(np.isfinite(corpus)):
        raise NonFinite(f"corpus {path} holds non-finite values")
    logger.info(f"Loaded {corpus.shape[0]} signals of dimension {corpus.shape[1]}")
    return corpus


def read_results(path: PathLike) -> ResultTable:
    """Read a ``results.csv`` back into a ResultTable."""
    frame = pd.read_csv(path, float_precision="round_trip")
    return ResultTable([ResultRow.from_row(row) for row in frame.to_dict("records")])


class ExportService:
    """Service for writing experiment results to an output directory."""

    def __init__(self, output_dir: PathLike):
        """
        Initialize the export service.

        Args:
            output_dir: Directory every file is written to
        """
        self.output_dir = Path(output_dir)

    def results_to_csv(self, table: ResultTable) -> str:
        """Result rows as CSV text, wall time excluded."""
        rows = [
            [row.method, row.iteration, float(row.value), float(row.stderr)]
            for row in table.rows
        ]
        return _csv_text(RESULT_COLUMNS, rows)

    def results_to_xlsx(
        self, table: ResultTable, config: Optional[ExperimentConfig] = None
    ) -> io.BytesIO:
        """
        Export a result table to XLSX format with formatting.

        Args:
            table: Result table
            config: Experiment the table came from, shown on the summary sheet

        Returns:
            BytesIO buffer containing the XLSX data
        """
        wb = Workbook()
        ws = cast(Worksheet, wb.active)
        ws.title = "Results"

        header_font = Font(bold=True, color="FFFFFF")
        header_fill = PatternFill(
            start_color="4472C4", end_color="4472C4", fill_type="solid"
        )
        headers = RESULT_COLUMNS + ["wall_time"]
        for col, header in enumerate(headers, 1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.font = header_font
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal="center")

        for row_idx, row in enumerate(table.rows, 2):
            ws.cell(row=row_idx, column=1, value=row.method)
            ws.cell(row=row_idx, column=2, value=row.iteration)
            ws.cell(row=row_idx, column=3, value=row.value).number_format = "0.000000"
            ws.cell(row=row_idx, column=4, value=row.stderr).number_format = "0.000000"
            ws.cell(row=row_idx, column=5, value=row.wall_time).number_format = "0.000"

        for col, width in enumerate([22, 10, 16, 16, 12], 1):
            ws.column_dimensions[get_column_letter(col)].width = width
        ws.freeze_panes = "A2"

        self._add_summary_sheet(wb, table, config)

        buffer = io.BytesIO()
        wb.save(buffer)
        buffer.seek(0)
        return buffer

    def _add_summary_sheet(
        self,
        wb: Workbook,
        table: ResultTable,
        config: Optional[ExperimentConfig],
    ):
        """Add a sheet with the final score of every method."""
        ws = wb.create_sheet(title="Summary")
        header_font = Font(bold=True)
        title = config.name if config is not None else "Experiment"
        ws.cell(row=1, column=1, value=f"{title} summary").font = Font(
            bold=True, size=14
        )
        ws.cell(
            row=2,
            column=1,
            value=f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M')}",
        )

        start = 4
        for col, header in enumerate(["Method", "Iteration", "Final value"], 1):
            ws.cell(row=start, column=col, value=header).font = header_font
        for offset, method in enumerate(table.methods, 1):
            final = table.final(method)
            ws.cell(row=start + offset, column=1, value=method)
            ws.cell(row=start + offset, column=2, value=final.iteration)
            ws.cell(row=start + offset, column=3, value=final.value).number_format = (
                "0.000000"
            )

        ws.column_dimensions["A"].width = 22
        ws.column_dimensions["B"].width = 10
        ws.column_dimensions["C"].width = 16

    def get_filename(self, stem: str, format: ExportFormat) -> str:
        return f"{stem}.{format.value}"

    def export_results(
        self,
        table: ResultTable,
        format: ExportFormat = ExportFormat.CSV,
        config: Optional[ExperimentConfig] = None,
    ) -> Path:
        """Write the result table as ``results.csv`` or ``results.xlsx``."""
        if format == ExportFormat.CSV:
            path = self.output_dir / RESULTS_FILE
            _write_text(path, self.results_to_csv(table))
        else:
            stem = Path(RESULTS_FILE).stem
            path = self.output_dir / self.get_filename(stem, format)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.results_to_xlsx(table, config).getvalue())
        logger.info(f"Wrote {len(table)} result rows to {path}")
        return path

    def emit_plot_data(
        self, table: ResultTable, config: Optional[ExperimentConfig] = None
    ) -> list[Path]:
        """
        Write one ``iteration,value,stderr`` CSV per method plus a manifest.

        The manifest lists the config hash, the config fields the hash leaves
        out and the SHA-256 of every data file.
        An empty table yields a manifest with zero data files.

        Returns:
            Paths of the data files followed by the manifest
        """
        paths = []
        for method in table.methods:
            rows = [
                [row.iteration, float(row.value), float(row.stderr)]
                for row in table.for_method(method)
            ]
            path = self.output_dir / self.get_filename(method, ExportFormat.CSV)
            paths.append(_write_text(path, _csv_text(PLOT_COLUMNS, rows)))

        if config is None:
            lines = ["config_sha256 -"]
        else:
            lines = [
                f"config_sha256 {config_hash(config)}",
                f"config_sha256_excludes {','.join(HASH_EXCLUDED_FIELDS)}",
            ]
        lines.append(f"files {len(paths)}")
        lines += [f"{p.name} {file_sha256(p)}" for p in paths]
        manifest = _write_text(self.output_dir / MANIFEST_FILE, "\n".join(lines) + "\n")
        logger.info(f"Wrote plot data for {len(paths)} methods to {self.output_dir}")
        return paths + [manifest]
