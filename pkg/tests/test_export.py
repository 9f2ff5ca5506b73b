import math
from dataclasses import replace

import numpy as np
import pytest
from openpyxl import load_workbook

from ssumkit.core import RngStream
from ssumkit.errors import NonFinite
from ssumkit.models.experiment import (
    HASH_EXCLUDED_FIELDS,
    ExperimentConfig,
    Method,
    ProblemKind,
    ResultRow,
    ResultTable,
)
from ssumkit.models.trace import RunTrace, TraceRecord
from ssumkit.services.export import (
    ExportFormat,
    ExportService,
    config_hash,
    file_sha256,
    format_float,
    load_corpus,
    load_dictionary,
    read_channels_csv,
    read_results,
    read_trace_csv,
    save_dictionary,
    write_channels_csv,
    write_trace_csv,
)
from ssumkit.services.wmmse import sample_channels


@pytest.fixture
def table():
    return ResultTable(
        [
            ResultRow("ssum_sg", 10, 0.5, 0.01, wall_time=0.2),
            ResultRow("ssum_sg", 20, 0.25, 0.01, wall_time=0.4),
            ResultRow("sg_diminishing", 10, 0.75, 0.02, wall_time=0.1),
            ResultRow("sg_diminishing", 20, 0.3, 0.02, wall_time=0.3),
        ]
    )


def sg_config(tmp_path, seed=1):
    return ExperimentConfig(
        name="export",
        problem=ProblemKind.SG,
        methods=(Method.SSUM_SG, Method.SG_DIMINISHING),
        r_max=20,
        seed=seed,
        output_dir=tmp_path,
    )


class TestFormatting:
    def test_round_trip_precision(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert float(format_float(math.pi)) == math.pi

    def test_results_csv(self, table):
        text = ExportService(".").results_to_csv(table)
        lines = text.split("\n")
        assert lines[0] == "method,iteration,value,stderr"
        assert lines[1] == "ssum_sg,10,0.5,0.01"
        assert "0.2" not in lines[1]
        assert text.endswith("\n")

    def test_config_hash_tracks_the_seed(self, tmp_path):
        assert config_hash(sg_config(tmp_path)) == config_hash(sg_config(tmp_path))
        assert config_hash(sg_config(tmp_path)) != config_hash(
            sg_config(tmp_path, seed=2)
        )


class TestExportService:
    def test_csv_results_read_back(self, tmp_path, table):
        path = ExportService(tmp_path).export_results(table)
        assert path.name == "results.csv"
        assert read_results(path).rows == table.rows

    def test_xlsx_workbook(self, tmp_path, table):
        service = ExportService(tmp_path)
        path = service.export_results(table, ExportFormat.XLSX, sg_config(tmp_path))
        assert path.name == "results.xlsx"
        wb = load_workbook(path)
        assert wb.sheetnames == ["Results", "Summary"]
        results = wb["Results"]
        headers = [cell.value for cell in results[1]]
        assert headers == ["method", "iteration", "value", "stderr", "wall_time"]
        assert results.cell(row=2, column=5).value == pytest.approx(0.2)
        summary = wb["Summary"]
        assert summary.cell(row=1, column=1).value == "export summary"
        assert summary.cell(row=5, column=1).value == "ssum_sg"
        assert summary.cell(row=5, column=3).value == pytest.approx(0.25)

    def test_plot_data_and_manifest(self, tmp_path, table):
        config = sg_config(tmp_path)
        paths = ExportService(tmp_path).emit_plot_data(table, config)
        names = [p.name for p in paths]
        assert names == ["ssum_sg.csv", "sg_diminishing.csv", "manifest.txt"]
        assert paths[0].read_text().split("\n")[0] == "iteration,value,stderr"
        manifest = paths[-1].read_text().splitlines()
        assert manifest[0] == f"config_sha256 {config_hash(config)}"
        assert manifest[1] == "config_sha256_excludes output_dir,threads,write_xlsx"
        assert manifest[2] == "files 2"
        assert manifest[3] == f"ssum_sg.csv {file_sha256(paths[0])}"

    def test_hash_ignores_the_listed_fields(self, tmp_path):
        config = sg_config(tmp_path)
        moved = replace(
            config, output_dir=tmp_path / "elsewhere", threads=4, write_xlsx=True
        )
        assert config_hash(moved) == config_hash(config)
        assert not set(HASH_EXCLUDED_FIELDS) & set(config.to_dict())
        assert config_hash(replace(config, seed=config.seed + 1)) != config_hash(config)

    def test_reruns_are_byte_identical(self, tmp_path, table):
        config = sg_config(tmp_path)
        first = ExportService(tmp_path / "a").emit_plot_data(table, config)
        second = ExportService(tmp_path / "b").emit_plot_data(table, config)
        for a, b in zip(first, second):
            assert a.read_bytes() == b.read_bytes()

    def test_empty_table(self, tmp_path):
        paths = ExportService(tmp_path).emit_plot_data(ResultTable())
        assert len(paths) == 1
        assert paths[0].read_text() == "config_sha256 -\nfiles 0\n"


class TestTraceCsv:
    def test_round_trip_keeps_nan_gaps(self, tmp_path):
        trace = RunTrace(
            records=[
                TraceRecord(r=1, step_norm=0.5, surrogate_gap=0.1, sampled_obj=2.0),
                TraceRecord(
                    r=2, step_norm=0.25, surrogate_gap=float("nan"), sampled_obj=1.0
                ),
            ]
        )
        path = write_trace_csv(trace, tmp_path / "trace.csv")
        header = path.read_text().split("\n")[0]
        assert header == "r,step_norm,surrogate_gap,sampled_obj"
        records = read_trace_csv(path)
        assert [rec.r for rec in records] == [1, 2]
        assert records[0].surrogate_gap == 0.1
        assert math.isnan(records[1].surrogate_gap)
        assert records[1].step_norm == 0.25


class TestChannelAndDictionaryFiles:
    def test_channel_dump(self, tmp_path, small_channel_model):
        H = sample_channels(small_channel_model, RngStream(2).generator())
        path = write_channels_csv(H, tmp_path / "channels.csv")
        restored = read_channels_csv(path, H.serving)
        for u in range(H.n_users):
            for j in range(H.n_tx):
                np.testing.assert_array_equal(restored[u, j], H[u, j])

    def test_dictionary_checkpoint(self, tmp_path, gen):
        D = gen.standard_normal((4, 6))
        path = save_dictionary(D, tmp_path / "ckpt" / "D.csv")
        np.testing.assert_array_equal(load_dictionary(path), D)

    def test_corpus_formats(self, tmp_path, gen):
        signals = gen.standard_normal((5, 3))
        np.save(tmp_path / "signals.npy", signals)
        np.savetxt(tmp_path / "signals.csv", signals, delimiter=",", fmt="%.17g")
        np.testing.assert_array_equal(load_corpus(tmp_path / "signals.npy"), signals)
        np.testing.assert_array_equal(load_corpus(tmp_path / "signals.csv"), signals)

    def test_corpus_validation(self, tmp_path):
        (tmp_path / "empty.csv").write_text("")
        with pytest.raises(ValueError):
            load_corpus(tmp_path / "empty.csv")
        np.save(tmp_path / "bad.npy", np.array([[1.0, np.inf]]))
        with pytest.raises(NonFinite):
            load_corpus(tmp_path / "bad.npy")
