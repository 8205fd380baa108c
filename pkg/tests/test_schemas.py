"""
Tests for configuration and report schemas.
"""

import pytest

from chi2map.exceptions import ParseError
from chi2map.schemas.bench_schema import BENCH_COLUMNS, BENCH_HEADER, BenchReport
from chi2map.schemas.pipeline_schema import EmbeddingMethod, PipelineConfig, read_kernel_config


class TestPipelineConfig:
    """Tests for the key=value pipeline configuration."""

    def test_text_round_trip(self):
        config = PipelineConfig(method="chebyshev", terms=7, rf_dims=300, gamma=0.1, seed=12,
                                pca_keep=100, lambda_=0.25, chunk_rows=64, rf=False,
                                paths={"input": "a.bin", "labels": "y.csv"})
        assert PipelineConfig.from_text(config.to_text()) == config

    def test_lambda_key_and_comments(self):
        config = PipelineConfig.from_text("# run 3\nmethod = direct\n\nlambda=2.5\npath.model=m.c2m\n")
        assert config.method is EmbeddingMethod.DIRECT
        assert config.lambda_ == 2.5
        assert config.paths == {"model": "m.c2m"}
        assert config.terms == 5

    @pytest.mark.parametrize("text", ["terms 5\n", "terms=-1\n", "method=cosine\n", "colour=red\n"])
    def test_invalid_text(self, text):
        with pytest.raises(ParseError):
            PipelineConfig.from_text(text)


class TestKernelConfig:
    """Tests for multi-kernel configuration files."""

    def test_records_and_relative_paths(self, tmp_path):
        path = tmp_path / "kernels.txt"
        path.write_text("# sift and color\nsift.bin direct 5 1000 0.75 0\n"
                        "/data/color.bin, chebyshev, 3, 500, 0.5, 1  # comment\n")
        records = read_kernel_config(path)
        assert len(records) == 2
        assert records[0].path == tmp_path / "sift.bin"
        assert records[0].method is EmbeddingMethod.DIRECT
        assert str(records[1].path) == "/data/color.bin"
        assert (records[1].terms, records[1].rf_dims, records[1].gamma, records[1].seed) == (3, 500, 0.5, 1)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "kernels.txt"
        path.write_text("a.bin direct 5 1000 0.75 0\nb.bin direct 5 1000\n")
        with pytest.raises(ParseError) as info:
            read_kernel_config(path)
        assert info.value.row == 2

    @pytest.mark.parametrize("text", ["", "a.bin direct 5 1000 0.0 0\n", "a.bin sift 5 1000 0.75 0\n"])
    def test_invalid_records(self, tmp_path, text):
        path = tmp_path / "kernels.txt"
        path.write_text(text)
        with pytest.raises(ParseError):
            read_kernel_config(path)


class TestBenchReport:
    """Tests for benchmark reports."""

    def test_csv_layout(self):
        report = BenchReport()
        report.add("direct", "max_abs_error", 0.1, N=5)
        report.add("chebyshev", "loglog_slope", -1.25)
        lines = report.to_csv().splitlines()
        assert lines[0] == BENCH_HEADER
        assert lines[1] == ",".join(BENCH_COLUMNS)
        assert lines[2] == "direct,5,0,-1,max_abs_error,0.1"
        assert lines[3] == "chebyshev,0,0,-1,loglog_slope,-1.25"

    def test_select(self):
        report = BenchReport()
        report.add("direct", "a", 1.0, N=1)
        report.add("direct", "b", 2.0, N=2)
        report.add("chebyshev", "a", 3.0, N=1)
        assert [row.value for row in report.select(metric="a")] == [1.0, 3.0]
        assert [row.value for row in report.select(method="direct", N=2)] == [2.0]

    def test_reports_do_not_share_rows(self):
        first = BenchReport()
        first.add("direct", "a", 1.0)
        assert BenchReport().rows == []
