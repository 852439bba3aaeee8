"""Profiler totals, report formatting and the latency benchmark."""

import numpy as np
import pytest

from litedepth.errors import ValidationError
from litedepth.model import build, preset_config
from litedepth.profiling import ProfileReport, bench_latency, count_macs, count_params


@pytest.fixture(scope="module")
def xxs():
    return build(preset_config("xxs"))


class TestCounts:
    def test_params_match_weight_arrays(self, xxs):
        report = count_params(xxs)
        actual = sum(
            v.size
            for k, v in xxs.weights.items()
            if not (k.endswith(".bn_mean") or k.endswith(".bn_var"))
        )
        assert report.params_total == actual

    def test_totals_are_sums_of_per_layer(self, xxs):
        report = count_macs(xxs, (192, 256))
        assert report.params_total == sum(p for _, p, _, _ in report.per_layer)
        assert report.macs_total == sum(m for _, _, m, _ in report.per_layer)

    def test_macs_default_to_configured_size(self, xxs):
        assert count_macs(xxs).macs_total == count_macs(xxs, (192, 256)).macs_total

    def test_wide_input_macs_larger(self, xxs):
        narrow = count_macs(xxs, (192, 256)).macs_total
        wide = count_macs(xxs, (192, 636)).macs_total
        assert wide > 2 * narrow

    def test_invalid_size_rejected(self, xxs):
        from litedepth.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            count_macs(xxs, (100, 100))


class TestReportFormatting:
    def test_lines_contain_totals(self, xxs):
        report = count_macs(xxs, (192, 256))
        text = "\n".join(report.lines())
        assert f"params_total: {report.params_total}" in text
        assert f"macs_total: {report.macs_total}" in text
        assert "input_size: 256x192" in text

    def test_table_lists_every_layer(self, xxs):
        report = count_macs(xxs, (192, 256))
        table = report.table()
        for name, _, _, _ in report.per_layer:
            assert name in table
        assert "total" in table

    def test_to_dict_round_trips_through_json(self, xxs):
        import json

        report = count_macs(xxs, (192, 256))
        doc = json.loads(json.dumps(report.to_dict()))
        assert doc["params_total"] == report.params_total
        assert len(doc["per_layer"]) == len(report.per_layer)

    def test_latency_fields_absent_without_bench(self, xxs):
        report = count_macs(xxs)
        assert report.latency_ms_mean is None
        assert "fps" not in report.to_dict()


class TestBench:
    def test_produces_positive_latency(self, xxs):
        report = bench_latency(xxs, iterations=2, warmup=0)
        assert report.latency_ms_mean > 0
        assert report.fps > 0
        assert report.iterations == 2
        assert report.latency_ms_std >= 0

    def test_fps_consistent_with_latency(self, xxs):
        report = bench_latency(xxs, iterations=2, warmup=0)
        assert report.fps == pytest.approx(1000.0 / report.latency_ms_mean)

    def test_invalid_iterations_rejected(self, xxs):
        with pytest.raises(ValidationError):
            bench_latency(xxs, iterations=0)
        with pytest.raises(ValidationError):
            bench_latency(xxs, warmup=-1)

    def test_lines_include_latency(self, xxs):
        report = bench_latency(xxs, iterations=2, warmup=0)
        text = "\n".join(report.lines())
        assert "latency_ms_mean:" in text
        assert "fps:" in text


class TestProfileReport:
    def test_frozen(self):
        report = ProfileReport("xxs", (192, 256), 1, 2)
        with pytest.raises(AttributeError):
            report.params_total = 5

    def test_numpy_free_dict(self, xxs):
        # to_dict must contain plain types only so json.dumps never chokes.
        doc = count_macs(xxs).to_dict()

        def walk(v):
            if isinstance(v, dict):
                return all(walk(x) for x in v.values())
            if isinstance(v, list):
                return all(walk(x) for x in v)
            return isinstance(v, (int, float, str, type(None)))

        assert walk(doc)
        assert not any(isinstance(v, np.generic) for v in doc.values())
