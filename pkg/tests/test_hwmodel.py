import math

import pytest

from ternnet.hwmodel import (
    PipelineSpec,
    adder_width,
    calibrate_from_reference,
    fit_overheads,
    latency,
    reference_measurements,
    reference_sweep,
    report,
    throughput,
)


def test_adder_width_mnist_input():
    assert adder_width(784) == 11


def test_adder_width_single_input():
    assert adder_width(1) == 1


def test_adder_width_power_of_two():
    assert adder_width(1024) == 11


def test_adder_width_zero_rejected():
    with pytest.raises(ValueError):
        adder_width(0)


def test_adder_width_monotone_and_matches_formula():
    prev = 0
    for k in range(1, 4097):
        w = adder_width(k)
        assert w == math.ceil(math.log2(k)) + 1 if k > 1 else w == 1
        assert w >= prev
        prev = w


def test_throughput_input_bound_configuration():
    spec = PipelineSpec(input_dim=784, layer_sizes=[750, 750, 750], clock_hz=200e6)
    assert throughput(spec) == pytest.approx(200e6 / 784, abs=1e-6)
    assert round(throughput(spec)) == 255102


def test_throughput_wide_layer_with_overhead():
    spec = PipelineSpec(input_dim=784, layer_sizes=[1000], clock_hz=200e6, per_layer_overhead=10)
    assert int(throughput(spec)) == 198019


def test_throughput_one_hertz_degenerate():
    spec = PipelineSpec(input_dim=1, layer_sizes=[1], clock_hz=1.0)
    assert throughput(spec) == 1.0


def test_latency_zero_layers_pass_through():
    spec = PipelineSpec(input_dim=784, layer_sizes=[], clock_hz=200e6)
    assert latency(spec) == pytest.approx(784 / 200e6, abs=0)


def test_latency_calibrated_reference_points():
    sweep = {(s.layer_sizes[0], len(s.layer_sizes)): s for s in reference_sweep()}
    assert latency(sweep[(250, 1)]) * 1e6 == pytest.approx(5.37, rel=0.05)
    assert latency(sweep[(750, 3)]) * 1e6 == pytest.approx(15.6, rel=0.05)


def test_two_row_fit_predicts_all_reference_rows():
    ref = reference_measurements()
    c, f = calibrate_from_reference()
    assert c >= 0.0 and f >= 0.0
    for row, spec in zip(ref["rows"], reference_sweep()):
        assert throughput(spec) == pytest.approx(row["throughput_fps"], rel=0.05)
        assert latency(spec) * 1e6 == pytest.approx(row["latency_us"], rel=0.10)


def test_fit_requires_exactly_two_rows():
    spec = PipelineSpec(input_dim=784, layer_sizes=[250], clock_hz=200e6)
    with pytest.raises(ValueError):
        fit_overheads([(spec, 250000.0, 5e-6)])


def test_throughput_monotone_in_layer_width():
    prev = float("inf")
    for width in (100, 400, 784, 900, 1500):
        spec = PipelineSpec(input_dim=784, layer_sizes=[width, width], clock_hz=200e6)
        t = throughput(spec)
        assert t <= prev
        prev = t


def test_latency_strictly_increasing_in_depth():
    prev = 0.0
    for depth in range(1, 6):
        spec = PipelineSpec(input_dim=784, layer_sizes=[500] * depth, clock_hz=200e6, per_layer_overhead=3.0)
        lat = latency(spec)
        assert lat > prev
        prev = lat


def test_report_contains_all_reference_configs():
    text = report(reference_sweep())
    lines = text.strip().split("\n")
    assert lines[0].startswith("# tnn-csv-v1")
    assert len(lines) == 2 + 12  # schema comment, header, 12 rows


def test_report_empty_spec_list_header_only():
    text = report([])
    lines = text.strip().split("\n")
    assert len(lines) == 2


def test_report_deterministic():
    assert report(reference_sweep()) == report(reference_sweep())


def test_spec_validation():
    with pytest.raises(ValueError):
        PipelineSpec(input_dim=784, layer_sizes=[10], clock_hz=0.0)
    with pytest.raises(ValueError):
        PipelineSpec(input_dim=0, layer_sizes=[10], clock_hz=1.0)
