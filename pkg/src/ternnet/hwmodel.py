"""Analytic cost model of the pipelined ternary-MLP hardware.

Each layer is a pipeline stage holding one adder/subtractor and one
register per neuron, both ceil(log2 k) + 1 bits wide for fan-in k, and
consumes one input item per clock cycle.  Throughput is therefore set by
the widest stage plus a small per-layer overhead; latency is the sum of
stage fill times plus a pipeline fill constant.  The two overhead
constants are calibrated against measured reference points rather than
asserted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources


@dataclass
class PipelineSpec:
    input_dim: int
    layer_sizes: list
    clock_hz: float
    per_layer_overhead: float = 0.0
    pipeline_fill_overhead: float = 0.0

    def __post_init__(self):
        if self.clock_hz <= 0:
            raise ValueError("clock_hz must be positive")
        if self.input_dim < 1 or any(s < 1 for s in self.layer_sizes):
            raise ValueError("dimensions must be >= 1")


def adder_width(k: int) -> int:
    """Accumulator width in bits for a neuron with k ternary inputs."""
    if k < 1:
        raise ValueError("fan-in must be >= 1")
    return (k - 1).bit_length() + 1


def throughput(spec: PipelineSpec) -> float:
    """Images per second: the clock divided by the busiest stage's items.

    Stage items are each layer's input dimension; the final entry covers
    the classifier stage draining the last hidden layer.
    """
    stages = [spec.input_dim] + list(spec.layer_sizes)
    return spec.clock_hz / (max(stages) + spec.per_layer_overhead)


def latency(spec: PipelineSpec) -> float:
    """Seconds from first input item to classification of one image."""
    cycles = spec.input_dim + sum(s + spec.per_layer_overhead for s in spec.layer_sizes)
    cycles += spec.pipeline_fill_overhead
    return cycles / spec.clock_hz


def fit_overheads(rows: list) -> tuple:
    """Calibrate (per_layer_overhead, pipeline_fill_overhead) from rows of
    (spec, observed_throughput_fps, observed_latency_s).

    Exactly two reference rows are expected.  The per-layer constant is the
    relative-error least-squares fit of the observed pipeline intervals;
    the fill constant then fits the observed latency cycle counts.
    """
    if len(rows) != 2:
        raise ValueError("calibration uses exactly two reference rows")
    num = den = 0.0
    for spec, fps, _ in rows:
        interval = spec.clock_hz / fps
        resid = interval - max([spec.input_dim] + list(spec.layer_sizes))
        weight = 1.0 / (interval * interval)
        num += weight * resid
        den += weight
    c = max(num / den, 0.0)
    num = den = 0.0
    for spec, _, lat in rows:
        cycles = lat * spec.clock_hz
        base = spec.input_dim + sum(spec.layer_sizes) + c * len(spec.layer_sizes)
        weight = 1.0 / (cycles * cycles)
        num += weight * (cycles - base)
        den += weight
    f = max(num / den, 0.0)
    return c, f


def reference_measurements() -> dict:
    """Packaged 200 MHz FPGA reference points for the 12-config MLP sweep."""
    with resources.files("ternnet").joinpath("hw_reference.json").open("r") as fh:
        return json.load(fh)


def reference_sweep(per_layer_overhead: float | None = None, pipeline_fill_overhead: float | None = None) -> list:
    """The built-in 12 MLP configurations (width x depth sweep at 200 MHz)."""
    ref = reference_measurements()
    if per_layer_overhead is None or pipeline_fill_overhead is None:
        c, f = calibrate_from_reference()
    else:
        c, f = per_layer_overhead, pipeline_fill_overhead
    specs = []
    for row in ref["rows"]:
        specs.append(
            PipelineSpec(
                input_dim=ref["input_dim"],
                layer_sizes=[row["width"]] * row["depth"],
                clock_hz=ref["clock_hz"],
                per_layer_overhead=c,
                pipeline_fill_overhead=f,
            )
        )
    return specs


def calibrate_from_reference() -> tuple:
    """Fit the overhead constants on the two designated reference rows."""
    ref = reference_measurements()
    rows = []
    for row in ref["rows"]:
        if [row["width"], row["depth"]] in ref["fit_rows"]:
            spec = PipelineSpec(
                input_dim=ref["input_dim"],
                layer_sizes=[row["width"]] * row["depth"],
                clock_hz=ref["clock_hz"],
            )
            rows.append((spec, row["throughput_fps"], row["latency_us"] * 1e-6))
    return fit_overheads(rows)


def report(specs: list) -> str:
    """Cost CSV (one row per spec) with a schema-version comment line."""
    lines = [
        "# tnn-csv-v1 hwmodel-report",
        "input_dim,layers,widths,max_adder_width_bits,throughput_fps,latency_us",
    ]
    for spec in specs:
        widths = "x".join(str(s) for s in spec.layer_sizes)
        fan_ins = [spec.input_dim] + list(spec.layer_sizes)
        max_bits = max(adder_width(k) for k in fan_ins[: max(len(spec.layer_sizes), 1)])
        lines.append(
            f"{spec.input_dim},{len(spec.layer_sizes)},{widths or '-'},{max_bits},"
            f"{throughput(spec):.10g},{latency(spec) * 1e6:.10g}"
        )
    return "\n".join(lines) + "\n"
