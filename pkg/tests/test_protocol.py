"""Delay sequencing, scan kernel, checkpointing, and signal export."""

import json

import numpy as np
import pytest

from polariton2d.model import ModelParams
from polariton2d.protocol import (
    CHECKPOINT_VERSION,
    DelayAxis,
    SequenceConfig,
    build_context,
    scan_signal,
    signal_point,
    write_signal_csv,
    write_signal_sidecar,
    _row_record,
)
from dataclasses import asdict


def small_seq(count=6, step=0.02, n_kicks=2, readout_ion=1, fixed="t1"):
    axes = {
        "t1": DelayAxis.fixed_delay(0.0),
        "t2": DelayAxis.grid(0.0, step, count),
        "t3": DelayAxis.grid(0.0, step, count),
    }
    if fixed == "t2":
        axes["t2"] = DelayAxis.fixed_delay(0.0)
        axes["t1"] = DelayAxis.grid(0.0, step, count)
    return SequenceConfig(
        t1=axes["t1"], t2=axes["t2"], t3=axes["t3"],
        readout_ion=readout_ion, n_kicks=n_kicks,
    )


def test_delay_axis_validation():
    with pytest.raises(ValueError):
        DelayAxis.fixed_delay(-0.1)
    with pytest.raises(ValueError):
        DelayAxis.grid(0.0, 0.0, 4)
    with pytest.raises(ValueError):
        DelayAxis.grid(0.0, 0.1, 0)
    with pytest.raises(ValueError):
        DelayAxis.grid(-1.0, 0.1, 4)


def test_delay_axis_values():
    ax = DelayAxis.grid(0.1, 0.05, 4)
    assert np.allclose(ax.values(), [0.1, 0.15, 0.2, 0.25])
    assert DelayAxis.fixed_delay(0.3).values() == pytest.approx([0.3])


def test_sequence_requires_exactly_two_grids():
    g = DelayAxis.grid(0.0, 0.1, 4)
    f = DelayAxis.fixed_delay(0.0)
    with pytest.raises(ValueError):
        SequenceConfig(t1=f, t2=f, t3=g)
    with pytest.raises(ValueError):
        SequenceConfig(t1=g, t2=g, t3=g)


def test_sequence_kind_names_the_transform_pair():
    g = DelayAxis.grid(0.0, 0.1, 4)
    f = DelayAxis.fixed_delay(0.0)
    assert SequenceConfig(t1=f, t2=g, t3=g).kind == "s23"
    assert SequenceConfig(t1=g, t2=f, t3=g).kind == "s13"
    assert SequenceConfig(t1=g, t2=g, t3=f).kind == "s12"
    assert SequenceConfig(t1=f, t2=g, t3=g).axes == ("t2", "t3")


def test_readout_ion_bounds():
    g = DelayAxis.grid(0.0, 0.1, 4)
    f = DelayAxis.fixed_delay(0.0)
    with pytest.raises(ValueError):
        SequenceConfig(t1=f, t2=g, t3=g, readout_ion=0)
    with pytest.raises(ValueError):
        SequenceConfig(t1=f, t2=g, t3=g, n_kicks=-1)


def test_zero_delay_signal_is_two(ctx_fig3):
    for j in (1, 2):
        seq = small_seq(readout_ion=j)
        assert signal_point(ctx_fig3, seq, 0.0, 0.0, 0.0) == pytest.approx(
            2.0, abs=1e-10
        )


def test_scan_matches_pointwise_evaluation(ctx_fig3):
    seq = small_seq(count=4)
    grid = scan_signal(ctx_fig3, seq)
    for i, ta in enumerate(grid.axis_a):
        for j, tb in enumerate(grid.axis_b):
            point = signal_point(ctx_fig3, seq, 0.0, ta, tb)
            assert grid.values[i, j] == pytest.approx(point, abs=1e-12)


def test_scan_is_thread_invariant(ctx_fig3):
    seq = small_seq(count=8)
    serial = scan_signal(ctx_fig3, seq, threads=1)
    threaded = scan_signal(ctx_fig3, seq, threads=4)
    assert np.array_equal(serial.values, threaded.values)


def test_readout_ion_symmetry(ctx_fig3):
    # the two-site chain is mirror symmetric and both protocol states are
    # parity eigenstates, so the readout site cannot matter
    a = scan_signal(ctx_fig3, small_seq(count=5, readout_ion=1))
    b = scan_signal(ctx_fig3, small_seq(count=5, readout_ion=2))
    scale = np.max(np.abs(a.values))
    assert np.max(np.abs(a.values - b.values)) / scale < 1e-10


def test_s13_scan_runs(ctx_fig4):
    seq = small_seq(count=4, fixed="t2")
    grid = scan_signal(ctx_fig4, seq)
    assert grid.metadata["kind"] == "s13"
    assert grid.labels == ("t1", "t3")
    assert grid.shape == (4, 4)


def test_scan_metadata_roundtrip(ctx_fig3):
    seq = small_seq(count=3)
    grid = scan_signal(ctx_fig3, seq)
    md = grid.metadata
    assert md["kind"] == "s23"
    assert md["n_ions"] == 2
    assert md["readout_ion"] == 1
    assert md["n_kicks"] == 2
    assert md["failed_points"] == []
    assert md["resumed_rows"] == 0
    assert md["params"]["gamma"] == 0.5
    assert md["fixed"] == {"t1": 0.0}


def _scan_header(ctx, seq, ax_a, ax_b):
    return {
        "version": CHECKPOINT_VERSION,
        "kind": seq.kind,
        "shape": [ax_a.count, ax_b.count],
        "axis_a": [ax_a.start, ax_a.step],
        "axis_b": [ax_b.start, ax_b.step],
        "n_kicks": seq.n_kicks,
        "readout_ion": seq.readout_ion,
        "params": asdict(ctx.params),
    }


def test_checkpoint_resume_reuses_rows(ctx_fig3, tmp_path):
    seq = small_seq(count=5)
    reference = scan_signal(ctx_fig3, seq)
    ckpt = tmp_path / "scan.checkpoint.jsonl"
    header = _scan_header(ctx_fig3, seq, seq.t2, seq.t3)
    with open(ckpt, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(_row_record(0, reference.values[0]))
        fh.write(_row_record(3, reference.values[3]))
    resumed = scan_signal(ctx_fig3, seq, checkpoint_path=ckpt)
    assert resumed.metadata["resumed_rows"] == 2
    assert np.array_equal(resumed.values, reference.values)
    assert not ckpt.exists()  # removed after a complete scan


def test_checkpoint_with_stale_header_is_discarded(ctx_fig3, tmp_path):
    seq = small_seq(count=4)
    reference = scan_signal(ctx_fig3, seq)
    ckpt = tmp_path / "scan.checkpoint.jsonl"
    header = _scan_header(ctx_fig3, seq, seq.t2, seq.t3)
    header["n_kicks"] = 7
    with open(ckpt, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(_row_record(0, reference.values[0] + 99.0))
    resumed = scan_signal(ctx_fig3, seq, checkpoint_path=ckpt)
    assert resumed.metadata["resumed_rows"] == 0
    assert np.array_equal(resumed.values, reference.values)


def test_checkpoint_tolerates_torn_tail(ctx_fig3, tmp_path):
    seq = small_seq(count=4)
    reference = scan_signal(ctx_fig3, seq)
    ckpt = tmp_path / "scan.checkpoint.jsonl"
    header = _scan_header(ctx_fig3, seq, seq.t2, seq.t3)
    with open(ckpt, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write(_row_record(1, reference.values[1]))
        fh.write('{"row": 2, "re": [0.1')  # interrupted mid-write
    resumed = scan_signal(ctx_fig3, seq, checkpoint_path=ckpt)
    assert resumed.metadata["resumed_rows"] == 1
    assert np.array_equal(resumed.values, reference.values)


def test_signal_csv_format(ctx_fig3, tmp_path):
    seq = small_seq(count=3)
    grid = scan_signal(ctx_fig3, seq)
    path = tmp_path / "signal.csv"
    write_signal_csv(grid, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_a_ms,t_b_ms,re,im"
    assert len(lines) == 1 + 9
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[2]) == pytest.approx(2.0, abs=1e-12)
    # repr round trip: parsing back gives the stored float exactly
    assert float(first[2]) == grid.values[0, 0].real


def test_signal_sidecar_is_valid_json(ctx_fig3, tmp_path):
    seq = small_seq(count=3)
    grid = scan_signal(ctx_fig3, seq)
    path = tmp_path / "signal.meta.json"
    write_signal_sidecar(grid, path)
    md = json.loads(path.read_text())
    assert md["kind"] == "s23"
    assert md["axes"]["t2"]["count"] == 3


def test_growing_delay_damps_the_signal(ctx_fig3):
    # collective dephasing kills the pathway coherence monotonically in t2
    seq = small_seq(count=3)
    s_early = abs(signal_point(ctx_fig3, seq, 0.0, 0.0, 0.0))
    s_late = abs(signal_point(ctx_fig3, seq, 0.0, 1.5, 0.0))
    assert s_late < 0.05 * s_early


def test_context_health_starts_clean(ctx_fig3):
    assert ctx_fig3.health.checks >= 0
    assert ctx_fig3.health.ok()
