"""
Tests for SVG chart rendering
"""
import pytest

from metric_log import aggregate
from models import MetricLog, MetricRecord
from plot_renderer import render_svg


def sample_logs():
    bmvr = aggregate([
        [MetricRecord(step=s, objective=1.0 / (1 + s)) for s in (0, 10, 20)],
        [MetricRecord(step=s, objective=1.2 / (1 + s)) for s in (0, 10, 20)],
    ], label="bmvr")
    backprop = aggregate([[MetricRecord(step=s, objective=0.9 / (1 + s)) for s in (0, 10, 20)]],
                         label="backprop")
    return {"bmvr": bmvr, "backprop": backprop}


def test_render_is_byte_identical(tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    render_svg(sample_logs(), first, title="runs", reference=0.01)
    render_svg(sample_logs(), second, title="runs", reference=0.01)
    assert first.read_bytes() == second.read_bytes()


def test_render_log_scale(tmp_path):
    path = tmp_path / "log.svg"
    render_svg(sample_logs(), path, log_y=True)
    text = path.read_text()
    assert "<svg" in text
    assert "<dc:date>" not in text


def test_empty_log_is_skipped(tmp_path, capsys):
    logs = {**sample_logs(), "empty": MetricLog(label="empty")}
    render_svg(logs, tmp_path / "out.svg")
    assert "WARNING: empty has no rows" in capsys.readouterr().out


def test_nothing_to_plot(tmp_path):
    with pytest.raises(ValueError):
        render_svg({}, tmp_path / "out.svg")
