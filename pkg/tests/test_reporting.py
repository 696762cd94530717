"""Tests for CSV and SVG emission."""

import numpy as np
import pandas as pd
import pytest

from src.binning_calibration.assessment import (
    ValidityCurve,
    aggregate_curves,
    validity_conditional,
    validity_marginal,
)
from src.binning_calibration.errors import DataError
from src.binning_calibration.guarantees import bound_curve
from src.binning_calibration.model import BinningModel, Dataset
from src.binning_calibration.reporting import (
    read_jumps_csv,
    save_validity_svg,
    write_bound_curve_csv,
    write_curve_csv,
    write_jumps_csv,
)


@pytest.fixture
def marginal():
    model = BinningModel(edges=(0.0, 0.5, 1.0), biases=(0.48, 0.43))
    test = Dataset(scores=[0.1, 0.2, 0.6, 0.7], labels=[0, 1, 0, 1])
    return validity_marginal(model, test, np.linspace(0.0, 1.0, 11))


class TestCurveCsv:
    def test_single_curve_has_zero_stderr(self, marginal, tmp_path):
        frame = pd.read_csv(write_curve_csv(marginal, tmp_path / "m.csv"))
        assert list(frame.columns) == ["epsilon", "mean", "stderr"]
        assert len(frame) == 11
        assert (frame["stderr"] == 0.0).all()
        np.testing.assert_array_equal(frame["mean"].to_numpy(), marginal.values)

    def test_aggregated_curve(self, marginal, tmp_path):
        shifted = ValidityCurve(grid=marginal.grid, values=np.ones(11), jump_points=((0.0, 1.0),))
        frame = pd.read_csv(write_curve_csv(aggregate_curves([marginal, shifted]), tmp_path / "a.csv"))
        assert frame["stderr"].max() > 0.0

    def test_unwritable_path(self, marginal, tmp_path):
        with pytest.raises(DataError):
            write_curve_csv(marginal, tmp_path / "missing" / "m.csv")


class TestJumpsCsv:
    def test_jumps_read_back(self, marginal, tmp_path):
        path = write_jumps_csv(marginal, tmp_path / "jumps.csv")
        assert path.read_text().splitlines()[0] == "deviation,mass"
        jumps = read_jumps_csv(path)
        assert [m for _, m in jumps] == [0.5, 0.5]
        np.testing.assert_allclose([d for d, _ in jumps], [0.02, 0.07])

    def test_conditional_curve_has_one_jump(self, tmp_path):
        model = BinningModel(edges=(0.0, 1.0), biases=(0.5,))
        curve = validity_conditional(model, Dataset(scores=[0.3, 0.6], labels=[0, 1]))
        assert read_jumps_csv(write_jumps_csv(curve, tmp_path / "c.csv")) == ((0.0, 1.0),)


class TestBoundCurveCsv:
    def test_text(self):
        text = write_bound_curve_csv([(1, 0.5), (2, 0.25)])
        assert text == "B,epsilon\n1,0.5\n2,0.25\n"

    def test_written_file_matches_text(self, tmp_path):
        points = bound_curve(1000, 0.1, range(1, 11))
        path = tmp_path / "plan.csv"
        text = write_bound_curve_csv(points, path)
        assert path.read_text() == text
        assert len(text.splitlines()) == 11


class TestValiditySvg:
    def test_same_input_same_bytes(self, marginal, tmp_path):
        pytest.importorskip("matplotlib")
        first = save_validity_svg({"marginal": marginal}, tmp_path / "a.svg")
        second = save_validity_svg({"marginal": marginal}, tmp_path / "b.svg")
        assert first.read_bytes() == second.read_bytes()
        assert b"<svg" in first.read_bytes()

    def test_stderr_band(self, marginal, tmp_path):
        pytest.importorskip("matplotlib")
        shifted = ValidityCurve(grid=marginal.grid, values=np.ones(11), jump_points=((0.0, 1.0),))
        path = save_validity_svg(
            {"mean": aggregate_curves([marginal, shifted])}, tmp_path / "band.svg", title="band"
        )
        assert path.exists()
