"""CSV and SVG emission for validity curves and experiment reports."""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .assessment import AggregatedCurve, ValidityCurve
from .config import MATPLOTLIB_AVAILABLE, plt
from .errors import DataError

logger = logging.getLogger(__name__)

# full precision, stable across runs
_FLOAT_FORMAT = "%.17g"


def _write_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    return path


def write_curve_csv(curve: Union[ValidityCurve, AggregatedCurve], path: Union[str, Path]) -> Path:
    """``epsilon,mean,stderr`` rows; a single curve has zero standard error."""
    if isinstance(curve, AggregatedCurve):
        mean, stderr = curve.mean, curve.stderr
    else:
        mean, stderr = curve.values, np.zeros_like(curve.values)
    frame = pd.DataFrame({"epsilon": curve.grid, "mean": mean, "stderr": stderr})
    return _write_frame(frame, path)


def write_jumps_csv(curve: ValidityCurve, path: Union[str, Path]) -> Path:
    """``deviation,mass`` rows, one per jump of the step function."""
    frame = pd.DataFrame(
        {
            "deviation": [d for d, _ in curve.jump_points],
            "mass": [m for _, m in curve.jump_points],
        }
    )
    return _write_frame(frame, path)


def read_jumps_csv(path: Union[str, Path]):
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read {path}: {e}") from e
    return tuple(zip(frame["deviation"].astype(float), frame["mass"].astype(float)))


def write_bound_curve_csv(points: Sequence, path: Optional[Union[str, Path]] = None) -> str:
    """``B,epsilon`` rows; returns the CSV text and writes it when ``path`` is given."""
    frame = pd.DataFrame(
        {"B": [int(b) for b, _ in points], "epsilon": [float(e) for _, e in points]}
    )
    text = frame.to_csv(index=False, float_format=_FLOAT_FORMAT, lineterminator="\n")
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as e:
            raise DataError(f"cannot write {path}: {e}") from e
    return text


def write_summary_csv(report, path: Union[str, Path]) -> Path:
    """One row per (method, n) of a comparison report."""
    frame = pd.DataFrame(
        [
            {
                "method": r.method.value,
                "n": r.n,
                "runs": r.runs,
                "ece_mean": r.ece_mean,
                "ece_stderr": r.ece_stderr,
                "errors": len(r.errors),
            }
            for r in report.results
        ]
    )
    return _write_frame(frame, path)


def write_comparison(report, prefix: Union[str, Path]) -> list:
    """Every CSV of a comparison report under ``prefix``; returns the written paths."""
    prefix = str(prefix)
    written = [write_summary_csv(report, f"{prefix}_summary.csv")]
    for result in report.results:
        if result.marginal is None:
            continue
        stem = f"{prefix}_{result.method.value}_n{result.n}"
        written.append(write_curve_csv(result.marginal, f"{stem}_marginal.csv"))
        written.append(write_curve_csv(result.conditional, f"{stem}_conditional.csv"))
    for n, curve in sorted(report.theoretical.items()):
        written.append(write_curve_csv(curve, f"{prefix}_theory_n{n}.csv"))
    return written


def save_validity_svg(
    curves: Dict[str, Union[ValidityCurve, AggregatedCurve]],
    path: Union[str, Path],
    title: str = "Validity plot",
) -> Optional[Path]:
    """Line plot of each curve with a shaded +/- stderr band."""
    if not MATPLOTLIB_AVAILABLE:
        logger.warning("matplotlib not available - skipping SVG %s", path)
        return None

    plt.rcParams["svg.hashsalt"] = "binning-calibration"
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        for label, curve in curves.items():
            if isinstance(curve, AggregatedCurve):
                mean, stderr = curve.mean, curve.stderr
            else:
                mean, stderr = curve.values, np.zeros_like(curve.values)
            line, = ax.step(curve.grid, mean, where="post", label=label)
            if np.any(stderr > 0):
                ax.fill_between(
                    curve.grid, mean - stderr, mean + stderr,
                    step="post", alpha=0.25, color=line.get_color(),
                )
        ax.set_xlabel("epsilon")
        ax.set_ylabel("V(epsilon)")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.02)
        ax.set_title(title)
        ax.legend(loc="lower right")
        path = Path(path)
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from e
    finally:
        plt.close(fig)
    logger.info("Validity plot saved: %s", path)
    return path


def save_comparison_svgs(report, prefix: Union[str, Path]) -> list:
    """One SVG per calibration size with every method's marginal curve and the guaranteed curve."""
    written = []
    for n in sorted({r.n for r in report.results}):
        curves = {
            r.method.value: r.marginal
            for r in report.results
            if r.n == n and r.marginal is not None
        }
        if n in report.theoretical:
            curves["guarantee"] = report.theoretical[n]
        path = save_validity_svg(curves, f"{prefix}_n{n}.svg", title=f"Validity plot, n={n}")
        if path is not None:
            written.append(path)
    return written
