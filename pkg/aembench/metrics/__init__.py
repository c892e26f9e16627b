"""Evaluation metrics: r_T, gamma, D_r and timings."""

from aembench.metrics.report import (
    EvalReport,
    curves_table,
    load_report,
    merge_reports,
    results_table,
    save_report,
    timing_report,
    timing_table,
    uniqueness_table,
)
from aembench.metrics.resim import (
    RTCurve,
    resim_error_matrix,
    resim_mse,
    rt_curve,
    rt_from_errors,
)
from aembench.metrics.uniqueness import d_r, gamma, nearest_spectra, spectra_clusters

__all__ = [
    "EvalReport",
    "RTCurve",
    "curves_table",
    "d_r",
    "gamma",
    "load_report",
    "merge_reports",
    "nearest_spectra",
    "resim_error_matrix",
    "resim_mse",
    "results_table",
    "rt_curve",
    "rt_from_errors",
    "save_report",
    "spectra_clusters",
    "timing_report",
    "timing_table",
    "uniqueness_table",
]
