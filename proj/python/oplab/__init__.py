"""Offline policy evaluation lab.

Thin Python layer over the C++ core. Experiment drivers accept plain dicts
(same keys as the CLI's JSON config) and return CSV text.
"""

import json

from ._oplab import (
    DataDistribution,
    Error,
    FeatureMap,
    HardInstance,
    InvalidArgument,
    LayeredMdp,
    OfflineDataset,
    Policy,
    PreconditionError,
    SingularDesignError,
    build_instance,
    check_error_identity,
    coverage_spectrum,
    distinguish,
    evaluate_theorem_bound,
    exact_policy_value,
    fit_residuals,
    max_r0,
    minimal_shift_coefficient,
    run_lspe,
    sample_offline,
    shift_report,
)
from . import _oplab


def amplification_sweep(config=None):
    """Returns (sweep_csv, slopes_csv) for the given config dict."""
    return _oplab.amplification_csv(json.dumps(config or {}))


def upper_bound_check(config=None):
    return _oplab.upper_bound_csv(json.dumps(config or {}))


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
