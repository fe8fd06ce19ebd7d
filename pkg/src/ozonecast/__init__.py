"""Daily ozone forecasting: data repair, diagnostics, feature regimes and a twelve-model benchmark."""

from .dataset import (
    PREDICTORS,
    SCHEMA,
    TARGET,
    Scaler,
    SplitSpec,
    TimeSeriesTable,
    fill_gaps,
    parse_csv,
    split,
    write_csv,
)
from .evaluate import ROSTER, BenchmarkReport, build_roster, fit_stacking, mse, r2, run_benchmark
from .features import ApproachSpec, FeatureSet, build_approach
from .synth import SynthConfig, generate

__version__ = "0.1.0"
