"""Photon-counting statistics: timestamp streams, coincidences, CAR and Franson fringes."""
from .franson import (BELL_BOUND, FransonPoint, FringeFit, VisibilityResult, expected_visibility,
                      car_visibility, extract_visibility, franson_phase_sweep, franson_simulate, franson_windows,
                      fringe_fit, invert_background_for_visibility, visibility)
from .histogram import (CARResult, CoincidenceHistogram, car, car_uncertainty, default_windows,
                        delay_cdf, expected_car, expected_histogram, histogram, singles_rates,
                        window_fraction)
from .io import read_histogram_csv, read_timestamps, write_histogram_csv, write_timestamps
from .models import DetectorModel, FransonSetup, PairSource
from .streams import apply_dead_time, simulate_streams

__all__ = [
    "BELL_BOUND", "FransonPoint", "FringeFit", "VisibilityResult", "expected_visibility",
    "car_visibility", "extract_visibility", "franson_phase_sweep", "franson_simulate", "franson_windows",
    "fringe_fit", "invert_background_for_visibility", "visibility",
    "CARResult", "CoincidenceHistogram", "car", "car_uncertainty", "default_windows",
    "delay_cdf", "expected_car", "expected_histogram", "histogram", "singles_rates",
    "window_fraction",
    "read_histogram_csv", "read_timestamps", "write_histogram_csv", "write_timestamps",
    "DetectorModel", "FransonSetup", "PairSource",
    "apply_dead_time", "simulate_streams",
]
