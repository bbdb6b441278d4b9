"""Thinned log-Gaussian Cox process models that fuse structured surveys with
opportunistic citizen-science reports on a gridded domain."""
from .field import FieldRealization, MaternParams, build_precision, matern_corr, sample_grf
from .grid import (CovariateRaster, GridDomain, ObserverRegistry, PointPattern, PolylineNetwork,
                   SurveyUnit, build_grid, distance_field)
from .landscape import Landscape, desk_landscape, load_landscape
from .observation import ScenarioReplicate, ScenarioSpec, draw_willingness, simulate_replicate
from .pointproc import IntensityField, RetentionField, simulate_lgcp, thin

__version__ = "0.1.0"
