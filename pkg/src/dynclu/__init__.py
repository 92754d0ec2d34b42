"""Dynamic Chung-Lu random graph: simulation and moment-based estimation."""

from ._engine import HAVE_COMPILED, default_backend_name
from .degrees import (
    DegreeModel,
    InOutDegreeModel,
    build_in_out,
    build_power_law,
    edge_on_probability,
    edge_probability_matrix,
)
from .lifetimes import Exponential, LifetimeDist, Pareto, Weibull
from .moments import (
    MomentVector,
    model_moments,
    moment_functions_AB,
    p_fresh,
    p_res_plus_plus,
    rho_T_xi,
    rho_delta_exp,
    rho_erlang2,
)
from .simulate import (
    Equidistant,
    GraphModelSpec,
    PoissonTimes,
    SnapshotSeries,
    exp_skip_ahead_state,
    read_series_binary,
    read_series_csv,
    resolve_binding,
    simulate,
    write_series_binary,
    write_series_csv,
)

__version__ = "0.1.0"
