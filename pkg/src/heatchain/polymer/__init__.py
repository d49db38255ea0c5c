"""Space-time polymer representation of the chain's stationary measure."""
from .activity import PolymerEngine, SeriesEstimate, log_partition_series, two_point_series
from .certificate import Certificate, kp_check
from .lattice import Cell, Lattice, PolymerParams
from .links import LinkWeight, link_weight, pair_terms
from .ssd import SsdSpec, ssd_moment

__all__ = [
    "Cell", "Certificate", "Lattice", "LinkWeight", "PolymerEngine", "PolymerParams",
    "SeriesEstimate", "SsdSpec", "kp_check", "link_weight", "log_partition_series",
    "pair_terms", "ssd_moment", "two_point_series",
]
