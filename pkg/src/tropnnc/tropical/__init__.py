from tropnnc.tropical.network import OutputPolys, network_forward, network_polys
from tropnnc.tropical.polynomial import (
    TropPolynomial,
    enewt,
    eval_trop,
    reduce_poly,
    trop_add,
    trop_max,
    trop_poly_equal,
    upper_envelope_terms,
)
from tropnnc.tropical.polytope import (
    EnvelopePosition,
    PointPolytope,
    Zonotope,
    is_on_or_below_upper,
    minkowski_sum,
    zonotope_points,
    zonotope_vertex_count,
)
