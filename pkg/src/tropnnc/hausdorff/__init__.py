from tropnnc.hausdorff.bounds import (
    BoundReport,
    acute_angle_ok,
    check_network_bound,
    check_poly_bound,
    misiakos_rhs,
    prop5_rhs,
    prop8_rhs,
    sample_ball,
)
from tropnnc.hausdorff.distance import discrete_hausdorff, hausdorff, project_onto_hull
