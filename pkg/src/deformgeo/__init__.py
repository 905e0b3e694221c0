"""Point-dependent (deformed) gauge groups, connections and Riemannian geometry with exact jets."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .expr_dsl import eval_jet, eval_scalar, parse, to_source  # noqa: E402
from .jets import Jet, jet_space  # noqa: E402
from .lie_core import (  # noqa: E402
    LieGroupChart,
    abelian,
    bch_chart_from_constants,
    compose,
    inverse,
    sphere_rotation_group,
    structure_constants,
)
from .deformed_group import (  # noqa: E402
    ChartDomain,
    DeformedGroup,
    commutator_residual,
    compose_deformed,
    curvature_coeffs,
    deform,
    expansion_coeffs,
    generators,
    structure_functions,
)
from .riemann_geom import (  # noqa: E402
    VierbeinField,
    anholonomy,
    christoffel,
    metric_compat_gamma,
    metric_from_vierbein,
    parallel_transport,
    riemann_tensor,
    translation_deformation,
)
from .gauge_bundle import ConnectionField, field_strength, gauge_transform  # noqa: E402
