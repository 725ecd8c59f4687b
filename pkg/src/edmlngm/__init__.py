"""Smooth-stress EDM point recovery: derivatives, second-order search and
existence certificates for local non-global minimisers."""

__version__ = "0.1.0"

from .edm_core import (  # noqa: E402
    Instance,
    build_v,
    center,
    edm_of,
    lindenstrauss,
    lindenstrauss_adjoint,
    ltriag,
    ltriag_adjoint,
    random_instance,
    reduce_to_triangular,
    tri_len,
)
from .stress import EvalContext, Formulation, gradient, hessian_apply, hessian_dense, value  # noqa: E402
from .solver import (  # noqa: E402
    Classification,
    SolveOptions,
    multi_start_scan,
    negative_curvature_witness,
    newton_iterate,
    trust_region_minimize,
)
from .certifier import Certificate, certify_lngm, verify_certificate  # noqa: E402

__all__ = [
    "Instance", "build_v", "center", "edm_of", "lindenstrauss", "lindenstrauss_adjoint",
    "ltriag", "ltriag_adjoint", "random_instance", "reduce_to_triangular", "tri_len",
    "EvalContext", "Formulation", "gradient", "hessian_apply", "hessian_dense", "value",
    "Classification", "SolveOptions", "multi_start_scan", "negative_curvature_witness",
    "newton_iterate", "trust_region_minimize",
    "Certificate", "certify_lngm", "verify_certificate",
]
