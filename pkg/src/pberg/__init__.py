"""Numerical p-Bergman kernels, L^p isometries and variation of weighted fiber kernels."""

from ._kernels import BACKEND
from .basis import HoloFunction, TruncatedBasis, project
from .domains import (Domain, QuadratureRule, ball, build_quadrature, disk, ellipse, hartogs_fiber,
                      indicator, polydisk)
from .extremal import (ExtremalResult, Weight, disk_kernel_closed_form, gram_kernel,
                       kernel_profile, p_extremal, pnorm)
from .isometry import (IsometryOperator, RationalMap, map_roundtrip, pullback_operator,
                       reconstruct_map, verify_jacobian_relation)
from .variation import (DomainFamily, HoloFunctional, dual_norm, fiber_kernel, minimal_extension,
                        psh_probe)

__version__ = "0.1.0"
