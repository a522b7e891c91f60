"""Parabolic trajectories of anisotropic homogeneous planar potentials V = U(theta) / r**alpha."""

__version__ = "0.1.0"

from .potential import (  # noqa: E402
    CentralConfiguration,
    PotentialError,
    TrigPolynomial,
    check_class_U,
    eval_jet,
    find_central_configurations,
    too_strict_test,
)
from .threshold import (  # noqa: E402
    ThresholdResult,
    conformal_reduce,
    find_alpha_bar,
    find_alpha_bar_general,
    gap,
    lemma22_bounds,
)

__all__ = [
    "CentralConfiguration",
    "PotentialError",
    "ThresholdResult",
    "TrigPolynomial",
    "check_class_U",
    "conformal_reduce",
    "eval_jet",
    "find_alpha_bar",
    "find_alpha_bar_general",
    "find_central_configurations",
    "gap",
    "lemma22_bounds",
    "too_strict_test",
]
