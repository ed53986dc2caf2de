"""g-function construction, evaluation, iteration and verification."""

from .kernels import (
    VotingKernel,
    ExchangeableKernel,
    majority_kernel,
    eval_multivariate_g,
)
from .gfun import (
    GFunction,
    GAxiomReport,
    FixedPoints,
    kernel_g,
    iterate_g,
    find_fixed_points,
    verify_g_axioms,
)
from .nlv import (
    MarkedPartition,
    all_marked_partitions,
    nlv_rate_flags,
    nlv_kernel,
    nlv_polynomial_g,
    g_pi,
    singleton_partition,
)
from .coalescence import (
    PartitionDistribution,
    coalescence_partition_distribution,
    gbar,
)

__all__ = [
    "VotingKernel",
    "ExchangeableKernel",
    "majority_kernel",
    "eval_multivariate_g",
    "GFunction",
    "GAxiomReport",
    "FixedPoints",
    "kernel_g",
    "iterate_g",
    "find_fixed_points",
    "verify_g_axioms",
    "MarkedPartition",
    "all_marked_partitions",
    "nlv_rate_flags",
    "nlv_kernel",
    "nlv_polynomial_g",
    "g_pi",
    "singleton_partition",
    "PartitionDistribution",
    "coalescence_partition_distribution",
    "gbar",
]
