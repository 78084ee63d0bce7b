"""Counting statistics of atoms released from an optical lattice."""
from .counting import (
    CountingDistribution,
    GeneratingPolynomial,
    JointDistribution,
    Moments,
    binomial_distribution,
    coherent_probabilities,
    fock_moments,
    fock_probabilities,
    generating_polynomial,
    homogeneous_mean_nn,
    joint_coherent_probabilities,
    joint_fock_probabilities,
    moments_and_corr,
    superposition_generating,
    superposition_probabilities,
    supersolid_mean_nn,
    trinomial_distribution,
)
from .fock_oracle import oracle_distribution, oracle_generating, oracle_joint_distribution
from .lattice import (
    CoherentProduct,
    DetectorBox,
    FockPattern,
    LatticeGeometry,
    PhysicalParams,
    SymmetricSuperposition,
    make_pattern,
    make_supersolid,
    site_positions,
)
from .permanent import permanent
from .propagation import (
    CorrelationMatrix,
    correlation_matrix,
    expanded_width,
    gaussian_phase_segment,
    quadrature_segment_oracle,
    time_of_flight,
)
