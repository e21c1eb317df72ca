"""Bandlimited lattice field theory: Shannon sampling, exact lattice derivatives,
quadratic lattice Hamiltonians and the conserved continuous-translation momentum."""

from .lattice import (
    Boundary,
    EdgeContaminationWarning,
    Lattice,
    SampledField,
    TestFunction,
    integrate_product,
    lattice_momenta,
    load_field,
    periodic_sinc,
    random_test_function,
    reconstruct,
    resample,
    sample,
    save_field,
    sinc_pi,
)
from .operators import (
    BandedKernel,
    Parity,
    apply,
    basel_partial_sum,
    compose,
    derivative_kernel,
    identity_kernel,
    partial_sum_S,
    second_derivative_kernel,
)
from .hamiltonians import (
    DispersionCurve,
    PhaseSpaceForm,
    QuadraticLatticeHamiltonian,
    build_bandlimited_kg,
    build_harmonic_chain,
    dispersion,
    dispersion_eigen,
    energy,
    hamiltonian_from_spec,
    lift_energy_continuum,
    random_quadratic_hamiltonian,
    to_phase_space_form,
)
from .symmetry import (
    TotalMomentum,
    Trajectory,
    build_total_momentum,
    classical_flow,
    conservation_report,
    cubic_witness,
    fock_oracle_commutator,
    quadratic_commutator,
    random_flow_state,
    save_report,
    symplectic_form,
    translate_field,
    translation_generator,
)

__version__ = "0.1.0"
