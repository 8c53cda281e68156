//! Real Hölder cones `C_κ = {g > 0 : v(g) ≤ κ inf g}` on fiber grids and the
//! numerical checks built on them: membership and sampling, generating
//! functionals and the Hilbert projective metric, invariance under `L_0`,
//! image diameter, bounded aperture, the reproducing decomposition, the
//! complex-perturbation comparison, and a sampled necessary condition for
//! the complexified cone.
//!
//! Distances and diameters are estimates over sampled generating triples
//! and are therefore lower bounds.

mod checks;
mod hilbert;
mod lemma;
mod params;

pub use checks::{
    check_aperture, check_complex_necessary, check_invariance, check_perturbation, cone_decompose, estimate_diameter,
    set_diameter, ApertureReport, ComplexConeReport, Decomposition, DiameterReport, InvarianceReport, Part,
    PerturbationConfig, PerturbationLevel, PerturbationReport,
};
pub use hilbert::{hilbert_distance, GeneratingFunctional, HilbertDistance, TripleSet, MAX_T_NODES};
pub use lemma::four_number_bound;
pub use params::{cone_member, potential_seminorm, sample_cone, sample_subcone, ConeParams, Membership, SAMPLE_FILL};
