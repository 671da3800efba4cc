//! Seeded error profiles and the parasitic-resistance models.
mod nodal;
mod parasitics;
mod profile;
mod rng;

pub use nodal::{nodal_oracle, NodalProblem, NodalSolution, NODAL_MAX_DIM};
pub use parasitics::{attenuation_map, first_order_cell_currents, AttenuationMap};
pub use profile::{sample_profile, DacInl, Dist, LinePair, NonidealityProfile, ProfileSpec};
pub use rng::{keyed_rng, RngDomain};
