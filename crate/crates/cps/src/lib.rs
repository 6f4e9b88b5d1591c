//! Simulation and verification toolkit for contact processes whose sites
//! switch between an active and a dormant type.
//!
//! The crate covers the full pipeline: parameter presets and closed-form
//! rate bounds ([`rates`]), Poisson event substrates and infection-path
//! evolution ([`graphical`]), direct continuous-time Markov chain simulation
//! including the blocking and infection-dormancy variants ([`dynamics`]),
//! exact small-lattice transient solutions ([`oracle`]), pathwise and
//! statistical coupling checks ([`coupling`]), timeline reversal and duality
//! verification ([`duality`]), and Monte Carlo experiment harnesses for
//! survival sweeps and critical-parameter bracketing ([`analysis`]).

// Negated float comparisons are deliberate: they reject NaN along with the
// out-of-range values. Index loops mirror the matrix and lattice notation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod config;
pub mod coupling;
pub mod duality;
pub mod dynamics;
pub mod error;
pub mod graphical;
pub mod lattice;
pub mod oracle;
pub mod rates;
pub mod render;
pub mod rng;
pub mod sites;
mod stats;
pub mod timegrid;

pub use error::{CpsError, Result};
pub use lattice::{Boundary, Lattice, LatticeSpec};
pub use rates::{
    alpha, dominated_cp_rates, dominating_cp_rates, effective_fast_rates, lambda_bar,
    param_dominates, preset, Activity, ArrowOrientation, BaseRates, DormantRecovery,
    EffectiveRates, Preset, RateSet, Variant,
};
pub use sites::{Configuration, SiteSet, SiteState};
