//! Numerical toolkit for asymptotic reversibility of bipartite pure-state
//! entanglement conversion.
//!
//! Everything reduces to probability vectors of squared Schmidt coefficients
//! ([`Distribution`]) and the sorted spectra of their i.i.d. products
//! ([`Spectrum`]). On top of those sit the LU conversion error
//! ([`fidelity`]), LOCC-optimal conversion by majorization
//! ([`majorization`]), closed-form limits ([`asymptotics`]) and the
//! supplemental-resource thresholds ([`supplement`]).

// `!(x > 0.0)` guards are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cache;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod fidelity;
pub mod majorization;
pub mod numeric;
pub mod spectrum;
pub mod supplement;

pub use distributions::{
    characteristics_of, conversion_characteristics, detect_lattice, moments, paper_phi, paper_psi,
    tensor, Characteristics, Distribution, LatticeVerdict, MomentSummary, ProductDistribution,
};
pub use error::{Error, Result};
pub use fidelity::{fidelity_spectra, lu_error_at, lu_error_opt, LuErrorResult, ScanStrategy};
pub use majorization::{
    loss_experiment, majorizes, mcre_lower_bound, optimal_conversion_fidelity, ConversionResult,
    LossRecord,
};
pub use spectrum::{
    build_spectrum, merge_product, Mode, Segment, Spectrum, SpectrumOptions, SpectrumSource,
    Staircase,
};
