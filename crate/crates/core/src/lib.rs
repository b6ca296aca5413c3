//! Localized Wannier systems for gap-isolated bands of periodic operators.
//!
//! The crate works on finite periodic supercells, where the Bloch-Floquet
//! transform is an exact finite sum, and on the matching uniform k-grids.
//! Its main pipeline is
//!
//! ```text
//! models::build_model -> spectral::band_structure -> spectral::select_bands
//!     -> spectral::projector_field -> topology::triviality_verdict
//!     -> gauge::{parallel_transport_gauge | seed_sections + canonical_tight_frame}
//!     -> wannier::synthesize_wannier -> wannier::{gram_matrix, parseval_check, decay_profile}
//! ```
//!
//! When the projector field has a nonzero Chern number no smooth orthonormal
//! gauge exists. The `gauge` module then projects a constant orthonormal
//! system of `l > m` ambient vectors onto each fiber and normalizes it with
//! the inverse square root of the frame operator. The resulting `l` Wannier
//! functions decay exponentially and their lattice shifts form a Parseval
//! (1-tight) frame of the spectral subspace.

pub mod bloch;
pub mod error;
pub mod gauge;
pub mod linalg;
pub mod models;
pub mod spectral;
pub mod topology;
pub mod wannier;

pub use bloch::{forward_transform, inverse_transform, CellField, KField, KGrid, TransformMethod};
pub use error::{Error, Result};
pub use gauge::{
    canonical_tight_frame, discontinuous_control_gauge, orthonormalize_family,
    parallel_transport_gauge, seed_sections, FrameOperatorDiagnostics, SectionFamily,
    SectionKind, SeedStrategy,
};
pub use linalg::{CMatrix, CVector, C64};
pub use models::{build_model, BlochOperatorFamily, Lattice, ModelSpec};
pub use spectral::{
    band_structure, projector_field, riesz_projector, select_bands, BandRange, BandSelection,
    BandStructure, Contour, ProjectorField,
};
pub use topology::{chern_number, triviality_verdict, TopologyReport, Verdict};
pub use wannier::{
    decay_profile, gram_matrix, parseval_check, synthesize_wannier, DecayProfile, FrameReport,
    ShiftGram, WannierSet,
};
