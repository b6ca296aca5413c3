use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which side of a band selection a gap check failed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSide {
    Below,
    Above,
}

impl std::fmt::Display for GapSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GapSide::Below => f.write_str("below"),
            GapSide::Above => f.write_str("above"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: expected {expected:?}, found {found:?}")]
    SizeMismatch { expected: Vec<usize>, found: Vec<usize> },

    #[error("eigensolver did not converge at k-point {k_index}")]
    EigensolveFailure { k_index: usize },

    #[error("gap violation {side} band {band}: gap {gap:.3e} does not exceed 1e-9")]
    GapViolation { side: GapSide, band: usize, gap: f64 },

    #[error("contour passes within {clearance:.3e} of the spectrum")]
    ContourTouchesSpectrum { clearance: f64 },

    #[error("contour encloses {enclosed} eigenvalues, selection has {expected}")]
    ContourEnclosure { enclosed: usize, expected: usize },

    #[error("resolvent is singular at quadrature node {node}")]
    SingularResolvent { node: usize },

    #[error("Chern number needs a two-dimensional grid, got dimension {dim}")]
    NotTwoDimensional { dim: usize },

    #[error("k-grid {sizes:?} is too coarse (need at least {min} points per direction)")]
    GridTooCoarse { sizes: Vec<usize>, min: usize },

    #[error("projector field unresolved at plaquette {plaquette} (phase {phase:.3}); refine the grid")]
    UnresolvedField { plaquette: usize, phase: f64 },

    #[error("topological obstruction: holonomy winding {winding} cannot be removed")]
    ObstructionDetected { winding: i64 },

    #[error("row holonomies admit no continuous logarithm on this grid (margin {margin:.3e}); refine the grid")]
    HolonomyUnresolved { margin: f64 },

    #[error("sections degenerate at k-point {k_index} (smallest singular value {sigma_min:.3e})")]
    DegenerateFamily { k_index: usize, sigma_min: f64 },

    #[error("seed projections fail to span at k-point {k_index} (margin {min_sigma:.3e})")]
    SpanningFailure { min_sigma: f64, k_index: usize },

    #[error("frame operator ill-conditioned at k-point {k_index} (condition {condition:.3e})")]
    IllConditioned { k_index: usize, condition: f64 },

    #[error("supercell too small: largest shell {max_shell} < 4")]
    SupercellTooSmall { max_shell: usize },
}
