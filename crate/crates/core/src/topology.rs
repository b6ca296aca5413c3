//! First Chern number of a projector field over the 2-torus and the
//! resulting triviality verdict with its frame-size bounds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::spectral::ProjectorField;

/// Minimum grid points per direction for the link method.
pub const MIN_CHERN_GRID: usize = 12;

/// Plaquette phases at least this close to ±π are treated as unresolved.
pub const PLAQUETTE_MARGIN: f64 = 0.2;

/// Links whose overlap determinant falls below this are unresolved.
const LINK_FLOOR: f64 = 1e-10;

/// Raw output of the plaquette sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernComputation {
    pub value: i64,
    /// `Σ phase / 2π` before rounding.
    pub raw: f64,
    pub max_plaquette_phase: f64,
}

fn link(a: &CMatrix, b: &CMatrix) -> Option<C64> {
    let det = (a.adjoint() * b).determinant();
    let r = det.norm();
    (r > LINK_FLOOR).then(|| det / r)
}

/// Chern number of the projector field by plaquette link phases.
pub fn chern_number(proj: &ProjectorField) -> Result<i64> {
    chern_computation(proj).map(|c| c.value)
}

pub fn chern_computation(proj: &ProjectorField) -> Result<ChernComputation> {
    let grid = proj.grid();
    if grid.dim() != 2 {
        return Err(Error::NotTwoDimensional { dim: grid.dim() });
    }
    if grid.sizes().iter().any(|&m| m < MIN_CHERN_GRID) {
        return Err(Error::GridTooCoarse { sizes: grid.sizes().to_vec(), min: MIN_CHERN_GRID });
    }
    let frames = proj.frames();
    let unresolved = |plaquette| Error::UnresolvedField { plaquette, phase: PI };
    let phases: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let k0 = grid.neighbor(k, 0, 1);
            let k1 = grid.neighbor(k, 1, 1);
            let k01 = grid.neighbor(k0, 1, 1);
            let u0 = link(&frames[k], &frames[k0]).ok_or_else(|| unresolved(k))?;
            let u1 = link(&frames[k0], &frames[k01]).ok_or_else(|| unresolved(k))?;
            let u2 = link(&frames[k1], &frames[k01]).ok_or_else(|| unresolved(k))?;
            let u3 = link(&frames[k], &frames[k1]).ok_or_else(|| unresolved(k))?;
            let phase = (u0 * u1 * u2.conj() * u3.conj()).arg();
            if phase.abs() >= PI - PLAQUETTE_MARGIN {
                return Err(Error::UnresolvedField { plaquette: k, phase });
            }
            Ok(phase)
        })
        .collect();
    // Sequential sum keeps the result bit-reproducible.
    let mut total = 0.0;
    let mut max_phase: f64 = 0.0;
    for p in phases {
        let p = p?;
        total += p;
        max_phase = max_phase.max(p.abs());
    }
    let raw = total / (2.0 * PI);
    let value = raw.round();
    if (raw - value).abs() > 1e-6 {
        return Err(Error::UnresolvedField { plaquette: 0, phase: raw });
    }
    Ok(ChernComputation { value: value as i64, raw, max_plaquette_phase: max_phase })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Trivial,
    Obstructed,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyReport {
    pub chern: Option<i64>,
    #[serde(rename = "trivialVerdict")]
    pub verdict: Verdict,
    /// Upper bound `2^n` on the bundle type.
    pub type_bound: usize,
    /// `[m, 2^n m]`.
    pub frame_bounds: (usize, usize),
    pub minimal_l_estimate: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Triviality of the projector field: always trivial over the circle,
/// trivial iff the Chern number vanishes over the 2-torus.
pub fn triviality_verdict(proj: &ProjectorField) -> TopologyReport {
    let n = proj.grid().dim();
    let m = proj.rank();
    let type_bound = 1usize << n;
    let upper = type_bound * m;
    let (chern, verdict, note) = match n {
        1 => (None, Verdict::Trivial, None),
        2 => match chern_number(proj) {
            Ok(0) => (Some(0), Verdict::Trivial, None),
            Ok(c) => (Some(c), Verdict::Obstructed, None),
            Err(e) => (None, Verdict::Undetermined, Some(e.to_string())),
        },
        _ => (None, Verdict::Undetermined, Some(format!("no invariant implemented for dimension {n}"))),
    };
    let minimal_l_estimate = match verdict {
        Verdict::Obstructed => (m + 1).min(upper),
        _ => m,
    };
    TopologyReport { chern, verdict, type_bound, frame_bounds: (m, upper), minimal_l_estimate, note }
}
