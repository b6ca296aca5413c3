//! Band structure, gap-certified band selection and the spectral projector
//! field, computed both from eigenvectors and by Riesz contour quadrature.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::KGrid;
use crate::error::{Error, GapSide, Result};
use crate::linalg::{cis, eigh, hermitize, max_abs, CMatrix, CVector, C64};
use crate::models::BlochOperatorFamily;

/// Selections whose gap to the complement is at or below this are rejected.
pub const GAP_THRESHOLD: f64 = 1e-9;

/// Smallest allowed distance between a contour and the spectrum.
pub const CONTOUR_CLEARANCE: f64 = 1e-8;

/// Sorted eigensystem of `L(k)` at every grid point.
#[derive(Debug, Clone)]
pub struct BandStructure {
    grid: KGrid,
    eigenvalues: Vec<Vec<f64>>,
    eigenvectors: Vec<CMatrix>,
}

impl BandStructure {
    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn band_count(&self) -> usize {
        self.eigenvalues.first().map_or(0, Vec::len)
    }

    /// Eigenvalues at grid point `k`, ascending.
    pub fn eigenvalues(&self, k: usize) -> &[f64] {
        &self.eigenvalues[k]
    }

    /// Eigenvector columns at grid point `k`.
    pub fn eigenvectors(&self, k: usize) -> &CMatrix {
        &self.eigenvectors[k]
    }

    /// `(min_k λ_j, max_k λ_j)` for 1-based band `j`.
    pub fn band_extent(&self, band: usize) -> (f64, f64) {
        self.eigenvalues.iter().map(|e| e[band - 1]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        })
    }

    /// Largest `‖L(k)v − λv‖` over all pairs.
    pub fn max_residual(&self, family: &BlochOperatorFamily) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let l = family.evaluate_reduced(&self.grid.reduced_point(k));
                let v = &self.eigenvectors[k];
                let lv = &l * v;
                let mut worst: f64 = 0.0;
                for (j, &lambda) in self.eigenvalues[k].iter().enumerate() {
                    let r = lv.column(j) - v.column(j) * C64::new(lambda, 0.0);
                    worst = worst.max(r.norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest `‖V†V − I‖_max` over the grid.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.eigenvectors
            .iter()
            .map(|v| {
                let g = v.adjoint() * v;
                max_abs(&(g - CMatrix::identity(v.ncols(), v.ncols())))
            })
            .fold(0.0, f64::max)
    }
}

/// Eigen-decomposes the family at every grid point.
pub fn band_structure(family: &BlochOperatorFamily, grid: &KGrid) -> Result<BandStructure> {
    if grid.lattice() != family.lattice() {
        return Err(Error::InvalidArgument("grid lattice differs from the model lattice".into()));
    }
    let systems: Vec<Result<(Vec<f64>, CMatrix)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let l = family.evaluate_reduced(&grid.reduced_point(k));
            eigh(&l).ok_or(Error::EigensolveFailure { k_index: k })
        })
        .collect();
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut eigenvectors = Vec::with_capacity(grid.len());
    for s in systems {
        let (e, v) = s?;
        eigenvalues.push(e);
        eigenvectors.push(v);
    }
    Ok(BandStructure { grid: grid.clone(), eigenvalues, eigenvectors })
}

/// Contiguous 1-based band range `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BandRange {
    pub first: usize,
    pub last: usize,
}

impl BandRange {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first == 0 || last < first {
            return Err(Error::InvalidArgument(format!("invalid band range {first}..{last}")));
        }
        Ok(BandRange { first, last })
    }

    pub fn single(band: usize) -> Result<Self> {
        Self::new(band, band)
    }

    pub fn count(&self) -> usize {
        self.last - self.first + 1
    }
}

/// A gap-isolated composite band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandSelection {
    pub range: BandRange,
    /// Infinite when the selection starts at band 1.
    pub gap_below: f64,
    /// Infinite when the selection ends at the top band.
    pub gap_above: f64,
    /// `[min_k λ_first, max_k λ_last]`.
    pub interval: (f64, f64),
}

impl BandSelection {
    pub fn rank(&self) -> usize {
        self.range.count()
    }

    pub fn min_gap(&self) -> f64 {
        self.gap_below.min(self.gap_above)
    }
}

/// Certifies that `range` is separated from the other bands on the grid.
pub fn select_bands(bands: &BandStructure, range: BandRange) -> Result<BandSelection> {
    let n = bands.band_count();
    if range.last > n {
        return Err(Error::InvalidArgument(format!(
            "band range {}..{} exceeds {n} bands",
            range.first, range.last
        )));
    }
    let (lo, _) = bands.band_extent(range.first);
    let (_, hi) = bands.band_extent(range.last);
    let gap_below = if range.first == 1 {
        f64::INFINITY
    } else {
        lo - bands.band_extent(range.first - 1).1
    };
    if gap_below <= GAP_THRESHOLD {
        return Err(Error::GapViolation { side: GapSide::Below, band: range.first, gap: gap_below });
    }
    let gap_above = if range.last == n {
        f64::INFINITY
    } else {
        bands.band_extent(range.last + 1).0 - hi
    };
    if gap_above <= GAP_THRESHOLD {
        return Err(Error::GapViolation { side: GapSide::Above, band: range.last, gap: gap_above });
    }
    Ok(BandSelection { range, gap_below, gap_above, interval: (lo, hi) })
}

/// `P(k)` at every grid point together with an orthonormal frame of its range.
#[derive(Debug, Clone)]
pub struct ProjectorField {
    grid: KGrid,
    rank: usize,
    matrices: Vec<CMatrix>,
    frames: Vec<CMatrix>,
}

impl ProjectorField {
    /// Builds a field from projector matrices; frames are the top-`rank`
    /// eigenvectors of each matrix.
    pub fn from_matrices(grid: &KGrid, rank: usize, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: vec![grid.len()], found: vec![matrices.len()] });
        }
        let frames = matrices
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                let (_, v) = eigh(p).ok_or(Error::EigensolveFailure { k_index: k })?;
                let n = v.ncols();
                Ok(v.columns(n - rank, rank).into_owned())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProjectorField { grid: grid.clone(), rank, matrices, frames })
    }

    /// Builds a field from orthonormal frames, `P = V V†`.
    pub fn from_frames(grid: &KGrid, frames: Vec<CMatrix>) -> Result<Self> {
        if frames.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: vec![grid.len()], found: vec![frames.len()] });
        }
        let rank = frames.first().map_or(0, |f| f.ncols());
        let matrices = frames.iter().map(|v| hermitize(&(v * v.adjoint()))).collect();
        Ok(ProjectorField { grid: grid.clone(), rank, matrices, frames })
    }

    /// Replaces the frames, keeping the matrices.
    pub fn with_frames(mut self, frames: Vec<CMatrix>) -> Result<Self> {
        if frames.len() != self.grid.len() {
            return Err(Error::SizeMismatch { expected: vec![self.grid.len()], found: vec![frames.len()] });
        }
        self.frames = frames;
        Ok(self)
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn fiber_dim(&self) -> usize {
        self.matrices.first().map_or(0, |p| p.nrows())
    }

    pub fn matrix(&self, k: usize) -> &CMatrix {
        &self.matrices[k]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn frame(&self, k: usize) -> &CMatrix {
        &self.frames[k]
    }

    pub fn frames(&self) -> &[CMatrix] {
        &self.frames
    }

    pub fn apply(&self, k: usize, v: &CVector) -> CVector {
        &self.matrices[k] * v
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrices.iter().map(|p| max_abs(&(p - p.adjoint()))).fold(0.0, f64::max)
    }

    pub fn idempotency_defect(&self) -> f64 {
        self.matrices.iter().map(|p| max_abs(&(p * p - p))).fold(0.0, f64::max)
    }

    pub fn trace_defect(&self) -> f64 {
        self.matrices
            .iter()
            .map(|p| (p.trace() - C64::new(self.rank as f64, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// `max_k ‖L(k)P(k) − P(k)L(k)‖_max`.
    pub fn commutator_defect(&self, family: &BlochOperatorFamily) -> f64 {
        (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let l = family.evaluate_reduced(&self.grid.reduced_point(k));
                let p = &self.matrices[k];
                max_abs(&(&l * p - p * &l))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max_k ‖P(k) − Q(k)‖_max`.
    pub fn max_difference(&self, other: &ProjectorField) -> f64 {
        self.matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }
}

/// `P(k) = Σ_{j ∈ S} v_j v_j†` from the band structure.
pub fn projector_field(bands: &BandStructure, sel: &BandSelection) -> ProjectorField {
    let frames: Vec<CMatrix> = bands
        .eigenvectors
        .iter()
        .map(|v| v.columns(sel.range.first - 1, sel.rank()).into_owned())
        .collect();
    ProjectorField::from_frames(&bands.grid, frames).expect("frames match the grid")
}

/// Circle `|ζ − center| = radius` in the complex energy plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contour {
    pub center: f64,
    pub radius: f64,
}

impl Contour {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid contour center {center}, radius {radius}")));
        }
        Ok(Contour { center, radius })
    }

    /// Circle centred on the selection with the smaller gap split evenly
    /// on each side. With no finite gap the margin is `max(width, 1)`.
    pub fn default_for(sel: &BandSelection) -> Self {
        let (lo, hi) = sel.interval;
        let width = hi - lo;
        let gap = sel.min_gap();
        let gap = if gap.is_finite() { gap } else { width.max(1.0) };
        Contour { center: 0.5 * (lo + hi), radius: 0.5 * (width + gap) }
    }

    /// Distance from the circle to the nearest of `eigenvalues`.
    pub fn clearance_to(&self, eigenvalues: &[f64]) -> f64 {
        eigenvalues
            .iter()
            .map(|&e| ((e - self.center).abs() - self.radius).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Minimal clearance over the whole band structure.
    pub fn clearance(&self, bands: &BandStructure) -> f64 {
        bands.eigenvalues.iter().map(|e| self.clearance_to(e)).fold(f64::INFINITY, f64::min)
    }

    pub fn enclosed(&self, eigenvalues: &[f64]) -> usize {
        eigenvalues.iter().filter(|&&e| (e - self.center).abs() < self.radius).count()
    }
}

/// Trapezoidal quadrature of `(1/2πi) ∮ (ζ − L(k))^{-1} dζ` at Cartesian `k`.
pub fn riesz_projector(
    family: &BlochOperatorFamily,
    sel: &BandSelection,
    k: &[f64],
    contour: &Contour,
    quad_order: usize,
) -> Result<CMatrix> {
    let theta = family.lattice().reduced(k);
    riesz_at(&family.evaluate_reduced(&theta), sel.rank(), contour, quad_order)
}

/// Riesz projector at every grid point.
pub fn riesz_projector_field(
    family: &BlochOperatorFamily,
    grid: &KGrid,
    sel: &BandSelection,
    contour: &Contour,
    quad_order: usize,
) -> Result<ProjectorField> {
    let matrices = (0..grid.len())
        .into_par_iter()
        .map(|k| riesz_at(&family.evaluate_reduced(&grid.reduced_point(k)), sel.rank(), contour, quad_order))
        .collect::<Result<Vec<_>>>()?;
    ProjectorField::from_matrices(grid, sel.rank(), matrices)
}

fn riesz_at(l: &CMatrix, rank: usize, contour: &Contour, q: usize) -> Result<CMatrix> {
    if q < 8 {
        return Err(Error::InvalidArgument(format!("quadrature order {q} < 8")));
    }
    let (eigenvalues, _) = eigh(l).ok_or(Error::EigensolveFailure { k_index: 0 })?;
    let clearance = contour.clearance_to(&eigenvalues);
    if clearance < CONTOUR_CLEARANCE {
        return Err(Error::ContourTouchesSpectrum { clearance });
    }
    let enclosed = contour.enclosed(&eigenvalues);
    if enclosed != rank {
        return Err(Error::ContourEnclosure { enclosed, expected: rank });
    }
    let n = l.nrows();
    let mut sum = CMatrix::zeros(n, n);
    for node in 0..q {
        // Half-step offset keeps nodes off the real axis.
        let angle = 2.0 * PI * (node as f64 + 0.5) / q as f64;
        let dz = cis(angle) * contour.radius;
        let zeta = C64::new(contour.center, 0.0) + dz;
        let shifted = CMatrix::from_diagonal_element(n, n, zeta) - l;
        let inv = shifted.try_inverse().ok_or(Error::SingularResolvent { node })?;
        sum += inv * dz;
    }
    Ok(hermitize(&(sum / C64::new(q as f64, 0.0))))
}
