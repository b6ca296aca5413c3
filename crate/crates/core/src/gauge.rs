//! Section families over the k-grid: smooth orthonormal gauges by parallel
//! transport, projected-seed tight frames, and a deliberately discontinuous
//! control gauge.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::KGrid;
use crate::error::{Error, Result};
use crate::linalg::{
    cis, max_abs, polar_unitary, random_unitary, spectral_norm, svd, unitary_log, unitary_power, CMatrix, CVector, C64,
};
use crate::spectral::ProjectorField;

/// Seed projections must keep their m-th singular value at least this large.
pub const SPANNING_THRESHOLD: f64 = 1e-6;

/// Largest accepted condition number of the frame operator on range P.
pub const MAX_CONDITION: f64 = 1e8;

/// Raw sections below this smallest singular value are degenerate.
pub const INDEPENDENCE_THRESHOLD: f64 = 1e-8;

const HOLONOMY_REFERENCE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SectionKind {
    OrthonormalBasis,
    TightFrame,
    RawSeed,
    DiscontinuousControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStrategy {
    /// The first `l` standard basis vectors.
    Canonical,
    /// The first `l` columns of a Haar-like unitary drawn from ChaCha8.
    RandomDeterministic(u64),
}

/// `l` fiber vectors per grid point, stored as the columns of an `N×l` matrix.
#[derive(Debug, Clone)]
pub struct SectionFamily {
    grid: KGrid,
    kind: SectionKind,
    sections: Vec<CMatrix>,
}

impl SectionFamily {
    pub fn new(grid: &KGrid, kind: SectionKind, sections: Vec<CMatrix>) -> Result<Self> {
        if sections.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: vec![grid.len()], found: vec![sections.len()] });
        }
        if let Some(first) = sections.first() {
            let shape = first.shape();
            if let Some(bad) = sections.iter().find(|s| s.shape() != shape) {
                return Err(Error::SizeMismatch {
                    expected: vec![shape.0, shape.1],
                    found: vec![bad.nrows(), bad.ncols()],
                });
            }
        }
        Ok(SectionFamily { grid: grid.clone(), kind, sections })
    }

    /// The same `N×l` matrix at every grid point.
    pub fn constant(grid: &KGrid, kind: SectionKind, columns: &CMatrix) -> Self {
        SectionFamily { grid: grid.clone(), kind, sections: vec![columns.clone(); grid.len()] }
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn kind(&self) -> SectionKind {
        self.kind
    }

    pub fn count(&self) -> usize {
        self.sections.first().map_or(0, |s| s.ncols())
    }

    pub fn fiber_dim(&self) -> usize {
        self.sections.first().map_or(0, |s| s.nrows())
    }

    pub fn matrix(&self, k: usize) -> &CMatrix {
        &self.sections[k]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.sections
    }

    pub fn matrices_mut(&mut self) -> &mut [CMatrix] {
        &mut self.sections
    }

    pub fn section(&self, k: usize, j: usize) -> CVector {
        self.sections[k].column(j).into_owned()
    }

    /// The family with section `j` removed.
    pub fn without_section(&self, j: usize) -> SectionFamily {
        let sections = self.sections.iter().map(|s| s.clone().remove_column(j)).collect();
        SectionFamily { grid: self.grid.clone(), kind: self.kind, sections }
    }

    /// `max_{k,j} ‖(I − P(k)) φ_j(k)‖`.
    pub fn membership_residual(&self, proj: &ProjectorField) -> f64 {
        self.sections
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let r = s - proj.matrix(k) * s;
                r.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max_k ‖Φ(k)†Φ(k) − I‖_max`.
    pub fn gram_defect(&self) -> f64 {
        let l = self.count();
        self.sections
            .iter()
            .map(|s| max_abs(&(s.adjoint() * s - CMatrix::identity(l, l))))
            .fold(0.0, f64::max)
    }

    /// `max_k ‖Σ_j φ_j φ_j† − P(k)‖_max`.
    pub fn frame_identity_residual(&self, proj: &ProjectorField) -> f64 {
        self.sections
            .iter()
            .enumerate()
            .map(|(k, s)| max_abs(&(s * s.adjoint() - proj.matrix(k))))
            .fold(0.0, f64::max)
    }

    /// `max_{k,axis,j} ‖φ_j(k + δ_axis) − φ_j(k)‖`, periodic bonds included.
    pub fn max_bond_difference(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.grid.len() {
            for axis in 0..self.grid.dim() {
                let next = self.grid.neighbor(k, axis, 1);
                let d = &self.sections[next] - &self.sections[k];
                worst = d.column_iter().map(|c| c.norm()).fold(worst, f64::max);
            }
        }
        worst
    }

    /// `min_{k,axis} Re ⟨φ_1(k), φ_1(k + δ_axis)⟩` for the first section.
    /// Unlike the modulus, the real part sees phase jumps.
    pub fn min_bond_alignment(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for k in 0..self.grid.len() {
            for axis in 0..self.grid.dim() {
                let next = self.grid.neighbor(k, axis, 1);
                let a = self.sections[k].column(0);
                let b = self.sections[next].column(0);
                worst = worst.min(a.dotc(&b).re);
            }
        }
        worst
    }

    /// `max_j max_k |‖φ_j(k)‖ − mean_k ‖φ_j(k)‖|`.
    pub fn norm_variation(&self) -> f64 {
        let n = self.grid.len() as f64;
        (0..self.count())
            .map(|j| {
                let norms: Vec<f64> = self.sections.iter().map(|s| s.column(j).norm()).collect();
                let mean = norms.iter().sum::<f64>() / n;
                norms.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Spanning margins and frame-operator conditioning of a seed family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FrameOperatorDiagnostics {
    /// `σ_m(P(k)Ψ(k))` per grid point.
    #[serde(skip)]
    pub spanning_margins: Vec<f64>,
    /// `(σ_1/σ_m)²` per grid point.
    #[serde(skip)]
    pub conditions: Vec<f64>,
    pub min_margin: f64,
    pub argmin: usize,
    pub max_condition: f64,
}

impl FrameOperatorDiagnostics {
    pub fn spans(&self) -> bool {
        self.min_margin >= SPANNING_THRESHOLD
    }
}

/// Spanning diagnostics of `P(k)Ψ(k)` for every grid point.
pub fn frame_diagnostics(proj: &ProjectorField, seeds: &SectionFamily) -> FrameOperatorDiagnostics {
    let m = proj.rank();
    let pairs: Vec<(f64, f64)> = (0..proj.grid().len())
        .into_par_iter()
        .map(|k| {
            let a = proj.matrix(k) * seeds.matrix(k);
            let (sigma, _, _) = svd(&a);
            let sm = sigma.get(m.wrapping_sub(1)).copied().unwrap_or(0.0);
            let cond = if sm > 0.0 { (sigma[0] / sm).powi(2) } else { f64::INFINITY };
            (sm, cond)
        })
        .collect();
    let spanning_margins: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let conditions: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (argmin, min_margin) = spanning_margins
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, s)| if s < best.1 { (k, s) } else { best });
    let max_condition = conditions.iter().copied().fold(0.0, f64::max);
    FrameOperatorDiagnostics { spanning_margins, conditions, min_margin, argmin, max_condition }
}

/// Seed columns for `strategy`: `l` orthonormal ambient vectors in `C^N`.
pub fn seed_vectors(fiber_dim: usize, l: usize, strategy: SeedStrategy) -> CMatrix {
    match strategy {
        SeedStrategy::Canonical => CMatrix::identity(fiber_dim, l),
        SeedStrategy::RandomDeterministic(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            random_unitary(fiber_dim, &mut rng).columns(0, l).into_owned()
        }
    }
}

/// Constant seed sections with their spanning diagnostics. Fails with
/// `SpanningFailure` when the projections do not span some fiber.
pub fn seed_sections(
    proj: &ProjectorField,
    l: usize,
    strategy: SeedStrategy,
) -> Result<(SectionFamily, FrameOperatorDiagnostics)> {
    let n = proj.fiber_dim();
    let m = proj.rank();
    if l < m || l > n {
        return Err(Error::InvalidArgument(format!("seed count {l} outside [{m}, {n}]")));
    }
    let seeds = SectionFamily::constant(proj.grid(), SectionKind::RawSeed, &seed_vectors(n, l, strategy));
    let diag = frame_diagnostics(proj, &seeds);
    if !diag.spans() {
        return Err(Error::SpanningFailure { min_sigma: diag.min_margin, k_index: diag.argmin });
    }
    Ok((seeds, diag))
}

/// `φ_j(k) = F(k)^{-1/2} P(k) ψ_j(k)`, computed as `U_m W_m†` from the SVD
/// `P(k)Ψ(k) = U Σ W†`.
pub fn canonical_tight_frame(proj: &ProjectorField, seeds: &SectionFamily) -> Result<SectionFamily> {
    let m = proj.rank();
    if seeds.count() < m {
        return Err(Error::InvalidArgument(format!("{} seeds cannot span rank {m}", seeds.count())));
    }
    let sections = (0..proj.grid().len())
        .into_par_iter()
        .map(|k| {
            let a = proj.matrix(k) * seeds.matrix(k);
            let (sigma, u, vt) = svd(&a);
            let sm = sigma[m - 1];
            if sm < SPANNING_THRESHOLD {
                return Err(Error::SpanningFailure { min_sigma: sm, k_index: k });
            }
            let condition = (sigma[0] / sm).powi(2);
            if condition > MAX_CONDITION {
                return Err(Error::IllConditioned { k_index: k, condition });
            }
            Ok(u.columns(0, m) * vt.rows(0, m))
        })
        .collect::<Result<Vec<_>>>()?;
    SectionFamily::new(proj.grid(), SectionKind::TightFrame, sections)
}

/// Modified Gram-Schmidt at every grid point.
pub fn orthonormalize_family(raw: &SectionFamily) -> Result<SectionFamily> {
    let sections = raw
        .sections
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let (sigma, _, _) = svd(s);
            let sigma_min = sigma.last().copied().unwrap_or(0.0);
            if sigma_min < INDEPENDENCE_THRESHOLD {
                return Err(Error::DegenerateFamily { k_index: k, sigma_min });
            }
            let mut q = s.clone();
            for j in 0..q.ncols() {
                for i in 0..j {
                    let proj = q.column(i).dotc(&q.column(j));
                    let qi = q.column(i).into_owned();
                    q.column_mut(j).axpy(-proj, &qi, C64::new(1.0, 0.0));
                }
                let norm = q.column(j).norm();
                q.column_mut(j).unscale_mut(norm);
            }
            Ok(q)
        })
        .collect::<Result<Vec<_>>>()?;
    SectionFamily::new(&raw.grid, SectionKind::OrthonormalBasis, sections)
}

/// One transport step: the frame of `next` best aligned with `prev`.
fn transport(next: &CMatrix, prev: &CMatrix) -> CMatrix {
    next * polar_unitary(&(next.adjoint() * prev))
}

/// Transports `start` through `frames` in order and returns the transported
/// frames with the closing holonomy `H`, defined by `V_M = V_0 H`.
fn transport_line(start: &CMatrix, frames: &[&CMatrix]) -> (Vec<CMatrix>, CMatrix) {
    let mut out = Vec::with_capacity(frames.len());
    out.push(start.clone());
    for f in &frames[1..] {
        let next = transport(f, out.last().unwrap());
        out.push(next);
    }
    let closing = polar_unitary(&(start.adjoint() * out.last().unwrap()));
    (out, closing)
}

/// Wraps an angle into `(-π, π]`.
fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

/// Distance of the eigenphases of `R†U(j)` from ±π, minimized over the loop.
fn log_margin(reference: &CMatrix, loop_: &[CMatrix]) -> f64 {
    loop_
        .iter()
        .map(|u| {
            let (phases, _) = unitary_log(&(reference.adjoint() * u));
            phases.iter().map(|p| std::f64::consts::PI - p.abs()).fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// A constant `R ∈ SU(m)` for which the principal log of `R†U(j)` is
/// continuous along the closed loop `U(0..M)`.
fn holonomy_reference(loop_: &[CMatrix]) -> Result<CMatrix> {
    let m = loop_[0].ncols();
    let len = loop_.len();
    let max_step = (0..len)
        .map(|j| spectral_norm(&(&loop_[(j + 1) % len] - &loop_[j])))
        .fold(0.0, f64::max);
    let required = 2.0 * max_step;
    let identity = CMatrix::identity(m, m);
    let mut best = (log_margin(&identity, loop_), identity);
    if best.0 > required {
        return Ok(best.1);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(HOLONOMY_REFERENCE_SEED);
    for _ in 0..256 {
        let mut r = random_unitary(m, &mut rng);
        let det = r.determinant();
        r *= cis(-det.arg() / m as f64);
        let margin = log_margin(&r, loop_);
        if margin > best.0 {
            best = (margin, r);
        }
    }
    if best.0 > required {
        Ok(best.1)
    } else {
        Err(Error::HolonomyUnresolved { margin: best.0 })
    }
}

/// Spreads a holonomy along a line: `V_i ← V_i H^{-i/M}`.
fn distribute(line: &mut [CMatrix], phase: f64, su_log: Option<&(Vec<f64>, CMatrix)>) {
    let len = line.len() as f64;
    for (i, v) in line.iter_mut().enumerate() {
        let s = -(i as f64) / len;
        let mut correction = CMatrix::identity(v.ncols(), v.ncols()) * cis(phase * s);
        if let Some((phases, q)) = su_log {
            correction *= unitary_power(phases, q, s);
        }
        *v = &*v * correction;
    }
}

/// Splits `H = e^{iα} U` with `det U = 1` for a given det phase `θ`.
fn holonomy_parts(h: &CMatrix, det_phase: f64) -> (f64, Option<(Vec<f64>, CMatrix)>) {
    let m = h.ncols();
    let alpha = det_phase / m as f64;
    if m == 1 {
        return (alpha, None);
    }
    let su = h * cis(-alpha);
    (alpha, Some(unitary_log(&su)))
}

/// Smooth periodic orthonormal gauge on a trivial projector field.
///
/// In 2D the column at `m_0 = 0` is transported along axis 1 and closed,
/// then each row is transported along axis 0. The row holonomies are
/// distributed along their rows after unwrapping their determinant phase
/// in the column direction; a nonzero winding of that phase is the Chern
/// obstruction and raises `ObstructionDetected`. For rank above one the
/// unimodular part of each holonomy is taken through a continuous matrix
/// logarithm around a constant reference; `HolonomyUnresolved` is raised when
/// no reference keeps that logarithm continuous on the grid.
pub fn parallel_transport_gauge(proj: &ProjectorField) -> Result<SectionFamily> {
    let grid = proj.grid();
    let frames = proj.frames();
    let sections = match grid.dim() {
        1 => {
            let refs: Vec<&CMatrix> = frames.iter().collect();
            let (mut line, h) = transport_line(&frames[0], &refs);
            let det_phase = h.determinant().arg();
            let (alpha, su) = holonomy_parts(&h, det_phase);
            distribute(&mut line, alpha, su.as_ref());
            line
        }
        2 => transport_2d(grid, frames)?,
        dim => return Err(Error::InvalidArgument(format!("parallel transport needs dimension 1 or 2, got {dim}"))),
    };
    SectionFamily::new(grid, SectionKind::OrthonormalBasis, sections)
}

fn transport_2d(grid: &KGrid, frames: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let (m0, m1) = (grid.sizes()[0], grid.sizes()[1]);
    let at = |i: usize, j: usize| grid.flat_index(&[i as i64, j as i64]);

    let column: Vec<&CMatrix> = (0..m1).map(|j| &frames[at(0, j)]).collect();
    let (mut starts, h) = transport_line(column[0], &column);
    let (alpha, su) = holonomy_parts(&h, h.determinant().arg());
    distribute(&mut starts, alpha, su.as_ref());

    let rows: Vec<(Vec<CMatrix>, CMatrix)> = starts
        .par_iter()
        .enumerate()
        .map(|(j, start)| {
            let row: Vec<&CMatrix> = (0..m0).map(|i| &frames[at(i, j)]).collect();
            transport_line(start, &row)
        })
        .collect();

    // Unwrap the row-holonomy determinant phase across the column.
    let det_phases: Vec<f64> = rows.iter().map(|(_, h)| h.determinant().arg()).collect();
    let mut unwrapped = Vec::with_capacity(m1);
    unwrapped.push(det_phases[0]);
    for j in 1..m1 {
        let prev = unwrapped[j - 1];
        unwrapped.push(prev + wrap_angle(det_phases[j] - det_phases[j - 1]));
    }
    let closing = unwrapped[m1 - 1] + wrap_angle(det_phases[0] - det_phases[m1 - 1]);
    let winding = ((closing - unwrapped[0]) / (2.0 * std::f64::consts::PI)).round() as i64;
    if winding != 0 {
        return Err(Error::ObstructionDetected { winding });
    }

    let m = frames[0].ncols();
    let alphas: Vec<f64> = unwrapped.iter().map(|t| t / m as f64).collect();
    let corrected: Vec<Vec<CMatrix>> = if m == 1 {
        rows.into_iter()
            .zip(&alphas)
            .map(|((mut line, _), &alpha)| {
                distribute(&mut line, alpha, None);
                line
            })
            .collect()
    } else {
        // H(j) = e^{iα(j)} R exp(L(j)) with a constant R that keeps R†U(j)
        // away from eigenvalue -1, so that L(j) is continuous around the loop.
        let su: Vec<CMatrix> = rows.iter().zip(&alphas).map(|((_, h), &a)| h * cis(-a)).collect();
        let reference = holonomy_reference(&su)?;
        let (ref_phases, ref_q) = unitary_log(&reference);
        rows.into_par_iter()
            .zip(su.par_iter().zip(alphas.par_iter()))
            .map(|((mut line, _), (u, &alpha))| {
                let (phases, q) = unitary_log(&(reference.adjoint() * u));
                let len = line.len() as f64;
                for (i, v) in line.iter_mut().enumerate() {
                    let s = -(i as f64) / len;
                    let c = unitary_power(&phases, &q, s) * unitary_power(&ref_phases, &ref_q, s) * cis(alpha * s);
                    *v = &*v * c;
                }
                line
            })
            .collect()
    };

    let mut sections = vec![CMatrix::zeros(0, 0); grid.len()];
    for (j, line) in corrected.into_iter().enumerate() {
        for (i, v) in line.into_iter().enumerate() {
            sections[at(i, j)] = v;
        }
    }
    Ok(sections)
}

/// Rank-one gauge fixed pointwise: the largest-magnitude component of the
/// eigenvector is made real and positive.
pub fn discontinuous_control_gauge(proj: &ProjectorField) -> Result<SectionFamily> {
    if proj.rank() != 1 {
        return Err(Error::InvalidArgument(format!("control gauge needs rank 1, got {}", proj.rank())));
    }
    let sections = proj
        .frames()
        .iter()
        .map(|f| {
            let v = f.column(0);
            let mut best = 0;
            for i in 1..v.len() {
                if v[i].norm() > v[best].norm() {
                    best = i;
                }
            }
            let phase = v[best].conj() / v[best].norm();
            f * phase
        })
        .collect();
    SectionFamily::new(proj.grid(), SectionKind::DiscontinuousControl, sections)
}
