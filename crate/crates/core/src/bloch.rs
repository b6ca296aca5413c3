//! Exact discrete Bloch-Floquet transform on a periodic supercell.
//!
//! A supercell of `M_1 × … × M_n` unit cells pairs with the k-grid
//! `k = Σ (m_i / M_i) b_i`. On this finite group the transform
//!
//! ```text
//! f̂(k) = Σ_γ f(γ) e^{-ik·γ},        f(γ) = Σ_k w f̂(k) e^{ik·γ},   w = 1/ΠM_i
//! ```
//!
//! is unitary with respect to the normalized measure `w`, so Plancherel,
//! inversion and the shift law hold to rounding. The fiber index carries the
//! cell-interior degrees of freedom (orbitals or cell samples).

use std::f64::consts::PI;

use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{cis, CVector, C64, ZERO};
use crate::models::Lattice;

/// Uniform k-grid over the dual torus.
#[derive(Debug, Clone, PartialEq)]
pub struct KGrid {
    lattice: Lattice,
    sizes: Vec<usize>,
    strides: Vec<usize>,
}

fn strides_for(sizes: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; sizes.len()];
    for a in (0..sizes.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * sizes[a + 1];
    }
    strides
}

impl KGrid {
    pub fn new(lattice: Lattice, sizes: &[usize]) -> Result<Self> {
        if sizes.len() != lattice.dim() {
            return Err(Error::SizeMismatch {
                expected: vec![lattice.dim()],
                found: vec![sizes.len()],
            });
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("grid sizes must be positive".into()));
        }
        Ok(KGrid { lattice, sizes: sizes.to_vec(), strides: strides_for(sizes) })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Uniform quadrature weight `1/ΠM_i`.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Row-major multi-index, last axis fastest.
    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        self.sizes
            .iter()
            .zip(&self.strides)
            .map(|(&m, &s)| (index / s) % m)
            .collect()
    }

    /// Flat index of a multi-index, wrapping each component periodically.
    pub fn flat_index(&self, multi: &[i64]) -> usize {
        multi
            .iter()
            .zip(self.sizes.iter().zip(&self.strides))
            .map(|(&m, (&size, &stride))| m.rem_euclid(size as i64) as usize * stride)
            .sum()
    }

    /// Reduced coordinates `m_i / M_i` of a grid point.
    pub fn reduced_point(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .iter()
            .zip(&self.sizes)
            .map(|(&m, &size)| m as f64 / size as f64)
            .collect()
    }

    /// Cartesian quasimomentum of a grid point.
    pub fn point(&self, index: usize) -> Vec<f64> {
        self.lattice.cartesian(&self.reduced_point(index))
    }

    /// Neighbour of `index` displaced by `step` along `axis`, periodically.
    pub fn neighbor(&self, index: usize, axis: usize, step: i64) -> usize {
        let mut multi: Vec<i64> = self.multi_index(index).iter().map(|&m| m as i64).collect();
        multi[axis] += step;
        self.flat_index(&multi)
    }

    /// Index of `-k` modulo the dual lattice.
    pub fn negated(&self, index: usize) -> usize {
        let multi: Vec<i64> = self.multi_index(index).iter().map(|&m| -(m as i64)).collect();
        self.flat_index(&multi)
    }

    /// `e^{-ik·γ}` for grid point `k` and supercell cell `γ`, from exact
    /// integer phase reduction.
    pub fn character(&self, k_index: usize, cell: &[i64]) -> C64 {
        let km = self.multi_index(k_index);
        let mut turns = 0.0;
        for ((&m, &c), &size) in km.iter().zip(cell).zip(&self.sizes) {
            let j = (m as i64 * c).rem_euclid(size as i64);
            turns += j as f64 / size as f64;
        }
        cis(-2.0 * PI * turns)
    }
}

/// A field on the supercell: one fiber vector of length `N` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    sizes: Vec<usize>,
    fiber_dim: usize,
    data: Vec<C64>,
}

impl CellField {
    pub fn new(sizes: &[usize], fiber_dim: usize, data: Vec<C64>) -> Result<Self> {
        let cells: usize = sizes.iter().product();
        if data.len() != cells * fiber_dim {
            return Err(Error::SizeMismatch {
                expected: vec![cells * fiber_dim],
                found: vec![data.len()],
            });
        }
        Ok(CellField { sizes: sizes.to_vec(), fiber_dim, data })
    }

    pub fn zeros(sizes: &[usize], fiber_dim: usize) -> Self {
        let cells: usize = sizes.iter().product();
        CellField { sizes: sizes.to_vec(), fiber_dim, data: vec![ZERO; cells * fiber_dim] }
    }

    /// `vector` at `cell`, zero elsewhere.
    pub fn delta(sizes: &[usize], cell: &[i64], vector: &[C64]) -> Self {
        let mut f = CellField::zeros(sizes, vector.len());
        let idx = flat(sizes, cell);
        f.value_mut(idx).copy_from_slice(vector);
        f
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn cell_count(&self) -> usize {
        self.data.len() / self.fiber_dim.max(1)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn value(&self, cell: usize) -> &[C64] {
        &self.data[cell * self.fiber_dim..(cell + 1) * self.fiber_dim]
    }

    pub fn value_mut(&mut self, cell: usize) -> &mut [C64] {
        &mut self.data[cell * self.fiber_dim..(cell + 1) * self.fiber_dim]
    }

    /// Row-major multi-index of a flat cell index.
    pub fn cell_multi_index(&self, cell: usize) -> Vec<usize> {
        let strides = strides_for(&self.sizes);
        self.sizes.iter().zip(&strides).map(|(&m, &s)| (cell / s) % m).collect()
    }

    /// Flat index of a cell, wrapping periodically.
    pub fn cell_index(&self, cell: &[i64]) -> usize {
        flat(&self.sizes, cell)
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `(f, g) = Σ_γ f(γ)·conj(g(γ))`, linear in `self`.
    pub fn inner(&self, other: &CellField) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum()
    }

    /// The lattice translate `f_ω(γ) = f(γ - ω)`.
    pub fn shifted(&self, shift: &[i64]) -> CellField {
        let mut out = CellField::zeros(&self.sizes, self.fiber_dim);
        let cells = self.cell_count();
        for c in 0..cells {
            let multi: Vec<i64> = self
                .cell_multi_index(c)
                .iter()
                .zip(shift)
                .map(|(&m, &s)| m as i64 + s)
                .collect();
            let target = flat(&self.sizes, &multi);
            out.value_mut(target).copy_from_slice(self.value(c));
        }
        out
    }

    pub fn scale(&mut self, factor: C64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    /// Largest per-entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &CellField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn flat(sizes: &[usize], cell: &[i64]) -> usize {
    let strides = strides_for(sizes);
    cell.iter()
        .zip(sizes.iter().zip(&strides))
        .map(|(&m, (&size, &stride))| m.rem_euclid(size as i64) as usize * stride)
        .sum()
}

/// A fiber vector per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct KField {
    grid: KGrid,
    fiber_dim: usize,
    data: Vec<C64>,
}

impl KField {
    pub fn new(grid: &KGrid, fiber_dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() * fiber_dim {
            return Err(Error::SizeMismatch {
                expected: vec![grid.len() * fiber_dim],
                found: vec![data.len()],
            });
        }
        Ok(KField { grid: grid.clone(), fiber_dim, data })
    }

    pub fn from_fn(grid: &KGrid, fiber_dim: usize, mut f: impl FnMut(usize) -> CVector) -> Self {
        let mut data = Vec::with_capacity(grid.len() * fiber_dim);
        for k in 0..grid.len() {
            let v = f(k);
            assert_eq!(v.len(), fiber_dim, "fiber vector length");
            data.extend(v.iter());
        }
        KField { grid: grid.clone(), fiber_dim, data }
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn value(&self, k: usize) -> &[C64] {
        &self.data[k * self.fiber_dim..(k + 1) * self.fiber_dim]
    }

    pub fn value_mut(&mut self, k: usize) -> &mut [C64] {
        &mut self.data[k * self.fiber_dim..(k + 1) * self.fiber_dim]
    }

    pub fn vector(&self, k: usize) -> CVector {
        CVector::from_column_slice(self.value(k))
    }

    /// `Σ_k w ‖F(k)‖²`.
    pub fn weighted_norm_squared(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.weight()
    }

    pub fn max_abs_diff(&self, other: &KField) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// How the per-axis discrete Fourier sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformMethod {
    /// Direct character sums with exactly reduced integer phases.
    #[default]
    Direct,
    /// Mixed-radix FFT.
    Fft,
}

/// `f̂(k) = Σ_γ f(γ) e^{-ik·γ}` on the matching k-grid.
pub fn forward_transform(f: &CellField, grid: &KGrid) -> Result<KField> {
    forward_transform_with(f, grid, TransformMethod::Direct)
}

pub fn forward_transform_with(
    f: &CellField,
    grid: &KGrid,
    method: TransformMethod,
) -> Result<KField> {
    if f.sizes() != grid.sizes() {
        return Err(Error::SizeMismatch {
            expected: grid.sizes().to_vec(),
            found: f.sizes().to_vec(),
        });
    }
    let mut data = f.data.clone();
    transform_axes(&mut data, grid.sizes(), f.fiber_dim, -1.0, method);
    Ok(KField { grid: grid.clone(), fiber_dim: f.fiber_dim, data })
}

/// `f(γ) = Σ_k w F(k) e^{ik·γ}` on the matching supercell.
pub fn inverse_transform(field: &KField) -> CellField {
    inverse_transform_with(field, TransformMethod::Direct)
}

pub fn inverse_transform_with(field: &KField, method: TransformMethod) -> CellField {
    let mut data = field.data.clone();
    let sizes = field.grid.sizes();
    transform_axes(&mut data, sizes, field.fiber_dim, 1.0, method);
    let w = field.grid.weight();
    data.iter_mut().for_each(|z| *z *= w);
    CellField { sizes: sizes.to_vec(), fiber_dim: field.fiber_dim, data }
}

fn transform_axes(data: &mut [C64], sizes: &[usize], fiber: usize, sign: f64, method: TransformMethod) {
    let strides = strides_for(sizes);
    let total: usize = sizes.iter().product();
    let mut planner = FftPlanner::<f64>::new();
    for (axis, &m) in sizes.iter().enumerate() {
        if m == 1 {
            continue;
        }
        let step = strides[axis] * fiber;
        let roots: Vec<C64> = (0..m).map(|j| cis(sign * 2.0 * PI * j as f64 / m as f64)).collect();
        let fft = match method {
            TransformMethod::Fft => Some(planner.plan_fft(
                m,
                if sign < 0.0 { FftDirection::Forward } else { FftDirection::Inverse },
            )),
            TransformMethod::Direct => None,
        };
        let mut line = vec![ZERO; m];
        let mut out = vec![ZERO; m];
        for cell in 0..total {
            // Visit each line once, from its first cell.
            if !(cell / strides[axis]).is_multiple_of(m) {
                continue;
            }
            for comp in 0..fiber {
                let base = cell * fiber + comp;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * step];
                }
                match &fft {
                    Some(plan) => {
                        plan.process(&mut line);
                        out.copy_from_slice(&line);
                    }
                    None => {
                        for (q, o) in out.iter_mut().enumerate() {
                            let mut acc = ZERO;
                            for (c, x) in line.iter().enumerate() {
                                acc += x * roots[(q * c) % m];
                            }
                            *o = acc;
                        }
                    }
                }
                for (j, v) in out.iter().enumerate() {
                    data[base + j * step] = *v;
                }
            }
        }
    }
}
