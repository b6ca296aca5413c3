//! Wannier synthesis from section families, shift Gram matrices, the
//! Parseval check and decay profiles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bloch::{forward_transform, inverse_transform, CellField, KField, KGrid};
use crate::error::{Error, Result};
use crate::gauge::{SectionFamily, SectionKind};
use crate::linalg::{eigh, CMatrix, CVector, C64, ZERO};
use crate::spectral::ProjectorField;
use crate::topology::TopologyReport;

/// Shells whose norm is at or below this fraction of the largest shell are
/// excluded from fits.
pub const DECAY_NOISE_FLOOR: f64 = 1e-12;

/// Minimum R² for the exponential-decay flag.
pub const EXPONENTIAL_R2: f64 = 0.99;

/// Wannier functions `w_1..w_l` on the supercell.
#[derive(Debug, Clone)]
pub struct WannierSet {
    grid: KGrid,
    source_kind: SectionKind,
    functions: Vec<CellField>,
}

impl WannierSet {
    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn sizes(&self) -> &[usize] {
        self.grid.sizes()
    }

    pub fn source_kind(&self) -> SectionKind {
        self.source_kind
    }

    pub fn functions(&self) -> &[CellField] {
        &self.functions
    }

    pub fn count(&self) -> usize {
        self.functions.len()
    }

    /// `w_{j,γ}(c) = w_j(c − γ)`.
    pub fn shifted_copy(&self, j: usize, shift: &[i64]) -> CellField {
        self.functions[j].shifted(shift)
    }

    /// `max_j |‖w_j‖² − Σ_k w ‖φ_j(k)‖²|`.
    pub fn plancherel_defect(&self, sections: &SectionFamily) -> f64 {
        let weight = self.grid.weight();
        self.functions
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let k_norm: f64 =
                    sections.matrices().iter().map(|s| s.column(j).norm_squared()).sum::<f64>() * weight;
                (f.norm_squared() - k_norm).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{j,k} ‖(I − P(k)) ŵ_j(k)‖`.
    pub fn spectral_residual(&self, proj: &ProjectorField) -> f64 {
        self.functions
            .iter()
            .map(|f| {
                let fk = forward_transform(f, &self.grid).expect("sizes match");
                (0..self.grid.len())
                    .map(|k| {
                        let v = fk.vector(k);
                        (&v - proj.apply(k, &v)).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// `w_j = inverse transform of φ_j`.
pub fn synthesize_wannier(sections: &SectionFamily, grid: &KGrid) -> Result<WannierSet> {
    if sections.grid().sizes() != grid.sizes() {
        return Err(Error::SizeMismatch {
            expected: grid.sizes().to_vec(),
            found: sections.grid().sizes().to_vec(),
        });
    }
    let n = sections.fiber_dim();
    let functions = (0..sections.count())
        .into_par_iter()
        .map(|j| {
            let field = KField::from_fn(grid, n, |k| sections.section(k, j));
            inverse_transform(&field)
        })
        .collect();
    Ok(WannierSet { grid: grid.clone(), source_kind: sections.kind(), functions })
}

/// Lattice shift `w_{j,γ}`.
pub fn shifted_copies(w: &WannierSet, j: usize, shift: &[i64]) -> CellField {
    w.shifted_copy(j, shift)
}

/// Gram matrix of all shifts `{w_{j,γ}}`, stored through its cross-correlations
/// `C_ij(δ) = Σ_c conj(w_i(c)) w_j(c + δ)`, so that
/// `⟨w_{i,α}, w_{j,β}⟩ = C_ij(α − β)`.
#[derive(Debug, Clone)]
pub struct ShiftGram {
    grid: KGrid,
    count: usize,
    correlations: Vec<Vec<C64>>,
}

impl ShiftGram {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn correlation(&self, i: usize, j: usize, delta: usize) -> C64 {
        self.correlations[i * self.count + j][delta]
    }

    /// `⟨w_{i,α}, w_{j,β}⟩` for flat cell indices `α`, `β`.
    pub fn entry(&self, i: usize, alpha: usize, j: usize, beta: usize) -> C64 {
        let a = self.grid.multi_index(alpha);
        let b = self.grid.multi_index(beta);
        let d: Vec<i64> = a.iter().zip(&b).map(|(&x, &y)| x as i64 - y as i64).collect();
        self.correlation(i, j, self.grid.flat_index(&d))
    }

    /// Dense `(l·|Γ|)²` matrix, rows ordered `(j, γ)` with `γ` fastest.
    pub fn to_dense(&self) -> CMatrix {
        let cells = self.grid.len();
        let size = self.count * cells;
        CMatrix::from_fn(size, size, |r, c| self.entry(r / cells, r % cells, c / cells, c % cells))
    }

    /// `max |G − I|` over all entries.
    pub fn max_orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.count {
            for j in 0..self.count {
                for (d, v) in self.correlations[i * self.count + j].iter().enumerate() {
                    let target = if i == j && d == 0 { 1.0 } else { 0.0 };
                    worst = worst.max((v - C64::new(target, 0.0)).norm());
                }
            }
        }
        worst
    }

    /// Largest entry off the diagonal.
    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.count {
            for j in 0..self.count {
                for (d, v) in self.correlations[i * self.count + j].iter().enumerate() {
                    if !(i == j && d == 0) {
                        worst = worst.max(v.norm());
                    }
                }
            }
        }
        worst
    }

    /// Eigenvalues of the block-circulant Gram matrix, obtained from the
    /// `l×l` symbols `Σ_δ C(δ) e^{-ik·δ}`.
    pub fn spectrum(&self) -> Vec<f64> {
        let l = self.count;
        let symbols: Vec<KField> = self
            .correlations
            .iter()
            .map(|c| {
                let f = CellField::new(self.grid.sizes(), 1, c.clone()).expect("sizes match");
                forward_transform(&f, &self.grid).expect("sizes match")
            })
            .collect();
        let mut out = Vec::with_capacity(l * self.grid.len());
        for k in 0..self.grid.len() {
            let m = CMatrix::from_fn(l, l, |i, j| symbols[i * l + j].value(k)[0]);
            let (e, _) = eigh(&crate::linalg::hermitize(&m)).expect("small Hermitian eigensolve");
            out.extend(e);
        }
        out
    }
}

/// Cell multi-indices, precomputed for allocation-free translation.
struct CellTable {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    multi: Vec<usize>,
}

impl CellTable {
    fn new(grid: &KGrid) -> Self {
        let dim = grid.dim();
        let multi = (0..grid.len()).flat_map(|c| grid.multi_index(c)).collect();
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * grid.sizes()[a + 1];
        }
        CellTable { sizes: grid.sizes().to_vec(), strides, multi }
    }

    /// Flat index of `c + sign·g`.
    #[inline]
    fn translate(&self, c: usize, g: usize, sign: i64) -> usize {
        let dim = self.sizes.len();
        let mut idx = 0;
        for a in 0..dim {
            let m = self.sizes[a] as i64;
            let v = (self.multi[c * dim + a] as i64 + sign * self.multi[g * dim + a] as i64).rem_euclid(m);
            idx += v as usize * self.strides[a];
        }
        idx
    }
}

/// Direct real-space cross-correlations of all Wannier pairs.
pub fn gram_matrix(w: &WannierSet) -> ShiftGram {
    let l = w.count();
    let cells = w.grid.len();
    let table = CellTable::new(&w.grid);
    let pairs: Vec<(usize, usize)> = (0..l).flat_map(|i| (0..l).map(move |j| (i, j))).collect();
    let correlations = pairs
        .iter()
        .map(|&(i, j)| {
            let (a, b) = (&w.functions[i], &w.functions[j]);
            (0..cells)
                .into_par_iter()
                .map(|d| {
                    let mut acc = ZERO;
                    for c in 0..cells {
                        let bc = b.value(table.translate(c, d, 1));
                        for (x, y) in a.value(c).iter().zip(bc) {
                            acc += x.conj() * y;
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    ShiftGram { grid: w.grid.clone(), count: l, correlations }
}

/// Random complex Gaussian fields, drawn sequentially from one ChaCha8 stream.
pub fn random_fields(sizes: &[usize], fiber_dim: usize, count: usize, seed: u64) -> Vec<CellField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = sizes.iter().product::<usize>() * fiber_dim;
    (0..count)
        .map(|_| {
            let data = (0..len)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
                .collect();
            CellField::new(sizes, fiber_dim, data).expect("length matches")
        })
        .collect()
}

/// Orthogonal projection of `f` onto the spectral subspace.
pub fn project_field(f: &CellField, proj: &ProjectorField) -> Result<CellField> {
    let mut fk = forward_transform(f, proj.grid())?;
    for k in 0..proj.grid().len() {
        let v = proj.apply(k, &fk.vector(k));
        fk.value_mut(k).copy_from_slice(v.as_slice());
    }
    Ok(inverse_transform(&fk))
}

/// `|‖f‖² − Σ_{j,γ} |(f, w_{j,γ})|²| / ‖f‖²` for one field.
pub fn parseval_residual(w: &WannierSet, f: &CellField) -> f64 {
    parseval_residual_with(w, f, &CellTable::new(&w.grid))
}

fn parseval_residual_with(w: &WannierSet, f: &CellField, table: &CellTable) -> f64 {
    let cells = w.grid.len();
    let norm = f.norm_squared();
    let mut frame_sum = 0.0;
    for wj in &w.functions {
        frame_sum += (0..cells)
            .into_par_iter()
            .map(|g| {
                let mut acc = ZERO;
                for c in 0..cells {
                    let wv = wj.value(table.translate(c, g, -1));
                    for (x, y) in f.value(c).iter().zip(wv) {
                        acc += x * y.conj();
                    }
                }
                acc.norm_sqr()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum::<f64>();
    }
    (norm - frame_sum).abs() / norm
}

/// Worst relative Parseval residual over `trials` random fields projected
/// into the spectral subspace.
pub fn parseval_check(w: &WannierSet, proj: &ProjectorField, trials: usize, seed: u64) -> Result<f64> {
    let n = proj.fiber_dim();
    let raw = random_fields(w.sizes(), n, trials, seed);
    let projected = raw.iter().map(|f| project_field(f, proj)).collect::<Result<Vec<_>>>()?;
    let table = CellTable::new(&w.grid);
    Ok(projected.iter().map(|f| parseval_residual_with(w, f, &table)).fold(0.0, f64::max))
}

/// Shell norms and decay fits of one Wannier function.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayProfile {
    /// `s_r = sqrt(Σ_{|γ|∞ = r} ‖w(γ)‖²)`.
    pub shell_norms: Vec<f64>,
    /// Inclusive shell range used for fitting.
    pub fit_window: (usize, usize),
    pub fit_points: usize,
    /// Rate `α` of `log s_r ≈ a − α r`.
    pub fitted_rate: Option<f64>,
    pub r_squared: Option<f64>,
    pub exponential_ssr: Option<f64>,
    /// Residual of `log s_r ≈ b − p log r`.
    pub power_law_ssr: Option<f64>,
    /// `Σ_γ ‖w(γ)‖`.
    pub slow_decay_sum: f64,
    pub exponential: bool,
    /// Fewer than three shells above the noise floor.
    pub compact: bool,
}

impl DecayProfile {
    /// The exponential flag at a caller-chosen R² threshold. Compact
    /// profiles count as decaying.
    pub fn decays_exponentially(&self, min_r2: f64) -> bool {
        if self.compact {
            return true;
        }
        match (self.fitted_rate, self.r_squared, self.exponential_ssr, self.power_law_ssr) {
            (Some(rate), Some(r2), Some(e), Some(p)) => rate > 0.0 && e < p && r2 >= min_r2,
            _ => false,
        }
    }
}

/// Sup-norm shell of a cell on the periodic supercell.
pub fn shell_of(cell: &[usize], sizes: &[usize]) -> usize {
    cell.iter().zip(sizes).map(|(&c, &m)| c.min(m - c)).max().unwrap_or(0)
}

struct LineFit {
    slope: f64,
    ssr: f64,
    sst: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let sst = ys.iter().map(|y| (y - my).powi(2)).sum();
    LineFit { slope, ssr, sst }
}

pub fn field_decay_profile(w: &CellField) -> Result<DecayProfile> {
    let sizes = w.sizes();
    let max_shell = sizes.iter().map(|m| m / 2).max().unwrap_or(0);
    if max_shell < 4 {
        return Err(Error::SupercellTooSmall { max_shell });
    }
    let mut sq = vec![0.0; max_shell + 1];
    let mut slow_decay_sum = 0.0;
    for c in 0..w.cell_count() {
        let r = shell_of(&w.cell_multi_index(c), sizes);
        let v: f64 = w.value(c).iter().map(|z| z.norm_sqr()).sum();
        sq[r] += v;
        slow_decay_sum += v.sqrt();
    }
    let shell_norms: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let top = shell_norms.iter().copied().fold(0.0, f64::max);
    let window = (1, (3 * max_shell) / 4);
    let (xs, ys): (Vec<f64>, Vec<f64>) = (window.0..=window.1)
        .filter(|&r| shell_norms[r] > DECAY_NOISE_FLOOR * top)
        .map(|r| (r as f64, shell_norms[r].ln()))
        .unzip();
    let mut profile = DecayProfile {
        shell_norms,
        fit_window: window,
        fit_points: xs.len(),
        fitted_rate: None,
        r_squared: None,
        exponential_ssr: None,
        power_law_ssr: None,
        slow_decay_sum,
        exponential: false,
        compact: xs.len() < 3,
    };
    if profile.compact {
        return Ok(profile);
    }
    let exp_fit = fit_line(&xs, &ys);
    let logs: Vec<f64> = xs.iter().map(|r| r.ln()).collect();
    let pow_fit = fit_line(&logs, &ys);
    let rate = -exp_fit.slope;
    let r2 = if exp_fit.sst > 0.0 { 1.0 - exp_fit.ssr / exp_fit.sst } else { 0.0 };
    profile.fitted_rate = Some(rate);
    profile.r_squared = Some(r2);
    profile.exponential_ssr = Some(exp_fit.ssr);
    profile.power_law_ssr = Some(pow_fit.ssr);
    profile.exponential = profile.decays_exponentially(EXPONENTIAL_R2);
    Ok(profile)
}

/// Decay profile of every function in the set.
pub fn decay_profile(w: &WannierSet) -> Result<Vec<DecayProfile>> {
    w.functions.iter().map(field_decay_profile).collect()
}

/// Summary of a frame construction and its verification.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FrameReport {
    pub topology: TopologyReport,
    pub achieved_l: usize,
    pub parseval_residual: Option<f64>,
    pub orthonormality_residual: Option<f64>,
    pub decay: Vec<DecayProfile>,
    pub construction: SectionKind,
}

/// `Σ_k w ⟨φ_i(k), φ_j(k)⟩ e^{ik·δ}` evaluated as a k-space route to the
/// correlations, for cross-checking `gram_matrix`.
pub fn k_space_correlation(sections: &SectionFamily, i: usize, j: usize) -> CellField {
    let grid = sections.grid();
    let field = KField::from_fn(grid, 1, |k| {
        let s = sections.matrix(k);
        CVector::from_element(1, s.column(i).dotc(&s.column(j)))
    });
    inverse_transform(&field)
}
