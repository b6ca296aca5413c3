//! Lattices and the periodic operator families used as test beds.
//!
//! Every family is evaluated in the periodic (reduced) Bloch convention:
//! `L(k + b_i) = L(k)` for all dual basis vectors. Tight-binding models get
//! this for free by ignoring orbital positions in the Bloch phases. The
//! plane-wave Schrödinger model needs an explicit change of basis, see
//! [`BlochOperatorFamily::convention_unitary`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, hermitize, CMatrix, C64, ZERO};

const DUALITY_TOLERANCE: f64 = 1e-14;

/// A Bravais lattice in one or two dimensions together with its dual.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    /// Columns are the basis vectors `a_i`.
    basis: DMatrix<f64>,
    /// Columns are the dual vectors `b_i`, `(b_i, a_j) = 2π δ_ij`.
    dual: DMatrix<f64>,
}

impl Lattice {
    pub fn new(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.len();
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidSpec(format!(
                "lattice dimension must be 1 or 2, got {n}"
            )));
        }
        if vectors.iter().any(|v| v.len() != n || v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidSpec(format!(
                "lattice vectors must be {n} finite components each"
            )));
        }
        let basis = DMatrix::from_fn(n, n, |r, c| vectors[c][r]);
        let det = basis.determinant();
        if det.abs() < 1e-12 {
            return Err(Error::InvalidSpec(
                "lattice basis vectors are linearly dependent".into(),
            ));
        }
        let inv = basis.clone().try_inverse().ok_or_else(|| {
            Error::InvalidSpec("lattice basis vectors are linearly dependent".into())
        })?;
        let dual = inv.transpose() * (2.0 * PI);
        let lattice = Lattice { basis, dual };
        debug_assert!(lattice.duality_defect() < DUALITY_TOLERANCE * 10.0);
        Ok(lattice)
    }

    /// `Z^n` with unit spacing.
    pub fn hypercubic(dim: usize) -> Result<Self> {
        let vectors: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Lattice::new(&vectors)
    }

    /// Triangular Bravais lattice of the honeycomb structure, unit spacing.
    pub fn triangular() -> Self {
        Lattice::new(&[vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]).expect("valid basis")
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis_vector(&self, i: usize) -> Vec<f64> {
        self.basis.column(i).iter().copied().collect()
    }

    pub fn dual_vector(&self, i: usize) -> Vec<f64> {
        self.dual.column(i).iter().copied().collect()
    }

    /// `max_ij |(b_i, a_j) - 2π δ_ij|`.
    pub fn duality_defect(&self) -> f64 {
        let g = self.dual.transpose() * &self.basis;
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 2.0 * PI } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Reduced coordinates `θ_i = (k, a_i) / 2π`, so that `k = Σ θ_i b_i`.
    pub fn reduced(&self, k: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let a = self.basis.column(i);
                a.iter().zip(k).map(|(x, y)| x * y).sum::<f64>() / (2.0 * PI)
            })
            .collect()
    }

    /// Cartesian quasimomentum `Σ θ_i b_i`.
    pub fn cartesian(&self, reduced: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|i| self.dual[(r, i)] * reduced[i]).sum())
            .collect()
    }

    /// Lattice vector `Σ n_i a_i`.
    pub fn position(&self, cell: &[i64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|i| self.basis[(r, i)] * cell[i] as f64).sum())
            .collect()
    }
}

/// One Fourier coefficient `V̂(g)` of a 1D periodic potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub g: i64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// A hopping `t · |from, 0⟩⟨to, cell|` (its Hermitian conjugate is implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hopping {
    pub from: usize,
    pub to: usize,
    pub cell: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

fn unit_hopping() -> f64 {
    1.0
}

/// Model parameters, the `[model]` section of a pipeline config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `-d²/dx² + V(x)` on `Z`, truncated to plane waves `|g| ≤ cutoff`.
    #[serde(rename = "schrodinger1d")]
    Schrodinger1d {
        #[serde(default)]
        potential: Vec<FourierTerm>,
        cutoff: usize,
    },
    /// Haldane honeycomb model: nearest-neighbour `t1`, complex
    /// next-nearest-neighbour `t2 e^{±i flux}`, staggered mass.
    Haldane { t1: f64, t2: f64, flux: f64, mass: f64 },
    /// Harper-Hofstadter model at flux `p/q` per plaquette, Landau gauge.
    Hofstadter {
        p: u32,
        q: u32,
        #[serde(default = "unit_hopping")]
        hopping: f64,
    },
    /// Arbitrary tight-binding model in the periodic gauge.
    CustomTightBinding {
        /// Lattice vectors; defaults to `Z^dim`.
        #[serde(default)]
        lattice: Option<Vec<Vec<f64>>>,
        dim: usize,
        orbitals: usize,
        hoppings: Vec<Hopping>,
    },
}

impl ModelSpec {
    /// `V(x) = 2 a cos(2πx)`, i.e. `V̂(±1) = a`.
    pub fn cosine_1d(amplitude: f64, cutoff: usize) -> Self {
        ModelSpec::Schrodinger1d {
            potential: vec![
                FourierTerm { g: -1, re: amplitude, im: 0.0 },
                FourierTerm { g: 1, re: amplitude, im: 0.0 },
            ],
            cutoff,
        }
    }

    pub fn free_1d(cutoff: usize) -> Self {
        ModelSpec::Schrodinger1d { potential: Vec::new(), cutoff }
    }

    /// Topological-phase defaults: `t1 = 1, t2 = 0.15, flux = π/2, mass = 0`.
    pub fn haldane_default() -> Self {
        ModelSpec::Haldane { t1: 1.0, t2: 0.15, flux: PI / 2.0, mass: 0.0 }
    }

    pub fn hofstadter(p: u32, q: u32) -> Self {
        ModelSpec::Hofstadter { p, q, hopping: 1.0 }
    }
}

#[derive(Debug, Clone)]
enum Model {
    PlaneWave {
        cutoff: usize,
        /// `V̂(d)` for `d = -2G..=2G`, stored at `d + 2G`.
        potential: Vec<C64>,
        /// `F_{s,g} = e^{2πi g s/N}/√N`.
        dft: CMatrix,
    },
    Haldane {
        t1: f64,
        t2: f64,
        flux: f64,
        mass: f64,
    },
    Hofstadter {
        p: u32,
        q: u32,
        hopping: f64,
    },
    TightBinding {
        orbitals: usize,
        hoppings: Vec<Hopping>,
    },
}

/// The map `k ↦ L(k)` of `N × N` Hermitian fiber operators.
///
/// Immutable after construction; `evaluate` is pure and may be called from
/// parallel loops.
#[derive(Debug, Clone)]
pub struct BlochOperatorFamily {
    lattice: Lattice,
    fiber_dim: usize,
    model: Model,
}

/// Validates `spec` and instantiates the operator family.
pub fn build_model(spec: &ModelSpec) -> Result<BlochOperatorFamily> {
    match spec {
        ModelSpec::Schrodinger1d { potential, cutoff } => build_plane_wave(potential, *cutoff),
        &ModelSpec::Haldane { t1, t2, flux, mass } => {
            if ![t1, t2, flux, mass].iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidSpec("haldane parameters must be finite".into()));
            }
            Ok(BlochOperatorFamily {
                lattice: Lattice::triangular(),
                fiber_dim: 2,
                model: Model::Haldane { t1, t2, flux, mass },
            })
        }
        &ModelSpec::Hofstadter { p, q, hopping } => {
            if !(0 < p && p < q) {
                return Err(Error::InvalidSpec(format!(
                    "hofstadter flux needs 0 < p < q, got p={p}, q={q}"
                )));
            }
            if gcd(p, q) != 1 {
                return Err(Error::InvalidSpec(format!(
                    "hofstadter flux p/q must be reduced, gcd({p},{q}) = {}",
                    gcd(p, q)
                )));
            }
            if !hopping.is_finite() {
                return Err(Error::InvalidSpec("hofstadter hopping must be finite".into()));
            }
            let lattice = Lattice::new(&[vec![q as f64, 0.0], vec![0.0, 1.0]])?;
            Ok(BlochOperatorFamily {
                lattice,
                fiber_dim: q as usize,
                model: Model::Hofstadter { p, q, hopping },
            })
        }
        ModelSpec::CustomTightBinding { lattice, dim, orbitals, hoppings } => {
            let lattice = match lattice {
                Some(v) => Lattice::new(v)?,
                None => Lattice::hypercubic(*dim)?,
            };
            if lattice.dim() != *dim {
                return Err(Error::InvalidSpec(format!(
                    "lattice has dimension {}, model declares {dim}",
                    lattice.dim()
                )));
            }
            if *orbitals == 0 {
                return Err(Error::InvalidSpec("custom model needs at least one orbital".into()));
            }
            for (i, h) in hoppings.iter().enumerate() {
                if h.from >= *orbitals || h.to >= *orbitals {
                    return Err(Error::InvalidSpec(format!(
                        "hopping {i}: orbital index out of range (orbitals = {orbitals})"
                    )));
                }
                if h.cell.len() != *dim {
                    return Err(Error::InvalidSpec(format!(
                        "hopping {i}: cell vector must have {dim} entries"
                    )));
                }
                if !(h.re.is_finite() && h.im.is_finite()) {
                    return Err(Error::InvalidSpec(format!("hopping {i}: non-finite amplitude")));
                }
                if h.from == h.to && h.cell.iter().all(|&c| c == 0) && h.im != 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "hopping {i}: on-site energy must be real"
                    )));
                }
            }
            Ok(BlochOperatorFamily {
                lattice,
                fiber_dim: *orbitals,
                model: Model::TightBinding { orbitals: *orbitals, hoppings: hoppings.clone() },
            })
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn build_plane_wave(terms: &[FourierTerm], cutoff: usize) -> Result<BlochOperatorFamily> {
    if cutoff < 1 {
        return Err(Error::InvalidSpec("plane-wave cutoff must be at least 1".into()));
    }
    let mut coeffs: BTreeMap<i64, C64> = BTreeMap::new();
    for t in terms {
        if !(t.re.is_finite() && t.im.is_finite()) {
            return Err(Error::InvalidSpec(format!("potential coefficient g={} not finite", t.g)));
        }
        if coeffs.insert(t.g, C64::new(t.re, t.im)).is_some() {
            return Err(Error::InvalidSpec(format!("potential coefficient g={} repeated", t.g)));
        }
    }
    for (&g, &v) in &coeffs {
        let partner = coeffs.get(&-g).copied().unwrap_or(ZERO);
        if (partner - v.conj()).norm() > 1e-14 * (1.0 + v.norm()) {
            return Err(Error::InvalidSpec(format!(
                "potential is not Hermitian-symmetric: V̂({}) must equal conj(V̂({g}))",
                -g
            )));
        }
    }
    let g_max = cutoff as i64;
    let n = 2 * cutoff + 1;
    let potential = (-2 * g_max..=2 * g_max)
        .map(|d| coeffs.get(&d).copied().unwrap_or(ZERO))
        .collect();
    let norm = 1.0 / (n as f64).sqrt();
    let dft = CMatrix::from_fn(n, n, |s, gi| {
        let g = gi as i64 - g_max;
        // Reduce the integer phase exactly before scaling by 2π/N.
        let j = (g * s as i64).rem_euclid(n as i64);
        cis(2.0 * PI * j as f64 / n as f64) * norm
    });
    Ok(BlochOperatorFamily {
        lattice: Lattice::hypercubic(1)?,
        fiber_dim: n,
        model: Model::PlaneWave { cutoff, potential, dft },
    })
}

impl BlochOperatorFamily {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    /// Whether `L(-k) = conj(L(k))` holds (real coefficients).
    pub fn has_time_reversal(&self) -> bool {
        match &self.model {
            Model::PlaneWave { potential, .. } => {
                let n = potential.len();
                (0..n).all(|i| (potential[i] - potential[n - 1 - i].conj()).norm() == 0.0)
            }
            Model::Haldane { t2, flux, .. } => *t2 == 0.0 || flux.sin() == 0.0,
            Model::Hofstadter { .. } => false,
            Model::TightBinding { hoppings, .. } => hoppings.iter().all(|h| h.im == 0.0),
        }
    }

    /// `L(k)` at a Cartesian quasimomentum.
    pub fn evaluate(&self, k: &[f64]) -> CMatrix {
        assert_eq!(k.len(), self.dim(), "quasimomentum dimension");
        self.evaluate_reduced(&self.lattice.reduced(k))
    }

    /// `L(k)` at reduced coordinates `k = Σ θ_i b_i`.
    pub fn evaluate_reduced(&self, theta: &[f64]) -> CMatrix {
        assert_eq!(theta.len(), self.dim(), "quasimomentum dimension");
        let theta: Vec<f64> = theta.iter().map(|t| t - t.floor()).collect();
        match &self.model {
            Model::PlaneWave { cutoff, potential, dft } => {
                let kappa = 2.0 * PI * (theta[0] - (theta[0] + 0.5).floor());
                let h = plane_wave_block(*cutoff, potential, kappa);
                let u = convention(dft, kappa);
                hermitize(&(&u * h * u.adjoint()))
            }
            &Model::Haldane { t1, t2, flux, mass } => haldane_matrix(t1, t2, flux, mass, &theta),
            &Model::Hofstadter { p, q, hopping } => hofstadter_matrix(p, q, hopping, &theta),
            Model::TightBinding { orbitals, hoppings } => {
                tight_binding_matrix(*orbitals, hoppings, &theta)
            }
        }
    }

    /// The Galerkin matrix in the plane-wave basis `e^{i(k+2πg)x}`, `|g| ≤ G`,
    /// without reduction of `k` (the `e^{ikx}`-extracted convention).
    ///
    /// Returns `None` for tight-binding models.
    pub fn plane_wave_matrix(&self, k: f64) -> Option<CMatrix> {
        match &self.model {
            Model::PlaneWave { cutoff, potential, .. } => {
                Some(plane_wave_block(*cutoff, potential, k))
            }
            _ => None,
        }
    }

    /// Unitary `D(κ) F` taking plane-wave coefficients at reduced momentum
    /// `κ ∈ [-π, π)` to the periodic-convention fiber (samples of the Bloch
    /// function at `x_s = s/N`, scaled by `1/√N`):
    /// `evaluate(κ) = U H_pw(κ) U†`.
    pub fn convention_unitary(&self, kappa: f64) -> Option<CMatrix> {
        match &self.model {
            Model::PlaneWave { dft, .. } => Some(convention(dft, kappa)),
            _ => None,
        }
    }
}

fn plane_wave_block(cutoff: usize, potential: &[C64], k: f64) -> CMatrix {
    let n = 2 * cutoff + 1;
    let g_max = cutoff as i64;
    CMatrix::from_fn(n, n, |i, j| {
        let d = i as i64 - j as i64;
        let mut v = potential[(d + 2 * g_max) as usize];
        if i == j {
            let q = k + 2.0 * PI * (i as i64 - g_max) as f64;
            v += C64::new(q * q, 0.0);
        }
        v
    })
}

fn convention(dft: &CMatrix, kappa: f64) -> CMatrix {
    let n = dft.nrows();
    CMatrix::from_fn(n, n, |s, g| cis(kappa * s as f64 / n as f64) * dft[(s, g)])
}

fn add_bond(h: &mut CMatrix, i: usize, j: usize, t: C64) {
    h[(i, j)] += t;
    h[(j, i)] += t.conj();
}

fn haldane_matrix(t1: f64, t2: f64, flux: f64, mass: f64, theta: &[f64]) -> CMatrix {
    let p1 = 2.0 * PI * theta[0];
    let p2 = 2.0 * PI * theta[1];
    // B neighbours of A(0) sit in cells 0, -a1, -a2.
    let hab = -(C64::new(1.0, 0.0) + cis(-p1) + cis(-p2)) * t1;
    // Next-nearest-neighbour vectors a1, a2 - a1, -a2 circulate one way.
    let nnn = [p1, p2 - p1, -p2];
    let haa = mass + 2.0 * t2 * nnn.iter().map(|k| (k + flux).cos()).sum::<f64>();
    let hbb = -mass + 2.0 * t2 * nnn.iter().map(|k| (k - flux).cos()).sum::<f64>();
    let mut h = CMatrix::zeros(2, 2);
    h[(0, 0)] = C64::new(haa, 0.0);
    h[(1, 1)] = C64::new(hbb, 0.0);
    h[(0, 1)] = hab;
    h[(1, 0)] = hab.conj();
    h
}

fn hofstadter_matrix(p: u32, q: u32, t: f64, theta: &[f64]) -> CMatrix {
    let q = q as usize;
    let p1 = 2.0 * PI * theta[0];
    let p2 = 2.0 * PI * theta[1];
    let mut h = CMatrix::zeros(q, q);
    // Peierls phase 2π p n / q along a2; its sign fixes the band-1 Chern number to +1 at p = 1.
    for n in 0..q {
        let phase = 2.0 * PI * ((p as usize * n) % q) as f64 / q as f64;
        h[(n, n)] = C64::new(-2.0 * t * (p2 - phase).cos(), 0.0);
    }
    for n in 0..q - 1 {
        add_bond(&mut h, n, n + 1, C64::new(-t, 0.0));
    }
    // The bond leaving the magnetic cell carries the Bloch phase of a1.
    add_bond(&mut h, q - 1, 0, cis(p1) * -t);
    h
}

fn tight_binding_matrix(orbitals: usize, hoppings: &[Hopping], theta: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(orbitals, orbitals);
    for hop in hoppings {
        let t = C64::new(hop.re, hop.im);
        if hop.from == hop.to && hop.cell.iter().all(|&c| c == 0) {
            h[(hop.from, hop.from)] += C64::new(hop.re, 0.0);
            continue;
        }
        let phase: f64 = hop.cell.iter().zip(theta).map(|(&c, th)| c as f64 * th).sum();
        add_bond(&mut h, hop.from, hop.to, t * cis(2.0 * PI * phase));
    }
    h
}
