use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wanframe_core::linalg::{eigh, max_abs, random_unitary};
use wanframe_core::spectral::{riesz_projector_field, GAP_THRESHOLD};
use wanframe_core::*;

fn bands_for(spec: &ModelSpec, sizes: &[usize]) -> (BlochOperatorFamily, BandStructure) {
    let family = build_model(spec).unwrap();
    let grid = KGrid::new(family.lattice().clone(), sizes).unwrap();
    let bands = band_structure(&family, &grid).unwrap();
    (family, bands)
}

fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Plane-wave Galerkin matrix written from scratch: `(k + 2πg)² δ + V̂(g − g')`.
fn plane_wave_oracle(k: f64, cutoff: i64, amplitude: f64) -> CMatrix {
    let n = (2 * cutoff + 1) as usize;
    CMatrix::from_fn(n, n, |r, c| {
        let (g, h) = (r as i64 - cutoff, c as i64 - cutoff);
        if g == h {
            C64::new((k + 2.0 * PI * g as f64).powi(2), 0.0)
        } else if (g - h).abs() == 1 {
            C64::new(amplitude, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Harper matrix for flux 1/3 written independently of the library.
fn harper_oracle(p1: f64, p2: f64) -> CMatrix {
    let mut h = CMatrix::zeros(3, 3);
    for n in 0..3 {
        h[(n, n)] = C64::new(-2.0 * (p2 - 2.0 * PI * n as f64 / 3.0).cos(), 0.0);
    }
    let t = C64::new(-1.0, 0.0);
    h[(0, 1)] = t;
    h[(1, 0)] = t;
    h[(1, 2)] = t;
    h[(2, 1)] = t;
    h[(2, 0)] = t * C64::from_polar(1.0, p1);
    h[(0, 2)] = h[(2, 0)].conj();
    h
}

#[test]
fn free_spectrum_at_gamma() {
    let (_, bands) = bands_for(&ModelSpec::free_1d(2), &[8]);
    let e = bands.eigenvalues(0);
    let expected = [0.0, 4.0 * PI * PI, 4.0 * PI * PI, 16.0 * PI * PI, 16.0 * PI * PI];
    for (a, b) in e.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9 * (1.0 + b), "{a} vs {b}");
    }
}

#[test]
fn free_band_one_is_rejected() {
    let (_, bands) = bands_for(&ModelSpec::free_1d(2), &[32]);
    match select_bands(&bands, BandRange::single(1).unwrap()) {
        Err(Error::GapViolation { band: 1, gap, .. }) => assert!(gap <= GAP_THRESHOLD),
        other => panic!("expected gap violation, got {other:?}"),
    }
}

#[test]
fn weak_cosine_band_one_has_gap_above() {
    let (_, bands) = bands_for(&ModelSpec::cosine_1d(1.0, 8), &[256]);
    let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
    assert!(sel.gap_above > 0.0);
    let (mut top1, mut bottom2) = (f64::NEG_INFINITY, f64::INFINITY);
    for m in 0..256 {
        let theta = m as f64 / 256.0;
        let k = 2.0 * PI * (theta - (theta + 0.5).floor());
        let e = hermitian_eigenvalues(&plane_wave_oracle(k, 8, 1.0));
        top1 = top1.max(e[0]);
        bottom2 = bottom2.min(e[1]);
    }
    assert!((sel.gap_above - (bottom2 - top1)).abs() < 1e-8, "{} vs {}", sel.gap_above, bottom2 - top1);
}

#[test]
fn hofstadter_gaps_against_refined_scan() {
    let (_, bands) = bands_for(&ModelSpec::hofstadter(1, 3), &[48, 48]);
    let s1 = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
    let s2 = select_bands(&bands, BandRange::single(2).unwrap()).unwrap();
    let s3 = select_bands(&bands, BandRange::single(3).unwrap()).unwrap();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for i in 0..192 {
        for j in 0..192 {
            let e = hermitian_eigenvalues(&harper_oracle(2.0 * PI * i as f64 / 192.0, 2.0 * PI * j as f64 / 192.0));
            for b in 0..3 {
                lo[b] = lo[b].min(e[b]);
                hi[b] = hi[b].max(e[b]);
            }
        }
    }
    let fine = [lo[1] - hi[0], lo[2] - hi[1]];
    assert!(fine.iter().all(|&g| g > 0.5), "{fine:?}");
    // The coarse grid is a subset of the fine one.
    assert!(s1.gap_above >= fine[0] - 1e-10 && s1.gap_above < fine[0] + 0.05);
    assert!(s3.gap_below >= fine[1] - 1e-10 && s3.gap_below < fine[1] + 0.05);
    assert!((s2.gap_below - s1.gap_above).abs() < 1e-12);
    assert!(s1.gap_below.is_infinite() && s3.gap_above.is_infinite());
}

#[test]
fn haldane_gap_closes_at_critical_mass() {
    let (t2, flux) = (0.15, PI / 2.0);
    let critical = 3.0 * 3f64.sqrt() * t2 * flux.sin();
    let step = 0.01;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=50 {
        let mass = 0.5 + step * i as f64;
        let spec = ModelSpec::Haldane { t1: 1.0, t2, flux, mass };
        let (_, bands) = bands_for(&spec, &[24, 24]);
        let gap = (0..bands.grid().len())
            .map(|k| bands.eigenvalues(k)[1] - bands.eigenvalues(k)[0])
            .fold(f64::INFINITY, f64::min);
        if gap < best.0 {
            best = (gap, mass);
        }
    }
    assert!((best.1 - critical).abs() <= step, "closing at {} vs {critical}", best.1);
    assert!(best.0 <= 2.0 * step + 1e-9);
    let (_, bands) = bands_for(&ModelSpec::haldane_default(), &[24, 24]);
    assert!(select_bands(&bands, BandRange::single(1).unwrap()).unwrap().gap_above > 1.0);
}

#[test]
fn projector_invariants_for_builtin_models() {
    for (spec, sizes) in [
        (ModelSpec::hofstadter(1, 3), vec![24, 24]),
        (ModelSpec::haldane_default(), vec![24, 24]),
        (ModelSpec::cosine_1d(5.0, 8), vec![64]),
    ] {
        let (family, bands) = bands_for(&spec, &sizes);
        assert!(bands.max_residual(&family) <= 1e-10);
        assert!(bands.max_unitarity_defect() <= 1e-10);
        let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
        let p = projector_field(&bands, &sel);
        assert!(p.hermiticity_defect() <= 1e-11);
        assert!(p.idempotency_defect() <= 1e-10);
        assert!(p.trace_defect() <= 1e-9);
        assert!(p.commutator_defect(&family) <= 1e-9 * (1.0 + bands.band_extent(bands.band_count()).1));
    }
}

#[test]
fn projector_is_gauge_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (_, bands) = bands_for(&ModelSpec::hofstadter(1, 3), &[12, 12]);
    let sel = select_bands(&bands, BandRange::new(1, 2).unwrap()).unwrap();
    let p = projector_field(&bands, &sel);
    let remixed: Vec<CMatrix> = p.frames().iter().map(|f| f * random_unitary(2, &mut rng)).collect();
    let q = ProjectorField::from_frames(p.grid(), remixed).unwrap();
    assert!(p.max_difference(&q) <= 1e-12);

    let (_, hb) = bands_for(&ModelSpec::haldane_default(), &[12, 12]);
    let hsel = select_bands(&hb, BandRange::single(1).unwrap()).unwrap();
    let hp = projector_field(&hb, &hsel);
    let rephased: Vec<CMatrix> =
        hp.frames().iter().map(|f| f * C64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect();
    let hq = ProjectorField::from_frames(hp.grid(), rephased).unwrap();
    assert!(hp.max_difference(&hq) <= 1e-12);
}

#[test]
fn rank_one_projector_from_first_eigenvector() {
    let (_, bands) = bands_for(&ModelSpec::hofstadter(1, 3), &[6, 6]);
    let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
    let p = projector_field(&bands, &sel);
    for k in 0..bands.grid().len() {
        let v = bands.eigenvectors(k).column(0).into_owned();
        assert!(max_abs(&(p.matrix(k) - &v * v.adjoint())) < 1e-14);
        assert!((p.matrix(k).trace().re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn riesz_full_contour_is_identity() {
    let (family, bands) = bands_for(&ModelSpec::hofstadter(1, 3), &[12, 12]);
    let sel = select_bands(&bands, BandRange::new(1, 3).unwrap()).unwrap();
    let contour = Contour::default_for(&sel);
    let field = riesz_projector_field(&family, bands.grid(), &sel, &contour, 64).unwrap();
    for k in 0..bands.grid().len() {
        assert!(max_abs(&(field.matrix(k) - CMatrix::identity(3, 3))) <= 1e-8);
    }
}

#[test]
fn riesz_agrees_with_eigenvectors() {
    for spec in [ModelSpec::hofstadter(1, 3), ModelSpec::haldane_default()] {
        let (family, bands) = bands_for(&spec, &[12, 12]);
        let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
        let contour = Contour::default_for(&sel);
        assert!(contour.clearance(&bands) > 0.1);
        let riesz = riesz_projector_field(&family, bands.grid(), &sel, &contour, 64).unwrap();
        assert!(riesz.max_difference(&projector_field(&bands, &sel)) <= 1e-8);
        let k = bands.grid().point(5);
        let single = riesz_projector(&family, &sel, &k, &contour, 64).unwrap();
        assert!(max_abs(&(single - riesz.matrix(5))) < 1e-10);
    }
}

#[test]
fn riesz_error_decreases_with_order() {
    let (family, bands) = bands_for(&ModelSpec::haldane_default(), &[12, 12]);
    let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
    let contour = Contour::default_for(&sel);
    let eig = projector_field(&bands, &sel);
    let errors: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&q| riesz_projector_field(&family, bands.grid(), &sel, &contour, q).unwrap().max_difference(&eig))
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn time_reversal_conjugates_projector() {
    let (family, bands) = bands_for(&ModelSpec::cosine_1d(5.0, 8), &[16]);
    assert!(family.has_time_reversal());
    let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
    let p = projector_field(&bands, &sel);
    let g = bands.grid();
    for k in 0..g.len() {
        let d = max_abs(&(p.matrix(g.negated(k)) - p.matrix(k).conjugate()));
        assert!(d <= 1e-10, "k {k}: {d}");
    }
}

#[test]
fn lattice_mismatch_rejected() {
    let family = build_model(&ModelSpec::haldane_default()).unwrap();
    let grid = KGrid::new(Lattice::hypercubic(2).unwrap(), &[4, 4]).unwrap();
    assert!(matches!(band_structure(&family, &grid), Err(Error::InvalidArgument(_))));
}

#[test]
fn eigenvalues_match_oracle_on_hofstadter() {
    let (_, bands) = bands_for(&ModelSpec::hofstadter(1, 3), &[8, 8]);
    for k in 0..bands.grid().len() {
        let th = bands.grid().reduced_point(k);
        let (e, _) = eigh(&harper_oracle(2.0 * PI * th[0], 2.0 * PI * th[1])).unwrap();
        for (a, b) in e.iter().zip(bands.eigenvalues(k)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
