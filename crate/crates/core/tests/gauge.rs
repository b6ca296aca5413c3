use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wanframe_core::gauge::{frame_diagnostics, seed_vectors};
use wanframe_core::linalg::{max_abs, random_gaussian_matrix};
use wanframe_core::*;

fn field(spec: &ModelSpec, sizes: &[usize]) -> ProjectorField {
    let family = build_model(spec).unwrap();
    let grid = KGrid::new(family.lattice().clone(), sizes).unwrap();
    let bands = band_structure(&family, &grid).unwrap();
    let sel = select_bands(&bands, BandRange::single(1).unwrap()).unwrap();
    projector_field(&bands, &sel)
}

fn haldane_trivial() -> ModelSpec {
    ModelSpec::Haldane { t1: 1.0, t2: 0.15, flux: PI / 2.0, mass: 4.0 }
}

/// Rank-2 field on C^4 made of two Haldane band-1 lines with opposite flux:
/// total Chern number zero but each summand twisted.
fn time_reversal_pair(m: usize) -> ProjectorField {
    let plus = field(&ModelSpec::haldane_default(), &[m, m]);
    let minus = field(&ModelSpec::Haldane { t1: 1.0, t2: 0.15, flux: -PI / 2.0, mass: 0.0 }, &[m, m]);
    let frames = plus
        .frames()
        .iter()
        .zip(minus.frames())
        .map(|(a, b)| {
            let mut f = CMatrix::zeros(4, 2);
            f.view_mut((0, 0), (2, 1)).copy_from(a);
            f.view_mut((2, 1), (2, 1)).copy_from(b);
            f
        })
        .collect();
    ProjectorField::from_frames(plus.grid(), frames).unwrap()
}

fn within(ratio: f64, target: f64, tol: f64) -> bool {
    (ratio - target).abs() <= tol * target
}

#[test]
fn transport_gauge_1d_refines_smoothly() {
    let coarse = parallel_transport_gauge(&field(&ModelSpec::cosine_1d(5.0, 8), &[64])).unwrap();
    let fine = parallel_transport_gauge(&field(&ModelSpec::cosine_1d(5.0, 8), &[128])).unwrap();
    let ratio = coarse.max_bond_difference() / fine.max_bond_difference();
    assert!(within(ratio, 2.0, 0.2), "ratio {ratio}");
    assert_eq!(fine.kind(), SectionKind::OrthonormalBasis);
    assert!(fine.gram_defect() <= 1e-10);
}

#[test]
fn transport_gauge_haldane_trivial() {
    let p24 = field(&haldane_trivial(), &[24, 24]);
    let p48 = field(&haldane_trivial(), &[48, 48]);
    let g24 = parallel_transport_gauge(&p24).unwrap();
    let g48 = parallel_transport_gauge(&p48).unwrap();
    assert_eq!(g48.count(), 1);
    assert!(g48.gram_defect() <= 1e-10);
    assert!(g48.membership_residual(&p48) <= 1e-10);
    let ratio = g24.max_bond_difference() / g48.max_bond_difference();
    assert!(within(ratio, 2.0, 0.2), "ratio {ratio}");
}

#[test]
fn transport_gauge_rank_two() {
    let p24 = time_reversal_pair(24);
    let p48 = time_reversal_pair(48);
    assert_eq!(chern_number(&p24).unwrap(), 0);
    let g24 = parallel_transport_gauge(&p24).unwrap();
    let g48 = parallel_transport_gauge(&p48).unwrap();
    assert_eq!(g48.count(), 2);
    assert!(g48.gram_defect() <= 1e-10);
    assert!(g48.membership_residual(&p48) <= 1e-10);
    let ratio = g24.max_bond_difference() / g48.max_bond_difference();
    assert!(within(ratio, 2.0, 0.25), "ratio {ratio}");
}

#[test]
fn transport_gauge_full_fiber() {
    // P = I everywhere: the holonomy is exactly the identity.
    let family = build_model(&ModelSpec::hofstadter(1, 3)).unwrap();
    let grid = KGrid::new(family.lattice().clone(), &[12, 12]).unwrap();
    let bands = band_structure(&family, &grid).unwrap();
    let sel = select_bands(&bands, BandRange::new(1, 3).unwrap()).unwrap();
    let p = projector_field(&bands, &sel);
    let g = parallel_transport_gauge(&p).unwrap();
    assert_eq!(g.count(), 3);
    assert!(g.gram_defect() <= 1e-10);
    assert!(g.membership_residual(&p) <= 1e-10);
}

#[test]
fn obstructed_fields_refuse_transport() {
    let p = field(&ModelSpec::haldane_default(), &[24, 24]);
    assert!(matches!(parallel_transport_gauge(&p), Err(Error::ObstructionDetected { winding }) if winding.abs() == 1));
    let family = build_model(&ModelSpec::hofstadter(1, 3)).unwrap();
    let grid = KGrid::new(family.lattice().clone(), &[24, 24]).unwrap();
    let bands = band_structure(&family, &grid).unwrap();
    let sel = select_bands(&bands, BandRange::new(1, 2).unwrap()).unwrap();
    assert!(matches!(
        parallel_transport_gauge(&projector_field(&bands, &sel)),
        Err(Error::ObstructionDetected { .. })
    ));
}

#[test]
fn orthonormalize_examples() {
    let p = field(&haldane_trivial(), &[12, 12]);
    let basis = parallel_transport_gauge(&p).unwrap();
    let again = orthonormalize_family(&basis).unwrap();
    for k in 0..p.grid().len() {
        assert!(max_abs(&(again.matrix(k) - basis.matrix(k))) <= 1e-12);
    }

    let scaled: Vec<CMatrix> =
        basis.matrices().iter().enumerate().map(|(k, s)| s * C64::new(1.0 + 0.5 * (k as f64).sin(), 0.3)).collect();
    let raw = SectionFamily::new(p.grid(), SectionKind::RawSeed, scaled.clone()).unwrap();
    let normalized = orthonormalize_family(&raw).unwrap();
    for k in 0..p.grid().len() {
        let expected = &scaled[k] / C64::new(scaled[k].column(0).norm(), 0.0);
        assert!(max_abs(&(normalized.matrix(k) - expected)) <= 1e-12);
    }
}

#[test]
fn orthonormalize_smooth_random_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let grid = KGrid::new(Lattice::hypercubic(2).unwrap(), &[32, 32]).unwrap();
    let a = random_gaussian_matrix(3, 2, &mut rng) * C64::new(3.0, 0.0);
    let b = random_gaussian_matrix(3, 2, &mut rng) * C64::new(0.3, 0.0);
    let c = random_gaussian_matrix(3, 2, &mut rng) * C64::new(0.3, 0.0);
    let sections: Vec<CMatrix> = (0..grid.len())
        .map(|k| {
            let th = grid.reduced_point(k);
            &a + &b * C64::from_polar(1.0, 2.0 * PI * th[0]) + &c * C64::from_polar(1.0, 2.0 * PI * th[1])
        })
        .collect();
    let raw = SectionFamily::new(&grid, SectionKind::RawSeed, sections.clone()).unwrap();
    let q = orthonormalize_family(&raw).unwrap();
    assert!(q.gram_defect() <= 1e-12);
    for (k, s) in sections.iter().enumerate() {
        // Oracle: the orthogonal projector onto span(S) is S (S†S)^{-1} S†.
        let span = s * (s.adjoint() * s).try_inverse().unwrap() * s.adjoint();
        let qk = q.matrix(k);
        assert!(max_abs(&(qk * qk.adjoint() - span)) <= 1e-10);
    }
}

#[test]
fn seeds_and_spanning() {
    let p24 = field(&ModelSpec::haldane_default(), &[24, 24]);
    let (full, diag) = seed_sections(&p24, 2, SeedStrategy::Canonical).unwrap();
    assert_eq!(full.kind(), SectionKind::RawSeed);
    assert!((diag.min_margin - 1.0).abs() < 1e-12);
    let again = frame_diagnostics(&p24, &full);
    assert!((again.min_margin - diag.min_margin).abs() <= 1e-12);
    // A single canonical seed vanishes at a Dirac-type point on the grid.
    assert!(matches!(seed_sections(&p24, 1, SeedStrategy::Canonical), Err(Error::SpanningFailure { .. })));

    let p48 = field(&ModelSpec::haldane_default(), &[48, 48]);
    let (_, d48) = seed_sections(&p48, 2, SeedStrategy::Canonical).unwrap();
    assert!(d48.min_margin >= 1e-3);
}

#[test]
fn single_seed_margin_shrinks_under_refinement() {
    let seed = seed_vectors(2, 1, SeedStrategy::RandomDeterministic(3));
    let margins: Vec<f64> = [24, 48, 96]
        .iter()
        .map(|&m| {
            let p = field(&ModelSpec::haldane_default(), &[m, m]);
            let s = SectionFamily::constant(p.grid(), SectionKind::RawSeed, &seed);
            frame_diagnostics(&p, &s).min_margin
        })
        .collect();
    assert!(margins[0] > margins[1] && margins[1] > margins[2], "{margins:?}");
    assert!(margins[2] < 0.05, "{margins:?}");
    for e in [0, 1] {
        let p = field(&ModelSpec::haldane_default(), &[96, 96]);
        let s = SectionFamily::constant(p.grid(), SectionKind::RawSeed, &seed_vectors(2, 2, SeedStrategy::Canonical).columns(e, 1).into_owned());
        assert!(frame_diagnostics(&p, &s).min_margin <= 1e-2);
    }
}

#[test]
fn tight_frame_examples() {
    let p = field(&haldane_trivial(), &[12, 12]);
    let basis = parallel_transport_gauge(&p).unwrap();
    let same = canonical_tight_frame(&p, &basis).unwrap();
    assert_eq!(same.kind(), SectionKind::TightFrame);
    for k in 0..p.grid().len() {
        assert!(max_abs(&(same.matrix(k) - basis.matrix(k))) <= 1e-12);
    }
    assert!(same.gram_defect() <= 1e-10);

    let (seeds, _) = seed_sections(&p, 2, SeedStrategy::Canonical).unwrap();
    let projected = canonical_tight_frame(&p, &seeds).unwrap();
    for k in 0..p.grid().len() {
        assert!(max_abs(&(projected.matrix(k) - p.matrix(k))) <= 1e-12);
    }

    let p48 = field(&ModelSpec::haldane_default(), &[48, 48]);
    let (seeds, _) = seed_sections(&p48, 2, SeedStrategy::Canonical).unwrap();
    let frame = canonical_tight_frame(&p48, &seeds).unwrap();
    assert!(frame.frame_identity_residual(&p48) <= 1e-10);
    assert!(frame.membership_residual(&p48) <= 1e-10);
}

#[test]
fn tight_frame_smoothness_certificate() {
    let diffs: Vec<f64> = [24, 48]
        .iter()
        .map(|&m| {
            let p = field(&ModelSpec::haldane_default(), &[m, m]);
            let (seeds, _) = seed_sections(&p, 2, SeedStrategy::Canonical).unwrap();
            canonical_tight_frame(&p, &seeds).unwrap().max_bond_difference()
        })
        .collect();
    assert!(within(diffs[0] / diffs[1], 2.0, 0.25), "{diffs:?}");
}

#[test]
fn ill_conditioned_frame_operator() {
    let grid = KGrid::new(Lattice::hypercubic(1).unwrap(), &[4]).unwrap();
    let p = ProjectorField::from_frames(&grid, vec![CMatrix::identity(3, 2); 4]).unwrap();
    let mut s = CMatrix::zeros(3, 2);
    s[(0, 0)] = C64::new(1.0, 0.0);
    s[(1, 1)] = C64::new(1e-5, 0.0);
    s[(2, 1)] = C64::new(1.0, 0.0);
    let seeds = SectionFamily::constant(&grid, SectionKind::RawSeed, &s);
    assert!(matches!(canonical_tight_frame(&p, &seeds), Err(Error::IllConditioned { k_index: 0, .. })));
    s[(1, 1)] = C64::new(1e-7, 0.0);
    let seeds = SectionFamily::constant(&grid, SectionKind::RawSeed, &s);
    assert!(matches!(canonical_tight_frame(&p, &seeds), Err(Error::SpanningFailure { .. })));
}

#[test]
fn control_gauge_examples() {
    let grid = KGrid::new(Lattice::hypercubic(2).unwrap(), &[12, 12]).unwrap();
    let v = CMatrix::from_column_slice(2, 1, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    let constant = ProjectorField::from_frames(&grid, vec![v.clone(); grid.len()]).unwrap();
    let c = discontinuous_control_gauge(&constant).unwrap();
    assert_eq!(c.kind(), SectionKind::DiscontinuousControl);
    assert!(c.max_bond_difference() < 1e-15);

    let p = field(&ModelSpec::haldane_default(), &[24, 24]);
    let control = discontinuous_control_gauge(&p).unwrap();
    assert!(control.min_bond_alignment() < 0.9);
    assert!(control.gram_defect() < 1e-12);
    assert!(control.membership_residual(&p) < 1e-12);
}
