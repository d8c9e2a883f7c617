mod common;

use common::{gaussian, jacobi_svd, rng, subspace_residual_oracle};
use mmsldl::classifier::{build_label_matrix, fit_ridge, reconstruction_error, rpca, ClassNoiseStats, RpcaParams};
use mmsldl::data::{synth_multimodal, SynthSpec};
use mmsldl::slrdl::ksvd_class;
use nalgebra::{DMatrix, DVector};

/// Largest principal angle between the column spans of two orthonormal
/// bases of equal rank.
fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.ncols(), b.ncols(), "ranks differ");
    let s = jacobi_svd(&(a.transpose() * b)).s;
    let smallest = s.into_iter().fold(f64::INFINITY, f64::min);
    smallest.clamp(-1.0, 1.0).acos()
}

fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = jacobi_svd(m);
    let cols: Vec<_> = svd
        .s
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 1e-9)
        .map(|(k, _)| svd.u.column(k).normalize())
        .collect();
    DMatrix::from_columns(&cols)
}

#[test]
fn ridge_weights_shrink_as_the_penalty_grows() {
    let mut r = rng(5);
    let z = gaussian(&mut r, 12, 30);
    let labels: Vec<usize> = (0..30).map(|i| i % 4).collect();
    let h = build_label_matrix(&labels, 4).unwrap();
    let norms: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&l| fit_ridge(&z, &h, l).unwrap().norm())
        .collect();
    assert!(norms[0] > norms[1] && norms[1] > norms[2], "{norms:?}");
}

#[test]
fn rpca_leaves_a_clean_rank_one_block_alone() {
    let mut r = rng(6);
    let x = gaussian(&mut r, 30, 1) * gaussian(&mut r, 1, 12);
    let out = rpca(&x, &RpcaParams::default()).unwrap();
    assert!(out.converged);
    let rel = out.sparse.norm() / x.norm();
    assert!(rel < 1e-6, "{rel}");
}

#[test]
fn rpca_parts_add_up_to_the_input() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let x = gaussian(&mut r, 20, 2) * gaussian(&mut r, 2, 15) + gaussian(&mut r, 20, 15) * 0.01;
        let out = rpca(&x, &RpcaParams::default()).unwrap();
        let rel = (&x - &out.low_rank - &out.sparse).norm() / x.norm();
        assert!(rel <= 1e-7, "seed {seed}: {rel}");
    }
}

#[test]
fn class_model_of_repeated_column_is_that_direction() {
    let v = DVector::from_vec(vec![3.0, -1.0, 2.0, 0.5]);
    let block = DMatrix::from_columns(&[v.clone(), v.clone(), v.clone()]);
    let stats = ClassNoiseStats::fit(&block, &RpcaParams::default()).unwrap();
    assert_eq!(stats.rank(), 1);
    let u = stats.basis.column(0);
    assert!((u.dot(&v).abs() - v.norm()).abs() < 1e-9);
    assert!(stats.mean_noise.amax() < 1e-6);
}

#[test]
fn planted_class_model_recovers_the_subspace() {
    let spec = SynthSpec {
        classes: 2,
        per_class: 40,
        dim: 60,
        rank: 3,
        corruption: 0.05,
        seed: 13,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec).unwrap();
    for c in 0..2 {
        let block = ds.views[0].columns(c * 40, 40).into_owned();
        let stats = ClassNoiseStats::fit(&block, &RpcaParams::default()).unwrap();
        let truth = &ds.bases[0][c];
        assert_eq!(stats.rank(), truth.ncols(), "class {c}");
        let angle = largest_principal_angle(&stats.basis, truth);
        assert!(angle < 1e-2, "class {c}: {angle} rad");
    }
}

#[test]
fn reconstruction_error_matches_a_least_squares_distance() {
    let mut r = rng(14);
    let block = gaussian(&mut r, 15, 3) * gaussian(&mut r, 3, 8);
    let stats = ClassNoiseStats::fit(&block, &RpcaParams::default()).unwrap();
    for _ in 0..10 {
        let x = DVector::from_column_slice(gaussian(&mut r, 15, 1).as_slice());
        let got = reconstruction_error(&x, &stats).unwrap();
        let want = subspace_residual_oracle(&(&x - &stats.mean_noise), &stats.low_rank);
        assert!((got - want).abs() < 1e-8 * (1.0 + want), "{got} vs {want}");
    }
}

#[test]
fn ksvd_error_never_increases() {
    let mut r = rng(15);
    let x = gaussian(&mut r, 20, 4) * gaussian(&mut r, 4, 25) + gaussian(&mut r, 20, 25) * 0.05;
    let fit = ksvd_class(&x, 6, 2, 10).unwrap();
    assert_eq!(fit.error_trace.len(), 10);
    for w in fit.error_trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", fit.error_trace);
    }
}

#[test]
fn ksvd_with_one_atom_per_orthogonal_sample_spans_the_data() {
    let q = nalgebra::QR::new(gaussian(&mut rng(16), 12, 4)).q();
    let scales = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.5, 0.7, 3.0]));
    let x = q.columns(0, 4) * scales;
    let fit = ksvd_class(&x, 4, 4, 5).unwrap();
    let angle = largest_principal_angle(&orthonormal_basis(&fit.atoms), &orthonormal_basis(&x));
    assert!(angle < 1e-6, "{angle}");
}

#[test]
fn clean_class_blocks_have_the_planted_rank() {
    let spec = SynthSpec {
        classes: 3,
        per_class: 12,
        dim: 30,
        rank: 4,
        seed: 17,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec).unwrap();
    for k in 0..2 {
        for c in 0..3 {
            let mut s = jacobi_svd(&ds.clean[k].columns(c * 12, 12).into_owned()).s;
            s.sort_by(|a, b| b.total_cmp(a));
            let gap = s[3] / s[4].max(f64::MIN_POSITIVE);
            assert!(gap > 1e6, "modality {} class {c}: {s:?}", k + 1);
        }
    }
}
