mod common;

use common::{gaussian, max_abs_diff, nuclear_norm_oracle, rng, soft_oracle, svt_oracle};
use mmsldl::slrdl::{
    coding_converged, damped_dictionary_step, dictionary_converged, solve_coding, update_dictionary, update_e,
    update_multipliers_and_penalty, update_w, update_z, Coupling, Dictionary, Hyperparams, IdealCode, SolverState,
};
use mmsldl::Error;
use nalgebra::DMatrix;

fn unit_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut c in m.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    m
}

fn state_for(dict: &Dictionary, x: &DMatrix<f64>, h: &Hyperparams) -> SolverState {
    SolverState::new(dict, x, h).unwrap()
}

fn random_state(seed: u64, d: usize, c: usize, n: usize) -> (Dictionary, DMatrix<f64>, SolverState) {
    let mut r = rng(seed);
    let dict = Dictionary::new(unit_columns(gaussian(&mut r, d, c)), &[c / 2, c - c / 2]).unwrap();
    let x = gaussian(&mut r, d, n);
    let mut s = state_for(&dict, &x, &Hyperparams::default());
    s.z = gaussian(&mut r, c, n);
    s.w = gaussian(&mut r, c, n);
    s.e = gaussian(&mut r, d, n) * 0.1;
    s.y = gaussian(&mut r, d, n);
    s.m = gaussian(&mut r, c, n);
    s.mu = 0.7;
    (dict, x, s)
}

#[test]
fn z_step_is_a_pure_prox_when_the_smooth_part_vanishes() {
    let q = nalgebra::QR::new(gaussian(&mut rng(1), 4, 4)).q();
    let dict = Dictionary::new(q.clone(), &[2, 2]).unwrap();
    let z = gaussian(&mut rng(2), 4, 3);
    let x = &q * &z;
    let h = Hyperparams::default().uncoupled();
    let mut s = state_for(&dict, &x, &h);
    s.z = z.clone();
    s.w = z.clone();
    s.mu = 1.0;
    s.eta = 1.0;
    let next = update_z(&s, &dict, &x, None, &h).unwrap();
    assert!(max_abs_diff(&next, &svt_oracle(&z, 1.0)) < 1e-10);
}

#[test]
fn z_step_keeps_the_origin() {
    let dict = Dictionary::new(DMatrix::identity(3, 3), &[1, 2]).unwrap();
    let x = DMatrix::zeros(3, 2);
    let h = Hyperparams::default().uncoupled();
    let s = state_for(&dict, &x, &h);
    assert_eq!(update_z(&s, &dict, &x, None, &h).unwrap(), DMatrix::zeros(3, 2));
}

/// `⟨G, Z − Zʲ⟩ + τ/2‖Z − Zʲ‖² + ‖Z‖_*`, evaluated here from scratch.
fn surrogate(s: &SolverState, dict: &Dictionary, x: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    let d = dict.atoms();
    let mu = s.mu;
    let inner = x - d * &s.z - &s.e + &s.y / mu;
    let grad = -(d.transpose() * inner) * mu + (&s.z - &s.w) * mu + &s.m;
    let tau = s.eta * mu;
    let step = z - &s.z;
    grad.dot(&step) + 0.5 * tau * step.norm_squared() + nuclear_norm_oracle(z)
}

#[test]
fn z_step_decreases_the_linearized_surrogate() {
    for seed in 0..5 {
        let (dict, x, s) = random_state(10 + seed, 6, 4, 4);
        let h = Hyperparams::default().uncoupled();
        let next = update_z(&s, &dict, &x, None, &h).unwrap();
        let before = surrogate(&s, &dict, &x, &s.z);
        let after = surrogate(&s, &dict, &x, &next);
        assert!(after < before, "seed {seed}: {after} !< {before}");
        // and it is the minimizer: nearby points do no better
        let mut r = rng(100 + seed);
        for _ in 0..20 {
            let probe = &next + gaussian(&mut r, 4, 4) * 1e-3;
            assert!(surrogate(&s, &dict, &x, &probe) >= after - 1e-12);
        }
    }
}

#[test]
fn coupled_z_step_needs_a_partner() {
    let (dict, x, s) = random_state(3, 6, 4, 4);
    let h = Hyperparams::default();
    assert!(matches!(update_z(&s, &dict, &x, None, &h), Err(Error::InvalidInput(_))));
}

#[test]
fn w_step_examples() {
    let dict = Dictionary::new(DMatrix::identity(2, 2), &[1, 1]).unwrap();
    let x = DMatrix::zeros(2, 2);
    let h = Hyperparams {
        beta: 0.5,
        ..Default::default()
    };
    let mut s = state_for(&dict, &x, &h);
    s.mu = 1.0;
    s.z = DMatrix::from_row_slice(2, 2, &[1.0, -0.2, 0.3, 2.0]);
    let w = update_w(&s, &h).unwrap();
    assert_eq!(w, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.5]));

    let h0 = Hyperparams { beta: 0.0, ..h };
    s.m = DMatrix::from_row_slice(2, 2, &[0.2, 0.4, -1.0, 0.0]);
    s.mu = 2.0;
    let w0 = update_w(&s, &h0).unwrap();
    assert!(max_abs_diff(&w0, &(&s.z + &s.m / 2.0)) < 1e-15);

    s.mu = 0.0;
    assert!(matches!(update_w(&s, &h), Err(Error::InvalidState(_))));
}

#[test]
fn w_and_e_steps_match_the_shrinkage_oracle() {
    for seed in 0..5 {
        let (dict, x, s) = random_state(20 + seed, 7, 5, 3);
        let h = Hyperparams::default();
        let w = update_w(&s, &h).unwrap();
        let expected_w = soft_oracle(&(&s.z + &s.m / s.mu), h.beta / s.mu);
        assert!(max_abs_diff(&w, &expected_w) < 1e-12);

        let e = update_e(&s, &dict, &x, &h).unwrap();
        let arg = &s.y / s.mu + &x - dict.atoms() * &s.z;
        assert!(max_abs_diff(&e, &soft_oracle(&arg, h.lambda / s.mu)) < 1e-12);
    }
}

#[test]
fn e_step_examples() {
    let dict = Dictionary::new(DMatrix::from_row_slice(1, 1, &[1.0]), &[1]).unwrap();
    let x = DMatrix::from_row_slice(1, 2, &[1.2, -0.1]);
    let h = Hyperparams {
        lambda: 1.0,
        ..Default::default()
    };
    let mut s = state_for(&dict, &x, &h);
    s.mu = 2.0;
    let e = update_e(&s, &dict, &x, &h).unwrap();
    assert!(max_abs_diff(&e, &DMatrix::from_row_slice(1, 2, &[0.7, 0.0])) < 1e-15);

    s.z = x.clone();
    assert_eq!(update_e(&s, &dict, &x, &h).unwrap(), DMatrix::zeros(1, 2));
}

#[test]
fn multiplier_and_penalty_updates() {
    let (dict, x, mut s) = random_state(4, 5, 4, 3);
    let h = Hyperparams::default();
    s.mu = 1e-6;
    let (y0, m0) = (s.y.clone(), s.m.clone());
    let feas = &x - dict.atoms() * &s.z - &s.e;
    let split = &s.z - &s.w;
    update_multipliers_and_penalty(&mut s, &dict, &x, &h).unwrap();
    assert!(max_abs_diff(&s.y, &(y0 + feas * 1e-6)) < 1e-15);
    assert!(max_abs_diff(&s.m, &(m0 + split * 1e-6)) < 1e-15);
    assert!((s.mu - 1.1e-6).abs() < 1e-21);

    // zero residuals leave the multipliers alone; the cap binds
    s.e = &x - dict.atoms() * &s.z;
    s.w = s.z.clone();
    s.mu = h.mu_max;
    let (y1, m1) = (s.y.clone(), s.m.clone());
    update_multipliers_and_penalty(&mut s, &dict, &x, &h).unwrap();
    assert_eq!((s.y.clone(), s.m.clone()), (y1, m1));
    assert_eq!(s.mu, h.mu_max);
}

#[test]
fn stopping_rule_examples() {
    let dict = Dictionary::new(DMatrix::identity(2, 2), &[1, 1]).unwrap();
    let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let h = Hyperparams::default();
    let mut s = state_for(&dict, &x, &h);
    s.z = x.clone();
    s.w = x.clone();
    assert!(coding_converged(&s, &dict, &x, &h));
    s.e[(0, 0)] = 1e-7;
    assert!(!coding_converged(&s, &dict, &x, &h));
    s.e[(0, 0)] = 1e-9;
    s.w[(1, 1)] += 1e-9;
    assert!(coding_converged(&s, &dict, &x, &h));
}

/// Random unit atoms split into `classes` blocks of `per` atoms, with data
/// `X = D·Z*` for a block-diagonal `Z*`.
fn block_instance(seed: u64, d: usize, classes: usize, per: usize, samples: usize) -> (Dictionary, DMatrix<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let c = classes * per;
    let dict = Dictionary::new(unit_columns(gaussian(&mut r, d, c)), &vec![per; classes]).unwrap();
    let mut z = DMatrix::zeros(c, classes * samples);
    let coef = gaussian(&mut r, c, classes * samples);
    let mut labels = Vec::new();
    for k in 0..classes {
        for i in 0..samples {
            let col = k * samples + i;
            labels.push(k);
            for a in k * per..(k + 1) * per {
                z[(a, col)] = coef[(a, col)] + 2.0;
            }
        }
    }
    let x = dict.atoms() * z;
    (dict, x, labels)
}

fn in_block_energy(dict: &Dictionary, z: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let offsets = dict.class_offsets();
    let mut inside = 0.0;
    for (col, &l) in labels.iter().enumerate() {
        inside += z.column(col).rows(offsets[l].start, offsets[l].len()).norm_squared();
    }
    inside / z.norm_squared()
}

#[test]
fn noiseless_block_data_codes_inside_its_blocks() {
    let (dict, x, labels) = block_instance(5, 60, 4, 5, 8);
    let h = Hyperparams::default().uncoupled();
    let out = solve_coding(&x, &dict, None, &h).unwrap();
    assert!(out.converged);
    let frac = in_block_energy(&dict, &out.state.z, &labels);
    assert!(frac >= 0.9, "in-block energy {frac}");
}

#[test]
fn zero_data_gives_zero_codes() {
    let (dict, _, _) = block_instance(6, 10, 2, 3, 1);
    let x = DMatrix::zeros(10, 4);
    let out = solve_coding(&x, &dict, None, &Hyperparams::default().uncoupled()).unwrap();
    assert_eq!(out.state.z, DMatrix::zeros(6, 4));
    assert_eq!(out.state.e, DMatrix::zeros(10, 4));
}

#[test]
fn planted_spikes_land_in_the_error_term() {
    let (dict, clean, _) = block_instance(7, 80, 4, 4, 10);
    let mut r = rng(8);
    let mut x = clean.clone();
    let mut planted = Vec::new();
    let total = x.len();
    let mut idx: Vec<usize> = (0..total).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut r);
    for &i in &idx[..total / 10] {
        let sign = if rand::Rng::random::<bool>(&mut r) { 1.0 } else { -1.0 };
        x[i] += sign;
        planted.push(i);
    }
    let out = solve_coding(&x, &dict, None, &Hyperparams::default().uncoupled()).unwrap();
    let e = &out.state.e;
    let support: Vec<usize> = (0..total).filter(|&i| e[i].abs() > 0.5).collect();
    let hit = planted.iter().filter(|i| e[**i].abs() > 0.5).count();
    let overlap = hit as f64 / planted.len() as f64;
    assert!(overlap >= 0.8, "recovered {hit} of {} spikes", planted.len());
    assert!(support.len() <= planted.len() * 5 / 4, "support {} vs {}", support.len(), planted.len());
}

#[test]
fn penalty_history_is_monotone_and_capped() {
    let (dict, x, _) = block_instance(9, 30, 3, 3, 4);
    let h = Hyperparams::default().uncoupled();
    let out = solve_coding(&x, &dict, None, &h).unwrap();
    assert!(out.history.windows(2).all(|w| w[1].mu >= w[0].mu));
    assert!(out.history.iter().all(|r| r.mu <= h.mu_max));
}

#[test]
fn coupling_pulls_the_code_product_toward_the_ideal_code() {
    let (dict, x, labels) = block_instance(11, 40, 3, 4, 4);
    let ideal = IdealCode::build(&labels, &[4, 4, 4]).unwrap();
    // partner: the other modality's code, here a noisy block code
    let base = solve_coding(&x, &dict, None, &Hyperparams::default().uncoupled()).unwrap();
    let partner = &base.state.z + gaussian(&mut rng(12), 12, 12) * 0.1;
    let gap = |z: &DMatrix<f64>| (z * partner.transpose() - ideal.matrix()).norm();

    let h = Hyperparams {
        alpha: 0.5,
        ..Default::default()
    };
    let coupled = solve_coding(
        &x,
        &dict,
        Some(Coupling {
            ideal: &ideal,
            partner: &partner,
        }),
        &h,
    )
    .unwrap();
    assert!(gap(&coupled.state.z) < gap(&base.state.z));
}

fn fixed_code_state(seed: u64) -> (Dictionary, DMatrix<f64>, SolverState) {
    let mut r = rng(seed);
    let dict = Dictionary::new(unit_columns(gaussian(&mut r, 8, 4)), &[2, 2]).unwrap();
    let x = gaussian(&mut r, 8, 12);
    let mut s = state_for(&dict, &x, &Hyperparams::default());
    s.z = gaussian(&mut r, 4, 12);
    s.w = s.z.clone();
    s.mu = 1.0;
    (dict, x, s)
}

#[test]
fn undamped_dictionary_step_solves_the_normal_equations() {
    let (dict, x, s) = fixed_code_state(13);
    let h = Hyperparams {
        gamma: 0.0,
        ..Default::default()
    };
    let d = damped_dictionary_step(&dict, &s, &x, &h).unwrap();
    let zzt = &s.z * s.z.transpose();
    let lhs = &d * zzt;
    let rhs = &x * s.z.transpose();
    assert!(max_abs_diff(&lhs, &rhs) < 1e-8);
}

#[test]
fn damping_interpolates() {
    let (dict, x, s) = fixed_code_state(14);
    let frozen = Hyperparams {
        gamma: 1.0,
        ..Default::default()
    };
    assert_eq!(damped_dictionary_step(&dict, &s, &x, &frozen).unwrap(), *dict.atoms());
    let full = damped_dictionary_step(&dict, &s, &x, &Hyperparams { gamma: 0.0, ..Default::default() }).unwrap();
    let half = damped_dictionary_step(&dict, &s, &x, &Hyperparams { gamma: 0.5, ..Default::default() }).unwrap();
    let mid = (dict.atoms() + &full) * 0.5;
    assert!(max_abs_diff(&half, &mid) < 1e-12);
}

#[test]
fn renormalization_keeps_the_product_and_unit_atoms() {
    let (dict, x, mut s) = fixed_code_state(15);
    let h = Hyperparams::default();
    let expected = damped_dictionary_step(&dict, &s, &x, &h).unwrap() * &s.z;
    let next = update_dictionary(&dict, &mut s, &x, &h).unwrap();
    for j in 0..next.atom_count() {
        assert!((next.atoms().column(j).norm() - 1.0).abs() < 1e-12);
    }
    assert!(max_abs_diff(&(next.atoms() * &s.z), &expected) < 1e-9);
    assert_eq!(s.z, s.w);
}

#[test]
fn dictionary_convergence_examples() {
    let dict = Dictionary::new(DMatrix::identity(3, 3), &[1, 2]).unwrap();
    let h = Hyperparams::default();
    assert!(dictionary_converged(&dict, &dict.clone(), &h));
    let mut atoms = dict.atoms().clone();
    atoms[(2, 1)] += 1e-4;
    let moved = Dictionary::new(atoms, &[1, 2]).unwrap();
    assert!(!dictionary_converged(&moved, &dict, &h));
}
