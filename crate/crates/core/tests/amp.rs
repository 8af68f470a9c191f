mod common;

use elliptic_amp::amp::*;
use elliptic_amp::density_evolution::{de_run, JointAtom, JointLaw};
use elliptic_amp::rand_matrix::{sample_goe, sample_normalized_elliptic};
use elliptic_amp::{Error, Matrix};

fn no_params(n: usize) -> Matrix {
    Matrix::zeros(n, 0)
}

#[test]
fn onsager_examples() {
    let id = Identity { params: 0 };
    assert_eq!(onsager_coefficient(&[1.0, -2.0, 3.0, 0.5], &no_params(4), 0, &id).unwrap(), 1.0);

    let lv = LvActivation::new(2.0).unwrap();
    let b = Matrix::column(&[0.0, 1.0]);
    assert_eq!(onsager_coefficient(&[1.0, -3.0], &b, 3, &lv).unwrap(), 0.25);

    let c = FnActivation::new(1, |_, _, b| b[0], |_, _, _| 0.0);
    assert_eq!(onsager_coefficient(&[1.0, 2.0], &Matrix::column(&[4.0, 5.0]), 1, &c).unwrap(), 0.0);

    assert!(matches!(
        onsager_coefficient(&[1.0, 2.0, 3.0], &b, 0, &lv),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn step_examples() {
    let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let id = Identity { params: 0 };
    let out = amp_step(&a, &[1.0, 2.0], &[3.0, 4.0], &no_params(2), 1, 1.0, &id).unwrap();
    assert_eq!(out, vec![-1.0, -3.0]);

    let plain = amp_step(&a, &[1.0, 2.0], &[3.0, 4.0], &no_params(2), 1, 0.0, &id).unwrap();
    assert_eq!(plain, vec![2.0, 1.0]);

    let zero = Constant { value: 0.0, params: 0 };
    assert_eq!(amp_step(&a, &[1.0, 2.0], &[3.0, 4.0], &no_params(2), 2, 0.7, &zero).unwrap(), vec![0.0, 0.0]);
    assert!(amp_step(&a, &[1.0, 2.0], &[3.0, 4.0], &no_params(2), 0, 0.7, &zero).is_err());
}

#[test]
fn init_examples() {
    let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0]]).unwrap();
    let one = Constant { value: 1.0, params: 0 };
    assert_eq!(amp_init(&a, &[9.0, 9.0], &no_params(2), &one).unwrap(), vec![3.0, -1.0]);

    let lv = LvActivation::new(2.0).unwrap();
    let b = Matrix::column(&[1.0, 1.0]);
    assert_eq!(amp_init(&a, &[1.0, 1.0], &b, &lv).unwrap(), a.matvec(&[1.0, 1.0]).unwrap());
    assert!(amp_init(&a, &[1.0, 1.0, 1.0], &no_params(3), &one).is_err());
}

#[test]
fn non_finite_reports_iteration() {
    let a = Matrix::identity(2);
    let blow = FnActivation::new(0, |k, u, _| if k == 2 { f64::INFINITY } else { u }, |_, _, _| 1.0);
    match amp_run(&a, &no_params(2), &[1.0, 1.0], &blow, 0.5, 4) {
        Err(Error::NonFinite { iteration, .. }) => assert_eq!(iteration, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn depth_one_trace() {
    let a = sample_normalized_elliptic(10, 0.3, 1).unwrap();
    let fam = Identity { params: 0 };
    let u0 = vec![1.0; 10];
    let t = amp_run(&a, &no_params(10), &u0, &fam, 0.3, 1).unwrap();
    assert_eq!(t.depth(), 1);
    assert_eq!(t.u(1), amp_init(&a, &u0, &no_params(10), &fam).unwrap().as_slice());
    assert_eq!(t.onsager, vec![0.0]);
}

#[test]
fn replay_reproduces_every_step() {
    let n = 50;
    let a = sample_normalized_elliptic(n, 0.4, 3).unwrap();
    let fam = FnActivation::new(0, |_, u, _| u.tanh(), |_, u, _| 1.0 - u.tanh().powi(2));
    let u0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let t = amp_run(&a, &no_params(n), &u0, &fam, 0.4, 6).unwrap();
    for k in 1..6 {
        let again = amp_step(&a, t.u(k), t.u(k - 1), &no_params(n), k, 0.4, &fam).unwrap();
        assert_eq!(again.as_slice(), t.u(k + 1));
    }
    assert_eq!(t, amp_run(&a, &no_params(n), &u0, &fam, 0.4, 6).unwrap());
}

#[test]
fn constant_activation_ignores_rho() {
    let n = 20;
    let a = sample_normalized_elliptic(n, 0.5, 8).unwrap();
    let fam = FnActivation::new(1, |_, _, b| b[0], |_, _, _| 0.0);
    let b = Matrix::column(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
    let u0 = vec![0.0; n];
    let with = amp_run(&a, &b, &u0, &fam, 0.9, 4).unwrap();
    let without = amp_run(&a, &b, &u0, &fam, 0.0, 4).unwrap();
    assert_eq!(with.iterates, without.iterates);
}

/// The symmetric scheme `u^{k+1} = A h_k(u^k) − ⟨h_k′⟩ h_{k−1}(u^{k−1})`.
fn symmetric_reference(a: &Matrix, u0: &[f64], fam: &dyn ActivationFamily, depth: usize) -> Vec<Vec<f64>> {
    let b = no_params(u0.len());
    let q0 = activate(u0, &b, 0, fam).unwrap();
    let mut us = vec![u0.to_vec(), corrected_product(a, &q0, 0.0, &q0)];
    for k in 1..depth {
        let q = activate(&us[k], &b, k, fam).unwrap();
        let q_prev = activate(&us[k - 1], &b, k - 1, fam).unwrap();
        let d = onsager_coefficient(&us[k], &b, k, fam).unwrap();
        us.push(corrected_product(a, &q, d, &q_prev));
    }
    us.remove(0);
    us
}

#[test]
fn goe_reduction() {
    let n = 100;
    let a = sample_goe(n, 4).unwrap().scaled(1.0 / (n as f64).sqrt());
    let fam = FnActivation::new(0, |k, u, _| (u + 0.1 * k as f64).tanh(), |k, u, _| {
        1.0 - (u + 0.1 * k as f64).tanh().powi(2)
    });
    let u0: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
    let t = amp_run(&a, &no_params(n), &u0, &fam, 1.0, 4).unwrap();
    let r = symmetric_reference(&a, &u0, &fam, 4);
    for (x, y) in t.iterates.iter().zip(&r) {
        let diff = x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-12);
    }
}

#[test]
fn iterate_covariance_matches_density_evolution() {
    let (n, reps, rho) = (500, 200, 0.4);
    let fam = FnActivation::new(0, |_, u, _| u.tanh() + 0.5, |_, u, _| 1.0 - u.tanh().powi(2));
    let law = JointLaw::new(vec![
        JointAtom { u: 1.0, b: vec![], weight: 0.5 },
        JointAtom { u: -1.0, b: vec![], weight: 0.5 },
    ])
    .unwrap();
    let r = de_run(&fam, &law, 3).unwrap();
    let u0: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();

    let traces: Vec<Vec<Vec<f64>>> = (0..reps as u64)
        .map(|s| {
            let a = sample_normalized_elliptic(n, rho, 1000 + s).unwrap();
            amp_run(&a, &no_params(n), &u0, &fam, rho, 3).unwrap().iterates
        })
        .collect();
    // The first coordinate across replications is a draw from the
    // limiting Gaussian vector.
    for i in 0..3 {
        for j in 0..=i {
            let prods: Vec<f64> = traces.iter().map(|t| t[i][0] * t[j][0]).collect();
            let (m, v) = common::mean_var(&prods);
            let se = (v / reps as f64).sqrt();
            let target = r.get(i + 1, j + 1);
            assert!((m - target).abs() <= 3.0 * se, "R[{},{}]: MC {m} vs {target} (se {se})", i + 1, j + 1);
        }
    }
}
