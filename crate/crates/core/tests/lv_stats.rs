mod common;

use common::{brute_force_w2, simpson};
use elliptic_amp::fixed_point::{solve_system, GrowthLaw};
use elliptic_amp::lv_stats::*;

fn emp(v: &[f64]) -> EmpiricalMeasure {
    EmpiricalMeasure::new(v.to_vec()).unwrap()
}

fn fig2_law() -> (LimitLaw, Vec<(f64, GrowthLaw)>) {
    let fractions = [0.5, 0.3, 0.2];
    let values = [1.0, 3.0, 6.0];
    let law = GrowthLaw::new(values.iter().copied().zip(fractions).collect()).unwrap();
    let sol = solve_system(2.0, 0.0, &law).unwrap();
    let blocks = values.iter().zip(fractions).map(|(&v, c)| (c, GrowthLaw::constant(v).unwrap())).collect();
    (LimitLaw::new(&sol, &law), blocks)
}

#[test]
fn wasserstein_examples() {
    assert_eq!(wasserstein2_1d(&emp(&[1.0, 2.0, 5.0]), &emp(&[5.0, 1.0, 2.0])).unwrap(), 0.0);
    assert_eq!(wasserstein2_1d(&emp(&[0.0]), &emp(&[3.0])).unwrap(), 3.0);
    let w = wasserstein2_1d(&emp(&[0.0, 2.0]), &emp(&[1.0, 3.0])).unwrap();
    assert!((w - 1.0).abs() < 1e-15);
    assert!((brute_force_w2(&[0.0, 2.0], &[1.0, 3.0]) - 1.0).abs() < 1e-15);
    assert!(wasserstein2_1d(&emp(&[]), &emp(&[1.0])).is_err());
}

#[test]
fn wasserstein_sorted_coupling_is_optimal() {
    let a = [0.3, -1.2, 2.2, 0.9, 4.0, -0.1];
    let b = [1.1, 0.0, -3.0, 2.5, 0.7, 0.2];
    let w = wasserstein2_1d(&emp(&a), &emp(&b)).unwrap();
    assert!((w - brute_force_w2(&a, &b)).abs() < 1e-12);
}

#[test]
fn wasserstein_unequal_sizes_matches_replication() {
    // Repeating every point k times leaves the measure unchanged.
    let a = [0.5, 1.5, 4.0];
    let b = [0.0, 2.0];
    let a6: Vec<f64> = a.iter().flat_map(|&v| [v, v]).collect();
    let b6: Vec<f64> = b.iter().flat_map(|&v| [v, v, v]).collect();
    let exact = wasserstein2_1d(&emp(&a6), &emp(&b6)).unwrap();
    assert!((wasserstein2_1d(&emp(&a), &emp(&b)).unwrap() - exact).abs() < 1e-14);
}

#[test]
fn pi_sample_degenerate_gaussian() {
    let law = LimitLaw { delta: 1.0, sigma: 1e-12, kappa: 1.0, law: GrowthLaw::constant(1.0).unwrap() };
    assert!(pi_sample(&law, 1000, 3).iter().all(|&y| (y - 1.0).abs() < 1e-9));
}

#[test]
fn pi_sample_zero_mass() {
    let law = GrowthLaw::constant(1.0).unwrap();
    let sol = solve_system(1.2, 0.0, &law).unwrap();
    let limit = LimitLaw::new(&sol, &law);
    let m = 1_000_000;
    let draws = pi_sample(&limit, m, 17);
    let zeros = draws.iter().filter(|&&y| y == 0.0).count() as f64 / m as f64;
    let p = 1.0 - limit.gamma();
    let se = (p * (1.0 - p) / m as f64).sqrt();
    assert!((zeros - p).abs() <= 3.0 * se, "{zeros} vs {p}");

    // Positive part against f_surv draws.
    let positives: Vec<f64> = draws.into_iter().filter(|&y| y > 0.0).collect();
    let reference = f_surv_sample(&limit, m, 18);
    assert!(wasserstein2_1d(&emp(&positives), &emp(&reference)).unwrap() < 0.01);
}

#[test]
fn pi_sample_two_atom_mixture() {
    let law = GrowthLaw::new(vec![(1.0, 0.25), (4.0, 0.75)]).unwrap();
    let limit = LimitLaw { delta: 2.0, sigma: 0.5, kappa: 2.0, law };
    let draws = pi_sample(&limit, 200_000, 5);
    // The atoms sit eight standard deviations apart, so the side of 2.5
    // identifies the atom.
    let high = draws.iter().filter(|&&y| y > 2.5).count() as f64 / draws.len() as f64;
    assert!((high - 0.75).abs() < 3.0 * (0.75f64 * 0.25 / 200_000.0).sqrt());
    let low_mean = {
        let low: Vec<f64> = draws.iter().copied().filter(|&y| y <= 2.5).collect();
        low.iter().sum::<f64>() / low.len() as f64
    };
    assert!((low_mean - 1.0).abs() < 0.01);
}

#[test]
fn f_surv_integrates_to_one() {
    for rho in [-0.7, 0.0, 0.4] {
        let law = GrowthLaw::constant(1.0).unwrap();
        let sol = solve_system(2.0, rho, &law).unwrap();
        let limit = LimitLaw::new(&sol, &law);
        let upper = 20.0 * sol.sigma * sol.scale() + 2.0 * sol.scale();
        let total = simpson(|y| f_surv_density(&limit, y), 0.0, upper, 1e-12);
        assert!((total - 1.0).abs() < 1e-6, "rho {rho}: {total}");
    }
    let (limit, _) = fig2_law();
    let total = simpson(|y| f_surv_density(&limit, y), 0.0, 40.0, 1e-12);
    assert!((total - 1.0).abs() < 1e-6);
    assert_eq!(f_surv_density(&limit, 0.0), 0.0);
    assert_eq!(f_surv_density(&limit, -1.0), 0.0);
}

#[test]
fn mixture_identities() {
    let (limit, blocks) = fig2_law();
    for y in [0.5, 1.0, 2.0] {
        let (mix, weights) = f_surv_mixture(&limit, &blocks, y);
        assert!((mix - f_surv_density(&limit, y)).abs() < 1e-10);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
    let single = GrowthLaw::constant(1.0).unwrap();
    let sol = solve_system(2.0, 0.0, &single).unwrap();
    let one = LimitLaw::new(&sol, &single);
    assert_eq!(f_surv_block(&one, &single, 1.3), f_surv_density(&one, 1.3));
}

#[test]
fn block_densities_ordered() {
    let (limit, blocks) = fig2_law();
    let grid: Vec<f64> = (1..4000).map(|i| i as f64 * 0.005).collect();
    let mut modes = Vec::new();
    let mut gammas = Vec::new();
    for (_, l) in &blocks {
        let values: Vec<f64> = grid.iter().map(|&y| f_surv_block(&limit, l, y)).collect();
        let argmax = (0..values.len()).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
        modes.push(grid[argmax]);
        gammas.push(limit.block(l).gamma());
    }
    assert!(modes[0] < modes[1] && modes[1] < modes[2], "{modes:?}");
    assert!(gammas[0] < gammas[1] && gammas[1] < gammas[2]);
}

#[test]
fn survival_fraction_examples() {
    assert_eq!(survival_fraction(&[0.0; 5], 0.0), 0.0);
    assert_eq!(survival_fraction(&[0.0, 1.0, 2.0, 0.0], 0.0), 0.5);
    assert_eq!(survival_fraction(&[1e-7, 1.0], 1e-6), 0.5);
}

#[test]
fn block_statistics_examples() {
    let x = vec![0.0, 1.0, 2.0, 0.0, 3.0, 0.5];
    let single = block_statistics(&x, &BlockPartition::single(6).unwrap()).unwrap();
    assert_eq!(single.len(), 1);
    assert!((single[0].survival_fraction - survival_fraction(&x, 0.0)).abs() < 1e-15);

    let part = BlockPartition::new(vec![2, 4]).unwrap();
    let stats = block_statistics(&x, &part).unwrap();
    let shuffled = vec![1.0, 0.0, 0.5, 3.0, 0.0, 2.0];
    assert_eq!(stats, block_statistics(&shuffled, &part).unwrap());
    assert!(block_statistics(&x[..5], &part).is_err());
}

#[test]
fn partition_rounding() {
    let p = BlockPartition::from_fractions(200, &[0.5, 0.3, 0.2]).unwrap();
    assert_eq!(p.sizes(), &[100, 60, 40]);
    let p = BlockPartition::from_fractions(7, &[0.5, 0.3, 0.2]).unwrap();
    assert_eq!(p.sizes().iter().sum::<usize>(), 7);
    assert_eq!(p.sizes(), &[4, 2, 1]);
    assert!(BlockPartition::new(vec![2, 0]).is_err());
}

#[test]
fn freedman_diaconis_bins() {
    let values: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0).powi(2)).collect();
    let sample = emp(&values);
    let h = freedman_diaconis(&sample).unwrap();
    assert_eq!(h.counts.iter().sum::<usize>(), 1000);
    let iqr = sample.quantile(0.75) - sample.quantile(0.25);
    assert!((h.bin_width - 2.0 * iqr / 10.0).abs() < 0.1 * h.bin_width);
    let mass: f64 = h.density().iter().map(|d| d * h.bin_width).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}
