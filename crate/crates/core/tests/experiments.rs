use elliptic_amp::experiments::*;
use elliptic_amp::Error;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n: 40,
        replications: 6,
        seed: Some(3),
        limit_samples: 5000,
        kappa_grid: Some(vec![2.2, 3.0]),
        ..Default::default()
    }
}

#[test]
fn config_round_trip_and_hash() {
    let mut cfg = small();
    cfg.blocks = Some(BlocksConfig::three_blocks());
    let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
    let mut other = cfg.clone();
    other.seed = Some(4);
    assert_ne!(other.hash(), cfg.hash());
}

#[test]
fn config_rejects_bad_input() {
    assert!(matches!(ExperimentConfig::from_json(r#"{"n": 0}"#), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::from_json(r#"{"bogus": 1}"#), Err(Error::Config(_))));
    assert!(matches!(ExperimentConfig::from_json(r#"{"rho": 2}"#), Err(Error::Config(_))));
    assert!(ExperimentConfig::from_json(r#"{"seed": 1, "rho": -0.7}"#).is_ok());
}

#[test]
fn default_grid_starts_above_the_edge() {
    for rho in [-0.7, 0.0, 0.4] {
        let g = default_kappa_grid(rho);
        assert_eq!(g.len(), 25);
        assert!((g[0] - (2.0 * (1.0 + rho)).sqrt() - 0.05).abs() < 1e-12);
        assert!((g[24] - 5.0).abs() < 1e-12);
    }
}

#[test]
fn prop_rows_cover_grid() {
    let rows = prop_experiment(&small()).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(r.gamma_mc_mean >= 0.0 && r.gamma_mc_mean <= 1.0);
        assert!(r.gamma_mc_mean_eps <= r.gamma_mc_mean);
        assert!(r.max_kkt_residual <= 1e-8);
    }
}

#[test]
fn amp_lv_rows() {
    let cfg = ExperimentConfig { n: 300, depth: 4, rho: 0.4, seed: Some(1), ..Default::default() };
    let report = run_amp_lv(&cfg).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.onsager != 0.0));
    let zero = run_amp_lv(&ExperimentConfig { rho: 0.0, ..cfg.clone() }).unwrap();
    assert!(zero.rows.iter().all(|r| r.onsager == 0.0));
    assert!(matches!(run_amp_lv(&ExperimentConfig { seed: None, ..cfg }), Err(Error::Config(_))));
}

#[test]
fn csv_outputs_are_reproducible() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let a = run_figure(FigureName::Prop, &small(), dir_a.path()).unwrap();
    let b = run_figure(FigureName::Prop, &small(), dir_b.path()).unwrap();
    let text = std::fs::read_to_string(&a.files[0]).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b.files[0]).unwrap());
    let mut lines = text.lines();
    let meta = lines.next().unwrap();
    assert!(meta.contains(&format!("config_sha256={}", small().hash())));
    assert!(meta.contains("seed=3"));
    assert!(meta.contains("version=elliptic-amp"));
    assert!(lines.next().unwrap().starts_with("kappa,rho,gamma_theory,gamma_mc_mean,gamma_mc_se"));
}

#[test]
fn exchangeability_uses_three_blocks_by_default() {
    let rep = exchangeability_experiment(&ExperimentConfig { n: 50, ..small() }).unwrap();
    let sizes: Vec<usize> = rep.blocks.iter().map(|b| b.size).collect();
    assert_eq!(sizes, vec![25, 15, 10]);
    assert!((rep.mixture_weight_sum - 1.0).abs() < 1e-10);
    assert_eq!(rep.curves[0].len(), 1 + 3 + 2);
}

#[test]
fn truncdist_curves_per_rho() {
    let curves = truncdist_curves(&small()).unwrap();
    let rhos: Vec<f64> = curves.iter().map(|c| c.solution.rho).collect();
    assert_eq!(rhos, vec![-0.7, 0.0, 0.4]);
}
