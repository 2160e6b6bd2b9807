use sde_trbdf2::experiments::{observed_orders, run_test, ExperimentConfig, TestCase};
use sde_trbdf2::Scheme;

fn trbdf2_errors(test: TestCase, exps: (u32, u32), paths: usize) -> Vec<f64> {
    let mut cfg = ExperimentConfig::new(test);
    cfg.schemes = vec![Scheme::TRBDF2];
    cfg.h_exponents = exps;
    cfg.paths = paths;
    cfg.seed = 5;
    let report = run_test(&cfg).unwrap();
    let s = report.scheme("trbdf2").unwrap();
    assert!(s.levels.iter().all(|l| l.failed_paths == 0 && !l.flagged));
    s.levels.iter().map(|l| l.eps).collect()
}

#[test]
fn trbdf2_error_decreases_under_refinement() {
    for (test, exps) in [(TestCase::Order, (3, 7)), (TestCase::Stiff2, (1, 6)), (TestCase::General, (1, 6))] {
        let eps = trbdf2_errors(test, exps, 500);
        for w in eps.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{test}: {eps:?}");
        }
    }
}

#[test]
fn csv_and_json_agree() {
    let mut cfg = ExperimentConfig::new(TestCase::Stiff5);
    cfg.h_exponents = (3, 5);
    cfg.paths = 100;
    let report = run_test(&cfg).unwrap();
    let csv = report.to_csv();
    let json: serde_json::Value = serde_json::from_str(&report.to_json(true).unwrap()).unwrap();
    assert_eq!(json["meta"]["paths"], 100);
    assert_eq!(json["test"], "stiff5");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        let level = &json["schemes"][k / 3]["levels"][k % 3];
        assert_eq!(cols[0], json["schemes"][k / 3]["scheme"]);
        assert_eq!(cols[1].parse::<f64>().unwrap(), level["h"].as_f64().unwrap());
        assert_eq!(cols[2].parse::<f64>().unwrap(), level["eps"].as_f64().unwrap());
        assert_eq!(cols[3].is_empty(), level["rho"].is_null());
    }
    let pairs: Vec<(f64, f64)> = report.schemes[1].levels.iter().map(|l| (l.h, l.eps)).collect();
    let rho = observed_orders(&pairs).unwrap();
    assert_eq!(Some(rho[0]), report.schemes[1].levels[0].rho);
}

#[test]
fn seeds_change_the_estimate() {
    let a = trbdf2_errors(TestCase::Stiff2, (3, 3), 50);
    let mut cfg = ExperimentConfig::new(TestCase::Stiff2);
    cfg.schemes = vec![Scheme::TRBDF2];
    cfg.h_exponents = (3, 3);
    cfg.paths = 50;
    cfg.seed = 6;
    let b = run_test(&cfg).unwrap().schemes[0].levels[0].eps;
    assert_ne!(a[0], b);
}
