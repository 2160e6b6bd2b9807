use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sde-trbdf2"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn ms_gain_noise_free_is_squared_amplification() {
    let o = run(&["ms-gain", "--scheme", "trbdf2", "--lambda", "-1,0", "--sigma", "0,0", "--h", "0.1"]);
    assert!(o.status.success());
    let g = 2.0 - 2f64.sqrt();
    let z = -0.1;
    let amp = ((1.0 + (1.0 - g).powi(2)) * z + 2.0 * (2.0 - g)) / (g * (1.0 - g) * z * z + (g * g - 2.0) * z + 2.0 * (2.0 - g));
    let out = stdout(&o);
    assert!((value(&out, "gain") - amp * amp).abs() < 1e-14);
    assert!((value(&out, "c0") + 2.0).abs() < 1e-9);
    assert!(out.contains("h_star,inf"));
}

#[test]
fn stability_map_default_grid() {
    let o = run(&["stability-map", "--scheme", "trbdf2", "--re-lambda", "-200:0:50", "--sigma", "0:20:50"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2500);
    for row in rows {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        let unstable = 2.0 * f[0] + f[1] * f[1] >= 0.0;
        assert_eq!(f[2] == -1.0, unstable, "{row}");
        assert!(unstable || f[2] > 0.0);
    }
}

#[test]
fn order_run_reports_second_order() {
    let o = run(&["run", "--test", "order", "--schemes", "trbdf2", "--paths", "2000", "--seed", "7", "--h-exp", "3..9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "scheme,h,eps,rho,failed_paths");
    assert_eq!(lines.len(), 8);
    let rho: Vec<f64> = lines[4..7].iter().map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let mean = rho.iter().sum::<f64>() / 3.0;
    assert!((1.8..=2.2).contains(&mean), "{rho:?}");
    assert!(lines[7].ends_with(",,0"));
}

#[test]
fn run_output_is_independent_of_threads_and_repeats() {
    let dir = std::env::temp_dir().join(format!("sde-trbdf2-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut files = Vec::new();
    for (k, threads) in ["1", "4", "1"].iter().enumerate() {
        let path = dir.join(format!("out{k}.json"));
        let o = run(&[
            "--threads", threads, "run", "--test", "general", "--paths", "200", "--seed", "3", "--h-exp", "2..4",
            "--format", "json", "--no-meta", "--out", path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        files.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
    let text = String::from_utf8(files[0].clone()).unwrap();
    assert!(!text.contains("meta") && text.contains("\"test\": \"general\""));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn a_probe_report() {
    let o = run(&["a-probe", "--gamma", "0.5857864376269049"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(value(&out, "max_interior") < 1.0);
    assert!(value(&out, "max_boundary") <= 1.0 + 1e-12);
    assert!(value(&out, "far_field") < 1e-6);
    assert!(value(&out, "interior_points") >= 1e4);
}

#[test]
fn validation_errors_exit_one() {
    for args in [
        vec!["frobnicate"],
        vec!["run", "--test", "order", "--bogus"],
        vec!["run", "--test", "stiff3"],
        vec!["run", "--test", "order", "--h-exp", "5..2"],
        vec!["run", "--test", "order", "--paths", "0"],
        vec!["a-probe", "--gamma", "1.5"],
        vec!["stability-map", "--sigma", "0:20"],
        vec!["ms-gain", "--lambda", "-1,x", "--sigma", "0,0", "--h", "0.1"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn numerical_failure_exits_two() {
    // h = 2/γ puts the first implicit divisor at zero for λ = 1
    let h = (2.0 / (2.0 - 2f64.sqrt())).to_string();
    let o = run(&["ms-gain", "--lambda", "1,0", "--sigma", "0,0", "--h", &h]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_documents_every_flag() {
    let top = stdout(&run(&["--help"]));
    assert!(top.contains("--threads"));
    let flags = [
        ("run", &["--test", "--schemes", "--paths", "--seed", "--h-exp", "--gamma", "--trunc-k", "--out", "--format", "--no-meta"][..]),
        ("stability-map", &["--scheme", "--re-lambda", "--sigma", "--cap", "--gamma", "--out"][..]),
        ("ms-gain", &["--scheme", "--lambda", "--sigma", "--h", "--cap"][..]),
        ("a-probe", &["--gamma"][..]),
    ];
    for (cmd, list) in flags {
        let o = run(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for f in list {
            assert!(text.contains(f), "{cmd} {f}");
        }
    }
}
