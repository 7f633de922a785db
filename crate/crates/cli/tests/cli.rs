use std::path::Path;
use std::process::{Command, Output};

fn vasilab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vasilab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn norms_at_the_boundary_emit_sigma() {
    let o = vasilab(&["norms", "--set", "model.beta=0.5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("name,value,est_error\n"));
    assert!(out.lines().any(|l| l == "sigma_beta_sq,2,0"), "{out}");

    let o = vasilab(&["norms", "--set", "names=alpha,b_T", "--set", "T=50"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let alpha: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((alpha - 0.550_901_245_439_856_4).abs() < 1e-12);
    assert_eq!(out.lines().count(), 3);

    assert_eq!(code(&vasilab(&["norms", "--set", "names=alpha", "--set", "model.beta=0.5"])), 3);
    assert_eq!(code(&vasilab(&["norms", "--set", "names=nope"])), 3);
}

#[test]
fn rate_fits_a_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("fixture.csv");
    let rows: String = [100.0f64, 200.0, 400.0]
        .iter()
        .map(|t| format!("{t},{},0.001\n", 0.5 * t.powf(-0.3)))
        .collect();
    std::fs::write(&fixture, format!("T,dK,dkw\n{rows}")).unwrap();
    let out_dir = dir.path().join("out");
    let o = vasilab(&[
        "rate",
        "--set",
        &format!("fixture={}", fixture.display()),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("T,N,dK,dkw,slope,slope_se,paper_exponent,var_ratio\n"));
    for line in out.lines().skip(1) {
        let slope: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert!((slope + 0.3).abs() < 1e-12, "{line}");
    }

    let o = vasilab(&["report", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("slope -0.3000"));
    let plot = std::fs::read_to_string(out_dir.join("plot.csv")).unwrap();
    assert!(plot.starts_with("log_T,log_dK,log_ref\n"));
    assert_eq!(plot.lines().count(), 4);
}

fn simulate_zero(path: &Path) -> Output {
    vasilab(&[
        "simulate",
        "--set",
        "T=10",
        "--set",
        "n=10000",
        "--set",
        "zero_driver=true",
        "--out",
        path.to_str().unwrap(),
    ])
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    assert_eq!(code(&simulate_zero(&path)), 0);
    let first = std::fs::read(&path).unwrap();
    assert_eq!(code(&simulate_zero(&path)), 0);
    assert_eq!(first, std::fs::read(&path).unwrap());

    let o = vasilab(&[
        "estimate",
        "--set",
        &format!("input={}", path.display()),
        "--set",
        "estimator=mu_moment",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("estimator,value,statistic,valid,mode"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "mu_moment");
    let mu_hat: f64 = row[1].parse().unwrap();
    assert!((mu_hat - 1.800_009_079_985_952_5).abs() < 1e-6, "{mu_hat}");
    assert_eq!(row[3], "true");
}

#[test]
fn simulated_paths_feed_every_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let o = vasilab(&["simulate", "--set", "T=50", "--set", "n=2000", "--seed", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = vasilab(&["estimate", "--set", &format!("input={}", path.display())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 5);
    for name in ["mu_moment", "k_moment", "mu_ls", "k_ls"] {
        assert!(out.contains(&format!("\n{name},")), "{out}");
    }
}

#[test]
fn clt_reports_and_flags_taint() {
    let base = ["--set", "T_list=50", "--set", "n_per_T=400", "--set", "N=100"];
    let mut args = vec!["clt", "--set", "estimator=mu_moment"];
    args.extend(base);
    let o = vasilab(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("estimator,T,N,dK,dkw,mean,variance,var_ratio,degenerate,var_pass\n"));
    assert!(out.contains("mu_moment,50,100,"));

    let mut args = vec!["clt", "--set", "estimator=k_moment", "--set", "zero_driver=true", "--set", "mu=0"];
    args.extend(base);
    assert_eq!(code(&vasilab(&args)), 2);
}

#[test]
fn configuration_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.cfg");
    std::fs::write(&cfg, "estimator = k_ls\nT_list = 50 100 200\nn_per_T = 400\nN = 100\ncolour = red\n").unwrap();
    let o = vasilab(&["rate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(code(&vasilab(&["simulate", "--set", "T=10"])), 3);
    assert_eq!(code(&vasilab(&["estimate", "--set", "input=/nonexistent/path.csv"])), 3);
    assert_eq!(code(&vasilab(&["norms", "--seed", "4"])), 3);
    assert_eq!(code(&vasilab(&["simulate", "--bogus"])), 3);
    assert_eq!(code(&vasilab(&["clt", "--set", "T_list=10 20", "--set", "n_per_T=10", "--set", "N=100", "--set", "estimator=k_ls"])), 3);
}

#[test]
fn help_lists_config_keys() {
    let o = vasilab(&["rate", "--help"]);
    assert_eq!(code(&o), 0);
    let help = stdout(&o);
    for key in ["estimator", "model.kind", "model.beta", "k", "mu", "T_list", "n_per_T", "N", "seed", "mode", "quad.panels", "quad.order", "out_dir", "fixture"] {
        assert!(help.contains(key), "missing {key}");
    }
    let help = stdout(&vasilab(&["simulate", "--help"]));
    assert!(help.contains("zero_driver") && help.contains("sampler"));
}
