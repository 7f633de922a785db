use vasilab::config::Config;
use vasilab::estimators::EstimatorKind;
use vasilab::harness::*;

fn plan(est: EstimatorKind, t_list: Vec<f64>, n: usize, reps: usize) -> ExperimentPlan {
    let mut p = ExperimentPlan::new(est, t_list, vec![n], reps);
    p.seed = 17;
    p
}

#[test]
fn replications_are_deterministic() {
    for est in EstimatorKind::ALL {
        let p = plan(est, vec![20.0, 40.0], 256, 100);
        let a = run_replication(&p, 1, 7).unwrap();
        let b = run_replication(&p, 1, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.value().is_some(), "{est}: {a:?}");
        assert_ne!(a, run_replication(&p, 1, 8).unwrap());
        assert_ne!(a, run_replication(&p, 0, 7).unwrap());
    }
    let p = plan(EstimatorKind::MuMoment, vec![20.0], 256, 100);
    assert!(run_replication(&p, 1, 0).is_err());
}

#[test]
fn zero_driver_leaves_deterministic_bias() {
    let (k, mu, t): (f64, f64, f64) = (1.0, 2.0, 10.0);
    let mut p = plan(EstimatorKind::MuMoment, vec![t], 20_000, 100);
    p.zero_driver = true;
    let z = run_replication(&p, 0, 3).unwrap().value().unwrap();
    let mean = mu * (1.0 - (1.0 - (-k * t).exp()) / (k * t));
    let expect = k * t.powf(0.4) * (mean - mu);
    assert!((z - expect).abs() < 1e-6, "{z} vs {expect}");
    assert_eq!(run_replication(&p, 0, 4).unwrap().value().unwrap(), z);
}

#[test]
fn mu_moment_statistic_is_centred() {
    let p = plan(EstimatorKind::MuMoment, vec![400.0], 4096, 2000);
    let out = run_plan(&p).unwrap();
    let v: Vec<f64> = out.samples[0].iter().filter_map(Replication::value).collect();
    assert_eq!(v.len(), 2000);
    let (m, var) = (sample_mean(&v), sample_variance(&v));
    assert!(m.abs() < 3.0 * (var / 2000.0).sqrt(), "mean {m}");
    assert!(variance_check(&v, 1.0, 0.1).unwrap().pass, "variance {var}");
}

#[test]
fn smoke_plan_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = plan(EstimatorKind::KLs, vec![50.0, 100.0], 512, 100);
    p.out_dir = Some(dir.path().to_path_buf());
    let out = run_plan(&p).unwrap();
    assert_eq!(out.report.rows.len(), 2);
    assert!(out.report.fit.is_none());
    assert!(out.report.fit_error.is_some());
    assert!(!out.report.tainted);
    for t in [50.0, 100.0] {
        let text = std::fs::read_to_string(dir.path().join(sample_file_name(t))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("rep,stat,degenerate"));
        assert_eq!(lines.count(), 100);
    }
    assert_eq!(sample_file_name(50.0), "samples_T50.csv");
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("T,N,dK,dkw,slope,slope_se,paper_exponent,var_ratio\n"));
    assert_eq!(report.lines().count(), 3);
    for row in &out.report.rows {
        assert!((0.0..=1.0).contains(&row.d_k));
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let mut p = plan(EstimatorKind::MuLs, vec![30.0, 60.0, 120.0], 480, 150);
    p.workers = 1;
    let serial = run_plan(&p).unwrap();
    p.workers = 4;
    let parallel = run_plan(&p).unwrap();
    assert_eq!(serial.samples, parallel.samples);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_report(&mut a, &serial.report).unwrap();
    write_report(&mut b, &parallel.report).unwrap();
    assert_eq!(a, b);
    assert!(serial.report.fit.is_some() || serial.report.fit_error.is_some());
}

#[test]
fn degenerate_replications_taint_the_report() {
    let mut p = plan(EstimatorKind::KMoment, vec![10.0], 64, 100);
    p.zero_driver = true;
    p.mu = 0.0;
    let out = run_plan(&p).unwrap();
    assert!(out.samples[0].iter().all(|r| *r == Replication::Degenerate));
    assert!(out.report.tainted);
    assert_eq!(out.report.rows[0].degenerate, 100);
    let mut csv = Vec::new();
    write_samples(&mut csv, &out.samples[0][..2]).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "rep,stat,degenerate\n0,nan,1\n1,nan,1\n");
}

#[test]
fn plans_from_config() {
    let text = "estimator = k_ls\nmodel.kind = fbm\nmodel.beta = 0.65\nk = 2\nmu = 1\n\
                T_list = 50, 100, 200\nn_per_T = 400 800 1600\nN = 500\nseed = 9\nmode = young\n";
    let p = ExperimentPlan::from_config(&Config::parse(text).unwrap()).unwrap();
    assert_eq!(p.estimator, EstimatorKind::KLs);
    assert_eq!(p.beta(), 0.65);
    assert_eq!((p.k, p.mu, p.seed), (2.0, 1.0, 9));
    assert_eq!(p.steps(2), 1600);

    let rejects = |key: &str, value: &str| {
        let mut c = Config::parse("estimator = k_ls\nT_list = 50 100\nn_per_T = 100\nN = 500").unwrap();
        c.set(key, value);
        ExperimentPlan::from_config(&c).is_err()
    };
    assert!(!rejects("seed", "3"));
    assert!(rejects("colour", "red"));
    assert!(rejects("model.beta", "0.8"));
    assert!(rejects("N", "50"));
    assert!(rejects("dkw_delta", "0"));
    assert!(rejects("n_per_T", "1 2 3"));
    assert!(rejects("T_list", "100 50"));
    assert!(rejects("mode", "ito"));
}
