//! Subcommand bodies. Each takes the merged config and returns whether the
//! results are clean or tainted.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use vasilab::config::{model_from_config, quad_from_config, Config, MODEL_KEYS, QUAD_KEYS};
use vasilab::estimators::{estimate, skorokhod_correction, EstimatorKind, IntegralMode, StieltjesRule};
use vasilab::fmt::g17;
use vasilab::harness::{
    fit_rate, run_plan, variance_check, write_report, ExperimentPlan, KolmogorovReport, RateFit,
    RateRow, Replication, ReportRow, SamplerChoice, PLAN_KEYS,
};
use vasilab::hquad::{alpha_const, b_t, e_t, q_t, sigma_beta_sq, skorokhod_trace, Quad};
use vasilab::rng::StreamRng;
use vasilab::simulate::{
    build_vasicek, read_path_csv, write_path_csv, DriverSampler, GaussianPath, Scheme, TimeGrid,
    VasicekPath,
};
use vasilab::{Error, Result};

pub enum Outcome {
    Clean,
    Tainted,
}

const SIMULATE_KEYS: &[&str] = &["T", "n", "k", "mu", "scheme", "sampler", "seed", "zero_driver"];
const ESTIMATE_KEYS: &[&str] = &["input", "estimator", "mode", "rule", "k"];
const NORMS_KEYS: &[&str] = &["names", "k", "T"];
const CLT_KEYS: &[&str] = &["var_tol"];
const RATE_KEYS: &[&str] = &["fixture"];
const REPORT_KEYS: &[&str] = &["input", "out_dir"];

pub const NORM_NAMES: &[&str] = &["sigma_beta_sq", "alpha", "b_T", "e_T", "q_T", "c_skorokhod"];

fn key_sets(cmd: &str) -> Vec<&'static [&'static str]> {
    match cmd {
        "simulate" => vec![SIMULATE_KEYS, MODEL_KEYS],
        "estimate" => vec![ESTIMATE_KEYS, MODEL_KEYS, QUAD_KEYS],
        "norms" => vec![NORMS_KEYS, MODEL_KEYS, QUAD_KEYS],
        "clt" => vec![PLAN_KEYS, CLT_KEYS, MODEL_KEYS, QUAD_KEYS],
        "rate" => vec![PLAN_KEYS, RATE_KEYS, MODEL_KEYS, QUAD_KEYS],
        "report" => vec![REPORT_KEYS],
        _ => vec![],
    }
}

pub fn accepted_keys(cmd: &str) -> Vec<&'static str> {
    key_sets(cmd).into_iter().flatten().copied().collect()
}

pub fn run(cmd: &str, cfg: &Config, out: Option<&Path>) -> Result<Outcome> {
    cfg.reject_unknown(&key_sets(cmd))?;
    match cmd {
        "simulate" => simulate(cfg, out),
        "estimate" => estimate_cmd(cfg, out),
        "norms" => norms(cfg, out),
        "clt" => clt(cfg),
        "rate" => rate(cfg),
        "report" => report(cfg),
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn simulate(cfg: &Config, out: Option<&Path>) -> Result<Outcome> {
    let model = model_from_config(cfg)?;
    let grid = TimeGrid::new(cfg.required("T")?, cfg.required("n")?)
        .map_err(|e| Error::Config(e.to_string()))?;
    let k: f64 = cfg.parsed_or("k", 1.0)?;
    let mu: f64 = cfg.parsed_or("mu", 2.0)?;
    let scheme: Scheme = cfg.parsed_or("scheme", Scheme::ExactOu)?;
    let sampler: SamplerChoice = cfg.parsed_or("sampler", SamplerChoice::Auto)?;
    let seed: u64 = cfg.parsed_or("seed", 0)?;
    let g = if cfg.flag("zero_driver", false)? {
        GaussianPath::zero(grid)
    } else {
        let s = DriverSampler::new(&model, grid, sampler == SamplerChoice::Auto)?;
        s.sample(&mut StreamRng::new(seed, 0))
    };
    let v = build_vasicek(&g, k, mu, scheme).map_err(|e| match e {
        Error::Domain(m) | Error::Precondition(m) => Error::Config(m),
        other => other,
    })?;
    let mut w = sink(out)?;
    write_path_csv(&mut w, &g, &v)?;
    w.flush()?;
    Ok(Outcome::Clean)
}

fn estimators_from(cfg: &Config) -> Result<Vec<EstimatorKind>> {
    match cfg.get("estimator") {
        None | Some("all") => Ok(EstimatorKind::ALL.to_vec()),
        Some(_) => Ok(cfg.list("estimator")?.unwrap_or_default()),
    }
}

fn estimate_cmd(cfg: &Config, out: Option<&Path>) -> Result<Outcome> {
    let input: PathBuf = cfg.required("input")?;
    let which = estimators_from(cfg)?;
    let mode: IntegralMode = cfg.parsed_or("mode", IntegralMode::Skorokhod)?;
    let rule: StieltjesRule = cfg.parsed_or("rule", StieltjesRule::Trapezoid)?;
    let k: f64 = cfg.parsed_or("k", 1.0)?;
    let model = model_from_config(cfg)?;
    let quad = quad_from_config(cfg)?;

    let file = File::open(&input).map_err(|e| Error::Config(format!("{}: {e}", input.display())))?;
    let (grid, g, v) = read_path_csv(BufReader::new(file))?;
    let gpath = GaussianPath::from_values(grid, g)?;
    let vpath = VasicekPath {
        grid,
        values: v,
        driver: None,
        k,
        mu: f64::NAN,
        scheme: Scheme::ExactOu,
    };
    let needs_trace = mode == IntegralMode::Skorokhod && which.iter().any(|e| e.needs_integral());
    let trace = if needs_trace {
        skorokhod_correction(&model, k, grid.horizon(), &quad)?
    } else {
        0.0
    };

    let mut w = sink(out)?;
    writeln!(w, "estimator,value,statistic,valid,mode")?;
    for e in which {
        let r = estimate(e, &vpath, &gpath, &model, mode, trace, rule)?;
        writeln!(w, "{e},{},{},{},{}", g17(r.value), g17(r.statistic), r.valid, mode.name())?;
    }
    w.flush()?;
    Ok(Outcome::Clean)
}

fn norm_value(name: &str, cfg: &Config) -> Result<Quad> {
    let k: f64 = cfg.parsed_or("k", 1.0)?;
    let t: f64 = cfg.parsed_or("T", 100.0)?;
    if name == "sigma_beta_sq" {
        return sigma_beta_sq(cfg.parsed_or("model.beta", 0.6)?).map(Quad::exact);
    }
    let model = model_from_config(cfg)?;
    let quad = quad_from_config(cfg)?;
    match name {
        "alpha" => alpha_const(&model, k).map(Quad::exact),
        "b_T" => b_t(&model, k, t, &quad),
        "e_T" => e_t(&model, k, t, &quad),
        "q_T" => q_t(&model, k, t, &quad),
        "c_skorokhod" => skorokhod_trace(&model, k, t, &quad),
        other => Err(Error::Config(format!(
            "unknown constant `{other}`; known: {}",
            NORM_NAMES.join(", ")
        ))),
    }
}

/// Requested names must all evaluate; with the default list, constants
/// that do not apply to the model are skipped with a warning.
fn norms(cfg: &Config, out: Option<&Path>) -> Result<Outcome> {
    let explicit: Option<Vec<String>> = cfg.list("names")?;
    let names = explicit
        .clone()
        .unwrap_or_else(|| NORM_NAMES.iter().map(|s| s.to_string()).collect());
    let mut rows = Vec::new();
    for name in &names {
        match norm_value(name, cfg) {
            Ok(q) => rows.push((name, q)),
            Err(e) if explicit.is_none() => log::warn!("skipping {name}: {e}"),
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("no constant could be evaluated".into()));
    }
    let mut w = sink(out)?;
    writeln!(w, "name,value,est_error")?;
    for (name, q) in rows {
        writeln!(w, "{name},{},{}", g17(q.value), g17(q.est_error))?;
    }
    w.flush()?;
    Ok(Outcome::Clean)
}

fn plan_only(cfg: &Config, extra: &[&str]) -> Result<ExperimentPlan> {
    let mut plan_cfg = cfg.clone();
    for k in extra {
        plan_cfg.remove(k);
    }
    ExperimentPlan::from_config(&plan_cfg)
}

fn clt(cfg: &Config) -> Result<Outcome> {
    let plan = plan_only(cfg, CLT_KEYS)?;
    if plan.t_list.len() != 1 {
        return Err(Error::Config(format!(
            "clt takes a single horizon, T_list has {}",
            plan.t_list.len()
        )));
    }
    let tol: f64 = cfg.parsed_or("var_tol", 0.1)?;
    let out = run_plan(&plan)?;
    let row = &out.report.rows[0];
    let values: Vec<f64> = out.samples[0].iter().filter_map(Replication::value).collect();
    let var_pass = match variance_check(&values, 1.0, tol) {
        Ok(c) => c.pass.to_string(),
        Err(_) => "na".into(),
    };
    let mut w = BufWriter::new(std::io::stdout().lock());
    writeln!(w, "estimator,T,N,dK,dkw,mean,variance,var_ratio,degenerate,var_pass")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{var_pass}",
        plan.estimator,
        g17(row.t),
        row.replications,
        g17(row.d_k),
        g17(row.dkw),
        g17(row.mean),
        g17(row.variance),
        g17(row.var_ratio),
        row.degenerate
    )?;
    w.flush()?;
    Ok(if out.report.tainted { Outcome::Tainted } else { Outcome::Clean })
}

/// `T,dK[,dkw]` rows of a fixture file.
fn read_fixture(path: &Path) -> Result<Vec<RateRow>> {
    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('T')) {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if !(2..=3).contains(&cols.len()) {
            return Err(Error::Config(format!("{}:{}: expected T,dK[,dkw]", path.display(), i + 1)));
        }
        rows.push(RateRow {
            t: cols[0],
            d_k: cols[1],
            dkw: cols.get(2).copied().unwrap_or(0.0),
        });
    }
    Ok(rows)
}

fn fixture_report(cfg: &Config, path: &Path) -> Result<KolmogorovReport> {
    for key in cfg.keys() {
        if !matches!(key, "fixture" | "estimator" | "out_dir") && !MODEL_KEYS.contains(&key) {
            return Err(Error::Config(format!("`{key}` has no meaning with a fixture")));
        }
    }
    let rows = read_fixture(path)?;
    let fit = fit_rate(&rows)?;
    let estimator: Option<EstimatorKind> = cfg.parsed("estimator")?;
    let beta = model_from_config(cfg)?.beta();
    Ok(KolmogorovReport {
        estimator: estimator.unwrap_or(EstimatorKind::MuMoment),
        rows: rows
            .iter()
            .map(|r| ReportRow {
                t: r.t,
                steps: 0,
                replications: 0,
                d_k: r.d_k,
                dkw: r.dkw,
                degenerate: 0,
                failed: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                var_ratio: f64::NAN,
                tainted: false,
            })
            .collect(),
        fit: Some(fit),
        fit_error: None,
        paper_exponent: estimator.map_or(f64::NAN, |e| e.paper_exponent(beta)),
        tainted: false,
    })
}

fn rate(cfg: &Config) -> Result<Outcome> {
    let report = match cfg.get("fixture") {
        Some(f) => {
            let r = fixture_report(cfg, Path::new(f))?;
            if let Some(dir) = cfg.get("out_dir") {
                std::fs::create_dir_all(dir)?;
                write_report(BufWriter::new(File::create(Path::new(dir).join("report.csv"))?), &r)?;
            }
            r
        }
        None => run_plan(&plan_only(cfg, RATE_KEYS)?)?.report,
    };
    let mut w = BufWriter::new(std::io::stdout().lock());
    write_report(&mut w, &report)?;
    w.flush()?;
    match (report.rate_check(), &report.fit_error) {
        (Some(c), _) => log::info!(
            "slope {:.4}, upper exponent bound {:.4}, reference exponent {:.4}, pass {}",
            c.slope,
            c.exponent_upper,
            report.paper_exponent,
            c.pass()
        ),
        (None, Some(e)) => log::warn!("no rate fit: {e}"),
        (None, None) => {}
    }
    Ok(if report.tainted { Outcome::Tainted } else { Outcome::Clean })
}

struct ReportCsvRow {
    t: f64,
    n: f64,
    d_k: f64,
    dkw: f64,
    slope: f64,
    slope_se: f64,
    paper_exponent: f64,
    var_ratio: f64,
}

fn read_report(path: &Path) -> Result<Vec<ReportCsvRow>> {
    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "T,N,dK,dkw,slope,slope_se,paper_exponent,var_ratio" {
        return Err(Error::Config(format!("{}: not a report CSV", path.display())));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if c.len() != 8 {
            return Err(Error::Config(format!("{}: expected 8 columns", path.display())));
        }
        rows.push(ReportCsvRow {
            t: c[0],
            n: c[1],
            d_k: c[2],
            dkw: c[3],
            slope: c[4],
            slope_se: c[5],
            paper_exponent: c[6],
            var_ratio: c[7],
        });
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no rows", path.display())));
    }
    Ok(rows)
}

fn report(cfg: &Config) -> Result<Outcome> {
    let out_dir = cfg.get("out_dir").map(PathBuf::from);
    let input = match (cfg.get("input"), &out_dir) {
        (Some(i), _) => PathBuf::from(i),
        (None, Some(d)) => d.join("report.csv"),
        (None, None) => return Err(Error::Config("report needs `input` or `out_dir`".into())),
    };
    let rows = read_report(&input)?;
    let first = &rows[0];
    let (used, excluded): (Vec<&ReportCsvRow>, Vec<&ReportCsvRow>) =
        rows.iter().partition(|r| r.d_k > r.dkw);
    let fit = RateFit {
        slope: first.slope,
        intercept: f64::NAN,
        slope_se: first.slope_se,
        used: used.iter().map(|r| r.t).collect(),
        excluded: excluded.iter().map(|r| r.t).collect(),
    };

    let mut w = BufWriter::new(std::io::stdout().lock());
    writeln!(w, "report: {}", input.display())?;
    writeln!(w, "{:>10} {:>8} {:>10} {:>10} {:>10}", "T", "N", "dK", "dkw", "var_ratio")?;
    for r in &rows {
        writeln!(
            w,
            "{:>10} {:>8} {:>10.5} {:>10.5} {:>10.4}{}",
            g17(r.t),
            r.n,
            r.d_k,
            r.dkw,
            r.var_ratio,
            if r.d_k > r.dkw { "" } else { "  (below noise floor)" }
        )?;
    }
    if first.slope.is_finite() {
        writeln!(w, "slope {:.4} +/- {:.4}", first.slope, first.slope_se)?;
        writeln!(w, "upper 95% bound on the decay exponent {:.4}", fit.upper_exponent_bound(0.95))?;
    } else {
        writeln!(w, "no rate fit")?;
    }
    if first.paper_exponent.is_finite() {
        writeln!(w, "reference exponent {:.4}", first.paper_exponent)?;
    }
    w.flush()?;

    let plot_dir = out_dir.unwrap_or_else(|| {
        input.parent().map(Path::to_path_buf).unwrap_or_default()
    });
    if !plot_dir.as_os_str().is_empty() {
        std::fs::create_dir_all(&plot_dir)?;
    }
    let mut p = BufWriter::new(File::create(plot_dir.join("plot.csv"))?);
    writeln!(p, "log_T,log_dK,log_ref")?;
    let p_exp = if first.paper_exponent.is_finite() { first.paper_exponent } else { -first.slope };
    for r in &rows {
        let log_ref = first.d_k.ln() - p_exp * (r.t / first.t).ln();
        writeln!(p, "{},{},{}", g17(r.t.ln()), g17(r.d_k.ln()), g17(log_ref))?;
    }
    p.flush()?;
    Ok(Outcome::Clean)
}
