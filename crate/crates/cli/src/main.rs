//! `specreg`: spectral regularization experiments from JSON configs.
//!
//! Subcommands: `axioms`, `kn-check`, `select`, `mc`, `rate`,
//! `concentration`, `lemmas`. Results go to `--out` (CSV or JSON); a
//! human-readable summary goes to stdout. Exit codes: 0 success, 1 a
//! checked property failed (axiom violation, failed gate, exhausted scan,
//! failed battery), 2 configuration or I/O problems.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use specreg_core::config::{
    ConcentrationConfig, ExperimentConfig, KnCheckConfig, LemmasConfig, SelectConfig,
};
use specreg_core::lemmas::{lemma_suite, LemmaCase, LemmaReport};
use specreg_core::mc::{concentration_study, run_experiment, ConcentrationReport};
use specreg_core::report::{atomic_write, export_report};
use specreg_core::rules::{
    alpha_hat_deterministic, select_deterministic_rg, select_statistical_rg, GridTables,
    SelectionResult, StopKind,
};
use specreg_core::selfsim::{check_kn, check_projector_form, KnReport};
use specreg_core::spectrum::ProblemInstance;
use specreg_core::{fmt_f64, geometric_grid, AxiomReport, MCReport, OutputFormat, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn core(self) -> OutputFormat {
        match self {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "specreg",
    version,
    about = "Spectral regularization of statistical inverse problems: filter axiom sweeps, \
             RG parameter selection, and Monte Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output artifact path; defaults to `<subcommand>.<csv|json>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Override the config seed (mc, rate, select, concentration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Increase stdout detail (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the filter axioms of one scheme over a (t, alpha) grid.
    Axioms {
        /// tikhonov | iterated-tikhonov | tsvd | landweber | showalter
        #[arg(long)]
        scheme: String,
        /// Iteration count for iterated-tikhonov.
        #[arg(long)]
        n: Option<u32>,
        #[arg(long, default_value_t = 1e-8)]
        t_min: f64,
        #[arg(long, default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 60)]
        t_points: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        /// Grid depth: alphas run from alpha0 down to q^depth alpha0.
        #[arg(long, default_value_t = 40)]
        depth: usize,
    },
    /// Check the self-similarity condition on x_dag - x0.
    KnCheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one parameter selection and dump its scan trace.
    Select {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo experiment over a delta ladder.
    Mc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo rate study with slope regression against theory.
    Rate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Concentration of the good-noise set under Gaussian sampling.
    Concentration {
        #[arg(long)]
        config: PathBuf,
    },
    /// Deterministic-rule inequality battery.
    Lemmas {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

/// Property failures exit 1; configuration, parse, and I/O problems exit 2.
fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    if let Some(core_err) = err.downcast_ref::<specreg_core::Error>() {
        match core_err {
            specreg_core::Error::Admission { .. } | specreg_core::Error::GridExhausted { .. } => {
                ExitCode::from(1)
            }
            _ => ExitCode::from(2),
        }
    } else {
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let format = cli.format;
    let out = |name: &str| -> PathBuf {
        cli.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{name}.{}", format.ext())))
    };
    match &cli.command {
        Command::Axioms {
            scheme,
            n,
            t_min,
            t_max,
            t_points,
            alpha0,
            q,
            depth,
        } => cmd_axioms(
            scheme,
            *n,
            *t_min,
            *t_max,
            *t_points,
            *alpha0,
            *q,
            *depth,
            &out("axioms"),
            format,
        ),
        Command::KnCheck { config } => cmd_kn_check(config, &out("kn-check"), format),
        Command::Select { config } => {
            cmd_select(config, cli.seed, &out("select"), format, cli.verbose)
        }
        Command::Mc { config } => cmd_mc(config, cli.seed, false, &out("mc"), format),
        Command::Rate { config } => cmd_mc(config, cli.seed, true, &out("rate"), format),
        Command::Concentration { config } => {
            cmd_concentration(config, cli.seed, &out("concentration"), format)
        }
        Command::Lemmas { config } => cmd_lemmas(config, &out("lemmas"), format, cli.verbose),
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let parsed = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse config file {}", path.display()))?;
    Ok(parsed)
}

/// JSON artifacts carry the timestamp in the envelope, never in the report.
fn write_json_artifact<T: Serialize>(path: &Path, report: &T) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T: Serialize> {
        generated_unix_seconds: u64,
        report: &'a T,
    }
    let envelope = Envelope {
        generated_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        report,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn write_csv(path: &Path, text: &str) -> anyhow::Result<()> {
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn parse_scheme(name: &str, n: Option<u32>) -> anyhow::Result<Scheme> {
    let scheme = match (name, n) {
        ("tikhonov", None) => Scheme::Tikhonov,
        ("iterated-tikhonov", Some(n)) => Scheme::IteratedTikhonov { n },
        ("iterated-tikhonov", None) => {
            anyhow::bail!("iterated-tikhonov needs --n")
        }
        ("tsvd", None) => Scheme::Tsvd,
        ("landweber", None) => Scheme::Landweber,
        ("showalter", None) => Scheme::Showalter,
        (other, None) => anyhow::bail!(
            "unknown scheme \"{other}\"; expected tikhonov | iterated-tikhonov | tsvd | \
             landweber | showalter"
        ),
        (_, Some(_)) => anyhow::bail!("--n applies only to iterated-tikhonov"),
    };
    Ok(scheme)
}

#[allow(clippy::too_many_arguments)]
fn cmd_axioms(
    scheme: &str,
    n: Option<u32>,
    t_min: f64,
    t_max: f64,
    t_points: usize,
    alpha0: f64,
    q: f64,
    depth: usize,
    out: &Path,
    format: Format,
) -> anyhow::Result<ExitCode> {
    let scheme = parse_scheme(scheme, n)?;
    let t_grid = geometric_grid(t_min, t_max, t_points);
    let mut alpha_grid: Vec<f64> = (0..=depth).map(|k| alpha0 * q.powi(k as i32)).collect();
    alpha_grid.reverse();
    let report = specreg_core::schemes::verify_axioms(scheme, &t_grid, &alpha_grid)?;
    println!(
        "axioms {}: {} gamma1={} gamma_star={} worst_violation={}",
        scheme.name(),
        if report.pass() { "PASS" } else { "FAIL" },
        fmt_f64(report.gamma1),
        fmt_f64(report.gamma_star),
        fmt_f64(report.worst_violation),
    );
    if let (false, Some((t, a, b))) = (report.pass(), report.witness) {
        println!(
            "  witness: t={} alpha={} beta={}",
            fmt_f64(t),
            fmt_f64(a),
            fmt_f64(b)
        );
    }
    match format {
        Format::Csv => {
            let mut text = String::from(
                "scheme,gamma1,gamma_star,range_ok,monotone_ok,filter_bound_ok,\
                 difference_bound_ok,worst_violation\n",
            );
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                scheme.name(),
                fmt_f64(report.gamma1),
                fmt_f64(report.gamma_star),
                report.range_ok,
                report.monotone_ok,
                report.filter_bound_ok,
                report.difference_bound_ok,
                fmt_f64(report.worst_violation),
            ));
            write_csv(out, &text)?;
        }
        Format::Json => write_json_artifact::<AxiomReport>(out, &report)?,
    }
    println!("wrote {}", out.display());
    Ok(if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_kn_check(config: &Path, out: &Path, format: Format) -> anyhow::Result<ExitCode> {
    let cfg: KnCheckConfig = load_config(config)?;
    cfg.validate()?;
    let spectrum = cfg.spectrum.resolve()?;
    let x_dag = cfg.x_dag.resolve(&spectrum)?;
    let x0 = cfg.x0.resolve(&spectrum)?;
    let v = x_dag.sub(&x0)?;
    let gate = cfg.gate.resolve(&spectrum)?;
    let report: KnReport = match cfg.form.as_str() {
        "filter" => check_kn(&spectrum, &v, cfg.scheme, &gate)?,
        _ => check_projector_form(&spectrum, &v, &gate)?,
    };
    let verdict = match report.outcome {
        specreg_core::KnOutcome::Pass => "PASS",
        specreg_core::KnOutcome::Fail => "FAIL",
        specreg_core::KnOutcome::Inconclusive => "INCONCLUSIVE",
    };
    // the one-line verdict
    println!(
        "kn-check ({}): {} worst_ratio={} probes={} skipped={}{}",
        cfg.form,
        verdict,
        fmt_f64(report.worst_ratio),
        report.rows.len(),
        report.skipped_probes,
        report
            .witness_alpha
            .map(|a| format!(" witness_alpha={}", fmt_f64(a)))
            .unwrap_or_default(),
    );
    match format {
        Format::Csv => {
            let mut text = String::from("alpha,lhs,rhs,ratio\n");
            for row in &report.rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    fmt_f64(row.alpha),
                    fmt_f64(row.lhs),
                    fmt_f64(row.rhs),
                    fmt_f64(row.ratio)
                ));
            }
            write_csv(out, &text)?;
        }
        Format::Json => write_json_artifact(out, &report)?,
    }
    println!("wrote {}", out.display());
    Ok(if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_select(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    format: Format,
    verbose: u8,
) -> anyhow::Result<ExitCode> {
    let mut cfg: SelectConfig = load_config(config)?;
    cfg.validate()?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let spectrum = cfg.spectrum.resolve()?;
    let x_dag = cfg.x_dag.resolve(&spectrum)?;
    let x0 = cfg.x0.resolve(&spectrum)?;
    let (rule, grid) = cfg.rule.resolve(&spectrum)?;
    let noise = cfg.noise.resolve(&spectrum, cfg.seed)?;
    let zeta = noise.realize(&spectrum, cfg.replicate)?;
    let instance = ProblemInstance::new(spectrum.clone(), x_dag, x0, cfg.delta)?;
    let z_delta = instance.observed(&zeta)?;
    let tables = GridTables::new(&spectrum, grid);
    let selection: SelectionResult = match &cfg.bound {
        None => select_statistical_rg(&instance, cfg.scheme, &tables, &rule, &z_delta)?,
        Some(spec) => {
            let bound = spec.resolve(cfg.delta, tables.n_eff(0))?;
            let hat = alpha_hat_deterministic(&tables, &bound, rule.eta)?;
            select_deterministic_rg(
                &instance, cfg.scheme, &tables, rule.tau, &bound, hat, &z_delta,
            )?
        }
    };
    println!(
        "select: alpha={} stop={:?} steps={}",
        fmt_f64(selection.alpha_selected),
        selection.stop_kind,
        selection.steps
    );
    if verbose > 0 {
        for row in &selection.trace {
            println!(
                "  alpha={} misfit={} threshold={}",
                fmt_f64(row.alpha),
                fmt_f64(row.misfit),
                fmt_f64(row.regular_threshold)
            );
        }
    }
    match format {
        Format::Csv => {
            let mut text =
                String::from("alpha,misfit,regular_threshold,emergency_lhs,emergency_rhs\n");
            for row in &selection.trace {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_f64(row.alpha),
                    fmt_f64(row.misfit),
                    fmt_f64(row.regular_threshold),
                    fmt_f64(row.emergency_lhs),
                    fmt_f64(row.emergency_rhs)
                ));
            }
            write_csv(out, &text)?;
        }
        Format::Json => write_json_artifact(out, &selection)?,
    }
    println!("wrote {}", out.display());
    Ok(if selection.stop_kind == StopKind::Exhausted {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_mc(
    config: &Path,
    seed: Option<u64>,
    with_rate: bool,
    out: &Path,
    format: Format,
) -> anyhow::Result<ExitCode> {
    let mut cfg: ExperimentConfig = load_config(config)?;
    if let Some(seed) = seed {
        cfg = cfg.with_seed(seed);
    }
    let exp = cfg.resolve()?;
    let report: MCReport = run_experiment(&exp, with_rate)?;
    for row in &report.rows {
        println!(
            "delta={} rmse={} ratio={} mean_steps={} emergency={} z_violations={}",
            fmt_f64(row.delta),
            fmt_f64(row.rmse),
            fmt_f64(row.ratio),
            fmt_f64(row.mean_steps),
            fmt_f64(row.emergency_fraction),
            row.z_violations
        );
    }
    if let (Some(slope), Some(theory)) = (report.rate_slope, report.rate_slope_theory) {
        println!(
            "rate_slope={} rate_slope_theory={}",
            fmt_f64(slope),
            fmt_f64(theory)
        );
    }
    export_report(&report, out, format.core())?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_concentration(
    config: &Path,
    seed: Option<u64>,
    out: &Path,
    format: Format,
) -> anyhow::Result<ExitCode> {
    let mut cfg: ConcentrationConfig = load_config(config)?;
    cfg.validate()?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let spectrum = cfg.spectrum.resolve()?;
    let grid = specreg_core::Grid::new(cfg.alpha0.resolve(&spectrum)?, cfg.q, cfg.k_max)?;
    let kappa = cfg.kappa.resolve()?;
    let report: ConcentrationReport = concentration_study(
        &spectrum,
        grid,
        kappa,
        cfg.eta,
        cfg.delta,
        cfg.replicates,
        cfg.seed,
    )?;
    println!(
        "concentration: kappa={} alpha_hat={} violations={}/{} union_bound={}",
        fmt_f64(report.kappa),
        fmt_f64(report.alpha_hat.alpha),
        report.violations,
        report.replicates,
        fmt_f64(report.union_bound)
    );
    match format {
        Format::Csv => {
            let text = format!(
                "delta,kappa,alpha_hat,violations,union_bound,replicates,seed\n{},{},{},{},{},{},{}\n",
                fmt_f64(report.delta),
                fmt_f64(report.kappa),
                fmt_f64(report.alpha_hat.alpha),
                report.violations,
                fmt_f64(report.union_bound),
                report.replicates,
                report.seed
            );
            write_csv(out, &text)?;
        }
        Format::Json => write_json_artifact(out, &report)?,
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_lemmas(config: &Path, out: &Path, format: Format, verbose: u8) -> anyhow::Result<ExitCode> {
    let cfg: LemmasConfig = load_config(config)?;
    cfg.validate()?;
    let cases = cfg
        .cases
        .iter()
        .map(LemmaCase::resolve)
        .collect::<specreg_core::Result<Vec<_>>>()?;
    let report: LemmaReport = lemma_suite(&cases)?;
    for case in &report.cases {
        let admitted = match case.admitted {
            Some(true) => "admitted",
            Some(false) => "not admitted",
            None => "ungated",
        };
        println!(
            "case {}: {} alpha={} stop={:?}",
            case.label,
            admitted,
            fmt_f64(case.alpha_selected),
            case.stop_kind
        );
        for check in &case.checks {
            if verbose > 0 || (check.applicable && !check.pass) {
                println!(
                    "  {}: {}{} worst_ratio={}",
                    check.name,
                    if check.pass { "pass" } else { "FAIL" },
                    if check.applicable {
                        ""
                    } else {
                        " (not asserted)"
                    },
                    fmt_f64(check.worst_ratio)
                );
            }
        }
    }
    let all_pass = report.all_pass();
    println!("lemma battery: {}", if all_pass { "PASS" } else { "FAIL" });
    match format {
        Format::Csv => {
            let mut text = String::from("case,check,applicable,pass,worst_ratio\n");
            for case in &report.cases {
                for check in &case.checks {
                    text.push_str(&format!(
                        "{},{},{},{},{}\n",
                        case.label,
                        check.name,
                        check.applicable,
                        check.pass,
                        fmt_f64(check.worst_ratio)
                    ));
                }
            }
            write_csv(out, &text)?;
        }
        Format::Json => write_json_artifact(out, &report)?,
    }
    println!("wrote {}", out.display());
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
