use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cgpp::analytics::{fill_rate_series, pattern_histogram};
use cgpp::bounds::{bound_report, l2_lower_bound};
use cgpp::estimator::TypeDistribution;
use cgpp::experiment::{run_experiment, write_rows, Execution, ExperimentConfig, ParamOverrides, Profile, Solver};
use cgpp::generator::{preset, presets, sample_instance, DistributionSpec, Preset};
use cgpp::policy::PolicyKind;
use cgpp::{run_policy, solve_offline, Instance, PackingSolution};

#[derive(Parser)]
#[command(name = "cgpp", version, about = "Plan-guided online bin packing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from a preset or a spec file.
    Gen(GenArgs),
    /// Pack one instance with one policy.
    Run(RunArgs),
    /// Run an experiment described by a TOML config.
    Bench(BenchArgs),
    /// Print the L1 and L2 lower bounds, and the optimum for small instances.
    Bound(BoundArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, conflicts_with = "spec", required_unless_present_any = ["spec", "list"])]
    preset: Option<String>,
    /// TOML file holding a preset or a bare distribution spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    bin_capacity: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Permit presets whose parameters are still placeholders.
    #[arg(long)]
    allow_placeholder: bool,
    /// List the shipped presets and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct RunArgs {
    /// bestfit, cgpp, cgpp-l or offline.
    #[arg(long)]
    policy: Solver,
    #[arg(long)]
    instance: PathBuf,
    /// TOML file of parameter overrides.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_parser = parse_profile, default_value = "default")]
    profile: Profile,
    #[arg(long)]
    section_length: Option<usize>,
    #[arg(long)]
    memory_length: Option<usize>,
    #[arg(long)]
    kl_threshold: Option<f64>,
    #[arg(long)]
    tolerance_threshold: Option<u32>,
    #[arg(long)]
    overestimate_threshold: Option<f64>,
    /// Known distribution for cgpp-l: `empirical` (the instance's own type
    /// frequencies) or a preset name.
    #[arg(long, default_value = "empirical")]
    prior: String,
    /// Summary CSV (one row).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-bin fill-rate CSV.
    #[arg(long)]
    fillrate: Option<PathBuf>,
    /// Pattern histogram CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, default uses every core.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    instance: PathBuf,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    match s {
        "default" => Ok(Profile::Default),
        "large-scale" => Ok(Profile::LargeScale),
        _ => Err(format!("unknown profile {s:?} (default, large-scale)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Run(a) => run(a).map(|_| true),
        Command::Bench(a) => bench(a),
        Command::Bound(a) => bound(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_spec(path: &Path) -> Result<Preset> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(p) = Preset::from_toml(&text) {
        return Ok(p);
    }
    let spec: DistributionSpec = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Preset {
        name: path.display().to_string(),
        description: String::new(),
        bin_capacity: 100,
        placeholder: false,
        provenance: None,
        spec,
    })
}

fn gen(a: GenArgs) -> Result<()> {
    if a.list {
        let mut out = std::io::stdout().lock();
        for p in presets() {
            let flag = if p.placeholder { " [placeholder]" } else { "" };
            writeln!(out, "{:<18} B={:<4} {}{flag}", p.name, p.bin_capacity, p.description)?;
        }
        return Ok(());
    }
    let p = match (&a.preset, &a.spec) {
        (Some(name), _) => preset(name)?,
        (None, Some(path)) => load_spec(path)?,
        (None, None) => bail!("pass --preset or --spec"),
    };
    if p.placeholder && !a.allow_placeholder {
        bail!(
            "preset {:?} is a placeholder ({}); pass --allow-placeholder to use it anyway",
            p.name,
            p.provenance.as_deref().unwrap_or("unverified parameters")
        );
    }
    let cap = a.bin_capacity.unwrap_or(p.bin_capacity);
    let inst = sample_instance(&p.spec, cap, a.n, a.seed)?;
    match a.out {
        Some(path) => inst.write(&path).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(inst.to_text().as_bytes())?,
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct RunSummary {
    policy: String,
    n_items: usize,
    bins: usize,
    l2: u64,
    gap: u64,
    replans: usize,
    fallback_items: usize,
    plan_match_items: usize,
    plan_open_items: usize,
    runtime_ms: f64,
}

fn run(a: RunArgs) -> Result<()> {
    let inst = Instance::read(&a.instance).with_context(|| format!("reading {}", a.instance.display()))?;
    let mut overrides = match &a.params {
        Some(path) => ParamOverrides::from_toml(&std::fs::read_to_string(path)?)?,
        None => ParamOverrides::default(),
    };
    macro_rules! flag {
        ($($f:ident),*) => { $(if a.$f.is_some() { overrides.$f = a.$f; })* };
    }
    flag!(
        section_length,
        memory_length,
        kl_threshold,
        tolerance_threshold,
        overestimate_threshold
    );
    let mut params = overrides.apply(&a.profile.params());
    params.validate()?;

    let started = Instant::now();
    let (solution, stats): (PackingSolution, Option<cgpp::policy::RunStats>) = match a.policy {
        Solver::Offline => (solve_offline(&inst, &params.planner)?.solution, None),
        Solver::Online(kind) => {
            if kind == PolicyKind::CgppL {
                params.prior = Some(prior(&a.prior, &inst)?);
            }
            let run = run_policy(kind, &inst, &params)?;
            (run.solution, Some(run.stats))
        }
    };
    let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
    solution.check(&inst)?;

    let l2 = l2_lower_bound(&inst);
    let count = |c: cgpp::model::Cause| solution.log.iter().filter(|p| p.cause == c).count();
    let summary = RunSummary {
        policy: a.policy.to_string(),
        n_items: inst.len(),
        bins: solution.num_bins(),
        l2,
        gap: solution.num_bins() as u64 - l2,
        replans: stats.as_ref().map_or(0, |s| s.replans),
        fallback_items: count(cgpp::model::Cause::Fallback),
        plan_match_items: count(cgpp::model::Cause::PlanMatch),
        plan_open_items: count(cgpp::model::Cause::PlanOpen),
        runtime_ms,
    };
    println!(
        "policy={} items={} bins={} l2={} gap={} replans={} fallback={}",
        summary.policy,
        summary.n_items,
        summary.bins,
        summary.l2,
        summary.gap,
        summary.replans,
        summary.fallback_items
    );
    if let Some(path) = &a.report {
        let header = [
            "policy",
            "n_items",
            "bins",
            "l2",
            "gap",
            "replans",
            "fallback_items",
            "plan_match_items",
            "plan_open_items",
            "runtime_ms",
        ];
        write_rows(path, &[summary], &header)?;
    }
    if let Some(path) = &a.fillrate {
        #[derive(serde::Serialize)]
        struct Row {
            bin: usize,
            open_step: usize,
            fill_rate: f64,
            mode: &'static str,
        }
        let rows: Vec<Row> = fill_rate_series(&solution, &inst)
            .into_iter()
            .map(|r| Row {
                bin: r.bin,
                open_step: r.open_step,
                fill_rate: r.fill_rate,
                mode: r.mode,
            })
            .collect();
        write_rows(path, &rows, &["bin", "open_step", "fill_rate", "mode"])?;
    }
    if let Some(path) = &a.histogram {
        #[derive(serde::Serialize)]
        struct Row {
            pattern: String,
            count: usize,
            fill_rate: f64,
        }
        let rows: Vec<Row> = pattern_histogram(&solution, &inst)
            .into_iter()
            .map(|r| Row {
                pattern: r.label,
                count: r.count,
                fill_rate: r.fill_rate,
            })
            .collect();
        write_rows(path, &rows, &["pattern", "count", "fill_rate"])?;
    }
    Ok(())
}

fn prior(source: &str, inst: &Instance) -> Result<TypeDistribution> {
    if source == "empirical" {
        let counts: Vec<f64> = inst.type_counts().into_iter().map(f64::from).collect();
        return Ok(TypeDistribution::from_weights(&counts)?);
    }
    Ok(preset(source)?.spec.type_distribution(inst)?)
}

fn bench(a: BenchArgs) -> Result<bool> {
    let config = ExperimentConfig::read(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    let out = a
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let exec = match a.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(1) => Execution::Sequential,
        Some(n) => Execution::Threads(n),
        None => Execution::Parallel,
    };
    let report = run_experiment(&config, exec)?;
    report.write_csv(&out)?;
    let mut stdout = std::io::stdout().lock();
    for agg in &report.aggregates {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        writeln!(
            stdout,
            "{:<20} {:<8} runs={} errors={} mean_gap={} ci95={}",
            agg.dataset,
            agg.policy,
            agg.runs,
            agg.errors,
            show(agg.mean_gap),
            show(agg.ci95)
        )?;
    }
    for r in report.runs.iter().filter(|r| !r.error.is_empty()) {
        eprintln!("run {} / {} failed: {}", r.instance, r.policy, r.error);
    }
    Ok(!report.has_errors())
}

fn bound(a: BoundArgs) -> Result<()> {
    let inst = Instance::read(&a.instance).with_context(|| format!("reading {}", a.instance.display()))?;
    let r = bound_report(&inst);
    match r.exact {
        Some(x) => println!("{} {} {}", r.l1, r.l2, x),
        None => println!("{} {}", r.l1, r.l2),
    }
    Ok(())
}
