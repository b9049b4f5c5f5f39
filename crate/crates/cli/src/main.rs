use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wifair::harness::{
    check_closed_form, compare_policies, derive_cw, run_scenario, summarize_artifacts, write_json, ClosedFormOptions, HarnessError,
    RunSummary, SUMMARY_FILE,
};
use wifair::scenario::{load_scenario, parse_policy_list, preset_names, ConfigError, ParseMode, ScenarioConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Slotted WiFair / 802.11 age-of-information simulator.
#[derive(Parser)]
#[command(name = "wifair", version)]
struct Cli {
    /// Accept unknown keys in scenario files (reported as warnings).
    #[arg(long, global = true)]
    lenient: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Scenario file, or a bundled preset name (optionally `preset:<name>`).
    config: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory (defaults to the scenario's `output.dir`, then `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, events.csv and summary.json.
    Run(Overrides),
    /// Run a scenario under several policies with common random numbers.
    Compare {
        #[command(flatten)]
        base: Overrides,
        /// Comma separated: dcf, dcf:<cw>, wifair-pf, wifair-ta, bernoulli, bernoulli-pf, bernoulli-ta.
        #[arg(long)]
        policies: String,
    },
    /// Print the WiFair PF and TA contention windows for a topology.
    DeriveCw { config: String },
    /// Compare Bernoulli-mode simulations of random instances with the closed form.
    CheckEq4 {
        /// Nodes per instance (random in 1..=5 when omitted).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Rebuild a run's summary from its CSV files and check it against summary.json.
    Summarize { dir: PathBuf },
    /// List the bundled presets.
    Presets,
}

enum Failure {
    Config(String),
    Runtime(String),
    Check(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load(source: &str, mode: ParseMode) -> Result<ScenarioConfig, Failure> {
    let parsed = load_scenario(source, mode)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.config)
}

fn load_with(o: &Overrides, mode: ParseMode) -> Result<(ScenarioConfig, PathBuf), Failure> {
    let mut cfg = load(&o.config, mode)?;
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(h) = o.horizon {
        cfg.horizon = h;
    }
    cfg.validate()?;
    let out = o
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    Ok((cfg, out))
}

fn print_summary(s: &RunSummary) {
    println!("{} under {} (seed {}, {} slots, warm-up {})", s.scenario, s.policy, s.seed, s.horizon, s.warmup);
    if let Some(cws) = &s.contention_windows {
        println!("contention windows: {cws:?}");
    }
    println!("{:>4} {:>9} {:>12} {:>9} {:>11} {:>10}", "node", "rx_dB", "mean_age", "peak", "deliveries", "collisions");
    for (n, db) in s.stats.nodes.iter().zip(&s.rx_power_db) {
        println!(
            "{:>4} {:>9.1} {:>12.3} {:>9} {:>11} {:>10}",
            n.node, db, n.mean_age, n.peak_age, n.deliveries, n.collisions
        );
    }
    println!("network mean {:.3} slots, peak {} slots, max/min {:.3}", s.stats.network_mean, s.stats.network_peak, s.fairness_ratio);
    if let (Some(m), Some(p)) = (s.network_mean_seconds, s.network_peak_seconds) {
        println!("network mean {:.3} ms, peak {:.3} ms", m * 1e3, p * 1e3);
    }
    if let Some(a) = &s.analytic {
        for (i, (e, r)) in a.expected_aoi.iter().zip(&a.relative_error).enumerate() {
            match (e, r) {
                (Some(e), Some(r)) => println!("node {i}: closed form {e:.4}, relative error {:.4}%", r * 100.0),
                _ => println!("node {i}: starved in the closed form"),
            }
        }
        println!("closed-form check: {}", if a.pass { "PASS" } else { "FAIL" });
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mode = if cli.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    match cli.command {
        Command::Run(o) => {
            let (cfg, out) = load_with(&o, mode)?;
            let summary = run_scenario(&cfg, Some(&out))?;
            print_summary(&summary);
            println!("artifacts in {}", out.display());
        }
        Command::Compare { base, policies } => {
            let policies = parse_policy_list(&policies)?;
            let (cfg, out) = load_with(&base, mode)?;
            let cmp = compare_policies(&cfg, &policies)?;
            println!("{:<14} {:>12} {:>9} {:>10} {:>10} {:>8}", "policy", "mean", "peak", "d_mean", "d_peak", "max/min");
            for r in &cmp.rows {
                let s = &r.summary;
                println!(
                    "{:<14} {:>12.3} {:>9} {:>9.1}% {:>9.1}% {:>8.3}",
                    s.policy,
                    s.stats.network_mean,
                    s.stats.network_peak,
                    r.mean_change * 100.0,
                    r.peak_change * 100.0,
                    s.fairness_ratio
                );
            }
            std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            let csv_path = out.join("comparison.csv");
            let file = std::fs::File::create(&csv_path).map_err(|e| Failure::Runtime(format!("{}: {e}", csv_path.display())))?;
            cmp.write_csv(file).map_err(|e| Failure::Runtime(format!("{}: {e}", csv_path.display())))?;
            write_json(&out.join("comparison.json"), &cmp)?;
            println!("comparison in {}", out.display());
        }
        Command::DeriveCw { config } => {
            let cfg = load(&config, mode)?;
            let report = derive_cw(&cfg)?;
            println!("theta = {:.4} ({:.2} dB), {} nodes", report.theta, 10.0 * report.theta.log10(), report.rows.len());
            println!("{:>4} {:>8} {:>10} {:>9} {:>6} {:>9} {:>6}", "node", "rx_dB", "gamma", "p_pf", "cw_pf", "p_ta", "cw_ta");
            for r in &report.rows {
                println!(
                    "{:>4} {:>8.1} {:>10.2} {:>9.5} {:>6} {:>9.5} {:>6}",
                    r.node, r.rx_power_db, r.gamma, r.pf_probability, r.pf_cw, r.ta_probability, r.ta_cw
                );
            }
            println!("PF windows: {:?}", report.pf_cws());
            println!("TA windows: {:?}", report.ta_cws());
        }
        Command::CheckEq4 { n, trials, horizon, seed } => {
            if n == Some(0) || trials == 0 || horizon == 0 {
                return Err(Failure::Config("--n, --trials and --horizon must be positive".into()));
            }
            let report = check_closed_form(&ClosedFormOptions { nodes: n, trials, horizon, seed, ..Default::default() })?;
            for (k, inst) in report.instances.iter().enumerate() {
                let worst = inst.check.relative_error.iter().map(|e| e.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
                println!(
                    "instance {k:>3}: {} nodes, worst relative error {:.4}% {}",
                    inst.p.len(),
                    worst * 100.0,
                    if inst.check.pass { "ok" } else { "FAIL" }
                );
            }
            println!("worst relative error {:.4}%", report.worst_error() * 100.0);
            if !report.pass {
                return Err(Failure::Check("simulation disagrees with the closed form beyond 1%".into()));
            }
            println!("PASS");
        }
        Command::Summarize { dir } => {
            let path = dir.join(SUMMARY_FILE);
            let text = std::fs::read_to_string(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            let stored: RunSummary =
                serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            let rebuilt = summarize_artifacts(&dir, stored.warmup)?;
            println!("network mean {:.6}, peak {}", rebuilt.network_mean, rebuilt.network_peak);
            if rebuilt != stored.stats {
                return Err(Failure::Check("rebuilt statistics differ from summary.json".into()));
            }
            println!("summary.json reproduced exactly");
        }
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}
