//! Scenario execution and artifacts.
//!
//! A run directory holds `trace.csv` (`slot,node,age_slots[,age_seconds]`),
//! `events.csv` (`slot,node,event,gen_time`) and `summary.json`. The summary
//! can be rebuilt from the two CSV files with [`summarize_artifacts`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{discount_matrix, expected_aoi, ExpectedAoi, ProbabilityVector};
use crate::mac::{run, EventKind, RecordLevel, RunOutput, SimConfig, SimError};
use crate::metrics::{audit_trace, replay_totals, AgeTotals, AoiTrace, Delivery, MetricsError, SummaryStats};
use crate::par::map_ordered;
use crate::policy::{
    cw_from_probability, wifair_probabilities, FixedPointSettings, PolicyError, PolicySpec, WiFairKind,
};
use crate::scenario::{ConfigError, PolicyChoice, ScenarioConfig};
use crate::units::{NodeId, Topology};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("trace audit: {0}")]
    Audit(#[from] MetricsError),
    #[error("trace audit: node {node} age totals disagree with its delivery log")]
    TotalsMismatch { node: usize },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("compared runs must share {0}")]
    Mismatch(&'static str),
}

impl HarnessError {
    /// Whether the failure comes from the scenario rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Mismatch(_))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Format { path: path.to_path_buf(), msg: e.to_string() }
}

/// Engine policy for `choice`, honouring windows pinned in the scenario.
pub fn resolve_policy(cfg: &ScenarioConfig, choice: PolicyChoice, topology: &Topology) -> Result<PolicySpec, HarnessError> {
    let settings = FixedPointSettings::default();
    let derive = |kind: WiFairKind| -> Result<Vec<u16>, PolicyError> {
        wifair_probabilities(topology, kind, &settings)?.into_iter().map(cw_from_probability).collect()
    };
    Ok(match choice {
        PolicyChoice::Dcf(cw) => PolicySpec::Dcf80211 { initial_cw: cw.unwrap_or(cfg.initial_cw()) },
        PolicyChoice::WiFairPf => PolicySpec::WiFairPf {
            cws: match &cfg.policy.pf_cws {
                Some(cws) => cws.clone(),
                None => derive(WiFairKind::Pf)?,
            },
        },
        PolicyChoice::WiFairTa => PolicySpec::WiFairTa {
            cws: match &cfg.policy.ta_cws {
                Some(cws) => cws.clone(),
                None => derive(WiFairKind::Ta)?,
            },
        },
        PolicyChoice::Bernoulli => PolicySpec::FixedBernoulli {
            p: cfg.policy.p.clone().ok_or_else(|| ConfigError::MissingKeys(vec!["policy.p".into()]))?,
        },
        PolicyChoice::BernoulliPf => PolicySpec::FixedBernoulli { p: wifair_probabilities(topology, WiFairKind::Pf, &settings)? },
        PolicyChoice::BernoulliTa => PolicySpec::FixedBernoulli { p: wifair_probabilities(topology, WiFairKind::Ta, &settings)? },
    })
}

/// Checks every trace against its delivery log: the recorded sawtooth slot
/// by slot when ages were kept, and the engine's running totals always.
pub fn audit_run(out: &RunOutput) -> Result<(), HarnessError> {
    for (trace, stats) in out.traces.iter().zip(&out.stats) {
        if !trace.ages.is_empty() || out.horizon == 0 {
            audit_trace(trace, out.horizon)?;
        }
        if replay_totals(&trace.deliveries, out.horizon, out.warmup)? != stats.age {
            return Err(HarnessError::TotalsMismatch { node: trace.node.0 });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCheck {
    /// Closed-form mean age per node; `null` for a starved node.
    pub expected_aoi: Vec<Option<f64>>,
    pub relative_error: Vec<Option<f64>>,
    pub tolerance: f64,
    pub pass: bool,
}

impl AnalyticCheck {
    fn new(topology: &Topology, p: &[f64], empirical: &[f64], tolerance: f64) -> Result<Self, HarnessError> {
        let probs = ProbabilityVector::new(p.to_vec()).map_err(|e| ConfigError::Invalid { key: "policy.p".into(), msg: e.to_string() })?;
        let h = expected_aoi(&probs, &discount_matrix(topology))
            .map_err(|e| ConfigError::Invalid { key: "policy.p".into(), msg: e.to_string() })?;
        let expected: Vec<Option<f64>> = h
            .iter()
            .map(|h| match h {
                ExpectedAoi::Finite(v) => Some(*v),
                ExpectedAoi::Starved => None,
            })
            .collect();
        let relative_error: Vec<Option<f64>> =
            expected.iter().zip(empirical).map(|(e, m)| e.map(|e| (m - e).abs() / e)).collect();
        let pass = relative_error.iter().all(|r| r.is_some_and(|r| r < tolerance));
        Ok(Self { expected_aoi: expected, relative_error, tolerance, pass })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub horizon: u64,
    pub warmup: u64,
    pub retry_limit: u32,
    pub theta: f64,
    pub rx_power_db: Vec<f64>,
    /// Starting window of every node; fixed for WiFair, initial for DCF.
    pub contention_windows: Option<Vec<u16>>,
    pub transmit_probabilities: Option<Vec<f64>>,
    pub slot_duration_seconds: Option<f64>,
    pub stats: SummaryStats,
    pub fairness_ratio: f64,
    pub network_mean_seconds: Option<f64>,
    pub network_peak_seconds: Option<f64>,
    pub retry_drops: Vec<u64>,
    pub backlog: Vec<u64>,
    pub analytic: Option<AnalyticCheck>,
}

/// A finished and audited run.
#[derive(Debug, Clone)]
pub struct Executed {
    pub summary: RunSummary,
    pub output: RunOutput,
}

pub const CLOSED_FORM_TOLERANCE: f64 = 0.01;

/// Runs `cfg` under `choice` (its own policy when `None`) and audits the result.
pub fn execute(cfg: &ScenarioConfig, choice: Option<PolicyChoice>, record: RecordLevel) -> Result<Executed, HarnessError> {
    let choice = choice.unwrap_or(cfg.policy.kind);
    let topology = cfg.topology()?;
    let policy = resolve_policy(cfg, choice, &topology)?;
    let sim = cfg.sim_config(topology.clone(), policy.clone(), record);
    let output = run(sim)?;
    audit_run(&output)?;
    let stats = output.summary.clone().ok_or(MetricsError::EmptyWindow { warmup: cfg.warmup })?;
    let probabilities = match &policy {
        PolicySpec::FixedBernoulli { p } => Some(p.clone()),
        _ => None,
    };
    let analytic = match &probabilities {
        Some(p) => Some(AnalyticCheck::new(&topology, p, &stats.means(), CLOSED_FORM_TOLERANCE)?),
        None => None,
    };
    let secs = |x: f64| cfg.slot_duration_seconds.map(|d| x * d);
    let summary = RunSummary {
        scenario: cfg.name.clone(),
        policy: choice.to_string(),
        seed: cfg.seed,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        retry_limit: cfg.retry_limit,
        theta: topology.theta(),
        rx_power_db: cfg.topology.rx_power_db.clone(),
        contention_windows: output.initial_windows.clone(),
        transmit_probabilities: probabilities,
        slot_duration_seconds: cfg.slot_duration_seconds,
        fairness_ratio: stats.fairness_ratio(),
        network_mean_seconds: secs(stats.network_mean),
        network_peak_seconds: secs(stats.network_peak as f64),
        stats,
        retry_drops: output.stats.iter().map(|s| s.retry_drops).collect(),
        backlog: output.backlog.clone(),
        analytic,
    };
    Ok(Executed { summary, output })
}

#[derive(Serialize, Deserialize)]
struct TraceRow {
    slot: u64,
    node: usize,
    age_slots: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    age_seconds: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    slot: u64,
    node: usize,
    event: String,
    gen_time: Option<u64>,
}

pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn headerless(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file)))
}

fn write_trace(path: &Path, traces: &[AoiTrace], slot_duration: Option<f64>) -> Result<(), HarnessError> {
    let mut w = headerless(path)?;
    let header: &[&str] = if slot_duration.is_some() {
        &["slot", "node", "age_slots", "age_seconds"]
    } else {
        &["slot", "node", "age_slots"]
    };
    w.write_record(header).map_err(csv_err(path))?;
    let horizon = traces.first().map_or(0, |t| t.ages.len());
    for k in 0..horizon {
        for t in traces {
            let age = t.ages[k];
            let row = TraceRow {
                slot: k as u64 + 1,
                node: t.node.0,
                age_slots: age,
                age_seconds: slot_duration.map(|d| age as f64 * d),
            };
            w.serialize(row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn write_events(path: &Path, out: &RunOutput) -> Result<(), HarnessError> {
    let mut w = headerless(path)?;
    w.write_record(["slot", "node", "event", "gen_time"]).map_err(csv_err(path))?;
    for e in &out.events {
        let (event, gen_time) = match e.kind {
            EventKind::Delivery { gen_time } => ("delivery", Some(gen_time)),
            EventKind::Collision => ("collision", None),
            EventKind::Drop => ("drop", None),
        };
        w.serialize(EventRow { slot: e.slot, node: e.node, event: event.into(), gen_time }).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::Format { path: path.to_path_buf(), msg: e.to_string() })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Runs a scenario and, when `out_dir` is given, writes its artifacts there.
///
/// Traces and events are written only when `output.trace` is set.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunSummary, HarnessError> {
    let record = if cfg.output.trace { RecordLevel::Full } else { RecordLevel::Summary };
    let done = execute(cfg, None, record)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        if cfg.output.trace {
            write_trace(&dir.join(TRACE_FILE), &done.output.traces, cfg.slot_duration_seconds)?;
            write_events(&dir.join(EVENTS_FILE), &done.output)?;
        }
        write_json(&dir.join(SUMMARY_FILE), &done.summary)?;
    }
    Ok(done.summary)
}

/// Rebuilds summary statistics from a run directory's CSV files, auditing
/// every trace against the delivery events on the way.
pub fn summarize_artifacts(dir: &Path, warmup: u64) -> Result<SummaryStats, HarnessError> {
    let trace_path = dir.join(TRACE_FILE);
    let mut ages: Vec<Vec<u32>> = Vec::new();
    let mut rd = csv::Reader::from_path(&trace_path).map_err(csv_err(&trace_path))?;
    for row in rd.deserialize::<TraceRow>() {
        let row = row.map_err(csv_err(&trace_path))?;
        if row.node >= ages.len() {
            ages.resize(row.node + 1, Vec::new());
        }
        if ages[row.node].len() as u64 + 1 != row.slot {
            return Err(HarnessError::Format { path: trace_path, msg: format!("node {} skips to slot {}", row.node, row.slot) });
        }
        ages[row.node].push(row.age_slots);
    }

    let events_path = dir.join(EVENTS_FILE);
    let n = ages.len();
    let mut logs = vec![Vec::new(); n];
    let mut collisions = vec![0u64; n];
    let mut rd = csv::Reader::from_path(&events_path).map_err(csv_err(&events_path))?;
    for row in rd.deserialize::<EventRow>() {
        let row = row.map_err(csv_err(&events_path))?;
        if row.node >= n {
            return Err(HarnessError::Format { path: events_path, msg: format!("unknown node {}", row.node) });
        }
        match (row.event.as_str(), row.gen_time) {
            ("delivery", Some(gen_time)) => logs[row.node].push(Delivery { slot: row.slot, gen_time }),
            ("collision", _) => collisions[row.node] += (row.slot > warmup) as u64,
            ("drop", _) => {}
            (other, _) => {
                return Err(HarnessError::Format { path: events_path, msg: format!("bad event `{other}`") });
            }
        }
    }

    let mut totals = Vec::with_capacity(n);
    let mut deliveries = Vec::with_capacity(n);
    for (i, (ages, log)) in ages.into_iter().zip(logs).enumerate() {
        let trace = AoiTrace { node: NodeId(i), ages, deliveries: log };
        audit_trace(&trace, trace.horizon())?;
        let mut t = AgeTotals::default();
        for &a in trace.ages.iter().skip(warmup as usize) {
            t.push(a as u64);
        }
        if t.count == 0 {
            return Err(MetricsError::EmptyWindow { warmup }.into());
        }
        totals.push(t);
        deliveries.push(trace.deliveries.iter().filter(|d| d.slot > warmup).count() as u64);
    }
    Ok(SummaryStats::from_totals(&totals, &deliveries, &collisions))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub summary: RunSummary,
    /// Relative change of the network mean versus the first row.
    pub mean_change: f64,
    pub peak_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(w);
        let n = self.rows.first().map_or(0, |r| r.summary.stats.nodes.len());
        let mut header = vec!["policy".to_string(), "network_mean".into(), "network_peak".into()];
        header.extend(["mean_change".into(), "peak_change".into(), "fairness_ratio".into()]);
        header.extend((0..n).map(|i| format!("mean_{i}")));
        header.extend((0..n).map(|i| format!("peak_{i}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let s = &r.summary.stats;
            let mut rec = vec![r.summary.policy.clone(), s.network_mean.to_string(), s.network_peak.to_string()];
            rec.extend([r.mean_change.to_string(), r.peak_change.to_string(), r.summary.fairness_ratio.to_string()]);
            rec.extend(s.nodes.iter().map(|x| x.mean_age.to_string()));
            rec.extend(s.nodes.iter().map(|x| x.peak_age.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs each `(scenario, policy)` pair under common random numbers.
///
/// Every scenario must share topology, arrivals, seed and horizon with the
/// first; runs go in parallel when the `parallel` feature is enabled.
pub fn compare_runs(runs: Vec<(ScenarioConfig, PolicyChoice)>) -> Result<Comparison, HarnessError> {
    let Some((base, _)) = runs.first() else { return Ok(Comparison { rows: Vec::new() }) };
    for (cfg, _) in &runs[1..] {
        if cfg.topology != base.topology {
            return Err(HarnessError::Mismatch("a topology"));
        }
        if cfg.arrival_processes() != base.arrival_processes() {
            return Err(HarnessError::Mismatch("arrival processes"));
        }
        if (cfg.seed, cfg.horizon, cfg.warmup) != (base.seed, base.horizon, base.warmup) {
            return Err(HarnessError::Mismatch("seed, horizon and warm-up"));
        }
    }
    let results = map_ordered(runs, |(cfg, choice)| execute(&cfg, Some(choice), RecordLevel::Summary));
    let summaries: Vec<RunSummary> = results.into_iter().map(|r| r.map(|e| e.summary)).collect::<Result<_, _>>()?;
    let (mean0, peak0) = (summaries[0].stats.network_mean, summaries[0].stats.network_peak as f64);
    let rows = summaries
        .into_iter()
        .map(|s| ComparisonRow {
            mean_change: (s.stats.network_mean - mean0) / mean0,
            peak_change: (s.stats.network_peak as f64 - peak0) / peak0,
            summary: s,
        })
        .collect();
    Ok(Comparison { rows })
}

pub fn compare_policies(cfg: &ScenarioConfig, policies: &[PolicyChoice]) -> Result<Comparison, HarnessError> {
    compare_runs(policies.iter().map(|&p| (cfg.clone(), p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwRow {
    pub node: usize,
    pub rx_power_db: f64,
    /// Received power over the minimum decodable power.
    pub gamma: f64,
    pub pf_probability: f64,
    pub pf_cw: u16,
    pub ta_probability: f64,
    pub ta_cw: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwReport {
    pub theta: f64,
    pub rows: Vec<CwRow>,
}

impl CwReport {
    pub fn pf_cws(&self) -> Vec<u16> {
        self.rows.iter().map(|r| r.pf_cw).collect()
    }

    pub fn ta_cws(&self) -> Vec<u16> {
        self.rows.iter().map(|r| r.ta_cw).collect()
    }
}

/// WiFair windows derived from the scenario's topology (pins are ignored).
pub fn derive_cw(cfg: &ScenarioConfig) -> Result<CwReport, HarnessError> {
    let topology = cfg.topology()?;
    let settings = FixedPointSettings::default();
    let pf = wifair_probabilities(&topology, WiFairKind::Pf, &settings)?;
    let ta = wifair_probabilities(&topology, WiFairKind::Ta, &settings)?;
    let rows = topology
        .node_ids()
        .map(|id| {
            let i = id.0;
            Ok(CwRow {
                node: i,
                rx_power_db: topology.power(id).db(),
                gamma: topology.power(id).linear() / topology.p_min_rx().linear(),
                pf_probability: pf[i],
                pf_cw: cw_from_probability(pf[i])?,
                ta_probability: ta[i],
                ta_cw: cw_from_probability(ta[i])?,
            })
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;
    Ok(CwReport { theta: topology.theta(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormOptions {
    /// Fixed node count; drawn from `1..=5` per instance when `None`.
    pub nodes: Option<usize>,
    pub trials: usize,
    pub horizon: u64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for ClosedFormOptions {
    fn default() -> Self {
        Self { nodes: None, trials: 20, horizon: 1_000_000, seed: 2024, tolerance: CLOSED_FORM_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormInstance {
    pub rx_power_db: Vec<f64>,
    pub p: Vec<f64>,
    pub empirical: Vec<f64>,
    pub check: AnalyticCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub instances: Vec<ClosedFormInstance>,
    pub pass: bool,
}

impl ClosedFormReport {
    pub fn worst_error(&self) -> f64 {
        self.instances
            .iter()
            .flat_map(|i| i.check.relative_error.iter())
            .map(|e| e.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}

/// Bernoulli-mode simulations of random instances against the closed form.
///
/// Powers are drawn from [-45, -10] dB, probabilities from [0.1, 0.6] and
/// the threshold is 5 dB.
pub fn check_closed_form(opts: &ClosedFormOptions) -> Result<ClosedFormReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let theta = 10f64.powf(0.5);
    let mut jobs = Vec::with_capacity(opts.trials);
    for k in 0..opts.trials {
        let n = opts.nodes.unwrap_or_else(|| rng.random_range(1..=5));
        let powers: Vec<f64> = (0..n).map(|_| rng.random_range(-45.0..=-10.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..=0.6)).collect();
        let topology = Topology::from_db(&powers, 0.0, -45.0)
            .and_then(|t| t.with_theta(theta))
            .map_err(|e| ConfigError::Invalid { key: "nodes".into(), msg: e.to_string() })?;
        let mut sim = SimConfig::saturated(topology.clone(), PolicySpec::FixedBernoulli { p: p.clone() }, opts.horizon, opts.seed + k as u64);
        sim.record = RecordLevel::Summary;
        jobs.push((powers, p, topology, sim));
    }
    let results = map_ordered(jobs, |(powers, p, topology, sim)| -> Result<ClosedFormInstance, HarnessError> {
        let out = run(sim)?;
        audit_run(&out)?;
        let empirical = out.summary.ok_or(MetricsError::EmptyWindow { warmup: 0 })?.means();
        let check = AnalyticCheck::new(&topology, &p, &empirical, opts.tolerance)?;
        Ok(ClosedFormInstance { rx_power_db: powers, p, empirical, check })
    });
    let instances: Vec<ClosedFormInstance> = results.into_iter().collect::<Result<_, _>>()?;
    let pass = instances.iter().all(|i| i.check.pass);
    Ok(ClosedFormReport { instances, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    fn small(name: &str, horizon: u64) -> ScenarioConfig {
        let mut cfg = preset(name).unwrap();
        cfg.horizon = horizon;
        cfg.warmup = cfg.warmup.min(horizon / 10);
        cfg
    }

    #[test]
    fn derived_presets_report_windows() {
        let ta = run_scenario(&small("table2-ta", 2_000), None).unwrap();
        assert_eq!(ta.contention_windows, Some(vec![10, 10, 10, 9, 9, 7, 7]));
        let pf = run_scenario(&small("table2-pf", 2_000), None).unwrap();
        assert_eq!(pf.contention_windows, Some(vec![11, 11, 11, 5, 5, 2, 2]));
        let report = derive_cw(&preset("exp1-lcfs").unwrap()).unwrap();
        assert_eq!(report.ta_cws(), vec![10, 10, 10, 9, 9, 7, 7]);
    }

    #[test]
    fn pinned_windows_win_over_derivation() {
        let cfg = preset("exp1-lcfs").unwrap();
        let t = cfg.topology().unwrap();
        assert_eq!(resolve_policy(&cfg, PolicyChoice::WiFairPf, &t).unwrap(), PolicySpec::WiFairPf { cws: vec![11, 11, 11, 5, 5, 3, 3] });
        assert_eq!(resolve_policy(&cfg, PolicyChoice::Dcf(None), &t).unwrap(), PolicySpec::Dcf80211 { initial_cw: 8 });
        assert_eq!(resolve_policy(&cfg, PolicyChoice::Dcf(Some(32)), &t).unwrap(), PolicySpec::Dcf80211 { initial_cw: 32 });
        assert!(resolve_policy(&cfg, PolicyChoice::Bernoulli, &t).unwrap_err().is_config());
    }

    #[test]
    fn artifacts_are_deterministic_and_resummarize() {
        let mut cfg = small("exp3-congested", 3_000);
        cfg.warmup = 500;
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = run_scenario(&cfg, Some(a.path())).unwrap();
        let sb = run_scenario(&cfg, Some(b.path())).unwrap();
        assert_eq!(sa, sb);
        for f in [TRACE_FILE, EVENTS_FILE, SUMMARY_FILE] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let header = std::fs::read_to_string(a.path().join(TRACE_FILE)).unwrap();
        assert!(header.starts_with("slot,node,age_slots,age_seconds\n1,0,1,"));

        let rebuilt = summarize_artifacts(a.path(), cfg.warmup).unwrap();
        let text = std::fs::read_to_string(a.path().join(SUMMARY_FILE)).unwrap();
        let stored: RunSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(rebuilt, stored.stats);
        assert_eq!(stored, sa);
    }

    #[test]
    fn tampered_trace_fails_audit() {
        let cfg = small("exp1-lcfs", 200);
        let dir = tempfile::tempdir().unwrap();
        run_scenario(&cfg, Some(dir.path())).unwrap();
        let path = dir.path().join(TRACE_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let last = lines.len() - 1;
        let fields: Vec<&str> = lines[last].split(',').collect();
        let bumped = fields[2].parse::<u32>().unwrap() + 5;
        lines[last] = format!("{},{},{},{}", fields[0], fields[1], bumped, fields[3]);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(matches!(summarize_artifacts(dir.path(), 0), Err(HarnessError::Audit(_))));
    }

    #[test]
    fn summary_only_runs_skip_traces() {
        let mut cfg = small("exp1-lcfs", 1_000);
        cfg.output.trace = false;
        let dir = tempfile::tempdir().unwrap();
        run_scenario(&cfg, Some(dir.path())).unwrap();
        assert!(dir.path().join(SUMMARY_FILE).exists());
        assert!(!dir.path().join(TRACE_FILE).exists());
    }

    #[test]
    fn comparison_columns() {
        let cfg = small("exp1-lcfs", 20_000);
        let cmp = compare_policies(&cfg, &[PolicyChoice::Dcf(None), PolicyChoice::Dcf(None), PolicyChoice::WiFairTa]).unwrap();
        assert_eq!(cmp.rows[0].mean_change, 0.0);
        assert_eq!(cmp.rows[1].mean_change, 0.0);
        assert_eq!(cmp.rows[1].peak_change, 0.0);
        assert_eq!(cmp.rows[0].summary, cmp.rows[1].summary);
        assert!(cmp.rows[2].mean_change < 0.0);
        let mut buf = Vec::new();
        cmp.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("policy,network_mean,network_peak,mean_change"));
    }

    #[test]
    fn wifair_beats_dcf_on_saturated_lcfs() {
        let cfg = small("exp1-lcfs", 200_000);
        let cmp = compare_policies(&cfg, &[PolicyChoice::Dcf(Some(8)), PolicyChoice::WiFairTa, PolicyChoice::WiFairPf]).unwrap();
        let mean = |k: usize| cmp.rows[k].summary.stats.network_mean;
        assert!(mean(1) < 0.8 * mean(0), "TA {} vs DCF {}", mean(1), mean(0));
        assert!(mean(1).max(mean(2)) / mean(1).min(mean(2)) <= 1.15, "TA {} vs PF {}", mean(1), mean(2));
    }

    #[test]
    fn comparison_rejects_mismatched_scenarios() {
        let a = small("exp1-lcfs", 1_000);
        let mut b = a.clone();
        b.topology.rx_power_db[0] = -20.0;
        let err = compare_runs(vec![(a.clone(), PolicyChoice::Dcf(None)), (b, PolicyChoice::Dcf(None))]).unwrap_err();
        assert!(matches!(err, HarnessError::Mismatch(_)));
        let mut c = a.clone();
        c.seed += 1;
        assert!(compare_runs(vec![(a, PolicyChoice::Dcf(None)), (c, PolicyChoice::Dcf(None))]).is_err());
    }

    #[test]
    fn bernoulli_preset_passes() {
        let s = run_scenario(&preset("eq4-check").unwrap(), None).unwrap();
        let check = s.analytic.unwrap();
        assert!(check.pass, "{check:?}");
    }

    #[test]
    fn closed_form_harness_small() {
        let report = check_closed_form(&ClosedFormOptions { nodes: Some(2), trials: 3, horizon: 200_000, ..Default::default() }).unwrap();
        assert_eq!(report.instances.len(), 3);
        assert!(report.instances.iter().all(|i| i.p.len() == 2));
        assert!(report.worst_error() < 0.05, "{}", report.worst_error());
    }
}
