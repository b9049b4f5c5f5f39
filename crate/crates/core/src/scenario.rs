//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "example"
//! seed = 1
//! horizon = 200000
//! warmup = 0                  # optional
//! retry_limit = 0
//! sampler = "uniform"         # optional: uniform | fpga
//! packet_size_bytes = 100     # optional
//! slot_duration_seconds = 1e-4 # optional, adds seconds to reports
//!
//! [topology]
//! rx_power_db = [-15.0, -33.0, -40.0]
//! mcs = 0                     # or theta_db = 5.0
//! p_min_db = -45.0
//!
//! [policy]
//! kind = "dcf"                # dcf[:cw] | wifair-pf | wifair-ta | bernoulli | bernoulli-pf | bernoulli-ta
//! initial_cw = 8              # optional, dcf only
//! pf_cws = [11, 5, 3]         # optional pinned windows
//! ta_cws = [10, 9, 7]         # optional pinned windows
//! p = [0.2, 0.3, 0.5]         # bernoulli only
//!
//! [queue]
//! kind = "lcfs"               # lcfs | fcfs
//! capacity = 64               # optional, fcfs only
//!
//! [arrivals]                  # one process for every node,
//! kind = "sample-at-will"     # or [[arrivals]] once per node
//!
//! [output]
//! dir = "out/example"
//! trace = true
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mac::{ArrivalProcess, QueueDiscipline, RecordLevel, SamplerKind, SimConfig};
use crate::policy::{PolicySpec, DEFAULT_INITIAL_CW, MAX_CW};
use crate::units::{db_to_linear, theta_for_mcs, McsIndex, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid TOML: {0}")]
    Syntax(String),
    #[error("missing required keys: {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("unknown keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("`{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("inconsistent settings: {0}")]
    Inconsistent(String),
    #[error("no scenario file or preset named `{0}`")]
    NotFound(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Unknown keys are an error.
    #[default]
    Strict,
    /// Unknown keys become warnings.
    Lenient,
}

/// Access policy named in a scenario or on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyChoice {
    /// 802.11 DCF, optionally overriding the initial window.
    Dcf(Option<u16>),
    WiFairPf,
    WiFairTa,
    /// Bernoulli access with the probabilities listed in `policy.p`.
    Bernoulli,
    /// Bernoulli access at the WiFair PF probabilities.
    BernoulliPf,
    /// Bernoulli access at the WiFair TA probabilities.
    BernoulliTa,
}

impl fmt::Display for PolicyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyChoice::Dcf(None) => f.write_str("dcf"),
            PolicyChoice::Dcf(Some(cw)) => write!(f, "dcf:{cw}"),
            PolicyChoice::WiFairPf => f.write_str("wifair-pf"),
            PolicyChoice::WiFairTa => f.write_str("wifair-ta"),
            PolicyChoice::Bernoulli => f.write_str("bernoulli"),
            PolicyChoice::BernoulliPf => f.write_str("bernoulli-pf"),
            PolicyChoice::BernoulliTa => f.write_str("bernoulli-ta"),
        }
    }
}

impl FromStr for PolicyChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(cw) = s.strip_prefix("dcf:") {
            let cw: u16 = cw.parse().map_err(|_| format!("bad initial window in `{s}`"))?;
            if cw > MAX_CW {
                return Err(format!("initial window {cw} exceeds {MAX_CW}"));
            }
            return Ok(PolicyChoice::Dcf(Some(cw)));
        }
        Ok(match s {
            "dcf" => PolicyChoice::Dcf(None),
            "wifair-pf" => PolicyChoice::WiFairPf,
            "wifair-ta" => PolicyChoice::WiFairTa,
            "bernoulli" => PolicyChoice::Bernoulli,
            "bernoulli-pf" => PolicyChoice::BernoulliPf,
            "bernoulli-ta" => PolicyChoice::BernoulliTa,
            other => {
                return Err(format!(
                    "unknown policy `{other}` (expected dcf, dcf:<cw>, wifair-pf, wifair-ta, bernoulli, bernoulli-pf or bernoulli-ta)"
                ))
            }
        })
    }
}

impl Serialize for PolicyChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicyChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma separated policy list.
pub fn parse_policy_list(s: &str) -> Result<Vec<PolicyChoice>, ConfigError> {
    let list: Vec<PolicyChoice> = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse().map_err(|e: String| invalid("policies", e)))
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(invalid("policies", "no policies given"));
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySection {
    pub rx_power_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcs: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_db: Option<f64>,
    pub p_min_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySection {
    pub kind: PolicyChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_cw: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pf_cws: Option<Vec<u16>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ta_cws: Option<Vec<u16>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueKind {
    Lcfs,
    Fcfs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSection {
    pub kind: QueueKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArrivalSpec {
    PerNode(Vec<ArrivalProcess>),
    All(ArrivalProcess),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub trace: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, trace: true }
    }
}

fn yes() -> bool {
    true
}

fn default_name() -> String {
    "scenario".into()
}

fn default_packet_size() -> u32 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    pub horizon: u64,
    #[serde(default)]
    pub warmup: u64,
    pub retry_limit: u32,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default = "default_packet_size")]
    pub packet_size_bytes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot_duration_seconds: Option<f64>,
    pub topology: TopologySection,
    pub policy: PolicySection,
    pub queue: QueueSection,
    pub arrivals: ArrivalSpec,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone)]
pub struct ParsedScenario {
    pub config: ScenarioConfig,
    pub warnings: Vec<String>,
}

const ARRIVAL_KINDS: &[(&str, &[&str])] = &[
    ("sample-at-will", &[]),
    ("periodic", &["rate"]),
    ("poisson", &["rate"]),
    ("bursty-on-off", &["on_rate", "mean_on", "mean_off"]),
    ("trace", &["slots"]),
];

fn check_arrival(prefix: &str, t: &toml::Table, missing: &mut Vec<String>, unknown: &mut Vec<String>) -> Result<(), ConfigError> {
    let Some(kind) = t.get("kind") else {
        missing.push(format!("{prefix}.kind"));
        return Ok(());
    };
    let kind = kind.as_str().ok_or_else(|| invalid(&format!("{prefix}.kind"), "expected a string"))?;
    let (_, params) = ARRIVAL_KINDS.iter().find(|(k, _)| *k == kind).ok_or_else(|| {
        let names: Vec<&str> = ARRIVAL_KINDS.iter().map(|(k, _)| *k).collect();
        invalid(&format!("{prefix}.kind"), format!("unknown arrival kind `{kind}` (expected one of {})", names.join(", ")))
    })?;
    for p in *params {
        if !t.contains_key(*p) {
            missing.push(format!("{prefix}.{p}"));
        }
    }
    for key in t.keys() {
        if key != "kind" && !params.contains(&key.as_str()) {
            unknown.push(format!("{prefix}.{key}"));
        }
    }
    Ok(())
}

/// Lists missing required keys and unknown keys inside arrival tables.
fn pre_pass(doc: &toml::Table) -> Result<(Vec<String>, Vec<String>), ConfigError> {
    let mut missing = Vec::new();
    let mut unknown = Vec::new();
    for key in ["seed", "horizon", "retry_limit"] {
        if !doc.contains_key(key) {
            missing.push(key.to_string());
        }
    }
    let section = |name: &str| -> Result<Option<&toml::Table>, ConfigError> {
        match doc.get(name) {
            None => Ok(None),
            Some(toml::Value::Table(t)) => Ok(Some(t)),
            Some(_) => Err(invalid(name, "expected a table")),
        }
    };
    let empty = toml::Table::new();
    let topo = section("topology")?.unwrap_or(&empty);
    for key in ["rx_power_db", "p_min_db"] {
        if !topo.contains_key(key) {
            missing.push(format!("topology.{key}"));
        }
    }
    if !topo.contains_key("mcs") && !topo.contains_key("theta_db") {
        missing.push("topology.mcs (or topology.theta_db)".into());
    }
    if !section("policy")?.unwrap_or(&empty).contains_key("kind") {
        missing.push("policy.kind".into());
    }
    if !section("queue")?.unwrap_or(&empty).contains_key("kind") {
        missing.push("queue.kind".into());
    }
    match doc.get("arrivals") {
        None => missing.push("arrivals.kind".into()),
        Some(toml::Value::Table(t)) => check_arrival("arrivals", t, &mut missing, &mut unknown)?,
        Some(toml::Value::Array(items)) => {
            for (k, item) in items.iter().enumerate() {
                let prefix = format!("arrivals[{k}]");
                let t = item.as_table().ok_or_else(|| invalid(&prefix, "expected a table"))?;
                check_arrival(&prefix, t, &mut missing, &mut unknown)?;
            }
        }
        Some(_) => return Err(invalid("arrivals", "expected a table or an array of tables")),
    }
    Ok((missing, unknown))
}

/// Strips unknown keys from arrival tables so the typed pass sees only
/// known fields.
fn strip_arrival_extras(doc: &mut toml::Table) {
    let strip = |t: &mut toml::Table| {
        let kind = t.get("kind").and_then(|k| k.as_str()).unwrap_or_default().to_string();
        if let Some((_, params)) = ARRIVAL_KINDS.iter().find(|(k, _)| *k == kind) {
            t.retain(|key, _| key == "kind" || params.iter().any(|p| *p == key));
        }
    };
    match doc.get_mut("arrivals") {
        Some(toml::Value::Table(t)) => strip(t),
        Some(toml::Value::Array(items)) => {
            for item in items.iter_mut() {
                if let toml::Value::Table(t) = item {
                    strip(t);
                }
            }
        }
        _ => {}
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str, mode: ParseMode) -> Result<ParsedScenario, ConfigError> {
    let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
    let (missing, mut unknown) = pre_pass(&doc)?;
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing));
    }
    strip_arrival_extras(&mut doc);

    let value = toml::Value::Table(doc);
    let mut track = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
    let ignored = serde_ignored::Deserializer::new(value, &mut track);
    let config: ScenarioConfig = serde_path_to_error::deserialize(ignored).map_err(|e| {
        let key = e.path().to_string();
        invalid(&key, e.into_inner().message().to_string())
    })?;

    let mut warnings = Vec::new();
    if !unknown.is_empty() {
        unknown.sort();
        match mode {
            ParseMode::Strict => return Err(ConfigError::UnknownKeys(unknown)),
            ParseMode::Lenient => warnings.extend(unknown.into_iter().map(|k| format!("ignoring unknown key `{k}`"))),
        }
    }
    warnings.extend(config.validate()?);
    Ok(ParsedScenario { config, warnings })
}

impl ScenarioConfig {
    pub fn nodes(&self) -> usize {
        self.topology.rx_power_db.len()
    }

    /// Linear SIR threshold.
    pub fn theta(&self) -> Result<f64, ConfigError> {
        let t = &self.topology;
        match (t.mcs, t.theta_db) {
            (Some(_), Some(_)) => Err(ConfigError::Inconsistent("give either topology.mcs or topology.theta_db, not both".into())),
            (None, Some(db)) => db_to_linear(db).map_err(|e| invalid("topology.theta_db", e.to_string())),
            (Some(m), None) => theta_for_mcs(McsIndex(m), None).map_err(|e| invalid("topology.mcs", e.to_string())),
            (None, None) => Err(ConfigError::MissingKeys(vec!["topology.mcs (or topology.theta_db)".into()])),
        }
    }

    pub fn topology(&self) -> Result<Topology, ConfigError> {
        let theta = self.theta()?;
        let t = Topology::from_db(&self.topology.rx_power_db, 0.0, self.topology.p_min_db)
            .map_err(|e| invalid("topology.rx_power_db", e.to_string()))?;
        t.with_theta(theta).map_err(|e| invalid("topology", e.to_string()))
    }

    pub fn queue_discipline(&self) -> QueueDiscipline {
        match self.queue.kind {
            QueueKind::Lcfs => QueueDiscipline::LcfsSinglePacket,
            QueueKind::Fcfs => QueueDiscipline::Fcfs { capacity: self.queue.capacity },
        }
    }

    pub fn arrival_processes(&self) -> Vec<ArrivalProcess> {
        match &self.arrivals {
            ArrivalSpec::All(p) => vec![p.clone(); self.nodes()],
            ArrivalSpec::PerNode(v) => v.clone(),
        }
    }

    /// Semantic checks; returns warnings that do not block a run.
    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let mut warnings = Vec::new();
        let n = self.nodes();
        if n == 0 {
            return Err(invalid("topology.rx_power_db", "at least one node is required"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.warmup >= self.horizon {
            return Err(invalid("warmup", format!("must be below the horizon ({})", self.horizon)));
        }
        if let Some(d) = self.slot_duration_seconds {
            if !(d.is_finite() && d > 0.0) {
                return Err(invalid("slot_duration_seconds", "must be positive"));
            }
        }
        if self.packet_size_bytes == 0 {
            return Err(invalid("packet_size_bytes", "must be positive"));
        }
        let topology = self.topology()?;
        for node in topology.below_min_power() {
            warnings.push(format!("node {} is below the minimum decodable power", node.0));
        }

        let pol = &self.policy;
        if let Some(cw) = pol.initial_cw {
            if cw > MAX_CW {
                return Err(invalid("policy.initial_cw", format!("must be at most {MAX_CW}")));
            }
        }
        for (key, cws) in [("policy.pf_cws", &pol.pf_cws), ("policy.ta_cws", &pol.ta_cws)] {
            if let Some(cws) = cws {
                if cws.len() != n {
                    return Err(invalid(key, format!("{} windows for {n} nodes", cws.len())));
                }
                if let Some(cw) = cws.iter().find(|&&c| c > MAX_CW) {
                    return Err(invalid(key, format!("window {cw} exceeds {MAX_CW}")));
                }
            }
        }
        if let Some(p) = &pol.p {
            if p.len() != n {
                return Err(invalid("policy.p", format!("{} probabilities for {n} nodes", p.len())));
            }
            if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(invalid("policy.p", format!("{x} is not a probability")));
            }
        }
        if pol.kind == PolicyChoice::Bernoulli && pol.p.is_none() {
            return Err(ConfigError::MissingKeys(vec!["policy.p".into()]));
        }

        match (self.queue.kind, self.queue.capacity) {
            (QueueKind::Lcfs, Some(_)) => {
                return Err(ConfigError::Inconsistent("queue.capacity only applies to fcfs queues".into()))
            }
            (QueueKind::Fcfs, Some(0)) => return Err(invalid("queue.capacity", "must be positive")),
            _ => {}
        }

        if let ArrivalSpec::PerNode(v) = &self.arrivals {
            if v.len() != n {
                return Err(invalid("arrivals", format!("{} processes for {n} nodes", v.len())));
            }
        }
        for (i, a) in self.arrival_processes().iter().enumerate() {
            a.validate().map_err(|msg| invalid(&format!("arrivals (node {i})"), msg))?;
            if *a == ArrivalProcess::SampleAtWill && self.queue.kind == QueueKind::Fcfs {
                return Err(ConfigError::Inconsistent("sample-at-will arrivals need queue.kind = \"lcfs\"".into()));
            }
        }
        Ok(warnings)
    }

    /// Engine configuration for a resolved policy.
    pub fn sim_config(&self, topology: Topology, policy: PolicySpec, record: RecordLevel) -> SimConfig {
        SimConfig {
            arrivals: self.arrival_processes(),
            queue: self.queue_discipline(),
            retry_limit: self.retry_limit,
            sampler: self.sampler,
            horizon: self.horizon,
            warmup: self.warmup,
            seed: self.seed,
            packet_size_bytes: self.packet_size_bytes,
            record,
            ..SimConfig::saturated(topology, policy, self.horizon, self.seed)
        }
    }

    /// Initial DCF window for `dcf` without an explicit value.
    pub fn initial_cw(&self) -> u16 {
        self.policy.initial_cw.unwrap_or(DEFAULT_INITIAL_CW)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("exp1-lcfs", include_str!("../presets/exp1-lcfs.toml")),
    ("exp2-video", include_str!("../presets/exp2-video.toml")),
    ("exp3-congested", include_str!("../presets/exp3-congested.toml")),
    ("table2-ta", include_str!("../presets/table2-ta.toml")),
    ("table2-pf", include_str!("../presets/table2-pf.toml")),
    ("eq4-check", include_str!("../presets/eq4-check.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let text = preset_text(name).ok_or_else(|| ConfigError::NotFound(name.to_string()))?;
    Ok(parse_scenario(text, ParseMode::Strict)?.config)
}

/// Loads a scenario from a file, or from a bundled preset when `source`
/// is `preset:<name>` or names a preset and no such file exists.
pub fn load_scenario(source: &str, mode: ParseMode) -> Result<ParsedScenario, ConfigError> {
    let named = source.strip_prefix("preset:");
    let path = Path::new(source);
    if named.is_none() && path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: source.to_string(), source: e })?;
        return parse_scenario(&text, mode);
    }
    let name = named.unwrap_or(source);
    let text = preset_text(name).ok_or_else(|| ConfigError::NotFound(source.to_string()))?;
    parse_scenario(text, mode)
}
