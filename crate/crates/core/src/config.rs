//! Flat `key = value` configuration files.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every key
//! carries its unit in the name (`slot_ms`, `radii_m`); a value may repeat the
//! unit as a trailing token (`slot_ms = 2 ms`) but any other unit is an error.
//! Lists are comma separated and may be wrapped in braces or brackets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::PathlossParams;
use crate::experiment::{ExperimentSpec, ScenarioSource};
use crate::matching::{Proposer, ResolutionSide};
use crate::mobility::JunctionConfig;
use crate::simulator::{AlignmentCharging, InterferenceSources, SimConfig};
use crate::{Result, SimError};

/// Parsed experiment plus the base simulation config every run starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub experiment: ExperimentSpec,
    pub sim: SimConfig,
}

impl Default for Config {
    fn default() -> Self {
        let sim = SimConfig::default();
        let experiment = ExperimentSpec {
            scenario: ScenarioSource::Synthetic(JunctionConfig::default()),
            ..ExperimentSpec::default()
        };
        Config { experiment, sim }
    }
}

struct Key {
    name: &'static str,
    /// Unit token accepted after the value; empty for unit-less keys.
    unit: &'static str,
    help: &'static str,
}

const fn key(name: &'static str, unit: &'static str, help: &'static str) -> Key {
    Key { name, unit, help }
}

const KEYS: &[Key] = &[
    key("slot_ms", "ms", "transmission slot T_t"),
    key("slots_per_epoch", "", "slots per scheduling epoch M"),
    key("epoch_ms", "ms", "scheduling epoch T_s; optional, must equal slot_ms * slots_per_epoch"),
    key("duration_s", "s", "simulated time"),
    key("phi_deg", "deg", "beamwidth sweep (both ends of a link)"),
    key("sector_deg", "deg", "sector width searched during alignment"),
    key("pilot_us", "us", "pilot transmission time T_p"),
    key("sidelobe_gain", "", "linear sidelobe gain, in [0, 1)"),
    key("bandwidth_ghz", "ghz", "channel bandwidth"),
    key("noise_dbm_per_hz", "dbm/hz", "noise power spectral density"),
    key("tx_power_dbm", "dbm", "transmit power"),
    key("pl_exponent_los", "", "pathloss exponent with no blocking vehicle"),
    key("pl_intercept_los_db", "db", "pathloss intercept with no blocking vehicle"),
    key("pl_exponent_per_blocker", "", "exponent increase per blocking vehicle"),
    key("pl_intercept_per_blocker_db", "db", "intercept increase per blocking vehicle"),
    key("pl_max_blockers", "", "blocker count after which pathloss stops growing"),
    key("building_penalty_db", "db", "extra loss when a building cuts the link"),
    key("packet_bits", "bits", "packet size"),
    key("arrival_rate_per_s", "/s", "Poisson packet arrival rate per link"),
    key("buffer_packets", "packets", "queue capacity including the packet in service"),
    key("deadline_ms", "ms", "delivery deadline"),
    key("radii_m", "m", "sensing radius per quality level, ascending"),
    key("thresholds_packets", "packets", "packets per epoch needed for each quality level"),
    key("quota_tx", "", "links per transmitter"),
    key("quota_rx", "", "links per receiver (sweep)"),
    key("policy", "", "policies to run: MINDist, DELAYfair, CONTEXTaware"),
    key("omega_d", "", "CONTEXTaware weight on rate"),
    key("omega_i", "", "CONTEXTaware weight on timeliness"),
    key("omega_e", "", "CONTEXTaware weight on sensing extension"),
    key("smoothing", "", "rate estimator smoothing, in (0, 1]"),
    key("proposer", "", "proposing side: vtx or vrx"),
    key("vtx_resolution", "", "resolution used in the transmitter utility: receiver or transmitter"),
    key("exclude_blocked", "", "drop building-blocked pairs: auto, true or false"),
    key("alignment_charging", "", "per_epoch or per_slot"),
    key("interferers", "", "matched or all"),
    key("count_overflow", "", "count overflow drops in P_drop"),
    key("corridor_m", "m", "timeliness corridor half-width"),
    key("timeliness_step_m", "m", "sample spacing along the receiver route"),
    key("horizon_m", "m", "longest stretch of receiver route considered"),
    key("past_window_m", "m", "transmitter past trace length"),
    key("sensing_cell_m", "m", "raster cell for the sensing extension"),
    key("seeds", "", "seeds to run"),
    key("scenario", "", "synthetic or traces"),
    key("trace_file", "", "trace CSV (scenario = traces)"),
    key("route_file", "", "route CSV, optional"),
    key("buildings_file", "", "buildings file, optional"),
    key("junction_n_tx", "", "synthetic junction: transmitters"),
    key("junction_n_rx", "", "synthetic junction: receivers"),
    key("junction_arm_m", "m", "synthetic junction: arm length"),
    key("junction_signal_period_s", "s", "synthetic junction: signal cycle, 0 for no signals"),
    key("junction_min_speed_mps", "m/s", "synthetic junction: lowest cruise speed"),
    key("junction_max_speed_mps", "m/s", "synthetic junction: highest cruise speed"),
    key("junction_respawn", "", "synthetic junction: replace vehicles that leave"),
];

const UNIT_SUFFIXES: &[&str] = &[
    "s", "ms", "us", "ns", "min", "deg", "rad", "m", "km", "cm", "hz", "khz", "mhz", "ghz", "db", "dbm", "w", "mw",
    "bits", "bytes", "kb", "mb", "packets", "pkts", "mps", "kmh", "per_s", "per_ms", "dbm_per_hz",
];

fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// Key name with its unit suffix removed.
fn base_name(name: &str) -> &str {
    UNIT_SUFFIXES
        .iter()
        .filter_map(|u| name.strip_suffix(u).and_then(|b| b.strip_suffix('_')))
        .min_by_key(|b| b.len())
        .unwrap_or(name)
}

/// Known key that `name` would be with the right unit suffix.
fn unit_mismatch(name: &str) -> Option<&'static Key> {
    let base = base_name(name);
    KEYS.iter()
        .filter(|k| !k.unit.is_empty())
        .find(|k| base_name(k.name) == base)
}

fn cfg_err(key: &str, msg: impl std::fmt::Display) -> SimError {
    SimError::Config(format!("`{key}`: {msg}"))
}

/// Splits a trailing unit token off a scalar and checks it against the key.
fn strip_unit<'a>(key: &Key, raw: &'a str) -> Result<&'a str> {
    let raw = raw.trim();
    let split = raw
        .char_indices()
        .find(|&(i, c)| {
            (c.is_alphabetic() || c == '°' || c == '/')
                && !(matches!(c, 'e' | 'E') && i > 0 && raw[i + 1..].starts_with(|d: char| d.is_ascii_digit() || d == '-' || d == '+'))
                && !raw[..i].trim().is_empty()
                && raw[..i].trim().parse::<f64>().is_ok()
        })
        .map(|(i, _)| i);
    let Some(i) = split else {
        return Ok(raw);
    };
    let (num, unit) = (raw[..i].trim(), raw[i..].trim().to_ascii_lowercase());
    let unit = if unit == "°" { "deg".to_string() } else { unit };
    let want = key.unit;
    if want.is_empty() {
        return Err(cfg_err(key.name, format!("unit mismatch: takes no unit, got `{unit}`")));
    }
    if unit != want {
        return Err(cfg_err(key.name, format!("unit mismatch: value is in {want}, got `{unit}`")));
    }
    Ok(num)
}

fn scalar(key: &Key, raw: &str) -> Result<f64> {
    let s = strip_unit(key, raw)?;
    let v: f64 = s.parse().map_err(|_| cfg_err(key.name, format!("expected a number, got `{raw}`")))?;
    if !v.is_finite() {
        return Err(cfg_err(key.name, "value must be finite"));
    }
    Ok(v)
}

fn count(key: &Key, raw: &str) -> Result<usize> {
    let s = strip_unit(key, raw)?;
    s.parse().map_err(|_| cfg_err(key.name, format!("expected a non-negative integer, got `{raw}`")))
}

fn flag(key: &Key, raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(cfg_err(key.name, format!("expected true or false, got `{raw}`"))),
    }
}

fn items(raw: &str) -> impl Iterator<Item = &str> {
    let inner = raw
        .trim()
        .trim_start_matches(['{', '['])
        .trim_end_matches(['}', ']']);
    inner.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn list<T>(key: &Key, raw: &str, each: impl Fn(&Key, &str) -> Result<T>) -> Result<Vec<T>> {
    let out = items(raw).map(|s| each(key, s)).collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(cfg_err(key.name, "list must not be empty"));
    }
    Ok(out)
}

fn choice<T: Copy>(key: &Key, raw: &str, options: &[(&str, T)]) -> Result<T> {
    let v = raw.trim().to_ascii_lowercase();
    options.iter().find(|(n, _)| *n == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
        cfg_err(key.name, format!("expected one of {}, got `{raw}`", names.join(", ")))
    })
}

/// Pathloss knobs kept separately so the table is rebuilt once at the end.
#[derive(Debug, Clone, Copy)]
struct PathlossKnobs {
    los_exponent: f64,
    los_intercept: f64,
    exponent_step: f64,
    intercept_step: f64,
    max_blockers: usize,
    building_penalty: f64,
}

impl PathlossKnobs {
    fn from_params(p: &PathlossParams) -> Self {
        let first = p.table[0];
        let second = p.table.get(1).copied().unwrap_or(first);
        PathlossKnobs {
            los_exponent: first.exponent,
            los_intercept: first.intercept_db,
            exponent_step: second.exponent - first.exponent,
            intercept_step: second.intercept_db - first.intercept_db,
            max_blockers: p.table.len() - 1,
            building_penalty: p.building_penalty_db,
        }
    }

    fn build(&self) -> PathlossParams {
        PathlossParams::stepped(
            self.los_exponent,
            self.los_intercept,
            self.exponent_step,
            self.intercept_step,
            self.max_blockers,
            self.building_penalty,
        )
    }
}

#[derive(Debug, Default)]
struct Paths {
    scenario: Option<String>,
    trace: Option<PathBuf>,
    routes: Option<PathBuf>,
    buildings: Option<PathBuf>,
}

struct Builder {
    cfg: Config,
    junction: JunctionConfig,
    pathloss: PathlossKnobs,
    epoch_ms: Option<f64>,
    paths: Paths,
    base_dir: PathBuf,
}

impl Builder {
    fn new(base_dir: &Path) -> Self {
        let cfg = Config::default();
        let pathloss = PathlossKnobs::from_params(&cfg.sim.pathloss);
        Builder {
            cfg,
            junction: JunctionConfig::default(),
            pathloss,
            epoch_ms: None,
            paths: Paths::default(),
            base_dir: base_dir.to_path_buf(),
        }
    }

    fn path(&self, raw: &str) -> PathBuf {
        let p = PathBuf::from(raw.trim());
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }

    fn set(&mut self, key: &Key, raw: &str) -> Result<()> {
        let sim = &mut self.cfg.sim;
        let exp = &mut self.cfg.experiment;
        let j = &mut self.junction;
        let pl = &mut self.pathloss;
        match key.name {
            "slot_ms" => sim.slot = scalar(key, raw)? / 1e3,
            "slots_per_epoch" => sim.slots_per_epoch = count(key, raw)?,
            "epoch_ms" => self.epoch_ms = Some(scalar(key, raw)?),
            "duration_s" => sim.duration = scalar(key, raw)?,
            "phi_deg" => exp.beamwidths_deg = list(key, raw, scalar)?,
            "sector_deg" => {
                let psi = scalar(key, raw)?.to_radians();
                sim.antenna.sector_tx = psi;
                sim.antenna.sector_rx = psi;
            }
            "pilot_us" => sim.antenna.pilot_duration = scalar(key, raw)? / 1e6,
            "sidelobe_gain" => sim.antenna.sidelobe_gain = scalar(key, raw)?,
            "bandwidth_ghz" => sim.radio.bandwidth_hz = scalar(key, raw)? * 1e9,
            "noise_dbm_per_hz" => sim.radio.noise_dbm_per_hz = scalar(key, raw)?,
            "tx_power_dbm" => sim.radio.tx_power_dbm = scalar(key, raw)?,
            "pl_exponent_los" => pl.los_exponent = scalar(key, raw)?,
            "pl_intercept_los_db" => pl.los_intercept = scalar(key, raw)?,
            "pl_exponent_per_blocker" => pl.exponent_step = scalar(key, raw)?,
            "pl_intercept_per_blocker_db" => pl.intercept_step = scalar(key, raw)?,
            "pl_max_blockers" => pl.max_blockers = count(key, raw)?,
            "building_penalty_db" => pl.building_penalty = scalar(key, raw)?,
            "packet_bits" => sim.queue.packet_bits = scalar(key, raw)?,
            "arrival_rate_per_s" => sim.queue.arrival_rate = scalar(key, raw)?,
            "buffer_packets" => sim.queue.buffer = count(key, raw)?,
            "deadline_ms" => sim.queue.deadline = scalar(key, raw)? / 1e3,
            "radii_m" => sim.radii = list(key, raw, scalar)?,
            "thresholds_packets" => sim.thresholds = list(key, raw, |k, s| count(k, s).map(|n| n as u64))?,
            "quota_tx" => sim.matching.quota.per_vtx = count(key, raw)?,
            "quota_rx" => exp.quotas_rx = list(key, raw, count)?,
            "policy" => exp.policies = list(key, raw, |k, s| s.parse().map_err(|e: SimError| cfg_err(k.name, e)))?,
            "omega_d" => sim.matching.policy.weights.rate = scalar(key, raw)?,
            "omega_i" => sim.matching.policy.weights.timeliness = scalar(key, raw)?,
            "omega_e" => sim.matching.policy.weights.extension = scalar(key, raw)?,
            "smoothing" => sim.matching.smoothing = scalar(key, raw)?,
            "proposer" => sim.matching.proposer = choice(key, raw, &[("vtx", Proposer::Vtx), ("vrx", Proposer::Vrx)])?,
            "vtx_resolution" => {
                sim.matching.resolution = choice(
                    key,
                    raw,
                    &[("receiver", ResolutionSide::Receiver), ("transmitter", ResolutionSide::Transmitter)],
                )?
            }
            "exclude_blocked" => {
                sim.matching.exclude_blocked =
                    choice(key, raw, &[("auto", None), ("true", Some(true)), ("false", Some(false))])?
            }
            "alignment_charging" => {
                sim.alignment = choice(
                    key,
                    raw,
                    &[("per_epoch", AlignmentCharging::PerEpoch), ("per_slot", AlignmentCharging::PerSlot)],
                )?
            }
            "interferers" => {
                sim.interference = choice(
                    key,
                    raw,
                    &[("matched", InterferenceSources::Matched), ("all", InterferenceSources::All)],
                )?
            }
            "count_overflow" => sim.count_overflow = flag(key, raw)?,
            "corridor_m" => sim.timeliness.corridor = scalar(key, raw)?,
            "timeliness_step_m" => sim.timeliness.step = scalar(key, raw)?,
            "horizon_m" => sim.timeliness.horizon = scalar(key, raw)?,
            "past_window_m" => sim.past_window = scalar(key, raw)?,
            "sensing_cell_m" => sim.sensing_cell = scalar(key, raw)?,
            "seeds" => {
                exp.seeds = list(key, raw, |k, s| {
                    s.parse().map_err(|_| cfg_err(k.name, format!("expected an unsigned integer, got `{s}`")))
                })?
            }
            "scenario" => {
                let v = raw.trim().to_ascii_lowercase();
                if v != "synthetic" && v != "traces" {
                    return Err(cfg_err(key.name, format!("expected synthetic or traces, got `{raw}`")));
                }
                self.paths.scenario = Some(v);
            }
            "trace_file" => self.paths.trace = Some(self.path(raw)),
            "route_file" => self.paths.routes = Some(self.path(raw)),
            "buildings_file" => self.paths.buildings = Some(self.path(raw)),
            "junction_n_tx" => j.n_tx = count(key, raw)?,
            "junction_n_rx" => j.n_rx = count(key, raw)?,
            "junction_arm_m" => j.arm_length = scalar(key, raw)?,
            "junction_signal_period_s" => {
                let p = scalar(key, raw)?;
                j.signal_period = (p > 0.0).then_some(p);
            }
            "junction_min_speed_mps" => j.min_speed = scalar(key, raw)?,
            "junction_max_speed_mps" => j.max_speed = scalar(key, raw)?,
            "junction_respawn" => j.respawn = flag(key, raw)?,
            other => unreachable!("key table and setter out of sync: {other}"),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Config> {
        let sim = &mut self.cfg.sim;
        sim.radio.slot = sim.slot;
        sim.pathloss = self.pathloss.build();
        if let Some(ms) = self.epoch_ms {
            let want = sim.epoch_duration() * 1e3;
            if (ms - want).abs() > 1e-9 * want.max(1.0) {
                return Err(cfg_err(
                    "epoch_ms",
                    format!("must equal slot_ms * slots_per_epoch = {want} ms, got {ms}"),
                ));
            }
        }
        self.junction.slot = sim.slot;
        self.junction.duration = sim.duration;
        self.junction.quality_levels = sim.radii.len();

        let scenario = self.paths.scenario.as_deref().unwrap_or(if self.paths.trace.is_some() {
            "traces"
        } else {
            "synthetic"
        });
        self.cfg.experiment.scenario = match scenario {
            "traces" => ScenarioSource::Traces {
                trace: self
                    .paths
                    .trace
                    .ok_or_else(|| cfg_err("trace_file", "required when scenario = traces"))?,
                routes: self.paths.routes,
                buildings: self.paths.buildings,
            },
            _ => {
                if self.paths.trace.is_some() || self.paths.routes.is_some() || self.paths.buildings.is_some() {
                    return Err(cfg_err("scenario", "trace, route and buildings files need scenario = traces"));
                }
                ScenarioSource::Synthetic(self.junction)
            }
        };
        self.cfg.validate()?;
        Ok(self.cfg)
    }
}

impl Config {
    /// Checks every constraint that does not need the file system.
    pub fn validate(&self) -> Result<()> {
        let mut sim = self.sim.clone();
        for &phi in &self.experiment.beamwidths_deg {
            sim.set_beamwidth(phi.to_radians());
            sim.antenna
                .validate()
                .map_err(|e| cfg_err("phi_deg", format!("{phi}°: {e}")))?;
        }
        for &q in &self.experiment.quotas_rx {
            sim.matching.quota.per_vrx = q;
            sim.matching.quota.validate().map_err(|e| cfg_err("quota_rx", e))?;
        }
        self.sim.validate()?;
        self.experiment.validate()?;
        if let ScenarioSource::Synthetic(j) = &self.experiment.scenario {
            j.validate()?;
        }
        Ok(())
    }
}

/// Parses configuration text; relative file names resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<Config> {
    let mut b = Builder::new(base_dir);
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let n = n + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((name, value)) = line.split_once('=') else {
            return Err(SimError::parse("config", n, format!("expected `key = value`, got `{line}`")));
        };
        let name = name.trim();
        let Some(key) = lookup(name) else {
            return Err(match unit_mismatch(name) {
                Some(k) => SimError::parse(
                    "config",
                    n,
                    format!("unit mismatch: key `{name}` should be `{}` (value in {})", k.name, k.unit),
                ),
                None => SimError::parse("config", n, format!("unknown key `{name}`")),
            });
        };
        if let Some(first) = seen.insert(key.name, n) {
            return Err(SimError::parse(
                "config",
                n,
                format!("duplicate key `{name}` (first set on line {first})"),
            ));
        }
        b.set(key, value).map_err(|e| match e {
            SimError::Config(m) => SimError::parse("config", n, m),
            other => other,
        })?;
    }
    b.finish()
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, dir).map_err(|e| match e {
        SimError::Parse { line, message, .. } => SimError::Parse {
            source_name: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

/// Shortest decimal form after rounding to nine places.
fn short(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn value_of(cfg: &Config, j: &JunctionConfig, name: &str) -> String {
    let sim = &cfg.sim;
    let exp = &cfg.experiment;
    let pl = PathlossKnobs::from_params(&sim.pathloss);
    let m = &sim.matching;
    match name {
        "slot_ms" => short(sim.slot * 1e3),
        "slots_per_epoch" => sim.slots_per_epoch.to_string(),
        "epoch_ms" => short(sim.epoch_duration() * 1e3),
        "duration_s" => sim.duration.to_string(),
        "phi_deg" => fmt_list(&exp.beamwidths_deg),
        "sector_deg" => short(sim.antenna.sector_tx.to_degrees()),
        "pilot_us" => short(sim.antenna.pilot_duration * 1e6),
        "sidelobe_gain" => sim.antenna.sidelobe_gain.to_string(),
        "bandwidth_ghz" => short(sim.radio.bandwidth_hz / 1e9),
        "noise_dbm_per_hz" => sim.radio.noise_dbm_per_hz.to_string(),
        "tx_power_dbm" => sim.radio.tx_power_dbm.to_string(),
        "pl_exponent_los" => pl.los_exponent.to_string(),
        "pl_intercept_los_db" => pl.los_intercept.to_string(),
        "pl_exponent_per_blocker" => short(pl.exponent_step),
        "pl_intercept_per_blocker_db" => short(pl.intercept_step),
        "pl_max_blockers" => pl.max_blockers.to_string(),
        "building_penalty_db" => pl.building_penalty.to_string(),
        "packet_bits" => sim.queue.packet_bits.to_string(),
        "arrival_rate_per_s" => sim.queue.arrival_rate.to_string(),
        "buffer_packets" => sim.queue.buffer.to_string(),
        "deadline_ms" => short(sim.queue.deadline * 1e3),
        "radii_m" => fmt_list(&sim.radii),
        "thresholds_packets" => fmt_list(&sim.thresholds),
        "quota_tx" => m.quota.per_vtx.to_string(),
        "quota_rx" => fmt_list(&exp.quotas_rx),
        "policy" => fmt_list(&exp.policies),
        "omega_d" => m.policy.weights.rate.to_string(),
        "omega_i" => m.policy.weights.timeliness.to_string(),
        "omega_e" => m.policy.weights.extension.to_string(),
        "smoothing" => m.smoothing.to_string(),
        "proposer" => match m.proposer {
            Proposer::Vtx => "vtx",
            Proposer::Vrx => "vrx",
        }
        .into(),
        "vtx_resolution" => match m.resolution {
            ResolutionSide::Receiver => "receiver",
            ResolutionSide::Transmitter => "transmitter",
        }
        .into(),
        "exclude_blocked" => match m.exclude_blocked {
            None => "auto",
            Some(true) => "true",
            Some(false) => "false",
        }
        .into(),
        "alignment_charging" => match sim.alignment {
            AlignmentCharging::PerEpoch => "per_epoch",
            AlignmentCharging::PerSlot => "per_slot",
        }
        .into(),
        "interferers" => match sim.interference {
            InterferenceSources::Matched => "matched",
            InterferenceSources::All => "all",
        }
        .into(),
        "count_overflow" => sim.count_overflow.to_string(),
        "corridor_m" => sim.timeliness.corridor.to_string(),
        "timeliness_step_m" => sim.timeliness.step.to_string(),
        "horizon_m" => sim.timeliness.horizon.to_string(),
        "past_window_m" => sim.past_window.to_string(),
        "sensing_cell_m" => sim.sensing_cell.to_string(),
        "seeds" => fmt_list(&exp.seeds),
        "scenario" => "synthetic".into(),
        "junction_n_tx" => j.n_tx.to_string(),
        "junction_n_rx" => j.n_rx.to_string(),
        "junction_arm_m" => j.arm_length.to_string(),
        "junction_signal_period_s" => j.signal_period.unwrap_or(0.0).to_string(),
        "junction_min_speed_mps" => j.min_speed.to_string(),
        "junction_max_speed_mps" => j.max_speed.to_string(),
        "junction_respawn" => j.respawn.to_string(),
        _ => String::new(),
    }
}

/// Default configuration as a documented config file. Parsing it back gives
/// the defaults.
pub fn defaults_text() -> String {
    let cfg = Config::default();
    let j = JunctionConfig::default();
    let mut out = String::from("# ctxmatch configuration; every key is optional\n");
    for k in KEYS {
        let unit = if k.unit.is_empty() { String::new() } else { format!(" [{}]", k.unit) };
        let _ = writeln!(out, "\n# {}{unit}", k.help);
        let v = value_of(&cfg, &j, k.name);
        if v.is_empty() {
            let _ = writeln!(out, "# {} =", k.name);
        } else {
            let _ = writeln!(out, "{} = {v}", k.name);
        }
    }
    out
}

/// Names of every accepted key.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.name)
}
