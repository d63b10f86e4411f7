//! Sweeps over policies, beamwidths, receiver quotas and seeds: one output
//! directory of CSVs per run plus a cross-run `summary.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matching::Policy;
use crate::mobility::{load_traces, synth_junction, JunctionConfig, Scenario};
use crate::queueing::{Outcome, QueueCounters};
use crate::simulator::{aggregate_cdf, link_key, run, RunMetrics, SimConfig};
use crate::{Result, SimError};

/// Probabilities reported for every distribution.
pub const QUANTILE_GRID: [f64; 3] = [0.5, 0.8, 0.9];

/// Delivered packets faster than this count as low latency, seconds.
pub const FAST_DELAY: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    /// Generated four-arm junction; the run seed also seeds the traffic.
    Synthetic(JunctionConfig),
    /// Recorded traces, shared by every seed.
    Traces {
        trace: PathBuf,
        routes: Option<PathBuf>,
        buildings: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSource,
    pub policies: Vec<Policy>,
    pub beamwidths_deg: Vec<f64>,
    pub quotas_rx: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            scenario: ScenarioSource::Synthetic(JunctionConfig::default()),
            policies: Policy::ALL.to_vec(),
            beamwidths_deg: vec![5.0, 15.0, 45.0],
            quotas_rx: vec![1, 3],
            seeds: vec![0],
            out: PathBuf::from("out"),
        }
    }
}

fn no_duplicates<T: PartialEq + std::fmt::Debug>(name: &str, xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        return Err(SimError::Config(format!("`{name}`: sweep list is empty")));
    }
    for (i, x) in xs.iter().enumerate() {
        if xs[..i].contains(x) {
            return Err(SimError::Config(format!("`{name}`: {x:?} listed twice")));
        }
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        no_duplicates("policy", &self.policies)?;
        no_duplicates("phi_deg", &self.beamwidths_deg)?;
        no_duplicates("quota_rx", &self.quotas_rx)?;
        no_duplicates("seeds", &self.seeds)
    }

    /// Beamwidth sweep in radians.
    pub fn beamwidths(&self) -> Vec<f64> {
        self.beamwidths_deg.iter().map(|d| d.to_radians()).collect()
    }

    /// Cartesian product of the sweeps, policy-major, seed-minor.
    pub fn runs(&self) -> Vec<RunSpec> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &phi_deg in &self.beamwidths_deg {
                for &quota_rx in &self.quotas_rx {
                    for &seed in &self.seeds {
                        out.push(RunSpec {
                            policy,
                            phi_deg,
                            quota_rx,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub policy: Policy,
    pub phi_deg: f64,
    pub quota_rx: usize,
    pub seed: u64,
}

impl RunSpec {
    /// Directory name of the run.
    pub fn id(&self) -> String {
        format!("{}_phi{}_q{}_seed{}", self.policy, self.phi_deg, self.quota_rx, self.seed)
    }

    pub fn configure(&self, base: &SimConfig) -> SimConfig {
        let mut cfg = base.clone();
        cfg.set_beamwidth(self.phi_deg.to_radians());
        cfg.matching.policy.policy = self.policy;
        cfg.matching.quota.per_vrx = self.quota_rx;
        cfg.seed = self.seed;
        cfg
    }
}

/// Sample count and quantiles keyed `p50`, `p80`, `p90`; no quantiles when
/// there are no samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    pub count: usize,
    pub quantiles: BTreeMap<String, f64>,
}

impl Dist {
    pub fn of(samples: &[f64]) -> Dist {
        match aggregate_cdf(samples, &QUANTILE_GRID) {
            None => Dist {
                count: 0,
                quantiles: BTreeMap::new(),
            },
            Some(t) => Dist {
                count: t.count,
                quantiles: t.quantiles.into_iter().map(|(p, v)| (quantile_key(p), v)).collect(),
            },
        }
    }

    pub fn at(&self, p: f64) -> Option<f64> {
        self.quantiles.get(&quantile_key(p)).copied()
    }
}

pub fn quantile_key(p: f64) -> String {
    format!("p{}", (p * 100.0).round())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn fraction_below(xs: &[f64], limit: f64) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().filter(|&&x| x < limit).count() as f64 / xs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub policy: Policy,
    pub phi_deg: f64,
    pub quota_rx: usize,
    pub seed: u64,
    pub epochs: usize,
    /// Matched links summed over epochs.
    pub link_epochs: usize,
    /// Per-slot ESI of matched receivers, bits, zeros excluded.
    pub esi_nonzero: Dist,
    /// Per-slot ESI of matched receivers, bits, zeros included.
    pub esi_all: Dist,
    pub esi_mean: Option<f64>,
    /// Delay of delivered packets, seconds.
    pub delay: Dist,
    pub fast_fraction: Option<f64>,
    /// Mean over epochs of delivered / (delivered + drops).
    pub success_mean: Option<f64>,
    /// Mean per-link, per-epoch drop probability.
    pub p_drop_mean: Option<f64>,
    pub queue: QueueCounters,
    pub in_buffer: u64,
    /// Arrivals equal deliveries, drops, teardown discards and leftovers on every link.
    pub conserved: bool,
}

/// Seeds pooled per (policy, beamwidth, quota).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub policy: Policy,
    pub phi_deg: f64,
    pub quota_rx: usize,
    pub seeds: Vec<u64>,
    pub esi_nonzero: Dist,
    pub esi_all: Dist,
    pub esi_mean: Option<f64>,
    pub delay: Dist,
    pub fast_fraction: Option<f64>,
    pub success_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub quantile_grid: Vec<f64>,
    pub fast_delay_s: f64,
    pub runs: Vec<RunSummary>,
    pub groups: Vec<GroupSummary>,
    pub failed: Vec<FailedRun>,
}

impl Summary {
    pub fn group(&self, policy: Policy, phi_deg: f64, quota_rx: usize) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.policy == policy && g.phi_deg == phi_deg && g.quota_rx == quota_rx)
    }

    pub fn is_success(&self) -> bool {
        self.failed.is_empty()
    }
}

struct Samples {
    esi_nonzero: Vec<f64>,
    esi_all: Vec<f64>,
    delays: Vec<f64>,
    success: Vec<f64>,
}

fn summarize(spec: &RunSpec, m: &RunMetrics, count_overflow: bool) -> (RunSummary, Samples) {
    let esi_all: Vec<f64> = m.slots.iter().flat_map(|s| s.esi.iter().map(|(_, v)| *v)).collect();
    let esi_nonzero = m.nonzero_esi();
    let delays = m.delivered_delays();
    let success = m.epoch_success(count_overflow);
    let p_drops: Vec<f64> = m.epochs.iter().flat_map(|e| e.links.iter().map(|l| l.p_drop)).collect();

    let mut queue = QueueCounters::default();
    let mut conserved = true;
    for (key, c) in &m.counters {
        queue.add(c);
        let left = m.in_buffer.get(key).copied().unwrap_or(0);
        conserved &= c.arrivals == c.delivered + c.deadline_drops + c.overflow_drops + c.discarded + left;
    }
    let summary = RunSummary {
        id: spec.id(),
        policy: spec.policy,
        phi_deg: spec.phi_deg,
        quota_rx: spec.quota_rx,
        seed: spec.seed,
        epochs: m.epochs.len(),
        link_epochs: m.epochs.iter().map(|e| e.matching.len()).sum(),
        esi_nonzero: Dist::of(&esi_nonzero),
        esi_all: Dist::of(&esi_all),
        esi_mean: mean(&esi_all),
        delay: Dist::of(&delays),
        fast_fraction: fraction_below(&delays, FAST_DELAY),
        success_mean: mean(&success),
        p_drop_mean: mean(&p_drops),
        queue,
        in_buffer: m.in_buffer.values().sum(),
        conserved,
    };
    let samples = Samples {
        esi_nonzero,
        esi_all,
        delays,
        success,
    };
    (summary, samples)
}

#[derive(Clone, Copy)]
enum Col {
    Index,
    Float,
    /// Float in [0, 1].
    Prob,
    /// Float or empty.
    OptFloat,
    Text,
    Outcome,
    Policy,
}

struct CsvSchema {
    name: &'static str,
    columns: &'static [(&'static str, Col)],
}

const ESI_CSV: CsvSchema = CsvSchema {
    name: "esi.csv",
    columns: &[("epoch", Col::Index), ("slot", Col::Index), ("vrx_id", Col::Text), ("esi_bits", Col::Float)],
};
const DELAY_CSV: CsvSchema = CsvSchema {
    name: "delay.csv",
    columns: &[
        ("epoch", Col::Index),
        ("time_s", Col::Float),
        ("vtx_id", Col::Text),
        ("vrx_id", Col::Text),
        ("outcome", Col::Outcome),
        ("delay_s", Col::OptFloat),
    ],
};
const DROPS_CSV: CsvSchema = CsvSchema {
    name: "drops.csv",
    columns: &[("epoch", Col::Index), ("link", Col::Text), ("p_drop", Col::Prob)],
};
const MATCHING_CSV: CsvSchema = CsvSchema {
    name: "matching.csv",
    columns: &[("epoch", Col::Index), ("vtx_id", Col::Text), ("vrx_id", Col::Text), ("policy", Col::Policy)],
};

/// Every file a run directory holds.
pub const RUN_FILES: [&str; 4] = [ESI_CSV.name, DELAY_CSV.name, DROPS_CSV.name, MATCHING_CSV.name];

impl CsvSchema {
    fn header(&self) -> String {
        self.columns.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(",")
    }

    fn check_field(col: Col, v: &str) -> bool {
        let float = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0);
        match col {
            Col::Index => v.parse::<u64>().is_ok(),
            Col::Float => float(v).is_some(),
            Col::Prob => float(v).is_some_and(|x| x <= 1.0),
            Col::OptFloat => v.is_empty() || float(v).is_some(),
            Col::Text => !v.is_empty() && !v.contains([',', '"', '\n']),
            Col::Outcome => [Outcome::Delivered, Outcome::DroppedDeadline, Outcome::DroppedOverflow]
                .iter()
                .any(|o| o.as_str() == v),
            Col::Policy => v.parse::<Policy>().is_ok(),
        }
    }

    /// Checks the header, the field count and every field of `path`.
    fn validate(&self, path: &Path) -> Result<usize> {
        let bad = |line: usize, msg: String| SimError::parse(&path.display().to_string(), line, msg);
        let mut lines = BufReader::new(File::open(path)?).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header != self.header() {
            return Err(bad(1, format!("header `{header}` != `{}`", self.header())));
        }
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != self.columns.len() {
                return Err(bad(i + 2, format!("{} fields, expected {}", fields.len(), self.columns.len())));
            }
            for (v, (name, col)) in fields.iter().zip(self.columns) {
                if !Self::check_field(*col, v) {
                    return Err(bad(i + 2, format!("bad `{name}` value `{v}`")));
                }
            }
            rows += 1;
        }
        Ok(rows)
    }
}

fn write_csv(path: &Path, schema: &CsvSchema, rows: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", schema.header())?;
    rows(&mut w)?;
    w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

/// Writes the four CSVs of one run into `dir`.
pub fn write_run(dir: &Path, m: &RunMetrics, policy: Policy) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join(ESI_CSV.name), &ESI_CSV, |w| {
        for s in &m.slots {
            for (id, v) in &s.esi {
                writeln!(w, "{},{},{id},{v}", s.epoch, s.slot)?;
            }
        }
        Ok(())
    })?;
    write_csv(&dir.join(DELAY_CSV.name), &DELAY_CSV, |w| {
        for r in &m.records {
            let delay = r.delay.map(|d| d.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{delay}", r.epoch, r.time, r.vtx, r.vrx, r.outcome.as_str())?;
        }
        Ok(())
    })?;
    write_csv(&dir.join(DROPS_CSV.name), &DROPS_CSV, |w| {
        for e in &m.epochs {
            for l in &e.links {
                writeln!(w, "{},{},{}", e.epoch, link_key(&l.vtx, &l.vrx), l.p_drop)?;
            }
        }
        Ok(())
    })?;
    write_csv(&dir.join(MATCHING_CSV.name), &MATCHING_CSV, |w| {
        for e in &m.epochs {
            for (n, k) in &e.matching.pairs {
                writeln!(w, "{},{n},{k},{policy}", e.epoch)?;
            }
        }
        Ok(())
    })
}

/// Validates every CSV of a run directory against its schema.
pub fn validate_run_dir(dir: &Path) -> Result<()> {
    for schema in [&ESI_CSV, &DELAY_CSV, &DROPS_CSV, &MATCHING_CSV] {
        schema.validate(&dir.join(schema.name))?;
    }
    Ok(())
}

/// Reads `summary.json` back and checks its structure.
pub fn validate_summary(path: &Path) -> Result<Summary> {
    let s: Summary = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let dists = s
        .runs
        .iter()
        .flat_map(|r| [&r.esi_nonzero, &r.esi_all, &r.delay])
        .chain(s.groups.iter().flat_map(|g| [&g.esi_nonzero, &g.esi_all, &g.delay]));
    for d in dists {
        let want = if d.count == 0 { 0 } else { QUANTILE_GRID.len() };
        if d.quantiles.len() != want || QUANTILE_GRID.iter().any(|&p| d.count > 0 && d.at(p).is_none()) {
            return Err(SimError::Config(format!("{}: malformed quantile table", path.display())));
        }
    }
    Ok(s)
}

fn load_scenario(source: &ScenarioSource, seed: u64, base: &SimConfig) -> Result<Scenario> {
    match source {
        ScenarioSource::Synthetic(j) => {
            let (frames, map) = synth_junction(j, seed)?;
            Scenario::new(frames, map, base.slot)
        }
        ScenarioSource::Traces {
            trace,
            routes,
            buildings,
        } => load_traces(trace, routes.as_deref(), buildings.as_deref(), base.slot, base.quality_levels()),
    }
}

fn execute(spec: &RunSpec, scenario: &Scenario, base: &SimConfig, out: &Path) -> Result<(RunSummary, Samples)> {
    let cfg = spec.configure(base);
    let metrics = run(scenario, &cfg)?;
    let dir = out.join(spec.id());
    write_run(&dir, &metrics, spec.policy)?;
    validate_run_dir(&dir)?;
    Ok(summarize(spec, &metrics, cfg.count_overflow))
}

/// Runs the full sweep, writing one directory per run and `summary.json`
/// under `spec.out`. Individual run failures are listed in the summary;
/// setup and summary write errors are returned.
pub fn run_experiment(spec: &ExperimentSpec, base: &SimConfig) -> Result<Summary> {
    spec.validate()?;
    base.validate()?;
    fs::create_dir_all(&spec.out)?;
    let runs = spec.runs();

    // traces are loaded once; synthetic traffic depends on the seed
    let shared = match &spec.scenario {
        ScenarioSource::Traces { .. } => Some(Arc::new(load_scenario(&spec.scenario, 0, base)?)),
        ScenarioSource::Synthetic(j) => {
            j.validate()?;
            None
        }
    };

    let per_seed: Vec<Vec<(usize, Result<(RunSummary, Samples)>)>> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let mine: Vec<usize> = (0..runs.len()).filter(|&i| runs[i].seed == seed).collect();
            let scenario = match &shared {
                Some(s) => Ok(s.clone()),
                None => load_scenario(&spec.scenario, seed, base).map(Arc::new),
            };
            match scenario {
                Err(e) => {
                    let msg = e.to_string();
                    mine.into_iter()
                        .map(|i| (i, Err(SimError::Config(format!("scenario: {msg}")))))
                        .collect()
                }
                Ok(scenario) => mine
                    .into_par_iter()
                    .map(|i| (i, execute(&runs[i], &scenario, base, &spec.out)))
                    .collect(),
            }
        })
        .collect();

    let mut results: Vec<(usize, Result<(RunSummary, Samples)>)> = per_seed.into_iter().flatten().collect();
    results.sort_by_key(|(i, _)| *i);

    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    let mut pooled: BTreeMap<(usize, usize, usize), (Vec<u64>, Vec<Samples>)> = BTreeMap::new();
    for (i, res) in results {
        let r = &runs[i];
        match res {
            Ok((summary, samples)) => {
                let key = group_key(spec, r);
                let g = pooled.entry(key).or_default();
                g.0.push(r.seed);
                g.1.push(samples);
                summaries.push(summary);
            }
            Err(e) => failed.push(FailedRun {
                id: r.id(),
                error: e.to_string(),
            }),
        }
    }

    let groups = pooled
        .into_iter()
        .map(|((p, f, q), (seeds, samples))| {
            let cat = |get: fn(&Samples) -> &Vec<f64>| samples.iter().flat_map(|s| get(s).iter().copied()).collect::<Vec<_>>();
            let esi_all = cat(|s| &s.esi_all);
            let delays = cat(|s| &s.delays);
            GroupSummary {
                policy: spec.policies[p],
                phi_deg: spec.beamwidths_deg[f],
                quota_rx: spec.quotas_rx[q],
                seeds,
                esi_nonzero: Dist::of(&cat(|s| &s.esi_nonzero)),
                esi_all: Dist::of(&esi_all),
                esi_mean: mean(&esi_all),
                delay: Dist::of(&delays),
                fast_fraction: fraction_below(&delays, FAST_DELAY),
                success_mean: mean(&cat(|s| &s.success)),
            }
        })
        .collect();

    let summary = Summary {
        quantile_grid: QUANTILE_GRID.to_vec(),
        fast_delay_s: FAST_DELAY,
        runs: summaries,
        groups,
        failed,
    };
    let path = spec.out.join("summary.json");
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text)?;
    validate_summary(&path)?;
    Ok(summary)
}

fn group_key(spec: &ExperimentSpec, r: &RunSpec) -> (usize, usize, usize) {
    let pos = |ok: &dyn Fn(usize) -> bool, n: usize| (0..n).find(|&i| ok(i)).unwrap_or(n);
    (
        pos(&|i| spec.policies[i] == r.policy, spec.policies.len()),
        pos(&|i| spec.beamwidths_deg[i] == r.phi_deg, spec.beamwidths_deg.len()),
        pos(&|i| spec.quotas_rx[i] == r.quota_rx, spec.quotas_rx.len()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (ExperimentSpec, SimConfig) {
        let j = JunctionConfig {
            n_tx: 4,
            n_rx: 3,
            duration: 1.0,
            ..JunctionConfig::default()
        };
        let spec = ExperimentSpec {
            scenario: ScenarioSource::Synthetic(j),
            policies: vec![Policy::ContextAware],
            beamwidths_deg: vec![15.0],
            quotas_rx: vec![1],
            seeds: vec![3],
            out: PathBuf::new(),
        };
        let sim = SimConfig {
            duration: 1.0,
            ..SimConfig::default()
        };
        (spec, sim)
    }

    #[test]
    fn run_ids_and_product() {
        let spec = ExperimentSpec {
            seeds: vec![0, 1],
            ..ExperimentSpec::default()
        };
        let runs = spec.runs();
        assert_eq!(runs.len(), 3 * 3 * 2 * 2);
        assert_eq!(runs[0].id(), "MINDist_phi5_q1_seed0");
        assert_eq!(runs.last().unwrap().id(), "CONTEXTaware_phi45_q3_seed1");
        let cfg = runs[5].configure(&SimConfig::default());
        assert_eq!(cfg.seed, runs[5].seed);
        assert_eq!(cfg.matching.quota.per_vrx, runs[5].quota_rx);
        assert!((cfg.antenna.beamwidth_rx - runs[5].phi_deg.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn sweep_lists_must_be_non_empty_and_distinct() {
        let mut spec = ExperimentSpec::default();
        spec.seeds.clear();
        assert!(spec.validate().unwrap_err().to_string().contains("seeds"));
        spec.seeds = vec![1, 1];
        assert!(spec.validate().unwrap_err().to_string().contains("twice"));
    }

    #[test]
    fn dist_keys_follow_grid() {
        let d = Dist::of(&(1..=100).map(f64::from).collect::<Vec<_>>());
        assert_eq!(d.count, 100);
        assert_eq!(d.at(0.5), Some(50.5));
        assert_eq!(d.quantiles.keys().collect::<Vec<_>>(), ["p50", "p80", "p90"]);
        assert_eq!(Dist::of(&[]).quantiles.len(), 0);
    }

    #[test]
    fn one_run_writes_four_csvs_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let (mut spec, sim) = tiny();
        spec.out = dir.path().to_path_buf();
        let s = run_experiment(&spec, &sim).unwrap();
        assert!(s.is_success());
        let run_dir = dir.path().join("CONTEXTaware_phi15_q1_seed3");
        for f in RUN_FILES {
            assert!(run_dir.join(f).is_file(), "{f}");
        }
        assert_eq!(s.runs.len(), 1);
        assert!(s.runs[0].conserved);
        assert_eq!(s.groups[0].seeds, [3]);
        assert_eq!(validate_summary(&dir.path().join("summary.json")).unwrap(), s);
    }

    #[test]
    fn corrupt_csv_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let (mut spec, sim) = tiny();
        spec.out = dir.path().to_path_buf();
        run_experiment(&spec, &sim).unwrap();
        let run_dir = dir.path().join("CONTEXTaware_phi15_q1_seed3");
        validate_run_dir(&run_dir).unwrap();
        fs::write(run_dir.join("drops.csv"), "epoch,link,p_drop\n0,a->b,1.5\n").unwrap();
        assert!(validate_run_dir(&run_dir).unwrap_err().to_string().contains("p_drop"));
    }

    #[test]
    fn missing_trace_file_is_a_setup_error() {
        let dir = tempfile::tempdir().unwrap();
        let (mut spec, sim) = tiny();
        spec.out = dir.path().to_path_buf();
        spec.scenario = ScenarioSource::Traces {
            trace: dir.path().join("missing.csv"),
            routes: None,
            buildings: None,
        };
        assert!(run_experiment(&spec, &sim).is_err());
    }

    #[test]
    fn failing_runs_are_listed_and_summary_still_written() {
        let dir = tempfile::tempdir().unwrap();
        let (mut spec, mut sim) = tiny();
        spec.out = dir.path().to_path_buf();
        spec.seeds = vec![1, 2];
        // vehicles carry quality levels up to 4 but only two radii exist
        sim.radii = vec![5.0, 10.0];
        sim.thresholds = vec![1, 2];
        let s = run_experiment(&spec, &sim).unwrap();
        assert!(!s.is_success());
        assert_eq!(s.failed.len(), 2);
        assert_eq!(s.failed[0].id, "CONTEXTaware_phi15_q1_seed1");
        assert!(dir.path().join("summary.json").is_file());
    }
}
