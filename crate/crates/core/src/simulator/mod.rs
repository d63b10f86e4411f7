//! Epoch/slot loop: snapshot, matching, beam fixing, interference-coupled
//! slot rates, per-link queues and metric collection.

mod stats;

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    alignment_delay, antenna_gain, channel_gain, ideal_rate, path_gain, sinr, AntennaConfig, LinkGeometry,
    PathGain, PathlossParams, RadioConfig,
};
use crate::error::{Result, SimError};
use crate::geometry::{
    count_blockers, route_timeliness, segment_blocked_by_building, wrap_angle, Route, SensingGrid, TimelinessParams,
    Vec2,
};
use crate::matching::{
    build_preferences, deferred_acceptance, estimate_rates, Matching, MatchingConfig, Pair, PairContext, Policy,
    RateEstimator,
};
use crate::mobility::{Role, Scenario, VehicleId, VehicleState};
use crate::queueing::{advance, arrival_times, DeliveryRecord, Outcome, QueueConfig, QueueCounters, QueueState, SlotService};

pub use stats::{achieved_quality, aggregate_cdf, quantile, QuantileTable};

/// How the beam-search time is taken out of the link's airtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentCharging {
    /// Once per epoch, from the start of the epoch, spilling over slots.
    PerEpoch,
    /// At the start of every slot.
    PerSlot,
}

/// Which transmitters contribute interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceSources {
    /// Only transmitters serving a matched link in the slot.
    Matched,
    /// Unmatched transmitters also radiate, isotropically.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Transmission slot, seconds.
    pub slot: f64,
    pub slots_per_epoch: usize,
    pub duration: f64,
    pub antenna: AntennaConfig,
    pub matching: MatchingConfig,
    pub radio: RadioConfig,
    pub pathloss: PathlossParams,
    pub queue: QueueConfig,
    /// Sensing radius per quality level, meters, ascending.
    pub radii: Vec<f64>,
    /// Packets per epoch needed for each quality level.
    pub thresholds: Vec<u64>,
    pub seed: u64,
    pub alignment: AlignmentCharging,
    pub interference: InterferenceSources,
    /// Count overflow drops in the drop probability.
    pub count_overflow: bool,
    pub timeliness: TimelinessParams,
    /// Length of transmitter past trace used for timeliness, meters.
    pub past_window: f64,
    /// Raster cell for the sensing extension, meters.
    pub sensing_cell: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            slot: 2e-3,
            slots_per_epoch: 50,
            duration: 30.0,
            antenna: AntennaConfig::default(),
            matching: MatchingConfig::default(),
            radio: RadioConfig::default(),
            pathloss: PathlossParams::default(),
            queue: QueueConfig::default(),
            radii: vec![5.0, 10.0, 15.0, 20.0],
            thresholds: vec![1, 2, 3, 4],
            seed: 0,
            alignment: AlignmentCharging::PerEpoch,
            interference: InterferenceSources::Matched,
            count_overflow: true,
            timeliness: TimelinessParams::default(),
            past_window: 100.0,
            sensing_cell: 0.5,
        }
    }
}

impl SimConfig {
    pub fn epoch_duration(&self) -> f64 {
        self.slot * self.slots_per_epoch as f64
    }

    /// Same beamwidth on both ends of every link.
    pub fn set_beamwidth(&mut self, phi: f64) {
        self.antenna.beamwidth_tx = phi;
        self.antenna.beamwidth_rx = phi;
    }

    pub fn quality_levels(&self) -> usize {
        self.radii.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.slot > 0.0 && self.slot.is_finite()) {
            return bad(format!("slot must be > 0, got {}", self.slot));
        }
        if self.slots_per_epoch == 0 {
            return bad("slots_per_epoch must be >= 1".into());
        }
        if !(self.duration >= 0.0) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        if (self.radio.slot - self.slot).abs() > 1e-12 {
            return bad(format!("radio slot {} differs from slot {}", self.radio.slot, self.slot));
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) || self.radii.windows(2).any(|w| w[0] > w[1]) {
            return bad(format!("radii must be positive and ascending, got {:?}", self.radii));
        }
        if self.thresholds.len() != self.radii.len() || self.thresholds.windows(2).any(|w| w[0] > w[1]) {
            return bad(format!(
                "thresholds must be non-decreasing with one per quality level, got {:?}",
                self.thresholds
            ));
        }
        if !(self.sensing_cell > 0.0 && self.past_window > 0.0) {
            return bad("sensing_cell and past_window must be > 0".into());
        }
        let t = &self.timeliness;
        if !(t.corridor >= 0.0 && t.step > 0.0 && t.horizon > 0.0) {
            return bad("timeliness corridor >= 0, step > 0 and horizon > 0 required".into());
        }
        self.antenna.validate().map_err(SimError::Config)?;
        self.pathloss.validate().map_err(SimError::Config)?;
        self.queue.validate().map_err(SimError::Config)?;
        self.matching.validate()
    }
}

/// Context of one matched link, fixed for its epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFactors {
    pub timeliness: f64,
    pub extension: f64,
    pub quality_vtx: usize,
}

/// Bits of context-weighted sensing data one link carries in a slot.
pub fn link_esi(f: &LinkFactors, rate: f64, radii: &[f64], slot: f64) -> f64 {
    let r = radii[f.quality_vtx - 1] / radii[radii.len() - 1];
    f.timeliness * f.extension * r * r * rate * slot
}

/// Extended sensed information per matched receiver for one slot.
pub fn esi(
    matching: &Matching,
    factors: &HashMap<Pair, LinkFactors>,
    rates: &HashMap<Pair, f64>,
    cfg: &SimConfig,
) -> BTreeMap<VehicleId, f64> {
    let mut out = BTreeMap::new();
    for pair in &matching.pairs {
        let (Some(f), Some(&r)) = (factors.get(pair), rates.get(pair)) else {
            continue;
        };
        *out.entry(pair.1.clone()).or_insert(0.0) += link_esi(f, r, &cfg.radii, cfg.slot);
    }
    out
}

/// Beams, alignment budget and context of every link in one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEpoch {
    pub epoch: usize,
    pub time: f64,
    pub matching: Matching,
    pub links: Vec<LinkEpoch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEpoch {
    pub vtx: VehicleId,
    pub vrx: VehicleId,
    /// Boresights relative to each vehicle's heading, radians.
    pub boresight_tx: f64,
    pub boresight_rx: f64,
    pub alignment: f64,
    pub factors: LinkFactors,
    pub arrivals: u64,
    pub delivered: u64,
    pub deadline_drops: u64,
    pub overflow_drops: u64,
    pub p_drop: f64,
    pub achieved_quality: usize,
    /// Mean Shannon rate over the slots the link transmitted, bits/s.
    pub mean_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSlot {
    /// Index into the epoch's link list.
    pub link: usize,
    pub sinr: f64,
    /// Slot rate after alignment overhead, bits/s.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub epoch: usize,
    pub slot: usize,
    pub time: f64,
    pub esi: Vec<(VehicleId, f64)>,
    pub links: Vec<LinkSlot>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub epochs: Vec<ScheduleEpoch>,
    pub slots: Vec<SlotMetrics>,
    pub records: Vec<DeliveryRecord>,
    /// Queue counters per link over the whole run.
    pub counters: BTreeMap<String, QueueCounters>,
    /// Packets still buffered at the end of the run.
    pub in_buffer: BTreeMap<String, u64>,
}

impl RunMetrics {
    /// Per-slot ESI values of matched receivers that are strictly positive.
    pub fn nonzero_esi(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|s| s.esi.iter().map(|(_, v)| *v))
            .filter(|v| *v > 0.0)
            .collect()
    }

    pub fn delivered_delays(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.delay).collect()
    }

    /// Success ratio per epoch over all of that epoch's queue outcomes.
    pub fn epoch_success(&self, count_overflow: bool) -> Vec<f64> {
        self.epochs
            .iter()
            .filter_map(|e| {
                let ok: u64 = e.links.iter().map(|l| l.delivered).sum();
                let lost: u64 = e
                    .links
                    .iter()
                    .map(|l| l.deadline_drops + if count_overflow { l.overflow_drops } else { 0 })
                    .sum();
                (ok + lost > 0).then(|| ok as f64 / (ok + lost) as f64)
            })
            .collect()
    }
}

pub fn link_key(vtx: &VehicleId, vrx: &VehicleId) -> String {
    format!("{vtx}->{vrx}")
}

/// FNV-1a over the seed, both ids and the epoch.
fn stream_seed(seed: u64, vtx: &VehicleId, vrx: &VehicleId, epoch: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(vtx.as_str().as_bytes());
    eat(&[0xff]);
    eat(vrx.as_str().as_bytes());
    eat(&[0xff]);
    eat(&(epoch as u64).to_le_bytes());
    h
}

struct SnapshotPair<'a> {
    tx: &'a VehicleState,
    rx: &'a VehicleState,
    distance: f64,
    blockers: usize,
    building_blocked: bool,
}

/// Vehicles of `all` crossing the segment between `a` and `b`, which must be
/// elements of `all` themselves.
fn blockers_between(a: &VehicleState, b: &VehicleState, all: &[VehicleState]) -> usize {
    count_blockers(
        a.position(),
        b.position(),
        all.iter()
            .filter(|s| !std::ptr::eq(*s, a) && !std::ptr::eq(*s, b))
            .map(|s| &s.footprint),
    )
}

/// Per-epoch context cache: one sensing grid and past trace per transmitter,
/// one future route per receiver.
struct ContextCache<'a> {
    scenario: &'a Scenario,
    cfg: &'a SimConfig,
    time: f64,
    grids: HashMap<VehicleId, SensingGrid>,
    past: HashMap<VehicleId, Route>,
    future: HashMap<VehicleId, Route>,
}

impl ContextCache<'_> {
    fn factors(&mut self, tx: &VehicleState, rx: &VehicleState) -> Result<(f64, f64)> {
        let (cfg, scenario, t) = (self.cfg, self.scenario, self.time);
        if !self.grids.contains_key(tx.id()) {
            let r = cfg.radii[tx.info.quality - 1];
            let grid = SensingGrid::new(tx.position(), r, scenario.buildings(), cfg.sensing_cell)?;
            self.grids.insert(tx.id().clone(), grid);
            let past = scenario.past_trace(tx.id(), t, cfg.past_window)?;
            self.past.insert(tx.id().clone(), past);
        }
        if !self.future.contains_key(rx.id()) {
            let fut = scenario.future_route(rx.id(), t, cfg.timeliness.horizon)?;
            self.future.insert(rx.id().clone(), fut);
        }
        let e = self.grids[tx.id()].extension(rx.position(), cfg.radii[rx.info.quality - 1]);
        let i = route_timeliness(&self.past[tx.id()], &self.future[rx.id()], &cfg.timeliness);
        Ok((i, e))
    }
}

struct Link<'a> {
    pair: Pair,
    boresight_tx: f64,
    boresight_rx: f64,
    factors: LinkFactors,
    rr_index: usize,
    rr_count: usize,
    rng: ChaCha8Rng,
    stats: LinkEpoch,
    rate_sum: f64,
    active_slots: usize,
    queue: &'a mut QueueState,
}

struct Emitter<'a> {
    tx: &'a VehicleState,
    /// World-frame beam direction; `None` for isotropic.
    beam: Option<f64>,
}

fn beam_gain(antenna_width: f64, sidelobe: f64, beam: Option<f64>, from: Vec2, to: Vec2) -> f64 {
    match beam {
        Some(dir) => antenna_gain(antenna_width, sidelobe, wrap_angle((to - from).angle() - dir)),
        None => 1.0,
    }
}

/// Runs the full simulation of `scenario` under `cfg`.
pub fn run(scenario: &Scenario, cfg: &SimConfig) -> Result<RunMetrics> {
    cfg.validate()?;
    let mut out = RunMetrics::default();
    if scenario.is_empty() {
        return Ok(out);
    }
    if (scenario.slot() - cfg.slot).abs() > 1e-9 * cfg.slot {
        return Err(SimError::Config(format!(
            "trace frame spacing {} s does not match slot {} s",
            scenario.slot(),
            cfg.slot
        )));
    }
    for s in scenario.frames().iter().flat_map(|f| &f.states) {
        if s.info.quality == 0 || s.info.quality > cfg.quality_levels() {
            return Err(SimError::Config(format!(
                "vehicle {} has quality {} outside 1..={}",
                s.id(),
                s.info.quality,
                cfg.quality_levels()
            )));
        }
    }

    let frames = scenario.frames();
    let m = cfg.slots_per_epoch;
    let epochs = ((cfg.duration / cfg.epoch_duration() + 1e-9).floor() as usize).min(frames.len() / m);
    let radio = &cfg.radio;
    let ant = &cfg.antenna;
    let tau = alignment_delay(ant);
    let tx_power = radio.tx_power_mw();
    let uses_context = cfg.matching.policy.policy == Policy::ContextAware;

    let mut estimator = RateEstimator::new(cfg.matching.smoothing);
    let mut observed: HashMap<Pair, f64> = HashMap::new();
    let mut queues: BTreeMap<Pair, QueueState> = BTreeMap::new();
    let mut retired: BTreeMap<String, QueueCounters> = BTreeMap::new();

    for epoch in 0..epochs {
        let base = epoch * m;
        let snap = &frames[base];
        let time = snap.time;
        let txs: Vec<&VehicleState> = snap.states.iter().filter(|s| s.info.role == Role::Transmitter).collect();
        let rxs: Vec<&VehicleState> = snap.states.iter().filter(|s| s.info.role == Role::Receiver).collect();

        let pairs: Vec<SnapshotPair> = txs
            .iter()
            .flat_map(|&tx| rxs.iter().map(move |&rx| (tx, rx)))
            .map(|(tx, rx)| SnapshotPair {
                tx,
                rx,
                distance: tx.position().distance(rx.position()),
                blockers: blockers_between(tx, rx, &snap.states),
                building_blocked: segment_blocked_by_building(tx.position(), rx.position(), scenario.buildings()),
            })
            .collect();

        let ideal: Vec<(Pair, f64)> = pairs
            .iter()
            .map(|p| {
                let r = ideal_rate(p.distance, p.blockers, p.building_blocked, ant, &cfg.pathloss, radio);
                ((p.tx.id().clone(), p.rx.id().clone()), r)
            })
            .collect();
        estimate_rates(&mut estimator, &observed, &ideal);

        let mut cache = ContextCache {
            scenario,
            cfg,
            time,
            grids: HashMap::new(),
            past: HashMap::new(),
            future: HashMap::new(),
        };
        let excluded = cfg.matching.excludes_blocked();
        let mut contexts = Vec::with_capacity(pairs.len());
        for p in &pairs {
            let (i, e) = if uses_context && !(excluded && p.building_blocked) {
                cache.factors(p.tx, p.rx)?
            } else {
                (0.0, 0.0)
            };
            contexts.push(PairContext {
                vtx: p.tx.id().clone(),
                vrx: p.rx.id().clone(),
                distance: p.distance,
                building_blocked: p.building_blocked,
                timeliness: i,
                extension: e,
                quality_vtx: p.tx.info.quality,
                quality_vrx: p.rx.info.quality,
            });
        }
        let prefs = build_preferences(&contexts, &estimator, &cfg.matching, &cfg.radii);
        let matching = deferred_acceptance(&prefs, &cfg.matching.quota, cfg.matching.proposer, epoch);

        // queues survive only while their pair stays matched
        let stale: Vec<Pair> = queues.keys().filter(|p| !matching.pairs.contains(*p)).cloned().collect();
        for p in stale {
            let mut q = queues.remove(&p).expect("listed key");
            q.discard();
            retired.entry(link_key(&p.0, &p.1)).or_default().add(q.counters());
        }
        for p in &matching.pairs {
            queues.entry(p.clone()).or_default();
        }

        // round-robin position of each link among its transmitter's links
        let mut per_tx: BTreeMap<&VehicleId, Vec<&VehicleId>> = BTreeMap::new();
        for (n, k) in &matching.pairs {
            per_tx.entry(n).or_default().push(k);
        }

        let mut links: Vec<Link> = Vec::with_capacity(matching.len());
        for (pair, queue) in queues.iter_mut() {
            let tx = snap.get(&pair.0).expect("matched vehicle present");
            let rx = snap.get(&pair.1).expect("matched vehicle present");
            let (i, e) = cache.factors(tx, rx)?;
            let factors = LinkFactors {
                timeliness: i,
                extension: e,
                quality_vtx: tx.info.quality,
            };
            let dir = rx.position() - tx.position();
            let boresight_tx = wrap_angle(dir.angle() - tx.heading());
            let boresight_rx = wrap_angle((-dir).angle() - rx.heading());
            let siblings = &per_tx[&pair.0];
            let rr_index = siblings.iter().position(|k| **k == pair.1).expect("listed");
            links.push(Link {
                pair: pair.clone(),
                boresight_tx,
                boresight_rx,
                factors,
                rr_index,
                rr_count: siblings.len(),
                rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, &pair.0, &pair.1, epoch)),
                stats: LinkEpoch {
                    vtx: pair.0.clone(),
                    vrx: pair.1.clone(),
                    boresight_tx,
                    boresight_rx,
                    alignment: tau,
                    factors,
                    arrivals: 0,
                    delivered: 0,
                    deadline_drops: 0,
                    overflow_drops: 0,
                    p_drop: 0.0,
                    achieved_quality: 0,
                    mean_rate: None,
                },
                rate_sum: 0.0,
                active_slots: 0,
                queue,
            });
        }

        for j in 0..m {
            let frame = &frames[base + j];
            let start = frame.time;
            let end = start + cfg.slot;
            let ends: Vec<Option<(&VehicleState, &VehicleState)>> = links
                .iter()
                .map(|l| Some((frame.get(&l.pair.0)?, frame.get(&l.pair.1)?)))
                .collect();
            let active: Vec<bool> = links
                .iter()
                .zip(&ends)
                .map(|(l, e)| e.is_some() && j % l.rr_count == l.rr_index)
                .collect();

            let mut emitters: Vec<Emitter> = links
                .iter()
                .zip(&ends)
                .zip(&active)
                .filter(|(_, a)| **a)
                .map(|((l, e), _)| {
                    let tx = e.expect("active link has endpoints").0;
                    Emitter {
                        tx,
                        beam: Some(tx.heading() + l.boresight_tx),
                    }
                })
                .collect();
            if cfg.interference == InterferenceSources::All {
                for s in frame.states.iter().filter(|s| s.info.role == Role::Transmitter) {
                    if !emitters.iter().any(|em| em.tx.id() == s.id()) {
                        emitters.push(Emitter { tx: s, beam: None });
                    }
                }
            }

            let mut slot_links = Vec::new();
            let mut esi_acc: BTreeMap<VehicleId, f64> = BTreeMap::new();
            for (idx, link) in links.iter_mut().enumerate() {
                let Some((tx, rx)) = ends[idx] else {
                    // endpoint gone: silent until the next epoch
                    let svc = SlotService {
                        start,
                        end,
                        usable_from: start,
                        rate: 0.0,
                    };
                    let events = advance(link.queue, &svc, &[], &cfg.queue);
                    record(&mut out.records, &mut link.stats, &events, epoch);
                    continue;
                };
                let mut shannon = 0.0;
                let lead = match cfg.alignment {
                    AlignmentCharging::PerEpoch => (tau - j as f64 * cfg.slot).clamp(0.0, cfg.slot),
                    AlignmentCharging::PerSlot => tau.min(cfg.slot),
                };
                let usable_from = start + lead;
                if active[idx] {
                    let tx_beam = tx.heading() + link.boresight_tx;
                    let rx_beam = rx.heading() + link.boresight_rx;
                    let geom = LinkGeometry {
                        distance: tx.position().distance(rx.position()),
                        blockers: blockers_between(tx, rx, &frame.states),
                        building_blocked: segment_blocked_by_building(
                            tx.position(),
                            rx.position(),
                            scenario.buildings(),
                        ),
                        align_error_tx: wrap_angle((rx.position() - tx.position()).angle() - tx_beam),
                        align_error_rx: wrap_angle((tx.position() - rx.position()).angle() - rx_beam),
                    };
                    let target = path_gain(&geom, ant, &cfg.pathloss, tx_power);
                    let interference: Vec<PathGain> = emitters
                        .iter()
                        .filter(|em| em.tx.id() != tx.id())
                        .map(|em| {
                            let from = em.tx.position();
                            let g = LinkGeometry {
                                distance: from.distance(rx.position()),
                                blockers: blockers_between(em.tx, rx, &frame.states),
                                building_blocked: segment_blocked_by_building(
                                    from,
                                    rx.position(),
                                    scenario.buildings(),
                                ),
                                align_error_tx: 0.0,
                                align_error_rx: 0.0,
                            };
                            PathGain {
                                tx_power_mw: tx_power,
                                antenna_tx: beam_gain(ant.beamwidth_tx, ant.sidelobe_gain, em.beam, from, rx.position()),
                                channel: channel_gain(&g, &cfg.pathloss),
                                antenna_rx: beam_gain(ant.beamwidth_rx, ant.sidelobe_gain, Some(rx_beam), rx.position(), from),
                            }
                        })
                        .collect();
                    let gamma = sinr(&target, &interference, radio);
                    shannon = radio.bandwidth_hz * (1.0 + gamma).log2();
                    let rate = shannon * (1.0 - lead / cfg.slot);
                    link.rate_sum += shannon;
                    link.active_slots += 1;
                    slot_links.push(LinkSlot {
                        link: idx,
                        sinr: gamma,
                        rate,
                    });
                    *esi_acc.entry(link.pair.1.clone()).or_insert(0.0) +=
                        link_esi(&link.factors, rate, &cfg.radii, cfg.slot);
                }
                let arrivals = arrival_times(cfg.queue.arrival_rate, start, cfg.slot, &mut link.rng);
                link.stats.arrivals += arrivals.len() as u64;
                let svc = SlotService {
                    start,
                    end,
                    usable_from,
                    rate: shannon,
                };
                let events = advance(link.queue, &svc, &arrivals, &cfg.queue);
                record(&mut out.records, &mut link.stats, &events, epoch);
            }
            // every matched receiver gets an entry, possibly zero
            for (_, k) in &matching.pairs {
                esi_acc.entry(k.clone()).or_insert(0.0);
            }
            out.slots.push(SlotMetrics {
                epoch,
                slot: j,
                time: start,
                esi: esi_acc.into_iter().collect(),
                links: slot_links,
            });
        }

        observed.clear();
        let mut epoch_links = Vec::with_capacity(links.len());
        for link in links {
            let mut s = link.stats;
            let drops = s.deadline_drops + if cfg.count_overflow { s.overflow_drops } else { 0 };
            s.p_drop = if s.delivered + drops > 0 {
                drops as f64 / (s.delivered + drops) as f64
            } else {
                0.0
            };
            s.achieved_quality = achieved_quality(s.delivered, &cfg.thresholds);
            if link.active_slots > 0 {
                let mean = link.rate_sum / link.active_slots as f64;
                s.mean_rate = Some(mean);
                observed.insert(link.pair.clone(), mean);
            }
            epoch_links.push(s);
        }
        out.epochs.push(ScheduleEpoch {
            epoch,
            time,
            matching,
            links: epoch_links,
        });
    }

    for (pair, q) in &queues {
        let key = link_key(&pair.0, &pair.1);
        retired.entry(key.clone()).or_default().add(q.counters());
        out.in_buffer.insert(key, q.len() as u64);
    }
    out.counters = retired;
    Ok(out)
}

fn record(out: &mut Vec<DeliveryRecord>, stats: &mut LinkEpoch, events: &[crate::queueing::QueueEvent], epoch: usize) {
    for ev in events {
        match ev.outcome {
            Outcome::Delivered => stats.delivered += 1,
            Outcome::DroppedDeadline => stats.deadline_drops += 1,
            Outcome::DroppedOverflow => stats.overflow_drops += 1,
        }
        out.push(DeliveryRecord {
            outcome: ev.outcome,
            delay: ev.delay(),
            vtx: stats.vtx.to_string(),
            vrx: stats.vrx.to_string(),
            epoch,
            time: ev.time,
        });
    }
}
