//! Transmitter-side link queue: Poisson arrivals, bounded buffer, hard
//! delivery deadline and per-packet delay bookkeeping.
//!
//! Time inside a slot is continuous. The server works on the oldest packet
//! that can still meet its deadline, at the slot's rate, from the moment the
//! slot becomes usable (after any beam alignment). A packet whose deadline
//! passes stops receiving service and is removed at the next slot boundary.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    /// Bits per packet.
    pub packet_bits: f64,
    /// Packets per second.
    pub arrival_rate: f64,
    /// Buffer capacity in packets, including the one in service.
    pub buffer: usize,
    /// Delivery deadline, seconds.
    pub deadline: f64,
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            packet_bits: 1e6,
            arrival_rate: 500.0,
            buffer: 1,
            deadline: 2e-3,
        }
    }
}

impl QueueConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.packet_bits > 0.0) {
            return Err("packet size must be > 0".into());
        }
        if !(self.arrival_rate > 0.0) {
            return Err("arrival rate must be > 0".into());
        }
        if self.buffer == 0 {
            return Err("buffer must hold at least one packet".into());
        }
        if !(self.deadline > 0.0) {
            return Err("deadline must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub arrival_time: f64,
    pub bits_remaining: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Delivered,
    DroppedDeadline,
    DroppedOverflow,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::DroppedDeadline => "dropped_deadline",
            Outcome::DroppedOverflow => "dropped_overflow",
        }
    }

    pub fn is_drop(self) -> bool {
        !matches!(self, Outcome::Delivered)
    }
}

/// Final fate of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueEvent {
    pub outcome: Outcome,
    pub arrival_time: f64,
    /// Completion, overflow or removal instant.
    pub time: f64,
}

impl QueueEvent {
    /// Waiting plus service time, for delivered packets.
    pub fn delay(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Delivered => Some(self.time - self.arrival_time),
            _ => None,
        }
    }
}

/// A queue event tagged with the link and scheduling epoch it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub outcome: Outcome,
    pub delay: Option<f64>,
    pub vtx: String,
    pub vrx: String,
    pub epoch: usize,
    pub time: f64,
}

/// Service offered during one slot `[start, end)`; nothing is transmitted
/// before `usable_from`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotService {
    pub start: f64,
    pub end: f64,
    pub usable_from: f64,
    /// Bits per second while usable.
    pub rate: f64,
}

impl SlotService {
    /// Capacity of the slot in bits.
    pub fn served_bits(&self) -> f64 {
        self.rate * (self.end - self.usable_from.clamp(self.start, self.end))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueCounters {
    pub arrivals: u64,
    pub delivered: u64,
    pub deadline_drops: u64,
    pub overflow_drops: u64,
    /// Packets thrown away when the link was torn down.
    pub discarded: u64,
}

impl QueueCounters {
    pub fn in_flight(&self) -> u64 {
        self.arrivals - self.delivered - self.deadline_drops - self.overflow_drops - self.discarded
    }

    pub fn add(&mut self, other: &QueueCounters) {
        self.arrivals += other.arrivals;
        self.delivered += other.delivered;
        self.deadline_drops += other.deadline_drops;
        self.overflow_drops += other.overflow_drops;
        self.discarded += other.discarded;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueState {
    packets: VecDeque<Packet>,
    counters: QueueCounters,
}

impl QueueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    pub fn counters(&self) -> &QueueCounters {
        &self.counters
    }

    /// Empties the buffer without recording drops; returns how many packets
    /// were thrown away.
    pub fn discard(&mut self) -> usize {
        let n = self.packets.len();
        self.packets.clear();
        self.counters.discarded += n as u64;
        n
    }

    fn accept(&mut self, at: f64, cfg: &QueueConfig, events: &mut Vec<QueueEvent>) {
        self.counters.arrivals += 1;
        if self.packets.len() < cfg.buffer {
            self.packets.push_back(Packet {
                arrival_time: at,
                bits_remaining: cfg.packet_bits,
            });
        } else {
            self.counters.overflow_drops += 1;
            events.push(QueueEvent {
                outcome: Outcome::DroppedOverflow,
                arrival_time: at,
                time: at,
            });
        }
    }
}

/// Number of Poisson arrivals during `slot` seconds at `rate` packets/s.
pub fn arrivals<R: Rng + ?Sized>(rate: f64, slot: f64, rng: &mut R) -> u64 {
    let mean = rate * slot;
    if mean <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mean).expect("finite positive mean");
    poisson.sample(rng) as u64
}

/// Arrival instants for one slot: Poisson count, uniformly spread and sorted.
pub fn arrival_times<R: Rng + ?Sized>(rate: f64, start: f64, slot: f64, rng: &mut R) -> Vec<f64> {
    let n = arrivals(rate, slot, rng);
    let mut times: Vec<f64> = (0..n).map(|_| start + rng.random::<f64>() * slot).collect();
    times.sort_by(f64::total_cmp);
    times
}

/// Advances the queue through one slot.
///
/// `new_arrivals` are instants in `[slot.start, slot.end)`, ascending.
/// Returns the events settled during the slot, in time order.
pub fn advance(
    queue: &mut QueueState,
    slot: &SlotService,
    new_arrivals: &[f64],
    cfg: &QueueConfig,
) -> Vec<QueueEvent> {
    let mut events = Vec::new();
    let usable = slot.usable_from.clamp(slot.start, slot.end);
    let mut now = slot.start;
    let mut next = 0;

    loop {
        let arrival = new_arrivals.get(next).copied().unwrap_or(f64::INFINITY);
        let head = queue
            .packets
            .iter()
            .position(|p| p.arrival_time + cfg.deadline > now);
        let serve_from = now.max(usable);

        match head {
            Some(i) if slot.rate > 0.0 && serve_from < slot.end => {
                let pkt = queue.packets[i];
                let expiry = pkt.arrival_time + cfg.deadline;
                let completion = serve_from + pkt.bits_remaining / slot.rate;
                let stop = completion.min(expiry).min(slot.end);
                if arrival < stop {
                    if arrival > serve_from {
                        queue.packets[i].bits_remaining -= slot.rate * (arrival - serve_from);
                    }
                    now = arrival;
                    queue.accept(arrival, cfg, &mut events);
                    next += 1;
                } else if completion <= expiry && completion <= slot.end {
                    queue.packets.remove(i);
                    queue.counters.delivered += 1;
                    events.push(QueueEvent {
                        outcome: Outcome::Delivered,
                        arrival_time: pkt.arrival_time,
                        time: completion,
                    });
                    now = completion;
                } else {
                    // deadline or slot end reached first
                    queue.packets[i].bits_remaining -= slot.rate * (stop - serve_from).max(0.0);
                    now = stop;
                    if stop >= slot.end {
                        break;
                    }
                }
            }
            _ => {
                if arrival < slot.end {
                    now = arrival;
                    queue.accept(arrival, cfg, &mut events);
                    next += 1;
                } else {
                    break;
                }
            }
        }
    }

    // expired packets leave at the slot boundary
    let end = slot.end;
    let before = events.len();
    queue.packets.retain(|p| {
        if p.arrival_time + cfg.deadline <= end {
            events.push(QueueEvent {
                outcome: Outcome::DroppedDeadline,
                arrival_time: p.arrival_time,
                time: end,
            });
            false
        } else {
            true
        }
    });
    queue.counters.deadline_drops += (events.len() - before) as u64;
    events
}

/// Runs [`advance`] over consecutive slots.
pub fn advance_many<'a, I>(queue: &mut QueueState, slots: I, cfg: &QueueConfig) -> Vec<QueueEvent>
where
    I: IntoIterator<Item = (&'a SlotService, &'a [f64])>,
{
    slots
        .into_iter()
        .flat_map(|(slot, arr)| advance(queue, slot, arr, cfg))
        .collect()
}

/// Fraction of outcomes in `epoch` that are drops; 0 without records.
/// Overflow drops are ignored when `count_overflow` is false.
pub fn drop_probability(records: &[DeliveryRecord], epoch: usize, count_overflow: bool) -> f64 {
    let mut drops = 0usize;
    let mut total = 0usize;
    for r in records.iter().filter(|r| r.epoch == epoch) {
        match r.outcome {
            Outcome::Delivered => total += 1,
            Outcome::DroppedDeadline => {
                drops += 1;
                total += 1;
            }
            Outcome::DroppedOverflow if count_overflow => {
                drops += 1;
                total += 1;
            }
            Outcome::DroppedOverflow => {}
        }
    }
    if total == 0 {
        0.0
    } else {
        drops as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const T: f64 = 2e-3;

    fn slot(k: usize, rate: f64) -> SlotService {
        SlotService {
            start: k as f64 * T,
            end: (k + 1) as f64 * T,
            usable_from: k as f64 * T,
            rate,
        }
    }

    fn rec(outcome: Outcome, epoch: usize) -> DeliveryRecord {
        DeliveryRecord {
            outcome,
            delay: None,
            vtx: "a".into(),
            vrx: "b".into(),
            epoch,
            time: 0.0,
        }
    }

    #[test]
    fn zero_rate_never_arrives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| arrivals(0.0, T, &mut rng) == 0));
    }

    #[test]
    fn poisson_mean_is_one_per_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| arrivals(500.0, T, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn arrivals_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| arrival_times(500.0, 0.0, T, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn single_packet_delivered() {
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        let events = advance(&mut q, &slot(0, 1e10), &[0.5e-3], &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].outcome, Outcome::Delivered);
        assert!((events[0].delay().unwrap() - 1e-4).abs() < 1e-15);
        assert!(q.is_empty());
    }

    #[test]
    fn alignment_postpones_service() {
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        let s = SlotService {
            usable_from: 0.3e-3,
            ..slot(0, 1e10)
        };
        let events = advance(&mut q, &s, &[0.1e-3], &cfg);
        assert!((events[0].time - 0.4e-3).abs() < 1e-15);
    }

    #[test]
    fn starvation_drops_at_deadline() {
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        assert!(advance(&mut q, &slot(0, 0.0), &[0.2e-3], &cfg).is_empty());
        // expires at 2.2 ms, first boundary at or after that is 4 ms
        let events = advance(&mut q, &slot(1, 0.0), &[], &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].outcome, Outcome::DroppedDeadline);
        assert_eq!(events[0].time, 2.0 * T);
        assert!(advance(&mut q, &slot(2, 0.0), &[], &cfg).is_empty());
        assert_eq!(q.counters().deadline_drops, 1);
    }

    #[test]
    fn slow_link_cannot_beat_deadline() {
        // needs 2.5 ms of service, deadline 2 ms
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        let rate = 1e6 / 2.5e-3;
        let mut events = advance(&mut q, &slot(0, rate), &[0.0], &cfg);
        events.extend(advance(&mut q, &slot(1, rate), &[], &cfg));
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].outcome, Outcome::DroppedDeadline);
    }

    #[test]
    fn overflow_when_buffer_full() {
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        let events = advance(&mut q, &slot(0, 0.0), &[0.1e-3, 0.2e-3], &cfg);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].outcome, Outcome::DroppedOverflow);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn completion_frees_buffer_for_later_arrival() {
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        // 1e6 bits at 1e10 b/s finish 0.1 ms after arrival
        let events = advance(&mut q, &slot(0, 1e10), &[0.0, 0.05e-3, 0.5e-3], &cfg);
        let outcomes: Vec<_> = events.iter().map(|e| e.outcome).collect();
        assert_eq!(
            outcomes,
            [Outcome::DroppedOverflow, Outcome::Delivered, Outcome::Delivered]
        );
    }

    #[test]
    fn isolated_packet_delay_is_service_time() {
        let cfg = QueueConfig::default();
        for rate in [1e9, 1e10, 1e12, 1e15] {
            let mut q = QueueState::new();
            let e = advance(&mut q, &slot(0, rate), &[1e-3], &cfg);
            let delay = e[0].delay().unwrap();
            assert!((delay - cfg.packet_bits / rate).abs() < 1e-15);
        }
    }

    #[test]
    fn discard_is_not_a_drop() {
        let cfg = QueueConfig::default();
        let mut q = QueueState::new();
        advance(&mut q, &slot(0, 0.0), &[1e-3], &cfg);
        assert_eq!(q.discard(), 1);
        let c = q.counters();
        assert_eq!((c.deadline_drops, c.overflow_drops, c.discarded, c.in_flight()), (0, 0, 1, 0));
    }

    #[test]
    fn drop_probability_examples() {
        assert_eq!(drop_probability(&[], 0, true), 0.0);
        let all_ok = vec![rec(Outcome::Delivered, 0); 3];
        assert_eq!(drop_probability(&all_ok, 0, true), 0.0);
        let all_bad = vec![rec(Outcome::DroppedDeadline, 0), rec(Outcome::DroppedOverflow, 0)];
        assert_eq!(drop_probability(&all_bad, 0, true), 1.0);
        let mut mixed = vec![rec(Outcome::Delivered, 1); 3];
        mixed.push(rec(Outcome::DroppedDeadline, 1));
        mixed.push(rec(Outcome::DroppedDeadline, 2));
        assert_eq!(drop_probability(&mixed, 1, true), 0.25);
        let mut with_overflow = mixed.clone();
        with_overflow.push(rec(Outcome::DroppedOverflow, 1));
        assert_eq!(drop_probability(&with_overflow, 1, false), 0.25);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scenario() -> impl Strategy<Value = (Vec<(f64, Vec<f64>)>, usize)> {
            let slot = (0.0f64..3e10, proptest::collection::vec(0.0f64..1.0, 0..4));
            (proptest::collection::vec(slot, 1..40), 1usize..4)
        }

        fn expand(raw: &[(f64, Vec<f64>)]) -> Vec<(SlotService, Vec<f64>)> {
            raw.iter()
                .enumerate()
                .map(|(k, (rate, fr))| {
                    let s = slot(k, *rate);
                    let mut arr: Vec<f64> = fr.iter().map(|f| s.start + f * T).collect();
                    arr.sort_by(f64::total_cmp);
                    (s, arr)
                })
                .collect()
        }

        proptest! {
            #[test]
            fn conservation_and_delay_bounds((raw, buffer) in scenario()) {
                let cfg = QueueConfig { buffer, ..QueueConfig::default() };
                let slots = expand(&raw);
                let mut q = QueueState::new();
                let mut seen = 0u64;
                for (s, a) in &slots {
                    let events = advance(&mut q, s, a, &cfg);
                    seen += events.len() as u64;
                    let c = q.counters();
                    prop_assert_eq!(c.arrivals, c.delivered + c.deadline_drops + c.overflow_drops + q.len() as u64);
                    for e in events {
                        if let Some(d) = e.delay() {
                            prop_assert!(d > 0.0 && d <= cfg.deadline);
                        }
                    }
                }
                prop_assert_eq!(seen + q.len() as u64, q.counters().arrivals);
            }

            #[test]
            fn split_runs_compose((raw, buffer) in scenario(), cut in 0usize..40) {
                let cfg = QueueConfig { buffer, ..QueueConfig::default() };
                let slots = expand(&raw);
                let cut = cut.min(slots.len());
                let mut whole = QueueState::new();
                let all = advance_many(&mut whole, slots.iter().map(|(s, a)| (s, a.as_slice())), &cfg);
                let mut split = QueueState::new();
                let mut parts = advance_many(&mut split, slots[..cut].iter().map(|(s, a)| (s, a.as_slice())), &cfg);
                parts.extend(advance_many(&mut split, slots[cut..].iter().map(|(s, a)| (s, a.as_slice())), &cfg));
                prop_assert_eq!(all, parts);
                prop_assert_eq!(whole, split);
            }
        }
    }
}
