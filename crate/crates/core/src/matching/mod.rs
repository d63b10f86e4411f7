//! Utilities, preference profiles and quota-constrained deferred acceptance
//! between transmitting and receiving vehicles.

mod da;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mobility::VehicleId;

pub use da::{audit_stability, deferred_acceptance};

pub type Pair = (VehicleId, VehicleId);

/// Maximum simultaneous links per transmitter and per receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub per_vtx: usize,
    pub per_vrx: usize,
}

impl Default for Quota {
    fn default() -> Self {
        Quota { per_vtx: 1, per_vrx: 1 }
    }
}

impl Quota {
    pub fn new(per_vtx: usize, per_vrx: usize) -> Result<Self> {
        let q = Quota { per_vtx, per_vrx };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_vtx == 0 || self.per_vrx == 0 {
            return Err(SimError::Config("quotas must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "MINDist")]
    MinDist,
    #[serde(rename = "DELAYfair")]
    DelayFair,
    #[serde(rename = "CONTEXTaware")]
    ContextAware,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::MinDist, Policy::DelayFair, Policy::ContextAware];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::MinDist => "MINDist",
            Policy::DelayFair => "DELAYfair",
            Policy::ContextAware => "CONTEXTaware",
        }
    }

    /// Policies that rank on estimated channel state.
    pub fn uses_csi(self) -> bool {
        self != Policy::MinDist
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mindist" => Ok(Policy::MinDist),
            "delayfair" => Ok(Policy::DelayFair),
            "contextaware" => Ok(Policy::ContextAware),
            other => Err(SimError::Config(format!(
                "unknown policy '{other}' (expected MINDist, DELAYfair or CONTEXTaware)"
            ))),
        }
    }
}

/// Receiver utility weights on rate, timeliness and extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub rate: f64,
    pub timeliness: f64,
    pub extension: f64,
}

impl Weights {
    pub const DELAY_ONLY: Weights = Weights {
        rate: 1.0,
        timeliness: 0.0,
        extension: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let w = [self.rate, self.timeliness, self.extension];
        if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(SimError::Config(format!("weights must lie in [0, 1], got {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Config(format!(
                "omega_d + omega_i + omega_e must equal 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            rate: 0.5,
            timeliness: 0.25,
            extension: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub policy: Policy,
    /// Weights used by CONTEXTaware; DELAYfair always ranks on rate alone.
    pub weights: Weights,
}

impl PolicyConfig {
    pub fn new(policy: Policy) -> Self {
        PolicyConfig {
            policy,
            weights: Weights::default(),
        }
    }

    pub fn effective_weights(&self) -> Weights {
        match self.policy {
            Policy::DelayFair => Weights::DELAY_ONLY,
            _ => self.weights,
        }
    }
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::new(Policy::ContextAware)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposer {
    Vtx,
    Vrx,
}

/// Whose sensing resolution enters the transmitter utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolutionSide {
    Receiver,
    Transmitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingConfig {
    pub quota: Quota,
    pub policy: PolicyConfig,
    pub proposer: Proposer,
    pub resolution: ResolutionSide,
    /// Drop building-blocked pairs; `None` means "only for CSI policies".
    pub exclude_blocked: Option<bool>,
    pub smoothing: f64,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        MatchingConfig {
            quota: Quota::default(),
            policy: PolicyConfig::default(),
            proposer: Proposer::Vtx,
            resolution: ResolutionSide::Receiver,
            exclude_blocked: None,
            smoothing: 0.3,
        }
    }
}

impl MatchingConfig {
    pub fn validate(&self) -> Result<()> {
        self.quota.validate()?;
        self.policy.weights.validate()?;
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(SimError::Config(format!("smoothing must lie in (0, 1], got {}", self.smoothing)));
        }
        Ok(())
    }

    pub fn excludes_blocked(&self) -> bool {
        self.exclude_blocked.unwrap_or(self.policy.policy.uses_csi())
    }
}

/// Transmitter utility; `None` when the normalized rate is zero.
pub fn utility_vtx(quality: usize, rate_norm: f64, radii: &[f64]) -> Option<f64> {
    let r_q = radii[quality - 1] / radii[radii.len() - 1];
    let v = r_q * r_q * rate_norm;
    (v > 0.0).then(|| -1.0 / v)
}

/// Receiver utility; `None` when the weighted sum is zero.
pub fn utility_vrx(rate_norm: f64, timeliness: f64, extension: f64, w: &Weights) -> Option<f64> {
    let v = w.rate * rate_norm + w.timeliness * timeliness + w.extension * extension;
    (v > 0.0).then(|| -1.0 / v)
}

/// Smoothed per-pair rate estimates.
#[derive(Debug, Clone, Default)]
pub struct RateEstimator {
    smoothing: f64,
    rates: HashMap<Pair, f64>,
}

impl RateEstimator {
    pub fn new(smoothing: f64) -> Self {
        RateEstimator {
            smoothing,
            rates: HashMap::new(),
        }
    }

    pub fn get(&self, pair: &Pair) -> Option<f64> {
        self.rates.get(pair).copied()
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Updates the estimator for the pairs of the current snapshot.
///
/// Pairs observed during the last epoch are smoothed towards the observation;
/// every other pair restarts from its ideal snapshot rate. Pairs absent from
/// the snapshot are forgotten.
pub fn estimate_rates(est: &mut RateEstimator, observed: &HashMap<Pair, f64>, snapshot: &[(Pair, f64)]) {
    let eta = est.smoothing;
    let mut next = HashMap::with_capacity(snapshot.len());
    for (pair, ideal) in snapshot {
        let r = match observed.get(pair) {
            Some(&obs) => match est.rates.get(pair) {
                Some(&prior) => (1.0 - eta) * prior + eta * obs,
                None => obs,
            },
            None => *ideal,
        };
        next.insert(pair.clone(), r.max(0.0));
    }
    est.rates = next;
}

/// Everything the policies need to know about one candidate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairContext {
    pub vtx: VehicleId,
    pub vrx: VehicleId,
    pub distance: f64,
    pub building_blocked: bool,
    pub timeliness: f64,
    pub extension: f64,
    pub quality_vtx: usize,
    pub quality_vrx: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub id: VehicleId,
    pub utility: f64,
}

/// Strict rankings of acceptable partners, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceProfile {
    pub vtx: BTreeMap<VehicleId, Vec<Ranked>>,
    pub vrx: BTreeMap<VehicleId, Vec<Ranked>>,
}

impl PreferenceProfile {
    /// Builds a profile from utilities; larger is better, ties by id.
    pub fn from_utilities<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (VehicleId, VehicleId, Option<f64>, Option<f64>)>,
    {
        let mut p = PreferenceProfile::default();
        for (n, k, u_n, u_k) in entries {
            let tx = p.vtx.entry(n.clone()).or_default();
            if let Some(u) = u_n {
                tx.push(Ranked { id: k.clone(), utility: u });
            }
            let rx = p.vrx.entry(k).or_default();
            if let Some(u) = u_k {
                rx.push(Ranked { id: n, utility: u });
            }
        }
        for list in p.vtx.values_mut().chain(p.vrx.values_mut()) {
            list.sort_by(|a, b| b.utility.total_cmp(&a.utility).then_with(|| a.id.cmp(&b.id)));
        }
        p
    }
}

/// Builds preference lists for the policy in `cfg`.
pub fn build_preferences(
    candidates: &[PairContext],
    est: &RateEstimator,
    cfg: &MatchingConfig,
    radii: &[f64],
) -> PreferenceProfile {
    let exclude = cfg.excludes_blocked();
    let cands: Vec<&PairContext> = candidates
        .iter()
        .filter(|c| !(exclude && c.building_blocked))
        .collect();

    if cfg.policy.policy == Policy::MinDist {
        return PreferenceProfile::from_utilities(
            cands
                .iter()
                .map(|c| (c.vtx.clone(), c.vrx.clone(), Some(-c.distance), Some(-c.distance))),
        );
    }

    let rate = |c: &PairContext| est.get(&(c.vtx.clone(), c.vrx.clone())).unwrap_or(0.0);
    let mut max_tx: HashMap<&VehicleId, f64> = HashMap::new();
    let mut max_rx: HashMap<&VehicleId, f64> = HashMap::new();
    for c in &cands {
        let r = rate(c);
        let m = max_tx.entry(&c.vtx).or_insert(0.0);
        *m = m.max(r);
        let m = max_rx.entry(&c.vrx).or_insert(0.0);
        *m = m.max(r);
    }
    let norm = |r: f64, max: f64| if max > 0.0 { r / max } else { 1.0 };
    let w = cfg.policy.effective_weights();

    PreferenceProfile::from_utilities(cands.iter().map(|c| {
        let r = rate(c);
        let q = match cfg.resolution {
            ResolutionSide::Receiver => c.quality_vrx,
            ResolutionSide::Transmitter => c.quality_vtx,
        };
        let u_n = utility_vtx(q, norm(r, max_tx[&c.vtx]), radii);
        let u_k = utility_vrx(norm(r, max_rx[&c.vrx]), c.timeliness, c.extension, &w);
        (c.vtx.clone(), c.vrx.clone(), u_n, u_k)
    }))
}

/// Matched pairs of one epoch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub epoch: usize,
    pub pairs: BTreeSet<Pair>,
}

impl Matching {
    pub fn new(epoch: usize, pairs: impl IntoIterator<Item = Pair>) -> Self {
        Matching {
            epoch,
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, vtx: &VehicleId, vrx: &VehicleId) -> bool {
        self.pairs.contains(&(vtx.clone(), vrx.clone()))
    }

    pub fn partners_of_vtx<'a>(&'a self, vtx: &'a VehicleId) -> impl Iterator<Item = &'a VehicleId> + 'a {
        self.pairs.iter().filter(move |(n, _)| n == vtx).map(|(_, k)| k)
    }

    pub fn partners_of_vrx<'a>(&'a self, vrx: &'a VehicleId) -> impl Iterator<Item = &'a VehicleId> + 'a {
        self.pairs.iter().filter(move |(_, k)| k == vrx).map(|(n, _)| n)
    }

    pub fn respects(&self, quota: &Quota) -> bool {
        let mut tx: HashMap<&VehicleId, usize> = HashMap::new();
        let mut rx: HashMap<&VehicleId, usize> = HashMap::new();
        for (n, k) in &self.pairs {
            *tx.entry(n).or_default() += 1;
            *rx.entry(k).or_default() += 1;
        }
        tx.values().all(|&c| c <= quota.per_vtx) && rx.values().all(|&c| c <= quota.per_vrx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> VehicleId {
        VehicleId::new(s)
    }

    const RADII: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

    #[test]
    fn vtx_utility_examples() {
        assert_eq!(utility_vtx(4, 1.0, &RADII), Some(-1.0));
        assert_eq!(utility_vtx(4, 0.5, &RADII), Some(-2.0));
        assert_eq!(utility_vtx(2, 1.0, &RADII), Some(-4.0));
        assert_eq!(utility_vtx(3, 0.0, &RADII), None);
    }

    #[test]
    fn vrx_utility_examples() {
        assert_eq!(utility_vrx(0.5, 0.3, 0.9, &Weights::DELAY_ONLY), Some(-2.0));
        let w = Weights::default();
        assert_eq!(utility_vrx(1.0, 1.0, 1.0, &w), Some(-1.0));
        let u = utility_vrx(0.4, 1.0, 0.5, &w).unwrap();
        assert!((u + 1.0 / 0.575).abs() < 1e-12);
        assert!((u + 1.739).abs() < 1e-3);
        assert_eq!(utility_vrx(0.0, 0.0, 0.0, &w), None);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let bad = Weights {
            rate: 0.7,
            timeliness: 0.2,
            extension: 0.2,
        };
        assert!(bad.validate().is_err());
        assert!(Weights::default().validate().is_ok());
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!("random".parse::<Policy>().is_err());
    }

    #[test]
    fn estimator_rules() {
        let pair = (id("t"), id("r"));
        let mut est = RateEstimator::new(0.5);
        estimate_rates(&mut est, &HashMap::new(), &[(pair.clone(), 4.0)]);
        assert_eq!(est.get(&pair), Some(4.0));
        let obs = HashMap::from([(pair.clone(), 2.0)]);
        estimate_rates(&mut est, &obs, &[(pair.clone(), 9.0)]);
        assert_eq!(est.get(&pair), Some(3.0));
        // not observed: back to the snapshot value
        estimate_rates(&mut est, &HashMap::new(), &[(pair.clone(), 9.0)]);
        assert_eq!(est.get(&pair), Some(9.0));

        let mut full = RateEstimator::new(1.0);
        estimate_rates(&mut full, &HashMap::new(), &[(pair.clone(), 4.0)]);
        estimate_rates(&mut full, &obs, &[(pair.clone(), 7.0)]);
        assert_eq!(full.get(&pair), Some(2.0));
    }

    fn ctx(n: &str, k: &str, distance: f64, t: f64, e: f64) -> PairContext {
        PairContext {
            vtx: id(n),
            vrx: id(k),
            distance,
            building_blocked: false,
            timeliness: t,
            extension: e,
            quality_vtx: 4,
            quality_vrx: 4,
        }
    }

    #[test]
    fn single_candidate_gives_singletons() {
        let c = [ctx("t", "r", 5.0, 0.5, 0.5)];
        let mut est = RateEstimator::new(0.3);
        estimate_rates(&mut est, &HashMap::new(), &[((id("t"), id("r")), 1e9)]);
        for p in Policy::ALL {
            let cfg = MatchingConfig {
                policy: PolicyConfig::new(p),
                ..Default::default()
            };
            let prefs = build_preferences(&c, &est, &cfg, &RADII);
            assert_eq!(prefs.vtx[&id("t")].len(), 1);
            assert_eq!(prefs.vrx[&id("r")].len(), 1);
        }
    }

    #[test]
    fn mindist_ranks_nearest_first() {
        let c = [ctx("t", "r3", 30.0, 0.0, 0.0), ctx("t", "r1", 10.0, 0.0, 0.0), ctx("t", "r2", 20.0, 0.0, 0.0)];
        let cfg = MatchingConfig {
            policy: PolicyConfig::new(Policy::MinDist),
            ..Default::default()
        };
        let prefs = build_preferences(&c, &RateEstimator::new(0.3), &cfg, &RADII);
        let order: Vec<&str> = prefs.vtx[&id("t")].iter().map(|r| r.id.as_str()).collect();
        assert_eq!(order, ["r1", "r2", "r3"]);
    }

    #[test]
    fn context_can_outweigh_rate() {
        let c = [ctx("a", "r", 5.0, 0.0, 0.0), ctx("b", "r", 5.0, 1.0, 1.0)];
        let mut est = RateEstimator::new(0.3);
        estimate_rates(
            &mut est,
            &HashMap::new(),
            &[((id("a"), id("r")), 10.0), ((id("b"), id("r")), 6.0)],
        );
        let cfg = MatchingConfig::default();
        let prefs = build_preferences(&c, &est, &cfg, &RADII);
        let list = &prefs.vrx[&id("r")];
        assert_eq!(list[0].id, id("b"));
        assert!((list[0].utility + 1.25).abs() < 1e-12);
        assert!((list[1].utility + 2.0).abs() < 1e-12);

        let delay = MatchingConfig {
            policy: PolicyConfig::new(Policy::DelayFair),
            ..Default::default()
        };
        let prefs = build_preferences(&c, &est, &delay, &RADII);
        assert_eq!(prefs.vrx[&id("r")][0].id, id("a"));
    }

    #[test]
    fn blocked_pairs_follow_policy() {
        let mut blocked = ctx("t", "r", 5.0, 1.0, 1.0);
        blocked.building_blocked = true;
        let mut est = RateEstimator::new(0.3);
        estimate_rates(&mut est, &HashMap::new(), &[((id("t"), id("r")), 1.0)]);
        let csi = MatchingConfig::default();
        assert!(build_preferences(&[blocked.clone()], &est, &csi, &RADII).vtx.is_empty());
        let dist = MatchingConfig {
            policy: PolicyConfig::new(Policy::MinDist),
            ..Default::default()
        };
        assert_eq!(build_preferences(&[blocked.clone()], &est, &dist, &RADII).vtx.len(), 1);
        let forced = MatchingConfig {
            exclude_blocked: Some(false),
            ..Default::default()
        };
        assert_eq!(build_preferences(&[blocked], &est, &forced, &RADII).vtx.len(), 1);
    }

    #[test]
    fn zero_rates_fall_back_to_context() {
        let c = [ctx("a", "r", 5.0, 0.2, 0.0), ctx("b", "r", 5.0, 0.9, 0.0)];
        let est = RateEstimator::new(0.3);
        let prefs = build_preferences(&c, &est, &MatchingConfig::default(), &RADII);
        let list = &prefs.vrx[&id("r")];
        assert_eq!(list[0].id, id("b"));
        assert!((list[0].utility + 1.0 / (0.5 + 0.25 * 0.9)).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_id() {
        let c = [ctx("b", "r", 5.0, 0.0, 0.0), ctx("a", "r", 5.0, 0.0, 0.0)];
        let cfg = MatchingConfig {
            policy: PolicyConfig::new(Policy::MinDist),
            ..Default::default()
        };
        let prefs = build_preferences(&c, &RateEstimator::new(0.3), &cfg, &RADII);
        assert_eq!(prefs.vrx[&id("r")][0].id, id("a"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn vrx_utility_increasing(r in 0.01..1.0f64, i in 0.0..1.0f64, e in 0.0..1.0f64, d in 0.001..0.5f64) {
                let w = Weights::default();
                let base = utility_vrx(r, i, e, &w).unwrap();
                prop_assert!(utility_vrx((r + d).min(1.0), i, e, &w).unwrap() > base || r + d > 1.0);
                prop_assert!(utility_vrx(r, (i + d).min(1.0), e, &w).unwrap() > base || i + d > 1.0);
                prop_assert!(utility_vrx(r, i, (e + d).min(1.0), &w).unwrap() > base || e + d > 1.0);
            }

            #[test]
            fn rescaling_rates_keeps_order(
                rates in proptest::collection::vec(0.0..1e10f64, 2..6),
                ctxs in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 6),
                scale in 1e-3..1e3f64,
            ) {
                let names: Vec<String> = (0..rates.len()).map(|i| format!("t{i}")).collect();
                let cands: Vec<PairContext> = names.iter().enumerate()
                    .map(|(i, n)| ctx(n, "r", 1.0, ctxs[i].0, ctxs[i].1))
                    .collect();
                let snap = |s: f64| -> Vec<(Pair, f64)> {
                    names.iter().zip(&rates).map(|(n, r)| ((id(n), id("r")), r * s)).collect()
                };
                let mut a = RateEstimator::new(0.3);
                estimate_rates(&mut a, &HashMap::new(), &snap(1.0));
                let mut b = RateEstimator::new(0.3);
                estimate_rates(&mut b, &HashMap::new(), &snap(scale));
                let cfg = MatchingConfig::default();
                let pa = build_preferences(&cands, &a, &cfg, &RADII);
                let pb = build_preferences(&cands, &b, &cfg, &RADII);
                let ids = |p: &PreferenceProfile| -> Vec<VehicleId> {
                    p.vrx[&id("r")].iter().map(|x| x.id.clone()).collect()
                };
                prop_assert_eq!(ids(&pa), ids(&pb));
            }
        }
    }
}
