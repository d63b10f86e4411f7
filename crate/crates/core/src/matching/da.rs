use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{Matching, Pair, PreferenceProfile, Proposer, Quota, Ranked};
use crate::mobility::VehicleId;

type Lists = BTreeMap<VehicleId, Vec<Ranked>>;

fn rank_maps(lists: &Lists) -> HashMap<&VehicleId, HashMap<&VehicleId, usize>> {
    lists
        .iter()
        .map(|(who, list)| (who, list.iter().enumerate().map(|(i, r)| (&r.id, i)).collect()))
        .collect()
}

/// Proposer-side deferred acceptance with quotas on both sides. Returns
/// (proposer, receiver) pairs.
fn propose(proposers: &Lists, receivers: &Lists, quota_p: usize, quota_r: usize) -> Vec<(VehicleId, VehicleId)> {
    let recv_rank = rank_maps(receivers);
    let mut next: HashMap<&VehicleId, usize> = HashMap::new();
    let mut held_count: HashMap<&VehicleId, usize> = HashMap::new();
    // receiver -> held proposers sorted best first (by rank)
    let mut held: BTreeMap<&VehicleId, Vec<(usize, &VehicleId)>> = BTreeMap::new();
    let mut queue: VecDeque<&VehicleId> = proposers.keys().collect();

    while let Some(p) = queue.pop_front() {
        let list = &proposers[p];
        loop {
            let count = held_count.get(p).copied().unwrap_or(0);
            let ptr = next.entry(p).or_insert(0);
            if count >= quota_p || *ptr >= list.len() {
                break;
            }
            let r = &list[*ptr].id;
            *ptr += 1;
            let Some(rank) = recv_rank.get(r).and_then(|m| m.get(p)).copied() else {
                continue;
            };
            let slot = held.entry(r).or_default();
            let pos = slot.partition_point(|&(k, _)| k < rank);
            slot.insert(pos, (rank, p));
            *held_count.entry(p).or_insert(0) += 1;
            if slot.len() > quota_r {
                let (_, evicted) = slot.pop().unwrap();
                *held_count.get_mut(evicted).unwrap() -= 1;
                if evicted != p {
                    queue.push_back(evicted);
                }
            }
        }
    }

    held.into_iter()
        .flat_map(|(r, ps)| ps.into_iter().map(move |(_, p)| (p.clone(), r.clone())))
        .collect()
}

/// Deferred acceptance; transmitters propose by default.
pub fn deferred_acceptance(prefs: &PreferenceProfile, quota: &Quota, proposer: Proposer, epoch: usize) -> Matching {
    let pairs: Vec<Pair> = match proposer {
        Proposer::Vtx => propose(&prefs.vtx, &prefs.vrx, quota.per_vtx, quota.per_vrx),
        Proposer::Vrx => propose(&prefs.vrx, &prefs.vtx, quota.per_vrx, quota.per_vtx)
            .into_iter()
            .map(|(k, n)| (n, k))
            .collect(),
    };
    Matching::new(epoch, pairs)
}

/// Mutually acceptable unmatched pairs that would both rather be together.
pub fn audit_stability(matching: &Matching, prefs: &PreferenceProfile, quota: &Quota) -> Vec<Pair> {
    let tx_rank = rank_maps(&prefs.vtx);
    let rx_rank = rank_maps(&prefs.vrx);

    // worst held rank and count per agent
    let mut tx_state: HashMap<&VehicleId, (usize, usize)> = HashMap::new();
    let mut rx_state: HashMap<&VehicleId, (usize, usize)> = HashMap::new();
    for (n, k) in &matching.pairs {
        let rn = tx_rank.get(n).and_then(|m| m.get(k)).copied().unwrap_or(usize::MAX);
        let e = tx_state.entry(n).or_insert((0, 0));
        e.0 += 1;
        e.1 = e.1.max(rn);
        let rk = rx_rank.get(k).and_then(|m| m.get(n)).copied().unwrap_or(usize::MAX);
        let e = rx_state.entry(k).or_insert((0, 0));
        e.0 += 1;
        e.1 = e.1.max(rk);
    }
    let wants = |state: Option<&(usize, usize)>, quota: usize, rank: usize| match state {
        None => true,
        Some(&(count, worst)) => count < quota || rank < worst,
    };

    let mut blocking = Vec::new();
    for (n, list) in &prefs.vtx {
        for (rn, r) in list.iter().enumerate() {
            let k = &r.id;
            let Some(&rk) = rx_rank.get(k).and_then(|m| m.get(n)) else {
                continue;
            };
            if matching.contains(n, k) {
                continue;
            }
            if wants(tx_state.get(n), quota.per_vtx, rn) && wants(rx_state.get(k), quota.per_vrx, rk) {
                blocking.push((n.clone(), k.clone()));
            }
        }
    }
    blocking
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::Matching;

    fn id(s: &str) -> VehicleId {
        VehicleId::new(s)
    }

    fn profile(tx: &[(&str, &[&str])], rx: &[(&str, &[&str])]) -> PreferenceProfile {
        let lists = |side: &[(&str, &[&str])]| -> Lists {
            side.iter()
                .map(|(who, list)| {
                    let ranked = list
                        .iter()
                        .enumerate()
                        .map(|(i, x)| Ranked {
                            id: id(x),
                            utility: -(i as f64),
                        })
                        .collect();
                    (id(who), ranked)
                })
                .collect()
        };
        PreferenceProfile {
            vtx: lists(tx),
            vrx: lists(rx),
        }
    }

    fn pairs(m: &Matching) -> Vec<(&str, &str)> {
        m.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    #[test]
    fn assortative_two_by_two() {
        let p = profile(
            &[("t1", &["r1", "r2"]), ("t2", &["r2", "r1"])],
            &[("r1", &["t1", "t2"]), ("r2", &["t2", "t1"])],
        );
        let q = Quota::default();
        let m = deferred_acceptance(&p, &q, Proposer::Vtx, 0);
        assert_eq!(pairs(&m), [("t1", "r1"), ("t2", "r2")]);
        assert!(audit_stability(&m, &p, &q).is_empty());

        // brute force over all seven one-to-one matchings of a 2x2 market
        let all = [
            vec![],
            vec![("t1", "r1")],
            vec![("t1", "r2")],
            vec![("t2", "r1")],
            vec![("t2", "r2")],
            vec![("t1", "r1"), ("t2", "r2")],
            vec![("t1", "r2"), ("t2", "r1")],
        ];
        let stable: Vec<_> = all
            .iter()
            .filter(|ps| {
                let m = Matching::new(0, ps.iter().map(|(a, b)| (id(a), id(b))));
                audit_stability(&m, &p, &q).is_empty()
            })
            .collect();
        assert_eq!(stable.len(), 1);
        assert_eq!(stable[0], &vec![("t1", "r1"), ("t2", "r2")]);

        let swapped = Matching::new(0, [(id("t1"), id("r2")), (id("t2"), id("r1"))]);
        assert_eq!(audit_stability(&swapped, &p, &q).len(), 2);
    }

    #[test]
    fn receiver_quota_absorbs_all() {
        let p = profile(&[("t1", &["r"]), ("t2", &["r"])], &[("r", &["t2", "t1"])]);
        let q = Quota::new(1, 2).unwrap();
        let m = deferred_acceptance(&p, &q, Proposer::Vtx, 3);
        assert_eq!(m.len(), 2);
        assert_eq!(m.epoch, 3);
        assert!(m.respects(&q));
    }

    #[test]
    fn empty_lists_give_empty_matching() {
        let p = profile(&[("t1", &[])], &[("r1", &[])]);
        assert!(deferred_acceptance(&p, &Quota::default(), Proposer::Vtx, 0).is_empty());
        assert!(deferred_acceptance(&PreferenceProfile::default(), &Quota::default(), Proposer::Vrx, 0).is_empty());
    }

    #[test]
    fn empty_matching_blocked_by_every_mutual_pair() {
        let p = profile(
            &[("t1", &["r1", "r2"]), ("t2", &["r1"])],
            &[("r1", &["t1", "t2"]), ("r2", &["t2"])],
        );
        let b = audit_stability(&Matching::default(), &p, &Quota::default());
        // (t1, r2) is listed only by t1, (t2, r2) only by r2
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn unilateral_listing_is_not_acceptable() {
        let p = profile(&[("t1", &["r1"])], &[("r1", &[])]);
        assert!(deferred_acceptance(&p, &Quota::default(), Proposer::Vtx, 0).is_empty());
    }

    #[test]
    fn proposing_side_picks_its_optimal_matching() {
        // two stable matchings; each side gets its favourite when proposing
        let p = profile(
            &[("t1", &["r1", "r2"]), ("t2", &["r2", "r1"])],
            &[("r1", &["t2", "t1"]), ("r2", &["t1", "t2"])],
        );
        let q = Quota::default();
        let tx = deferred_acceptance(&p, &q, Proposer::Vtx, 0);
        let rx = deferred_acceptance(&p, &q, Proposer::Vrx, 0);
        assert_eq!(pairs(&tx), [("t1", "r1"), ("t2", "r2")]);
        assert_eq!(pairs(&rx), [("t1", "r2"), ("t2", "r1")]);
        assert!(audit_stability(&tx, &p, &q).is_empty());
        assert!(audit_stability(&rx, &p, &q).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn market() -> impl Strategy<Value = (PreferenceProfile, Quota)> {
            (1usize..7, 1usize..7, 1usize..3, 1usize..4).prop_flat_map(|(n, k, qn, qk)| {
                let cells = n * k;
                (
                    proptest::collection::vec((any::<Option<u16>>(), any::<Option<u16>>()), cells),
                    Just((n, k, qn, qk)),
                )
                    .prop_map(|(utils, (n, k, qn, qk))| {
                        let entries = (0..n).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| {
                            let (a, b) = utils[i * k + j];
                            (
                                VehicleId::new(&format!("t{i}")),
                                VehicleId::new(&format!("r{j}")),
                                a.map(f64::from),
                                b.map(f64::from),
                            )
                        });
                        (PreferenceProfile::from_utilities(entries), Quota::new(qn, qk).unwrap())
                    })
            })
        }

        proptest! {
            #[test]
            fn da_is_stable_and_feasible((prefs, quota) in market()) {
                for side in [Proposer::Vtx, Proposer::Vrx] {
                    let m = deferred_acceptance(&prefs, &quota, side, 0);
                    prop_assert!(m.respects(&quota));
                    prop_assert!(audit_stability(&m, &prefs, &quota).is_empty());
                    prop_assert_eq!(&m, &deferred_acceptance(&prefs, &quota, side, 0));
                }
            }
        }
    }
}
