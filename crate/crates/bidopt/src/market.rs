//! Problem instances: campaigns, targeting groups, admissibility, strategies,
//! cost evaluation and feasibility checks.
//!
//! Targeting groups partition the universe of bid-request types so that every
//! type in a group belongs to exactly the same set of campaigns; a campaign
//! may then bid on a group iff the group's types all fall inside its criteria.

use crate::error::{Error, Result};
use crate::supply_curve::SupplyCurve;
use std::collections::{BTreeMap, BTreeSet};

/// Relative feasibility tolerance (vs. a campaign's impression target).
pub const EPS_FEAS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Campaign {
    pub id: String,
    /// Required impressions I over the decision period.
    pub impressions: f64,
    /// Request-type criteria, when the instance was given in criteria form.
    pub criteria: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone)]
pub struct TargetingGroup {
    pub id: String,
    pub curve: SupplyCurve,
    /// Member request types, when known.
    pub member_types: Option<BTreeSet<String>>,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub campaigns: Vec<Campaign>,
    pub groups: Vec<TargetingGroup>,
    /// A_i: per campaign id, the ids of groups it may bid on.
    pub admissible: BTreeMap<String, BTreeSet<String>>,
}

impl ProblemInstance {
    /// Builds an instance from explicit groups and per-campaign group lists.
    /// Zero-demand campaigns and groups no campaign may bid on are dropped.
    pub fn from_groups(
        campaigns: Vec<(String, f64, Vec<String>)>,
        groups: Vec<(String, SupplyCurve)>,
    ) -> Result<Self> {
        let known: BTreeSet<&String> = groups.iter().map(|(id, _)| id).collect();
        let mut admissible = BTreeMap::new();
        let mut kept = Vec::new();
        for (id, impressions, gids) in campaigns {
            if impressions < 0.0 || !impressions.is_finite() {
                return Err(Error::Domain(format!("campaign {id}: bad impression target")));
            }
            if impressions == 0.0 {
                continue;
            }
            let mut set = BTreeSet::new();
            for g in gids {
                if !known.contains(&g) {
                    return Err(Error::Domain(format!("campaign {id}: unknown group {g}")));
                }
                set.insert(g);
            }
            if admissible.insert(id.clone(), set).is_some() {
                return Err(Error::Domain(format!("duplicate campaign id {id}")));
            }
            kept.push(Campaign { id, impressions, criteria: None });
        }
        let groups = groups
            .into_iter()
            .filter(|(id, _)| admissible.values().any(|s| s.contains(id)))
            .map(|(id, curve)| TargetingGroup { id, curve, member_types: None })
            .collect();
        let inst = ProblemInstance { campaigns: kept, groups, admissible };
        inst.check_ids()?;
        Ok(inst)
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for g in &self.groups {
            if !seen.insert(&g.id) {
                return Err(Error::Domain(format!("duplicate group id {}", g.id)));
            }
        }
        Ok(())
    }

    pub fn campaign(&self, id: &str) -> Option<&Campaign> {
        self.campaigns.iter().find(|c| c.id == id)
    }

    pub fn group(&self, id: &str) -> Option<&TargetingGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    /// A_i: groups campaign `cid` may bid on.
    pub fn admissible_groups(&self, cid: &str) -> &BTreeSet<String> {
        static EMPTY: std::sync::OnceLock<BTreeSet<String>> = std::sync::OnceLock::new();
        self.admissible
            .get(cid)
            .unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    /// B_j: campaigns that may bid on group `gid`.
    pub fn eligible_campaigns(&self, gid: &str) -> BTreeSet<String> {
        self.admissible
            .iter()
            .filter(|(_, gs)| gs.contains(gid))
            .map(|(c, _)| c.clone())
            .collect()
    }

    pub fn is_admissible(&self, cid: &str, gid: &str) -> bool {
        self.admissible.get(cid).is_some_and(|s| s.contains(gid))
    }

    pub fn total_demand(&self) -> f64 {
        self.campaigns.iter().map(|c| c.impressions).sum()
    }
}

/// Signature-partition groups produced from raw campaign criteria.
#[derive(Debug, Clone)]
pub struct GroupingSkeleton {
    /// (group id, member types, eligible campaign ids), in deterministic order.
    pub groups: Vec<(String, BTreeSet<String>, BTreeSet<String>)>,
    /// A_i per campaign id.
    pub admissible: BTreeMap<String, BTreeSet<String>>,
}

/// Partitions request types into targeting groups by identical
/// campaign-membership signature. Types matching no campaign are dropped.
pub fn build_targeting_groups(
    campaigns: &[(String, BTreeSet<String>)],
    universe: &BTreeSet<String>,
) -> Result<GroupingSkeleton> {
    for (cid, criteria) in campaigns {
        if criteria.is_empty() {
            return Err(Error::Domain(format!("campaign {cid}: empty criteria")));
        }
        if let Some(t) = criteria.iter().find(|t| !universe.contains(*t)) {
            return Err(Error::Domain(format!("campaign {cid}: type {t} not in universe")));
        }
    }
    let mut by_signature: BTreeMap<BTreeSet<String>, BTreeSet<String>> = BTreeMap::new();
    for t in universe {
        let signature: BTreeSet<String> = campaigns
            .iter()
            .filter(|(_, criteria)| criteria.contains(t))
            .map(|(cid, _)| cid.clone())
            .collect();
        if signature.is_empty() {
            continue; // type matches no campaign
        }
        by_signature.entry(signature).or_default().insert(t.clone());
    }
    let mut groups = Vec::new();
    let mut admissible: BTreeMap<String, BTreeSet<String>> =
        campaigns.iter().map(|(cid, _)| (cid.clone(), BTreeSet::new())).collect();
    for (signature, types) in by_signature {
        let gid = format!("g_{}", types.iter().next().unwrap());
        for cid in &signature {
            admissible.get_mut(cid).unwrap().insert(gid.clone());
        }
        groups.push((gid, types, signature));
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(GroupingSkeleton { groups, admissible })
}

/// One bid value and one fraction per (campaign, group) pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PureAllocation {
    /// (campaign id, group id) -> (bid, fraction).
    pub entries: BTreeMap<(String, String), (f64, f64)>,
}

/// A finite distribution over bid values per (campaign, group) pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedStrategy {
    /// (campaign id, group id) -> [(bid, fraction)], fractions > 0, bids distinct.
    pub entries: BTreeMap<(String, String), Vec<(f64, f64)>>,
}

impl PureAllocation {
    /// Lifts to the equivalent single-bid mixed strategy.
    pub fn lift(&self) -> MixedStrategy {
        let entries = self
            .entries
            .iter()
            .filter(|(_, &(_, f))| f > 0.0)
            .map(|(k, &(b, f))| (k.clone(), vec![(b, f)]))
            .collect();
        MixedStrategy { entries }
    }
}

impl MixedStrategy {
    /// Total fraction mass placed on group `gid` across campaigns and bids.
    pub fn group_fraction(&self, gid: &str) -> f64 {
        self.entries
            .iter()
            .filter(|((_, g), _)| g == gid)
            .flat_map(|(_, pts)| pts.iter().map(|&(_, f)| f))
            .sum()
    }
}

fn check_admissible(instance: &ProblemInstance, cid: &str, gid: &str) -> Result<()> {
    if !instance.is_admissible(cid, gid) {
        return Err(Error::Domain(format!(
            "strategy entry for inadmissible pair ({cid}, {gid})"
        )));
    }
    Ok(())
}

/// Expected cost of a pure allocation: Σ γ_{i,j} · win_cost(D_j, b_{i,j}).
pub fn pure_cost(instance: &ProblemInstance, alloc: &PureAllocation) -> Result<f64> {
    let mut total = 0.0;
    for ((cid, gid), &(bid, frac)) in &alloc.entries {
        check_admissible(instance, cid, gid)?;
        let group = instance
            .group(gid)
            .ok_or_else(|| Error::Domain(format!("unknown group {gid}")))?;
        total += frac * group.curve.win_cost(bid)?;
    }
    Ok(total)
}

/// Expected cost of a mixed strategy: Σ over pairs and bid points.
pub fn mixed_cost(instance: &ProblemInstance, strategy: &MixedStrategy) -> Result<f64> {
    let mut total = 0.0;
    for ((cid, gid), points) in &strategy.entries {
        check_admissible(instance, cid, gid)?;
        let group = instance
            .group(gid)
            .ok_or_else(|| Error::Domain(format!("unknown group {gid}")))?;
        for &(bid, frac) in points {
            total += frac * group.curve.win_cost(bid)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// campaign id -> (impressions obtained, impressions required, pass).
    pub campaigns: BTreeMap<String, (f64, f64, bool)>,
    /// group id -> (total fraction, pass).
    pub groups: BTreeMap<String, (f64, bool)>,
    pub pass: bool,
}

/// Checks Σ_j Σ_b γ_{i,j}(b)·D_j(b) >= I_i per campaign and fraction sums <= 1
/// per group. Violations are reported, not raised.
pub fn check_feasible(instance: &ProblemInstance, strategy: &MixedStrategy) -> Result<FeasibilityReport> {
    let mut obtained: BTreeMap<String, f64> =
        instance.campaigns.iter().map(|c| (c.id.clone(), 0.0)).collect();
    let mut group_fracs: BTreeMap<String, f64> =
        instance.groups.iter().map(|g| (g.id.clone(), 0.0)).collect();
    for ((cid, gid), points) in &strategy.entries {
        check_admissible(instance, cid, gid)?;
        let group = instance
            .group(gid)
            .ok_or_else(|| Error::Domain(format!("unknown group {gid}")))?;
        for &(bid, frac) in points {
            *obtained.get_mut(cid).unwrap() += frac * group.curve.eval(bid)?;
            *group_fracs.get_mut(gid).unwrap() += frac;
        }
    }
    let mut campaigns = BTreeMap::new();
    let mut pass = true;
    for c in &instance.campaigns {
        let got = obtained[&c.id];
        let tol = if c.impressions == 0.0 { 1.0 } else { EPS_FEAS * c.impressions };
        let ok = got >= c.impressions - tol;
        pass &= ok;
        campaigns.insert(c.id.clone(), (got, c.impressions, ok));
    }
    let mut groups = BTreeMap::new();
    for g in &instance.groups {
        let f = group_fracs[&g.id];
        let ok = f <= 1.0 + EPS_FEAS;
        pass &= ok;
        groups.insert(g.id.clone(), (f, ok));
    }
    Ok(FeasibilityReport { campaigns, groups, pass })
}
