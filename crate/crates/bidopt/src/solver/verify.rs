//! Sufficient-condition optimality verifier for pure allocations.
//!
//! An allocation is checked for component structure (one bid value per
//! connected block of positive entries), then for three conditions that
//! together certify optimality when the supply curves are continuous at the
//! component prices:
//!   (a) every campaign gets exactly its demand and, per component, pooled
//!       supply at the price equals pooled demand;
//!   (b) groups the component's campaigns could use but do not have zero
//!       supply below the component price;
//!   (c) no campaign is admissible to a group of a lower-priced component.

use crate::error::Result;
use crate::market::{ProblemInstance, PureAllocation};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    VerifiedOptimal,
    NotApplicableDiscontinuous,
    NotVerified,
    NotComponentStructured,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub component_structured: bool,
    /// (a) exact demand per campaign and supply-equals-demand per component.
    pub exact_demand_and_supply: Option<bool>,
    /// (b) zero supply below the price on reachable unused groups.
    pub unused_groups_empty_below: Option<bool>,
    /// (c) no admissibility into lower-priced components.
    pub no_cheaper_admissible: Option<bool>,
    pub details: Vec<String>,
}

const POS: f64 = 1e-15;

pub fn verify_sufficient(
    instance: &ProblemInstance,
    alloc: &PureAllocation,
) -> Result<VerificationReport> {
    let mut details = Vec::new();
    let positive: Vec<(&String, &String, f64, f64)> = alloc
        .entries
        .iter()
        .filter(|(_, &(_, f))| f > POS)
        .map(|((c, g), &(b, f))| (c, g, b, f))
        .collect();

    // Union-find over campaigns and groups linked by positive entries.
    let mut nodes: Vec<String> = Vec::new();
    let mut index: BTreeMap<(bool, &String), usize> = BTreeMap::new();
    for (c, g, _, _) in &positive {
        for (is_campaign, id) in [(true, *c), (false, *g)] {
            index.entry((is_campaign, id)).or_insert_with(|| {
                nodes.push(id.clone());
                nodes.len() - 1
            });
        }
    }
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for (c, g, _, _) in &positive {
        let a = index[&(true, *c)];
        let b = index[&(false, *g)];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }

    struct Comp {
        campaigns: BTreeSet<String>,
        groups: BTreeSet<String>,
        bids: Vec<f64>,
    }
    let mut comps: BTreeMap<usize, Comp> = BTreeMap::new();
    for (c, g, b, _) in &positive {
        let root = find(&mut parent, index[&(true, *c)]);
        let comp = comps.entry(root).or_insert_with(|| Comp {
            campaigns: BTreeSet::new(),
            groups: BTreeSet::new(),
            bids: Vec::new(),
        });
        comp.campaigns.insert((*c).clone());
        comp.groups.insert((*g).clone());
        comp.bids.push(*b);
    }

    // One bid value per block, or the structure check fails.
    let mut prices: Vec<(Comp, f64)> = Vec::new();
    for (_, comp) in comps {
        let lo = comp.bids.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = comp.bids.iter().cloned().fold(0.0_f64, f64::max);
        if hi - lo > 1e-9 * hi.max(1.0) {
            details.push(format!(
                "block with campaigns {:?} uses bids spanning [{lo}, {hi}]",
                comp.campaigns
            ));
            return Ok(VerificationReport {
                verdict: Verdict::NotComponentStructured,
                component_structured: false,
                exact_demand_and_supply: None,
                unused_groups_empty_below: None,
                no_cheaper_admissible: None,
                details,
            });
        }
        prices.push((comp, hi));
    }

    let used_groups: BTreeSet<&String> = positive.iter().map(|(_, g, _, _)| *g).collect();

    // (a) exact demand per campaign; supply equals demand per component.
    let mut cond_a = true;
    let mut discontinuous_at_price = false;
    for c in &instance.campaigns {
        let got: f64 = positive
            .iter()
            .filter(|(cid, _, _, _)| **cid == c.id)
            .map(|(_, g, b, f)| f * instance.group(g).unwrap().curve.eval(*b).unwrap())
            .sum();
        if (got - c.impressions).abs() > 1e-9 * c.impressions.max(1.0) {
            cond_a = false;
            details.push(format!(
                "campaign {} obtains {got}, demand is {}",
                c.id, c.impressions
            ));
        }
    }
    for (comp, p) in &prices {
        let demand: f64 = comp
            .campaigns
            .iter()
            .map(|c| instance.campaign(c).unwrap().impressions)
            .sum();
        let supply: f64 = comp
            .groups
            .iter()
            .map(|g| instance.group(g).unwrap().curve.eval(*p).unwrap())
            .sum();
        if (supply - demand).abs() > 1e-9 * demand.max(1.0) {
            cond_a = false;
            details.push(format!(
                "component at price {p}: pooled supply {supply} != pooled demand {demand}"
            ));
            for g in &comp.groups {
                let curve = &instance.group(g).unwrap().curve;
                if curve.eval(*p).unwrap() - curve.left_limit(*p).unwrap() > 1e-9 {
                    discontinuous_at_price = true;
                }
            }
        }
    }

    // (b) reachable unused groups must have no supply below the price.
    let mut cond_b = true;
    for (comp, p) in &prices {
        for c in &comp.campaigns {
            for g in instance.admissible_groups(c) {
                if used_groups.contains(g) {
                    continue;
                }
                let below = instance.group(g).unwrap().curve.left_limit(*p).unwrap();
                if below > 1e-9 {
                    cond_b = false;
                    details.push(format!(
                        "unused group {g} reachable from campaign {c} has supply {below} below {p}"
                    ));
                }
            }
        }
    }

    // (c) no campaign admissible to a strictly cheaper component's groups.
    let mut cond_c = true;
    for (hi_comp, hi_p) in &prices {
        for (lo_comp, lo_p) in &prices {
            if *lo_p >= hi_p - 1e-12 {
                continue;
            }
            for c in &hi_comp.campaigns {
                for g in &lo_comp.groups {
                    if instance.is_admissible(c, g) {
                        cond_c = false;
                        details.push(format!(
                            "campaign {c} (price {hi_p}) is admissible to group {g} of a cheaper component (price {lo_p})"
                        ));
                    }
                }
            }
        }
    }

    let verdict = if cond_a && cond_b && cond_c {
        Verdict::VerifiedOptimal
    } else if !cond_a && discontinuous_at_price {
        Verdict::NotApplicableDiscontinuous
    } else {
        Verdict::NotVerified
    };
    Ok(VerificationReport {
        verdict,
        component_structured: true,
        exact_demand_and_supply: Some(cond_a),
        unused_groups_empty_below: Some(cond_b),
        no_cheaper_admissible: Some(cond_c),
        details,
    })
}
