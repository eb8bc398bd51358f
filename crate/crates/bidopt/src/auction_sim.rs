//! Second-price auction simulator.
//!
//! Each targeting group's request stream is synthesized so that the win
//! probability at any bid b equals D_j(b)/V_j: the competing price takes a
//! knot bid with probability proportional to the curve's jump there. Ties at
//! a knot count as wins, matching the curve's right-continuity. Step curves
//! only; a linear segment would need a continuous competing-price model.
//!
//! RNG: ChaCha8, seeded from the run seed, with one logical stream per
//! (replication, group, purpose) where purpose 0 draws competing prices and
//! purpose 1 draws allocation decisions — one uniform draw per request each.

use crate::error::{Error, Result};
use crate::market::{MixedStrategy, ProblemInstance};
use crate::supply_curve::EPS_BID;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct BidRequest {
    pub group: String,
    pub competing_price: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignStats {
    pub impressions: f64,
    pub cost: f64,
    pub mean_impressions: f64,
    pub mean_cost: f64,
    pub expected_impressions: f64,
    pub expected_cost: f64,
    pub se_impressions: f64,
    pub se_cost: f64,
    pub z_impressions: f64,
    pub z_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupStats {
    pub requests: u64,
    pub bids: u64,
    pub wins: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub replications: u64,
    pub campaigns: BTreeMap<String, CampaignStats>,
    pub groups: BTreeMap<String, GroupStats>,
    pub total_cost: f64,
}

fn stream_rng(seed: u64, replication: u64, group_index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((replication << 24) | (group_index << 1) | purpose);
    rng
}

/// Knot-bid atoms (value, probability weight) of a step curve's competing
/// price; weights sum to the max volume.
fn atoms(instance: &ProblemInstance, gid: &str) -> Result<Vec<(f64, f64)>> {
    let group = instance
        .group(gid)
        .ok_or_else(|| Error::Domain(format!("unknown group {gid}")))?;
    if !group.curve.is_step() {
        return Err(Error::UnsupportedCurve { group: gid.to_string() });
    }
    let mut prev = 0.0;
    let mut out = Vec::new();
    for &(b, v) in group.curve.knots() {
        if v > prev {
            out.push((b, v - prev));
        }
        prev = v;
    }
    Ok(out)
}

fn draw_price(atoms: &[(f64, f64)], volume: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen::<f64>() * volume;
    let mut cum = 0.0;
    for &(b, w) in atoms {
        cum += w;
        if u < cum {
            return b;
        }
    }
    atoms.last().map(|a| a.0).unwrap_or(0.0)
}

/// Deterministic request stream for one group (replication 0 of the seed).
pub fn sample_stream(instance: &ProblemInstance, gid: &str, seed: u64) -> Result<Vec<BidRequest>> {
    let gi = instance
        .groups
        .iter()
        .position(|g| g.id == gid)
        .ok_or_else(|| Error::Domain(format!("unknown group {gid}")))?;
    let atoms = atoms(instance, gid)?;
    let volume = instance.group(gid).unwrap().curve.max_volume();
    let count = volume.round() as u64;
    let mut rng = stream_rng(seed, 0, gi as u64, 0);
    Ok((0..count)
        .map(|_| BidRequest { group: gid.to_string(), competing_price: draw_price(&atoms, volume, &mut rng) })
        .collect())
}

/// Per-group strategy rows: (campaign, bid, fraction) in deterministic order.
fn strategy_rows(strategy: &MixedStrategy) -> BTreeMap<String, Vec<(String, f64, f64)>> {
    let mut rows: BTreeMap<String, Vec<(String, f64, f64)>> = BTreeMap::new();
    for ((c, g), points) in &strategy.entries {
        for &(b, f) in points {
            rows.entry(g.clone()).or_default().push((c.clone(), b, f));
        }
    }
    rows
}

/// One allocation decision: the (campaign, bid) drawn by the strategy's
/// fractions, or None for a no-bid. `u` is a uniform draw in [0, 1).
pub fn serve(rows: &[(String, f64, f64)], u: f64) -> Option<(String, f64)> {
    let mut cum = 0.0;
    for (c, b, f) in rows {
        cum += f;
        if u < cum {
            return Some((c.clone(), *b));
        }
    }
    None
}

/// Poisson sample with the given mean, via chunked inverse products.
fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    let mut total = 0u64;
    let mut remaining = mean;
    while remaining > 0.0 {
        let chunk = remaining.min(30.0);
        remaining -= chunk;
        let limit = (-chunk).exp();
        let mut product: f64 = rng.gen();
        let mut count = 0u64;
        while product > limit {
            product *= rng.gen::<f64>();
            count += 1;
        }
        total += count;
    }
    total
}

/// Replays a strategy against synthetic streams and compares realized
/// impressions and cost with the analytic expectations.
pub fn run(
    instance: &ProblemInstance,
    strategy: &MixedStrategy,
    seed: u64,
    replications: u64,
    poisson_requests: bool,
) -> Result<SimReport> {
    let rows = strategy_rows(strategy);
    let group_atoms: Vec<Vec<(f64, f64)>> = instance
        .groups
        .iter()
        .map(|g| atoms(instance, &g.id))
        .collect::<Result<_>>()?;

    let mut per_rep_imps: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_rep_cost: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for c in &instance.campaigns {
        per_rep_imps.insert(c.id.clone(), vec![0.0; replications as usize]);
        per_rep_cost.insert(c.id.clone(), vec![0.0; replications as usize]);
    }
    let mut groups: BTreeMap<String, GroupStats> = instance
        .groups
        .iter()
        .map(|g| (g.id.clone(), GroupStats { requests: 0, bids: 0, wins: 0 }))
        .collect();

    let empty: Vec<(String, f64, f64)> = Vec::new();
    for rep in 0..replications {
        for (gi, g) in instance.groups.iter().enumerate() {
            let volume = g.curve.max_volume();
            let mut price_rng = stream_rng(seed, rep, gi as u64, 0);
            let mut decision_rng = stream_rng(seed, rep, gi as u64, 1);
            let count = if poisson_requests {
                poisson(volume, &mut price_rng)
            } else {
                volume.round() as u64
            };
            let grows = rows.get(&g.id).unwrap_or(&empty);
            let stats = groups.get_mut(&g.id).unwrap();
            // Kahan-compensated cost accumulation per (campaign, replication).
            let mut comp: BTreeMap<&String, f64> = Default::default();
            for _ in 0..count {
                stats.requests += 1;
                let cp = draw_price(&group_atoms[gi], volume, &mut price_rng);
                let u: f64 = decision_rng.gen();
                if let Some((cid, bid)) = serve(grows, u) {
                    stats.bids += 1;
                    if bid >= cp - EPS_BID {
                        stats.wins += 1;
                        let imp = per_rep_imps.get_mut(&cid).unwrap();
                        imp[rep as usize] += 1.0;
                        let cost = per_rep_cost.get_mut(&cid).unwrap();
                        let c = comp.entry(&instance.campaign(&cid).unwrap().id).or_default();
                        // Kahan step.
                        let y = cp - *c;
                        let t = cost[rep as usize] + y;
                        *c = (t - cost[rep as usize]) - y;
                        cost[rep as usize] = t;
                    }
                }
            }
        }
    }

    // Analytic expectations per campaign.
    let mut expected_imps: BTreeMap<String, f64> = BTreeMap::new();
    let mut expected_cost: BTreeMap<String, f64> = BTreeMap::new();
    for ((c, g), points) in &strategy.entries {
        let curve = &instance.group(g).unwrap().curve;
        for &(b, f) in points {
            *expected_imps.entry(c.clone()).or_default() += f * curve.eval(b)?;
            *expected_cost.entry(c.clone()).or_default() += f * curve.win_cost(b)?;
        }
    }

    let mean_se = |xs: &[f64]| -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return (mean, 0.0);
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };

    let mut campaigns = BTreeMap::new();
    let mut total_cost = 0.0;
    for c in &instance.campaigns {
        let imps = &per_rep_imps[&c.id];
        let costs = &per_rep_cost[&c.id];
        let (mi, si) = mean_se(imps);
        let (mc, sc) = mean_se(costs);
        let ei = expected_imps.get(&c.id).copied().unwrap_or(0.0);
        let ec = expected_cost.get(&c.id).copied().unwrap_or(0.0);
        let z = |mean: f64, se: f64, expect: f64| {
            if se > 0.0 {
                (mean - expect) / se
            } else if (mean - expect).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        total_cost += costs.iter().sum::<f64>();
        campaigns.insert(
            c.id.clone(),
            CampaignStats {
                impressions: imps.iter().sum(),
                cost: costs.iter().sum(),
                mean_impressions: mi,
                mean_cost: mc,
                expected_impressions: ei,
                expected_cost: ec,
                se_impressions: si,
                se_cost: sc,
                z_impressions: z(mi, si, ei),
                z_cost: z(mc, sc, ec),
            },
        );
    }
    Ok(SimReport { seed, replications, campaigns, groups, total_cost })
}
