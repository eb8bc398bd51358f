//! Fraction QP at a fixed price: minimize the squared per-campaign shortfall
//! subject to per-group fraction budgets, by projected gradient descent.
//!
//! The objective is separable across campaigns (one rank-one block each), so
//! a fixed step of 1/L with L = 2·max_i Σ_j D_j(p)² is safe. The feasibility
//! verdict ("done") is taken from an exact transportation check instead of the
//! descent's objective, since whether all demands can be met at a price is a
//! combinatorial fact.

use crate::error::Result;
use crate::flow::transportation_feasible_exact;
use crate::market::ProblemInstance;
use crate::solver::EPS_RES;
use std::collections::{BTreeMap, BTreeSet};

/// Objective improvement threshold factor (× (Σ I)²) over the patience window.
const EPS_QP: f64 = 1e-12;
const PATIENCE: usize = 50;
const MAX_ITERS: usize = 200_000;

#[derive(Debug, Clone)]
pub struct QPSolution {
    /// t_{i,j} per admissible (campaign, group) pair of the subproblem.
    pub fractions: BTreeMap<(String, String), f64>,
    /// r_i = Σ_j t_{i,j} D_j(p).
    pub received: BTreeMap<String, f64>,
    /// d_i = I_i − r_i, clamped to 0 below EPS_RES × total demand.
    pub residuals: BTreeMap<String, f64>,
    /// Σ d_i² (unclamped).
    pub objective: f64,
    /// Whether every demand can be met at this price.
    pub done: bool,
    /// The price the subproblem was solved at.
    pub price: f64,
}

pub(super) fn solve(
    instance: &ProblemInstance,
    cc: &BTreeSet<String>,
    ct: &BTreeSet<String>,
    p: f64,
    pairs: &[(String, String)],
) -> Result<QPSolution> {
    let cids: Vec<&String> = cc.iter().collect();
    let gids: Vec<&String> = ct.iter().collect();
    let cidx: BTreeMap<&String, usize> = cids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let gidx: BTreeMap<&String, usize> = gids.iter().enumerate().map(|(k, v)| (*v, k)).collect();
    let demands: Vec<f64> = cids
        .iter()
        .map(|c| instance.campaign(c).unwrap().impressions)
        .collect();
    let caps: Vec<f64> = gids
        .iter()
        .map(|g| instance.group(g).unwrap().curve.eval(p))
        .collect::<Result<_>>()?;
    let pair_idx: Vec<(usize, usize)> = pairs.iter().map(|(c, g)| (cidx[c], gidx[g])).collect();
    let total: f64 = demands.iter().sum();

    let per_campaign: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); cids.len()];
        for (k, &(i, _)) in pair_idx.iter().enumerate() {
            v[i].push(k);
        }
        v
    };
    let per_group: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); gids.len()];
        for (k, &(_, j)) in pair_idx.iter().enumerate() {
            v[j].push(k);
        }
        v
    };

    let lipschitz = 2.0
        * per_campaign
            .iter()
            .map(|ks| ks.iter().map(|&k| caps[pair_idx[k].1].powi(2)).sum::<f64>())
            .fold(0.0_f64, f64::max);

    let mut t = vec![0.0_f64; pair_idx.len()];
    let received = |t: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; cids.len()];
        for (k, &(i, j)) in pair_idx.iter().enumerate() {
            r[i] += t[k] * caps[j];
        }
        r
    };
    let objective = |r: &[f64]| -> f64 {
        r.iter().zip(&demands).map(|(r, d)| (d - r).powi(2)).sum()
    };

    if lipschitz > 0.0 {
        let step = 1.0 / lipschitz;
        let eps_stop = EPS_QP * total * total;
        let mut best = f64::INFINITY;
        let mut best_at_window_start = f64::INFINITY;
        for iter in 0..MAX_ITERS {
            let r = received(&t);
            let obj = objective(&r);
            best = best.min(obj);
            if obj <= 1e-20 * total * total {
                break;
            }
            if iter % PATIENCE == 0 {
                if best_at_window_start - best < eps_stop && iter > 0 {
                    break;
                }
                best_at_window_start = best;
            }
            for (k, &(i, j)) in pair_idx.iter().enumerate() {
                t[k] += step * 2.0 * (demands[i] - r[i]) * caps[j];
            }
            for ks in &per_group {
                project_group(&mut t, ks);
            }
        }
    }

    let r = received(&t);
    let obj = objective(&r);
    let done = transportation_feasible_exact(&demands, &caps, &pair_idx);

    let mut fractions = BTreeMap::new();
    for (k, (c, g)) in pairs.iter().enumerate() {
        fractions.insert((c.clone(), g.clone()), t[k]);
    }
    let mut received_map = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    for (i, c) in cids.iter().enumerate() {
        received_map.insert((*c).clone(), r[i]);
        let d = demands[i] - r[i];
        residuals.insert((*c).clone(), if d < EPS_RES * total { 0.0 } else { d });
    }
    Ok(QPSolution { fractions, received: received_map, residuals, objective: obj, done, price: p })
}

/// Euclidean projection of the group's coordinates onto {t >= 0, Σ t <= 1}.
fn project_group(t: &mut [f64], ks: &[usize]) {
    let clamped_sum: f64 = ks.iter().map(|&k| t[k].max(0.0)).sum();
    if clamped_sum <= 1.0 {
        for &k in ks {
            t[k] = t[k].max(0.0);
        }
        return;
    }
    // Project onto the simplex Σ t = 1, t >= 0: find the threshold tau with
    // Σ max(t - tau, 0) = 1.
    let mut vals: Vec<f64> = ks.iter().map(|&k| t[k]).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (m, &v) in vals.iter().enumerate() {
        cum += v;
        let candidate = (cum - 1.0) / (m as f64 + 1.0);
        if m + 1 == vals.len() || vals[m + 1] <= candidate {
            tau = candidate;
            break;
        }
    }
    for &k in ks {
        t[k] = (t[k] - tau).max(0.0);
    }
}
