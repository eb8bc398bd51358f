//! Two-bid mixed strategies per component.
//!
//! Inside a component every campaign bids the component price p. When a
//! group's supply jumps at p, spreading part of each campaign's fraction to a
//! lower bid b1 keeps the impression total exact while paying the jump's
//! impressions only their true marginal prices; with b1 at the left endpoint
//! of the flat region ending at p the cost meets the analytic floor exactly.

use crate::error::{Error, Result};
use crate::market::{MixedStrategy, ProblemInstance};
use crate::solver::{Component, Decomposition};
use crate::supply_curve::{SupplyCurve, EPS_BID};

#[derive(Debug, Clone)]
pub enum B1Choice {
    /// Per group, the left endpoint of the maximal flat region ending at the
    /// component price (exact floor attainment on step curves).
    Auto,
    /// b1 = p − δ for every component (clamped at 0).
    Delta(f64),
    /// One explicit b1 per component, in component order; None keeps a
    /// component pure.
    PerComponent(Vec<Option<f64>>),
}

/// Builds the two-bid mixed strategy for a decomposition.
pub fn build_mixed(
    decomposition: &Decomposition,
    instance: &ProblemInstance,
    choice: &B1Choice,
) -> Result<MixedStrategy> {
    if let B1Choice::Delta(d) = choice {
        if *d <= 0.0 || !d.is_finite() {
            return Err(Error::Domain(format!("delta must be positive, got {d}")));
        }
    }
    if let B1Choice::PerComponent(v) = choice {
        if v.len() != decomposition.components.len() {
            return Err(Error::Domain(format!(
                "expected {} per-component b1 values, got {}",
                decomposition.components.len(),
                v.len()
            )));
        }
    }
    let mut strategy = MixedStrategy::default();
    for (k, comp) in decomposition.components.iter().enumerate() {
        let b1 = match choice {
            B1Choice::Auto => None,
            B1Choice::Delta(d) => Some((comp.price - d).max(0.0)),
            B1Choice::PerComponent(v) => match v[k] {
                None => {
                    keep_pure(comp, &mut strategy);
                    continue;
                }
                Some(b1) => {
                    if b1 >= comp.price - EPS_BID {
                        return Err(Error::Domain(format!(
                            "b1 {} must lie below the component price {}",
                            b1, comp.price
                        )));
                    }
                    Some(b1)
                }
            },
        };
        mix_component(comp, instance, b1, &mut strategy)?;
    }
    Ok(strategy)
}

fn keep_pure(comp: &Component, strategy: &mut MixedStrategy) {
    for (c, per_group) in &comp.fractions {
        for (g, &t) in per_group {
            if t > 0.0 {
                strategy
                    .entries
                    .insert((c.clone(), g.clone()), vec![(comp.price, t)]);
            }
        }
    }
}

/// Largest bid below `limit` at which the curve's volume does not exceed
/// `max_volume`; 0 if no knot qualifies.
fn fallback_b1(curve: &SupplyCurve, limit: f64, max_volume: f64) -> f64 {
    let tol = 1e-9 * max_volume.max(1.0);
    let mut best = 0.0;
    for &(b, _) in curve.knots() {
        if b < limit - EPS_BID && curve.eval(b).unwrap() <= max_volume + tol && b > best {
            best = b;
        }
    }
    best
}

fn mix_component(
    comp: &Component,
    instance: &ProblemInstance,
    b1: Option<f64>,
    strategy: &mut MixedStrategy,
) -> Result<()> {
    let p = comp.price;
    // Proposition hypothesis: pooled supply just below p must be positive;
    // otherwise the pure component already meets the analytic floor.
    let pooled_left: f64 = comp
        .groups
        .iter()
        .map(|g| instance.group(g).unwrap().curve.left_limit(p).unwrap())
        .sum();
    if pooled_left <= 0.0 {
        keep_pure(comp, strategy);
        return Ok(());
    }

    // Group usage s_j = Σ_i t_{i,j}.
    let mut used: std::collections::BTreeMap<&String, f64> = Default::default();
    for per_group in comp.fractions.values() {
        for (g, &t) in per_group {
            *used.entry(g).or_default() += t;
        }
    }

    for (c, per_group) in &comp.fractions {
        for (g, &t) in per_group {
            if t <= 0.0 {
                continue;
            }
            let curve = &instance.group(g).unwrap().curve;
            let dp = curve.eval(p)?;
            let s = used[g];
            if dp <= 0.0 || s <= 0.0 {
                continue;
            }
            let b1_g = match b1 {
                Some(b) => b,
                None => {
                    let ll = curve.left_limit(p)?;
                    if ll <= 0.0 {
                        // No supply below p in this group: pure entry.
                        strategy.entries.insert((c.clone(), g.clone()), vec![(p, t)]);
                        continue;
                    }
                    curve.quantile(ll)?
                }
            };
            let mut db1 = curve.eval(b1_g)?;
            let mut b1_g = b1_g;
            // Guard against a negative share at p when the group is used
            // below its left limit: lower b1 until D(b1) <= s·D(p).
            if db1 > s * dp + 1e-9 * dp {
                b1_g = fallback_b1(curve, b1_g, s * dp);
                db1 = curve.eval(b1_g)?;
            }
            if dp - db1 <= 1e-12 * dp.max(1.0) || b1_g >= p - EPS_BID {
                // Flat through (b1, p]: mixing is a no-op, keep the pure entry.
                strategy.entries.insert((c.clone(), g.clone()), vec![(p, t)]);
                continue;
            }
            let gamma = t / s; // normalized share of the whole group
            let gamma_b1 = (gamma - t) * dp / (dp - db1);
            let gamma_p = gamma - gamma_b1;
            let mut points = Vec::new();
            if gamma_b1 > 1e-15 {
                points.push((b1_g, gamma_b1));
            }
            if gamma_p > 1e-15 {
                points.push((p, gamma_p));
            }
            if !points.is_empty() {
                strategy.entries.insert((c.clone(), g.clone()), points);
            }
        }
    }
    Ok(())
}
