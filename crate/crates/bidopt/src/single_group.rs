//! Closed forms for one campaign bidding on one targeting group.

use crate::error::{Error, Result};
use crate::supply_curve::{SupplyCurve, EPS_BID};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SingleGroupSolution {
    pub b_star: f64,
    pub gamma_star: f64,
    pub pure_cost: f64,
    pub lower_bound: f64,
    /// min of the two analytic bounds below.
    pub gap_bound: f64,
    /// (1 − γ*)·∫₀^{b*} D.
    pub gap_bound_slack: f64,
    /// ((D(b*) − D⁻(b*)) / D(b*))·∫₀^{b*} D.
    pub gap_bound_jump: f64,
}

/// Optimal pure strategy, cost floor and gap bound for a single pair.
pub fn solve_single(curve: &SupplyCurve, demand: f64) -> Result<SingleGroupSolution> {
    if demand < 0.0 || !demand.is_finite() {
        return Err(Error::Domain(format!("bad demand {demand}")));
    }
    if demand == 0.0 {
        return Ok(SingleGroupSolution {
            b_star: 0.0,
            gamma_star: 0.0,
            pure_cost: 0.0,
            lower_bound: 0.0,
            gap_bound: 0.0,
            gap_bound_slack: 0.0,
            gap_bound_jump: 0.0,
        });
    }
    let b_star = curve.quantile(demand)?;
    let d = curve.eval(b_star)?;
    let gamma_star = demand / d;
    let integral = curve.integral(b_star)?;
    let pure_cost = demand * b_star - gamma_star * integral;
    let lower_bound = demand * b_star - integral;
    let gap_bound_slack = (1.0 - gamma_star) * integral;
    let jump = d - curve.left_limit(b_star)?;
    let gap_bound_jump = if d > 0.0 { jump / d * integral } else { 0.0 };
    Ok(SingleGroupSolution {
        b_star,
        gamma_star,
        pure_cost,
        lower_bound,
        gap_bound: gap_bound_slack.min(gap_bound_jump),
        gap_bound_slack,
        gap_bound_jump,
    })
}

/// Two-bid strategy {b1, b*} obtaining exactly `demand` impressions.
/// Returns the (bid, fraction) points and the expected cost.
pub fn two_point_mixed(
    curve: &SupplyCurve,
    demand: f64,
    b1: f64,
) -> Result<(Vec<(f64, f64)>, f64)> {
    if demand <= 0.0 {
        return Err(Error::Domain(format!("demand must be positive, got {demand}")));
    }
    if b1 < 0.0 {
        return Err(Error::NegativeBid(b1));
    }
    let b_star = curve.quantile(demand)?;
    if b1 >= b_star - EPS_BID {
        return Err(Error::Domain(format!("b1 {b1} must lie below b* {b_star}")));
    }
    if curve.left_limit(b_star)? <= 0.0 {
        return Err(Error::Domain(
            "mixing requires positive supply below the pure bid".into(),
        ));
    }
    let d_star = curve.eval(b_star)?;
    let d1 = curve.eval(b1)?;
    let gamma1 = (d_star - demand) / (d_star - d1);
    let gamma2 = 1.0 - gamma1;
    let cost = gamma1 * curve.win_cost(b1)? + gamma2 * curve.win_cost(b_star)?;
    Ok((vec![(b1, gamma1), (b_star, gamma2)], cost))
}
