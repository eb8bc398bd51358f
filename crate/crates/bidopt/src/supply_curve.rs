//! Right-continuous non-decreasing supply curves.
//!
//! A curve maps a bid value to the number of impressions won over the decision
//! period when bidding that value on every request of a targeting group. It is
//! stored as a knot list with a segment kind per interval: `Step` keeps the
//! left knot's volume over the open interval (a jump at the right knot),
//! `Linear` interpolates between adjacent knot volumes (continuous).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Absolute tolerance for bid comparisons.
pub const EPS_BID: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Step,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyCurve {
    /// (bid, volume) pairs, bids strictly increasing, volumes non-decreasing.
    knots: Vec<(f64, f64)>,
    /// One per interval between adjacent knots (`knots.len() - 1` entries).
    segments: Vec<SegmentKind>,
    /// Integral of the curve over [0, bid_k], per knot.
    cum: Vec<f64>,
}

impl SupplyCurve {
    pub fn new(knots: Vec<(f64, f64)>, segments: Vec<SegmentKind>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Domain("curve needs at least one knot".into()));
        }
        if segments.len() + 1 != knots.len() {
            return Err(Error::Domain(format!(
                "expected {} segment kinds, got {}",
                knots.len() - 1,
                segments.len()
            )));
        }
        for &(b, v) in &knots {
            if !b.is_finite() || !v.is_finite() {
                return Err(Error::Domain("non-finite knot".into()));
            }
            if b < 0.0 {
                return Err(Error::NegativeBid(b));
            }
            if v < 0.0 {
                return Err(Error::Domain(format!("negative volume {v}")));
            }
        }
        for w in knots.windows(2) {
            if w[1].0 - w[0].0 <= EPS_BID {
                return Err(Error::Domain(format!(
                    "knot bids must be strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::Domain(format!(
                    "volumes must be non-decreasing: {} then {}",
                    w[0].1, w[1].1
                )));
            }
        }
        // Prefix integrals at knots; the curve is 0 below the first knot.
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        for k in 0..segments.len() {
            let (b0, v0) = knots[k];
            let (b1, v1) = knots[k + 1];
            let piece = match segments[k] {
                SegmentKind::Step => v0 * (b1 - b0),
                SegmentKind::Linear => 0.5 * (v0 + v1) * (b1 - b0),
            };
            cum.push(cum[k] + piece);
        }
        Ok(SupplyCurve { knots, segments, cum })
    }

    /// All-step curve from knot points.
    pub fn step(knots: Vec<(f64, f64)>) -> Result<Self> {
        let n = knots.len().saturating_sub(1);
        Self::new(knots, vec![SegmentKind::Step; n])
    }

    /// All-linear (continuous piecewise-linear) curve from knot points.
    pub fn linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let n = knots.len().saturating_sub(1);
        Self::new(knots, vec![SegmentKind::Linear; n])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn segments(&self) -> &[SegmentKind] {
        &self.segments
    }

    pub fn is_step(&self) -> bool {
        self.segments.iter().all(|s| *s == SegmentKind::Step)
    }

    pub fn max_volume(&self) -> f64 {
        self.knots.last().unwrap().1
    }

    /// Index of the last knot with bid <= b (within tolerance), if any.
    fn locate(&self, b: f64) -> Option<usize> {
        if b < self.knots[0].0 - EPS_BID {
            return None;
        }
        let mut idx = 0;
        for (k, &(bid, _)) in self.knots.iter().enumerate() {
            if bid <= b + EPS_BID {
                idx = k;
            } else {
                break;
            }
        }
        Some(idx)
    }

    /// D(b): impressions won at bid b (right-continuous).
    pub fn eval(&self, b: f64) -> Result<f64> {
        if b < 0.0 {
            return Err(Error::NegativeBid(b));
        }
        let k = match self.locate(b) {
            None => return Ok(0.0),
            Some(k) => k,
        };
        if k + 1 == self.knots.len() {
            return Ok(self.knots[k].1);
        }
        let (b0, v0) = self.knots[k];
        let (b1, v1) = self.knots[k + 1];
        Ok(match self.segments[k] {
            SegmentKind::Step => v0,
            SegmentKind::Linear => v0 + (v1 - v0) * (b - b0) / (b1 - b0),
        })
    }

    /// D⁻(b): supremum of the curve over [0, b); the left limit at b.
    pub fn left_limit(&self, b: f64) -> Result<f64> {
        if b < 0.0 {
            return Err(Error::NegativeBid(b));
        }
        if b <= EPS_BID {
            return Ok(0.0);
        }
        // At a knot the limit comes from the preceding segment; elsewhere the
        // curve is continuous from the left and the limit equals eval.
        for (k, &(bid, v)) in self.knots.iter().enumerate() {
            if (b - bid).abs() <= EPS_BID {
                if k == 0 {
                    return Ok(0.0);
                }
                return Ok(match self.segments[k - 1] {
                    SegmentKind::Step => self.knots[k - 1].1,
                    SegmentKind::Linear => v,
                });
            }
        }
        self.eval(b)
    }

    /// ∫₀ᵇ D(x) dx, in closed form.
    pub fn integral(&self, b: f64) -> Result<f64> {
        if b < 0.0 {
            return Err(Error::NegativeBid(b));
        }
        let k = match self.locate(b) {
            None => return Ok(0.0),
            Some(k) => k,
        };
        let (b0, v0) = self.knots[k];
        if k + 1 == self.knots.len() {
            return Ok(self.cum[k] + v0 * (b - b0));
        }
        let (b1, v1) = self.knots[k + 1];
        Ok(self.cum[k]
            + match self.segments[k] {
                SegmentKind::Step => v0 * (b - b0),
                SegmentKind::Linear => {
                    let v = v0 + (v1 - v0) * (b - b0) / (b1 - b0);
                    0.5 * (v0 + v) * (b - b0)
                }
            })
    }

    /// Expected second-price payment for winning D(b) impressions at bid b:
    /// D(b)·b − ∫₀ᵇ D, which equals ∫₀ᵇ x dD(x).
    pub fn win_cost(&self, b: f64) -> Result<f64> {
        Ok(self.eval(b)? * b - self.integral(b)?)
    }

    /// Smallest bid b with D(b) >= target (attained by right-continuity).
    pub fn quantile(&self, target: f64) -> Result<f64> {
        if target <= 0.0 {
            return Ok(0.0);
        }
        let max = self.max_volume();
        if target > max {
            return Err(Error::UnsatisfiableSupply { target, max_volume: max });
        }
        for k in 0..self.knots.len() {
            let (bid, v) = self.knots[k];
            if v >= target {
                // Attained inside the preceding linear segment, or at this knot.
                if k > 0 && self.segments[k - 1] == SegmentKind::Linear {
                    let (b0, v0) = self.knots[k - 1];
                    if v0 < target {
                        return Ok(b0 + (target - v0) / (v - v0) * (bid - b0));
                    }
                }
                return Ok(bid);
            }
        }
        unreachable!("target <= max volume but no knot attains it");
    }

    /// Pointwise sum of curves, when representable in this knot/segment form.
    ///
    /// The sum fails to be representable exactly when some interval rises
    /// linearly *and* the sum jumps at the interval's right endpoint (a step
    /// knot on top of a rising linear piece); that case is a domain error.
    pub fn aggregate(curves: &[SupplyCurve]) -> Result<SupplyCurve> {
        if curves.is_empty() {
            return Err(Error::Domain("aggregate of an empty curve list".into()));
        }
        let mut bids: Vec<f64> = curves.iter().flat_map(|c| c.knots.iter().map(|k| k.0)).collect();
        bids.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bids.dedup_by(|a, b| (*a - *b).abs() <= EPS_BID);

        let sum_eval = |b: f64| -> f64 { curves.iter().map(|c| c.eval(b).unwrap()).sum() };
        let sum_left = |b: f64| -> f64 { curves.iter().map(|c| c.left_limit(b).unwrap()).sum() };

        let mut knots = Vec::with_capacity(bids.len());
        let mut segments = Vec::with_capacity(bids.len().saturating_sub(1));
        for &b in &bids {
            knots.push((b, sum_eval(b)));
        }
        let tol = 1e-9 * (1.0 + knots.last().unwrap().1.abs());
        for w in 0..bids.len().saturating_sub(1) {
            let left = knots[w].1;
            let right = knots[w + 1].1;
            let approach = sum_left(bids[w + 1]);
            // Each addend is affine on the open interval (all knots are in the
            // union), so the sum is affine: the two endpoint limits decide.
            if (approach - left).abs() <= tol {
                segments.push(SegmentKind::Step);
            } else if (approach - right).abs() <= tol {
                segments.push(SegmentKind::Linear);
            } else {
                return Err(Error::Domain(
                    "aggregate not representable: jump on top of a rising linear segment".into(),
                ));
            }
        }
        SupplyCurve::new(knots, segments)
    }
}
