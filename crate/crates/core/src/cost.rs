//! Beam requirements and the three-term beam cost (beamwidth, SLL, EIRP).

use crate::engine::PatternMetrics;
use crate::error::{domain, Result};
use crate::pattern::Direction;

pub const FEATURE_COUNT: usize = 7;

/// Feature names in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["bw_el_deg", "bw_az_deg", "sll_el_db", "sll_az_db", "eirp_dbw", "point_el_deg", "point_az_deg"];

/// Per-beam requirement: the seven features every downstream stage sees.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeamRequirement {
    pub bw_az_deg: f64,
    pub bw_el_deg: f64,
    pub sll_az_db: f64,
    pub sll_el_db: f64,
    pub eirp_dbw: f64,
    pub point_el_deg: f64,
    pub point_az_deg: f64,
}

impl BeamRequirement {
    /// Feature vector in [`FEATURE_NAMES`] order.
    pub fn to_features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.bw_el_deg,
            self.bw_az_deg,
            self.sll_el_db,
            self.sll_az_db,
            self.eirp_dbw,
            self.point_el_deg,
            self.point_az_deg,
        ]
    }

    pub fn from_features(f: &[f64; FEATURE_COUNT]) -> Self {
        Self {
            bw_el_deg: f[0],
            bw_az_deg: f[1],
            sll_el_db: f[2],
            sll_az_db: f[3],
            eirp_dbw: f[4],
            point_el_deg: f[5],
            point_az_deg: f[6],
        }
    }

    pub fn pointing(&self) -> Direction {
        Direction::from_el_az_deg(self.point_el_deg, self.point_az_deg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_features().iter().any(|x| !x.is_finite()) {
            return Err(domain!("requirement has non-finite fields: {:?}", self));
        }
        if !(self.bw_az_deg > 0.0 && self.bw_el_deg > 0.0) {
            return Err(domain!("beamwidths must be positive"));
        }
        if !(self.sll_az_db < 0.0 && self.sll_el_db < 0.0) {
            return Err(domain!("SLL targets must be negative"));
        }
        if !self.pointing().is_visible() {
            return Err(domain!("pointing direction is not in the visible region"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostWeights {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { k1: 1.0, k2: 1.0, k3: 1.0 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let ks = [self.k1, self.k2, self.k3];
        if ks.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(domain!("cost weights must be finite and >= 0"));
        }
        if ks.iter().all(|k| *k == 0.0) {
            return Err(domain!("cost weights must not all be zero"));
        }
        Ok(())
    }
}

/// How the EIRP term treats its sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EirpMode {
    /// `|eirp_c - eirp_o| / |eirp_o|`
    #[default]
    Absolute,
    /// `(eirp_c - eirp_o) / eirp_o`, which rewards low EIRP.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostBreakdown {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub const INFEASIBLE: CostBreakdown =
        CostBreakdown { z1: f64::INFINITY, z2: f64::INFINITY, z3: f64::INFINITY, total: f64::INFINITY };
}

/// Weighted relative errors between measured metrics and a requirement.
pub fn evaluate_cost(
    requirement: &BeamRequirement,
    metrics: &PatternMetrics,
    weights: &CostWeights,
    mode: EirpMode,
) -> Result<CostBreakdown> {
    let targets = [
        requirement.bw_az_deg,
        requirement.bw_el_deg,
        requirement.sll_az_db,
        requirement.sll_el_db,
        requirement.eirp_dbw,
    ];
    if targets.iter().any(|t| *t == 0.0 || !t.is_finite()) {
        return Err(domain!("requirement targets must be finite and non-zero"));
    }
    let rel = |c: f64, o: f64| (c - o).abs() / o.abs();
    let z1 = weights.k1 * (rel(metrics.beamwidth_az, requirement.bw_az_deg) + rel(metrics.beamwidth_el, requirement.bw_el_deg));
    let z2 = weights.k2 * (rel(metrics.sll_az, requirement.sll_az_db) + rel(metrics.sll_el, requirement.sll_el_db));
    let z3 = weights.k3
        * match mode {
            EirpMode::Absolute => rel(metrics.eirp, requirement.eirp_dbw),
            EirpMode::Signed => (metrics.eirp - requirement.eirp_dbw) / requirement.eirp_dbw,
        };
    Ok(CostBreakdown { z1, z2, z3, total: z1 + z2 + z3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req() -> BeamRequirement {
        BeamRequirement {
            bw_az_deg: 1.0,
            bw_el_deg: 1.0,
            sll_az_db: -25.0,
            sll_el_db: -22.0,
            eirp_dbw: 60.0,
            point_el_deg: 1.0,
            point_az_deg: -2.0,
        }
    }

    fn matching(r: &BeamRequirement) -> PatternMetrics {
        PatternMetrics {
            beamwidth_az: r.bw_az_deg,
            beamwidth_el: r.bw_el_deg,
            sll_az: r.sll_az_db,
            sll_el: r.sll_el_db,
            eirp: r.eirp_dbw,
            peak_el: r.point_el_deg,
            peak_az: r.point_az_deg,
        }
    }

    #[test]
    fn matched_metrics_cost_nothing() {
        let r = req();
        let c = evaluate_cost(&r, &matching(&r), &CostWeights::default(), EirpMode::Absolute).unwrap();
        assert_eq!(c, CostBreakdown { z1: 0.0, z2: 0.0, z3: 0.0, total: 0.0 });
    }

    #[test]
    fn ten_percent_wide_on_both_cuts() {
        let r = req();
        let mut m = matching(&r);
        m.beamwidth_az = 1.1;
        m.beamwidth_el = 1.1;
        let c = evaluate_cost(&r, &m, &CostWeights { k1: 1.0, k2: 0.0, k3: 0.0 }, EirpMode::Absolute).unwrap();
        assert!((c.z1 - 0.2).abs() < 1e-12);
        assert!((c.total - 0.2).abs() < 1e-12);
    }

    #[test]
    fn signed_mode_rewards_low_eirp() {
        let r = req();
        let mut m = matching(&r);
        m.eirp = 54.0;
        let w = CostWeights::default();
        assert!((evaluate_cost(&r, &m, &w, EirpMode::Absolute).unwrap().z3 - 0.1).abs() < 1e-12);
        assert!((evaluate_cost(&r, &m, &w, EirpMode::Signed).unwrap().z3 + 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_target_is_a_domain_error() {
        let mut r = req();
        r.eirp_dbw = 0.0;
        assert!(evaluate_cost(&r, &matching(&req()), &CostWeights::default(), EirpMode::Absolute).is_err());
    }

    #[test]
    fn features_round_trip() {
        let r = req();
        assert_eq!(BeamRequirement::from_features(&r.to_features()), r);
    }

    /// Straight transcription of the three relative-error terms, kept apart
    /// from `evaluate_cost`.
    fn reference_cost(t: &[f64; 5], c: &[f64; 5], k: (f64, f64, f64)) -> f64 {
        let mut z = [0.0; 3];
        z[0] = k.0 * ((c[0] - t[0]).abs() / t[0] + (c[1] - t[1]).abs() / t[1]);
        z[1] = k.1 * ((c[2] - t[2]).abs() / -t[2] + (c[3] - t[3]).abs() / -t[3]);
        z[2] = k.2 * ((c[4] - t[4]).abs() / t[4]);
        z[0] + z[1] + z[2]
    }

    proptest! {
        #[test]
        fn matches_an_independent_transcription(
            t in (0.45f64..1.5, 0.45f64..1.5, -30.0f64..-20.0, -30.0f64..-20.0, 50.0f64..70.0),
            c in (0.3f64..2.0, 0.3f64..2.0, -40.0f64..-10.0, -40.0f64..-10.0, 40.0f64..80.0),
            k in (0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0),
        ) {
            let r = BeamRequirement { bw_az_deg: t.0, bw_el_deg: t.1, sll_az_db: t.2, sll_el_db: t.3, eirp_dbw: t.4, point_el_deg: 0.0, point_az_deg: 0.0 };
            let m = PatternMetrics { beamwidth_az: c.0, beamwidth_el: c.1, sll_az: c.2, sll_el: c.3, eirp: c.4, peak_el: 0.0, peak_az: 0.0 };
            let got = evaluate_cost(&r, &m, &CostWeights { k1: k.0, k2: k.1, k3: k.2 }, EirpMode::Absolute).unwrap();
            let want = reference_cost(&[t.0, t.1, t.2, t.3, t.4], &[c.0, c.1, c.2, c.3, c.4], k);
            prop_assert!((got.total - want).abs() <= 1e-12 * want.max(1.0));
            prop_assert!(got.total >= 0.0);
            prop_assert!((got.total - (got.z1 + got.z2 + got.z3)).abs() <= 1e-12);
        }

        #[test]
        fn each_term_is_linear_in_its_weight(scale in 0.0f64..10.0, which in 0usize..3) {
            let r = req();
            let m = PatternMetrics { beamwidth_az: 1.3, beamwidth_el: 0.8, sll_az: -19.0, sll_el: -27.0, eirp: 63.0, peak_el: 0.0, peak_az: 0.0 };
            let mut unit = [0.0; 3];
            unit[which] = 1.0;
            let mut scaled = [0.0; 3];
            scaled[which] = scale;
            let one = evaluate_cost(&r, &m, &CostWeights { k1: unit[0], k2: unit[1], k3: unit[2] }, EirpMode::Absolute).unwrap();
            let many = evaluate_cost(&r, &m, &CostWeights { k1: scaled[0], k2: scaled[1], k3: scaled[2] }, EirpMode::Absolute).unwrap();
            prop_assert!((many.total - scale * one.total).abs() <= 1e-12 * (1.0 + many.total));
        }
    }
}
