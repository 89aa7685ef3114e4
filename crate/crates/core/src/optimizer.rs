//! Reference ("oracle") weight search for a single beam requirement.
//!
//! The search runs over five knobs of [`SynthesisParams`] with the steering
//! fixed to the requirement pointing: active rows and columns, the azimuth
//! and elevation taper levels, and the power scale (in dB).
//!
//! 1. A coarse probe grid of square apertures and taper offsets. Synthesized
//!    weights are separable, so the azimuth cut of a probe depends only on
//!    its column settings and the elevation cut only on its row settings;
//!    the best settings per axis are picked independently and combined.
//!    Each probe's power is solved in closed form from its measured EIRP.
//! 2. Coordinate descent with pattern moves and a halving step schedule.
//! 3. Seeded perturbation restarts, each followed by descent, until the
//!    evaluation budget runs out.
//!
//! The trajectory never depends on the budget; the budget only truncates
//! it, so a larger budget can only lower the returned cost.

use crate::cost::{evaluate_cost, BeamRequirement, CostBreakdown, CostWeights, EirpMode};
use crate::engine::{PatternEngine, PatternMetrics};
use crate::error::{domain, Error};
use crate::synthesis::{synthesize_with_bounds, SynthesisParams, TaperBounds};
use crate::weights::WeightMatrix;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MIN_BUDGET: usize = 50;
const POWER_DB_RANGE: (f64, f64) = (-80.0, 40.0);
const PROBE_APERTURES: [usize; 9] = [4, 8, 12, 16, 20, 24, 28, 32, 36];
const PROBE_TAPER_OFFSETS_DB: [f64; 2] = [0.0, -3.0];
/// (rows/cols, taper dB, power dB) step per descent level.
const STEP_SCHEDULE: [(i64, f64, f64); 4] = [(2, 2.0, 1.0), (1, 1.0, 0.5), (1, 0.5, 0.25), (1, 0.25, 0.1)];

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub seed: u64,
    pub eirp_mode: EirpMode,
    pub cost_weights: CostWeights,
    pub taper_bounds: TaperBounds,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            seed: 0,
            eirp_mode: EirpMode::Absolute,
            cost_weights: CostWeights::default(),
            taper_bounds: TaperBounds::default(),
        }
    }
}

/// Search coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Knobs {
    pub rows: usize,
    pub cols: usize,
    pub sll_az: f64,
    pub sll_el: f64,
    pub power_db: f64,
}

impl Knobs {
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.rows
            .cmp(&other.rows)
            .then(self.cols.cmp(&other.cols))
            .then(self.sll_az.total_cmp(&other.sll_az))
            .then(self.sll_el.total_cmp(&other.sll_el))
            .then(self.power_db.total_cmp(&other.power_db))
    }

    fn shape_key(&self) -> (usize, usize, u64, u64) {
        (self.rows, self.cols, self.sll_az.to_bits(), self.sll_el.to_bits())
    }

    pub fn to_params(&self, requirement: &BeamRequirement) -> SynthesisParams {
        let steer = requirement.pointing();
        SynthesisParams {
            steer: (steer.theta(), steer.phi()),
            taper_sll_az: self.sll_az,
            taper_sll_el: self.sll_el,
            active_rows: self.rows,
            active_cols: self.cols,
            power_scale: libm::pow(10.0, self.power_db / 10.0),
            nulls: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub weights: WeightMatrix,
    pub params: SynthesisParams,
    pub knobs: Knobs,
    pub metrics: PatternMetrics,
    pub cost: CostBreakdown,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Invalid(#[from] Error),
    /// No candidate reached a finite cost. Carries the best finite-metric
    /// candidate when one was measurable.
    #[error("no candidate achieved a finite cost after {evaluations} evaluations")]
    Infeasible { best: Option<Box<OptimizeOutcome>>, evaluations: usize },
}

struct Search<'a> {
    engine: &'a PatternEngine,
    requirement: &'a BeamRequirement,
    config: &'a OptimizerConfig,
    cache: BTreeMap<(usize, usize, u64, u64), Option<PatternMetrics>>,
    evaluations: usize,
    best: Option<(f64, Knobs)>,
}

impl<'a> Search<'a> {
    fn clamp(&self, k: Knobs) -> Knobs {
        let (p, q) = self.engine.geometry().subarray_grid();
        let b = self.config.taper_bounds;
        Knobs {
            rows: k.rows.clamp(1, p),
            cols: k.cols.clamp(1, q),
            sll_az: k.sll_az.clamp(b.min_db, b.max_db),
            sll_el: k.sll_el.clamp(b.min_db, b.max_db),
            power_db: k.power_db.clamp(POWER_DB_RANGE.0, POWER_DB_RANGE.1),
        }
    }

    /// Metrics at 0 dB power scale; EIRP shifts one-for-one with power.
    fn shape_metrics(&mut self, k: &Knobs) -> Option<PatternMetrics> {
        let key = k.shape_key();
        if let Some(m) = self.cache.get(&key) {
            return *m;
        }
        let unit = Knobs { power_db: 0.0, ..*k };
        let m = synthesize_with_bounds(self.engine.geometry(), &unit.to_params(self.requirement), self.config.taper_bounds)
            .and_then(|w| self.engine.measure(&w, Some(self.requirement.pointing())))
            .ok();
        self.cache.insert(key, m);
        m
    }

    fn cost_of(&self, shape: &PatternMetrics, power_db: f64) -> f64 {
        let m = PatternMetrics { eirp: shape.eirp + power_db, ..*shape };
        evaluate_cost(self.requirement, &m, &self.config.cost_weights, self.config.eirp_mode)
            .map(|c| c.total)
            .unwrap_or(f64::INFINITY)
    }

    fn record(&mut self, cost: f64, k: Knobs) {
        let better = match &self.best {
            None => true,
            Some((c, bk)) => match cost.total_cmp(c) {
                Ordering::Less => true,
                Ordering::Equal => k.total_cmp(bk) == Ordering::Less,
                Ordering::Greater => false,
            },
        };
        if better {
            self.best = Some((cost, k));
        }
    }

    /// One budgeted evaluation. `None` once the budget is spent.
    fn evaluate(&mut self, k: Knobs) -> Option<(f64, Option<PatternMetrics>)> {
        if self.evaluations >= self.config.budget {
            return None;
        }
        self.evaluations += 1;
        let k = self.clamp(k);
        let shape = self.shape_metrics(&k);
        let cost = shape.map(|m| self.cost_of(&m, k.power_db)).unwrap_or(f64::INFINITY);
        self.record(cost, k);
        Some((cost, shape))
    }

    /// Evaluates `k` with its power solved so the EIRP hits the target.
    fn evaluate_solving_power(&mut self, k: Knobs) -> Option<(Knobs, f64, Option<PatternMetrics>)> {
        if self.evaluations >= self.config.budget {
            return None;
        }
        let k = self.clamp(k);
        let shape = self.shape_metrics(&k);
        let power_db = shape.map(|m| self.requirement.eirp_dbw - m.eirp).unwrap_or(k.power_db);
        let k = Knobs { power_db, ..k };
        let (cost, shape) = self.evaluate(k)?;
        Some((self.clamp(k), cost, shape))
    }

    fn axis_costs(&self, m: &PatternMetrics) -> (f64, f64) {
        let r = self.requirement;
        let w = &self.config.cost_weights;
        let rel = |c: f64, o: f64| (c - o).abs() / o.abs();
        (
            w.k1 * rel(m.beamwidth_az, r.bw_az_deg) + w.k2 * rel(m.sll_az, r.sll_az_db),
            w.k1 * rel(m.beamwidth_el, r.bw_el_deg) + w.k2 * rel(m.sll_el, r.sll_el_db),
        )
    }

    /// Stage 1. Returns `None` when the budget ran out.
    fn probe_grid(&mut self) -> Option<()> {
        let r = *self.requirement;
        let mut best_az: Option<(f64, usize, f64)> = None;
        let mut best_el: Option<(f64, usize, f64)> = None;
        let (p, q) = self.engine.geometry().subarray_grid();
        for &a in PROBE_APERTURES.iter().filter(|&&a| a <= p.max(q)) {
            for &o in &PROBE_TAPER_OFFSETS_DB {
                let k = Knobs { rows: a, cols: a, sll_az: r.sll_az_db + o, sll_el: r.sll_el_db + o, power_db: 0.0 };
                let (k, _, shape) = self.evaluate_solving_power(k)?;
                if let Some(m) = shape {
                    let (az, el) = self.axis_costs(&m);
                    if best_az.is_none_or(|b| az < b.0) {
                        best_az = Some((az, k.cols, k.sll_az));
                    }
                    if best_el.is_none_or(|b| el < b.0) {
                        best_el = Some((el, k.rows, k.sll_el));
                    }
                }
            }
        }
        if let (Some(az), Some(el)) = (best_az, best_el) {
            let k = Knobs { rows: el.1, cols: az.1, sll_az: az.2, sll_el: el.2, power_db: 0.0 };
            self.evaluate_solving_power(k)?;
        }
        Some(())
    }

    /// Stage 2 from `current`, starting at `level` of the step schedule.
    /// Returns the local optimum, or `None` once the budget is spent.
    fn descend(&mut self, level: usize, mut current: (f64, Knobs)) -> Option<(f64, Knobs)> {
        for &(int_step, taper_step, power_step) in &STEP_SCHEDULE[level..] {
            loop {
                let mut improved = false;
                for axis in 0..5 {
                    for sign in [1.0, -1.0] {
                        let mut moved = false;
                        loop {
                            let (cost, k) = current;
                            let mut n = k;
                            match axis {
                                0 => n.cols = (n.cols as i64 + sign as i64 * int_step).max(1) as usize,
                                1 => n.rows = (n.rows as i64 + sign as i64 * int_step).max(1) as usize,
                                2 => n.sll_az += sign * taper_step,
                                3 => n.sll_el += sign * taper_step,
                                _ => n.power_db += sign * power_step,
                            }
                            let n = self.clamp(n);
                            if n.total_cmp(&k) == Ordering::Equal {
                                break;
                            }
                            let (c, _) = self.evaluate(n)?;
                            if c < cost {
                                current = (c, n);
                                moved = true;
                                improved = true;
                            } else {
                                break;
                            }
                        }
                        if moved {
                            break;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        Some(current)
    }

    /// Stage 3: perturb the incumbent and descend, until the budget is spent.
    fn restarts(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        loop {
            let Some((_, k)) = self.best else { return };
            let start = Knobs {
                rows: (k.rows as i64 + rng.gen_range(-4..=4)).max(1) as usize,
                cols: (k.cols as i64 + rng.gen_range(-4..=4)).max(1) as usize,
                sll_az: k.sll_az + rng.gen_range(-3.0..3.0),
                sll_el: k.sll_el + rng.gen_range(-3.0..3.0),
                power_db: k.power_db,
            };
            let Some((start, cost, _)) = self.evaluate_solving_power(start) else { return };
            if !cost.is_finite() {
                continue;
            }
            if self.descend(1, (cost, start)).is_none() {
                return;
            }
        }
    }
}

/// Searches synthesis knobs for the matrix minimizing the beam cost of
/// `requirement`. Deterministic for a given configuration.
pub fn optimize_matrix(
    engine: &PatternEngine,
    requirement: &BeamRequirement,
    config: &OptimizerConfig,
) -> Result<OptimizeOutcome, OptimizeError> {
    requirement.validate()?;
    config.cost_weights.validate()?;
    if config.budget < MIN_BUDGET {
        return Err(domain!("budget must be at least {MIN_BUDGET}, got {}", config.budget).into());
    }
    let mut search = Search { engine, requirement, config, cache: BTreeMap::new(), evaluations: 0, best: None };
    let finished_descent = search.probe_grid().and_then(|_| {
        let start = search.best.filter(|b| b.0.is_finite())?;
        search.descend(0, start)
    });
    if finished_descent.is_some() {
        search.restarts();
    }
    let evaluations = search.evaluations;
    let Some((cost, knobs)) = search.best else {
        return Err(OptimizeError::Infeasible { best: None, evaluations });
    };
    let params = knobs.to_params(requirement);
    let outcome = synthesize_with_bounds(engine.geometry(), &params, config.taper_bounds).and_then(|weights| {
        let metrics = engine.measure(&weights, Some(requirement.pointing()))?;
        let cost = evaluate_cost(requirement, &metrics, &config.cost_weights, config.eirp_mode)
            .unwrap_or(CostBreakdown::INFEASIBLE);
        Ok(OptimizeOutcome { weights, params, knobs, metrics, cost, evaluations })
    });
    match outcome {
        Ok(o) if cost.is_finite() && o.cost.total.is_finite() => Ok(o),
        Ok(o) => Err(OptimizeError::Infeasible { best: Some(Box::new(o)), evaluations }),
        Err(_) => Err(OptimizeError::Infeasible { best: None, evaluations }),
    }
}
