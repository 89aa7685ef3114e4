use crate::error::{domain, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

/// Per-RF-chain excitation of one beam.
///
/// Amplitudes are linear and normalized so the largest active amplitude is 1;
/// absolute drive level is carried by `per_element_power` (watts delivered to
/// an active chain at unit amplitude). Storage is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
    active: Vec<bool>,
    per_element_power: f64,
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = x - two_pi * libm::floor((x + PI) / two_pi);
    if w >= PI {
        w - two_pi
    } else {
        w
    }
}

impl WeightMatrix {
    /// Builds a matrix, zeroing inactive amplitudes, wrapping phases and
    /// rescaling the taper to unit peak (the scale is folded into the power so
    /// the radiated power is unchanged).
    pub fn new(
        rows: usize,
        cols: usize,
        amplitudes: Vec<f64>,
        phases: Vec<f64>,
        active: Vec<bool>,
        per_element_power: f64,
    ) -> Result<Self> {
        let n = rows * cols;
        if n == 0 {
            return Err(domain!("weight matrix must have at least one element"));
        }
        if amplitudes.len() != n || phases.len() != n || active.len() != n {
            return Err(domain!(
                "weight matrix {rows}x{cols} needs {n} entries per field, got amp {} phase {} mask {}",
                amplitudes.len(),
                phases.len(),
                active.len()
            ));
        }
        if !(per_element_power >= 0.0 && per_element_power.is_finite()) {
            return Err(domain!("per-element power must be finite and >= 0, got {per_element_power}"));
        }
        if let Some(bad) = amplitudes.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(domain!("amplitudes must be finite and >= 0, got {bad}"));
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return Err(domain!("phases must be finite, got {bad}"));
        }
        let mut m = Self {
            rows,
            cols,
            amplitudes,
            phases: phases.into_iter().map(wrap_phase).collect(),
            active,
            per_element_power,
        };
        for (a, on) in m.amplitudes.iter_mut().zip(&m.active) {
            if !on {
                *a = 0.0;
            }
        }
        m.normalize();
        Ok(m)
    }

    /// All elements active, unit amplitude, zero phase.
    pub fn uniform(rows: usize, cols: usize, per_element_power: f64) -> Result<Self> {
        let n = rows * cols;
        Self::new(rows, cols, vec![1.0; n], vec![0.0; n], vec![true; n], per_element_power)
    }

    /// Builds a matrix from complex excitations on the given mask.
    pub fn from_complex(
        rows: usize,
        cols: usize,
        excitations: &[Complex64],
        active: Vec<bool>,
        per_element_power: f64,
    ) -> Result<Self> {
        let amplitudes = excitations.iter().map(|w| libm::sqrt(w.norm_sqr())).collect();
        let phases = excitations.iter().map(|w| libm::atan2(w.im, w.re)).collect();
        Self::new(rows, cols, amplitudes, phases, active, per_element_power)
    }

    fn normalize(&mut self) {
        let peak = self.amplitudes.iter().fold(0.0_f64, |m, &a| m.max(a));
        if peak > 0.0 && peak != 1.0 {
            for a in &mut self.amplitudes {
                *a /= peak;
            }
            self.per_element_power *= peak * peak;
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn per_element_power(&self) -> f64 {
        self.per_element_power
    }

    pub fn set_per_element_power(&mut self, watts: f64) -> Result<()> {
        if !(watts >= 0.0 && watts.is_finite()) {
            return Err(domain!("per-element power must be finite and >= 0, got {watts}"));
        }
        self.per_element_power = watts;
        Ok(())
    }

    /// Replaces every phase (wrapped on the way in). Amplitudes and mask are
    /// untouched.
    pub fn set_phases(&mut self, phases: &[f64]) -> Result<()> {
        if phases.len() != self.phases.len() {
            return Err(domain!("expected {} phases, got {}", self.phases.len(), phases.len()));
        }
        for (dst, &p) in self.phases.iter_mut().zip(phases) {
            *dst = wrap_phase(p);
        }
        Ok(())
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Complex excitation `a * exp(j phi)` of every element, row-major.
    pub fn excitations(&self) -> Vec<Complex64> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(&a, &p)| Complex64::new(a * libm::cos(p), a * libm::sin(p)))
            .collect()
    }

    /// Total power fed to the aperture: `P * sum(a^2)` over active chains.
    pub fn radiated_power(&self) -> f64 {
        self.per_element_power * self.amplitudes.iter().map(|a| a * a).sum::<f64>()
    }

    /// Smallest (row, col) bounding box containing every active element, as
    /// half-open ranges. `None` when nothing is active.
    pub fn active_bounds(&self) -> Option<(core::ops::Range<usize>, core::ops::Range<usize>)> {
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.active[self.index(r, c)] {
                    r0 = r0.min(r);
                    r1 = r1.max(r + 1);
                    c0 = c0.min(c);
                    c1 = c1.max(c + 1);
                }
            }
        }
        (r0 != usize::MAX).then_some((r0..r1, c0..c1))
    }
}
