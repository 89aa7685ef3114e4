//! Radiated-power integrals for directivity.
//!
//! Two routes are provided. [`DirectivityKernel`] is the production path:
//! the aperture is a lattice of physical elements (subarrays tile
//! contiguously), so
//!
//! ```text
//! int |F|^2 dOmega = sum_{i,j} w_i conj(w_j) G(r_i - r_j)
//! G(rho) = 2 pi int_0^{pi/2} cos^{2q}(t) sin(t) J0(k rho sin t) dt
//! ```
//!
//! with `G` tabulated once per geometry and folded with the subarray
//! autocorrelation into an outer-lag table. One evaluation then costs an
//! autocorrelation of the RF-chain excitations. [`directivity_grid`] is the
//! plain trapezoidal integral of `|F|^2 sin(t)` over a (theta, phi) grid and
//! serves as the independent reference.

use crate::error::{domain, Result};
use crate::geometry::ArrayGeometry;
use crate::pattern::{Direction, ExcitedArray};
use crate::quadrature::{gauss_legendre, integrate};
use crate::weights::WeightMatrix;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use num_complex::Complex64;

/// `2 pi int_0^{pi/2} cos^{2q}(t) sin(t) J0(a sin t) dt`, the far-field
/// cross term between two isotropic-phase sources `a / k` apart carrying a
/// `cos^q` element pattern, integrated over the front hemisphere.
pub fn radial_kernel(a: f64, q: f64) -> f64 {
    if q == 0.0 {
        // sin(a) / a
        return 2.0 * PI * sinc(a);
    }
    if q == 1.0 {
        // j1(a) / a
        return 2.0 * PI * spherical_j1_over_x(a);
    }
    radial_kernel_numeric(a, q, &gauss_legendre(10))
}

pub(crate) fn radial_kernel_numeric(a: f64, q: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let panels = 4 + libm::ceil(a / 2.0) as usize;
    2.0 * PI
        * integrate(
            |t| {
                let (s, c) = libm::sincos(t);
                libm::pow(c, 2.0 * q) * s * libm::j0(a * s)
            },
            0.0,
            FRAC_PI_2,
            panels,
            rule,
        )
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        libm::sin(x) / x
    }
}

fn spherical_j1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0
    } else {
        let (s, c) = libm::sincos(x);
        (s / x - c) / (x * x)
    }
}

/// Outer-lag table of the lattice radiated-power integral for one geometry.
#[derive(Debug, Clone)]
pub struct DirectivityKernel {
    rows: usize,
    cols: usize,
    /// `(2 rows - 1) x (2 cols - 1)` table indexed by lag + (n - 1).
    lag_table: Vec<f64>,
    /// FFT sizes per axis, powers of two covering every lag without wrap.
    fft_rows: usize,
    fft_cols: usize,
    /// Real spectrum of the circularly placed lag table.
    lag_spectrum: Vec<f64>,
}

impl DirectivityKernel {
    pub fn new(geometry: &ArrayGeometry) -> Self {
        let (rows, cols) = geometry.subarray_grid();
        let (er, ec) = geometry.element_grid();
        let (ly, lx) = (rows * er, cols * ec);
        let kd = geometry.wavenumber() * geometry.element_pitch();
        let q = geometry.element_exponent();
        let rule = gauss_legendre(10);

        // G on the physical lattice, indexed by |lag|.
        let mut g = vec![f64::NAN; ly * lx];
        for y in 0..ly {
            for x in 0..lx {
                if !g[y * lx + x].is_nan() {
                    continue;
                }
                let a = kd * libm::sqrt((x * x + y * y) as f64);
                let v = if q == 0.0 || q == 1.0 { radial_kernel(a, q) } else { radial_kernel_numeric(a, q, &rule) };
                g[y * lx + x] = v;
                if x < ly && y < lx {
                    g[x * lx + y] = v;
                }
            }
        }

        let (nr, nc) = (2 * rows - 1, 2 * cols - 1);
        let mut lag_table = vec![0.0; nr * nc];
        for dy in -(rows as i64 - 1)..rows as i64 {
            for dx in -(cols as i64 - 1)..cols as i64 {
                let mut h = 0.0;
                for sy in -(er as i64 - 1)..er as i64 {
                    let gy = (er as i64 * dy + sy).unsigned_abs() as usize;
                    let wy = (er as i64 - sy.abs()) as f64;
                    for sx in -(ec as i64 - 1)..ec as i64 {
                        let gx = (ec as i64 * dx + sx).unsigned_abs() as usize;
                        let wx = (ec as i64 - sx.abs()) as f64;
                        h += wy * wx * g[gy * lx + gx];
                    }
                }
                let idx = (dy + rows as i64 - 1) as usize * nc + (dx + cols as i64 - 1) as usize;
                lag_table[idx] = h;
            }
        }
        let fft_rows = (2 * rows - 1).next_power_of_two();
        let fft_cols = (2 * cols - 1).next_power_of_two();
        let mut placed = vec![Complex64::new(0.0, 0.0); fft_rows * fft_cols];
        for dy in -(rows as i64 - 1)..rows as i64 {
            for dx in -(cols as i64 - 1)..cols as i64 {
                let src = (dy + rows as i64 - 1) as usize * nc + (dx + cols as i64 - 1) as usize;
                let r = dy.rem_euclid(fft_rows as i64) as usize;
                let c = dx.rem_euclid(fft_cols as i64) as usize;
                placed[r * fft_cols + c].re = lag_table[src];
            }
        }
        fft_2d(&mut placed, fft_rows, fft_cols);
        // The lag table is even, so its spectrum is real.
        let lag_spectrum = placed.iter().map(|z| z.re).collect();
        Self { rows, cols, lag_table, fft_rows, fft_cols, lag_spectrum }
    }

    fn check_grid(&self, weights: &WeightMatrix) -> Result<()> {
        if (weights.rows(), weights.cols()) != (self.rows, self.cols) {
            return Err(domain!(
                "weights are {}x{} but the kernel was built for {}x{}",
                weights.rows(),
                weights.cols(),
                self.rows,
                self.cols
            ));
        }
        Ok(())
    }

    /// Total radiated `int |F|^2 dOmega` over the front hemisphere for the
    /// given RF-chain excitations (row-major), with `|F|` in the same units
    /// as [`ExcitedArray::field`].
    ///
    /// Evaluated in the spectral domain: with `W` the zero-padded 2-D DFT of
    /// the excitations and `H` that of the lag table, the lag sum equals
    /// `sum_k H(k) |W(k)|^2 / N`.
    pub fn radiated_integral(&self, weights: &WeightMatrix) -> Result<f64> {
        self.check_grid(weights)?;
        let (fr, fc) = (self.fft_rows, self.fft_cols);
        let mut buf = vec![Complex64::new(0.0, 0.0); fr * fc];
        for (r, row) in weights.excitations().chunks(self.cols).enumerate() {
            buf[r * fc..r * fc + self.cols].copy_from_slice(row);
        }
        fft_2d(&mut buf, fr, fc);
        let total: f64 = buf.iter().zip(&self.lag_spectrum).map(|(w, h)| h * w.norm_sqr()).sum();
        Ok(total / (fr * fc) as f64)
    }

    /// Same quantity as [`Self::radiated_integral`], summed lag by lag.
    pub fn radiated_integral_direct(&self, weights: &WeightMatrix) -> Result<f64> {
        self.check_grid(weights)?;
        let Some((rr, cr)) = weights.active_bounds() else {
            return Ok(0.0);
        };
        let w = weights.excitations();
        let cols = self.cols;
        let nc = 2 * cols - 1;
        let (br, bc) = (rr.len() as i64, cr.len() as i64);
        let mut total = 0.0;
        for dy in -(br - 1)..br {
            for dx in -(bc - 1)..bc {
                let h = self.lag_table[(dy + self.rows as i64 - 1) as usize * nc + (dx + cols as i64 - 1) as usize];
                let mut c = Complex64::new(0.0, 0.0);
                for r in rr.clone() {
                    let r2 = r as i64 - dy;
                    if r2 < rr.start as i64 || r2 >= rr.end as i64 {
                        continue;
                    }
                    let row = &w[r * cols..(r + 1) * cols];
                    let row2 = &w[r2 as usize * cols..(r2 as usize + 1) * cols];
                    let c_lo = (cr.start as i64).max(cr.start as i64 + dx) as usize;
                    let c_hi = (cr.end as i64).min(cr.end as i64 + dx) as usize;
                    for col in c_lo..c_hi {
                        c += row[col] * row2[(col as i64 - dx) as usize].conj();
                    }
                }
                total += h * c.re;
            }
        }
        Ok(total)
    }
}

/// In-place iterative radix-2 forward DFT; `buf.len()` must be a power of two.
fn fft(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let (s, c) = libm::sincos(-2.0 * PI / len as f64);
        let step = Complex64::new(c, s);
        for start in (0..n).step_by(len) {
            let mut tw = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * tw;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                tw *= step;
            }
        }
        len <<= 1;
    }
}

/// Row-major 2-D forward DFT.
fn fft_2d(buf: &mut [Complex64], rows: usize, cols: usize) {
    for row in buf.chunks_mut(cols) {
        fft(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = buf[r * cols + c];
        }
        fft(&mut column);
        for r in 0..rows {
            buf[r * cols + c] = column[r];
        }
    }
}

/// Trapezoidal (theta, phi) quadrature grid over the front hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { n_theta: 512, n_phi: 2048 }
    }
}

/// `int |F|^2 sin(t) dt dp` by the trapezoidal rule on `grid`.
pub fn radiated_integral_grid(array: &ExcitedArray<'_>, grid: QuadratureGrid) -> Result<f64> {
    if grid.n_theta < 2 || grid.n_phi < 1 {
        return Err(domain!("quadrature grid needs n_theta >= 2 and n_phi >= 1"));
    }
    let dt = FRAC_PI_2 / (grid.n_theta - 1) as f64;
    let dp = 2.0 * PI / grid.n_phi as f64;
    let mut total = 0.0;
    for i in 0..grid.n_theta {
        let theta = i as f64 * dt;
        let edge = if i == 0 || i + 1 == grid.n_theta { 0.5 } else { 1.0 };
        let s = libm::sin(theta);
        if s == 0.0 {
            continue;
        }
        let ring: f64 = (0..grid.n_phi)
            .map(|j| array.power(Direction::from_theta_phi(theta, j as f64 * dp)))
            .sum();
        total += edge * s * ring;
    }
    Ok(total * dt * dp)
}

/// Directivity (dBi) toward `dir` via [`radiated_integral_grid`].
pub fn directivity_grid(array: &ExcitedArray<'_>, dir: Direction, grid: QuadratureGrid) -> Result<f64> {
    let integral = radiated_integral_grid(array, grid)?;
    if integral <= 0.0 {
        return Err(domain!("pattern radiates no power"));
    }
    Ok(10.0 * libm::log10(4.0 * PI * array.power(dir) / integral))
}
