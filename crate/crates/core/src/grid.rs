//! Uniform periodic grid, continuum-normalized Fourier transforms, spectral
//! derivatives, dealiased cubic products, norms, and off-grid sampling.
//!
//! All transforms use the unitary continuum convention
//! `phi_hat(xi) = (2 pi)^{-1/2} \int e^{-i y xi} phi(y) dy`,
//! approximated by trapezoidal quadrature on the periodic box `[-L, L)`.
//! With the induced frequency grid `xi_k = pi k / L`, `k = -N/2 .. N/2 - 1`,
//! the discrete Plancherel identity between the `dx`-sum and the `dxi`-sum
//! holds exactly and the forward/inverse pair round-trips to round-off.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{CoreError, Result};

pub type C64 = Complex64;

pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let mut planner = PLANNER.lock().unwrap();
    match direction {
        FftDirection::Forward => planner.plan_fft_forward(len),
        FftDirection::Inverse => planner.plan_fft_inverse(len),
    }
}

pub(crate) fn raw_fft_forward(data: &mut [C64]) {
    plan(data.len(), FftDirection::Forward).process(data);
}

pub(crate) fn raw_fft_inverse(data: &mut [C64]) {
    plan(data.len(), FftDirection::Inverse).process(data);
}

/// Uniform periodic spatial grid on `[-L, L)` with `N` points.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    num_points: usize,
    half_length: f64,
    spacing: f64,
}

impl SpatialGrid {
    /// `num_points` must be a power of two with `num_points >= 16`;
    /// `half_length` is the box half-width `L > 0`.
    pub fn new(num_points: usize, half_length: f64) -> Result<Self> {
        if num_points < 16 || !num_points.is_power_of_two() {
            return Err(CoreError::InvalidGrid(format!(
                "num_points must be a power of two >= 16, got {num_points}"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(CoreError::InvalidGrid(format!(
                "half_length must be positive and finite, got {half_length}"
            )));
        }
        Ok(Self {
            num_points,
            half_length,
            spacing: 2.0 * half_length / num_points as f64,
        })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Grid spacing `dx = 2L / N`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `x_n = -L + n dx`.
    pub fn point(&self, n: usize) -> f64 {
        -self.half_length + n as f64 * self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(|n| self.point(n))
    }

    /// Frequency spacing `dxi = pi / L`.
    pub fn freq_spacing(&self) -> f64 {
        PI / self.half_length
    }

    /// Signed integer wavenumber of ascending index `j`: `k = j - N/2`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        j as i64 - (self.num_points / 2) as i64
    }

    /// Frequency of ascending index `j`: `xi_j = pi (j - N/2) / L`.
    pub fn frequency(&self, j: usize) -> f64 {
        PI * self.wavenumber(j) as f64 / self.half_length
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_points).map(|j| self.frequency(j))
    }

    /// Upper edge of the spectral band: the grid carries `|xi| <= pi N / (2L)`
    /// (lower edge inclusive, upper exclusive).
    pub fn max_frequency(&self) -> f64 {
        PI * (self.num_points / 2) as f64 / self.half_length
    }

    /// Frequency of FFT bin `b` in wrap-around order.
    pub(crate) fn bin_frequency(&self, b: usize) -> f64 {
        let n = self.num_points;
        let k = if b < n / 2 {
            b as i64
        } else {
            b as i64 - n as i64
        };
        PI * k as f64 / self.half_length
    }

    /// The grid with the same box but `factor` times as many points.
    pub(crate) fn refined(&self, factor: usize) -> SpatialGrid {
        SpatialGrid {
            num_points: self.num_points * factor,
            half_length: self.half_length,
            spacing: self.spacing / factor as f64,
        }
    }
}

/// Complex samples of a function on a [`SpatialGrid`], `samples[n] = f(x_n)`.
#[derive(Clone, Debug)]
pub struct Field {
    grid: SpatialGrid,
    samples: Vec<C64>,
}

/// Continuum-normalized Fourier coefficients on the frequency grid of a
/// [`SpatialGrid`], stored in ascending frequency order:
/// `coeffs[j] ~ phi_hat(pi (j - N/2) / L)`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: SpatialGrid,
    coeffs: Vec<C64>,
}

fn all_finite(values: &[C64]) -> bool {
    values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

impl Field {
    pub fn new(grid: SpatialGrid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.num_points() {
            return Err(CoreError::GridMismatch);
        }
        if !all_finite(&samples) {
            return Err(CoreError::NonFinite { context: "Field" });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        let n = grid.num_points();
        Self {
            grid,
            samples: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> C64) -> Result<Self> {
        let samples: Vec<C64> = grid.points().map(f).collect();
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.samples)
    }

    pub(crate) fn from_raw(grid: SpatialGrid, samples: Vec<C64>) -> Self {
        debug_assert_eq!(samples.len(), grid.num_points());
        Self { grid, samples }
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }
}

impl Spectrum {
    pub fn new(grid: SpatialGrid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.num_points() {
            return Err(CoreError::GridMismatch);
        }
        if !all_finite(&coeffs) {
            return Err(CoreError::NonFinite {
                context: "Spectrum",
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        let n = grid.num_points();
        Self {
            grid,
            coeffs: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Coefficients in ascending frequency order.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient at signed wavenumber `k`, zero outside the band.
    pub fn coeff_at_wavenumber(&self, k: i64) -> C64 {
        let half = (self.grid.num_points() / 2) as i64;
        if k < -half || k >= half {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + half) as usize]
        }
    }

    /// `L^2(dxi)` norm of the coefficients.
    pub fn l2_norm(&self) -> f64 {
        let dxi = self.grid.freq_spacing();
        (self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * dxi).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.coeffs)
    }

    pub(crate) fn from_raw(grid: SpatialGrid, coeffs: Vec<C64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.num_points());
        Self { grid, coeffs }
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }
}

// ---------------------------------------------------------------------------
// Low-level transforms in FFT bin order (used by the solver inner loop).
//
// `bins[b]` holds the continuum-normalized coefficient at `bin_frequency(b)`.
// The alternating sign absorbs the `x_0 = -L` origin shift; it is its own
// inverse, so the same sign pattern appears in both directions.
// ---------------------------------------------------------------------------

pub(crate) fn field_to_bins_inplace(buf: &mut [C64], grid: &SpatialGrid) {
    raw_fft_forward(buf);
    let scale = grid.spacing() * INV_SQRT_2PI;
    for (b, v) in buf.iter_mut().enumerate() {
        *v *= if b % 2 == 0 { scale } else { -scale };
    }
}

pub(crate) fn bins_to_field_inplace(buf: &mut [C64], grid: &SpatialGrid) {
    let scale = grid.freq_spacing() * INV_SQRT_2PI;
    for (b, v) in buf.iter_mut().enumerate() {
        *v *= if b % 2 == 0 { scale } else { -scale };
    }
    raw_fft_inverse(buf);
}

pub(crate) fn bins_to_asc(bins: &[C64]) -> Vec<C64> {
    let n = bins.len();
    (0..n).map(|j| bins[(j + n / 2) % n]).collect()
}

pub(crate) fn asc_to_bins(asc: &[C64]) -> Vec<C64> {
    let n = asc.len();
    (0..n).map(|b| asc[(b + n / 2) % n]).collect()
}

/// Zero-pad bins from `N` to `factor * N`, preserving wavenumber content.
pub(crate) fn pad_bins(bins: &[C64], factor: usize) -> Vec<C64> {
    let n = bins.len();
    let m = n * factor;
    let mut out = vec![C64::new(0.0, 0.0); m];
    out[..n / 2].copy_from_slice(&bins[..n / 2]);
    out[m - n / 2..].copy_from_slice(&bins[n / 2..]);
    out
}

/// Keep only wavenumbers `-N/2 <= k < N/2` of a finer bin array.
pub(crate) fn truncate_bins(fine: &[C64], n: usize) -> Vec<C64> {
    let m = fine.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    out[..n / 2].copy_from_slice(&fine[..n / 2]);
    out[n / 2..].copy_from_slice(&fine[m - n / 2..]);
    out
}

// ---------------------------------------------------------------------------
// Public transform operations
// ---------------------------------------------------------------------------

/// Forward continuum-normalized Fourier transform.
pub fn continuum_fourier(f: &Field) -> Result<Spectrum> {
    if !f.is_finite() {
        return Err(CoreError::NonFinite {
            context: "continuum_fourier input",
        });
    }
    let mut buf = f.samples.clone();
    field_to_bins_inplace(&mut buf, &f.grid);
    Ok(Spectrum::from_raw(f.grid.clone(), bins_to_asc(&buf)))
}

/// Inverse of [`continuum_fourier`], exact up to round-off.
pub fn inverse_fourier(s: &Spectrum) -> Result<Field> {
    if !s.is_finite() {
        return Err(CoreError::NonFinite {
            context: "inverse_fourier input",
        });
    }
    let mut buf = asc_to_bins(&s.coeffs);
    bins_to_field_inplace(&mut buf, &s.grid);
    Ok(Field::from_raw(s.grid.clone(), buf))
}

/// Fourier-multiplier derivative: multiplication by `(i xi)^order`.
pub fn spatial_derivative(f: &Field, order: u32) -> Result<Field> {
    if order != 1 && order != 2 {
        return Err(CoreError::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let mut buf = f.samples.clone();
    if !all_finite(&buf) {
        return Err(CoreError::NonFinite {
            context: "spatial_derivative input",
        });
    }
    field_to_bins_inplace(&mut buf, &f.grid);
    apply_derivative_bins(&mut buf, &f.grid, order as u8);
    bins_to_field_inplace(&mut buf, &f.grid);
    Ok(Field::from_raw(f.grid.clone(), buf))
}

pub(crate) fn apply_derivative_bins(bins: &mut [C64], grid: &SpatialGrid, order: u8) {
    match order {
        0 => {}
        1 => {
            for (b, v) in bins.iter_mut().enumerate() {
                *v *= C64::new(0.0, grid.bin_frequency(b));
            }
        }
        2 => {
            for (b, v) in bins.iter_mut().enumerate() {
                let xi = grid.bin_frequency(b);
                *v *= -xi * xi;
            }
        }
        _ => unreachable!("derivative order above 2"),
    }
}

/// Pointwise product of `(d/dx)^{l_i} f_i` for exactly three factors, with
/// 2x zero padding so that the cubic aliasing is removed exactly.
pub fn dealias_pad_multiply(factors: &[&Field], derivative_orders: &[u8]) -> Result<Field> {
    if factors.len() != 3 || derivative_orders.len() != 3 {
        return Err(CoreError::InvalidParameter(
            "dealias_pad_multiply takes exactly three factors".into(),
        ));
    }
    let grid = factors[0].grid.clone();
    if factors.iter().any(|f| f.grid != grid) {
        return Err(CoreError::GridMismatch);
    }
    if derivative_orders.iter().any(|&l| l > 1) {
        return Err(CoreError::InvalidParameter(
            "factor derivative orders must be 0 or 1".into(),
        ));
    }
    let fine = grid.refined(2);
    let mut prod: Vec<C64> = Vec::new();
    for (i, f) in factors.iter().enumerate() {
        let mut buf = f.samples.clone();
        field_to_bins_inplace(&mut buf, &grid);
        apply_derivative_bins(&mut buf, &grid, derivative_orders[i]);
        let mut padded = pad_bins(&buf, 2);
        bins_to_field_inplace(&mut padded, &fine);
        if i == 0 {
            prod = padded;
        } else {
            for (p, q) in prod.iter_mut().zip(&padded) {
                *p *= q;
            }
        }
    }
    field_to_bins_inplace(&mut prod, &fine);
    let mut coarse = truncate_bins(&prod, grid.num_points());
    bins_to_field_inplace(&mut coarse, &grid);
    Ok(Field::from_raw(grid, coarse))
}

// ---------------------------------------------------------------------------
// Off-grid sampling
// ---------------------------------------------------------------------------

fn check_band(points: &[f64], band: f64) -> Result<()> {
    for &p in points {
        if !p.is_finite() || p.abs() > band * (1.0 + 1e-12) {
            return Err(CoreError::OutOfBand { point: p, band });
        }
    }
    Ok(())
}

/// Evaluate the quadrature sum `(dx / sqrt(2 pi)) sum_n f_n e^{-i x_n p}` for
/// each requested frequency `p`: the trigonometric interpolation of the
/// function represented by `s`, exactly reproducing `coeffs` at grid
/// frequencies.
pub fn sample_offgrid(s: &Spectrum, points: &[f64]) -> Result<Vec<C64>> {
    check_band(points, s.grid.max_frequency())?;
    let field = inverse_fourier(s)?;
    Ok(nonuniform_quadrature(&field, points))
}

/// The same trigonometric quadrature, without band checks, zero outside.
pub(crate) fn sample_offgrid_zero_ext(s: &Spectrum, points: &[f64]) -> Result<Vec<C64>> {
    let field = inverse_fourier(s)?;
    let band = s.grid.max_frequency() * (1.0 + 1e-12);
    let mut out = nonuniform_quadrature(&field, points);
    for (v, &p) in out.iter_mut().zip(points) {
        if p.abs() > band {
            *v = C64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

fn nonuniform_quadrature(field: &Field, points: &[f64]) -> Vec<C64> {
    let grid = &field.grid;
    let n = grid.num_points();
    let scale = grid.spacing() * INV_SQRT_2PI;
    let x0 = -grid.half_length();
    points
        .iter()
        .map(|&p| {
            // e^{-i x_n p} via recurrence, refreshed periodically to keep
            // the accumulated phase error at round-off level.
            let w = C64::from_polar(1.0, -grid.spacing() * p);
            let mut z = C64::from_polar(1.0, -x0 * p);
            let mut acc = C64::new(0.0, 0.0);
            for (i, &f) in field.samples.iter().enumerate() {
                if i % 256 == 0 {
                    z = C64::from_polar(1.0, -(x0 + i as f64 * grid.spacing()) * p);
                }
                acc += f * z;
                z *= w;
            }
            acc * scale
        })
        .collect()
}

/// Precomputed trigonometric interpolation of spectra at a fixed point set;
/// agrees with [`sample_offgrid`] to round-off and amortizes the phase table
/// across repeated applications.
pub struct OffgridSampler {
    grid: SpatialGrid,
    /// `weights[p * N + n] = scale * e^{-i x_n p}` row-major per point.
    weights: Vec<C64>,
    n_points: usize,
}

impl OffgridSampler {
    pub fn new(grid: &SpatialGrid, points: &[f64]) -> Result<Self> {
        check_band(points, grid.max_frequency())?;
        let n = grid.num_points();
        let scale = grid.spacing() * INV_SQRT_2PI;
        let mut weights = Vec::with_capacity(points.len() * n);
        for &p in points {
            for xn in grid.points() {
                weights.push(C64::from_polar(scale, -xn * p));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            weights,
            n_points: points.len(),
        })
    }

    pub fn apply(&self, s: &Spectrum) -> Result<Vec<C64>> {
        if *s.grid() != self.grid {
            return Err(CoreError::GridMismatch);
        }
        let field = inverse_fourier(s)?;
        Ok(self.apply_to_field_samples(field.samples()))
    }

    /// Apply to coefficients given directly in ascending order.
    pub(crate) fn apply_values(&self, asc: &[C64]) -> Vec<C64> {
        let mut buf = asc_to_bins(asc);
        bins_to_field_inplace(&mut buf, &self.grid);
        self.apply_to_field_samples(&buf)
    }

    fn apply_to_field_samples(&self, samples: &[C64]) -> Vec<C64> {
        let n = self.grid.num_points();
        (0..self.n_points)
            .map(|p| {
                let row = &self.weights[p * n..(p + 1) * n];
                let mut acc = C64::new(0.0, 0.0);
                for (w, f) in row.iter().zip(samples) {
                    acc += w * f;
                }
                acc
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Band-limited refinement + local interpolation (fast path for large point
// sets; validated against `sample_offgrid` in tests).
// ---------------------------------------------------------------------------

const INTERP_PAD: usize = 8;
const INTERP_STENCIL: usize = 8;

/// Refine the frequency-side sampling of `s` by `pad`: embed the recovered
/// field samples in a `pad * L` box and transform. The refined grid spans the
/// same band `[-pi N/(2L), pi N/(2L))` with spacing `dxi / pad`.
fn refine_spectrum_values(s: &Spectrum, pad: usize) -> (Vec<C64>, f64, f64) {
    let grid = s.grid();
    let n = grid.num_points();
    let big = SpatialGrid {
        num_points: n * pad,
        half_length: grid.half_length() * pad as f64,
        spacing: grid.spacing(),
    };
    let mut field = asc_to_bins(&s.coeffs);
    bins_to_field_inplace(&mut field, grid);
    let mut embedded = vec![C64::new(0.0, 0.0); n * pad];
    let offset = (pad - 1) * n / 2;
    embedded[offset..offset + n].copy_from_slice(&field);
    field_to_bins_inplace(&mut embedded, &big);
    let fine = bins_to_asc(&embedded);
    let xi0 = -grid.max_frequency();
    let dxi = grid.freq_spacing() / pad as f64;
    (fine, xi0, dxi)
}

/// Refine the spatial sampling of `f` by `pad` through spectral zero padding.
fn refine_field_values(f: &Field, pad: usize) -> Vec<C64> {
    let grid = f.grid();
    let mut bins = f.samples.clone();
    field_to_bins_inplace(&mut bins, grid);
    let mut padded = pad_bins(&bins, pad);
    let fine = grid.refined(pad);
    bins_to_field_inplace(&mut padded, &fine);
    padded
}

/// Local Lagrange interpolation on a uniform grid of `values` starting at
/// `u0` with spacing `du`.
fn lagrange_uniform(values: &[C64], u0: f64, du: f64, u: f64, stencil: usize) -> C64 {
    let n = values.len();
    let pos = (u - u0) / du;
    let base = (pos.floor() as isize - (stencil as isize / 2 - 1))
        .clamp(0, n as isize - stencil as isize) as usize;
    let t = pos - base as f64;
    let mut num = C64::new(0.0, 0.0);
    let mut denom_sum = 0.0;
    // Barycentric form with binomial weights for the uniform stencil.
    let mut w = 1.0_f64;
    for i in 0..stencil {
        let di = t - i as f64;
        if di.abs() < 1e-13 {
            return values[base + i];
        }
        let wi = w / di;
        num += values[base + i] * wi;
        denom_sum += wi;
        // next binomial weight: w_{i+1} = w_i * (stencil-1-i)/(i+1) * (-1)
        w *= -((stencil - 1 - i) as f64) / (i as f64 + 1.0);
    }
    num / denom_sum
}

/// Evaluate the function represented by `s` at arbitrary in-band frequencies
/// using band-limited refinement plus local interpolation. Points outside the
/// band evaluate to zero when `zero_outside` is set, and are rejected
/// otherwise.
pub(crate) fn sample_spectrum_interp(
    s: &Spectrum,
    points: &[f64],
    zero_outside: bool,
) -> Result<Vec<C64>> {
    let band = s.grid().max_frequency();
    if !zero_outside {
        check_band(points, band)?;
    }
    let (fine, xi0, dxi) = refine_spectrum_values(s, INTERP_PAD);
    Ok(points
        .iter()
        .map(|&p| {
            if p.abs() > band * (1.0 + 1e-12) {
                C64::new(0.0, 0.0)
            } else {
                lagrange_uniform(&fine, xi0, dxi, p, INTERP_STENCIL)
            }
        })
        .collect())
}

/// Evaluate the trigonometric interpolant of `f` at arbitrary positions,
/// wrapping periodically into `[-L, L)`.
pub(crate) fn sample_field_interp(f: &Field, points: &[f64]) -> Vec<C64> {
    let grid = f.grid();
    let el = grid.half_length();
    let fine = refine_field_values(f, INTERP_PAD);
    let du = grid.spacing() / INTERP_PAD as f64;
    points
        .iter()
        .map(|&x| {
            let mut x = (x + el).rem_euclid(2.0 * el) - el;
            if x >= el {
                x = -el;
            }
            lagrange_uniform(&fine, -el, du, x, INTERP_STENCIL)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

/// Norm bundle for a field: `L^2`, `L^inf`, `H^1`, `H^2`, and the weighted
/// norm `|| <x> f ||_{H^1}`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    pub h2: f64,
    pub weighted_h11: f64,
}

fn sobolev_norm(f: &Field, weight_power: u32) -> f64 {
    let mut buf = f.samples.clone();
    field_to_bins_inplace(&mut buf, &f.grid);
    let dxi = f.grid.freq_spacing();
    let sum: f64 = buf
        .iter()
        .enumerate()
        .map(|(b, z)| {
            let xi = f.grid.bin_frequency(b);
            let w = (1.0 + xi * xi).powi(weight_power as i32);
            w * z.norm_sqr()
        })
        .sum();
    (sum * dxi).sqrt()
}

/// `L^2(dx)` norm of the samples.
pub fn l2_norm(f: &Field) -> f64 {
    let dx = f.grid.spacing();
    (f.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt()
}

/// Sup norm of the samples.
pub fn linf_norm(f: &Field) -> f64 {
    f.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn norms(f: &Field) -> Result<Norms> {
    if !f.is_finite() {
        return Err(CoreError::NonFinite { context: "norms" });
    }
    let weighted = Field::from_raw(
        f.grid.clone(),
        f.grid
            .points()
            .zip(&f.samples)
            .map(|(x, z)| z * (1.0 + x * x).sqrt())
            .collect(),
    );
    Ok(Norms {
        l2: l2_norm(f),
        linf: linf_norm(f),
        h1: sobolev_norm(f, 1),
        h2: sobolev_norm(f, 2),
        weighted_h11: sobolev_norm(&weighted, 1),
    })
}

/// Relative `L^2` distance `||a - b|| / max(||a||, ||b||)`, zero when both
/// vanish.
pub fn relative_l2(a: &Field, b: &Field) -> Result<f64> {
    if a.grid != b.grid {
        return Err(CoreError::GridMismatch);
    }
    let dx = a.grid.spacing();
    let diff: f64 = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let na = l2_norm(a);
    let nb = l2_norm(b);
    let denom = na.max(nb);
    if denom == 0.0 {
        Ok(0.0)
    } else {
        Ok((diff * dx).sqrt() / denom)
    }
}
