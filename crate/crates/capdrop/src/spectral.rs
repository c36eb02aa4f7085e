//! Real trigonometric spectral algebra on the circle.
//!
//! Fields are stored in both representations: nodal values on the uniform grid
//! and amplitudes against the L²-orthonormal basis
//!
//! ```text
//! φ(0,0) = 1/√(2π),  φ(ℓ,1) = cos ℓθ/√π,  φ(ℓ,-1) = sin ℓθ/√π.
//! ```
//!
//! The coefficient vector has length N with layout
//! `[f(0,0), f(1,1), f(1,-1), …, f(M-1,1), f(M-1,-1), f(M,1)]`, M = N/2.
//! The sine mode at ℓ = M vanishes on the grid and is never stored.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// A Fourier index (ℓ, m) of the real basis, m ∈ {-1, 0, 1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub l: usize,
    pub m: i8,
}

impl Mode {
    pub const MEAN: Mode = Mode { l: 0, m: 0 };

    pub fn new(l: usize, m: i8) -> Self {
        Mode { l, m }
    }

    /// The partner index (ℓ, -m).
    pub fn flip(self) -> Self {
        Mode { l: self.l, m: -self.m }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.l, self.m)
    }
}

/// Uniform grid on the circle with cached FFT plans.
#[derive(Clone)]
pub struct SpectralGrid<T: Real> {
    n: usize,
    dealias: Ratio<u32>,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> fmt::Debug for SpectralGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl<T: Real> PartialEq for SpectralGrid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.dealias == other.dealias
    }
}

impl<T: Real> SpectralGrid<T> {
    /// Grid with the 2/3 dealiasing rule.
    pub fn new(n: usize) -> Result<Self> {
        Self::with_dealias(n, Ratio::new(2, 3))
    }

    pub fn with_dealias(n: usize, dealias: Ratio<u32>) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("node count {n} is odd")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("node count {n} is below 8")));
        }
        if *dealias.numer() == 0 || dealias > Ratio::from_integer(1) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction {dealias} outside (0, 1]"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(SpectralGrid {
            n,
            dealias,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mode cutoff M = N/2.
    pub fn cutoff(&self) -> usize {
        self.n / 2
    }

    pub fn dealias_fraction(&self) -> Ratio<u32> {
        self.dealias
    }

    /// Largest ℓ kept by the dealiasing filter.
    pub fn dealias_cutoff(&self) -> usize {
        let m = self.cutoff() as u64;
        (m * *self.dealias.numer() as u64 / *self.dealias.denom() as u64) as usize
    }

    pub fn node(&self, j: usize) -> T {
        T::lit(2.0) * T::PI() * T::lit(j as f64) / T::lit(self.n as f64)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Trapezoidal quadrature weight 2π/N.
    pub fn weight(&self) -> T {
        T::lit(2.0) * T::PI() / T::lit(self.n as f64)
    }

    /// Position of (ℓ, m) in the coefficient vector.
    pub fn index(&self, mode: Mode) -> Option<usize> {
        let big_m = self.cutoff();
        match (mode.l, mode.m) {
            (0, 0) => Some(0),
            (l, 1) if l >= 1 && l <= big_m => Some(2 * l - 1),
            (l, -1) if l >= 1 && l < big_m => Some(2 * l),
            _ => None,
        }
    }

    /// Index of each stored coefficient.
    pub fn mode_at(&self, i: usize) -> Mode {
        if i == 0 {
            Mode::MEAN
        } else if i % 2 == 1 {
            Mode::new(i.div_ceil(2), 1)
        } else {
            Mode::new(i / 2, -1)
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.n).map(move |i| self.mode_at(i))
    }

    fn values_to_coeffs(&self, values: &[T]) -> Vec<T> {
        let n = self.n;
        let big_m = self.cutoff();
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fwd.process(&mut buf);
        let nf = T::lit(n as f64);
        let sqrt_pi = T::PI().sqrt();
        let mut c = vec![T::zero(); n];
        c[0] = (T::lit(2.0) * T::PI()).sqrt() * buf[0].re / nf;
        for l in 1..big_m {
            c[2 * l - 1] = T::lit(2.0) * sqrt_pi * buf[l].re / nf;
            c[2 * l] = -T::lit(2.0) * sqrt_pi * buf[l].im / nf;
        }
        c[n - 1] = sqrt_pi * buf[big_m].re / nf;
        c
    }

    fn coeffs_to_values(&self, coeffs: &[T]) -> Vec<T> {
        let n = self.n;
        let big_m = self.cutoff();
        let sqrt_pi = T::PI().sqrt();
        let half = T::lit(0.5);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        buf[0] = Complex::new(coeffs[0] / (T::lit(2.0) * T::PI()).sqrt(), T::zero());
        for l in 1..big_m {
            let z = Complex::new(half * coeffs[2 * l - 1] / sqrt_pi, -half * coeffs[2 * l] / sqrt_pi);
            buf[l] = z;
            buf[n - l] = z.conj();
        }
        buf[big_m] = Complex::new(coeffs[n - 1] / sqrt_pi, T::zero());
        self.inv.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

/// Analytic-Sobolev norm parameters (𝔰, s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    pub decay: f64,
    pub s: f64,
}

impl SobolevSpec {
    pub const L2: SobolevSpec = SobolevSpec { decay: 0.0, s: 0.0 };

    pub fn new(decay: f64, s: f64) -> Self {
        SobolevSpec { decay, s }
    }
}

/// A real 2π-periodic scalar held as grid values and basis coefficients.
#[derive(Clone)]
pub struct TorusField<T: Real> {
    grid: SpectralGrid<T>,
    values: Vec<T>,
    coeffs: Vec<T>,
}

impl<T: Real> fmt::Debug for TorusField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusField")
            .field("n", &self.grid.n)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

fn check_finite<T: Real>(data: &[T], what: &str) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(j) => Err(Error::NonFinite(format!("{what} entry {j}"))),
        None => Ok(()),
    }
}

impl<T: Real> TorusField<T> {
    pub fn zeros(grid: &SpectralGrid<T>) -> Self {
        TorusField {
            grid: grid.clone(),
            values: vec![T::zero(); grid.n],
            coeffs: vec![T::zero(); grid.n],
        }
    }

    pub fn constant(grid: &SpectralGrid<T>, c: T) -> Self {
        let mut coeffs = vec![T::zero(); grid.n];
        coeffs[0] = c * (T::lit(2.0) * T::PI()).sqrt();
        TorusField {
            grid: grid.clone(),
            values: vec![c; grid.n],
            coeffs,
        }
    }

    pub fn from_values(grid: &SpectralGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Shape(format!("{} values for {} nodes", values.len(), grid.n)));
        }
        check_finite(&values, "value")?;
        Ok(Self::from_values_raw(grid, values))
    }

    pub fn from_coeffs(grid: &SpectralGrid<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != grid.n {
            return Err(Error::Shape(format!("{} coefficients for {} nodes", coeffs.len(), grid.n)));
        }
        check_finite(&coeffs, "coefficient")?;
        Ok(Self::from_coeffs_raw(grid, coeffs))
    }

    pub fn from_fn(grid: &SpectralGrid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_values(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// The basis element φ(ℓ,m).
    pub fn basis(grid: &SpectralGrid<T>, mode: Mode) -> Result<Self> {
        let i = grid
            .index(mode)
            .ok_or_else(|| Error::Shape(format!("mode {mode} outside grid of {} nodes", grid.n)))?;
        let mut c = vec![T::zero(); grid.n];
        c[i] = T::one();
        Ok(Self::from_coeffs_raw(grid, c))
    }

    /// Seeded random field with amplitudes `amp·e^{-ℓ/decay}` on ℓ ≤ lmax.
    pub fn random_smooth<R: Rng + ?Sized>(
        grid: &SpectralGrid<T>,
        rng: &mut R,
        lmax: usize,
        amp: f64,
        decay: f64,
        with_mean: bool,
    ) -> Self {
        let lmax = lmax.min(grid.cutoff() - 1);
        let mut c = vec![T::zero(); grid.n];
        for (i, ci) in c.iter_mut().enumerate() {
            let mode = grid.mode_at(i);
            if mode.l > lmax || (mode.l == 0 && !with_mean) {
                continue;
            }
            let w = amp * (-(mode.l as f64) / decay).exp();
            *ci = T::lit(w * rng.gen_range(-1.0..1.0));
        }
        Self::from_coeffs_raw(grid, c)
    }

    pub(crate) fn from_values_raw(grid: &SpectralGrid<T>, values: Vec<T>) -> Self {
        let coeffs = grid.values_to_coeffs(&values);
        TorusField { grid: grid.clone(), values, coeffs }
    }

    pub(crate) fn from_coeffs_raw(grid: &SpectralGrid<T>, coeffs: Vec<T>) -> Self {
        let values = grid.coeffs_to_values(&coeffs);
        TorusField { grid: grid.clone(), values, coeffs }
    }

    pub fn grid(&self) -> &SpectralGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, mode: Mode) -> T {
        self.grid.index(mode).map_or(T::zero(), |i| self.coeffs[i])
    }

    pub fn with_coeff(&self, mode: Mode, value: T) -> Result<Self> {
        let i = self
            .grid
            .index(mode)
            .ok_or_else(|| Error::Shape(format!("mode {mode} outside grid")))?;
        let mut c = self.coeffs.clone();
        c[i] = value;
        Self::from_coeffs(&self.grid, c)
    }

    /// Amplitudes keyed by (ℓ, m).
    pub fn coefficient_map(&self) -> BTreeMap<Mode, T> {
        self.grid.modes().zip(self.coeffs.iter().copied()).collect()
    }

    pub fn from_coefficient_map(grid: &SpectralGrid<T>, map: &BTreeMap<Mode, T>) -> Result<Self> {
        let mut c = vec![T::zero(); grid.n];
        for (&mode, &v) in map {
            let i = grid
                .index(mode)
                .ok_or_else(|| Error::Shape(format!("mode {mode} outside grid")))?;
            c[i] = v;
        }
        Self::from_coeffs(grid, c)
    }

    fn zip_values(&self, other: &Self, f: impl Fn(T, T) -> T) -> Vec<T> {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect()
    }

    fn map_linear(&self, f: impl Fn(T) -> T, g: impl Fn(usize, T) -> T) -> Self {
        TorusField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| g(i, c)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_linear(|v| v * s, |_, c| c * s)
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let shift = s * (T::lit(2.0) * T::PI()).sqrt();
        self.map_linear(|v| v + s, |i, c| if i == 0 { c + shift } else { c })
    }

    /// Linear combination a·self + b·other.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        TorusField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&x, &y)| a * x + b * y).collect(),
        }
    }

    /// Zero every coefficient above the dealiasing cutoff.
    pub fn dealiased(&self) -> Self {
        let cut = self.grid.dealias_cutoff();
        if cut >= self.grid.cutoff() {
            return self.clone();
        }
        let mut c = self.coeffs.clone();
        for (i, ci) in c.iter_mut().enumerate() {
            if self.grid.mode_at(i).l > cut {
                *ci = T::zero();
            }
        }
        Self::from_coeffs_raw(&self.grid, c)
    }

    /// Pointwise product on the grid followed by the dealiasing filter.
    pub fn product(&self, other: &Self) -> Self {
        Self::from_values_raw(&self.grid, self.zip_values(other, |a, b| a * b)).dealiased()
    }

    /// Pointwise quotient followed by the dealiasing filter.
    pub fn quotient(&self, other: &Self) -> Self {
        Self::from_values_raw(&self.grid, self.zip_values(other, |a, b| a / b)).dealiased()
    }

    /// Pointwise nonlinear map followed by the dealiasing filter.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_values_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect()).dealiased()
    }

    /// e^{k f} evaluated pointwise.
    pub fn exp_scaled(&self, k: T) -> Self {
        self.map(|v| (k * v).exp())
    }

    /// Spectral derivative; the Nyquist cosine has no resolved derivative and is dropped.
    pub fn derivative(&self) -> Self {
        let n = self.grid.n;
        let mut d = vec![T::zero(); n];
        for l in 1..self.grid.cutoff() {
            let lf = T::lit(l as f64);
            d[2 * l - 1] = lf * self.coeffs[2 * l];
            d[2 * l] = -lf * self.coeffs[2 * l - 1];
        }
        Self::from_coeffs_raw(&self.grid, d)
    }

    /// ∂⁻¹Π₀^⊥: zero-mean antiderivative.
    pub fn antiderivative_zero_mean(&self) -> Self {
        let n = self.grid.n;
        let mut a = vec![T::zero(); n];
        for l in 1..self.grid.cutoff() {
            let lf = T::lit(l as f64);
            a[2 * l - 1] = -self.coeffs[2 * l] / lf;
            a[2 * l] = self.coeffs[2 * l - 1] / lf;
        }
        Self::from_coeffs_raw(&self.grid, a)
    }

    /// Fourier multiplier ℓ ↦ w(ℓ), applied to both members of each pair.
    pub fn multiplier(&self, w: impl Fn(usize) -> T) -> Self {
        let c = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * w(self.grid.mode_at(i).l))
            .collect();
        Self::from_coeffs_raw(&self.grid, c)
    }

    /// Mean value Π₀f.
    pub fn mean(&self) -> T {
        self.coeffs[0] / (T::lit(2.0) * T::PI()).sqrt()
    }

    pub fn project_zero_mean(&self) -> Self {
        self.add_scalar(-self.mean())
    }

    /// Trapezoidal quadrature of f over one period.
    pub fn integral(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v) * self.grid.weight()
    }

    /// Trapezoidal quadrature of f·g.
    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            * self.grid.weight()
    }

    /// Euclidean norm of the coefficient vector.
    pub fn l2_norm(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// sup|f| + sup|f'|.
    pub fn w1inf_norm(&self) -> T {
        self.sup_norm() + self.derivative().sup_norm()
    }

    /// Σ e^{2𝔰ℓ}(1+ℓ²)^s f(ℓ,m)², square-rooted.
    pub fn sobolev_norm(&self, spec: SobolevSpec) -> T {
        let mut acc = T::zero();
        for (i, &c) in self.coeffs.iter().enumerate() {
            let l = self.grid.mode_at(i).l as f64;
            let w = (2.0 * spec.decay * l).exp() * (1.0 + l * l).powf(spec.s);
            acc = acc + T::lit(w) * c * c;
        }
        acc.sqrt()
    }

    /// True iff every coefficient with κ ∤ ℓ is below 1e-12·‖f‖.
    pub fn kappa_fold_check(&self, kappa: usize) -> bool {
        assert!(kappa >= 1, "fold order must be positive");
        let tol = T::lit(1e-12) * self.l2_norm();
        self.coeffs
            .iter()
            .enumerate()
            .all(|(i, &c)| self.grid.mode_at(i).l.is_multiple_of(kappa) || c.abs() <= tol)
    }

    /// 𝒯_α f(θ) = f(θ + α).
    pub fn shift(&self, alpha: T) -> Self {
        let n = self.grid.n;
        let mut c = self.coeffs.clone();
        for l in 1..self.grid.cutoff() {
            let (s, co) = (T::lit(l as f64) * alpha).sin_cos();
            let (a, b) = (self.coeffs[2 * l - 1], self.coeffs[2 * l]);
            c[2 * l - 1] = a * co + b * s;
            c[2 * l] = b * co - a * s;
        }
        c[n - 1] = self.coeffs[n - 1] * (T::lit(self.grid.cutoff() as f64) * alpha).cos();
        Self::from_coeffs_raw(&self.grid, c)
    }

    /// ι f(θ) = f(-θ).
    pub fn reflect(&self) -> Self {
        let c = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| if self.grid.mode_at(i).m == -1 { -c } else { c })
            .collect();
        Self::from_coeffs_raw(&self.grid, c)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.zip_values(other, |a, b| (a - b).abs())
            .into_iter()
            .fold(T::zero(), T::max)
    }

    /// Same field on a grid of another node count (zero padding or truncation).
    pub fn resample(&self, grid: &SpectralGrid<T>) -> Self {
        let mut c = vec![T::zero(); grid.n];
        for (i, &v) in self.coeffs.iter().enumerate() {
            let mode = self.grid.mode_at(i);
            if let Some(j) = grid.index(mode) {
                c[j] = v;
            }
        }
        Self::from_coeffs_raw(grid, c)
    }

    pub fn to_f64(&self) -> TorusField<f64> {
        let grid = SpectralGrid::<f64>::with_dealias(self.grid.n, self.grid.dealias)
            .expect("grid already validated");
        let c = self.coeffs.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        TorusField::from_coeffs_raw(&grid, c)
    }

    pub fn from_f64(grid: &SpectralGrid<T>, f: &TorusField<f64>) -> Self {
        let c = f.coeffs.iter().map(|&c| T::lit(c)).collect();
        Self::from_coeffs_raw(grid, c)
    }
}

/// Coefficient map of a field.
pub fn transform<T: Real>(field: &TorusField<T>) -> BTreeMap<Mode, T> {
    field.coefficient_map()
}

/// Field with the given coefficient map.
pub fn inverse_transform<T: Real>(coeffs: &BTreeMap<Mode, T>, grid: &SpectralGrid<T>) -> Result<TorusField<T>> {
    TorusField::from_coefficient_map(grid, coeffs)
}

impl<T: Real> Add for &TorusField<T> {
    type Output = TorusField<T>;
    fn add(self, rhs: Self) -> TorusField<T> {
        self.axpby(T::one(), rhs, T::one())
    }
}

impl<T: Real> Sub for &TorusField<T> {
    type Output = TorusField<T>;
    fn sub(self, rhs: Self) -> TorusField<T> {
        self.axpby(T::one(), rhs, -T::one())
    }
}

impl<T: Real> Neg for &TorusField<T> {
    type Output = TorusField<T>;
    fn neg(self) -> TorusField<T> {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for &TorusField<T> {
    type Output = TorusField<T>;
    fn mul(self, rhs: T) -> TorusField<T> {
        self.scale(rhs)
    }
}
