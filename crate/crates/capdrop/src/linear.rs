//! Mode blocks of the linearized operators at the rotating circle, resonances,
//! multiplicity, transversality and energetic coercivity.

use nalgebra::{Complex, DMatrix, Matrix4, SymmetricEigen};
use num_traits::{FromPrimitive, Num};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{grad_hamiltonian_wahlen, Model, PhysicalParams, WahlenState};
use crate::spectral::{Mode, SpectralGrid, TorusField};

/// Scalars the closed-form blocks can be evaluated in, exact or floating.
pub trait BlockScalar: Clone + Num + FromPrimitive {}
impl<T: Clone + Num + FromPrimitive> BlockScalar for T {}

fn int<T: BlockScalar>(x: i64) -> T {
    T::from_i64(x).expect("small integer is representable")
}

fn sq<T: BlockScalar>(x: &T) -> T {
    x.clone() * x.clone()
}

/// 2×2 block acting on one (ℓ, m) pair of coefficients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeBlock<T> {
    pub l: usize,
    pub m: i8,
    pub mat: [[T; 2]; 2],
}

impl<T: BlockScalar> ModeBlock<T> {
    pub fn det(&self) -> T {
        let [[a, b], [c, d]] = self.mat.clone();
        a * d - b * c
    }

    pub fn trace(&self) -> T {
        self.mat[0][0].clone() + self.mat[1][1].clone()
    }
}

impl ModeBlock<f64> {
    /// Eigenvalues of the 2×2 matrix.
    pub fn eigenvalues(&self) -> [Complex<f64>; 2] {
        let half_tr = 0.5 * self.trace();
        let disc = Complex::new(half_tr * half_tr - self.det(), 0.0).sqrt();
        [Complex::new(half_tr, 0.0) - disc, Complex::new(half_tr, 0.0) + disc]
    }

    /// Ascending eigenvalues of a symmetric block.
    pub fn symmetric_eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.mat;
        let mid = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [mid - rad, mid + rad]
    }
}

/// σ₀ℓ² − (σ₀ + α₀²/4) + α₀²/(4ℓ) in factored form, the ζζ entry shared by all blocks.
fn zeta_entry<T: BlockScalar>(l: usize, sigma: &T, alpha: &T) -> T {
    let lt: T = T::from_usize(l).unwrap();
    let a2_4 = sq(alpha) / int(4);
    (lt.clone() - T::one()) * (sigma.clone() * (lt.clone() + T::one()) - a2_4 / lt)
}

/// Block of d_u F(ω, 0) on (ζ_{ℓ,m}, γ_{ℓ,−m}).
pub fn block_lomega<T: BlockScalar>(l: usize, m: i8, omega: T, sigma: T, alpha: T) -> ModeBlock<T> {
    if l == 0 {
        let a = sq(&alpha) / int(4) - sigma;
        return ModeBlock { l, m: 0, mat: [[a, T::zero()], [T::zero(), T::zero()]] };
    }
    let lt: T = T::from_usize(l).unwrap();
    let mt: T = int(m as i64);
    let half_alpha = alpha.clone() / int(2);
    let off = mt.clone() * half_alpha.clone() + mt * lt.clone() * (omega - half_alpha);
    let a = zeta_entry(l, &sigma, &alpha);
    ModeBlock { l, m, mat: [[a, off.clone()], [off, lt]] }
}

/// Hessian block of the energy at the rotating circle.
pub fn hessian_block<T: BlockScalar>(l: usize, m: i8, sigma: T, alpha: T) -> ModeBlock<T> {
    block_lomega(l, m, T::zero(), sigma, alpha)
}

/// Linearized evolution block mapping (ζ_{ℓ,m}, γ_{ℓ,−m}) to (ζ̇_{ℓ,−m}, γ̇_{ℓ,m}).
pub fn dynamic_block<T: BlockScalar>(l: usize, m: i8, sigma: T, alpha: T) -> ModeBlock<T> {
    if l == 0 {
        let c = sigma - sq(&alpha) / int(4);
        return ModeBlock { l, m: 0, mat: [[T::zero(), T::zero()], [c, T::zero()]] };
    }
    let lt: T = T::from_usize(l).unwrap();
    let mt: T = int(m as i64);
    let half_alpha = alpha.clone() / int(2);
    let b = mt.clone() * half_alpha.clone() - mt * lt.clone() * half_alpha;
    let a = zeta_entry(l, &sigma, &alpha);
    ModeBlock { l, m, mat: [[b.clone(), lt], [T::zero() - a, T::zero() - b]] }
}

/// F(σ₀, α₀, ω, ℓ) = σ₀ℓ² − (ω−α₀/2)²ℓ − [σ₀ + α₀(ω−α₀/2) + α₀²/4].
pub fn resonance_f<T: BlockScalar>(sigma: T, alpha: T, omega: T, l: usize) -> T {
    let lt: T = T::from_usize(l).unwrap();
    let w = omega - alpha.clone() / int(2);
    sigma.clone() * sq(&lt) - sq(&w) * lt - (sigma + alpha.clone() * w + sq(&alpha) / int(4))
}

/// Δ = (n−1)(C n(n+1) − 1/4) for the mode n = κℓ.
pub fn resonance_delta<T: BlockScalar>(n: usize, c: T) -> T {
    let nt: T = T::from_usize(n).unwrap();
    (nt.clone() - T::one()) * (c * nt.clone() * (nt + T::one()) - T::one() / int(4))
}

fn f_scale(p: &PhysicalParams, omega: f64, l: usize) -> f64 {
    let l = l as f64;
    let w = omega - 0.5 * p.alpha0;
    p.sigma0 * l * l + w * w * l + p.sigma0 + (p.alpha0 * w).abs() + 0.25 * p.alpha0 * p.alpha0
}

/// 4×4 matrix of the linearized flow on (ζ_{ℓ,1}, ζ_{ℓ,−1}, γ_{ℓ,1}, γ_{ℓ,−1}).
pub fn dynamic_operator(l: usize, p: &PhysicalParams) -> Matrix4<f64> {
    let zi = |m: i8| if m == 1 { 0 } else { 1 };
    let gi = |m: i8| if m == 1 { 2 } else { 3 };
    let mut a = Matrix4::zeros();
    for m in [1i8, -1] {
        let d = dynamic_block(l, m, p.sigma0, p.alpha0).mat;
        a[(zi(-m), zi(m))] = d[0][0];
        a[(zi(-m), gi(-m))] = d[0][1];
        a[(gi(m), zi(m))] = d[1][0];
        a[(gi(m), gi(-m))] = d[1][1];
    }
    a
}

/// Linear spectrum of one mode.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumEntry {
    pub l: usize,
    /// Eigenvalues of the 2×2 block (m = 1) as (re, im).
    pub block: [[f64; 2]; 2],
    /// Eigenvalues of the coupled m = ±1 operator as (re, im).
    pub operator: Vec<[f64; 2]>,
    /// λ² from the block determinant.
    pub lambda_sq_block: f64,
    /// λ² = ℓ(−σ₀ℓ² − (α₀²/4)ℓ + σ₀ − α₀²/4).
    pub lambda_sq_expanded: f64,
    /// λ² = −ℓ(σ₀ℓ² + α₀²/4 − σ₀ + α₀²/4).
    pub lambda_sq_compact: f64,
}

impl SpectrumEntry {
    pub fn max_real_part(&self) -> f64 {
        self.block.iter().map(|z| z[0].abs()).fold(0.0, f64::max)
    }

    pub fn discrepancy_expanded(&self) -> f64 {
        (self.lambda_sq_block - self.lambda_sq_expanded).abs()
    }

    pub fn discrepancy_compact(&self) -> f64 {
        (self.lambda_sq_block - self.lambda_sq_compact).abs()
    }
}

fn pair(z: Complex<f64>) -> [f64; 2] {
    [z.re, z.im]
}

pub fn linear_spectrum(p: &PhysicalParams, l_max: usize) -> Result<Vec<SpectrumEntry>> {
    if l_max < 2 {
        return Err(Error::InvalidParams(format!("l_max must be at least 2, got {l_max}")));
    }
    let (s, a) = (p.sigma0, p.alpha0);
    Ok((0..=l_max)
        .into_par_iter()
        .map(|l| {
            let blk = dynamic_block(l, 1, s, a);
            let lf = l as f64;
            let operator = if l == 0 {
                blk.eigenvalues().iter().map(|&z| pair(z)).collect()
            } else {
                let mut ev: Vec<[f64; 2]> = dynamic_operator(l, p).complex_eigenvalues().iter().map(|&z| pair(z)).collect();
                ev.sort_by(|x, y| x[1].total_cmp(&y[1]).then(x[0].total_cmp(&y[0])));
                ev
            };
            let (expanded, compact) = if l == 0 {
                (0.0, 0.0)
            } else {
                (
                    lf * (-s * lf * lf - 0.25 * a * a * lf + s - 0.25 * a * a),
                    -lf * (s * lf * lf + 0.5 * a * a - s),
                )
            };
            SpectrumEntry {
                l,
                block: blk.eigenvalues().map(pair),
                operator,
                lambda_sq_block: -blk.det(),
                lambda_sq_expanded: expanded,
                lambda_sq_compact: compact,
            }
        })
        .collect())
}

/// Coefficient vector (ζ then γ, each of length N) without projections.
pub fn pack(w: &WahlenState<f64>) -> Vec<f64> {
    let mut v = w.zeta.coeffs().to_vec();
    v.extend_from_slice(w.gamma.coeffs());
    v
}

pub fn unpack(grid: &SpectralGrid<f64>, x: &[f64]) -> Result<WahlenState<f64>> {
    let n = grid.n();
    Ok(WahlenState {
        zeta: TorusField::from_coeffs(grid, x[..n].to_vec())?,
        gamma: TorusField::from_coeffs(grid, x[n..].to_vec())?,
    })
}

/// Central-difference Jacobian, columns evaluated in parallel.
pub fn fd_jacobian<F>(f: F, x0: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..x0.len())
        .into_par_iter()
        .map(|j| {
            let mut xp = x0.to_vec();
            let mut xm = x0.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(&xp)?, f(&xm)?);
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        })
        .collect::<Result<_>>()?;
    let rows = cols.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, x0.len(), |i, j| cols[j][i]))
}

/// FD Jacobian at the circle of the shear-coordinate field before the γ̇ mean is removed.
pub fn dynamic_jacobian_fd(model: &Model, grid: &SpectralGrid<f64>, h: f64) -> Result<DMatrix<f64>> {
    let x0 = vec![0.0; 2 * grid.n()];
    fd_jacobian(|x| Ok(pack(&crate::dynamics::rhs_wahlen_raw(&unpack(grid, x)?, model)?)), &x0, h)
}

/// ∇H̄ − (α₀²/4)∇V̄, the gradient whose zero set contains the rotating circle.
pub fn shifted_gradient(w: &WahlenState<f64>, model: &Model) -> Result<WahlenState<f64>> {
    let (gz, gg) = grad_hamiltonian_wahlen(w, model)?;
    let e2 = w.zeta.exp_scaled(2.0);
    Ok(WahlenState { zeta: gz.axpby(1.0, &e2, -model.params.circle_multiplier()), gamma: gg })
}

/// FD Hessian at the circle in coefficient coordinates.
pub fn hessian_fd(model: &Model, grid: &SpectralGrid<f64>, h: f64) -> Result<DMatrix<f64>> {
    let x0 = vec![0.0; 2 * grid.n()];
    fd_jacobian(|x| Ok(pack(&shifted_gradient(&unpack(grid, x)?, model)?)), &x0, h)
}

/// Extracts the (ℓ, m) block of a coefficient-space Jacobian; `dynamic` selects the
/// (ζ̇_{ℓ,−m}, γ̇_{ℓ,m}) row convention.
pub fn extract_block(jac: &DMatrix<f64>, grid: &SpectralGrid<f64>, l: usize, m: i8, dynamic: bool) -> Option<[[f64; 2]; 2]> {
    let n = grid.n();
    let (m, mm) = if l == 0 { (0, 0) } else { (m, -m) };
    let col_z = grid.index(Mode { l, m })?;
    let col_g = n + grid.index(Mode { l, m: mm })?;
    let (row_z, row_g) = if dynamic {
        (grid.index(Mode { l, m: mm })?, n + grid.index(Mode { l, m })?)
    } else {
        (col_z, col_g)
    };
    Some([[jac[(row_z, col_z)], jac[(row_z, col_g)]], [jac[(row_g, col_z)], jac[(row_g, col_g)]]])
}

/// Two real frequencies solving F(ω, κℓ) = 0, when they exist.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Resonance {
    pub l: usize,
    pub kappa: usize,
    /// None when α₀ = 0 (Δ undefined, the discriminant is used).
    pub delta: Option<f64>,
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
}

impl Resonance {
    pub fn mode(&self) -> usize {
        self.l * self.kappa
    }
}

/// Bisection polish of a simple root near `guess`; double roots are returned unchanged.
fn refine_root(g: impl Fn(f64) -> f64, guess: f64) -> f64 {
    let g0 = g(guess);
    if g0 == 0.0 {
        return guess;
    }
    let mut h = 1e-10 * (1.0 + guess.abs());
    let bracket = loop {
        if h > 1e-2 * (1.0 + guess.abs()) {
            return guess;
        }
        if g(guess - h).signum() != g(guess + h).signum() {
            break (guess - h, guess + h);
        }
        h *= 4.0;
    };
    let (mut lo, mut hi) = bracket;
    let s_lo = g(lo).signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = (g(lo).abs(), g(hi).abs());
    if glo <= ghi {
        lo
    } else {
        hi
    }
}

pub fn resonance_solve(l: usize, kappa: usize, p: &PhysicalParams) -> Result<Resonance> {
    if l == 0 || kappa == 0 {
        return Err(Error::InvalidParams(format!("l and kappa must be positive, got l={l}, kappa={kappa}")));
    }
    let n = l * kappa;
    let nf = n as f64;
    let (s, a) = (p.sigma0, p.alpha0);
    let delta = p.modified_bond().map(|c| resonance_delta(n, c));
    let radicand = (a / (2.0 * nf)).powi(2) + (4.0 * s * (nf * nf - 1.0) - a * a) / (4.0 * nf);
    let admissible = match delta {
        Some(d) => d >= 0.0,
        None => radicand >= 0.0,
    };
    if !admissible {
        return Ok(Resonance { l, kappa, delta, omega_plus: None, omega_minus: None });
    }
    let root = radicand.max(0.0).sqrt();
    let centre = 0.5 * a - a / (2.0 * nf);
    let g = |w: f64| resonance_f(s, a, w, n);
    Ok(Resonance {
        l,
        kappa,
        delta,
        omega_plus: Some(refine_root(g, centre + root)),
        omega_minus: Some(refine_root(g, centre - root)),
    })
}

/// Frequency where the kernel at mode ℓ loses its γ component.
pub fn degenerate_frequency(l: usize, p: &PhysicalParams) -> f64 {
    0.5 * p.alpha0 - p.alpha0 / (2.0 * l as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicityReport {
    pub omega: f64,
    pub l_max: usize,
    pub roots: Vec<usize>,
    pub multiplicity: usize,
    /// Roots at which ω = α₀/2 − α₀/(2ℓ).
    pub degenerate_roots: Vec<usize>,
    /// Whether 1 + α₀²/(4σ₀) = k² with k odd.
    pub integrality_holds: bool,
    /// The integer ℓ = (k−1)/2 given by that criterion.
    pub integrality_l: Option<usize>,
}

pub fn multiplicity_scan(omega: f64, p: &PhysicalParams, l_max: usize) -> Result<MultiplicityReport> {
    let tol = 1e-9 * p.sigma0 * (l_max * l_max) as f64;
    let roots: Vec<usize> =
        (1..=l_max).filter(|&l| resonance_f(p.sigma0, p.alpha0, omega, l).abs() <= tol).collect();
    if roots.is_empty() {
        return Err(Error::NoRoot { omega, l_max });
    }
    let degenerate_roots = roots
        .iter()
        .copied()
        .filter(|&l| (omega - degenerate_frequency(l, p)).abs() <= 1e-10 * (1.0 + omega.abs()))
        .collect();
    let v = 1.0 + p.alpha0 * p.alpha0 / (4.0 * p.sigma0);
    let k = v.sqrt().round();
    let integrality_holds = (k * k - v).abs() <= 1e-10 * v && (k as u64) % 2 == 1;
    Ok(MultiplicityReport {
        omega,
        l_max,
        multiplicity: 2 * roots.len(),
        roots,
        degenerate_roots,
        integrality_holds,
        integrality_l: integrality_holds.then(|| ((k as u64 - 1) / 2) as usize),
    })
}

/// c = α₀/(2ℓ) + (ω − α₀/2), the γ weight of the kernel vector.
fn kernel_weight(l: usize, omega: f64, p: &PhysicalParams) -> f64 {
    p.alpha0 / (2.0 * l as f64) + omega - 0.5 * p.alpha0
}

/// Coefficients (ζ_{ℓ,m}, γ_{ℓ,−m}) of the unit kernel vector 𝚟_{ℓ,m}.
pub fn kernel_coefficients(l: usize, m: i8, omega: f64, p: &PhysicalParams) -> [f64; 2] {
    let c = kernel_weight(l, omega, p);
    let norm = 1.0 / (1.0 + c * c).sqrt();
    [norm, -(m as f64) * c * norm]
}

/// 𝚟_{ℓ,1} and 𝚟_{ℓ,−1} as states on `grid`.
pub fn kernel_vectors(l: usize, omega: f64, p: &PhysicalParams, grid: &SpectralGrid<f64>) -> Result<[WahlenState<f64>; 2]> {
    let resid = resonance_f(p.sigma0, p.alpha0, omega, l);
    if l == 0 || resid.abs() > 1e-9 * f_scale(p, omega, l) {
        return Err(Error::NotResonant { l, omega, residual: resid });
    }
    let make = |m: i8| -> Result<WahlenState<f64>> {
        let [z, g] = kernel_coefficients(l, m, omega, p);
        let zeta = TorusField::basis(grid, Mode { l, m })?.scale(z);
        let gamma = TorusField::basis(grid, Mode { l, m: -m })?.scale(g);
        Ok(WahlenState { zeta, gamma })
    };
    Ok([make(1)?, make(-1)?])
}

/// −(α₀ + 2ℓ(ω−α₀/2)) / (1 + (ω−α₀/2)²).
pub fn transversality_value<T: BlockScalar>(l: usize, omega: T, alpha: T) -> T {
    let lt: T = T::from_usize(l).unwrap();
    let w = omega - alpha.clone() / int(2);
    (T::zero() - (alpha + int::<T>(2) * lt * w.clone())) / (T::one() + sq(&w))
}

pub fn transversality(l: usize, omega: f64, p: &PhysicalParams) -> f64 {
    transversality_value(l, omega, p.alpha0)
}

/// α₀/2 − α₀/(2ℓ) in any block scalar.
pub fn degenerate_frequency_value<T: BlockScalar>(l: usize, alpha: T) -> T {
    let lt: T = T::from_usize(l).unwrap();
    alpha.clone() / int(2) - alpha / (int::<T>(2) * lt)
}

/// ⟨∂_ω ℒ 𝚟_{ℓ,m}, 𝚟_{ℓ,m}⟩ from the unit kernel vectors.
pub fn transversality_kernel(l: usize, omega: f64, p: &PhysicalParams) -> f64 {
    let c = kernel_weight(l, omega, p);
    -2.0 * l as f64 * c / (1.0 + c * c)
}

/// (α₀ + 2ℓ(ω−α₀/2)) / (2(1 + (ω−α₀/2+α₀/(2ℓ))²)).
pub fn reduced_momentum_coeff(l: usize, omega: f64, p: &PhysicalParams) -> f64 {
    let c = kernel_weight(l, omega, p);
    (p.alpha0 + 2.0 * l as f64 * (omega - 0.5 * p.alpha0)) / (2.0 * (1.0 + c * c))
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceEntry {
    pub l: usize,
    pub delta: Option<f64>,
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
    /// Integer roots of F at ω₊ and ω₋.
    pub co_roots: [Vec<usize>; 2],
    pub multiplicity: [usize; 2],
    pub transversality: [Option<f64>; 2],
    pub degenerate: [bool; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceReport {
    pub params: PhysicalParams,
    pub kappa: usize,
    pub l_max: usize,
    pub entries: Vec<ResonanceEntry>,
}

pub fn resonance_report(p: &PhysicalParams, kappa: usize, l_max: usize) -> Result<ResonanceReport> {
    if kappa == 0 || l_max < kappa {
        return Err(Error::InvalidParams(format!("need 1 <= kappa <= l_max, got kappa={kappa}, l_max={l_max}")));
    }
    let entries = (1..=l_max / kappa)
        .into_par_iter()
        .map(|l| {
            let r = resonance_solve(l, kappa, p)?;
            let n = r.mode();
            let per = |w: Option<f64>| -> Result<(Vec<usize>, usize, Option<f64>, bool)> {
                match w {
                    None => Ok((vec![], 0, None, false)),
                    Some(w) => {
                        let scan = multiplicity_scan(w, p, l_max)?;
                        let degenerate = scan.degenerate_roots.contains(&n);
                        Ok((scan.roots, scan.multiplicity, Some(transversality(n, w, p)), degenerate))
                    }
                }
            };
            let (rp, mp, tp, dp) = per(r.omega_plus)?;
            let (rm, mm, tm, dm) = per(r.omega_minus)?;
            Ok(ResonanceEntry {
                l: n,
                delta: r.delta,
                omega_plus: r.omega_plus,
                omega_minus: r.omega_minus,
                co_roots: [rp, rm],
                multiplicity: [mp, mm],
                transversality: [tp, tm],
                degenerate: [dp, dm],
            })
        })
        .collect::<Result<_>>()?;
    Ok(ResonanceReport { params: *p, kappa, l_max, entries })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HessianEntry {
    pub l: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub det: f64,
    /// Roots of the closed-form eigenvalue polynomial (NaN when complex).
    pub closed_form_lambda_minus: f64,
    pub closed_form_lambda_plus: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HessianSpectrum {
    pub lambda1_zero: f64,
    pub lambda2_zero: f64,
    pub modified_bond: Option<f64>,
    pub entries: Vec<HessianEntry>,
}

pub fn hessian_spectrum(p: &PhysicalParams, l_max: usize) -> HessianSpectrum {
    let (s, a) = (p.sigma0, p.alpha0);
    let entries = (1..=l_max)
        .map(|l| {
            let blk = hessian_block(l, 1, s, a);
            let [lm, lp] = blk.symmetric_eigenvalues();
            let lf = l as f64;
            let tr = s * lf * lf + lf - s - 0.25 * a * a + 0.25 * a * a / lf;
            let cst = (s * lf * lf - 0.25 * a * a * lf * lf - s + 0.25 * a * a) * lf;
            let disc = tr * tr - 4.0 * cst;
            let root = if disc >= 0.0 { disc.sqrt() } else { f64::NAN };
            HessianEntry {
                l,
                lambda_minus: lm,
                lambda_plus: lp,
                det: blk.det(),
                closed_form_lambda_minus: 0.5 * (tr - root),
                closed_form_lambda_plus: 0.5 * (tr + root),
            }
        })
        .collect();
    HessianSpectrum { lambda1_zero: -s + 0.25 * a * a, lambda2_zero: 0.0, modified_bond: p.modified_bond(), entries }
}

/// Coordinate of the truncated phase space: field 0 is ζ, field 1 is γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coord {
    pub field: u8,
    pub mode: Mode,
}

/// Coordinates with ℓ < N/2: all ζ modes and the zero-mean γ modes.
pub fn truncated_coords(n: usize) -> Vec<Coord> {
    let l_top = n / 2 - 1;
    let mut out = vec![Coord { field: 0, mode: Mode::MEAN }];
    for l in 1..=l_top {
        for m in [1i8, -1] {
            out.push(Coord { field: 0, mode: Mode { l, m } });
            out.push(Coord { field: 1, mode: Mode { l, m: -m } });
        }
    }
    out
}

/// Hessian of the energy at the circle on the truncated coordinates, assembled from the blocks.
pub fn truncated_hessian(p: &PhysicalParams, n: usize) -> (DMatrix<f64>, Vec<Coord>) {
    let coords = truncated_coords(n);
    let mut h = DMatrix::zeros(coords.len(), coords.len());
    h[(0, 0)] = hessian_block(0, 0, p.sigma0, p.alpha0).mat[0][0];
    let mut i = 1;
    while i < coords.len() {
        let Mode { l, m } = coords[i].mode;
        let b = hessian_block(l, m, p.sigma0, p.alpha0).mat;
        h[(i, i)] = b[0][0];
        h[(i, i + 1)] = b[0][1];
        h[(i + 1, i)] = b[1][0];
        h[(i + 1, i + 1)] = b[1][1];
        i += 2;
    }
    (h, coords)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub n: usize,
    pub unconstrained_min: f64,
    pub constrained_min: f64,
    pub lambda_minus_2: f64,
    pub lambda_plus_2: f64,
    pub modified_bond: Option<f64>,
    pub has_negative_direction: bool,
    /// constrained_min ≥ 0.1·min(λ₋(2), λ₊(2)).
    pub coercive: bool,
}

fn is_constraint(c: &Coord) -> bool {
    c.mode.l == 0 || (c.mode.l == 1)
}

/// Minimum Rayleigh quotient of the truncated Hessian with and without the
/// linearized volume and barycenter constraints.
pub fn constrained_coercivity(p: &PhysicalParams, n: usize) -> Result<CoercivityReport> {
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("truncation must be even and at least 16, got {n}")));
    }
    let (h, coords) = truncated_hessian(p, n);
    let min_eig = |m: DMatrix<f64>| SymmetricEigen::new(m).eigenvalues.min();
    let unconstrained_min = min_eig(h.clone());
    let keep: Vec<usize> = (0..coords.len()).filter(|&i| !is_constraint(&coords[i])).collect();
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| h[(keep[i], keep[j])]);
    let constrained_min = min_eig(sub);
    let [lambda_minus_2, lambda_plus_2] = hessian_block(2, 1, p.sigma0, p.alpha0).symmetric_eigenvalues();
    Ok(CoercivityReport {
        n,
        unconstrained_min,
        constrained_min,
        lambda_minus_2,
        lambda_plus_2,
        modified_bond: p.modified_bond(),
        has_negative_direction: unconstrained_min < 0.0,
        coercive: constrained_min >= 0.1 * lambda_minus_2.min(lambda_plus_2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Q = Ratio<i64>;

    fn params(s: f64, a: f64) -> PhysicalParams {
        PhysicalParams::new(s, a).unwrap()
    }

    #[test]
    fn determinant_identity_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = Q::new(rng.gen_range(1..50), rng.gen_range(1..7));
            let a = Q::new(rng.gen_range(-20..20), rng.gen_range(1..5));
            let w = Q::new(rng.gen_range(-20..20), rng.gen_range(1..5));
            for l in 1..=64 {
                let blk = block_lomega(l, 1, w, s, a);
                assert_eq!(blk.det(), Q::from_integer(l as i64) * resonance_f(s, a, w, l));
                assert_eq!(blk.mat[0][1], blk.mat[1][0]);
                assert_eq!(dynamic_block(l, -1, s, a).trace(), Q::from_integer(0));
            }
        }
    }

    #[test]
    fn closed_form_special_cases() {
        let b = hessian_block(0, 0, 1.0, 2.0);
        assert_eq!(b.mat, [[0.0, 0.0], [0.0, 0.0]]);
        let det = block_lomega(2, 1, 1.5f64.sqrt(), 1.0, 0.0).det();
        assert!(det.abs() < 1e-14);
        let b = block_lomega(3, -1, 0.75f64, 1.3, 1.5);
        assert!((b.mat[0][1] - (-0.75)).abs() < 1e-15);
    }

    #[test]
    fn hessian_determinant_factorizes() {
        let s = Q::new(7, 3);
        let a = Q::new(5, 2);
        for l in 1..=40usize {
            let lq = Q::from_integer(l as i64);
            let want = lq * (lq - 1) * (s * (lq + 1) - a * a / 4);
            assert_eq!(hessian_block(l, 1, s, a).det(), want);
        }
    }

    #[test]
    fn spectrum_small_cases() {
        let sp = linear_spectrum(&params(1.0, 0.0), 4).unwrap();
        assert!(sp[0].block.iter().all(|z| z[0] == 0.0 && z[1] == 0.0));
        let im = sp[2].block[1][1];
        assert!((im - 6f64.sqrt()).abs() < 1e-14);
        assert!((sp[2].lambda_sq_expanded - sp[2].lambda_sq_block).abs() < 1e-12);
        let sp = linear_spectrum(&params(1.3, 2.1), 4).unwrap();
        assert!(sp[1].block.iter().all(|z| z[0].abs() < 1e-14 && z[1].abs() < 1e-14));
        assert!(linear_spectrum(&params(1.0, 0.0), 1).is_err());
    }

    #[test]
    fn operator_spectrum_matches_nalgebra_and_closed_form() {
        let p = params(1.0, 1.7);
        for l in 2..10usize {
            let op = dynamic_operator(l, &p);
            let ev = op.complex_eigenvalues();
            let d = dynamic_block(l, 1, p.sigma0, p.alpha0).mat;
            let (b, a) = (d[0][0], -d[1][0]);
            let r = (l as f64 * a).sqrt();
            for want in [b - r, b + r, -b - r, -b + r] {
                assert!(ev.iter().any(|z| z.re.abs() < 1e-10 && (z.im.abs() - want.abs()).abs() < 1e-9));
            }
        }
    }

    #[test]
    fn dynamic_blocks_match_fd_jacobian() {
        let g = SpectralGrid::new(32).unwrap();
        for (s, a) in [(1.0, 0.0), (1.0, 1.0), (1.0, 3.0)] {
            let model = Model::new(params(s, a));
            let jac = dynamic_jacobian_fd(&model, &g, 1e-6).unwrap();
            for l in 0..=8 {
                for m in [1i8, -1] {
                    let fd = extract_block(&jac, &g, l, m, true).unwrap();
                    let want = dynamic_block(l, m, s, a).mat;
                    for i in 0..2 {
                        for j in 0..2 {
                            assert!((fd[i][j] - want[i][j]).abs() < 1e-6, "l={l} m={m} {fd:?} {want:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_blocks_match_fd() {
        let g = SpectralGrid::new(32).unwrap();
        let p = params(1.0, 3.0);
        let jac = hessian_fd(&Model::new(p), &g, 1e-6).unwrap();
        for l in 0..=8 {
            let fd = extract_block(&jac, &g, l, 1, false).unwrap();
            let want = hessian_block(l, 1, p.sigma0, p.alpha0).mat;
            for i in 0..2 {
                for j in 0..2 {
                    assert!((fd[i][j] - want[i][j]).abs() < 1e-6, "l={l} {fd:?} {want:?}");
                }
            }
        }
    }

    #[test]
    fn resonance_values() {
        let r = resonance_solve(2, 1, &params(1.0, 0.0)).unwrap();
        assert!(r.delta.is_none());
        assert!((r.omega_plus.unwrap() - 1.224744871391589).abs() < 1e-12);
        assert!((r.omega_minus.unwrap() + 1.224744871391589).abs() < 1e-12);
        let r = resonance_solve(1, 1, &params(2.0, 1.5)).unwrap();
        assert_eq!(r.delta, Some(0.0));
        assert!(r.omega_plus.unwrap().abs() < 1e-12 && r.omega_minus.unwrap().abs() < 1e-12);
        let r = resonance_solve(2, 1, &params(0.01, 1.0)).unwrap();
        assert!(r.delta.unwrap() < 0.0 && r.omega_plus.is_none());
        assert_eq!(resonance_delta(2, Q::new(1, 24)), Q::from_integer(0));
    }

    #[test]
    fn resonances_are_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = params(rng.gen_range(0.1..5.0), rng.gen_range(-4.0..4.0));
            let l = rng.gen_range(1..30);
            let r = resonance_solve(l, 1, &p).unwrap();
            for w in [r.omega_plus, r.omega_minus].into_iter().flatten() {
                assert!(resonance_f(p.sigma0, p.alpha0, w, l).abs() <= 1e-10 * f_scale(&p, w, l));
            }
        }
    }

    #[test]
    fn multiplicity_cases() {
        let rep = multiplicity_scan(1.5f64.sqrt(), &params(1.0, 0.0), 128).unwrap();
        assert_eq!((rep.roots.clone(), rep.multiplicity), (vec![2], 2));
        let rep = multiplicity_scan(0.0, &params(1.0, 4.0), 128).unwrap();
        assert_eq!((rep.roots.clone(), rep.multiplicity), (vec![1, 3], 4));
        let rep = multiplicity_scan(0.0, &params(1.0, 32f64.sqrt()), 128).unwrap();
        assert!(rep.integrality_holds);
        assert_eq!(rep.integrality_l, Some(1));
        assert!(rep.degenerate_roots.contains(&1));
        assert!(matches!(multiplicity_scan(0.3, &params(1.0, 0.0), 16), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn kernel_vectors_are_kernel() {
        let g = SpectralGrid::new(32).unwrap();
        for (s, a) in [(1.0, 0.0), (1.0, 1.0), (2.0, 0.7)] {
            let p = params(s, a);
            for l in 2..6 {
                let w = resonance_solve(l, 1, &p).unwrap().omega_plus.unwrap();
                let [v1, vm1] = kernel_vectors(l, w, &p, &g).unwrap();
                assert!((v1.l2_norm() - 1.0).abs() < 1e-12);
                for m in [1i8, -1] {
                    let [z, gm] = kernel_coefficients(l, m, w, &p);
                    let b = block_lomega(l, m, w, s, a).mat;
                    assert!((b[0][0] * z + b[0][1] * gm).abs() < 1e-10);
                    assert!((b[1][0] * z + b[1][1] * gm).abs() < 1e-10);
                }
                let alpha = 0.37;
                let rot = v1.translate(alpha);
                let la = l as f64 * alpha;
                let want = v1.axpby(la.cos(), &vm1, -la.sin());
                assert!(rot.max_abs_diff(&want) < 1e-12);
            }
        }
        assert!(kernel_vectors(2, 0.3, &params(1.0, 0.0), &g).is_err());
    }

    #[test]
    fn transversality_values() {
        let p = params(1.0, 0.0);
        let w = 1.5f64.sqrt();
        assert!((transversality(2, w, &p) + 4.0 * w / 2.5).abs() < 1e-14);
        assert!((transversality(2, w, &p) + 1.9596).abs() < 1e-4);
        let p = params(1.0, 2.0);
        assert!(transversality(3, degenerate_frequency(3, &p), &p).abs() < 1e-15);
        let a = Q::new(7, 3);
        for l in 1..20 {
            assert_eq!(transversality_value(l, degenerate_frequency_value(l, a), a), Q::from_integer(0));
            assert_ne!(transversality_value(l, degenerate_frequency_value(l, a) + Q::new(1, 100), a), Q::from_integer(0));
        }
        assert!(reduced_momentum_coeff(2, w, &params(1.0, 0.0)) > 0.0);
        assert!((transversality_kernel(2, w, &params(1.0, 0.0)) - transversality(2, w, &params(1.0, 0.0))).abs() < 1e-14);
    }

    #[test]
    fn hessian_asymptotics() {
        let p = params(1.0, 1.0);
        let sp = hessian_spectrum(&p, 200);
        assert_eq!(sp.lambda1_zero, -1.0 + 0.25);
        assert!(sp.entries[0].det.abs() < 1e-12);
        let last = sp.entries.last().unwrap();
        assert!((last.lambda_plus / (200.0 * 200.0) / p.sigma0 - 1.0).abs() < 0.02);
        assert!((last.lambda_minus / 200.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn coercivity_report() {
        let rep = constrained_coercivity(&params(1.0, 3.0), 64).unwrap();
        assert!(rep.coercive);
        assert!(rep.constrained_min > 0.0);
        assert!((rep.constrained_min - rep.lambda_minus_2).abs() < 1e-12);
        let rep = constrained_coercivity(&params(1.0, 3.0), 64).unwrap();
        assert!(rep.unconstrained_min >= -1e-12);
        let rep = constrained_coercivity(&params(1.0, 1.0), 64).unwrap();
        assert!(rep.has_negative_direction && rep.coercive);
        assert!(constrained_coercivity(&params(1.0, 3.0), 10).is_err());
    }

    #[test]
    fn report_serializes() {
        let rep = resonance_report(&params(1.0, 4.0), 1, 16).unwrap();
        let js = serde_json::to_value(&rep).unwrap();
        assert_eq!(js["entries"].as_array().unwrap().len(), 16);
        assert!(js["entries"][0]["co_roots"].is_array());
    }
}
