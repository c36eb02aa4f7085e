//! Dirichlet–Neumann operator of the strip {ρ < ξ(θ)} at infinite depth.
//!
//! In log-polar coordinates (ρ, θ) the drop interior becomes a half-strip and
//! the operator acts as `Ḡ(ξ)χ = ∂ρΦ − ξ′∂θΦ` at ρ = ξ(θ), where Φ is the
//! harmonic extension of χ decaying in ∂ρ as ρ → −∞.
//!
//! Two independent realizations are provided:
//!
//! * a Taylor expansion in ξ seeded at the multiplier `|D|`, with
//!   `Gₙ = D(ξⁿ/n!)D|D|ⁿ⁻¹ − Σ_{j<n} Gⱼ (ξⁿ⁻ʲ/(n−j)!)|D|ⁿ⁻ʲ`, `D = −i∂θ`;
//! * a harmonic collocation oracle fitting `a₀ + Σ e^{ℓρ}(aℓ cos ℓθ + bℓ sin ℓθ)`
//!   to χ on the boundary nodes by truncated-SVD least squares.
//!
//! No expansion operators are cached; every call recomputes from ξ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::spectral::{SpectralGrid, TorusField};

/// Which realization of Ḡ(ξ) to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DnMethod {
    /// Fourier multiplier ℓ; valid only at ξ = 0.
    Multiplier,
    /// Expansion truncated after order K.
    Taylor { order: usize },
    /// Harmonic collocation; `None` uses degree N/2.
    Oracle { degree: Option<usize> },
}

impl Default for DnMethod {
    fn default() -> Self {
        DnMethod::Taylor { order: 4 }
    }
}

/// Configured Dirichlet–Neumann evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DnOperator {
    pub method: DnMethod,
    /// Smallness bound on max(sup|ξ|, sup|ξ′|).
    pub delta0: f64,
    pub max_order: usize,
}

impl Default for DnOperator {
    fn default() -> Self {
        DnOperator { method: DnMethod::default(), delta0: 0.1, max_order: 16 }
    }
}

/// max(sup|ξ|, sup|ξ′|).
pub fn w1inf<T: Real>(xi: &TorusField<T>) -> f64 {
    let a = xi.sup_norm().to_f64().unwrap_or(f64::INFINITY);
    let b = xi.derivative().sup_norm().to_f64().unwrap_or(f64::INFINITY);
    a.max(b)
}

impl DnOperator {
    pub fn new(method: DnMethod) -> Self {
        DnOperator { method, ..Default::default() }
    }

    pub fn with_delta0(mut self, delta0: f64) -> Self {
        self.delta0 = delta0;
        self
    }

    pub fn check_smallness<T: Real>(&self, xi: &TorusField<T>) -> Result<()> {
        let norm = w1inf(xi);
        if norm.is_finite() && norm < self.delta0 {
            Ok(())
        } else {
            Err(Error::Smallness { norm, delta0: self.delta0 })
        }
    }

    /// Ḡ(ξ)χ.
    pub fn apply<T: Real>(&self, xi: &TorusField<T>, chi: &TorusField<T>) -> Result<TorusField<T>> {
        self.check_smallness(xi)?;
        match self.method {
            DnMethod::Multiplier => {
                if xi.sup_norm() > T::zero() {
                    return Err(Error::DnMethod("multiplier is only valid at ξ = 0".into()));
                }
                Ok(abs_d(chi, 1))
            }
            DnMethod::Taylor { order } => {
                if order == 0 {
                    return Err(Error::DnMethod("taylor order must be at least 1".into()));
                }
                if order > self.max_order {
                    return Err(Error::TaylorOrder { order, max: self.max_order });
                }
                Ok(taylor(xi, chi, order))
            }
            DnMethod::Oracle { degree } => {
                let degree = degree.unwrap_or(xi.grid().cutoff());
                if degree < xi.grid().cutoff() {
                    return Err(Error::DnMethod(format!(
                        "oracle degree {degree} below grid cutoff {}",
                        xi.grid().cutoff()
                    )));
                }
                let g = oracle_f64(&xi.to_f64(), &chi.to_f64(), degree)?;
                Ok(TorusField::from_f64(xi.grid(), &g))
            }
        }
    }

    /// dḠ(ξ)[ξ̂]χ = −Ḡ(ξ)[Bξ̂] − (Vξ̂)′.
    pub fn shape_derivative<T: Real>(
        &self,
        xi: &TorusField<T>,
        chi: &TorusField<T>,
        xihat: &TorusField<T>,
    ) -> Result<TorusField<T>> {
        let (b, v) = self.b_and_v(xi, chi)?;
        let g = self.apply(xi, &b.product(xihat))?;
        Ok(&(-&g) - &v.product(xihat).derivative())
    }

    /// B = (Ḡχ + ξ′χ′)/(1+ξ′²) and V = χ′ − Bξ′.
    pub fn b_and_v<T: Real>(
        &self,
        xi: &TorusField<T>,
        chi: &TorusField<T>,
    ) -> Result<(TorusField<T>, TorusField<T>)> {
        let g = self.apply(xi, chi)?;
        let dxi = xi.derivative();
        let dchi = chi.derivative();
        let one_plus = dxi.product(&dxi).add_scalar(T::one());
        let b = (&g + &dxi.product(&dchi)).quotient(&one_plus);
        let v = &dchi - &b.product(&dxi);
        Ok((b, v))
    }

    /// K̄(ξ)χ = −Ḡ(ξ)⁻¹χ′ with zero mean, computed as ∂⁻¹Π₀^⊥Ḡ(ξ)χ.
    pub fn conjugate_trace<T: Real>(&self, xi: &TorusField<T>, chi: &TorusField<T>) -> Result<TorusField<T>> {
        Ok(self.apply(xi, chi)?.antiderivative_zero_mean())
    }
}

/// Ḡ(ξ)χ with the default evaluator.
pub fn dn_apply<T: Real>(xi: &TorusField<T>, chi: &TorusField<T>, method: DnMethod) -> Result<TorusField<T>> {
    DnOperator::new(method).apply(xi, chi)
}

/// Ḡ(ξ)χ by harmonic collocation of degree N/2.
pub fn dn_oracle<T: Real>(xi: &TorusField<T>, chi: &TorusField<T>) -> Result<TorusField<T>> {
    DnOperator::new(DnMethod::Oracle { degree: None }).apply(xi, chi)
}

pub fn dn_shape_derivative<T: Real>(
    xi: &TorusField<T>,
    chi: &TorusField<T>,
    xihat: &TorusField<T>,
) -> Result<TorusField<T>> {
    DnOperator::default().shape_derivative(xi, chi, xihat)
}

pub fn conjugate_trace<T: Real>(xi: &TorusField<T>, chi: &TorusField<T>) -> Result<TorusField<T>> {
    DnOperator::default().conjugate_trace(xi, chi)
}

fn abs_d<T: Real>(f: &TorusField<T>, power: i32) -> TorusField<T> {
    f.multiplier(|l| T::lit(l as f64).powi(power))
}

fn taylor<T: Real>(xi: &TorusField<T>, chi: &TorusField<T>, order: usize) -> TorusField<T> {
    // powers[k] = ξᵏ/k!
    let mut powers = vec![TorusField::constant(xi.grid(), T::one())];
    for k in 1..=order {
        let next = powers[k - 1].product(xi).scale(T::one() / T::lit(k as f64));
        powers.push(next);
    }
    let mut total = abs_d(chi, 1);
    for n in 1..=order {
        total = &total + &taylor_term(n, &powers, chi);
    }
    total
}

fn taylor_term<T: Real>(n: usize, powers: &[TorusField<T>], f: &TorusField<T>) -> TorusField<T> {
    if n == 0 {
        return abs_d(f, 1);
    }
    let inner = abs_d(f, n as i32 - 1).derivative();
    let mut out = -&powers[n].product(&inner).derivative();
    for j in 0..n {
        let arg = powers[n - j].product(&abs_d(f, (n - j) as i32));
        out = &out - &taylor_term(j, powers, &arg);
    }
    out
}

fn oracle_f64(xi: &TorusField<f64>, chi: &TorusField<f64>, degree: usize) -> Result<TorusField<f64>> {
    let grid: &SpectralGrid<f64> = xi.grid();
    let n = grid.n();
    let cols = 1 + 2 * degree;
    let dxi = xi.derivative();
    let (xv, dv) = (xi.values(), dxi.values());
    let mut a = DMatrix::<f64>::zeros(n, cols);
    for j in 0..n {
        let th = grid.node(j);
        a[(j, 0)] = 1.0;
        for l in 1..=degree {
            let lf = l as f64;
            let e = (lf * xv[j]).exp();
            let (s, c) = (lf * th).sin_cos();
            a[(j, 2 * l - 1)] = e * c;
            a[(j, 2 * l)] = e * s;
        }
    }
    let svd = a.svd(true, true);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let smax = sv[0];
    let eps = 1e-12 * smax;
    let smin_kept = sv[n - 1];
    if smin_kept <= eps {
        return Err(Error::IllConditioned { cond: smax / smin_kept });
    }
    let rhs = DVector::from_column_slice(chi.values());
    let coef = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::DnMethod(format!("collocation solve failed: {e}")))?;
    let mut out = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        let th = grid.node(j);
        let mut acc = 0.0;
        for l in 1..=degree {
            let lf = l as f64;
            let e = lf * (lf * xv[j]).exp();
            let (s, c) = (lf * th).sin_cos();
            acc += coef[2 * l - 1] * e * (c + dv[j] * s) + coef[2 * l] * e * (s - dv[j] * c);
        }
        *o = acc;
    }
    TorusField::from_values(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> SpectralGrid<f64> {
        SpectralGrid::new(n).unwrap()
    }

    #[test]
    fn multiplier_at_zero() {
        let g = grid(64);
        let zero = TorusField::zeros(&g);
        for l in 0..20 {
            let chi = TorusField::from_fn(&g, |t| (l as f64 * t).cos()).unwrap();
            for method in [DnMethod::Multiplier, DnMethod::Taylor { order: 4 }, DnMethod::Oracle { degree: None }] {
                let got = dn_apply(&zero, &chi, method).unwrap();
                assert!(got.max_abs_diff(&chi.scale(l as f64)) < 1e-10, "{method:?} l={l}");
            }
        }
    }

    #[test]
    fn multiplier_refuses_nonzero_surface() {
        let g = grid(16);
        let xi = TorusField::from_fn(&g, |t| 0.01 * t.cos()).unwrap();
        assert!(dn_apply(&xi, &xi, DnMethod::Multiplier).is_err());
    }

    #[test]
    fn refuses_large_surface_and_orders() {
        let g = grid(32);
        let xi = TorusField::from_fn(&g, |t| 0.2 * t.cos()).unwrap();
        assert!(matches!(dn_apply(&xi, &xi, DnMethod::default()), Err(Error::Smallness { .. })));
        let small = xi.scale(0.1);
        assert!(matches!(
            dn_apply(&small, &small, DnMethod::Taylor { order: 40 }),
            Err(Error::TaylorOrder { .. })
        ));
        assert!(dn_apply(&small, &small, DnMethod::Taylor { order: 0 }).is_err());
    }

    #[test]
    fn constants_in_kernel() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xi = TorusField::random_smooth(&g, &mut rng, 6, 0.01, 2.0, true);
        let c = TorusField::constant(&g, 1.7);
        for method in [DnMethod::Taylor { order: 4 }, DnMethod::Oracle { degree: None }] {
            assert!(dn_apply(&xi, &c, method).unwrap().sup_norm() < 1e-12, "{method:?}");
        }
    }

    #[test]
    fn taylor_matches_oracle_for_small_cosine() {
        let g = grid(64);
        let xi = TorusField::from_fn(&g, |t| 0.01 * t.cos()).unwrap();
        let chi = TorusField::from_fn(&g, |t| t.cos()).unwrap();
        let a = dn_apply(&xi, &chi, DnMethod::Taylor { order: 4 }).unwrap();
        let b = dn_oracle(&xi, &chi).unwrap();
        assert!(a.max_abs_diff(&b) / b.sup_norm() < 1e-6);
    }

    #[test]
    fn shape_derivative_basics() {
        let g = grid(32);
        let zero = TorusField::zeros(&g);
        let chi = TorusField::from_fn(&g, |t| t.cos()).unwrap();
        let op = DnOperator::default();
        let (b, v) = op.b_and_v(&zero, &chi).unwrap();
        assert!(b.max_abs_diff(&chi) < 1e-13);
        assert!(v.max_abs_diff(&TorusField::from_fn(&g, |t| -t.sin()).unwrap()) < 1e-13);
        assert!(op.shape_derivative(&zero, &chi, &zero).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn shape_derivative_second_order() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xi = TorusField::random_smooth(&g, &mut rng, 5, 0.01, 2.0, true);
        let chi = TorusField::random_smooth(&g, &mut rng, 5, 1.0, 2.0, false);
        let xihat = TorusField::random_smooth(&g, &mut rng, 5, 1.0, 2.0, true);
        let op = DnOperator::new(DnMethod::Taylor { order: 8 });
        let exact = op.shape_derivative(&xi, &chi, &xihat).unwrap();
        let mut errs = vec![];
        for eps in [1e-2, 5e-3] {
            let p = op.apply(&(&xi + &xihat.scale(eps)), &chi).unwrap();
            let m = op.apply(&(&xi - &xihat.scale(eps)), &chi).unwrap();
            let fd = (&p - &m).scale(0.5 / eps);
            errs.push(fd.max_abs_diff(&exact));
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.8, "rate {rate}, errs {errs:?}");
    }

    #[test]
    fn conjugate_trace_at_zero() {
        let g = grid(32);
        let zero = TorusField::zeros(&g);
        for l in 1..8 {
            let chi = TorusField::from_fn(&g, |t| (l as f64 * t).cos()).unwrap();
            let k = conjugate_trace(&zero, &chi).unwrap();
            assert!(k.max_abs_diff(&TorusField::from_fn(&g, |t| (l as f64 * t).sin()).unwrap()) < 1e-12);
        }
        let c = TorusField::constant(&g, 2.0);
        assert!(conjugate_trace(&zero, &c).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn conjugate_trace_inverts_operator() {
        let g = grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xi = TorusField::random_smooth(&g, &mut rng, 4, 0.01, 2.0, true);
        let chi = TorusField::random_smooth(&g, &mut rng, 6, 1.0, 2.0, true);
        let op = DnOperator::new(DnMethod::Taylor { order: 8 });
        let k = op.conjugate_trace(&xi, &chi).unwrap();
        let gk = op.apply(&xi, &k).unwrap();
        assert!(gk.max_abs_diff(&(-&chi.derivative())) < 1e-9);
        assert!(k.mean().abs() < 1e-15);
    }

    #[test]
    fn single_precision_taylor() {
        let g = SpectralGrid::<f32>::new(32).unwrap();
        let xi = TorusField::from_fn(&g, |t| 0.01 * (2.0 * t).cos()).unwrap();
        let chi = TorusField::basis(&g, Mode::new(3, 1)).unwrap();
        let a = dn_apply(&xi, &chi, DnMethod::Taylor { order: 3 }).unwrap().to_f64();
        let b = dn_apply(&xi.to_f64(), &chi.to_f64(), DnMethod::Taylor { order: 3 }).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-4);
    }
}
