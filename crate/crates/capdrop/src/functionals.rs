//! Energy, momentum, volume and barycenter functionals, the shear change of
//! coordinates (ζ, γ) ↦ (ξ, χ) and the closed-form gradients.

use serde::{Deserialize, Serialize};

use crate::dn::DnOperator;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::spectral::{SpectralGrid, TorusField};

/// Surface tension σ₀ and vorticity α₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub sigma0: f64,
    pub alpha0: f64,
}

impl PhysicalParams {
    pub fn new(sigma0: f64, alpha0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::InvalidParams(format!("sigma0 must be positive, got {sigma0}")));
        }
        if !alpha0.is_finite() {
            return Err(Error::InvalidParams(format!("alpha0 must be finite, got {alpha0}")));
        }
        Ok(PhysicalParams { sigma0, alpha0 })
    }

    /// Modified Bond number C = σ₀/α₀², undefined without vorticity.
    pub fn modified_bond(&self) -> Option<f64> {
        (self.alpha0 != 0.0).then(|| self.sigma0 / (self.alpha0 * self.alpha0))
    }

    /// Volume multiplier α₀²/4 of the rotating circle.
    pub fn circle_multiplier(&self) -> f64 {
        0.25 * self.alpha0 * self.alpha0
    }
}

/// Physical parameters together with the Dirichlet–Neumann evaluator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: PhysicalParams,
    pub dn: DnOperator,
}

impl Model {
    pub fn new(params: PhysicalParams) -> Self {
        Model { params, dn: DnOperator::default() }
    }

    pub fn with_dn(mut self, dn: DnOperator) -> Self {
        self.dn = dn;
        self
    }

    pub(crate) fn sigma<T: Real>(&self) -> T {
        T::lit(self.params.sigma0)
    }

    pub(crate) fn alpha<T: Real>(&self) -> T {
        T::lit(self.params.alpha0)
    }
}

/// Log radial elevation ξ and boundary potential χ.
#[derive(Clone, Debug)]
pub struct NaturalState<T: Real> {
    pub xi: TorusField<T>,
    pub chi: TorusField<T>,
}

/// Shear coordinates (ζ, γ) with zero-mean γ.
#[derive(Clone, Debug)]
pub struct WahlenState<T: Real> {
    pub zeta: TorusField<T>,
    pub gamma: TorusField<T>,
}

impl<T: Real> NaturalState<T> {
    pub fn new(xi: TorusField<T>, chi: TorusField<T>) -> Self {
        NaturalState { xi, chi }
    }

    pub fn zero(grid: &SpectralGrid<T>) -> Self {
        NaturalState { xi: TorusField::zeros(grid), chi: TorusField::zeros(grid) }
    }

    pub fn translate(&self, alpha: T) -> Self {
        NaturalState { xi: self.xi.shift(alpha), chi: self.chi.shift(alpha) }
    }
}

impl<T: Real> WahlenState<T> {
    /// Builds a state, removing the mean of γ.
    pub fn new(zeta: TorusField<T>, gamma: TorusField<T>) -> Self {
        WahlenState { zeta, gamma: gamma.project_zero_mean() }
    }

    pub fn zero(grid: &SpectralGrid<T>) -> Self {
        WahlenState { zeta: TorusField::zeros(grid), gamma: TorusField::zeros(grid) }
    }

    pub fn grid(&self) -> &SpectralGrid<T> {
        self.zeta.grid()
    }

    /// 𝒯_α.
    pub fn translate(&self, alpha: T) -> Self {
        WahlenState { zeta: self.zeta.shift(alpha), gamma: self.gamma.shift(alpha) }
    }

    /// ℛ(ζ, γ)(θ) = (ζ(−θ), −γ(−θ)).
    pub fn reflect(&self) -> Self {
        WahlenState { zeta: self.zeta.reflect(), gamma: -&self.gamma.reflect() }
    }

    pub fn axpby(&self, a: T, other: &Self, b: T) -> Self {
        WahlenState {
            zeta: self.zeta.axpby(a, &other.zeta, b),
            gamma: self.gamma.axpby(a, &other.gamma, b),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.zeta.max_abs_diff(&other.zeta).max(self.gamma.max_abs_diff(&other.gamma))
    }

    /// Euclidean norm of all coefficients.
    pub fn l2_norm(&self) -> T {
        (self.zeta.l2_norm().powi(2) + self.gamma.l2_norm().powi(2)).sqrt()
    }
}

/// Energy, angular momentum, volume, barycenter velocity and position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConservedSet {
    pub energy: f64,
    pub momentum: f64,
    pub volume: f64,
    pub velocity: [f64; 2],
    pub position: [f64; 2],
}

fn quad<T: Real>(grid: &SpectralGrid<T>, vals: impl Iterator<Item = T>) -> T {
    vals.fold(T::zero(), |a, v| a + v) * grid.weight()
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// ℋ(ξ, χ) by trapezoidal quadrature.
pub fn hamiltonian_natural<T: Real>(state: &NaturalState<T>, model: &Model) -> Result<T> {
    let (xi, chi) = (&state.xi, &state.chi);
    let grid = xi.grid();
    let (sigma, alpha) = (model.sigma::<T>(), model.alpha::<T>());
    let g = model.dn.apply(xi, chi)?;
    let dxi = xi.derivative();
    let dchi = chi.derivative();
    let kinetic = T::lit(0.5) * chi.inner(&g);
    let x = xi.values();
    let length = quad(grid, (0..grid.n()).map(|j| x[j].exp() * (T::one() + dxi.values()[j].powi(2)).sqrt()));
    let area = quad(grid, x.iter().map(|&v| (T::lit(2.0) * v).exp()));
    let shear = quad(grid, (0..grid.n()).map(|j| (T::lit(2.0) * x[j]).exp() * dchi.values()[j]));
    let quartic = quad(grid, x.iter().map(|&v| (T::lit(4.0) * v).exp()));
    let a2 = alpha * alpha;
    Ok(kinetic + sigma * length - (sigma - a2 / T::lit(8.0)) * T::lit(0.5) * area - alpha / T::lit(4.0) * shear
        + a2 / T::lit(32.0) * quartic)
}

/// Partial gradients (∂ξℋ, ∂χℋ).
pub fn grad_hamiltonian_natural<T: Real>(
    state: &NaturalState<T>,
    model: &Model,
) -> Result<(TorusField<T>, TorusField<T>)> {
    let (xi, chi) = (&state.xi, &state.chi);
    let (sigma, alpha) = (model.sigma::<T>(), model.alpha::<T>());
    let half = T::lit(0.5);
    let g = model.dn.apply(xi, chi)?;
    let dxi = xi.derivative();
    let dchi = chi.derivative();
    let s = dxi.map(|d| (T::one() + d * d).sqrt());
    let e1 = xi.exp_scaled(T::one());
    let e2 = xi.exp_scaled(T::lit(2.0));
    let e4 = xi.exp_scaled(T::lit(4.0));
    let b = (&g + &dxi.product(&dchi)).quotient(&s);
    let slope = dxi.quotient(&s);
    let capillary = &e1.quotient(&s) - &e1.product(&slope.derivative());
    let d_xi = (&b.product(&b).scale(-half) + &dchi.product(&dchi).scale(half))
        .axpby(T::one(), &capillary, sigma)
        .axpby(T::one(), &e2, -sigma + alpha * alpha / T::lit(8.0))
        .axpby(T::one(), &e2.product(&dchi), -alpha * half)
        .axpby(T::one(), &e4, alpha * alpha / T::lit(8.0));
    let d_chi = &g + &e2.derivative().scale(alpha / T::lit(4.0));
    Ok((d_xi, d_chi))
}

/// 𝒬(ζ) = (α₀/4)∂⁻¹Π₀^⊥e^{2ζ}.
pub fn shear_potential<T: Real>(zeta: &TorusField<T>, model: &Model) -> TorusField<T> {
    zeta.exp_scaled(T::lit(2.0))
        .antiderivative_zero_mean()
        .scale(model.alpha::<T>() / T::lit(4.0))
}

/// 𝒞: (ζ, γ) ↦ (ζ, γ + 𝒬(ζ)).
pub fn wahlen_forward<T: Real>(w: &WahlenState<T>, model: &Model) -> NaturalState<T> {
    NaturalState { xi: w.zeta.clone(), chi: &w.gamma + &shear_potential(&w.zeta, model) }
}

/// 𝒞⁻¹ followed by removal of the mean of γ.
pub fn wahlen_inverse<T: Real>(n: &NaturalState<T>, model: &Model) -> WahlenState<T> {
    WahlenState::new(n.xi.clone(), &n.chi - &shear_potential(&n.xi, model))
}

/// d𝒞(ζ)[ζ̂, γ̂] = (ζ̂, γ̂ + (α₀/2)∂⁻¹Π₀^⊥(e^{2ζ}ζ̂)).
pub fn wahlen_tangent<T: Real>(w: &WahlenState<T>, dir: &WahlenState<T>, model: &Model) -> NaturalState<T> {
    let e2 = w.zeta.exp_scaled(T::lit(2.0));
    let dq = e2.product(&dir.zeta).antiderivative_zero_mean().scale(model.alpha::<T>() * T::lit(0.5));
    NaturalState { xi: dir.zeta.clone(), chi: &dir.gamma + &dq }
}

/// H̄ = ℋ∘𝒞.
pub fn hamiltonian_wahlen<T: Real>(w: &WahlenState<T>, model: &Model) -> Result<T> {
    hamiltonian_natural(&wahlen_forward(w, model), model)
}

/// ∇H̄ = d𝒞*[∇ℋ∘𝒞] with d𝒬*g = −(α₀/2)e^{2ζ}∂⁻¹Π₀^⊥g.
pub fn grad_hamiltonian_wahlen<T: Real>(
    w: &WahlenState<T>,
    model: &Model,
) -> Result<(TorusField<T>, TorusField<T>)> {
    let (d_xi, d_chi) = grad_hamiltonian_natural(&wahlen_forward(w, model), model)?;
    let e2 = w.zeta.exp_scaled(T::lit(2.0));
    let dq_star = e2
        .product(&d_chi.antiderivative_zero_mean())
        .scale(-model.alpha::<T>() * T::lit(0.5));
    Ok((&d_xi + &dq_star, d_chi.project_zero_mean()))
}

/// Ī = −½∫e^{2ζ}γ′.
pub fn angular_momentum<T: Real>(w: &WahlenState<T>) -> T {
    let grid = w.grid();
    let dg = w.gamma.derivative();
    let z = w.zeta.values();
    -T::lit(0.5) * quad(grid, (0..grid.n()).map(|j| (T::lit(2.0) * z[j]).exp() * dg.values()[j]))
}

/// ∇Ī = (−e^{2ζ}γ′, e^{2ζ}ζ′).
pub fn grad_angular_momentum<T: Real>(w: &WahlenState<T>) -> (TorusField<T>, TorusField<T>) {
    let e2 = w.zeta.exp_scaled(T::lit(2.0));
    let d_zeta = -&e2.product(&w.gamma.derivative());
    let d_gamma = e2.derivative().scale(T::lit(0.5));
    (d_zeta, d_gamma)
}

/// V̄ = ½∫e^{2ζ}.
pub fn volume<T: Real>(w: &WahlenState<T>) -> T {
    T::lit(0.5) * quad(w.grid(), w.zeta.values().iter().map(|&v| (T::lit(2.0) * v).exp()))
}

/// ∇V̄ = (e^{2ζ}, 0).
pub fn grad_volume<T: Real>(w: &WahlenState<T>) -> (TorusField<T>, TorusField<T>) {
    (w.zeta.exp_scaled(T::lit(2.0)), TorusField::zeros(w.grid()))
}

/// ℬ = ∫e^ζ(γ′ + (α₀/4)Π₀^⊥e^{2ζ} − (α₀/6)e^{2ζ})(−sin θ, cos θ).
pub fn barycenter_velocity<T: Real>(w: &WahlenState<T>, model: &Model) -> [T; 2] {
    let grid = w.grid();
    let alpha = model.alpha::<T>();
    let z = w.zeta.values();
    let e2: Vec<T> = z.iter().map(|&v| (T::lit(2.0) * v).exp()).collect();
    let e2_mean = quad(grid, e2.iter().copied()) / (T::lit(2.0) * T::PI());
    let dg = w.gamma.derivative();
    let weight: Vec<T> = (0..grid.n())
        .map(|j| {
            z[j].exp()
                * (dg.values()[j] + alpha / T::lit(4.0) * (e2[j] - e2_mean) - alpha / T::lit(6.0) * e2[j])
        })
        .collect();
    let bx = quad(grid, (0..grid.n()).map(|j| -weight[j] * grid.node(j).sin()));
    let by = quad(grid, (0..grid.n()).map(|j| weight[j] * grid.node(j).cos()));
    [bx, by]
}

/// 𝒫 = ∫_Ω x dx = ⅓∫e^{3ζ}(cos θ, sin θ).
pub fn barycenter_position<T: Real>(w: &WahlenState<T>) -> [T; 2] {
    let grid = w.grid();
    let z = w.zeta.values();
    let third = T::one() / T::lit(3.0);
    let e3: Vec<T> = z.iter().map(|&v| (T::lit(3.0) * v).exp()).collect();
    let px = quad(grid, (0..grid.n()).map(|j| e3[j] * grid.node(j).cos()));
    let py = quad(grid, (0..grid.n()).map(|j| e3[j] * grid.node(j).sin()));
    [third * px, third * py]
}

/// All monitored quantities of a state.
pub fn conserved_set<T: Real>(w: &WahlenState<T>, model: &Model) -> Result<ConservedSet> {
    let b = barycenter_velocity(w, model);
    let p = barycenter_position(w);
    Ok(ConservedSet {
        energy: to_f64(hamiltonian_wahlen(w, model)?),
        momentum: to_f64(angular_momentum(w)),
        volume: to_f64(volume(w)),
        velocity: [to_f64(b[0]), to_f64(b[1])],
        position: [to_f64(p[0]), to_f64(p[1])],
    })
}

/// Curvature e^{−ξ}[(1+ξ′²)^{−1/2} − (ξ′(1+ξ′²)^{−1/2})′] of r = e^{ξ(θ)}.
pub fn curvature<T: Real>(xi: &TorusField<T>) -> TorusField<T> {
    let d = xi.derivative();
    let inv_s = d.map(|v| (T::one() + v * v).sqrt().recip());
    let slope = d.product(&inv_s);
    xi.exp_scaled(-T::one()).product(&(&inv_s - &slope.derivative()))
}
