//! Evolution equations in both coordinate systems and fixed-step integrators.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dn::w1inf;
use crate::error::{Error, Result};
use crate::functionals::{
    conserved_set, grad_hamiltonian_natural, grad_hamiltonian_wahlen, ConservedSet, Model, NaturalState,
    WahlenState,
};
use crate::real::Real;
use crate::spectral::TorusField;

/// A point of phase space that integrators can combine linearly.
pub trait PhaseState<T: Real>: Clone {
    fn axpby(&self, a: T, other: &Self, b: T) -> Self;
    fn max_abs_diff(&self, other: &Self) -> T;
    fn elevation(&self) -> &TorusField<T>;
    fn is_finite(&self) -> bool;
}

fn finite<T: Real>(f: &TorusField<T>) -> bool {
    f.coeffs().iter().all(|c| c.is_finite())
}

impl<T: Real> PhaseState<T> for WahlenState<T> {
    fn axpby(&self, a: T, other: &Self, b: T) -> Self {
        WahlenState::axpby(self, a, other, b)
    }
    fn max_abs_diff(&self, other: &Self) -> T {
        WahlenState::max_abs_diff(self, other)
    }
    fn elevation(&self) -> &TorusField<T> {
        &self.zeta
    }
    fn is_finite(&self) -> bool {
        finite(&self.zeta) && finite(&self.gamma)
    }
}

impl<T: Real> PhaseState<T> for NaturalState<T> {
    fn axpby(&self, a: T, other: &Self, b: T) -> Self {
        NaturalState { xi: self.xi.axpby(a, &other.xi, b), chi: self.chi.axpby(a, &other.chi, b) }
    }
    fn max_abs_diff(&self, other: &Self) -> T {
        self.xi.max_abs_diff(&other.xi).max(self.chi.max_abs_diff(&other.chi))
    }
    fn elevation(&self) -> &TorusField<T> {
        &self.xi
    }
    fn is_finite(&self) -> bool {
        finite(&self.xi) && finite(&self.chi)
    }
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Rk4,
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub monitor_every: usize,
    pub midpoint_tol: f64,
    pub midpoint_max_iter: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_final: f64) -> Self {
        IntegratorConfig {
            scheme: Scheme::Rk4,
            dt,
            t_final,
            monitor_every: 1,
            midpoint_tol: 1e-12,
            midpoint_max_iter: 100,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_monitor_every(mut self, k: usize) -> Self {
        self.monitor_every = k.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParams(format!("T must be positive, got {}", self.t_final)));
        }
        Ok(())
    }

    /// Number of steps, with dt adjusted to land on T.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.dt).round().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryPoint<S> {
    pub t: f64,
    pub state: S,
    pub conserved: ConservedSet,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub points: Vec<TrajectoryPoint<S>>,
    /// Diagnostic when the run stopped before T.
    pub aborted: Option<String>,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &TrajectoryPoint<S> {
        self.points.last().expect("trajectory holds the initial point")
    }
}

/// Right-hand side of the torus equations in (ξ, χ), evaluated term by term.
pub fn rhs_natural<T: Real>(n: &NaturalState<T>, model: &Model) -> Result<NaturalState<T>> {
    let (xi, chi) = (&n.xi, &n.chi);
    let (sigma, alpha) = (model.sigma::<T>(), model.alpha::<T>());
    let (half, eighth) = (T::lit(0.5), T::lit(0.125));
    let g = model.dn.apply(xi, chi)?;
    let k = g.antiderivative_zero_mean();
    let dxi = xi.derivative();
    let dchi = chi.derivative();
    let e1 = xi.exp_scaled(T::one());
    let e2 = xi.exp_scaled(T::lit(2.0));
    let em2 = xi.exp_scaled(-T::lit(2.0));
    let s = dxi.map(|d| (T::one() + d * d).sqrt());
    let xi_dot = em2.product(&(&g + &e2.product(&dxi).scale(alpha * half)));
    let b = (&g + &dxi.product(&dchi)).quotient(&s);
    let capillary = &e1.product(&dxi.quotient(&s).derivative()) - &e1.quotient(&s);
    let bracket = (&b.product(&b).scale(half) - &dchi.product(&dchi).scale(half)).axpby(T::one(), &capillary, sigma);
    let chi_dot = em2
        .product(&bracket)
        .axpby(T::one(), &dchi, alpha * half)
        .axpby(T::one(), &e2, alpha * alpha * eighth)
        .axpby(T::one(), &k, alpha)
        .add_scalar(sigma - alpha * alpha * eighth);
    Ok(NaturalState { xi: xi_dot, chi: chi_dot })
}

/// J(ξ)∇ℋ + (0, α₀K̄χ + (α₀²/4)e^{2ξ}).
pub fn rhs_quasi_hamiltonian<T: Real>(n: &NaturalState<T>, model: &Model) -> Result<NaturalState<T>> {
    let alpha = model.alpha::<T>();
    let (d_xi, d_chi) = grad_hamiltonian_natural(n, model)?;
    let em2 = n.xi.exp_scaled(-T::lit(2.0));
    let k = model.dn.conjugate_trace(&n.xi, &n.chi)?;
    let e2 = n.xi.exp_scaled(T::lit(2.0));
    let chi_dot = (-&em2.product(&d_xi))
        .axpby(T::one(), &k, alpha)
        .axpby(T::one(), &e2, alpha * alpha * T::lit(0.25));
    Ok(NaturalState { xi: em2.product(&d_chi), chi: chi_dot })
}

/// J_{α₀}(ξ)∇ℋ with J_{α₀} = [[0, e^{−2ξ}], [−e^{−2ξ}, α₀∂⁻¹Π₀^⊥]].
pub fn rhs_poisson_alpha<T: Real>(n: &NaturalState<T>, model: &Model) -> Result<NaturalState<T>> {
    let alpha = model.alpha::<T>();
    let (d_xi, d_chi) = grad_hamiltonian_natural(n, model)?;
    let em2 = n.xi.exp_scaled(-T::lit(2.0));
    let chi_dot = (-&em2.product(&d_xi)).axpby(T::one(), &d_chi.antiderivative_zero_mean(), alpha);
    Ok(NaturalState { xi: em2.product(&d_chi), chi: chi_dot })
}

/// (e^{−2ζ}∂γH̄, −e^{−2ζ}∂ζH̄) without removing the mean of γ̇.
pub fn rhs_wahlen_raw<T: Real>(w: &WahlenState<T>, model: &Model) -> Result<WahlenState<T>> {
    let (d_zeta, d_gamma) = grad_hamiltonian_wahlen(w, model)?;
    let em2 = w.zeta.exp_scaled(-T::lit(2.0));
    Ok(WahlenState { zeta: em2.product(&d_gamma), gamma: -&em2.product(&d_zeta) })
}

/// Hamiltonian vector field J(ζ)∇H̄ on the zero-mean-γ slice.
pub fn rhs_wahlen<T: Real>(w: &WahlenState<T>, model: &Model) -> Result<WahlenState<T>> {
    let raw = rhs_wahlen_raw(w, model)?;
    Ok(WahlenState { zeta: raw.zeta, gamma: raw.gamma.project_zero_mean() })
}

fn rk4<T: Real, S: PhaseState<T>>(s: &S, dt: T, f: &impl Fn(&S) -> Result<S>) -> Result<S> {
    let half = T::lit(0.5);
    let k1 = f(s)?;
    let k2 = f(&s.axpby(T::one(), &k1, half * dt))?;
    let k3 = f(&s.axpby(T::one(), &k2, half * dt))?;
    let k4 = f(&s.axpby(T::one(), &k3, dt))?;
    let sixth = dt / T::lit(6.0);
    Ok(s.axpby(T::one(), &k1, sixth)
        .axpby(T::one(), &k2, T::lit(2.0) * sixth)
        .axpby(T::one(), &k3, T::lit(2.0) * sixth)
        .axpby(T::one(), &k4, sixth))
}

fn implicit_midpoint<T: Real, S: PhaseState<T>>(
    s: &S,
    dt: T,
    tol: f64,
    max_iter: usize,
    f: &impl Fn(&S) -> Result<S>,
) -> Result<S> {
    let half = T::lit(0.5);
    let mut next = s.axpby(T::one(), &f(s)?, dt);
    for _ in 0..max_iter {
        let mid = s.axpby(half, &next, half);
        let candidate = s.axpby(T::one(), &f(&mid)?, dt);
        let change = candidate.max_abs_diff(&next).to_f64().unwrap_or(f64::INFINITY);
        next = candidate;
        if change <= tol {
            return Ok(next);
        }
    }
    Err(Error::StepRejected {
        t: f64::NAN,
        reason: format!("midpoint iteration did not reach {tol:e} in {max_iter} iterations"),
    })
}

/// One step of a generic vector field.
pub fn step_with<T: Real, S: PhaseState<T>>(
    s: &S,
    dt: T,
    config: &IntegratorConfig,
    f: &impl Fn(&S) -> Result<S>,
) -> Result<S> {
    let next = match config.scheme {
        Scheme::Rk4 => rk4(s, dt, f)?,
        Scheme::ImplicitMidpoint => implicit_midpoint(s, dt, config.midpoint_tol, config.midpoint_max_iter, f)?,
    };
    if !next.is_finite() {
        return Err(Error::StepRejected { t: f64::NAN, reason: "non-finite state".into() });
    }
    Ok(next)
}

/// One step of the shear-coordinate flow.
pub fn step<T: Real>(w: &WahlenState<T>, model: &Model, config: &IntegratorConfig) -> Result<WahlenState<T>> {
    config.validate()?;
    let next = step_with(w, T::lit(config.dt), config, &|s: &WahlenState<T>| rhs_wahlen(s, model))?;
    Ok(WahlenState { zeta: next.zeta, gamma: next.gamma.project_zero_mean() })
}

/// Integrates a generic vector field, recording `monitor(state)` every `monitor_every` steps.
pub fn integrate<T: Real, S: PhaseState<T>>(
    s0: &S,
    model: &Model,
    config: &IntegratorConfig,
    f: impl Fn(&S) -> Result<S>,
    post: impl Fn(S) -> S,
    monitor: impl Fn(&S) -> Result<ConservedSet>,
) -> Result<Trajectory<S>> {
    config.validate()?;
    let (n_steps, dt) = config.steps();
    let mut points = vec![TrajectoryPoint { t: 0.0, state: s0.clone(), conserved: monitor(s0)? }];
    let mut s = s0.clone();
    for k in 1..=n_steps {
        let t = k as f64 * dt;
        let next = match step_with(&s, T::lit(dt), config, &f) {
            Ok(next) => post(next),
            Err(Error::Smallness { norm, delta0 }) => {
                return Ok(Trajectory {
                    points,
                    aborted: Some(format!(
                        "elevation W1,inf norm {norm:.3e} reached delta0 {delta0:.3e} within the step ending at t = {t}"
                    )),
                })
            }
            Err(Error::StepRejected { reason, .. }) => return Err(Error::StepRejected { t, reason }),
            Err(other) => return Err(other),
        };
        s = next;
        let norm = w1inf(s.elevation());
        if norm >= model.dn.delta0 {
            let conserved = monitor(&s).unwrap_or(points.last().unwrap().conserved);
            points.push(TrajectoryPoint { t, state: s, conserved });
            return Ok(Trajectory {
                points,
                aborted: Some(format!(
                    "elevation W1,inf norm {norm:.3e} reached delta0 {:.3e} at t = {t}",
                    model.dn.delta0
                )),
            });
        }
        if k % config.monitor_every == 0 || k == n_steps {
            points.push(TrajectoryPoint { t, state: s.clone(), conserved: monitor(&s)? });
        }
    }
    Ok(Trajectory { points, aborted: None })
}

/// Integrates the shear-coordinate flow and monitors the invariants.
pub fn simulate<T: Real>(
    w0: &WahlenState<T>,
    model: &Model,
    config: &IntegratorConfig,
) -> Result<Trajectory<WahlenState<T>>> {
    integrate(
        w0,
        model,
        config,
        |s: &WahlenState<T>| rhs_wahlen(s, model),
        |s| WahlenState { zeta: s.zeta, gamma: s.gamma.project_zero_mean() },
        |s| conserved_set(s, model),
    )
}

/// Integrates the torus equations in (ξ, χ).
pub fn simulate_natural<T: Real>(
    n0: &NaturalState<T>,
    model: &Model,
    config: &IntegratorConfig,
) -> Result<Trajectory<NaturalState<T>>> {
    integrate(
        n0,
        model,
        config,
        |s: &NaturalState<T>| rhs_natural(s, model),
        |s| s,
        |s| conserved_set(&crate::functionals::wahlen_inverse(s, model), model),
    )
}

/// CSV header: t, ζ and γ coefficients by (ℓ,m), then the monitored quantities.
pub fn trajectory_header<T: Real>(w: &WahlenState<T>) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for name in ["zeta", "gamma"] {
        h.extend(w.grid().modes().map(|m| format!("{name}_{}_{}", m.l, m.m)));
    }
    h.extend(["H", "I", "V", "Bx", "By", "Px", "Py"].map(String::from));
    h
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the trajectory rows with 17 significant digits.
pub fn write_trajectory_csv<T: Real, W: Write>(traj: &Trajectory<WahlenState<T>>, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Serialize(e.to_string());
    wr.write_record(trajectory_header(&traj.points[0].state)).map_err(csv_err)?;
    for p in &traj.points {
        let mut row = vec![fmt17(p.t)];
        for f in [&p.state.zeta, &p.state.gamma] {
            row.extend(f.coeffs().iter().map(|c| fmt17(c.to_f64().unwrap_or(f64::NAN))));
        }
        let c = &p.conserved;
        row.extend(
            [c.energy, c.momentum, c.volume, c.velocity[0], c.velocity[1], c.position[0], c.position[1]].map(fmt17),
        );
        wr.write_record(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}
