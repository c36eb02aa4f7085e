//! Rotating waves: Newton solution of F(ω, u) = 0 on the reflection-symmetric
//! κℓ-fold subspace and continuation along the bifurcating branch.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs_natural, simulate, IntegratorConfig};
use crate::error::{Error, Result};
use crate::functionals::{
    angular_momentum, conserved_set, grad_angular_momentum, wahlen_forward, ConservedSet, Model, WahlenState,
};
use crate::linear::{block_lomega, kernel_coefficients, reduced_momentum_coeff, resonance_solve};
use crate::real::Real;
use crate::spectral::{Mode, SpectralGrid, TorusField};

/// ∇H̄ − ω∇Ī − (α₀²/4)∇V̄ with the γ component projected to zero mean.
pub fn residual_f<T: Real>(omega: T, w: &WahlenState<T>, model: &Model) -> Result<WahlenState<T>> {
    let (gz, gg) = crate::functionals::grad_hamiltonian_wahlen(w, model)?;
    let (iz, ig) = grad_angular_momentum(w);
    let e2 = w.zeta.exp_scaled(T::lit(2.0));
    let c = T::lit(model.params.circle_multiplier());
    Ok(WahlenState {
        zeta: gz.axpby(T::one(), &iz, -omega).axpby(T::one(), &e2, -c),
        gamma: gg.axpby(T::one(), &ig, -omega).project_zero_mean(),
    })
}

fn coeff_sup(w: &WahlenState<f64>) -> f64 {
    w.zeta.coeffs().iter().chain(w.gamma.coeffs()).fold(0.0, |m, c| m.max(c.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parametrization {
    Amplitude,
    AngularMomentum,
}

/// Which resonant frequency seeds the branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootChoice {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Block-assembled linear part plus a finite-difference nonlinear correction.
    Hybrid,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub l: usize,
    pub kappa: usize,
    pub root: RootChoice,
    pub parametrization: Parametrization,
    /// First and last ε (or Ī target) and the number of points between them inclusive.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianMode,
    /// Smallest step as a fraction of the nominal step before continuation gives up.
    pub min_step_fraction: f64,
}

impl ContinuationConfig {
    pub fn amplitude(l: usize, kappa: usize, start: f64, stop: f64, points: usize) -> Self {
        ContinuationConfig {
            l,
            kappa,
            root: RootChoice::Plus,
            parametrization: Parametrization::Amplitude,
            start,
            stop,
            points,
            tol: 1e-11,
            max_iter: 50,
            jacobian: JacobianMode::Hybrid,
            min_step_fraction: 1.0 / 64.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.kappa == 0 {
            return Err(Error::InvalidParams("l and kappa must be positive".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidParams(format!("tol must be positive, got {}", self.tol)));
        }
        if self.points == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParams("points and max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> usize {
        self.l * self.kappa
    }

    /// Parameter values visited by the continuation.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + h * i as f64).collect()
    }
}

#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub omega: f64,
    pub state: WahlenState<f64>,
    /// ⟨u, 𝚟_{ℓ,1}⟩.
    pub eps: f64,
    /// Sup of all coefficient residuals of F.
    pub residual: f64,
    pub iterations: usize,
    pub conserved: ConservedSet,
}

/// Coordinates of the reflection-symmetric n-fold subspace: ζ cosines (with the mean),
/// γ sines, then ω.
struct Reduced {
    grid: SpectralGrid<f64>,
    zeta_idx: Vec<usize>,
    gamma_idx: Vec<usize>,
    modes: Vec<usize>,
}

impl Reduced {
    fn new(grid: &SpectralGrid<f64>, n: usize) -> Result<Self> {
        let top = grid.dealias_cutoff();
        if n > top {
            return Err(Error::Shape(format!("mode {n} exceeds the dealiased band {top}")));
        }
        let modes: Vec<usize> = (0..).map(|j| j * n).take_while(|&l| l <= top).collect();
        let zeta_idx = modes
            .iter()
            .map(|&l| grid.index(if l == 0 { Mode::MEAN } else { Mode { l, m: 1 } }).unwrap())
            .collect();
        let gamma_idx = modes[1..].iter().map(|&l| grid.index(Mode { l, m: -1 }).unwrap()).collect();
        Ok(Reduced { grid: grid.clone(), zeta_idx, gamma_idx, modes })
    }

    fn n_u(&self) -> usize {
        self.zeta_idx.len() + self.gamma_idx.len()
    }

    fn state(&self, x: &[f64]) -> Result<WahlenState<f64>> {
        let n = self.grid.n();
        let (mut z, mut g) = (vec![0.0; n], vec![0.0; n]);
        for (k, &i) in self.zeta_idx.iter().enumerate() {
            z[i] = x[k];
        }
        for (k, &i) in self.gamma_idx.iter().enumerate() {
            g[i] = x[self.zeta_idx.len() + k];
        }
        Ok(WahlenState { zeta: TorusField::from_coeffs(&self.grid, z)?, gamma: TorusField::from_coeffs(&self.grid, g)? })
    }

    fn restrict(&self, w: &WahlenState<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = self.zeta_idx.iter().map(|&i| w.zeta.coeffs()[i]).collect();
        v.extend(self.gamma_idx.iter().map(|&i| w.gamma.coeffs()[i]));
        v
    }

    /// Block-assembled d_u F(ω, 0) on the reduced coordinates.
    fn linear(&self, omega: f64, model: &Model) -> DMatrix<f64> {
        let (s, a) = (model.params.sigma0, model.params.alpha0);
        let nz = self.zeta_idx.len();
        let mut m = DMatrix::zeros(self.n_u(), self.n_u());
        m[(0, 0)] = block_lomega(0, 0, omega, s, a).mat[0][0];
        for (j, &l) in self.modes.iter().enumerate().skip(1) {
            let b = block_lomega(l, 1, omega, s, a).mat;
            let (iz, ig) = (j, nz + j - 1);
            m[(iz, iz)] = b[0][0];
            m[(iz, ig)] = b[0][1];
            m[(ig, iz)] = b[1][0];
            m[(ig, ig)] = b[1][1];
        }
        m
    }
}

/// The scalar condition closing the system.
#[derive(Clone, Copy, Debug)]
enum Closure {
    /// ⟨u, 𝚟⟩ = ε, with 𝚟 given by its (ζ_{n,1}, γ_{n,−1}) coefficients.
    Amplitude { eps: f64, v: [f64; 2] },
    /// Ī(u) = target.
    Momentum { target: f64 },
}

struct Problem<'a> {
    red: Reduced,
    model: &'a Model,
    closure: Closure,
}

impl Problem<'_> {
    fn u_residual(&self, x: &[f64], omega: f64) -> Result<Vec<f64>> {
        Ok(self.red.restrict(&residual_f(omega, &self.red.state(x)?, self.model)?))
    }

    fn closure_value(&self, x: &[f64]) -> Result<f64> {
        let nz = self.red.zeta_idx.len();
        match self.closure {
            Closure::Amplitude { eps, v } => Ok(v[0] * x[1] + v[1] * x[nz] - eps),
            Closure::Momentum { target } => Ok(angular_momentum(&self.red.state(x)?) - target),
        }
    }

    fn residual(&self, y: &[f64]) -> Result<DVector<f64>> {
        let nu = self.red.n_u();
        let mut r = self.u_residual(&y[..nu], y[nu])?;
        r.push(self.closure_value(&y[..nu])?);
        Ok(DVector::from_vec(r))
    }

    fn jacobian(&self, y: &[f64], mode: JacobianMode) -> Result<DMatrix<f64>> {
        let nu = self.red.n_u();
        let (x, omega) = (&y[..nu], y[nu]);
        let lin = match mode {
            JacobianMode::Hybrid => self.red.linear(omega, self.model),
            JacobianMode::FiniteDifference => DMatrix::zeros(nu, nu),
        };
        let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = 1e-6 * scale.max(1e-4);
        let remainder = |xs: &[f64]| -> Result<Vec<f64>> {
            let r = self.u_residual(xs, omega)?;
            let l = &lin * DVector::from_column_slice(xs);
            Ok(r.iter().zip(l.iter()).map(|(a, b)| a - b).collect())
        };
        let cols: Vec<Vec<f64>> = (0..nu)
            .into_par_iter()
            .map(|j| {
                let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
                xp[j] += h;
                xm[j] -= h;
                let (fp, fm) = (remainder(&xp)?, remainder(&xm)?);
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            })
            .collect::<Result<_>>()?;
        let mut jac = DMatrix::zeros(nu + 1, nu + 1);
        for j in 0..nu {
            for i in 0..nu {
                jac[(i, j)] = lin[(i, j)] + cols[j][i];
            }
        }
        let state = self.red.state(x)?;
        let (iz, ig) = grad_angular_momentum(&state);
        let d_omega = self.red.restrict(&WahlenState { zeta: -&iz, gamma: -&ig.project_zero_mean() });
        for i in 0..nu {
            jac[(i, nu)] = d_omega[i];
        }
        match self.closure {
            Closure::Amplitude { v, .. } => {
                jac[(nu, 1)] = v[0];
                jac[(nu, self.red.zeta_idx.len())] = v[1];
            }
            Closure::Momentum { .. } => {
                let grad = self.red.restrict(&WahlenState { zeta: iz, gamma: ig });
                for j in 0..nu {
                    jac[(nu, j)] = grad[j];
                }
            }
        }
        Ok(jac)
    }
}

/// Resonant frequency seeding the branch.
pub fn seed_frequency(cfg: &ContinuationConfig, model: &Model) -> Result<f64> {
    let r = resonance_solve(cfg.l, cfg.kappa, &model.params)?;
    let w = match cfg.root {
        RootChoice::Plus => r.omega_plus,
        RootChoice::Minus => r.omega_minus,
    };
    w.ok_or(Error::NotResonant { l: cfg.mode(), omega: f64::NAN, residual: r.delta.unwrap_or(f64::NAN) })
}

fn finish(
    red: &Reduced,
    y: &[f64],
    iterations: usize,
    model: &Model,
    kernel: [f64; 2],
    n: usize,
) -> Result<BranchPoint> {
    let nu = red.n_u();
    let state = red.state(&y[..nu])?;
    let omega = y[nu];
    let defect = state.max_abs_diff(&state.reflect());
    let fold = state.zeta.kappa_fold_check(n) && state.gamma.kappa_fold_check(n);
    if defect > 1e-10 || !fold {
        return Err(Error::SymmetryLost { defect });
    }
    let nz = red.zeta_idx.len();
    Ok(BranchPoint {
        omega,
        eps: kernel[0] * y[1] + kernel[1] * y[nz],
        residual: coeff_sup(&residual_f(omega, &state, model)?),
        iterations,
        conserved: conserved_set(&state, model)?,
        state,
    })
}

/// Solves F(ω, u) = 0 at one value of the branch parameter.
pub fn newton_solve(
    cfg: &ContinuationConfig,
    model: &Model,
    grid: &SpectralGrid<f64>,
    value: f64,
    seed: Option<(f64, &WahlenState<f64>)>,
) -> Result<BranchPoint> {
    cfg.validate()?;
    let n = cfg.mode();
    let omega_star = seed_frequency(cfg, model)?;
    let kernel = kernel_coefficients(n, 1, omega_star, &model.params);
    let red = Reduced::new(grid, n)?;
    let nu = red.n_u();
    let closure = match cfg.parametrization {
        Parametrization::Amplitude => Closure::Amplitude { eps: value, v: kernel },
        Parametrization::AngularMomentum => Closure::Momentum { target: value },
    };
    let mut y = vec![0.0; nu + 1];
    match seed {
        Some((w, s)) => {
            y[..nu].copy_from_slice(&red.restrict(s));
            y[nu] = w;
        }
        None => {
            let eps = match cfg.parametrization {
                Parametrization::Amplitude => value,
                Parametrization::AngularMomentum => {
                    let c = reduced_momentum_coeff(n, omega_star, &model.params);
                    if (value / c).is_nan() || value / c <= 0.0 {
                        return Err(Error::InvalidParams(format!(
                            "momentum target {value} has the wrong sign for reduced coefficient {c}"
                        )));
                    }
                    (value / c).sqrt()
                }
            };
            y[1] = eps * kernel[0];
            y[red.zeta_idx.len()] = eps * kernel[1];
            y[nu] = omega_star;
        }
    }
    if cfg.parametrization == Parametrization::Amplitude && value == 0.0 {
        let y0 = {
            let mut z = vec![0.0; nu + 1];
            z[nu] = omega_star;
            z
        };
        return finish(&red, &y0, 0, model, kernel, n);
    }
    let prob = Problem { red, model, closure };
    let mut r = prob.residual(&y)?;
    for it in 0..=cfg.max_iter {
        if r.amax() <= cfg.tol {
            return finish(&prob.red, &y, it, model, kernel, n);
        }
        if it == cfg.max_iter {
            break;
        }
        let jac = prob.jacobian(&y, cfg.jacobian)?;
        let dy = jac.lu().solve(&(-&r)).ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
        for (yi, d) in y.iter_mut().zip(dy.iter()) {
            *yi += d;
        }
        r = prob.residual(&y)?;
        if !r.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::NewtonFailed { iterations: cfg.max_iter, residual: r.amax() })
}

/// Continuation outcome; `stopped` explains an early end.
#[derive(Clone, Debug)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub stopped: Option<String>,
}

/// Walks the configured parameter values, warm-starting each solve and halving failed steps.
pub fn continue_branch(cfg: &ContinuationConfig, model: &Model, grid: &SpectralGrid<f64>) -> Result<Branch> {
    cfg.validate()?;
    let values = cfg.values();
    let mut points: Vec<BranchPoint> = vec![newton_solve(cfg, model, grid, values[0], None)?];
    let mut current = values[0];
    for &target in &values[1..] {
        let nominal = target - current;
        let mut step = nominal;
        while current != target {
            let next = if (target - current).abs() <= step.abs() { target } else { current + step };
            let prev = points.last().unwrap();
            match newton_solve(cfg, model, grid, next, Some((prev.omega, &prev.state))) {
                Ok(bp) => {
                    current = next;
                    if current == target {
                        points.push(bp);
                    } else {
                        *points.last_mut().unwrap() = bp;
                    }
                }
                Err(e) => {
                    step *= 0.5;
                    if step.abs() < cfg.min_step_fraction * nominal.abs() {
                        let last = points.last().unwrap();
                        return Ok(Branch {
                            stopped: Some(format!("step to {next} failed ({e}); last value {}", last_value(cfg, last))),
                            points,
                        });
                    }
                }
            }
        }
    }
    Ok(Branch { points, stopped: None })
}

fn last_value(cfg: &ContinuationConfig, bp: &BranchPoint) -> f64 {
    match cfg.parametrization {
        Parametrization::Amplitude => bp.eps,
        Parametrization::AngularMomentum => bp.conserved.momentum,
    }
}

/// Richardson extrapolation of ω to zero amplitude, using that ω is even in ε.
pub fn extrapolate_frequency(eps: &[f64], omega: &[f64]) -> Result<f64> {
    if eps.len() != omega.len() || eps.len() < 2 {
        return Err(Error::Shape("need at least two (eps, omega) pairs".into()));
    }
    let n = eps.len();
    let a = DMatrix::from_fn(n, n, |i, j| (eps[i] * eps[i]).powi(j as i32));
    let coeffs = a.lu().solve(&DVector::from_column_slice(omega)).ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    Ok(coeffs[0])
}

/// Residuals of the rotating-wave equations in (ξ, χ).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CrossCheck {
    /// sup |ωξ′ − ξ̇|.
    pub xi: f64,
    /// sup |Π₀^⊥(ωχ′ − χ̇)|.
    pub chi: f64,
}

impl CrossCheck {
    pub fn max(&self) -> f64 {
        self.xi.max(self.chi)
    }
}

pub fn verify_cross_formulation(bp: &BranchPoint, model: &Model) -> Result<CrossCheck> {
    let nat = wahlen_forward(&bp.state, model);
    let rhs = rhs_natural(&nat, model)?;
    let xi = nat.xi.derivative().axpby(bp.omega, &rhs.xi, -1.0);
    let chi = nat.chi.derivative().axpby(bp.omega, &rhs.chi, -1.0).project_zero_mean();
    Ok(CrossCheck { xi: xi.sup_norm(), chi: chi.sup_norm() })
}

/// Evolves a wave for time T and compares with its rigid rotation 𝒯_{ωT}.
pub fn rotation_defect(bp: &BranchPoint, model: &Model, t_final: f64, dt: f64) -> Result<f64> {
    let tr = simulate(&bp.state, model, &IntegratorConfig::rk4(dt, t_final))?;
    if let Some(msg) = &tr.aborted {
        return Err(Error::StepRejected { t: tr.last().t, reason: msg.clone() });
    }
    let rotated = bp.state.translate(bp.omega * tr.last().t);
    Ok(tr.last().state.max_abs_diff(&rotated))
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const BRANCH_COLUMNS: [&str; 12] =
    ["eps", "omega", "residual", "iterations", "H", "I", "V", "Bx", "By", "Px", "Py", "zeta_norm"];

/// Writes one row per branch point with 17 significant digits, followed by the
/// ζ_{ℓ,1} and γ_{ℓ,−1} coefficients for ℓ = 1..=modes.
pub fn write_branch_csv<W: Write>(branch: &Branch, modes: usize, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Serialize(e.to_string());
    let mut header: Vec<String> = BRANCH_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend((1..=modes).map(|l| format!("zeta_{l}_1")));
    header.extend((1..=modes).map(|l| format!("gamma_{l}_-1")));
    wr.write_record(&header).map_err(csv_err)?;
    for p in &branch.points {
        let c = &p.conserved;
        let row = [
            fmt17(p.eps),
            fmt17(p.omega),
            fmt17(p.residual),
            p.iterations.to_string(),
            fmt17(c.energy),
            fmt17(c.momentum),
            fmt17(c.volume),
            fmt17(c.velocity[0]),
            fmt17(c.velocity[1]),
            fmt17(c.position[0]),
            fmt17(c.position[1]),
            fmt17(p.state.zeta.l2_norm()),
        ];
        let mut row = row.to_vec();
        row.extend((1..=modes).map(|l| fmt17(p.state.zeta.coeff(Mode { l, m: 1 }))));
        row.extend((1..=modes).map(|l| fmt17(p.state.gamma.coeff(Mode { l, m: -1 }))));
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// JSON form of a branch point with its ζ and γ coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct BranchPointRecord {
    pub eps: f64,
    pub omega: f64,
    pub residual: f64,
    pub iterations: usize,
    pub conserved: ConservedSet,
    pub zeta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl From<&BranchPoint> for BranchPointRecord {
    fn from(p: &BranchPoint) -> Self {
        BranchPointRecord {
            eps: p.eps,
            omega: p.omega,
            residual: p.residual,
            iterations: p.iterations,
            conserved: p.conserved,
            zeta: p.state.zeta.coeffs().to_vec(),
            gamma: p.state.gamma.coeffs().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::PhysicalParams;
    use crate::linear::{hessian_fd, kernel_vectors, pack, unpack};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(s: f64, a: f64) -> Model {
        Model::new(PhysicalParams::new(s, a).unwrap())
    }

    fn grid() -> SpectralGrid<f64> {
        SpectralGrid::new(64).unwrap()
    }

    #[test]
    fn trivial_branch_is_exact() {
        let g = grid();
        for (s, a) in [(1.0, 0.0), (1.0, 2.0), (0.5, 3.0)] {
            for w in [-1.0, 0.0, 0.7] {
                let r = residual_f(w, &WahlenState::zero(&g), &model(s, a)).unwrap();
                assert!(coeff_sup(&r) < 1e-14);
            }
        }
    }

    #[test]
    fn residual_is_equivariant() {
        let g = grid();
        let m = model(1.0, 1.2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = WahlenState::new(
            TorusField::random_smooth(&g, &mut rng, 6, 0.02, 2.0, true),
            TorusField::random_smooth(&g, &mut rng, 6, 0.02, 2.0, false),
        );
        let a = residual_f(0.4, &w.translate(0.3), &m).unwrap();
        let b = residual_f(0.4, &w, &m).unwrap().translate(0.3);
        assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn linearization_matches_lomega() {
        let g = SpectralGrid::new(32).unwrap();
        let m = model(1.0, 1.5);
        let omega = 0.8;
        let jac = crate::linear::fd_jacobian(
            |x| Ok(pack(&residual_f(omega, &unpack(&g, x)?, &m)?)),
            &vec![0.0; 64],
            1e-6,
        )
        .unwrap();
        for l in 1..=8 {
            for mm in [1i8, -1] {
                let fd = crate::linear::extract_block(&jac, &g, l, mm, false).unwrap();
                let want = block_lomega(l, mm, omega, 1.0, 1.5).mat;
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((fd[i][j] - want[i][j]).abs() < 1e-6, "l={l} {fd:?} {want:?}");
                    }
                }
            }
        }
        let h = hessian_fd(&m, &g, 1e-6).unwrap();
        assert!((h[(0, 0)] - jac[(0, 0)]).abs() < 1e-8);
    }

    #[test]
    fn kernel_vector_annihilated_to_first_order() {
        let g = grid();
        let m = model(1.0, 0.0);
        let w = 1.5f64.sqrt();
        let [v, _] = kernel_vectors(2, w, &m.params, &g).unwrap();
        let eps = 1e-5;
        let r = residual_f(w, &v.axpby(eps, &v, 0.0), &m).unwrap();
        assert!(coeff_sup(&r) < 10.0 * eps * eps);
    }

    #[test]
    fn newton_small_amplitude() {
        let g = grid();
        let m = model(1.0, 0.0);
        let cfg = ContinuationConfig::amplitude(2, 1, 1e-3, 1e-3, 1);
        let bp = newton_solve(&cfg, &m, &g, 1e-3, None).unwrap();
        assert!(bp.iterations <= 8, "{}", bp.iterations);
        assert!(bp.residual <= 1e-10);
        assert!((bp.eps - 1e-3).abs() < 1e-14);
        let [v, _] = kernel_vectors(2, 1.5f64.sqrt(), &m.params, &g).unwrap();
        assert!(bp.state.axpby(1.0, &v, -1e-3).l2_norm() <= 10.0 * 1e-6);
        assert!(bp.state.max_abs_diff(&bp.state.reflect()) < 1e-10);
        let fd = ContinuationConfig { jacobian: JacobianMode::FiniteDifference, ..cfg };
        let bp2 = newton_solve(&fd, &m, &g, 1e-3, None).unwrap();
        assert!((bp.omega - bp2.omega).abs() < 1e-10);
    }

    #[test]
    fn zero_amplitude_returns_resonance() {
        let g = grid();
        let m = model(1.0, 0.0);
        let cfg = ContinuationConfig::amplitude(2, 1, 0.0, 0.0, 1);
        let bp = newton_solve(&cfg, &m, &g, 0.0, None).unwrap();
        assert_eq!(bp.omega, 1.5f64.sqrt());
        assert_eq!(bp.state.l2_norm(), 0.0);
    }

    #[test]
    fn opposite_amplitudes_are_half_turns() {
        let g = grid();
        let m = model(1.0, 0.8);
        let cfg = ContinuationConfig::amplitude(3, 1, 0.0, 0.0, 1);
        let a = newton_solve(&cfg, &m, &g, 2e-3, None).unwrap();
        let b = newton_solve(&cfg, &m, &g, -2e-3, None).unwrap();
        assert!((a.omega - b.omega).abs() < 1e-10);
        let flipped = a.state.translate(std::f64::consts::PI / 3.0);
        assert!(flipped.max_abs_diff(&b.state) < 1e-10);
    }

    #[test]
    fn cross_formulation_residual() {
        let g = grid();
        let m = model(1.0, 1.0);
        let cfg = ContinuationConfig::amplitude(2, 1, 0.0, 0.0, 1);
        let bp = newton_solve(&cfg, &m, &g, 1e-3, None).unwrap();
        assert!(verify_cross_formulation(&bp, &m).unwrap().max() < 1e-9);
        let zero = newton_solve(&cfg, &m, &g, 0.0, None).unwrap();
        assert!(verify_cross_formulation(&zero, &m).unwrap().max() < 1e-13);
    }

    #[test]
    fn momentum_parametrization_hits_target() {
        let g = grid();
        let m = model(1.0, 0.0);
        let mut cfg = ContinuationConfig::amplitude(2, 1, 1e-6, 4e-6, 4);
        cfg.parametrization = Parametrization::AngularMomentum;
        let br = continue_branch(&cfg, &m, &g).unwrap();
        assert!(br.stopped.is_none());
        for (p, t) in br.points.iter().zip(cfg.values()) {
            assert!((p.conserved.momentum - t).abs() < 1e-9);
        }
    }

    #[test]
    fn amplitude_branch_monotone_momentum() {
        let g = grid();
        let m = model(1.0, 0.5);
        let cfg = ContinuationConfig::amplitude(2, 1, 1e-3, 5e-3, 5);
        let br = continue_branch(&cfg, &m, &g).unwrap();
        assert_eq!(br.points.len(), 5);
        assert!(br.points.windows(2).all(|w| w[1].conserved.momentum > w[0].conserved.momentum));
        let mut buf = vec![];
        write_branch_csv(&br, 4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().next().unwrap().split(',').count(), BRANCH_COLUMNS.len() + 8);
    }

    #[test]
    fn wave_rotates_rigidly() {
        let g = SpectralGrid::new(32).unwrap();
        let m = model(1.0, 0.0);
        let cfg = ContinuationConfig::amplitude(2, 1, 0.0, 0.0, 1);
        let bp = newton_solve(&cfg, &m, &g, 1e-3, None).unwrap();
        assert!(rotation_defect(&bp, &m, 1.0, 1e-3).unwrap() < 1e-6);
    }

    #[test]
    fn richardson_recovers_quadratic() {
        let eps = [1e-3f64, 5e-4, 2.5e-4];
        let om: Vec<f64> = eps.iter().map(|e| 2.0 + 3.0 * e * e - 5.0 * e.powi(4)).collect();
        assert!((extrapolate_frequency(&eps, &om).unwrap() - 2.0).abs() < 1e-13);
    }
}
