//! Acceptance checks runnable from the CLI and the integration suite.

use std::fmt;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dn::{conjugate_trace, dn_apply, dn_oracle, DnMethod, DnOperator};
use crate::dynamics::{rhs_natural, rhs_wahlen, simulate, simulate_natural, IntegratorConfig};
use crate::error::Result;
use crate::functionals::{
    angular_momentum, grad_angular_momentum, grad_hamiltonian_wahlen, grad_volume, hamiltonian_wahlen, volume,
    wahlen_forward, Model, NaturalState, PhysicalParams, WahlenState,
};
use crate::linear::{
    constrained_coercivity, degenerate_frequency_value, dynamic_block, dynamic_jacobian_fd, extract_block,
    hessian_block, hessian_fd, hessian_spectrum, kernel_vectors, linear_spectrum, multiplicity_scan, resonance_delta,
    resonance_solve, transversality, transversality_kernel, transversality_value,
};
use crate::spectral::{SpectralGrid, TorusField};
use crate::waves::{extrapolate_frequency, newton_solve, verify_cross_formulation, ContinuationConfig};

pub const CRITERIA: usize = 15;

/// Criteria whose failure is analysed and expected.
pub const KNOWN_FAILURES: &[usize] = &[14];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    pub fn expected_failure(&self) -> bool {
        !self.passed && KNOWN_FAILURES.contains(&self.id)
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{:02}] {}: {}", self.id, self.name, self.detail)
    }
}

const NAMES: [&str; CRITERIA] = [
    "dn multiplier exactness",
    "dn taylor vs oracle",
    "dn operator properties",
    "gradient check",
    "equilibrium",
    "linearization consistency",
    "conservation",
    "conjugacy",
    "resonance arithmetic",
    "multiplicity-4 family",
    "transversality",
    "rotating-wave branch",
    "hessian spectrum",
    "constrained coercivity",
    "linear stability sampling",
];

/// Runs one criterion; errors become failures with the message as detail.
pub fn run_criterion(id: usize) -> CriterionResult {
    let name = NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown");
    let outcome = match id {
        1 => c01_multiplier(),
        2 => c02_taylor_oracle(),
        3 => c03_properties(),
        4 => c04_gradients(),
        5 => c05_equilibrium(),
        6 => c06_linearization(),
        7 => c07_conservation(),
        8 => c08_conjugacy(),
        9 => c09_resonance(),
        10 => c10_multiplicity(),
        11 => c11_transversality(),
        12 => c12_branch(),
        13 => c13_hessian(),
        14 => c14_coercivity(),
        15 => c15_stability(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name, passed, detail }
}

pub fn run_all() -> Vec<CriterionResult> {
    (1..=CRITERIA).map(run_criterion).collect()
}

type Outcome = Result<(bool, String)>;
type Functional<'a> = &'a dyn Fn(&WahlenState<f64>) -> Result<f64>;

fn grid(n: usize) -> SpectralGrid<f64> {
    SpectralGrid::new(n).expect("valid grid size")
}

fn model(s: f64, a: f64) -> Result<Model> {
    Ok(Model::new(PhysicalParams::new(s, a)?))
}

fn random_state(g: &SpectralGrid<f64>, rng: &mut ChaCha8Rng, lmax: usize, norm: f64) -> WahlenState<f64> {
    let w = WahlenState::new(
        TorusField::random_smooth(g, rng, lmax, 1.0, 2.0, true),
        TorusField::random_smooth(g, rng, lmax, 1.0, 2.0, false),
    );
    let s = norm / w.l2_norm();
    w.axpby(s, &w, 0.0)
}

fn c01_multiplier() -> Outcome {
    let g = grid(128);
    let zero = TorusField::zeros(&g);
    let mut err: f64 = 0.0;
    for l in 0..=40 {
        let chi = TorusField::from_fn(&g, |t| (l as f64 * t).cos())?;
        for method in [DnMethod::Multiplier, DnMethod::Taylor { order: 4 }] {
            err = err.max(dn_apply(&zero, &chi, method)?.max_abs_diff(&chi.scale(l as f64)));
        }
    }
    Ok((err <= 1e-12, format!("max abs error {err:.2e} over l <= 40 at N=128 (tol 1e-12)")))
}

fn c02_taylor_oracle() -> Outcome {
    let g = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let chi = TorusField::random_smooth(&g, &mut rng, 8, 1.0, 3.0, false);
    let amps = [1e-3, 1e-2, 3e-2];
    let mut errs = vec![];
    for a in amps {
        let xi = TorusField::from_fn(&g, |t| a * (3.0 * t).cos())?;
        let taylor = dn_apply(&xi, &chi, DnMethod::Taylor { order: 4 })?;
        let oracle = dn_oracle(&xi, &chi)?;
        errs.push(taylor.max_abs_diff(&oracle) / oracle.sup_norm());
    }
    let (x, y): (Vec<f64>, Vec<f64>) = amps.iter().zip(&errs).map(|(a, e)| (a.ln(), e.ln())).unzip();
    let slope = least_squares_slope(&x, &y);
    let ok = errs[1] <= 1e-6 && slope >= 4.5;
    Ok((ok, format!("rel errors {} at a={amps:?}, log-log slope {slope:.2} (need <= 1e-6 at 1e-2, slope >= 4.5)", sci(&errs))))
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn c03_properties() -> Outcome {
    let g = grid(64);
    let op = DnOperator::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut sym, mut neg, mut cst, mut trans, mut refl, mut conj): (f64, f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..20 {
        let xi = TorusField::random_smooth(&g, &mut rng, 6, 0.01, 2.0, true);
        let chi = TorusField::random_smooth(&g, &mut rng, 8, 1.0, 2.0, true);
        let psi = TorusField::random_smooth(&g, &mut rng, 8, 1.0, 2.0, true);
        let gchi = op.apply(&xi, &chi)?;
        let gpsi = op.apply(&xi, &psi)?;
        let scale = chi.l2_norm() * psi.l2_norm();
        sym = sym.max((psi.inner(&gchi) - chi.inner(&gpsi)).abs() / scale);
        neg = neg.min(chi.inner(&gchi) / chi.inner(&chi));
        cst = cst.max(op.apply(&xi, &TorusField::constant(&g, 1.3))?.sup_norm());
        let shift = rng.gen_range(0.0..std::f64::consts::TAU);
        let lhs = op.apply(&xi.shift(shift), &chi.shift(shift))?;
        trans = trans.max(lhs.max_abs_diff(&gchi.shift(shift)) / gchi.sup_norm());
        let lhs = op.apply(&xi.reflect(), &chi.reflect())?;
        refl = refl.max(lhs.max_abs_diff(&gchi.reflect()) / gchi.sup_norm());
        let k = conjugate_trace(&xi, &chi)?;
        let inv = op.apply(&xi, &k)?.max_abs_diff(&(-&chi.derivative()));
        conj = conj.max(k.derivative().max_abs_diff(&gchi)).max(inv);
    }
    let ok = sym <= 1e-9 && neg >= -1e-10 && cst <= 1e-12 && trans <= 1e-9 && refl <= 1e-9 && conj <= 1e-9;
    Ok((
        ok,
        format!(
            "20 states: symmetry {sym:.1e}, min Rayleigh {neg:.3}, constants {cst:.1e}, translation {trans:.1e}, reflection {refl:.1e}, conjugate {conj:.1e}"
        ),
    ))
}

fn c04_gradients() -> Outcome {
    let g = grid(64);
    let m = model(1.1, 0.9)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let steps = [1e-3, 1e-4, 1e-5, 1e-6];
    let mut worst = [0.0f64; 3];
    for _ in 0..10 {
        let w = random_state(&g, &mut rng, 6, 0.02);
        let dir = random_state(&g, &mut rng, 10, 1.0);
        let (hz, hg) = grad_hamiltonian_wahlen(&w, &m)?;
        let (iz, ig) = grad_angular_momentum(&w);
        let (vz, vg) = grad_volume(&w);
        let pair = |a: &TorusField<f64>, b: &TorusField<f64>| dir.zeta.inner(a) + dir.gamma.inner(b);
        let analytic = [pair(&hz, &hg), pair(&iz, &ig), pair(&vz, &vg)];
        let funcs: [Functional; 3] =
            [&|s| hamiltonian_wahlen(s, &m), &|s| Ok(angular_momentum(s)), &|s| Ok(volume(s))];
        for (k, f) in funcs.iter().enumerate() {
            let mut best = f64::INFINITY;
            for h in steps {
                let fd = (f(&w.axpby(1.0, &dir, h))? - f(&w.axpby(1.0, &dir, -h))?) / (2.0 * h);
                best = best.min((fd - analytic[k]).abs() / analytic[k].abs().max(1e-300));
            }
            worst[k] = worst[k].max(best);
        }
    }
    let ok = worst.iter().all(|&e| e <= 1e-6);
    Ok((ok, format!("worst best-step rel error H {:.1e}, I {:.1e}, V {:.1e} over 10 states", worst[0], worst[1], worst[2])))
}

fn c05_equilibrium() -> Outcome {
    let g = grid(64);
    let mut err: f64 = 0.0;
    for (s, a) in [(1.0, 0.0), (1.0, 1.0), (2.0, 3.0), (0.3, 5.0)] {
        let m = model(s, a)?;
        let n = rhs_natural(&NaturalState::zero(&g), &m)?;
        let w = rhs_wahlen(&WahlenState::zero(&g), &m)?;
        err = err.max(n.xi.sup_norm()).max(n.chi.sup_norm()).max(w.zeta.sup_norm()).max(w.gamma.sup_norm());
    }
    Ok((err <= 1e-12, format!("sup of both fields at the circle {err:.1e} over 4 parameter sets")))
}

fn c06_linearization() -> Outcome {
    let g = grid(32);
    let mut err: f64 = 0.0;
    for (s, a) in [(1.0, 0.0), (1.0, 1.0), (1.0, 3.0)] {
        let jac = dynamic_jacobian_fd(&model(s, a)?, &g, 1e-6)?;
        for l in 0..=8 {
            for m in [1i8, -1] {
                let fd = extract_block(&jac, &g, l, m, true).expect("mode on grid");
                let want = dynamic_block(l, m, s, a).mat;
                for i in 0..2 {
                    for j in 0..2 {
                        err = err.max((fd[i][j] - want[i][j]).abs());
                    }
                }
            }
        }
    }
    Ok((err <= 1e-6, format!("max block deviation {err:.1e} for l <= 8 at (1,0), (1,1), (1,3)")))
}

fn c07_conservation() -> Outcome {
    let m = model(1.0, 1.0)?;
    let g = grid(64);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w0 = random_state(&g, &mut rng, 4, 1e-2);
    let dt = 1e-3;
    let tr = simulate(&w0, &m, &IntegratorConfig::rk4(dt, 5.0))?;
    if let Some(msg) = tr.aborted {
        return Ok((false, format!("run aborted: {msg}")));
    }
    let c0 = tr.points[0].conserved;
    let rel = |f: fn(&crate::functionals::ConservedSet) -> f64| {
        tr.points.iter().map(|p| (f(&p.conserved) - f(&c0)).abs()).fold(0.0, f64::max) / f(&c0).abs()
    };
    let (dh, di, dv) = (rel(|c| c.energy), rel(|c| c.momentum), rel(|c| c.volume));
    let mut bary: f64 = 0.0;
    for k in 1..tr.points.len() - 1 {
        let (p0, p1) = (tr.points[k - 1].conserved.position, tr.points[k + 1].conserved.position);
        let b = tr.points[k].conserved.velocity;
        for i in 0..2 {
            bary = bary.max(((p1[i] - p0[i]) / (2.0 * dt) - b[i]).abs());
        }
    }

    let gc = grid(32);
    let wc = random_state(&gc, &mut rng, 3, 1e-2);
    let mut drifts = vec![];
    for dt in [0.02, 0.01, 0.005] {
        let tr = simulate(&wc, &m, &IntegratorConfig::rk4(dt, 2.0).with_monitor_every(usize::MAX))?;
        drifts.push((tr.last().conserved.energy - tr.points[0].conserved.energy).abs());
    }
    let orders = [(drifts[0] / drifts[1]).log2(), (drifts[1] / drifts[2]).log2()];
    let ok = di <= 1e-8 && dv <= 1e-8 && dh <= 1e-7 && bary <= 1e-5 && orders.iter().all(|&o| o >= 3.5);
    Ok((
        ok,
        format!(
            "rel drift H {dh:.1e}, I {di:.1e}, V {dv:.1e}; dP/dt vs B {bary:.1e}; energy drift {} at dt 0.02/0.01/0.005, observed orders {:.2}, {:.2}",
            sci(&drifts),
            orders[0], orders[1]
        ),
    ))
}

fn c08_conjugacy() -> Outcome {
    let m = model(1.0, 1.5)?;
    let g = grid(32);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let w0 = random_state(&g, &mut rng, 4, 1e-2);
    let cfg = IntegratorConfig::rk4(1e-3, 1.0).with_monitor_every(50);
    let a = simulate(&w0, &m, &cfg)?;
    let b = simulate_natural(&wahlen_forward(&w0, &m), &m, &cfg)?;
    if a.points.len() != b.points.len() || a.aborted.is_some() || b.aborted.is_some() {
        return Ok((false, "trajectories stopped early".into()));
    }
    let mut err: f64 = 0.0;
    for (pa, pb) in a.points.iter().zip(&b.points) {
        let mapped = wahlen_forward(&pa.state, &m);
        err = err.max(mapped.xi.max_abs_diff(&pb.state.xi));
        err = err.max(mapped.chi.project_zero_mean().max_abs_diff(&pb.state.chi.project_zero_mean()));
    }
    Ok((err <= 1e-7, format!("max deviation of elevation and zero-mean potential {err:.1e} over T=1")))
}

fn c09_resonance() -> Outcome {
    let r = resonance_solve(2, 1, &PhysicalParams::new(1.0, 0.0)?)?;
    let want = 1.224744871391589;
    let (wp, wm) = (r.omega_plus.unwrap_or(f64::NAN), r.omega_minus.unwrap_or(f64::NAN));
    let freq_err = (wp - want).abs().max((wm + want).abs());
    let c = Ratio::new(1i64, 24);
    let eps = Ratio::new(1i64, 1_000_000);
    let zero = Ratio::from_integer(0);
    let flip = resonance_delta(2, c) == zero && resonance_delta(2, c - eps) < zero && resonance_delta(2, c + eps) > zero;
    let all_n = (1..=200).all(|n| resonance_delta(n, c) >= zero);
    let mut unit_ok = true;
    for (s, a) in [(1.0, 0.0), (1.0, 2.0), (0.5, 3.0)] {
        let r = resonance_solve(1, 1, &PhysicalParams::new(s, a)?)?;
        let delta_ok = if a == 0.0 { r.delta.is_none() } else { r.delta == Some(0.0) };
        unit_ok &= delta_ok && r.omega_plus == Some(0.0) && r.omega_minus == Some(0.0);
    }
    let ok = freq_err <= 1e-12 && flip && all_n && unit_ok;
    Ok((
        ok,
        format!("omega* error {freq_err:.1e}; exact sign flip at C=1/24: {flip}; Delta >= 0 for n <= 200: {all_n}; l=1 gives Delta=0, omega*=0: {unit_ok}"),
    ))
}

fn c10_multiplicity() -> Outcome {
    let p = PhysicalParams::new(1.0, 4.0)?;
    let r = resonance_solve(3, 1, &p)?;
    let zero_root = r.omega_plus == Some(0.0) || r.omega_minus.is_some_and(|w| w.abs() <= 1e-12);
    let scan = multiplicity_scan(0.0, &p, 64)?;
    let ok = zero_root && scan.roots == vec![1, 3] && scan.multiplicity == 4;
    Ok((ok, format!("l=3 root at omega=0: {zero_root}; scan roots {:?}, multiplicity {}", scan.roots, scan.multiplicity)))
}

fn c11_transversality() -> Outcome {
    let mut exact = true;
    for l in 1..=12 {
        for a in [Ratio::new(1i64, 3), Ratio::from_integer(2), Ratio::new(7, 2)] {
            let w = degenerate_frequency_value(l, a);
            exact &= transversality_value(l, w, a) == Ratio::from_integer(0);
        }
    }
    let p = PhysicalParams::new(1.0, 0.0)?;
    let spot = transversality(2, 1.5f64.sqrt(), &p);
    let oracle = transversality_kernel(2, 1.5f64.sqrt(), &p);
    let mut nonzero = true;
    for (s, a) in [(1.0, 0.0), (1.0, 1.0), (2.0, 0.5)] {
        let p = PhysicalParams::new(s, a)?;
        for l in 2..=10 {
            let r = resonance_solve(l, 1, &p)?;
            for w in [r.omega_plus, r.omega_minus].into_iter().flatten() {
                let degenerate = (w - degenerate_frequency_value(l, a)).abs() < 1e-9;
                nonzero &= degenerate || transversality(l, w, &p).abs() > 1e-6;
            }
        }
    }
    let ok = exact && nonzero && (spot + 1.9596).abs() <= 1e-4 && (spot - oracle).abs() <= 1e-12;
    Ok((
        ok,
        format!("exact zero at degenerate frequency: {exact}; nonzero elsewhere: {nonzero}; spot {spot:.6} (kernel-derived {oracle:.6})"),
    ))
}

fn c12_branch() -> Outcome {
    let g = grid(64);
    let m = model(1.0, 0.0)?;
    let cfg = ContinuationConfig::amplitude(2, 1, 0.0, 0.0, 1);
    let omega0 = 1.5f64.sqrt();
    let [v, _] = kernel_vectors(2, omega0, &m.params, &g)?;
    let eps = [1e-3, 5e-4, 2.5e-4];
    let (mut iters, mut resid, mut dev, mut refl, mut cross) = (0usize, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut omegas = vec![];
    for e in eps {
        let bp = newton_solve(&cfg, &m, &g, e, None)?;
        iters = iters.max(bp.iterations);
        resid = resid.max(bp.residual);
        dev = dev.max(bp.state.axpby(1.0, &v, -e).l2_norm() / (e * e));
        refl = refl.max(bp.state.max_abs_diff(&bp.state.reflect()));
        cross = cross.max(verify_cross_formulation(&bp, &m)?.max());
        omegas.push(bp.omega);
    }
    let w0 = extrapolate_frequency(&eps, &omegas)?;
    let ok = iters <= 8 && resid <= 1e-10 && dev <= 10.0 && (w0 - omega0).abs() <= 1e-6 && refl <= 1e-10 && cross <= 1e-9;
    Ok((
        ok,
        format!(
            "max iterations {iters}, residual {resid:.1e}, |u - eps v|/eps^2 {dev:.2}, extrapolated omega error {:.1e}, reflection defect {refl:.1e}, natural residual {cross:.1e}",
            (w0 - omega0).abs()
        ),
    ))
}

fn c13_hessian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut exact = true;
    for _ in 0..5 {
        let s = Ratio::new(rng.gen_range(1i64..50), rng.gen_range(1i64..20));
        let a = Ratio::new(rng.gen_range(-40i64..40), rng.gen_range(1i64..10));
        exact &= hessian_block(0, 0, s, a).mat[0][0] == a * a / 4 - s;
        exact &= hessian_block(1, 1, s, a).det() == Ratio::from_integer(0);
        exact &= hessian_block(1, -1, s, a).det() == Ratio::from_integer(0);
    }
    let hs = hessian_spectrum(&PhysicalParams::new(1.0, 1.0)?, 200);
    let lambda1 = hs.lambda1_zero == -1.0 + 0.25;
    let last = hs.entries.last().expect("entries up to l = 200");
    let (lp, lm) = (last.lambda_plus / 200f64.powi(2), last.lambda_minus / 200.0);
    let hs2 = hessian_spectrum(&PhysicalParams::new(2.0, 1.0)?, 200);
    let last2 = hs2.entries.last().expect("entries up to l = 200");
    let ok = exact && lambda1 && (lp - 1.0).abs() <= 0.02 && (lm - 1.0).abs() <= 0.02;
    Ok((
        ok,
        format!(
            "exact lambda1(0) and l=1 det 0 on 5 rational sets: {}; at sigma0=1, l=200: lambda+/l^2 {lp:.4}, lambda-/l {lm:.4}; at sigma0=2: lambda+/l^2 {:.4}, lambda-/l {:.4}",
            exact && lambda1,
            last2.lambda_plus / 200f64.powi(2),
            last2.lambda_minus / 200.0
        ),
    ))
}

fn c14_coercivity() -> Outcome {
    let p = PhysicalParams::new(1.0, 3.0)?;
    let rep = constrained_coercivity(&p, 64)?;
    let threshold = 0.1 * rep.lambda_minus_2.min(rep.lambda_plus_2);
    let g = grid(32);
    let h = hessian_fd(&Model::new(p), &g, 1e-6)?;
    let mut fd_err: f64 = 0.0;
    for l in 0..=8 {
        for m in [1i8, -1] {
            let fd = extract_block(&h, &g, l, m, false).expect("mode on grid");
            let want = hessian_block(l, m, 1.0, 3.0).mat;
            for i in 0..2 {
                for j in 0..2 {
                    fd_err = fd_err.max((fd[i][j] - want[i][j]).abs());
                }
            }
        }
    }
    let ok = rep.has_negative_direction && rep.constrained_min >= threshold;
    Ok((
        ok,
        format!(
            "unconstrained min {:.4} (negative direction: {}), constrained min {:.4} vs threshold {threshold:.4}; blocks match finite differences to {fd_err:.1e}",
            rep.unconstrained_min, rep.has_negative_direction, rep.constrained_min
        ),
    ))
}

fn c15_stability() -> Outcome {
    let mut stable_sets = vec![];
    for a in [0.5, 1.0, 2.0, 3.0, 4.0] {
        for c in [0.25, 0.3, 0.5, 1.0, 2.0, 10.0] {
            stable_sets.push((c * a * a, a));
        }
    }
    stable_sets.extend([(0.5, 0.0), (1.0, 0.0), (2.0, 0.0)]);
    let mut worst: f64 = 0.0;
    for &(s, a) in &stable_sets {
        for e in linear_spectrum(&PhysicalParams::new(s, a)?, 64)? {
            worst = worst.max(e.max_real_part()).max(e.operator.iter().map(|z| z[0].abs()).fold(0.0, f64::max));
        }
    }
    let mut violations = vec![];
    for c in [0.02, 0.05, 0.1, 0.2] {
        let p = PhysicalParams::new(c * 4.0, 2.0)?;
        let bad: Vec<usize> = linear_spectrum(&p, 64)?.iter().filter(|e| e.max_real_part() > 1e-10).map(|e| e.l).collect();
        if !bad.is_empty() {
            violations.push(format!("C={c}: l={bad:?}"));
        }
    }
    let log = if violations.is_empty() { "none".to_string() } else { violations.join("; ") };
    Ok((
        worst <= 1e-10,
        format!("max |Re lambda| {worst:.1e} over {} sets with C >= 1/4, l <= 64; logged below 1/4: {log}", stable_sets.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_format() {
        let r = CriterionResult { id: 3, name: "x", passed: true, detail: "ok".into() };
        assert_eq!(r.to_string(), "PASS [03] x: ok");
        assert!(!run_criterion(99).passed);
    }

    #[test]
    fn cheap_criteria_pass() {
        for id in [1, 5, 9, 10, 11, 13, 15] {
            let r = run_criterion(id);
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 32.0, 1024.0].iter().map(|v| v.ln()).collect();
        assert!((least_squares_slope(&x, &y) - 5.0).abs() < 1e-12);
    }
}
