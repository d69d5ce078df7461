//! Constrained solve for the multiplier fed into the replicator field:
//! minimize RE(Z, x) + ½ε² + ½η² subject to the advantage, gap, and
//! logsumexp constraints, over Z in the sub-simplex of the carrier of x,
//! ε free, η ≥ 1.
//!
//! Scheme: augmented-Lagrangian outer loop over the inequality constraints
//! with an inner projected-gradient descent on (Z, ε, η). The Z block is
//! projected onto the carrier sub-simplex by Euclidean simplex projection;
//! the inner step is diagonally scaled by the entropic curvature so that
//! near-boundary states converge at a useful rate.

use serde::{Deserialize, Serialize};

use crate::game::{Game, Strategy};
use crate::kernels::{advantage_vector, weighted_logsumexp};
use crate::linalg::dot;
use crate::theta::ThetaSolution;
use crate::{Error, Result};

/// θ values at or below this are handled as the θ_X = 0 regime: the
/// logsumexp constraints collapse to their equality form and η plays no
/// role in them.
pub const THETA_ZERO: f64 = 1e-8;

/// Floor used when evaluating entropic gradients at zeroed coordinates.
const Z_GRAD_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Cap on total inner projected-gradient steps.
    pub max_iterations: usize,
    /// Constraint slacks must stay above −feas_tol.
    pub feas_tol: f64,
    /// Stationarity + complementarity target.
    pub kkt_tol: f64,
    /// The fixed constant multiplying payoffs inside the logsumexp
    /// constraints.
    pub abar: f64,
    /// θ threshold selecting the equality-regime initialization.
    pub theta_zero: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub max_outer: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 100_000,
            feas_tol: 1e-7,
            kkt_tol: 1e-6,
            abar: 1.0,
            theta_zero: THETA_ZERO,
            penalty_init: 1.0,
            penalty_growth: 10.0,
            max_outer: 60,
        }
    }
}

/// Slack values for the four constraint groups; feasible when everything
/// is at least −feas_tol (η ≥ 1 is handled by the variable bound).
#[derive(Debug, Clone)]
pub struct Slacks {
    /// Σ z_i B_i − ε θ².
    pub s3: f64,
    /// ε − ((Cz)_i − x·Cz), one entry per row.
    pub s4: Vec<f64>,
    /// (η^θ − 1) − [ln Σ x_i exp{ᾱ(Cz)_i} − ᾱ x·Cz].
    pub s5: f64,
    /// Same with S in place of C.
    pub s6: f64,
}

impl Slacks {
    pub fn min(&self) -> f64 {
        let s4min = self.s4.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        self.s3.min(s4min).min(self.s5).min(self.s6)
    }
}

/// Multiplier estimates for the four constraint groups, in the same order
/// as [`Slacks`].
#[derive(Debug, Clone)]
pub struct DualVector {
    pub lambda0: f64,
    pub lambda: Vec<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
}

#[derive(Debug, Clone)]
pub struct MultiplierSolution {
    pub z: Strategy,
    pub eps: f64,
    pub eta: f64,
    /// max of the projected-stationarity and scaled-complementarity
    /// residuals at the returned point.
    pub kkt_residual: f64,
    pub slacks: Slacks,
    /// RE(z, x) + ½ε² + ½η².
    pub objective: f64,
    /// Inner projected-gradient steps consumed.
    pub iterations: usize,
    pub converged: bool,
    pub duals: Option<DualVector>,
    /// Best feasible objective seen after each outer round (nonincreasing).
    pub outer_objectives: Vec<f64>,
}

/// Warm-start data carried between consecutive solves along an orbit.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub z: Strategy,
    pub eps: f64,
    pub eta: f64,
    pub duals: Option<DualVector>,
}

impl From<&MultiplierSolution> for WarmStart {
    fn from(sol: &MultiplierSolution) -> Self {
        WarmStart {
            z: sol.z.clone(),
            eps: sol.eps,
            eta: sol.eta,
            duals: sol.duals.clone(),
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cssv = 0.0;
    let mut tau = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cssv += ui;
        let t = (cssv - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&vi| (vi - tau).max(0.0)).collect()
}

/// Evaluate the slack vector of the constraint set at (z, eps, eta) with
/// the literal exponent θ_X from the theta solve.
pub fn constraint_slacks(
    g: &Game,
    x: &Strategy,
    thetasol: &ThetaSolution,
    z: &Strategy,
    eps: f64,
    eta: f64,
    abar: f64,
) -> Result<Slacks> {
    let b = advantage_vector(g, x)?;
    let theta = thetasol.theta;
    let cz = g.c().matvec(z.coords());
    let sz = g.s().matvec(z.coords());
    let x_cz = dot(x.coords(), &cz);
    let x_sz = dot(x.coords(), &sz);
    let s3 = dot(z.coords(), &b) - eps * theta * theta;
    let s4 = cz.iter().map(|&v| eps - (v - x_cz)).collect();
    let rhs = eta.powf(theta) - 1.0;
    let s5 = rhs - (weighted_logsumexp(x, &cz, abar)? - abar * x_cz);
    let s6 = rhs - (weighted_logsumexp(x, &sz, abar)? - abar * x_sz);
    Ok(Slacks { s3, s4, s5, s6 })
}

/// Feasible starting triple (z, ε, η) for the multiplier program.
///
/// For θ above the zero threshold the start is the theta-solve optimizer
/// with ε = 1 and the smallest power-of-two η making the logsumexp
/// constraints hold. At or below the threshold the start is the
/// largest-mass pure strategy in the carrier with ε = η = 1.
pub fn feasible_init(
    g: &Game,
    x: &Strategy,
    thetasol: &ThetaSolution,
    abar: f64,
) -> Result<(Strategy, f64, f64)> {
    let theta = thetasol.theta;
    if theta > THETA_ZERO {
        let y = thetasol.y.clone();
        let cz = g.c().matvec(y.coords());
        let sz = g.s().matvec(y.coords());
        let jg_c = weighted_logsumexp(x, &cz, abar)? - abar * dot(x.coords(), &cz);
        let jg_s = weighted_logsumexp(x, &sz, abar)? - abar * dot(x.coords(), &sz);
        let needed = jg_c.max(jg_s).max(0.0);
        // cap keeps η² representable; past it the program is numerically
        // infeasible and the solver falls back to penalized minimization
        let mut k: u32 = if needed == 0.0 {
            0
        } else {
            ((1.0 + needed).ln() / (theta * std::f64::consts::LN_2))
                .ceil()
                .max(0.0)
                .min(500.0) as u32
        };
        let mut eta = (2.0_f64).powi(k as i32);
        while eta.powf(theta) - 1.0 < needed && k < 500 {
            k += 1;
            eta *= 2.0;
        }
        Ok((y, 1.0, eta))
    } else {
        let i_star = x
            .carrier()
            .iter()
            .copied()
            .max_by(|&a, &b| x.get(a).partial_cmp(&x.get(b)).unwrap())
            .expect("nonempty carrier");
        Ok((Strategy::pure(x.dim(), i_star), 1.0, 1.0))
    }
}

// ---------------------------------------------------------------------------
// internal augmented-Lagrangian machinery
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct W {
    z: Vec<f64>,
    eps: f64,
    eta: f64,
}

struct Problem<'a> {
    game: &'a Game,
    x: &'a Strategy,
    b: Vec<f64>,
    /// Effective exponent: 0 in the θ ≤ θ_zero regime.
    theta: f64,
    abar: f64,
    carrier: Vec<usize>,
    ctx: Vec<f64>,
    stx: Vec<f64>,
}

struct EvalState {
    f: f64,
    /// Constraint values in g ≤ 0 form: [advantage, rows, lse-C, lse-S].
    gvals: Vec<f64>,
    /// Softmax weights of x tilted by ᾱCz and ᾱSz (for gradients).
    p: Vec<f64>,
    q: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(game: &'a Game, x: &'a Strategy, thetasol: &ThetaSolution, cfg: &SolverConfig) -> Result<Problem<'a>> {
        let b = advantage_vector(game, x)?;
        let theta = if thetasol.theta > cfg.theta_zero {
            thetasol.theta
        } else {
            0.0
        };
        Ok(Problem {
            game,
            x,
            b,
            theta,
            abar: cfg.abar,
            carrier: x.carrier().to_vec(),
            ctx: game.c().tr_matvec(x.coords()),
            stx: game.s().matvec(x.coords()),
        })
    }

    fn m(&self) -> usize {
        self.game.n() + 3
    }

    fn rhs(&self, eta: f64) -> f64 {
        if self.theta == 0.0 {
            0.0
        } else {
            eta.powf(self.theta) - 1.0
        }
    }

    fn drhs_deta(&self, eta: f64) -> f64 {
        if self.theta == 0.0 {
            0.0
        } else {
            self.theta * eta.powf(self.theta - 1.0)
        }
    }

    fn objective(&self, w: &W) -> f64 {
        let mut re = 0.0;
        for &i in &self.carrier {
            let zi = w.z[i];
            if zi > 0.0 {
                re += zi * (zi / self.x.get(i)).ln();
            }
        }
        re.max(0.0) + 0.5 * w.eps * w.eps + 0.5 * w.eta * w.eta
    }

    /// Softmax weights of x under tilt ᾱ·v, dense over positive-mass coords.
    fn tilt_weights(&self, v: &[f64]) -> Vec<f64> {
        let x = self.x;
        let shift = x
            .carrier()
            .iter()
            .fold(f64::NEG_INFINITY, |m, &i| m.max(self.abar * v[i]));
        let mut w: Vec<f64> = x
            .coords()
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                if xi > 0.0 {
                    xi * (self.abar * v[i] - shift).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        w
    }

    fn eval(&self, w: &W) -> EvalState {
        let n = self.game.n();
        let cz = self.game.c().matvec(&w.z);
        let sz = self.game.s().matvec(&w.z);
        let x_cz = dot(self.x.coords(), &cz);
        let x_sz = dot(self.x.coords(), &sz);
        let rhs = self.rhs(w.eta);

        let mut gvals = Vec::with_capacity(self.m());
        gvals.push(w.eps * self.theta * self.theta - dot(&w.z, &self.b));
        for i in 0..n {
            gvals.push(cz[i] - x_cz - w.eps);
        }
        let lse_c = wlse_over(self.x, &cz, self.abar);
        let lse_s = wlse_over(self.x, &sz, self.abar);
        gvals.push(lse_c - self.abar * x_cz - rhs);
        gvals.push(lse_s - self.abar * x_sz - rhs);

        EvalState {
            f: self.objective(w),
            gvals,
            p: self.tilt_weights(&cz),
            q: self.tilt_weights(&sz),
        }
    }

    /// ∇f + Σ_j coef_j ∇g_j at w; `es` must be the evaluation at w.
    fn weighted_grad(&self, w: &W, es: &EvalState, coef: &[f64]) -> W {
        let n = self.game.n();
        let mut gz = vec![0.0; n];
        for &i in &self.carrier {
            gz[i] = (w.z[i].max(Z_GRAD_FLOOR) / self.x.get(i)).ln() + 1.0;
        }
        // advantage constraint
        let c0 = coef[0];
        if c0 != 0.0 {
            for i in 0..n {
                gz[i] -= c0 * self.b[i];
            }
        }
        // row constraints
        let mut row_coef_sum = 0.0;
        for i in 0..n {
            let ci = coef[1 + i];
            if ci != 0.0 {
                row_coef_sum += ci;
                for (gzj, &cij) in gz.iter_mut().zip(self.game.c().row(i)) {
                    *gzj += ci * cij;
                }
            }
        }
        if row_coef_sum != 0.0 {
            for (gzj, &cj) in gz.iter_mut().zip(&self.ctx) {
                *gzj -= row_coef_sum * cj;
            }
        }
        // logsumexp constraints
        let kc = coef[n + 1];
        if kc != 0.0 {
            let cp = self.game.c().tr_matvec(&es.p);
            for i in 0..n {
                gz[i] += kc * self.abar * (cp[i] - self.ctx[i]);
            }
        }
        let ks = coef[n + 2];
        if ks != 0.0 {
            let sq = self.game.s().matvec(&es.q);
            for i in 0..n {
                gz[i] += ks * self.abar * (sq[i] - self.stx[i]);
            }
        }

        let geps = w.eps + c0 * self.theta * self.theta - row_coef_sum;
        let geta = w.eta - (kc + ks) * self.drhs_deta(w.eta);
        W {
            z: gz,
            eps: geps,
            eta: geta,
        }
    }

    fn al_coefs(&self, es: &EvalState, mu: &[f64], rho: f64) -> Vec<f64> {
        es.gvals
            .iter()
            .zip(mu)
            .map(|(&g, &m)| (m + rho * g).max(0.0))
            .collect()
    }

    fn al_value(&self, es: &EvalState, mu: &[f64], rho: f64) -> f64 {
        let mut v = es.f;
        for (&g, &m) in es.gvals.iter().zip(mu) {
            let t = (m + rho * g).max(0.0);
            v += (t * t - m * m) / (2.0 * rho);
        }
        v
    }

    /// Projection onto the feasible box: carrier sub-simplex for z, η ≥ 1.
    fn project(&self, w: &W) -> W {
        let vals: Vec<f64> = self.carrier.iter().map(|&i| w.z[i]).collect();
        let proj = project_to_simplex(&vals);
        let mut z = vec![0.0; w.z.len()];
        for (&i, &v) in self.carrier.iter().zip(&proj) {
            z[i] = v;
        }
        W {
            z,
            eps: w.eps,
            eta: w.eta.max(1.0),
        }
    }

    fn axpy(&self, w: &W, t: f64, dir: &W) -> W {
        let mut z = w.z.clone();
        for &i in &self.carrier {
            z[i] -= t * dir.z[i];
        }
        W {
            z,
            eps: w.eps - t * dir.eps,
            eta: w.eta - t * dir.eta,
        }
    }

    fn diff_dot(&self, grad: &W, a: &W, b: &W) -> f64 {
        let mut s = grad.eps * (a.eps - b.eps) + grad.eta * (a.eta - b.eta);
        for &i in &self.carrier {
            s += grad.z[i] * (a.z[i] - b.z[i]);
        }
        s
    }

    fn step_linf(&self, a: &W, b: &W) -> f64 {
        let mut m = (a.eps - b.eps).abs().max((a.eta - b.eta).abs());
        for &i in &self.carrier {
            m = m.max((a.z[i] - b.z[i]).abs());
        }
        m
    }

    /// Projected-gradient stationarity residual at unit step.
    fn pg_residual(&self, w: &W, grad: &W) -> f64 {
        let moved = self.project(&self.axpy(w, 1.0, grad));
        self.step_linf(w, &moved)
    }
}

fn wlse_over(x: &Strategy, v: &[f64], a: f64) -> f64 {
    weighted_logsumexp(x, v, a).expect("dimensions checked upstream")
}

/// Solve the multiplier program from a cold start.
pub fn solve_multiplier(
    g: &Game,
    x: &Strategy,
    thetasol: &ThetaSolution,
    cfg: &SolverConfig,
) -> Result<MultiplierSolution> {
    solve_multiplier_warm(g, x, thetasol, cfg, None)
}

/// Solve the multiplier program, optionally warm-started from a previous
/// orbit point's solution.
pub fn solve_multiplier_warm(
    g: &Game,
    x: &Strategy,
    thetasol: &ThetaSolution,
    cfg: &SolverConfig,
    warm: Option<&WarmStart>,
) -> Result<MultiplierSolution> {
    let n = g.n();

    // Degenerate near-vertex state: the dynamic is stationary there. Report
    // z = x with the gap-matching ε so the slack invariant holds.
    if x.carrier().len() == 1 {
        let z = x.clone();
        let cz = g.c().matvec(z.coords());
        let x_cz = dot(x.coords(), &cz);
        let gap = cz.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - x_cz;
        let eps = gap.max(0.0);
        let eta = 1.0;
        let slacks = constraint_slacks(g, x, thetasol, &z, eps, eta, cfg.abar)?;
        let objective = 0.5 * eps * eps + 0.5;
        return Ok(MultiplierSolution {
            z,
            eps,
            eta,
            kkt_residual: 0.0,
            slacks,
            objective,
            iterations: 0,
            converged: true,
            duals: None,
            outer_objectives: vec![objective],
        });
    }

    let prob = Problem::new(g, x, thetasol, cfg)?;
    let m = prob.m();

    // ---- starting point -------------------------------------------------
    let mut start: Option<W> = None;
    let mut warm_duals: Option<Vec<f64>> = None;
    if let Some(ws) = warm {
        if let Some(mut duals) = ws.duals.as_ref().map(dual_to_vec) {
            duals.resize(m, 0.0);
            warm_duals = Some(duals);
        }
        if let Some(w) = clip_to_carrier(&ws.z, x) {
            let w = W {
                z: w,
                eps: ws.eps,
                eta: ws.eta.max(1.0),
            };
            if prob.eval(&w).gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) <= cfg.feas_tol {
                start = Some(w);
            }
        }
    }
    let mut infeasible_start = false;
    let w0 = match start {
        Some(w) => w,
        None => {
            let (z0, eps0, eta0) = feasible_init(g, x, thetasol, cfg.abar)?;
            let mut w = W {
                z: z0.coords().to_vec(),
                eps: eps0,
                eta: eta0,
            };
            let gv = prob.eval(&w).gvals;
            let viol_core = gv[..=n].iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let viol_lse = gv[n + 1..].iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            if thetasol.theta > cfg.theta_zero {
                if viol_core > cfg.feas_tol {
                    // guaranteed-feasible regime: a violation here is a bug
                    return Err(Error::InfeasibleStart {
                        violation: viol_core,
                    });
                }
                if viol_lse > cfg.feas_tol {
                    // η needed to cover the logsumexp gaps overflowed its
                    // cap; minimize the penalized problem instead
                    infeasible_start = true;
                }
            } else if viol_core.max(viol_lse) > cfg.feas_tol {
                // θ ≈ 0 equality regime: the pure-strategy rule can miss.
                // Fall back to z = x, then to the least-violating candidate.
                let wx = W {
                    z: x.coords().to_vec(),
                    eps: 1.0,
                    eta: 1.0,
                };
                let viol_x = max_violation(&prob, &wx);
                if viol_x <= cfg.feas_tol {
                    w = wx;
                } else {
                    infeasible_start = true;
                    if viol_x < viol_core.max(viol_lse) {
                        w = wx;
                    }
                }
            }
            if infeasible_start {
                log::debug!("multiplier solve: no feasible start available; proceeding penalized");
            }
            w
        }
    };

    // ---- augmented-Lagrangian outer loop --------------------------------
    // classic target schedule: tighten the inner tolerance and feasibility
    // target after productive rounds, otherwise raise the penalty
    let mut w = prob.project(&w0);
    let mut mu = warm_duals.unwrap_or_else(|| vec![0.0; m]);
    let mut rho = cfg.penalty_init;
    let omega_min = cfg.kkt_tol * 0.05;
    let mut omega = (1.0 / rho).max(omega_min);
    let feas_target_min = cfg.feas_tol * 0.1;
    let mut feas_target = (0.1 / rho.powf(0.1)).max(feas_target_min);
    let mut iterations = 0usize;
    let mut outer_objectives: Vec<f64> = Vec::new();
    let mut incumbent: Option<(W, f64)> = None;
    let mut final_coef = vec![0.0; m];
    let mut converged = false;

    fn consider_incumbent(
        inc: &mut Option<(W, f64)>,
        prob: &Problem<'_>,
        cand: &W,
        cfg: &SolverConfig,
    ) {
        let es = prob.eval(cand);
        let viol = es.gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        if viol <= cfg.feas_tol {
            match inc {
                Some((_, f)) if *f <= es.f + 1e-12 => {}
                _ => *inc = Some((cand.clone(), es.f)),
            }
        }
    }

    consider_incumbent(&mut incumbent, &prob, &w, cfg);

    for outer in 0..cfg.max_outer {
        // inner solve: spectral projected gradient on the AL function
        // (Barzilai-Borwein step, nonmonotone Armijo, Euclidean projection)
        let mut t_bb = 1.0_f64;
        let mut prev: Option<(W, W)> = None; // (iterate, gradient)
        let mut phi_hist: Vec<f64> = Vec::with_capacity(8);
        loop {
            if iterations >= cfg.max_iterations {
                break;
            }
            let es = prob.eval(&w);
            let coef = prob.al_coefs(&es, &mu, rho);
            let grad = prob.weighted_grad(&w, &es, &coef);
            if prob.pg_residual(&w, &grad) <= omega {
                break;
            }
            if let Some((wp, gp)) = &prev {
                let mut ss = 0.0;
                let mut sy = 0.0;
                let mut acc = |s: f64, y: f64| {
                    ss += s * s;
                    sy += s * y;
                };
                for &i in &prob.carrier {
                    acc(w.z[i] - wp.z[i], grad.z[i] - gp.z[i]);
                }
                acc(w.eps - wp.eps, grad.eps - gp.eps);
                acc(w.eta - wp.eta, grad.eta - gp.eta);
                t_bb = if sy > 1e-30 * ss.max(1.0) {
                    (ss / sy).clamp(1e-12, 1e6)
                } else {
                    (t_bb * 10.0).min(1e6)
                };
            }
            let phi = prob.al_value(&es, &mu, rho);
            phi_hist.push(phi);
            if phi_hist.len() > 8 {
                phi_hist.remove(0);
            }
            let phi_ref = phi_hist.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));

            let mut accepted = false;
            let mut t = t_bb;
            while t >= 1e-16 {
                let cand = prob.project(&prob.axpy(&w, t, &grad));
                let dirdot = prob.diff_dot(&grad, &cand, &w);
                if dirdot >= 0.0 {
                    // only happens at machine-precision stationarity
                    break;
                }
                let es_c = prob.eval(&cand);
                let phi_c = prob.al_value(&es_c, &mu, rho);
                if phi_c <= phi_ref + 1e-4 * dirdot {
                    prev = Some((std::mem::replace(&mut w, cand), grad));
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            iterations += 1;
            if !accepted {
                break;
            }
        }

        // multiplier update + convergence assessment
        let es = prob.eval(&w);
        let coef = prob.al_coefs(&es, &mu, rho);
        let viol = es.gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let grad_l = prob.weighted_grad(&w, &es, &coef);
        let stat = prob.pg_residual(&w, &grad_l);
        let comp = es
            .gvals
            .iter()
            .zip(&coef)
            .map(|(&g, &l)| (l * g).abs() / (1.0 + l))
            .fold(0.0_f64, |a, v| a.max(v));

        consider_incumbent(&mut incumbent, &prob, &w, cfg);
        if let Some((_, f)) = &incumbent {
            outer_objectives.push(*f);
        }
        final_coef = coef.clone();
        log::trace!(
            "outer {outer}: iters {iterations} rho {rho:.1e} viol {viol:.3e} stat {stat:.3e} comp {comp:.3e} f {:.6}",
            es.f
        );

        if viol <= cfg.feas_tol && stat <= cfg.kkt_tol && comp <= cfg.kkt_tol {
            converged = true;
            incumbent = Some((w.clone(), es.f));
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }

        if viol <= feas_target.max(cfg.feas_tol) {
            mu = coef;
            omega = (omega * 0.2).max(omega_min);
            feas_target = (feas_target * 0.2).max(feas_target_min);
        } else {
            rho = (rho * cfg.penalty_growth).min(1e12);
            omega = (1.0 / rho).max(omega_min);
            feas_target = (0.1 / rho.powf(0.1)).max(feas_target_min);
        }
    }

    // ---- assemble the result --------------------------------------------
    let w_final = match (&incumbent, converged) {
        (Some((wi, _)), _) => wi.clone(),
        (None, _) => w.clone(),
    };
    let es = prob.eval(&w_final);
    let grad_l = prob.weighted_grad(&w_final, &es, &final_coef);
    let stat = prob.pg_residual(&w_final, &grad_l);
    let comp = es
        .gvals
        .iter()
        .zip(&final_coef)
        .map(|(&g, &l)| (l * g).abs() / (1.0 + l))
        .fold(0.0_f64, |a, v| a.max(v));
    let viol = es.gvals.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    if viol > cfg.feas_tol {
        converged = false;
    }

    let z = Strategy::new(w_final.z.iter().map(|&v| v.max(0.0)).collect())?;
    let slacks = constraint_slacks(g, x, thetasol, &z, w_final.eps, w_final.eta, cfg.abar)?;
    let duals = DualVector {
        lambda0: final_coef[0],
        lambda: final_coef[1..=n].to_vec(),
        kappa1: final_coef[n + 1],
        kappa2: final_coef[n + 2],
    };
    if infeasible_start && !converged {
        log::debug!("multiplier solve left infeasible (worst violation {viol:e})");
    }
    Ok(MultiplierSolution {
        z,
        eps: w_final.eps,
        eta: w_final.eta,
        kkt_residual: stat.max(comp),
        slacks,
        objective: es.f,
        iterations,
        converged,
        duals: Some(duals),
        outer_objectives,
    })
}

fn dual_to_vec(d: &DualVector) -> Vec<f64> {
    let mut v = Vec::with_capacity(d.lambda.len() + 3);
    v.push(d.lambda0);
    v.extend_from_slice(&d.lambda);
    v.push(d.kappa1);
    v.push(d.kappa2);
    v
}

fn clip_to_carrier(z: &Strategy, x: &Strategy) -> Option<Vec<f64>> {
    if z.dim() != x.dim() {
        return None;
    }
    let mut out = vec![0.0; z.dim()];
    let mut sum = 0.0;
    for &i in x.carrier() {
        out[i] = z.get(i);
        sum += out[i];
    }
    if sum <= 1e-6 {
        return None;
    }
    for v in &mut out {
        *v /= sum;
    }
    Some(out)
}

fn max_violation(prob: &Problem, w: &W) -> f64 {
    prob.eval(w)
        .gvals
        .iter()
        .fold(f64::NEG_INFINITY, |a, &v| a.max(v))
}
