//! Orbit integration of the multiplier replicator field with simplex
//! maintenance, Lyapunov monitoring, and trace emission.
//!
//! Each accepted state produces one [`TraceRecord`]; the multiplier and the
//! scale solve are re-done at every stage point of the integration method,
//! warm-started from the previous solve. The stopping rule watches the
//! multiplier's equilibrium gap, since the multiplier, not the state, is
//! the certified equilibrium candidate.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::game::{Game, Strategy};
use crate::kernels::{equilibrium_gap, lyapunov_value};
use crate::linalg::dot;
use crate::multiplier::{solve_multiplier_warm, MultiplierSolution, SolverConfig, WarmStart};
use crate::theta::{solve_theta, ThetaSolution};
use crate::Result;

/// Field magnitudes at or below this mean the state is a fixed point of the
/// dynamic and the orbit cannot move.
const STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Stop once the multiplier gap stays at or below this.
    pub tol_eq: f64,
    pub t_max: f64,
    /// Requested step size; halved on rejection, restored on acceptance.
    pub h: f64,
    pub method: Method,
    /// Cap on accepted states (trace records).
    pub max_steps: usize,
    /// Consecutive qualifying records required to declare convergence.
    pub stop_patience: usize,
    /// Coordinates below this are clamped up after each accepted step.
    pub x_floor: f64,
    pub h_min: f64,
    /// Largest tolerated per-step Lyapunov decrease.
    pub lyap_tol: f64,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol_eq: 1e-6,
            t_max: 1e4,
            h: 0.05,
            method: Method::Rk4,
            max_steps: 200_000,
            stop_patience: 5,
            x_floor: 1e-12,
            h_min: 1e-6,
            lyap_tol: 1e-8,
            solver: SolverConfig::default(),
        }
    }
}

/// One integration step's full state. Serialized as one JSON object per
/// line in trace files.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub x: Strategy,
    pub z: Strategy,
    pub theta: f64,
    pub eps: f64,
    pub eta: f64,
    pub lyapunov: f64,
    pub gap_z: f64,
    pub gap_x: f64,
    pub step_size: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub final_z: Strategy,
    pub final_gap: f64,
    pub final_theta: f64,
    pub converged: bool,
    pub records: Vec<TraceRecord>,
    /// Accepted states (equals records produced).
    pub steps: usize,
    pub rejected_steps: usize,
    /// Multiplier solves that returned without full convergence.
    pub solver_failures: usize,
    pub wallclock: f64,
}

/// v_i = x_i ((Cz)_i − x·Cz); tangent to the simplex.
pub fn vector_field(g: &Game, x: &Strategy, z: &Strategy) -> Vec<f64> {
    let cz = g.c().matvec(z.coords());
    let mean = dot(x.coords(), &cz);
    x.coords()
        .iter()
        .zip(&cz)
        .map(|(&xi, &ci)| xi * (ci - mean))
        .collect()
}

struct Eval {
    theta: ThetaSolution,
    mult: MultiplierSolution,
    field: Vec<f64>,
    lyapunov: f64,
    gap_z: f64,
    gap_x: f64,
}

struct Integrator<'a> {
    game: &'a Game,
    cfg: &'a RunConfig,
    warm: Option<WarmStart>,
    solver_failures: usize,
    rejected_steps: usize,
}

impl<'a> Integrator<'a> {
    fn new(game: &'a Game, cfg: &'a RunConfig) -> Integrator<'a> {
        Integrator {
            game,
            cfg,
            warm: None,
            solver_failures: 0,
            rejected_steps: 0,
        }
    }

    fn evaluate(&mut self, x: &Strategy) -> Result<Eval> {
        let theta = solve_theta(self.game, x)?;
        let mult =
            solve_multiplier_warm(self.game, x, &theta, &self.cfg.solver, self.warm.as_ref())?;
        if !mult.converged {
            self.solver_failures += 1;
            log::warn!(
                "multiplier solve did not converge (kkt {:e}, worst slack {:e})",
                mult.kkt_residual,
                mult.slacks.min()
            );
        }
        self.warm = Some(WarmStart::from(&mult));
        let field = vector_field(self.game, x, &mult.z);
        let eval = Eval {
            lyapunov: lyapunov_value(self.game, x),
            gap_z: equilibrium_gap(self.game, &mult.z),
            gap_x: equilibrium_gap(self.game, x),
            field,
            theta,
            mult,
        };
        Ok(eval)
    }

    fn record_at(&self, t: f64, x: &Strategy, eval: &Eval, step_size: f64) -> TraceRecord {
        TraceRecord {
            t,
            x: x.clone(),
            z: eval.mult.z.clone(),
            theta: eval.theta.theta,
            eps: eval.mult.eps,
            eta: eval.mult.eta,
            lyapunov: eval.lyapunov,
            gap_z: eval.gap_z,
            gap_x: eval.gap_x,
            step_size,
        }
    }

    /// Stage state for intermediate method points; rejects sign crossings.
    fn stage_state(&self, base: &[f64], dir: &[f64], scale: f64) -> Option<Strategy> {
        let coords: Vec<f64> = base
            .iter()
            .zip(dir)
            .map(|(&x, &d)| x + scale * d)
            .collect();
        if coords.iter().any(|&v| v <= 0.0) {
            return None;
        }
        Strategy::new(coords).ok()
    }

    /// One attempted advance by `h`. `None` means the step must be rejected.
    fn try_advance(&mut self, x: &Strategy, eval: &Eval, h: f64) -> Result<Option<Strategy>> {
        let raw: Vec<f64> = match self.cfg.method {
            Method::Euler => x
                .coords()
                .iter()
                .zip(&eval.field)
                .map(|(&xi, &v)| xi + h * v)
                .collect(),
            Method::Rk4 => {
                let k1 = &eval.field;
                let Some(x2) = self.stage_state(x.coords(), k1, 0.5 * h) else {
                    return Ok(None);
                };
                let e2 = self.evaluate(&x2)?;
                let k2 = vector_field(self.game, &x2, &e2.mult.z);
                let Some(x3) = self.stage_state(x.coords(), &k2, 0.5 * h) else {
                    return Ok(None);
                };
                let e3 = self.evaluate(&x3)?;
                let k3 = vector_field(self.game, &x3, &e3.mult.z);
                let Some(x4) = self.stage_state(x.coords(), &k3, h) else {
                    return Ok(None);
                };
                let e4 = self.evaluate(&x4)?;
                let k4 = vector_field(self.game, &x4, &e4.mult.z);
                x.coords()
                    .iter()
                    .enumerate()
                    .map(|(i, &xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect()
            }
        };
        if raw.iter().any(|&v| v <= 0.0) {
            return Ok(None);
        }
        let clamped: Vec<f64> = raw
            .iter()
            .map(|&v| v.max(self.cfg.x_floor))
            .collect();
        Ok(Some(Strategy::new(clamped)?))
    }
}

/// Clamp coordinates to at least 1e−9 and renormalize: integration starts
/// strictly interior.
pub fn interiorize(x0: &Strategy) -> Strategy {
    let coords: Vec<f64> = x0.coords().iter().map(|&v| v.max(1e-9)).collect();
    Strategy::new(coords).expect("positive mass")
}

/// Advance one accepted step from `x`, halving `h` on rejection down to
/// `h_min`. Returns the new state and the record describing `x`; the record
/// carries the actually used step size (0 when even `h_min` was rejected
/// and the state is returned unchanged).
pub fn step(g: &Game, x: &Strategy, h: f64, cfg: &RunConfig) -> Result<(Strategy, TraceRecord)> {
    let mut integrator = Integrator::new(g, cfg);
    let eval = integrator.evaluate(x)?;
    let mut hh = h;
    loop {
        match integrator.try_advance(x, &eval, hh)? {
            Some(next) if lyapunov_value(g, &next) >= eval.lyapunov - cfg.lyap_tol => {
                return Ok((next, integrator.record_at(0.0, x, &eval, hh)));
            }
            _ => {
                if hh <= cfg.h_min {
                    return Ok((x.clone(), integrator.record_at(0.0, x, &eval, 0.0)));
                }
                hh = (hh * 0.5).max(cfg.h_min);
            }
        }
    }
}

/// Integrate the orbit from `x0` until the multiplier gap certifies an
/// approximate equilibrium, time or step budgets run out, or the orbit is
/// stationary.
pub fn integrate(g: &Game, x0: &Strategy, cfg: &RunConfig) -> Result<RunResult> {
    integrate_with(g, x0, cfg, |_| Ok(()))
}

/// As [`integrate`], invoking `on_record` for every produced trace record.
pub fn integrate_with(
    g: &Game,
    x0: &Strategy,
    cfg: &RunConfig,
    mut on_record: impl FnMut(&TraceRecord) -> Result<()>,
) -> Result<RunResult> {
    let started = Instant::now();
    let mut integrator = Integrator::new(g, cfg);
    let mut x = interiorize(x0);
    let mut t = 0.0;
    let mut h = cfg.h;
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut patience = 0usize;
    let mut best: Option<usize> = None;
    let mut converged = false;

    loop {
        let eval = integrator.evaluate(&x)?;
        let mut rec = integrator.record_at(t, &x, &eval, 0.0);

        if best.map_or(true, |i| rec.gap_z < records[i].gap_z) {
            best = Some(records.len());
        }
        let qualifying = rec.gap_z <= cfg.tol_eq;
        patience = if qualifying { patience + 1 } else { 0 };
        let stationary = eval
            .field
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
            <= STATIONARY_TOL;

        let stop = if qualifying && (patience >= cfg.stop_patience || stationary) {
            converged = true;
            true
        } else {
            // stuck at a fixed point, out of time, or out of steps
            stationary || t >= cfg.t_max || records.len() + 1 >= cfg.max_steps
        };
        if stop {
            on_record(&rec)?;
            records.push(rec);
            break;
        }

        let mut hh = h;
        let mut advanced: Option<(Strategy, f64)> = None;
        loop {
            match integrator.try_advance(&x, &eval, hh)? {
                Some(next) if lyapunov_value(g, &next) >= eval.lyapunov - cfg.lyap_tol => {
                    advanced = Some((next, hh));
                    break;
                }
                _ => {
                    integrator.rejected_steps += 1;
                    if hh <= cfg.h_min {
                        break;
                    }
                    hh = (hh * 0.5).max(cfg.h_min);
                }
            }
        }
        let Some((next, used)) = advanced else {
            // cannot move within the Lyapunov and positivity tolerances
            log::warn!("integration stalled at t = {t}: no admissible step down to h_min");
            on_record(&rec)?;
            records.push(rec);
            break;
        };
        rec.step_size = used;
        on_record(&rec)?;
        records.push(rec);
        x = next;
        t += used;
        h = (used * 2.0).min(cfg.h);
    }

    let ret_idx = if converged {
        records.len() - 1
    } else {
        best.unwrap_or(records.len() - 1)
    };
    let final_rec = &records[ret_idx];
    Ok(RunResult {
        final_z: final_rec.z.clone(),
        final_gap: final_rec.gap_z,
        final_theta: final_rec.theta,
        converged,
        steps: records.len(),
        rejected_steps: integrator.rejected_steps,
        solver_failures: integrator.solver_failures,
        wallclock: started.elapsed().as_secs_f64(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn coordination() -> Game {
        Game::new(Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap()).unwrap()
    }

    fn cyclic3() -> Game {
        Game::new(
            Matrix::from_rows(&[
                vec![0.5, 1.0, 0.1],
                vec![0.1, 0.5, 1.0],
                vec![1.0, 0.1, 0.5],
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn field_zero_on_constant_payoffs() {
        let c = Matrix::from_rows(&[vec![0.7, 0.7], vec![0.7, 0.7]]).unwrap();
        let g = Game::new(c).unwrap();
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let z = Strategy::new(vec![0.3, 0.7]).unwrap();
        let v = vector_field(&g, &x, &z);
        assert!(v.iter().all(|&vi| vi == 0.0));
    }

    #[test]
    fn field_zero_at_vertices() {
        let g = coordination();
        let e1 = Strategy::pure(2, 0);
        let z = Strategy::new(vec![0.4, 0.6]).unwrap();
        let v = vector_field(&g, &e1, &z);
        // vertex coordinate moves by (Cz)₁ − x·Cz = 0; zero-mass rows by x_i = 0
        assert!(v.iter().all(|&vi| vi.abs() < 1e-16));
    }

    #[test]
    fn field_direct_arithmetic() {
        // Cz = (0.8, 0.6) via constant-column matrix and any z
        let c = Matrix::from_rows(&[vec![0.8, 0.8], vec![0.6, 0.6]]).unwrap();
        let g = Game::new(c).unwrap();
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let z = Strategy::new(vec![0.5, 0.5]).unwrap();
        let v = vector_field(&g, &x, &z);
        assert!((v[0] - 0.05).abs() < 1e-15);
        assert!((v[1] + 0.05).abs() < 1e-15);
    }

    #[test]
    fn field_tangency() {
        let g = cyclic3();
        let x = Strategy::new(vec![0.5, 0.3, 0.2]).unwrap();
        let z = Strategy::new(vec![0.2, 0.5, 0.3]).unwrap();
        let v = vector_field(&g, &x, &z);
        assert!(v.iter().sum::<f64>().abs() <= 1e-14);
    }

    #[test]
    fn step_is_exact_at_symmetric_fixed_point() {
        // constant payoffs: every multiplier leaves the field at zero
        let c = Matrix::from_rows(&[vec![0.7, 0.7], vec![0.7, 0.7]]).unwrap();
        let g = Game::new(c).unwrap();
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let cfg = RunConfig::default();
        let (next, rec) = step(&g, &x, cfg.h, &cfg).unwrap();
        assert_eq!(next.coords(), x.coords());
        assert_eq!(rec.step_size, cfg.h);
    }

    #[test]
    fn single_strategy_game_is_stationary() {
        let g = Game::new(Matrix::from_rows(&[vec![0.9]]).unwrap()).unwrap();
        let cfg = RunConfig::default();
        let res = integrate(&g, &Strategy::uniform(1), &cfg).unwrap();
        assert!(res.converged);
        assert_eq!(res.steps, 1);
        assert_eq!(res.final_z.coords(), &[1.0]);
        assert_eq!(res.final_gap, 0.0);
    }

    #[test]
    fn cyclic_uniform_start_converges_immediately() {
        let g = cyclic3();
        let mut cfg = RunConfig::default();
        cfg.tol_eq = 1e-4;
        let res = integrate(&g, &Strategy::uniform(3), &cfg).unwrap();
        assert!(res.converged);
        assert!(res.final_gap <= 1e-4);
        assert!(res.final_z.linf_distance(&Strategy::uniform(3)) <= 1e-3);
        assert!(res.steps <= cfg.stop_patience);
    }

    #[test]
    fn coordination_converges_to_an_equilibrium() {
        let g = coordination();
        let mut cfg = RunConfig::default();
        cfg.tol_eq = 1e-3;
        let x0 = Strategy::new(vec![0.6, 0.4]).unwrap();
        let res = integrate(&g, &x0, &cfg).unwrap();
        assert!(res.converged, "gap {}", res.final_gap);
        // biased start climbs to the dominant vertex
        assert!(res.final_z.linf_distance(&Strategy::pure(2, 0)) <= 1e-2);
        // Lyapunov never decreases beyond tolerance along the trace
        for pair in res.records.windows(2) {
            assert!(pair[1].lyapunov >= pair[0].lyapunov - 1e-8);
        }
    }

    #[test]
    fn euler_also_converges() {
        let g = coordination();
        let mut cfg = RunConfig::default();
        cfg.method = Method::Euler;
        cfg.tol_eq = 1e-3;
        cfg.h = 0.02;
        let x0 = Strategy::new(vec![0.6, 0.4]).unwrap();
        let res = integrate(&g, &x0, &cfg).unwrap();
        assert!(res.converged);
        assert!(res.final_gap <= 1e-3);
    }
}
