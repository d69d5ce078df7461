//! Independent ground truth for desk-scale games: support enumeration of
//! all symmetric equilibria, carrier-indifference fixed points, and
//! equilibrium verification. Exponential in n, capped at `ORACLE_N_MAX`.

use serde::Serialize;

use crate::game::{Game, Strategy};
use crate::kernels::equilibrium_gap;
use crate::linalg::{lu_factor, Matrix};
use crate::{Error, Result};

/// Hard cap on the enumeration dimension (2ⁿ − 1 supports).
pub const ORACLE_N_MAX: usize = 10;

/// Gap bound oracle-produced certificates must satisfy.
pub const CERT_TOL: f64 = 1e-9;

/// Residual bound on the pivoted support solves.
const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Off-support payoffs may exceed the support value by at most this.
const OFF_SUPPORT_TOL: f64 = 1e-9;

/// Negative entries in [−1e−12, 0) are clipped to zero; anything lower
/// rejects the support.
const CLIP_TOL: f64 = 1e-12;

/// Points closer than this in ∞-norm are duplicates.
const DEDUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateSource {
    Oracle,
    Dynamics,
}

/// A strategy together with its recomputed equilibrium gap.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumCertificate {
    pub z: Strategy,
    pub gap: f64,
    pub support: Vec<usize>,
    pub source: CertificateSource,
}

impl EquilibriumCertificate {
    pub fn new(g: &Game, z: Strategy, source: CertificateSource) -> EquilibriumCertificate {
        let gap = equilibrium_gap(g, &z);
        let support = z.carrier().to_vec();
        EquilibriumCertificate {
            z,
            gap,
            support,
            source,
        }
    }
}

/// Solve the indifference system on one support: (Mz)_i = v for i in the
/// support, Σ z_i = 1, z zero elsewhere. Returns (z, v) or None when the
/// subsystem is singular, fails its residual recheck, or leaves the simplex.
fn solve_support(m: &Matrix, support: &[usize]) -> Option<(Vec<f64>, f64)> {
    let k = support.len();
    let dim = k + 1;
    let mut a = Matrix::zeros(dim);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a.set(r, c, m.get(i, j));
        }
        a.set(r, k, -1.0);
    }
    for c in 0..k {
        a.set(k, c, 1.0);
    }
    let mut rhs = vec![0.0; dim];
    rhs[k] = 1.0;

    let lu = lu_factor(&a);
    let sol = match lu.solve(&rhs) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => {
            log::debug!("support {support:?}: singular indifference system, skipped");
            return None;
        }
    };
    // residual recheck
    let back = a.matvec(&sol);
    let resid = back
        .iter()
        .zip(&rhs)
        .fold(0.0_f64, |mx, (&u, &v)| mx.max((u - v).abs()));
    if resid > SOLVE_RESIDUAL_TOL {
        log::debug!("support {support:?}: solve residual {resid:e}, skipped");
        return None;
    }

    let mut z = vec![0.0; m.n()];
    for (r, &i) in support.iter().enumerate() {
        let zi = sol[r];
        if zi < -CLIP_TOL {
            return None;
        }
        z[i] = zi.max(0.0);
    }
    Some((z, sol[k]))
}

fn dedup_push(points: &mut Vec<Strategy>, cand: Strategy) {
    if points.iter().all(|p| p.linf_distance(&cand) > DEDUP_TOL) {
        points.push(cand);
    }
}

/// All carrier-indifference fixed points of the play matrix `m`: strategies
/// with (Mz)_i constant across their solving support.
pub fn enumerate_fixed_points(m: &Matrix, n_max: usize) -> Result<Vec<Strategy>> {
    let n = m.n();
    if n > n_max {
        return Err(Error::OracleTooLarge { n, n_max });
    }
    let mut out: Vec<Strategy> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        if let Some((z, _)) = solve_support(m, &support) {
            if let Ok(s) = Strategy::new(z) {
                dedup_push(&mut out, s);
            }
        }
    }
    Ok(out)
}

/// All symmetric Nash equilibria of the game, one certificate per distinct
/// strategy: support solutions whose off-support payoffs do not beat the
/// support value.
pub fn enumerate_symmetric_equilibria(
    g: &Game,
    n_max: usize,
) -> Result<Vec<EquilibriumCertificate>> {
    let n = g.n();
    if n > n_max {
        return Err(Error::OracleTooLarge { n, n_max });
    }
    let mut points: Vec<Strategy> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let Some((z, v)) = solve_support(g.c(), &support) else {
            continue;
        };
        let cz = g.c().matvec(&z);
        let beaten = (0..n)
            .filter(|i| !support.contains(i))
            .any(|j| cz[j] > v + OFF_SUPPORT_TOL);
        if beaten {
            continue;
        }
        let Ok(s) = Strategy::new(z) else { continue };
        dedup_push(&mut points, s);
    }
    let mut certs = Vec::with_capacity(points.len());
    for z in points {
        let cert = EquilibriumCertificate::new(g, z, CertificateSource::Oracle);
        if cert.gap > CERT_TOL {
            log::debug!(
                "dropping near-equilibrium with gap {:e} on support {:?}",
                cert.gap,
                cert.support
            );
            continue;
        }
        certs.push(cert);
    }
    Ok(certs)
}

/// All fixed points of the doubly symmetric companion (S, S). Requires an
/// invertible payoff matrix so the count is finite.
pub fn enumerate_ss_fixed_points(g: &Game, n_max: usize) -> Result<Vec<Strategy>> {
    g.require_invertible()?;
    enumerate_fixed_points(g.s(), n_max)
}

/// True when z is an ε-approximate symmetric equilibrium strategy.
pub fn verify_equilibrium(g: &Game, z: &Strategy, eps: f64) -> bool {
    debug_assert!(eps >= 0.0);
    equilibrium_gap(g, z) <= eps
}
