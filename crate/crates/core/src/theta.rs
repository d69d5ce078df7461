//! Scalar dual solve for the advantage-scale θ_X: softmax primal
//! reconstruction plus monotone root finding on the dual variable α.
//!
//! The dual gap function g(α) = −Σ_i z_i(α) B_i + 1/(4α²), with z(α) the
//! softmax reweighting of x by exp{αB}, is strictly decreasing and has a
//! root exactly when the advantage vector has positive weighted range; the
//! root α* yields θ = 1/(2α*). When g stays positive up to `ALPHA_MAX` the
//! solve saturates and θ is treated as zero.

use crate::game::{Game, Strategy};
use crate::kernels::advantage_vector;
use crate::{Error, Result};

/// Saturation cap: the α = ∞ regime as a finite-precision branch.
pub const ALPHA_MAX: f64 = 1e9;

/// Initial root bracket in α; expandable down to `ALPHA_LO_FLOOR`.
const ALPHA_LO: f64 = 1e-6;
const ALPHA_LO_FLOOR: f64 = 1e-9;
const ALPHA_HI: f64 = 1e6;

/// Solution of the advantage-scale program at a state x.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    /// Optimal scale θ_X ≥ 0; equals 1/(2α) when not saturated, 0 otherwise.
    pub theta: f64,
    /// Dual variable at the root, or `ALPHA_MAX` when saturated.
    pub alpha: f64,
    /// The optimizing strategy (softmax reweighting of x at α).
    pub y: Strategy,
    /// |g(α)| at the returned α.
    pub dual_residual: f64,
    /// True when no root exists below `ALPHA_MAX` and θ is treated as 0.
    pub saturated: bool,
    /// Defensive flag: bracket expansion failed and the saturation branch
    /// was used as a fallback.
    pub bracket_fallback: bool,
}

/// z_i ∝ x_i exp{a·b_i}, computed max-shifted over the carrier of x.
/// The carrier of the result is contained in the carrier of x.
pub fn softmax_reweight(x: &Strategy, b: &[f64], a: f64) -> Result<Strategy> {
    if x.dim() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: b.len(),
        });
    }
    let shift = x
        .carrier()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &i| m.max(a * b[i]));
    let w: Vec<f64> = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            if xi > 0.0 {
                xi * (a * b[i] - shift).exp()
            } else {
                0.0
            }
        })
        .collect();
    Strategy::new(w)
}

/// Softmax-weighted mean and variance of b under x at tilt a.
fn softmax_stats(x: &Strategy, b: &[f64], a: f64) -> (f64, f64) {
    let shift = x
        .carrier()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &i| m.max(a * b[i]));
    let mut wsum = 0.0;
    let mut mean = 0.0;
    for (i, &xi) in x.coords().iter().enumerate() {
        if xi > 0.0 {
            let w = xi * (a * b[i] - shift).exp();
            wsum += w;
            mean += w * b[i];
        }
    }
    mean /= wsum;
    let mut var = 0.0;
    for (i, &xi) in x.coords().iter().enumerate() {
        if xi > 0.0 {
            let w = xi * (a * b[i] - shift).exp();
            let d = b[i] - mean;
            var += w * d * d;
        }
    }
    (mean, var / wsum)
}

/// g(a) = −Σ_i z_i(a) b_i + 1/(4a²); strictly decreasing in a.
pub fn dual_gap_function(x: &Strategy, b: &[f64], a: f64) -> f64 {
    debug_assert!(a > 0.0);
    let (mean, _) = softmax_stats(x, b, a);
    -mean + 1.0 / (4.0 * a * a)
}

fn saturated_solution(
    x: &Strategy,
    b: &[f64],
    residual: f64,
    bracket_fallback: bool,
) -> Result<ThetaSolution> {
    Ok(ThetaSolution {
        theta: 0.0,
        alpha: ALPHA_MAX,
        y: softmax_reweight(x, b, ALPHA_MAX)?,
        dual_residual: residual.abs(),
        saturated: true,
        bracket_fallback,
    })
}

/// Solve the advantage-scale program at x: root-find g in log-α space,
/// return θ = 1/(2α) and the softmax optimizer, or the saturated branch
/// when no root exists below `ALPHA_MAX`.
pub fn solve_theta(g: &Game, x: &Strategy) -> Result<ThetaSolution> {
    let b = advantage_vector(g, x)?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "advantage vector",
        });
    }

    let gap = |a: f64| dual_gap_function(x, &b, a);

    let g_cap = gap(ALPHA_MAX);
    if g_cap > 0.0 {
        return saturated_solution(x, &b, g_cap, false);
    }

    // bracket: g(lo) > 0 ≥ g(hi)
    let mut lo = ALPHA_LO;
    let mut g_lo = gap(lo);
    while g_lo <= 0.0 && lo > ALPHA_LO_FLOOR {
        lo = (lo * 1e-3).max(ALPHA_LO_FLOOR);
        g_lo = gap(lo);
    }
    if g_lo <= 0.0 {
        log::warn!("theta solve: no positive bracket endpoint above {ALPHA_LO_FLOOR:e}");
        return saturated_solution(x, &b, g_lo, true);
    }
    let mut hi = ALPHA_HI;
    if gap(hi) > 0.0 {
        hi = ALPHA_MAX;
    }

    // log-space bisection
    let mut ln_lo = lo.ln();
    let mut ln_hi = hi.ln();
    let mut alpha = (0.5 * (ln_lo + ln_hi)).exp();
    let mut g_mid = gap(alpha);
    for _ in 0..200 {
        if g_mid.abs() <= 1e-12 || (ln_hi - ln_lo) <= 1e-15 {
            break;
        }
        if g_mid > 0.0 {
            ln_lo = alpha.ln();
        } else {
            ln_hi = alpha.ln();
        }
        alpha = (0.5 * (ln_lo + ln_hi)).exp();
        g_mid = gap(alpha);
    }

    // Newton polish inside the bracket; g'(a) = −Var_z(b) − 1/(2a³)
    let (mut best_a, mut best_g) = (alpha, g_mid);
    let mut a = alpha;
    for _ in 0..8 {
        let (mean, var) = softmax_stats(x, &b, a);
        let gv = -mean + 1.0 / (4.0 * a * a);
        if gv.abs() < best_g.abs() {
            best_a = a;
            best_g = gv;
        }
        let dg = -var - 1.0 / (2.0 * a * a * a);
        if dg == 0.0 {
            break;
        }
        let next = a - gv / dg;
        if !next.is_finite() || next <= ln_lo.exp() || next >= ln_hi.exp() {
            break;
        }
        if (next - a).abs() <= f64::EPSILON * a {
            a = next;
            let gv = gap(a);
            if gv.abs() < best_g.abs() {
                best_a = a;
                best_g = gv;
            }
            break;
        }
        a = next;
    }

    let alpha = best_a;
    Ok(ThetaSolution {
        theta: 1.0 / (2.0 * alpha),
        alpha,
        y: softmax_reweight(x, &b, alpha)?,
        dual_residual: best_g.abs(),
        saturated: false,
        bracket_fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn coordination() -> Game {
        Game::new(Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap()).unwrap()
    }

    #[test]
    fn softmax_zero_advantage_reproduces_x() {
        let x = Strategy::new(vec![0.3, 0.7]).unwrap();
        let z = softmax_reweight(&x, &[0.0, 0.0], 5.0).unwrap();
        assert!(x.linf_distance(&z) < 1e-15);
    }

    #[test]
    fn softmax_large_tilt_concentrates_on_argmax() {
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let z = softmax_reweight(&x, &[1.0, 0.0], 1e3).unwrap();
        assert!((z.get(0) - 1.0).abs() < 1e-12);
        assert!(z.get(1) < 1e-12);
    }

    #[test]
    fn softmax_direct_arithmetic() {
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let z = softmax_reweight(&x, &[3.0_f64.ln(), 0.0], 1.0).unwrap();
        assert!((z.get(0) - 0.75).abs() < 1e-14);
        assert!((z.get(1) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn softmax_carrier_containment() {
        let x = Strategy::new(vec![0.0, 0.4, 0.6]).unwrap();
        let z = softmax_reweight(&x, &[9.0, -1.0, 1.0], 2.0).unwrap();
        assert_eq!(z.get(0), 0.0);
        assert!(z.carrier_within(&x));
    }

    #[test]
    fn dual_gap_zero_advantage() {
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        for a in [0.1, 1.0, 10.0] {
            let g = dual_gap_function(&x, &[0.0, 0.0], a);
            assert!((g - 1.0 / (4.0 * a * a)).abs() < 1e-15);
            assert!(g > 0.0);
        }
        assert!((dual_gap_function(&x, &[0.0, 0.0], 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_gap_decreasing_on_grid() {
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let b = [0.2, -0.2];
        // direct evaluation at a = 2 against plain arithmetic
        let w0 = 0.5 * (2.0_f64 * 0.2).exp();
        let w1 = 0.5 * (2.0_f64 * -0.2).exp();
        let mean = (w0 * 0.2 + w1 * -0.2) / (w0 + w1);
        let expect = -mean + 1.0 / 16.0;
        assert!((dual_gap_function(&x, &b, 2.0) - expect).abs() < 1e-14);
        // strictly decreasing scan
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let a = 1e-2 * (1e4_f64).powf(k as f64 / 49.0);
            let g = dual_gap_function(&x, &b, a);
            assert!(g < prev + 1e-12);
            prev = g;
        }
    }

    #[test]
    fn solve_theta_constant_matrix_saturates() {
        let c = Matrix::from_rows(&[vec![0.6, 0.6], vec![0.6, 0.6]]).unwrap();
        let g = Game::new(c).unwrap();
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let sol = solve_theta(&g, &x).unwrap();
        assert!(sol.saturated);
        assert_eq!(sol.theta, 0.0);
        assert!(sol.y.linf_distance(&x) < 1e-12);
    }

    #[test]
    fn solve_theta_single_strategy_game() {
        let g = Game::new(Matrix::from_rows(&[vec![0.9]]).unwrap()).unwrap();
        let x = Strategy::uniform(1);
        let sol = solve_theta(&g, &x).unwrap();
        assert_eq!(sol.theta, 0.0);
        assert_eq!(sol.y.coords(), &[1.0]);
    }

    #[test]
    fn solve_theta_coordination_interior() {
        let g = coordination();
        let x = Strategy::new(vec![0.6, 0.4]).unwrap();
        let sol = solve_theta(&g, &x).unwrap();
        assert!(!sol.saturated);
        assert!(sol.theta > 0.0);
        assert_eq!(sol.theta, 1.0 / (2.0 * sol.alpha));
        assert!(sol.dual_residual <= 1e-10);
        // constraint slack at the optimizer: Σ y_i B_i ≥ θ² − residual
        let b = advantage_vector(&g, &x).unwrap();
        let lhs: f64 = sol
            .y
            .coords()
            .iter()
            .zip(&b)
            .map(|(&z, &bi)| z * bi)
            .sum();
        assert!(lhs - sol.theta * sol.theta >= -1e-8);
        assert!(sol.y.carrier_within(&x));
    }
}
