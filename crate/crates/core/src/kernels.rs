//! Numerically stable scalar/vector kernels shared by the solvers: relative
//! entropy, weighted logsumexp, Jensen gaps, the advantage vector, the
//! Lyapunov quantity, and the equilibrium gap.

use crate::game::{Game, Strategy, CARRIER_TOL};
use crate::linalg::{dot, Matrix};
use crate::{Error, Result};

/// Relative entropy Σ_{i ∈ carrier(p)} p_i ln(p_i/q_i) in nats, with
/// 0·ln 0 = 0. Returns the +∞ sentinel when carrier(p) ⊄ carrier(q), so
/// callers can reason about feasibility through finiteness instead of
/// handling an error.
pub fn relative_entropy(p: &Strategy, q: &Strategy) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    let mut sum = 0.0;
    for &i in p.carrier() {
        let qi = q.get(i);
        if qi <= CARRIER_TOL {
            return Ok(f64::INFINITY);
        }
        let pi = p.get(i);
        sum += pi * (pi / qi).ln();
    }
    Ok(sum.max(0.0))
}

/// ln(Σ x_i exp{a·v_i}), max-shifted over the carrier of `x`; terms with
/// x_i = 0 are dropped before shifting so boundary strategies are exact.
pub fn weighted_logsumexp(x: &Strategy, v: &[f64], a: f64) -> Result<f64> {
    if x.dim() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: v.len(),
        });
    }
    debug_assert!(a > 0.0);
    let shift = x
        .carrier()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &i| m.max(a * v[i]));
    let mut sum = 0.0;
    for (i, &xi) in x.coords().iter().enumerate() {
        if xi > 0.0 {
            sum += xi * (a * v[i] - shift).exp();
        }
    }
    Ok(shift + sum.ln())
}

/// ln(Σ x_i exp{a·(Mz)_i}) − a·(x·Mz): nonnegative by Jensen, zero exactly
/// when Mz is constant on the carrier of x.
pub fn jensen_gap(x: &Strategy, m: &Matrix, z: &Strategy, a: f64) -> Result<f64> {
    if m.n() != x.dim() || z.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: m.n().min(z.dim()),
        });
    }
    let mz = m.matvec(z.coords());
    let lse = weighted_logsumexp(x, &mz, a)?;
    Ok(lse - a * dot(x.coords(), &mz))
}

/// Per-coordinate advantage vector
/// B_i = (x·Sx)⁻¹ Σ_j Cᵀ_ij x_j (Sx)_j − (Cᵀx)_i.
/// Satisfies Σ_i z_i B_i = (x·Sx)⁻¹ Σ_i x_i (Sx)_i (Cz)_i − x·Cz for every
/// strategy z.
pub fn advantage_vector(g: &Game, x: &Strategy) -> Result<Vec<f64>> {
    assert_eq!(g.n(), x.dim());
    let sx = g.s().matvec(x.coords());
    let xsx = dot(x.coords(), &sx);
    if !(xsx > 0.0) {
        return Err(Error::DegenerateGame { value: xsx });
    }
    let weighted: Vec<f64> = x
        .coords()
        .iter()
        .zip(&sx)
        .map(|(&xi, &si)| xi * si)
        .collect();
    let num = g.c().tr_matvec(&weighted);
    let ctx = g.c().tr_matvec(x.coords());
    Ok(num
        .iter()
        .zip(&ctx)
        .map(|(&nu, &ci)| nu / xsx - ci)
        .collect())
}

/// x·Sx = ‖Cᵀx‖², the quantity that is nondecreasing along orbits.
pub fn lyapunov_value(g: &Game, x: &Strategy) -> f64 {
    assert_eq!(g.n(), x.dim());
    let sx = g.s().matvec(x.coords());
    dot(x.coords(), &sx)
}

/// (Cz)_max − z·Cz. A strategy is an ε-approximate symmetric equilibrium
/// exactly when this is at most ε.
pub fn equilibrium_gap(g: &Game, z: &Strategy) -> f64 {
    assert_eq!(g.n(), z.dim());
    let cz = g.c().matvec(z.coords());
    let max = cz.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max - dot(z.coords(), &cz)
}

/// True when (Mx)_i deviates from x·Mx by at most `tol` on the carrier of x.
pub fn is_fixed_point(m: &Matrix, x: &Strategy, tol: f64) -> bool {
    debug_assert!(tol > 0.0);
    assert_eq!(m.n(), x.dim());
    let mx = m.matvec(x.coords());
    let mean = dot(x.coords(), &mx);
    x.carrier()
        .iter()
        .all(|&i| (mx[i] - mean).abs() <= tol)
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
    fn relative_entropy_of_identical_is_zero() {
        let p = Strategy::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(relative_entropy(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn relative_entropy_pure_vs_even() {
        let p = Strategy::new(vec![1.0, 0.0]).unwrap();
        let q = Strategy::new(vec![0.5, 0.5]).unwrap();
        let re = relative_entropy(&p, &q).unwrap();
        assert!((re - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_outside_carrier_is_infinite() {
        let p = Strategy::new(vec![0.5, 0.5]).unwrap();
        let q = Strategy::new(vec![1.0, 0.0]).unwrap();
        assert!(relative_entropy(&p, &q).unwrap().is_infinite());
    }

    #[test]
    fn relative_entropy_dimension_mismatch() {
        let p = Strategy::new(vec![0.5, 0.5]).unwrap();
        let q = Strategy::uniform(3);
        assert!(relative_entropy(&p, &q).is_err());
    }

    #[test]
    fn logsumexp_constant_vector() {
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let c = 3.25;
        let got = weighted_logsumexp(&x, &[c, c], 1.0).unwrap();
        assert!((got - c).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_ignores_zero_mass_terms() {
        let x = Strategy::new(vec![1.0, 0.0]).unwrap();
        // huge second component must not overflow or contribute
        let got = weighted_logsumexp(&x, &[2.0, 100.0], 1.0).unwrap();
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_direct_value() {
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let got = weighted_logsumexp(&x, &[0.0, 3.0_f64.ln()], 1.0).unwrap();
        // ln(0.5 + 1.5) = ln 2
        assert!((got - std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn jensen_gap_constant_matrix_is_zero() {
        let m = Matrix::from_rows(&[vec![0.4, 0.4], vec![0.4, 0.4]]).unwrap();
        let x = Strategy::new(vec![0.3, 0.7]).unwrap();
        let z = Strategy::new(vec![0.9, 0.1]).unwrap();
        let gap = jensen_gap(&x, &m, &z, 1.7).unwrap();
        assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn jensen_gap_point_mass_is_zero() {
        let m = Matrix::from_rows(&[vec![1.0, 0.3], vec![0.6, 0.9]]).unwrap();
        let x = Strategy::pure(2, 0);
        let z = Strategy::new(vec![0.4, 0.6]).unwrap();
        let gap = jensen_gap(&x, &m, &z, 2.0).unwrap();
        assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn jensen_gap_direct_value() {
        // x = (0.5, 0.5), Mz = (0, 1), a = 1: pick M, z realizing Mz = (0, 1)
        // via M = [[0,...]] is out of range for payoffs, so use a bare matrix.
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let x = Strategy::new(vec![0.5, 0.5]).unwrap();
        let z = Strategy::new(vec![0.5, 0.5]).unwrap();
        let gap = jensen_gap(&x, &m, &z, 1.0).unwrap();
        let expect = ((1.0 + std::f64::consts::E) / 2.0).ln() - 0.5;
        assert!((gap - expect).abs() < 1e-12);
        assert!((expect - 0.120115).abs() < 1e-6);
    }

    #[test]
    fn advantage_vector_constant_payoffs_vanishes() {
        let c = Matrix::from_rows(&[vec![0.7, 0.7], vec![0.7, 0.7]]).unwrap();
        let g = Game::new(c).unwrap();
        let x = Strategy::new(vec![0.4, 0.6]).unwrap();
        let b = advantage_vector(&g, &x).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn advantage_vector_single_coordinate() {
        let g = Game::new(Matrix::from_rows(&[vec![0.8]]).unwrap()).unwrap();
        let x = Strategy::uniform(1);
        let b = advantage_vector(&g, &x).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].abs() < 1e-15);
    }

    #[test]
    fn advantage_vector_matches_straight_line_oracle() {
        // independent re-evaluation of the defining formula, plain loops
        let g = coordination();
        for x in [
            Strategy::new(vec![0.5, 0.5]).unwrap(),
            Strategy::new(vec![0.6, 0.4]).unwrap(),
            Strategy::new(vec![0.15, 0.85]).unwrap(),
        ] {
            let n = g.n();
            let mut sx = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    sx[i] += g.s().get(i, j) * x.get(j);
                }
            }
            let mut xsx = 0.0;
            for i in 0..n {
                xsx += x.get(i) * sx[i];
            }
            let mut oracle = vec![0.0; n];
            for i in 0..n {
                let mut acc = 0.0;
                let mut ctx = 0.0;
                for j in 0..n {
                    acc += g.c().get(j, i) * x.get(j) * sx[j];
                    ctx += g.c().get(j, i) * x.get(j);
                }
                oracle[i] = acc / xsx - ctx;
            }
            let b = advantage_vector(&g, &x).unwrap();
            for i in 0..n {
                assert!((b[i] - oracle[i]).abs() < 1e-14);
            }
        }
        // at the symmetric point the advantage vanishes
        let b = advantage_vector(&g, &Strategy::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert!(b.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn lyapunov_basis_vector_reads_s_diagonal() {
        let g = coordination();
        let e1 = Strategy::pure(2, 0);
        assert!((lyapunov_value(&g, &e1) - g.s().get(0, 0)).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_all_ones_matrix_is_constant() {
        // with every payoff equal to 1, S = CCᵀ has all entries n, so
        // x·Sx = n(Σx)² = n for any strategy; at n = 1 this is exactly 1
        let c = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = Game::new(c).unwrap();
        for x in [
            Strategy::new(vec![0.2, 0.8]).unwrap(),
            Strategy::new(vec![0.7, 0.3]).unwrap(),
        ] {
            assert!((lyapunov_value(&g, &x) - 2.0).abs() < 1e-12);
        }
        let g1 = Game::new(Matrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        assert!((lyapunov_value(&g1, &Strategy::uniform(1)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_matches_independent_evaluation() {
        let g = cyclic3();
        let x = Strategy::uniform(3);
        // straight-line x·(C Cᵀ x) via ‖Cᵀx‖²
        let mut ctx = vec![0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                ctx[i] += g.c().get(j, i) * x.get(j);
            }
        }
        let expect: f64 = ctx.iter().map(|v| v * v).sum();
        assert!((lyapunov_value(&g, &x) - expect).abs() < 1e-14);
    }

    #[test]
    fn gap_dominant_row_pure_is_zero() {
        let c = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let g = Game::new(c).unwrap();
        let e1 = Strategy::pure(2, 0);
        assert!(equilibrium_gap(&g, &e1).abs() < 1e-15);
    }

    #[test]
    fn gap_cyclic_uniform_is_zero() {
        let g = cyclic3();
        let z = Strategy::uniform(3);
        assert!(equilibrium_gap(&g, &z).abs() < 1e-14);
    }

    #[test]
    fn gap_coordination_skewed() {
        let g = coordination();
        let z = Strategy::new(vec![0.9, 0.1]).unwrap();
        assert!((equilibrium_gap(&g, &z) - 0.064).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_pure_strategies_always() {
        let g = cyclic3();
        for i in 0..3 {
            assert!(is_fixed_point(g.c(), &Strategy::pure(3, i), 1e-12));
            assert!(is_fixed_point(g.s(), &Strategy::pure(3, i), 1e-12));
        }
    }

    #[test]
    fn fixed_point_cyclic_uniform() {
        let g = cyclic3();
        assert!(is_fixed_point(g.c(), &Strategy::uniform(3), 1e-12));
    }

    #[test]
    fn fixed_point_rejects_skewed_coordination() {
        let g = coordination();
        let x = Strategy::new(vec![0.9, 0.1]).unwrap();
        // (Cx)₁ = 0.92, (Cx)₂ = 0.28
        assert!(!is_fixed_point(g.c(), &x, 1e-6));
    }
}
