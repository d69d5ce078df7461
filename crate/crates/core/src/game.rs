//! Core domain types: payoff games over the probability simplex.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::linalg::{self, Matrix};
use crate::{Error, Result};

/// Coordinates at or below this threshold are treated as carrying no mass.
/// Below the double-precision noise floor left by renormalization.
pub const CARRIER_TOL: f64 = 1e-12;

/// |det| threshold factor and reciprocal-condition floor for the
/// nonsingularity check on payoff matrices.
pub const DET_TOL: f64 = 1e-10;
pub const RCOND_TOL: f64 = 1e-12;

/// A point of the probability simplex with carrier bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    x: Vec<f64>,
    carrier: Vec<usize>,
}

impl Strategy {
    /// Build a strategy from nonnegative mass, renormalizing to unit sum.
    pub fn new(x: Vec<f64>) -> Result<Strategy> {
        if x.is_empty() {
            return Err(Error::ZeroMass { sum: 0.0 });
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "strategy coordinates",
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeMass { index: i, value: v });
            }
        }
        let sum: f64 = x.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::ZeroMass { sum });
        }
        let mut x = x;
        if (sum - 1.0).abs() > f64::EPSILON {
            for v in &mut x {
                *v /= sum;
            }
        }
        let carrier = carrier_of(&x);
        Ok(Strategy { x, carrier })
    }

    pub fn uniform(n: usize) -> Strategy {
        Strategy::new(vec![1.0; n]).expect("n > 0")
    }

    /// Pure strategy: all mass on coordinate `i`.
    pub fn pure(n: usize, i: usize) -> Strategy {
        assert!(i < n);
        let mut x = vec![0.0; n];
        x[i] = 1.0;
        Strategy { x, carrier: vec![i] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.x[i]
    }

    /// Indices with mass above `CARRIER_TOL`.
    #[inline]
    pub fn carrier(&self) -> &[usize] {
        &self.carrier
    }

    pub fn is_carried(&self, i: usize) -> bool {
        self.x[i] > CARRIER_TOL
    }

    /// True when every carried coordinate of `self` is carried by `other`.
    pub fn carrier_within(&self, other: &Strategy) -> bool {
        self.carrier.iter().all(|&i| other.is_carried(i))
    }

    pub fn linf_distance(&self, other: &Strategy) -> f64 {
        self.x
            .iter()
            .zip(other.x.iter())
            .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()))
    }
}

impl Serialize for Strategy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.x.len()))?;
        for v in &self.x {
            seq.serialize_element(v)?;
        }
        seq.end()
    }
}

fn carrier_of(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v > CARRIER_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// How the payoff matrix entered the valid range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Provenance {
    Raw,
    Normalized { scale: f64, shift: f64 },
}

/// A symmetric bimatrix game described by its payoff matrix `C` with
/// 0 < C ≤ 1, together with the derived quadratic kernel S = CCᵀ and
/// conditioning metadata.
#[derive(Debug, Clone)]
pub struct Game {
    n: usize,
    c: Matrix,
    s: Matrix,
    cond_estimate: f64,
    invertible: bool,
    provenance: Provenance,
}

impl Game {
    pub fn new(c: Matrix) -> Result<Game> {
        Game::with_provenance(c, Provenance::Raw)
    }

    pub fn with_provenance(c: Matrix, provenance: Provenance) -> Result<Game> {
        let n = c.n();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = c.get(i, j);
                if !v.is_finite() || v <= 0.0 || v > 1.0 {
                    return Err(Error::PayoffOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        let s = c.mul_transpose();
        let det = linalg::lu_factor(&c).det();
        let cond_estimate = linalg::cond1(&c);
        let scale = c.max_abs();
        let invertible = det.abs() >= DET_TOL * scale.powi(n as i32)
            && cond_estimate.is_finite()
            && 1.0 / cond_estimate >= RCOND_TOL;
        Ok(Game {
            n,
            c,
            s,
            cond_estimate,
            invertible,
            provenance,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// S = CCᵀ.
    #[inline]
    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    pub fn is_invertible(&self) -> bool {
        self.invertible
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Error out unless the stored nonsingularity flag is set.
    pub fn require_invertible(&self) -> Result<()> {
        if self.invertible {
            Ok(())
        } else {
            Err(Error::SingularGame {
                det: linalg::lu_factor(&self.c).det(),
                rcond: if self.cond_estimate.is_finite() {
                    1.0 / self.cond_estimate
                } else {
                    0.0
                },
            })
        }
    }
}
