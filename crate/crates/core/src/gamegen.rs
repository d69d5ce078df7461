//! Seeded random game generation and payoff normalization into (0, 1].
//!
//! Generation uses ChaCha8 keyed by the spec seed, so identical specs
//! reproduce bit-identical matrices on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{Game, Provenance};
use crate::linalg::Matrix;
use crate::{Error, Result};

const MAX_JITTER_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Entries i.i.d. uniform on [min_entry, 1].
    Uniform,
    /// Circulant family generalizing the 3×3 rock–paper–scissors-like game.
    Cyclic,
    /// Dominant diagonal with weak off-diagonal payoffs.
    CoordinationLike,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    pub n: usize,
    pub seed: u64,
    pub min_entry: f64,
    pub jitter: f64,
    pub distribution: Distribution,
}

impl GenSpec {
    pub fn new(n: usize, seed: u64) -> GenSpec {
        GenSpec {
            n,
            seed,
            min_entry: 1e-3,
            jitter: 1e-6,
            distribution: Distribution::Uniform,
        }
    }

    pub fn with_distribution(mut self, distribution: Distribution) -> GenSpec {
        self.distribution = distribution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !(self.min_entry > 0.0 && self.min_entry < 1.0) {
            return Err(Error::PayoffOutOfRange {
                row: 0,
                col: 0,
                value: self.min_entry,
            });
        }
        Ok(())
    }
}

fn base_matrix(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Matrix {
    let n = spec.n;
    let mut m = Matrix::zeros(n);
    match spec.distribution {
        Distribution::Uniform => {
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, rng.gen_range(spec.min_entry..=1.0));
                }
            }
        }
        Distribution::Cyclic => {
            // row i carries 0.5 on the diagonal, 1.0 on the next strategy
            // (mod n), 0.1 elsewhere
            for i in 0..n {
                for k in 0..n {
                    let v = match k {
                        0 => 0.5,
                        1 => 1.0,
                        _ => 0.1,
                    };
                    m.set(i, (i + k) % n, v);
                }
            }
            if n == 1 {
                m.set(0, 0, 0.5);
            }
        }
        Distribution::CoordinationLike => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        m.set(i, j, 1.0);
                    } else {
                        m.set(i, j, rng.gen_range(spec.min_entry..=0.5));
                    }
                }
            }
        }
    }
    m
}

/// Draw a game from the spec, jittering the diagonal until the
/// nonsingularity check passes. Deterministic per seed.
pub fn generate(spec: &GenSpec) -> Result<Game> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut c = base_matrix(spec, &mut rng);
    for attempt in 0..MAX_JITTER_ATTEMPTS {
        let game = Game::new(c.clone())?;
        if game.is_invertible() {
            return Ok(game);
        }
        let bump = spec.jitter * (attempt + 1) as f64;
        for i in 0..spec.n {
            c.set(i, i, c.get(i, i) + bump);
        }
        // rescale into (0, 1] if the bump pushed past the cap
        let max = c.max_abs();
        if max > 1.0 {
            for i in 0..spec.n {
                for j in 0..spec.n {
                    c.set(i, j, c.get(i, j) / max);
                }
            }
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_JITTER_ATTEMPTS,
    })
}

/// Affine rescale a·raw + b·1 of an arbitrary finite matrix onto
/// [min_entry, 1], chosen as the identity when the input already fits.
/// Positive scaling preserves best-response structure; the gap scales by a.
pub fn normalize(raw: &Matrix, min_entry: f64) -> Result<Game> {
    if !(min_entry > 0.0 && min_entry < 1.0) {
        return Err(Error::PayoffOutOfRange {
            row: 0,
            col: 0,
            value: min_entry,
        });
    }
    let n = raw.n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let v = raw.get(i, j);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "raw payoff matrix",
                });
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi == lo {
        return Err(Error::ConstantMatrix);
    }
    let (a, b) = if lo >= min_entry && hi <= 1.0 {
        (1.0, 0.0)
    } else {
        let a = (1.0 - min_entry) / (hi - lo);
        (a, min_entry - a * lo)
    };
    let mut c = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = (a * raw.get(i, j) + b).clamp(min_entry, 1.0);
            c.set(i, j, v);
        }
    }
    Game::with_provenance(c, Provenance::Normalized { scale: a, shift: b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Strategy;
    use crate::kernels::equilibrium_gap;
    use crate::oracle::{enumerate_symmetric_equilibria, ORACLE_N_MAX};

    #[test]
    fn single_strategy_spec() {
        let g = generate(&GenSpec::new(1, 3)).unwrap();
        assert_eq!(g.n(), 1);
        let v = g.c().get(0, 0);
        assert!(v > 0.0 && v <= 1.0);
        assert!(g.is_invertible());
    }

    #[test]
    fn cyclic_family_matches_reference_and_is_invertible() {
        let g = generate(&GenSpec::new(3, 0).with_distribution(Distribution::Cyclic)).unwrap();
        let expect = [
            [0.5, 1.0, 0.1],
            [0.1, 0.5, 1.0],
            [1.0, 0.1, 0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.c().get(i, j), expect[i][j]);
            }
        }
        assert!(crate::linalg::lu_factor(g.c()).det().abs() > 1e-8);
    }

    #[test]
    fn same_seed_bit_identical() {
        let a = generate(&GenSpec::new(6, 42)).unwrap();
        let b = generate(&GenSpec::new(6, 42)).unwrap();
        assert_eq!(a.c().entries(), b.c().entries());
        let c = generate(&GenSpec::new(6, 43)).unwrap();
        assert_ne!(a.c().entries(), c.c().entries());
    }

    #[test]
    fn generated_games_satisfy_invariants() {
        for seed in 0..20 {
            let g = generate(&GenSpec::new(4, seed)).unwrap();
            assert!(g.is_invertible());
            for &v in g.c().entries() {
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn normalize_identity_when_admissible() {
        let raw = Matrix::from_rows(&[vec![0.4, 0.9], vec![0.7, 0.2]]).unwrap();
        let g = normalize(&raw, 1e-3).unwrap();
        assert_eq!(g.c().entries(), raw.entries());
        assert_eq!(
            g.provenance(),
            Provenance::Normalized {
                scale: 1.0,
                shift: 0.0
            }
        );
    }

    #[test]
    fn normalize_rps_preserves_uniform_equilibrium() {
        let rps = Matrix::from_rows(&[
            vec![0.0, 1.0, -1.0],
            vec![-1.0, 0.0, 1.0],
            vec![1.0, -1.0, 0.0],
        ])
        .unwrap();
        let g = normalize(&rps, 0.05).unwrap();
        for &v in g.c().entries() {
            assert!(v >= 0.05 && v <= 1.0);
        }
        let uniform = Strategy::uniform(3);
        assert!(equilibrium_gap(&g, &uniform).abs() <= 1e-12);
    }

    #[test]
    fn normalize_rejects_constant_matrix() {
        let raw = Matrix::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(normalize(&raw, 0.1), Err(Error::ConstantMatrix)));
    }

    #[test]
    fn normalize_preserves_equilibrium_supports_2x2() {
        // raw 2×2 games already inside (0,1], shifted and rescaled by hand:
        // supports of the equilibrium sets must agree
        for seed in 0..10 {
            let g_raw = generate(&GenSpec::new(2, 100 + seed)).unwrap();
            let mut shifted = Matrix::zeros(2);
            for i in 0..2 {
                for j in 0..2 {
                    shifted.set(i, j, 3.0 * g_raw.c().get(i, j) - 1.2);
                }
            }
            let g_norm = normalize(&shifted, 1e-3).unwrap();
            let eq_raw = enumerate_symmetric_equilibria(&g_raw, ORACLE_N_MAX).unwrap();
            let eq_norm = enumerate_symmetric_equilibria(&g_norm, ORACLE_N_MAX).unwrap();
            let mut sup_raw: Vec<Vec<usize>> = eq_raw.iter().map(|c| c.support.clone()).collect();
            let mut sup_norm: Vec<Vec<usize>> =
                eq_norm.iter().map(|c| c.support.clone()).collect();
            sup_raw.sort();
            sup_norm.sort();
            assert_eq!(sup_raw, sup_norm, "seed {seed}");
        }
    }
}
