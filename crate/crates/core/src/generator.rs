//! Seeded random matrices with fixed clause width and distinct symbols per
//! clause.
//!
//! Streams are portable: every draw comes from `ChaCha8Rng::seed_from_u64`
//! (rand_chacha), integers in `0..a` use rejection sampling on `next_u32`,
//! and the sign is the low bit of a separate `next_u32`. Instance `i` of a
//! corpus is generated from [`instance_seed`]`(seed, i)`, the `(i + 1)`-th
//! output of a SplitMix64 sequence started at `seed`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{Clause, Literal, Matrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("{lits_per_clause} distinct literals per clause cannot be drawn from {alphabet_size} symbols")]
    WidthExceedsAlphabet { lits_per_clause: u32, alphabet_size: u32 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_clauses: u32,
    pub lits_per_clause: u32,
    pub alphabet_size: u32,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n_clauses: u32, lits_per_clause: u32, alphabet_size: u32, seed: u64) -> Self {
        GeneratorConfig {
            n_clauses,
            lits_per_clause,
            alphabet_size,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.n_clauses == 0 {
            return Err(GeneratorError::NonPositive("n_clauses"));
        }
        if self.lits_per_clause == 0 {
            return Err(GeneratorError::NonPositive("lits_per_clause"));
        }
        if self.alphabet_size == 0 {
            return Err(GeneratorError::NonPositive("alphabet_size"));
        }
        if self.lits_per_clause > self.alphabet_size {
            return Err(GeneratorError::WidthExceedsAlphabet {
                lits_per_clause: self.lits_per_clause,
                alphabet_size: self.alphabet_size,
            });
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        GeneratorConfig { seed, ..self }
    }
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of corpus instance `index`.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    splitmix64_finalize(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

fn uniform_below(rng: &mut ChaCha8Rng, bound: u32) -> u32 {
    debug_assert!(bound > 0);
    let span = 1u64 << 32;
    let zone = span - span % u64::from(bound);
    loop {
        let x = u64::from(rng.next_u32());
        if x < zone {
            return (x % u64::from(bound)) as u32;
        }
    }
}

pub fn generate(config: &GeneratorConfig) -> Result<Matrix, GeneratorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.lits_per_clause as usize;
    let clauses = (0..config.n_clauses)
        .map(|_| {
            let mut literals: Vec<Literal> = Vec::with_capacity(width);
            while literals.len() < width {
                let symbol = uniform_below(&mut rng, config.alphabet_size);
                if literals.iter().any(|l| l.symbol == symbol) {
                    continue;
                }
                let negated = rng.next_u32() & 1 == 1;
                literals.push(Literal { symbol, negated });
            }
            Clause::new(literals)
        })
        .collect();
    Ok(Matrix::new(clauses, config.alphabet_size).expect("symbols drawn below alphabet size"))
}

pub fn generate_corpus(config: &GeneratorConfig, count: usize) -> Result<Vec<Matrix>, GeneratorError> {
    config.validate()?;
    if count == 0 {
        return Err(GeneratorError::NonPositive("count"));
    }
    (0..count as u64)
        .map(|i| generate(&config.with_seed(instance_seed(config.seed, i))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn full_size_clause_shape() {
        let m = generate(&GeneratorConfig::new(20, 3, 4, 7)).unwrap();
        assert_eq!(m.len(), 20);
        assert_eq!(m.alphabet_size(), 4);
        for c in m.clauses() {
            let symbols: HashSet<u32> = c.literals.iter().map(|l| l.symbol).collect();
            assert_eq!(c.len(), 3);
            assert_eq!(symbols.len(), 3);
            assert!(symbols.iter().all(|&s| s < 4));
        }
    }

    #[test]
    fn full_width_clause_mentions_every_symbol() {
        let m = generate(&GeneratorConfig::new(10, 5, 5, 1)).unwrap();
        for c in m.clauses() {
            let symbols: HashSet<u32> = c.literals.iter().map(|l| l.symbol).collect();
            assert_eq!(symbols, (0..5).collect());
        }
    }

    #[test]
    fn seeded_generation_is_repeatable() {
        let cfg = GeneratorConfig::new(20, 3, 4, 99);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_ne!(generate(&cfg).unwrap(), generate(&cfg.with_seed(100)).unwrap());
    }

    #[test]
    fn rejects_width_above_alphabet() {
        let err = generate(&GeneratorConfig::new(3, 5, 4, 0)).unwrap_err();
        assert_eq!(
            err,
            GeneratorError::WidthExceedsAlphabet {
                lits_per_clause: 5,
                alphabet_size: 4
            }
        );
        assert!(generate(&GeneratorConfig::new(0, 1, 4, 0)).is_err());
    }

    #[test]
    fn corpus_instances_use_derived_seeds() {
        let cfg = GeneratorConfig::new(20, 3, 4, 5);
        let one = generate_corpus(&cfg, 1).unwrap();
        assert_eq!(one, vec![generate(&cfg.with_seed(instance_seed(5, 0))).unwrap()]);
        let a = generate_corpus(&cfg, 750).unwrap();
        assert_eq!(a.len(), 750);
        assert_eq!(a, generate_corpus(&cfg, 750).unwrap());
        assert!(a.iter().all(|m| m.len() == 20 && m.uniform_width() == Some(3)));
        assert!(generate_corpus(&cfg, 0).is_err());
    }

    #[test]
    fn instance_seed_matches_splitmix_reference() {
        // First outputs of SplitMix64 seeded with 0 (Vigna's reference values).
        assert_eq!(instance_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(instance_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn negation_rate_is_near_half() {
        let corpus = generate_corpus(&GeneratorConfig::new(20, 3, 4, 2024), 200).unwrap();
        let (neg, total) = corpus
            .iter()
            .flat_map(|m| m.clauses())
            .flat_map(|c| &c.literals)
            .fold((0u64, 0u64), |(n, t), l| (n + u64::from(l.negated), t + 1));
        assert!(total >= 10_000);
        let rate = neg as f64 / total as f64;
        assert!((rate - 0.5).abs() <= 0.02, "rate {rate}");
    }
}
