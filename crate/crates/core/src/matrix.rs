//! Propositional matrices: an ordered list of clauses over a finite alphabet.
//!
//! A *path* through a matrix picks one literal from every clause, in clause
//! order. The path space has `Π |C_i|` members; a path is open when it holds
//! no complementary pair, and the matrix is satisfiable iff an open path
//! exists.

use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

/// Exact count of complete paths.
pub type PathCount = BigUint;

/// Default ceiling on the alphabet size accepted by [`brute_force_sat`].
pub const DEFAULT_ORACLE_LIMIT: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatrixError {
    #[error("literal uses symbol {symbol} but the alphabet has only {alphabet_size} symbols")]
    SymbolOutOfRange { symbol: u32, alphabet_size: u32 },
    #[error("alphabet size must be positive")]
    EmptyAlphabet,
    #[error("alphabet of {alphabet_size} symbols exceeds the truth-table oracle limit of {limit}")]
    OracleLimitExceeded { alphabet_size: u32, limit: u32 },
}

/// A propositional symbol or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub symbol: u32,
    pub negated: bool,
}

impl Literal {
    pub const fn pos(symbol: u32) -> Self {
        Literal { symbol, negated: false }
    }

    pub const fn neg(symbol: u32) -> Self {
        Literal { symbol, negated: true }
    }

    pub const fn complement(self) -> Self {
        Literal {
            symbol: self.symbol,
            negated: !self.negated,
        }
    }

    /// DIMACS encoding: symbol `i` is the integer `i + 1`, negative when negated.
    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.symbol) + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }

    /// Inverse of [`Literal::to_dimacs`]; `None` for zero.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        let symbol = u32::try_from(value.unsigned_abs() - 1).ok()?;
        Some(Literal {
            symbol,
            negated: value < 0,
        })
    }

    fn satisfied_by(self, assignment: u64) -> bool {
        let value = (assignment >> self.symbol) & 1 == 1;
        value != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "~p{}", self.symbol)
        } else {
            write!(f, "p{}", self.symbol)
        }
    }
}

/// A disjunction of literals. Literal order only matters to the search.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    pub literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause { literals }
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

impl FromIterator<Literal> for Clause {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Clause {
            literals: iter.into_iter().collect(),
        }
    }
}

/// An immutable, implicitly conjoined sequence of clauses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    clauses: Vec<Clause>,
    alphabet_size: u32,
}

impl Matrix {
    pub fn new(clauses: Vec<Clause>, alphabet_size: u32) -> Result<Self, MatrixError> {
        if alphabet_size == 0 {
            return Err(MatrixError::EmptyAlphabet);
        }
        for lit in clauses.iter().flat_map(|c| &c.literals) {
            if lit.symbol >= alphabet_size {
                return Err(MatrixError::SymbolOutOfRange {
                    symbol: lit.symbol,
                    alphabet_size,
                });
            }
        }
        Ok(Matrix { clauses, alphabet_size })
    }

    /// Builds a matrix from DIMACS-style signed integers, sizing the alphabet
    /// to the largest symbol used (at least 1).
    pub fn from_signed(clauses: &[&[i64]]) -> Self {
        let clauses: Vec<Clause> = clauses
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&v| Literal::from_dimacs(v).expect("nonzero literal"))
                    .collect()
            })
            .collect();
        let alphabet_size = clauses
            .iter()
            .flat_map(|c: &Clause| &c.literals)
            .map(|l| l.symbol + 1)
            .max()
            .unwrap_or(1);
        Matrix { clauses, alphabet_size }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// The common clause length, if every clause has the same length.
    pub fn uniform_width(&self) -> Option<usize> {
        let first = self.clauses.first()?.len();
        self.clauses.iter().all(|c| c.len() == first).then_some(first)
    }

    /// Returns a copy with the clauses replaced, keeping the alphabet.
    pub(crate) fn with_clauses(&self, clauses: Vec<Clause>) -> Self {
        Matrix {
            clauses,
            alphabet_size: self.alphabet_size,
        }
    }

    /// `suffix[i]` is the number of complete extensions of a subpath that
    /// covers clauses `0..i`, i.e. `Π_{k >= i} |C_k|`. `suffix[0]` is the
    /// size of the whole path space and `suffix[n]` is 1.
    pub(crate) fn suffix_products(&self) -> Vec<PathCount> {
        let n = self.clauses.len();
        let mut suffix = vec![PathCount::one(); n + 1];
        for i in (0..n).rev() {
            suffix[i] = &suffix[i + 1] * BigUint::from(self.clauses[i].len());
        }
        suffix
    }
}

/// Size of the path space: the product of the clause lengths.
pub fn total_paths(matrix: &Matrix) -> PathCount {
    matrix
        .clauses
        .iter()
        .fold(PathCount::one(), |acc, c| acc * BigUint::from(c.len()))
}

/// Truth-table satisfiability over all `2^k` assignments, with the default
/// alphabet limit.
pub fn brute_force_sat(matrix: &Matrix) -> Result<bool, MatrixError> {
    brute_force_sat_with_limit(matrix, DEFAULT_ORACLE_LIMIT)
}

pub fn brute_force_sat_with_limit(matrix: &Matrix, limit: u32) -> Result<bool, MatrixError> {
    let k = matrix.alphabet_size;
    if k > limit || k >= 64 {
        return Err(MatrixError::OracleLimitExceeded {
            alphabet_size: k,
            limit,
        });
    }
    Ok((0..1u64 << k).any(|assignment| {
        matrix
            .clauses
            .iter()
            .all(|c| c.literals.iter().any(|l| l.satisfied_by(assignment)))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_paths_is_product_of_widths() {
        let clause = Clause::new(vec![Literal::pos(0), Literal::pos(1), Literal::neg(2)]);
        let m = Matrix::new(vec![clause; 20], 4).unwrap();
        assert_eq!(total_paths(&m), BigUint::from(3_486_784_401u64));
        assert_eq!(m.suffix_products()[0], total_paths(&m));
        assert_eq!(m.suffix_products()[2], BigUint::from(3u64).pow(18));
    }

    #[test]
    fn empty_matrix_has_one_path() {
        let m = Matrix::new(vec![], 3).unwrap();
        assert_eq!(total_paths(&m), BigUint::one());
        assert!(brute_force_sat(&m).unwrap());
    }

    #[test]
    fn empty_clause_zeroes_path_space() {
        let m = Matrix::from_signed(&[&[1, 2], &[]]);
        assert_eq!(total_paths(&m), BigUint::from(0u32));
        assert!(!brute_force_sat(&m).unwrap());
    }

    #[test]
    fn oracle_small_cases() {
        assert!(!brute_force_sat(&Matrix::from_signed(&[&[1], &[-1]])).unwrap());
        assert!(brute_force_sat(&Matrix::from_signed(&[&[1, 2], &[-1, 2]])).unwrap());
    }

    #[test]
    fn oracle_limit_is_enforced() {
        let m = Matrix::new(vec![Clause::new(vec![Literal::pos(0)])], 21).unwrap();
        assert_eq!(
            brute_force_sat(&m),
            Err(MatrixError::OracleLimitExceeded {
                alphabet_size: 21,
                limit: 20
            })
        );
        assert!(brute_force_sat_with_limit(&m, 21).unwrap());
    }

    #[test]
    fn rejects_out_of_range_symbols() {
        let err = Matrix::new(vec![Clause::new(vec![Literal::neg(4)])], 4).unwrap_err();
        assert_eq!(
            err,
            MatrixError::SymbolOutOfRange {
                symbol: 4,
                alphabet_size: 4
            }
        );
        assert_eq!(Matrix::new(vec![], 0).unwrap_err(), MatrixError::EmptyAlphabet);
    }

    #[test]
    fn dimacs_literal_mapping() {
        assert_eq!(Literal::from_dimacs(3), Some(Literal::pos(2)));
        assert_eq!(Literal::from_dimacs(-1), Some(Literal::neg(0)));
        assert_eq!(Literal::from_dimacs(0), None);
        assert_eq!(Literal::neg(6).to_dimacs(), -7);
    }
}
