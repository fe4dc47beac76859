//! Literal preordering before search.
//!
//! Within clause `i`, literals are stably sorted by how often their
//! complement occurs in clauses `0..i`, most frequent first. A literal whose
//! complement is already likely to sit on the subpath closes it sooner, so
//! refutation work moves toward the front of the search.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::matrix::{Clause, Literal, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicFlag {
    #[default]
    None,
    Presort,
}

impl HeuristicFlag {
    pub fn apply(self, matrix: &Matrix) -> Matrix {
        match self {
            HeuristicFlag::None => matrix.clone(),
            HeuristicFlag::Presort => presort(matrix),
        }
    }
}

impl fmt::Display for HeuristicFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicFlag::None => "none",
            HeuristicFlag::Presort => "presort",
        })
    }
}

impl FromStr for HeuristicFlag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(HeuristicFlag::None),
            "presort" => Ok(HeuristicFlag::Presort),
            other => Err(format!("unknown heuristic {other:?}")),
        }
    }
}

pub fn presort(matrix: &Matrix) -> Matrix {
    let mut seen: HashMap<Literal, usize> = HashMap::new();
    let clauses = matrix
        .clauses()
        .iter()
        .map(|clause| {
            let mut literals = clause.literals.clone();
            literals.sort_by_key(|l| std::cmp::Reverse(seen.get(&l.complement()).copied().unwrap_or(0)));
            for lit in &clause.literals {
                *seen.entry(*lit).or_default() += 1;
            }
            Clause::new(literals)
        })
        .collect();
    matrix.with_clauses(clauses)
}
