//! Resumable, budgeted depth-first path search over a [`Matrix`].
//!
//! The literals of clause `d + 1` are the children of every node at depth
//! `d`. Pushing a literal whose complement is already on the subpath closes
//! that subpath and every complete path extending it; the search records the
//! closure with the exact number of complete paths it prunes.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use thiserror::Error;

use crate::exact::{ratio, Fraction};
use crate::matrix::{total_paths, Literal, Matrix, PathCount};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("search has already terminated ({0})")]
    Terminated(&'static str),
    #[error("budget must be at least one path")]
    ZeroBudget,
    #[error("path space is empty; explored fraction is undefined")]
    EmptyPathSpace,
}

/// One detected complementary pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureEvent {
    /// 1-based index of the clause whose literal closed the subpath.
    pub clause_index: usize,
    /// Complete paths extending the closed subpath: `Π_{i > clause_index} |C_i|`.
    pub pruned: PathCount,
    /// Closed paths after this event.
    pub cumulative_closed: PathCount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchStatus {
    Running,
    /// An open path exists, so the matrix is satisfiable and `w` is false.
    OpenFound(Vec<Literal>),
    /// Every path is closed, so the matrix is unsatisfiable and `w` is true.
    Exhausted,
}

impl SearchStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, SearchStatus::Running)
    }

    fn label(&self) -> &'static str {
        match self {
            SearchStatus::Running => "running",
            SearchStatus::OpenFound(_) => "open path found",
            SearchStatus::Exhausted => "exhausted",
        }
    }
}

/// Result of one call to [`SearchState::advance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advance {
    pub closures: u64,
    pub pruned: PathCount,
}

#[derive(Debug, Clone)]
pub struct SearchState {
    matrix: Arc<Matrix>,
    suffix: Vec<PathCount>,
    /// Literal index chosen in each clause on the current subpath.
    choices: Vec<usize>,
    /// Next literal to try in clause `choices.len()`.
    next: usize,
    positive: Vec<u32>,
    negative: Vec<u32>,
    closed: PathCount,
    total: PathCount,
    status: SearchStatus,
}

impl SearchState {
    pub fn new(matrix: impl Into<Arc<Matrix>>) -> Self {
        let matrix: Arc<Matrix> = matrix.into();
        let total = total_paths(&matrix);
        let k = matrix.alphabet_size() as usize;
        let status = if total.is_zero() {
            SearchStatus::Exhausted
        } else if matrix.is_empty() {
            SearchStatus::OpenFound(Vec::new())
        } else {
            SearchStatus::Running
        };
        SearchState {
            suffix: matrix.suffix_products(),
            matrix,
            choices: Vec::new(),
            next: 0,
            positive: vec![0; k],
            negative: vec![0; k],
            closed: PathCount::zero(),
            total,
            status,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn status(&self) -> &SearchStatus {
        &self.status
    }

    pub fn closed(&self) -> &PathCount {
        &self.closed
    }

    pub fn total(&self) -> &PathCount {
        &self.total
    }

    /// Paths not yet closed.
    pub fn remaining(&self) -> PathCount {
        &self.total - &self.closed
    }

    /// Current subpath as literals, root first.
    pub fn subpath(&self) -> Vec<Literal> {
        let clauses = self.matrix.clauses();
        self.choices
            .iter()
            .enumerate()
            .map(|(d, &i)| clauses[d].literals[i])
            .collect()
    }

    /// Exact explored fraction `closed / total`.
    pub fn fraction_explored(&self) -> Result<Fraction, SearchError> {
        if self.total.is_zero() {
            return Err(SearchError::EmptyPathSpace);
        }
        Ok(ratio(&self.closed, &self.total))
    }

    /// Resumes the search until at least `budget` complete paths have been
    /// pruned by this call, an open path is found, or every path is closed.
    /// The final closure may overshoot the budget.
    pub fn step_search(&mut self, budget: &PathCount) -> Result<Vec<ClosureEvent>, SearchError> {
        if budget.is_zero() {
            return Err(SearchError::ZeroBudget);
        }
        let mut events = Vec::new();
        self.advance(Some(budget), None, |clause_index, pruned, cumulative| {
            events.push(ClosureEvent {
                clause_index,
                pruned: pruned.clone(),
                cumulative_closed: cumulative.clone(),
            })
        })?;
        Ok(events)
    }

    /// Runs to termination, or until `max_closures` closure events have been
    /// seen in this call. Returns the number of closures.
    pub fn run(&mut self, max_closures: Option<u64>) -> Result<u64, SearchError> {
        Ok(self.advance(None, max_closures, |_, _, _| {})?.closures)
    }

    /// Core loop. `on_close(clause_index, pruned, cumulative_closed)` is called
    /// for every closure.
    pub fn advance<F>(
        &mut self,
        budget: Option<&PathCount>,
        max_closures: Option<u64>,
        mut on_close: F,
    ) -> Result<Advance, SearchError>
    where
        F: FnMut(usize, &PathCount, &PathCount),
    {
        if self.status.is_terminal() {
            return Err(SearchError::Terminated(self.status.label()));
        }
        let matrix = Arc::clone(&self.matrix);
        let clauses = matrix.clauses();
        let n = clauses.len();
        let mut consumed = PathCount::zero();
        let mut closures = 0u64;

        loop {
            let depth = self.choices.len();
            let clause = &clauses[depth];
            if self.next >= clause.len() {
                match self.choices.pop() {
                    Some(index) => {
                        let lit = clauses[depth - 1].literals[index];
                        self.unmark(lit);
                        self.next = index + 1;
                        continue;
                    }
                    None => {
                        // Every branch at the root is spent; conservation
                        // means all paths were closed along the way.
                        debug_assert_eq!(self.closed, self.total);
                        self.status = SearchStatus::Exhausted;
                        return Ok(Advance {
                            closures,
                            pruned: consumed,
                        });
                    }
                }
            }

            let lit = clause.literals[self.next];
            if self.occurrences(lit.complement()) > 0 {
                let pruned = &self.suffix[depth + 1];
                self.closed += pruned;
                consumed += pruned;
                closures += 1;
                on_close(depth + 1, pruned, &self.closed);
                self.next += 1;
                if self.closed == self.total {
                    self.status = SearchStatus::Exhausted;
                    return Ok(Advance {
                        closures,
                        pruned: consumed,
                    });
                }
                let over_budget = budget.is_some_and(|b| consumed >= *b);
                let over_cap = max_closures.is_some_and(|cap| closures >= cap);
                if over_budget || over_cap {
                    return Ok(Advance {
                        closures,
                        pruned: consumed,
                    });
                }
                continue;
            }

            self.mark(lit);
            self.choices.push(self.next);
            self.next = 0;
            if self.choices.len() == n {
                self.status = SearchStatus::OpenFound(self.subpath());
                return Ok(Advance {
                    closures,
                    pruned: consumed,
                });
            }
        }
    }

    fn occurrences(&self, lit: Literal) -> u32 {
        let s = lit.symbol as usize;
        if lit.negated {
            self.negative[s]
        } else {
            self.positive[s]
        }
    }

    fn mark(&mut self, lit: Literal) {
        let s = lit.symbol as usize;
        if lit.negated {
            self.negative[s] += 1;
        } else {
            self.positive[s] += 1;
        }
    }

    fn unmark(&mut self, lit: Literal) {
        let s = lit.symbol as usize;
        if lit.negated {
            self.negative[s] -= 1;
        } else {
            self.positive[s] -= 1;
        }
    }
}

/// Runs a fresh search on `matrix` to termination and reports whether an
/// open path exists.
pub fn is_satisfiable(matrix: impl Into<Arc<Matrix>>) -> bool {
    let mut state = SearchState::new(matrix);
    if !state.status().is_terminal() {
        state.run(None).expect("fresh search is running");
    }
    matches!(state.status(), SearchStatus::OpenFound(_))
}

/// Sum of `pruned` over a sequence of events.
pub fn total_pruned<'a>(events: impl IntoIterator<Item = &'a ClosureEvent>) -> BigUint {
    events.into_iter().map(|e| &e.pruned).sum()
}
