//! DIMACS CNF input and output.
//!
//! Symbol `i` in the file (1-based) maps to symbol id `i - 1`. Clauses are
//! zero-terminated and may span lines; a lone `0` is the empty clause.

use std::fmt::Write as _;
use std::io::{self, BufRead};

use thiserror::Error;

use crate::matrix::{Clause, Literal, Matrix, MatrixError};

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `p cnf <vars> <clauses>` header")]
    MissingHeader,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCount { declared: usize, found: usize },
    #[error("last clause is not terminated by 0")]
    Unterminated,
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn syntax(line: usize, message: impl Into<String>) -> DimacsError {
    DimacsError::Syntax {
        line,
        message: message.into(),
    }
}

pub fn parse_str(text: &str) -> Result<Matrix, DimacsError> {
    parse(text.as_bytes())
}

pub fn parse<R: BufRead>(reader: R) -> Result<Matrix, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    let mut open = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        // SATLIB-style trailer.
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(syntax(lineno, "duplicate header"));
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(syntax(lineno, "expected `p cnf <vars> <clauses>`"));
            }
            let vars = fields[2]
                .parse::<u32>()
                .map_err(|_| syntax(lineno, format!("bad variable count {:?}", fields[2])))?;
            let count = fields[3]
                .parse::<usize>()
                .map_err(|_| syntax(lineno, format!("bad clause count {:?}", fields[3])))?;
            header = Some((vars, count));
            continue;
        }
        let (vars, _) = header.ok_or(DimacsError::MissingHeader)?;
        for token in trimmed.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| syntax(lineno, format!("bad literal {token:?}")))?;
            match Literal::from_dimacs(value) {
                None => {
                    clauses.push(Clause::new(std::mem::take(&mut current)));
                    open = false;
                }
                Some(lit) => {
                    if lit.symbol >= vars {
                        return Err(syntax(
                            lineno,
                            format!("literal {value} exceeds declared variable count {vars}"),
                        ));
                    }
                    current.push(lit);
                    open = true;
                }
            }
        }
    }

    let (vars, declared) = header.ok_or(DimacsError::MissingHeader)?;
    if open {
        return Err(DimacsError::Unterminated);
    }
    if declared != clauses.len() {
        return Err(DimacsError::ClauseCount {
            declared,
            found: clauses.len(),
        });
    }
    Ok(Matrix::new(clauses, vars.max(1))?)
}

pub fn to_string(matrix: &Matrix) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", matrix.alphabet_size(), matrix.len()).unwrap();
    for clause in matrix.clauses() {
        for lit in &clause.literals {
            write!(out, "{} ", lit.to_dimacs()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}
