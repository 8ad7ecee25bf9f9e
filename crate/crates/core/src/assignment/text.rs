//! Plain-text instance format:
//!
//! ```text
//! n S lambda_prime
//! u_11 ... u_1S
//! ...
//! u_n1 ... u_nS
//! ```

use super::{Assignment, AssignmentInstance};
use crate::{Error, Matrix, Result};

pub fn parse_instance(text: &str) -> Result<AssignmentInstance> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Invalid("empty assignment instance".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Invalid(format!(
            "header must be `n S lambda_prime`, got {header:?}"
        )));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| Error::Invalid(format!("bad n {:?}", fields[0])))?;
    let s: usize = fields[1]
        .parse()
        .map_err(|_| Error::Invalid(format!("bad S {:?}", fields[1])))?;
    let lambda: f64 = fields[2]
        .parse()
        .map_err(|_| Error::Invalid(format!("bad lambda_prime {:?}", fields[2])))?;

    let mut data = Vec::with_capacity(n * s);
    for row in 0..n {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::Invalid(format!("expected {n} reward rows, found {row}")))?;
        let values = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("line {}: bad reward {v:?}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != s {
            return Err(Error::Invalid(format!(
                "line {}: expected {s} rewards, got {}",
                lineno + 1,
                values.len()
            )));
        }
        data.extend(values);
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(Error::Invalid(format!("line {}: unexpected trailing data", lineno + 1)));
    }
    AssignmentInstance::new(Matrix::from_vec(n, s, data)?, lambda)
}

/// Labels on one line, then `objective=<value>`.
pub fn format_assignment(a: &Assignment) -> String {
    let labels: Vec<String> = a.labels.iter().map(usize::to_string).collect();
    format!("{}\nobjective={}\n", labels.join(" "), a.objective)
}
