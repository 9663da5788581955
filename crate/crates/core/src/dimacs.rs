//! DIMACS CNF reading and writing.
//!
//! The projection set travels as `c ind v1 v2 ... 0` comment lines. Parity
//! constraints are read from `x`-prefixed lines (`x1 -2 3 0` means
//! `x1 ^ x2 ^ x3 = 1`, each negated literal flips the parity) but are never
//! written: they have to be lowered before export.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cnf::{Formula, Lit, Var, XorConstraint};

const IND_PER_LINE: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("formula still holds {0} native parity constraints; lower them to CNF before export")]
    UnmaterializedXors(usize),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("header declares {declared} clauses but {found} were read")]
    ClauseCount { declared: usize, found: usize },
    #[error("literal {lit} exceeds the declared {vars} variables")]
    VarOutOfRange { lit: i32, vars: u32 },
}

/// Renders `formula` as DIMACS text.
pub fn to_dimacs(formula: &Formula) -> Result<String, DimacsError> {
    if !formula.xors().is_empty() {
        return Err(DimacsError::UnmaterializedXors(formula.xors().len()));
    }
    let mut out = String::new();
    let proj: Vec<Var> = formula.projection().iter().copied().collect();
    for chunk in proj.chunks(IND_PER_LINE) {
        out.push_str("c ind");
        for v in chunk {
            let _ = write!(out, " {v}");
        }
        out.push_str(" 0\n");
    }
    let _ = writeln!(out, "p cnf {} {}", formula.num_vars(), formula.num_clauses());
    for clause in formula.clauses() {
        for l in clause.lits() {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
    Ok(out)
}

/// Parses DIMACS text, including `c ind` projection lines and `x` parity
/// lines. Clauses may span lines.
pub fn parse_dimacs(text: &str) -> Result<Formula, DimacsError> {
    let mut header: Option<(u32, usize)> = None;
    let mut formula = Formula::new();
    let mut projection: Vec<i32> = Vec::new();
    let mut pending: Vec<i32> = Vec::new();
    let mut clauses_read = 0usize;

    let syntax = |line: usize, msg: String| DimacsError::Syntax { line, msg };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            let mut toks = rest.split_whitespace();
            if toks.next() == Some("ind") {
                for tok in toks {
                    let v: i32 = tok
                        .parse()
                        .map_err(|_| syntax(lineno, format!("bad projection entry `{tok}`")))?;
                    if v == 0 {
                        break;
                    }
                    if v < 0 {
                        return Err(syntax(lineno, format!("negative projection entry {v}")));
                    }
                    projection.push(v);
                }
            }
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(syntax(lineno, "duplicate header".into()));
            }
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 3 || toks[0] != "cnf" {
                return Err(syntax(lineno, format!("malformed header `{line}`")));
            }
            let vars: u32 = toks[1]
                .parse()
                .map_err(|_| syntax(lineno, "bad variable count".into()))?;
            let clauses: usize = toks[2]
                .parse()
                .map_err(|_| syntax(lineno, "bad clause count".into()))?;
            formula = Formula::with_vars(vars);
            header = Some((vars, clauses));
            continue;
        }
        let (vars, _) = header.ok_or(DimacsError::MissingHeader)?;
        let (is_xor, body) = match line.strip_prefix('x') {
            Some(rest) => (true, rest),
            None => (false, line),
        };
        if is_xor && !pending.is_empty() {
            return Err(syntax(lineno, "parity line inside an unterminated clause".into()));
        }
        for tok in body.split_whitespace() {
            let lit: i32 = tok
                .parse()
                .map_err(|_| syntax(lineno, format!("bad literal `{tok}`")))?;
            if lit.unsigned_abs() > vars {
                return Err(DimacsError::VarOutOfRange { lit, vars });
            }
            if lit != 0 {
                pending.push(lit);
                continue;
            }
            if is_xor {
                let parity = pending.iter().filter(|&&l| l < 0).count() % 2 == 0;
                let xor = XorConstraint::new(pending.drain(..).map(|l| Var::new(l.unsigned_abs())), parity);
                formula.add_xor(xor);
            } else {
                let clause: Vec<Lit> = pending.drain(..).map(Lit::from_dimacs).collect();
                // a tautology still counts against the header
                formula.add_clause(clause);
                clauses_read += 1;
            }
        }
        if is_xor && !pending.is_empty() {
            return Err(syntax(lineno, "parity line must end with 0".into()));
        }
    }
    let (vars, declared) = header.ok_or(DimacsError::MissingHeader)?;
    if !pending.is_empty() {
        // tolerate a missing final terminator
        let clause: Vec<Lit> = pending.drain(..).map(Lit::from_dimacs).collect();
        formula.add_clause(clause);
        clauses_read += 1;
    }
    if clauses_read != declared {
        return Err(DimacsError::ClauseCount {
            declared,
            found: clauses_read,
        });
    }
    for v in projection {
        if v as u32 > vars {
            return Err(DimacsError::VarOutOfRange { lit: v, vars });
        }
        formula.add_to_projection(Var::new(v as u32));
    }
    Ok(formula)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_clause() {
        let mut f = Formula::with_vars(2);
        f.add_clause([Lit::from_dimacs(1), Lit::from_dimacs(-2)]);
        assert_eq!(to_dimacs(&f).unwrap(), "p cnf 2 1\n1 -2 0\n");
    }

    #[test]
    fn empty_formula() {
        assert_eq!(to_dimacs(&Formula::with_vars(3)).unwrap(), "p cnf 3 0\n");
    }

    #[test]
    fn projection_lines() {
        let mut f = Formula::with_vars(12);
        f.set_projection((1..=12).map(Var::new));
        let text = to_dimacs(&f).unwrap();
        assert!(text.starts_with("c ind 1 2 3 4 5 6 7 8 9 10 0\nc ind 11 12 0\np cnf 12 0\n"));
        let back = parse_dimacs(&text).unwrap();
        assert_eq!(back.projection(), f.projection());
    }

    #[test]
    fn refuses_native_xors() {
        let mut f = Formula::with_vars(2);
        f.add_xor(XorConstraint::new([Var::new(1), Var::new(2)], true));
        assert_eq!(to_dimacs(&f), Err(DimacsError::UnmaterializedXors(1)));
        f.materialize_xors(4);
        assert!(to_dimacs(&f).is_ok());
    }

    #[test]
    fn parses_xor_lines_and_multiline_clauses() {
        let text = "c hello\np cnf 3 2\n1 2\n3 0\n-1 0\nx1 -2 0\n";
        let f = parse_dimacs(text).unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.xors().len(), 1);
        // x1 ^ !x2 = 1  <=>  x1 ^ x2 = 0
        assert!(!f.xors()[0].parity());
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(parse_dimacs("1 2 0\n"), Err(DimacsError::MissingHeader));
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 3 0\n"),
            Err(DimacsError::VarOutOfRange { lit: 3, vars: 2 })
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 2\n1 0\n"),
            Err(DimacsError::ClauseCount { declared: 2, found: 1 })
        ));
        assert!(matches!(parse_dimacs("p cnf 2 1\n1 a 0\n"), Err(DimacsError::Syntax { line: 2, .. })));
    }
}
