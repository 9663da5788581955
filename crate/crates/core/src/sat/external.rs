//! Escape hatch to any DIMACS-conformant solver binary.
//!
//! The formula is written to a temporary file whose path is appended to the
//! configured command line. The solver's `s ...` status line and `v ...`
//! value lines are parsed from standard output; exit codes are ignored since
//! solvers disagree on them.

use std::process::Command;

use crate::cnf::{Formula, Lit, Var};
use crate::dimacs::to_dimacs;

use super::{Model, SatError, SolveResult};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalSolver {
    /// Splits a whitespace-separated command line, program first.
    pub fn from_command_line(cmd: &str) -> Option<ExternalSolver> {
        let mut parts = cmd.split_whitespace().map(str::to_owned);
        let program = parts.next()?;
        Some(ExternalSolver {
            program,
            args: parts.collect(),
        })
    }
}

pub fn solve_external(formula: &Formula, assumptions: &[Lit], solver: &ExternalSolver) -> Result<SolveResult, SatError> {
    let mut copy = formula.clone();
    for &a in assumptions {
        if !copy.is_allocated(a.var()) {
            return Err(SatError::UnallocatedAssumption(a));
        }
        copy.add_clause([a]);
    }
    copy.materialize_xors(crate::cnf::DEFAULT_XOR_CHUNK);
    let text = to_dimacs(&copy).map_err(|e| SatError::External(e.to_string()))?;
    let file = tempfile::Builder::new()
        .suffix(".cnf")
        .tempfile()
        .map_err(|e| SatError::External(format!("temp file: {e}")))?;
    std::fs::write(file.path(), text).map_err(|e| SatError::External(format!("write: {e}")))?;
    let out = Command::new(&solver.program)
        .args(&solver.args)
        .arg(file.path())
        .output()
        .map_err(|e| SatError::External(format!("spawn `{}`: {e}", solver.program)))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let result = parse_output(&stdout, copy.num_vars())?;
    if let SolveResult::Sat(m) = &result {
        let full = |v: Var| m.value(v);
        if !copy.is_satisfied_by(full) {
            return Err(SatError::External("reported model does not satisfy the formula".into()));
        }
    }
    // drop auxiliaries introduced by lowering
    Ok(match result {
        SolveResult::Sat(m) => SolveResult::Sat(Model::new(m.values()[..formula.num_vars() as usize].to_vec())),
        SolveResult::Unsat => SolveResult::Unsat,
    })
}

fn parse_output(stdout: &str, num_vars: u32) -> Result<SolveResult, SatError> {
    let mut status = None;
    let mut values = vec![false; num_vars as usize];
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(match rest.trim() {
                "SATISFIABLE" => true,
                "UNSATISFIABLE" => false,
                other => return Err(SatError::External(format!("solver status `{other}`"))),
            });
        } else if let Some(rest) = line.strip_prefix('v') {
            for tok in rest.split_whitespace() {
                let l: i64 = tok
                    .parse()
                    .map_err(|_| SatError::External(format!("bad value token `{tok}`")))?;
                if l == 0 {
                    continue;
                }
                let v = l.unsigned_abs() as usize;
                if v == 0 || v > values.len() {
                    return Err(SatError::External(format!("value for unknown variable {l}")));
                }
                values[v - 1] = l > 0;
            }
        }
    }
    match status {
        Some(true) => Ok(SolveResult::Sat(Model::new(values))),
        Some(false) => Ok(SolveResult::Unsat),
        None => Err(SatError::External("no `s` status line in solver output".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sat_output() {
        let r = parse_output("c comment\ns SATISFIABLE\nv 1 -2\nv 3 0\n", 3).unwrap();
        assert_eq!(r, SolveResult::Sat(Model::new(vec![true, false, true])));
        assert_eq!(parse_output("s UNSATISFIABLE\n", 3).unwrap(), SolveResult::Unsat);
        assert!(parse_output("s UNKNOWN\n", 3).is_err());
        assert!(parse_output("", 3).is_err());
        assert!(parse_output("s SATISFIABLE\nv 4 0\n", 3).is_err());
    }

    #[cfg(unix)]
    #[test]
    fn shells_out_and_verifies() {
        let mut f = Formula::with_vars(2);
        f.add_clause([Lit::from_dimacs(1)]);
        f.add_clause([Lit::from_dimacs(-2)]);
        let good = ExternalSolver {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 's SATISFIABLE'; echo 'v 1 -2 0'".into()],
        };
        let r = solve_external(&f, &[], &good).unwrap();
        assert_eq!(r.model().unwrap().values(), &[true, false]);

        let liar = ExternalSolver {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 's SATISFIABLE'; echo 'v -1 -2 0'".into()],
        };
        assert!(solve_external(&f, &[], &liar).is_err());
    }
}
