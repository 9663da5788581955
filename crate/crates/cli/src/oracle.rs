//! Oracle adapters selected with `--oracle`.
//!
//! * `random:<seed>` answers with a random tree of the requested shape.
//! * `table:<path>` answers from a truth-table file.
//! * `exec:<cmd>` runs `<cmd>` through `sh -c` and talks to it line by line:
//!   the learner writes the query bitstring, the child replies `0` or `1`.

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;

use dtlearn_core::learn::{Oracle, OracleError};
use dtlearn_core::tree::{DecisionTree, Input, TreeSpec, TruthTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleSpecError {
    #[error("oracle must look like random:<seed>, table:<path> or exec:<cmd>, got `{0}`")]
    Syntax(String),
    #[error("bad random seed `{0}`")]
    Seed(String),
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Table {
        path: PathBuf,
        source: dtlearn_core::tree::TreeError,
    },
    #[error("truth table has {got} features, run has {expected}")]
    Width { expected: usize, got: usize },
    #[error("starting `{cmd}`: {source}")]
    Spawn { cmd: String, source: std::io::Error },
}

/// Parsed `--oracle` argument.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSpec {
    Random(u64),
    Table(PathBuf),
    Exec(String),
}

impl FromStr for OracleSpec {
    type Err = OracleSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| OracleSpecError::Syntax(s.into()))?;
        match kind {
            "random" => rest
                .parse()
                .map(OracleSpec::Random)
                .map_err(|_| OracleSpecError::Seed(rest.into())),
            "table" if !rest.is_empty() => Ok(OracleSpec::Table(rest.into())),
            "exec" if !rest.is_empty() => Ok(OracleSpec::Exec(rest.into())),
            _ => Err(OracleSpecError::Syntax(s.into())),
        }
    }
}

impl std::fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleSpec::Random(seed) => write!(f, "random:{seed}"),
            OracleSpec::Table(p) => write!(f, "table:{}", p.display()),
            OracleSpec::Exec(cmd) => write!(f, "exec:{cmd}"),
        }
    }
}

impl OracleSpec {
    pub fn open(&self, spec: TreeSpec) -> Result<Box<dyn Oracle>, OracleSpecError> {
        Ok(match self {
            OracleSpec::Random(seed) => Box::new(DecisionTree::random(spec, *seed)),
            OracleSpec::Table(path) => Box::new(load_table(path, spec.n_features)?),
            OracleSpec::Exec(cmd) => Box::new(ExecOracle::spawn(cmd)?),
        })
    }
}

pub fn load_table(path: &std::path::Path, n: usize) -> Result<TruthTable, OracleSpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| OracleSpecError::Read {
        path: path.into(),
        source,
    })?;
    let table = TruthTable::parse(&text).map_err(|source| OracleSpecError::Table {
        path: path.into(),
        source,
    })?;
    if table.n_features() != n {
        return Err(OracleSpecError::Width {
            expected: n,
            got: table.n_features(),
        });
    }
    Ok(table)
}

/// A child process answering one query per line.
pub struct ExecOracle {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl ExecOracle {
    pub fn spawn(cmd: &str) -> Result<ExecOracle, OracleSpecError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|source| OracleSpecError::Spawn { cmd: cmd.into(), source })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(ExecOracle { child, stdin, stdout })
    }
}

impl Oracle for ExecOracle {
    fn answer(&mut self, x: &Input) -> Result<bool, OracleError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| OracleError::Protocol("oracle input already closed".into()))?;
        writeln!(stdin, "{x}")?;
        stdin.flush()?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(OracleError::Protocol(format!("no reply to {x}: oracle closed its output")));
        }
        match line.trim_end_matches(['\n', '\r']) {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(OracleError::Protocol(format!("reply to {x} was `{other}`, expected 0 or 1"))),
        }
    }
}

impl Drop for ExecOracle {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if self.child.try_wait().ok().flatten().is_none() {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!("random:42".parse::<OracleSpec>().unwrap(), OracleSpec::Random(42));
        assert_eq!(
            "table:a/b.tt".parse::<OracleSpec>().unwrap(),
            OracleSpec::Table("a/b.tt".into())
        );
        assert_eq!(
            "exec:./bb --fast".parse::<OracleSpec>().unwrap(),
            OracleSpec::Exec("./bb --fast".into())
        );
        assert!("random:x".parse::<OracleSpec>().is_err());
        assert!("coin:1".parse::<OracleSpec>().is_err());
        assert!("table:".parse::<OracleSpec>().is_err());
        assert_eq!(OracleSpec::Random(7).to_string(), "random:7");
    }

    #[test]
    fn exec_round_trip() {
        // echoes the last bit
        let mut o = ExecOracle::spawn("while read q; do echo \"${q#${q%?}}\"; done").unwrap();
        assert!(o.answer(&"001".parse().unwrap()).unwrap());
        assert!(!o.answer(&"110".parse().unwrap()).unwrap());
    }

    #[test]
    fn exec_protocol_violation_names_the_reply() {
        let mut o = ExecOracle::spawn("read q; echo maybe").unwrap();
        let err = o.answer(&"01".parse().unwrap()).unwrap_err().to_string();
        assert!(err.contains("`maybe`"), "{err}");
        let err = o.answer(&"01".parse().unwrap()).unwrap_err().to_string();
        assert!(err.contains("closed") || err.contains("Broken pipe"), "{err}");
    }
}
