//! Toy job algebra executed by slave nodes.
//!
//! ```text
//! job     := op "[" [ item { "," item } ] "]"
//! op      := "sum" | "min" | "max" | "concat"
//! item    := integer | string
//! integer := [ "-" ] digit { digit }
//! string  := '"' { any char except '"' and '\' } '"'
//! ```
//!
//! Whitespace between tokens is ignored. `sum`, `min` and `max` take integers,
//! `concat` takes strings. Every operation is associative, so a job split into
//! contiguous chunks and folded back gives the same value as evaluating it
//! whole.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobOp {
    Sum,
    Min,
    Max,
    Concat,
}

impl JobOp {
    fn name(self) -> &'static str {
        match self {
            JobOp::Sum => "sum",
            JobOp::Min => "min",
            JobOp::Max => "max",
            JobOp::Concat => "concat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Item {
    Int(i64),
    Str(String),
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Int(v) => write!(f, "{v}"),
            Item::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Job {
    pub op: JobOp,
    pub items: Vec<Item>,
}

/// Result of evaluating a job. `Nothing` is the neutral value of `min`/`max`
/// over an empty list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Text(String),
    Nothing,
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Text(s) => write!(f, "\"{s}\""),
            Value::Nothing => f.write_str("nothing"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JobError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: &'static str },
    #[error("{op} expects {expected} items")]
    TypeMismatch {
        op: &'static str,
        expected: &'static str,
    },
    #[error("integer overflow")]
    Overflow,
}

impl fmt::Display for Job {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.op.name())?;
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{item}")?;
        }
        f.write_str("]")
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &'static str) -> JobError {
        JobError::Parse { pos: self.pos, msg }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8, msg: &'static str) -> Result<(), JobError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(msg))
        }
    }

    fn op(&mut self) -> Result<JobOp, JobError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_lowercase()) {
            self.pos += 1;
        }
        match &self.src[start..self.pos] {
            b"sum" => Ok(JobOp::Sum),
            b"min" => Ok(JobOp::Min),
            b"max" => Ok(JobOp::Max),
            b"concat" => Ok(JobOp::Concat),
            _ => {
                self.pos = start;
                Err(self.err("unknown operation"))
            }
        }
    }

    fn item(&mut self) -> Result<Item, JobError> {
        self.skip_ws();
        match self.peek() {
            Some(b'"') => {
                self.pos += 1;
                let start = self.pos;
                loop {
                    match self.peek() {
                        None => return Err(self.err("unterminated string")),
                        Some(b'\\') => return Err(self.err("escapes are not supported")),
                        Some(b'"') => break,
                        Some(_) => self.pos += 1,
                    }
                }
                let s = std::str::from_utf8(&self.src[start..self.pos])
                    .map_err(|_| self.err("string is not utf-8"))?
                    .to_owned();
                self.pos += 1;
                Ok(Item::Str(s))
            }
            Some(c) if c == b'-' || c.is_ascii_digit() => {
                let start = self.pos;
                self.pos += 1;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                text.parse().map(Item::Int).map_err(|_| JobError::Parse {
                    pos: start,
                    msg: "invalid integer",
                })
            }
            _ => Err(self.err("expected integer or string")),
        }
    }

    fn job(&mut self) -> Result<Job, JobError> {
        let op = self.op()?;
        self.expect(b'[', "expected '['")?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
        } else {
            loop {
                items.push(self.item()?);
                self.skip_ws();
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b']') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected ',' or ']'")),
                }
            }
        }
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err("trailing input"));
        }
        Ok(Job { op, items })
    }
}

impl FromStr for Job {
    type Err = JobError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parser {
            src: s.as_bytes(),
            pos: 0,
        }
        .job()
    }
}

fn ints(op: JobOp, values: impl IntoIterator<Item = Value>) -> Result<Vec<i64>, JobError> {
    let mismatch = JobError::TypeMismatch {
        op: op.name(),
        expected: "integer",
    };
    values
        .into_iter()
        .filter(|v| *v != Value::Nothing)
        .map(|v| match v {
            Value::Int(i) => Ok(i),
            _ => Err(mismatch.clone()),
        })
        .collect()
}

/// Fold already-evaluated values with `op`. Used both for direct evaluation
/// and for recombining sub-results in index order.
pub fn combine(op: JobOp, values: Vec<Value>) -> Result<Value, JobError> {
    match op {
        JobOp::Sum => ints(op, values)?
            .into_iter()
            .try_fold(0i64, |acc, v| acc.checked_add(v))
            .map(Value::Int)
            .ok_or(JobError::Overflow),
        JobOp::Min => Ok(ints(op, values)?
            .into_iter()
            .min()
            .map_or(Value::Nothing, Value::Int)),
        JobOp::Max => Ok(ints(op, values)?
            .into_iter()
            .max()
            .map_or(Value::Nothing, Value::Int)),
        JobOp::Concat => {
            let mut out = String::new();
            for v in values {
                match v {
                    Value::Text(s) => out.push_str(&s),
                    _ => {
                        return Err(JobError::TypeMismatch {
                            op: op.name(),
                            expected: "string",
                        })
                    }
                }
            }
            Ok(Value::Text(out))
        }
    }
}

impl Job {
    pub fn evaluate(&self) -> Result<Value, JobError> {
        let values = self.items.iter().map(|item| match item {
            Item::Int(v) => Value::Int(*v),
            Item::Str(s) => Value::Text(s.clone()),
        });
        match self.op {
            JobOp::Concat => {
                if self.items.iter().any(|i| matches!(i, Item::Int(_))) {
                    return Err(JobError::TypeMismatch {
                        op: self.op.name(),
                        expected: "string",
                    });
                }
            }
            _ => {
                if self.items.iter().any(|i| matches!(i, Item::Str(_))) {
                    return Err(JobError::TypeMismatch {
                        op: self.op.name(),
                        expected: "integer",
                    });
                }
            }
        }
        combine(self.op, values.collect())
    }

    /// Split into `n_parts` contiguous chunks whose sizes differ by at most
    /// one; earlier chunks take the remainder. Chunks may be empty.
    pub fn split(&self, n_parts: usize) -> Vec<Job> {
        assert!(n_parts >= 1, "split into zero parts");
        let base = self.items.len() / n_parts;
        let extra = self.items.len() % n_parts;
        let mut rest = self.items.as_slice();
        (0..n_parts)
            .map(|i| {
                let take = base + usize::from(i < extra);
                let (chunk, tail) = rest.split_at(take);
                rest = tail;
                Job {
                    op: self.op,
                    items: chunk.to_vec(),
                }
            })
            .collect()
    }
}
