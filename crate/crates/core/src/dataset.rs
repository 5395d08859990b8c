//! Observed joint-action sequences, optionally annotated with the kinematic
//! context of each interaction.
//!
//! Datasets persist as JSONL, one record per line:
//!
//! ```text
//! {"t":1,"a1":1,"a2":2,"tau1":2.0,"tau2":3.0,"delta":1.0}
//! ```
//!
//! The kinematic fields are optional. A CSV export with the same columns is
//! also provided.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, JointAction};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {source}")]
    BadRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    BadAction {
        line: usize,
        #[source]
        source: GameError,
    },
    #[error("line {line}: record index {got} breaks the contiguous 1..T order (expected {expected})")]
    NonContiguous {
        line: usize,
        got: u64,
        expected: u64,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Kinematic context of one interaction: times-to-intersection of both
/// agents and their offset `delta = tau2 - tau1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub tau1: f64,
    pub tau2: f64,
    pub delta: f64,
}

/// Speeds and distances to the conflict point of both agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    v1: f64,
    v2: f64,
    d1: f64,
    d2: f64,
}

#[derive(Debug, Error)]
#[error("speeds and distances must be positive and finite, got v=({v1}, {v2}) d=({d1}, {d2})")]
pub struct BadKinematics {
    v1: f64,
    v2: f64,
    d1: f64,
    d2: f64,
}

impl KinematicState {
    pub fn new(v1: f64, v2: f64, d1: f64, d2: f64) -> Result<Self, BadKinematics> {
        let ok = [v1, v2, d1, d2].iter().all(|x| x.is_finite() && *x > 0.0);
        if !ok {
            return Err(BadKinematics { v1, v2, d1, d2 });
        }
        Ok(KinematicState { v1, v2, d1, d2 })
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }
    pub fn v2(&self) -> f64 {
        self.v2
    }
    pub fn d1(&self) -> f64 {
        self.d1
    }
    pub fn d2(&self) -> f64 {
        self.d2
    }

    /// Time to intersection of agent 1, `d1 / v1`.
    pub fn tau1(&self) -> f64 {
        self.d1 / self.v1
    }

    /// Time to intersection of agent 2, `d2 / v2`.
    pub fn tau2(&self) -> f64 {
        self.d2 / self.v2
    }

    /// Arrival offset `tau2 - tau1`.
    pub fn delta(&self) -> f64 {
        self.tau2() - self.tau1()
    }

    pub fn kinematics(&self) -> Kinematics {
        Kinematics {
            tau1: self.tau1(),
            tau2: self.tau2(),
            delta: self.delta(),
        }
    }

    /// The same state with the two agents exchanged.
    pub fn swapped(&self) -> KinematicState {
        KinematicState {
            v1: self.v2,
            v2: self.v1,
            d1: self.d2,
            d2: self.d1,
        }
    }
}

/// One observation: the 1-based step index, the joint action played, and the
/// optional kinematic context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: u64,
    pub action: JointAction,
    pub kinematics: Option<Kinematics>,
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    t: u64,
    a1: u8,
    a2: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

/// An ordered sequence of observed joint actions with contiguous indices
/// `1..=T`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<Record>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn from_actions(actions: Vec<JointAction>) -> Self {
        let records = actions
            .into_iter()
            .enumerate()
            .map(|(i, action)| Record {
                t: i as u64 + 1,
                action,
                kinematics: None,
            })
            .collect();
        Dataset { records }
    }

    /// Appends an observation, assigning the next index.
    pub fn push(&mut self, action: JointAction, kinematics: Option<Kinematics>) {
        self.records.push(Record {
            t: self.records.len() as u64 + 1,
            action,
            kinematics,
        });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn iter(&self) -> impl Iterator<Item = &Record> {
        self.records.iter()
    }

    /// Per-joint-action observation counts in `a(1)..a(4)` order.
    pub fn action_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for r in &self.records {
            counts[r.action.slot()] += 1;
        }
        counts
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), DataError> {
        for r in &self.records {
            let wire = RecordWire {
                t: r.t,
                a1: r.action.action_of_player1(),
                a2: r.action.action_of_player2(),
                tau1: r.kinematics.map(|k| k.tau1),
                tau2: r.kinematics.map(|k| k.tau2),
                delta: r.kinematics.map(|k| k.delta),
            };
            serde_json::to_writer(&mut out, &wire).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses a JSONL stream; errors carry the offending 1-based line number.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, DataError> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let wire: RecordWire = serde_json::from_str(&line)
                .map_err(|source| DataError::BadRecord { line: line_no, source })?;
            let action = JointAction::from_pair(wire.a1, wire.a2)
                .map_err(|source| DataError::BadAction { line: line_no, source })?;
            let expected = records.len() as u64 + 1;
            if wire.t != expected {
                return Err(DataError::NonContiguous {
                    line: line_no,
                    got: wire.t,
                    expected,
                });
            }
            let kinematics = match (wire.tau1, wire.tau2) {
                (Some(tau1), Some(tau2)) => Some(Kinematics {
                    tau1,
                    tau2,
                    delta: wire.delta.unwrap_or(tau2 - tau1),
                }),
                _ => None,
            };
            records.push(Record {
                t: wire.t,
                action,
                kinematics,
            });
        }
        Ok(Dataset { records })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "a1", "a2", "tau1", "tau2", "delta"])
            .map_err(csv_io)?;
        for r in &self.records {
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                r.t.to_string(),
                r.action.action_of_player1().to_string(),
                r.action.action_of_player2().to_string(),
                opt(r.kinematics.map(|k| k.tau1)),
                opt(r.kinematics.map(|k| k.tau2)),
                opt(r.kinematics.map(|k| k.delta)),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> DataError {
    DataError::Io(std::io::Error::other(e))
}
