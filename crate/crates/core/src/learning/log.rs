//! Newline-delimited transition logs and bit-exact replay.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lmdp::StateId;

use super::agents::{IntraZLearner, ZLearner};
use super::tables::LearningRateSchedule;
use super::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub s: StateId,
    pub r: f64,
    pub s_next: StateId,
    pub task: usize,
    pub trial: usize,
    pub step: usize,
}

impl TransitionRecord {
    pub fn transition(&self) -> Transition {
        Transition {
            s: self.s,
            r: self.r,
            s_next: self.s_next,
        }
    }
}

pub fn write_records<W: Write>(mut out: W, records: &[TransitionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<TransitionRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Learners that can re-apply logged transitions.
pub trait Replay {
    fn replay_one(&mut self, record: &TransitionRecord, alpha: f64) -> Result<()>;
}

impl Replay for ZLearner {
    fn replay_one(&mut self, record: &TransitionRecord, alpha: f64) -> Result<()> {
        self.apply(&record.transition(), alpha)
    }
}

impl Replay for IntraZLearner {
    fn replay_one(&mut self, record: &TransitionRecord, alpha: f64) -> Result<()> {
        self.set_active(record.task);
        self.apply(&record.transition(), alpha)
    }
}

/// Re-applies a log with the per-trial learning rate of `schedule`.
pub fn replay<L: Replay>(learner: &mut L, records: &[TransitionRecord], schedule: &LearningRateSchedule) -> Result<()> {
    for r in records {
        learner.replay_one(r, schedule.alpha(r.trial))?;
    }
    Ok(())
}
