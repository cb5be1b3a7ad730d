use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmdp::StateId;

use super::agents::Agent;
use super::tables::LearningRateSchedule;
use super::{Rng, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub steps: usize,
    pub reached_terminal: bool,
    pub total_reward: f64,
    pub alpha: f64,
    pub clip_events: u64,
}

/// Draws from a discrete distribution given as `(state, probability)` pairs.
pub fn sample_next(row: &[(StateId, f64)], rng: &mut Rng) -> StateId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(c, p) in row {
        acc += p;
        if u < acc {
            return c;
        }
    }
    // rounding: last state with positive mass
    row.iter()
        .rev()
        .find(|&&(_, p)| p > 0.0)
        .map(|&(c, _)| c)
        .expect("distribution with positive mass")
}

/// Runs one trial from `start` until a terminal state or the step cap. Every
/// transition uses the trial's learning rate `alpha(trial)` and is passed to
/// `on_transition` with its step index.
pub fn run_trial<A: Agent + ?Sized>(
    agent: &mut A,
    start: StateId,
    schedule: &LearningRateSchedule,
    trial: usize,
    caps: Caps,
    rng: &mut Rng,
    mut on_transition: impl FnMut(usize, &Transition),
) -> Result<TrialSummary> {
    if caps.max_steps == 0 {
        return Err(Error::InvalidParameter("max_steps must be positive".into()));
    }
    let alpha = schedule.alpha(trial);
    let clips_before = agent.clip_events();
    let mut s = start;
    let mut steps = 0;
    let mut total_reward = 0.0;
    while !agent.is_terminal(s) && steps < caps.max_steps {
        let t = agent.step(s, alpha, rng)?;
        on_transition(steps, &t);
        total_reward += t.r;
        s = t.s_next;
        steps += 1;
    }
    Ok(TrialSummary {
        trial,
        steps,
        reached_terminal: agent.is_terminal(s),
        total_reward,
        alpha,
        clip_events: agent.clip_events() - clips_before,
    })
}
