//! Episodic, time-augmented decision process over a network.
//!
//! Actions are applied at `t = 0..T−1`; the goal test runs on each arrival
//! state `t = 1..T`. Reaching the goal pays `+1`, arriving at `t = T`
//! anywhere else pays `−1`, and every other transition pays `0`. An
//! episode whose start state is already the goal succeeds at reset.

use rand::Rng;

use crate::error::{Error, Result};
use crate::horizon::HorizonSpec;
use crate::model::{PackedInput, PackedState, PbcnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeState {
    pub state: PackedState,
    pub t: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub next: TimeState,
    pub reward: i8,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct EpisodeEnv<'a> {
    model: &'a PbcnModel,
    horizon: &'a HorizonSpec,
    x0: PackedState,
    xd: PackedState,
    current: TimeState,
    episode_t: u32,
    done: bool,
    success: bool,
}

impl<'a> EpisodeEnv<'a> {
    pub fn new(
        model: &'a PbcnModel,
        horizon: &'a HorizonSpec,
        x0: PackedState,
        xd: PackedState,
    ) -> Result<Self> {
        for s in [x0, xd] {
            if s.width() != model.n() {
                return Err(Error::WidthMismatch {
                    expected: model.n(),
                    actual: s.width(),
                });
            }
        }
        Ok(Self {
            model,
            horizon,
            x0,
            xd,
            current: TimeState { state: x0, t: 0 },
            episode_t: horizon.t_min(),
            // Unusable until the first reset.
            done: true,
            success: false,
        })
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> TimeState {
        self.episode_t = self.horizon.sample_t(rng);
        self.current = TimeState {
            state: self.x0,
            t: 0,
        };
        self.success = self.x0 == self.xd;
        self.done = self.success;
        self.current
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        action: PackedInput,
        rng: &mut R,
    ) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        debug_assert!(self.current.t < self.episode_t);
        let state = self.model.step(self.current.state, action, rng);
        let next = TimeState {
            state,
            t: self.current.t + 1,
        };
        let (reward, done, success) = if state == self.xd {
            (1, true, true)
        } else if next.t == self.episode_t {
            (-1, true, false)
        } else {
            (0, false, false)
        };
        self.current = next;
        self.done = done;
        self.success = success;
        Ok(StepOutcome {
            next,
            reward,
            done,
            success,
        })
    }

    pub fn current(&self) -> TimeState {
        self.current
    }

    pub fn episode_t(&self) -> u32 {
        self.episode_t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn succeeded(&self) -> bool {
        self.success
    }

    pub fn model(&self) -> &'a PbcnModel {
        self.model
    }

    pub fn x0(&self) -> PackedState {
        self.x0
    }

    pub fn xd(&self) -> PackedState {
        self.xd
    }
}
