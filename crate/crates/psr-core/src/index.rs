//! Symbol aliases and mixed-radix trajectory indexing.

use crate::{Caps, Error, Result};

/// Observation symbol (0-based).
pub type Obs = usize;
/// Action symbol (0-based).
pub type Act = usize;
/// Latent state (0-based).
pub type State = usize;

/// One step of an observable trajectory.
pub type Step = (Obs, Act);

/// Mixed-radix indexer for trajectories `(o_1, a_1, ..., o_L, a_L)`.
///
/// Step 1 is the most significant digit, so index order is lexicographic
/// order of trajectories. Within a step the digit is `o * A + a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajIndexer {
    pub n_obs: usize,
    pub n_act: usize,
    pub len: usize,
}

impl TrajIndexer {
    pub fn new(n_obs: usize, n_act: usize, len: usize) -> Self {
        TrajIndexer { n_obs, n_act, len }
    }

    /// Indexer that fails when the trajectory count exceeds the cap.
    pub fn checked(n_obs: usize, n_act: usize, len: usize, caps: &Caps, context: &str) -> Result<Self> {
        let radix = (n_obs as u128) * (n_act as u128);
        let count = radix.checked_pow(len as u32).unwrap_or(u128::MAX);
        if count > caps.max_trajectories as u128 {
            return Err(Error::Capacity {
                required: count.min(usize::MAX as u128) as usize,
                cap: caps.max_trajectories,
                context: context.to_string(),
            });
        }
        Ok(TrajIndexer { n_obs, n_act, len })
    }

    /// Digits per step.
    #[inline]
    pub fn radix(&self) -> usize {
        self.n_obs * self.n_act
    }

    /// Total number of trajectories of length `len`.
    pub fn count(&self) -> usize {
        self.radix().pow(self.len as u32)
    }

    #[inline]
    pub fn encode(&self, traj: &[Step]) -> usize {
        debug_assert_eq!(traj.len(), self.len);
        traj.iter().fold(0, |acc, &(o, a)| acc * self.radix() + o * self.n_act + a)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<Step> {
        let mut out = vec![(0, 0); self.len];
        for slot in out.iter_mut().rev() {
            let digit = idx % self.radix();
            *slot = (digit / self.n_act, digit % self.n_act);
            idx /= self.radix();
        }
        out
    }

    /// Index of the length-`l` prefix of the trajectory at `idx`.
    #[inline]
    pub fn prefix_index(&self, idx: usize, l: usize) -> usize {
        idx / self.radix().pow((self.len - l) as u32)
    }

    /// The `(obs, act)` pair at 0-based position `pos` of trajectory `idx`.
    #[inline]
    pub fn pair_at(&self, idx: usize, pos: usize) -> Step {
        let digit = self.prefix_index(idx, pos + 1) % self.radix();
        (digit / self.n_act, digit % self.n_act)
    }
}
