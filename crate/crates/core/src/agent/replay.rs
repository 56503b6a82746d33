//! Experience replay over contiguous same-episode windows.
//!
//! Transitions arrive in playback order and live in a fixed-capacity ring.
//! Sampling returns length-`J` windows of consecutive steps that never
//! cross an episode boundary; eviction from the head of the ring silently
//! invalidates the windows that lost their prefix.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::Transition;

use super::AgentError;

/// One stored transition plus the bookkeeping the window sampler needs.
#[derive(Debug, Clone)]
struct Entry {
    episode: u64,
    terminal: bool,
    transition: Transition,
}

/// A sampled length-`J` sub-trajectory; `terminal` refers to its last step.
#[derive(Debug, Clone)]
pub struct Window {
    /// Consecutive transitions of one episode, oldest first.
    pub steps: Vec<Transition>,
    /// True when the final step ended its episode.
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with a uniform window sampler.
#[derive(Debug)]
pub struct ReplayBuffer {
    entries: Vec<Entry>,
    capacity: usize,
    /// Index of the oldest entry once the ring has wrapped.
    head: usize,
}

impl ReplayBuffer {
    /// Creates an empty buffer holding at most `capacity` transitions.
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity > 0, "capacity must be positive");
        ReplayBuffer {
            entries: Vec::with_capacity(capacity),
            capacity,
            head: 0,
        }
    }

    /// Number of stored transitions.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when nothing is stored.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends one transition, evicting the oldest when full. `episode`
    /// must be non-decreasing across calls; `terminal` marks episode ends.
    pub fn push(&mut self, episode: u64, terminal: bool, transition: Transition) {
        let entry = Entry {
            episode,
            terminal,
            transition,
        };
        if self.entries.len() < self.capacity {
            self.entries.push(entry);
        } else {
            self.entries[self.head] = entry;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    fn entry(&self, logical: usize) -> &Entry {
        &self.entries[(self.head + logical) % self.entries.len().max(1)]
    }

    /// Logical start indices of every valid window of length `j`.
    ///
    /// Transitions are pushed in playback order, so a window is valid
    /// exactly when its first and last entries share an episode and are
    /// `j − 1` steps apart.
    fn window_starts(&self, j: usize) -> Vec<usize> {
        if j == 0 || self.entries.len() < j {
            return Vec::new();
        }
        (0..=self.entries.len() - j)
            .filter(|&s| {
                let first = self.entry(s);
                let last = self.entry(s + j - 1);
                first.episode == last.episode
                    && last.transition.step_index == first.transition.step_index + (j - 1)
            })
            .collect()
    }

    /// Number of complete windows of length `j` currently stored.
    pub fn num_windows(&self, j: usize) -> usize {
        self.window_starts(j).len()
    }

    /// Draws `batch` windows of length `j` uniformly (with replacement).
    /// Errors when fewer than `batch` complete windows exist.
    pub fn sample_windows(
        &self,
        rng: &mut ChaCha8Rng,
        batch: usize,
        j: usize,
    ) -> Result<Vec<Window>, AgentError> {
        let starts = self.window_starts(j);
        if starts.len() < batch {
            return Err(AgentError::BufferUnderfull {
                have: starts.len(),
                need: batch,
            });
        }
        Ok((0..batch)
            .map(|_| {
                let s = starts[rng.random_range(0..starts.len())];
                let steps = (0..j).map(|k| self.entry(s + k).transition.clone()).collect();
                Window {
                    steps,
                    terminal: self.entry(s + j - 1).terminal,
                }
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{RawAction, State};
    use crate::seeds;

    fn transition(step: usize, tag: f64) -> Transition {
        let state = State {
            d_norm: vec![tag],
            phi_norm: vec![0.0],
        };
        Transition {
            state: state.clone(),
            action: RawAction(vec![0.0]),
            reward: tag,
            next_state: state,
            step_index: step,
        }
    }

    /// Pushes `len`-step episodes in playback order.
    fn fill(buffer: &mut ReplayBuffer, episodes: u64, len: usize) {
        for e in 0..episodes {
            for t in 0..len {
                buffer.push(e, t == len - 1, transition(t, e as f64 * 1000.0 + t as f64));
            }
        }
    }

    #[test]
    fn windows_never_cross_episode_boundaries() {
        let mut buffer = ReplayBuffer::new(128);
        fill(&mut buffer, 10, 7);
        let mut rng = seeds::stream(23, "replay");
        let windows = buffer.sample_windows(&mut rng, 50, 3).unwrap();
        for w in &windows {
            let episode = (w.steps[0].reward / 1000.0).floor();
            for (k, step) in w.steps.iter().enumerate() {
                assert_eq!((step.reward / 1000.0).floor(), episode);
                assert_eq!(step.step_index, w.steps[0].step_index + k);
            }
            assert_eq!(w.terminal, w.steps.last().unwrap().step_index == 6);
        }
    }

    #[test]
    fn window_count_matches_enumeration() {
        // 5 episodes × 7 steps, window 3 → 5 · (7 − 3 + 1) complete windows.
        let mut buffer = ReplayBuffer::new(64);
        fill(&mut buffer, 5, 7);
        assert_eq!(buffer.num_windows(3), 5 * 5);
        assert_eq!(buffer.num_windows(7), 5);
        assert_eq!(buffer.num_windows(8), 0);
    }

    #[test]
    fn eviction_invalidates_partial_head_windows() {
        // Capacity 10 with 7-step episodes: 14 pushes evict episode 0
        // steps 0..=3, leaving 3 transitions of episode 0 (steps 4..6)
        // and all 7 of episode 1. Window 3: (3−3+1) + (7−3+1) = 6.
        let mut buffer = ReplayBuffer::new(10);
        fill(&mut buffer, 2, 7);
        assert_eq!(buffer.len(), 10);
        assert_eq!(buffer.num_windows(3), 6);
        // The oldest remaining transition is episode 0 step 4.
        assert_eq!(buffer.entry(0).transition.step_index, 4);
    }

    #[test]
    fn underfull_buffer_is_an_error() {
        let mut buffer = ReplayBuffer::new(32);
        fill(&mut buffer, 1, 4);
        let mut rng = seeds::stream(29, "replay-underfull");
        // 2 complete windows of length 3 exist; asking for 3 must fail.
        let err = buffer.sample_windows(&mut rng, 3, 3).unwrap_err();
        match err {
            AgentError::BufferUnderfull { have, need } => {
                assert_eq!((have, need), (2, 3));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let mut buffer = ReplayBuffer::new(64);
        fill(&mut buffer, 4, 9);
        let draw = |seed: u64| {
            let mut rng = seeds::stream(seed, "replay-det");
            buffer
                .sample_windows(&mut rng, 8, 4)
                .unwrap()
                .iter()
                .map(|w| w.steps[0].reward)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }
}
