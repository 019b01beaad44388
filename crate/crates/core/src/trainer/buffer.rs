use serde::{Deserialize, Serialize};

/// One agent-step as recorded during collection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub features: Vec<f64>,
    /// Pre-squash Gaussian sample.
    pub flight_raw: [f64; 2],
    pub alloc: Vec<f64>,
    pub log_prob_flight: f64,
    pub log_prob_alloc: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

impl Transition {
    /// Discriminator input: observation features, squashed flight action,
    /// allocation.
    pub fn disc_input(&self) -> Vec<f64> {
        disc_input(&self.features, &self.flight_raw, &self.alloc)
    }
}

pub fn disc_input(features: &[f64], flight_raw: &[f64; 2], alloc: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(features.len() + 2 + alloc.len());
    v.extend_from_slice(features);
    v.extend(flight_raw.iter().map(|u| u.tanh()));
    v.extend_from_slice(alloc);
    v
}

/// Per-agent on-policy storage; cleared after every update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub agents: Vec<Vec<Transition>>,
}

impl RolloutBuffer {
    pub fn new(num_agents: usize) -> Self {
        Self {
            agents: vec![Vec::new(); num_agents],
        }
    }

    pub fn len(&self) -> usize {
        self.agents.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn append(&mut self, other: RolloutBuffer) {
        if self.agents.is_empty() {
            *self = other;
            return;
        }
        for (mine, theirs) in self.agents.iter_mut().zip(other.agents) {
            mine.extend(theirs);
        }
    }

    pub fn clear(&mut self) {
        for a in &mut self.agents {
            a.clear();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertEpisode {
    pub ret: f64,
    /// Discriminator inputs, one per slot.
    pub tuples: Vec<Vec<f64>>,
}

/// Capacity-bounded store of whole high-return episodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpertBuffer {
    pub capacity: usize,
    pub episodes: Vec<ExpertEpisode>,
}

impl ExpertBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            episodes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn num_tuples(&self) -> usize {
        self.episodes.iter().map(|e| e.tuples.len()).sum()
    }

    pub fn tuple(&self, mut i: usize) -> &[f64] {
        for e in &self.episodes {
            if i < e.tuples.len() {
                return &e.tuples[i];
            }
            i -= e.tuples.len();
        }
        panic!("expert tuple index out of range")
    }

    pub fn median_return(&self) -> Option<f64> {
        if self.episodes.is_empty() {
            return None;
        }
        let mut r: Vec<f64> = self.episodes.iter().map(|e| e.ret).collect();
        r.sort_by(f64::total_cmp);
        let n = r.len();
        Some(if n % 2 == 1 {
            r[n / 2]
        } else {
            0.5 * (r[n / 2 - 1] + r[n / 2])
        })
    }

    pub fn returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.ret).collect()
    }
}

/// What [`update_expert_buffer`] did with an episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Admission {
    Inserted,
    /// Admitted in place of the episode with this return.
    Replaced(f64),
    Rejected,
}

/// Self-imitation admission: fill up to capacity, then admit only episodes
/// that beat the median return, evicting the lowest.
pub fn update_expert_buffer(buffer: &mut ExpertBuffer, tuples: Vec<Vec<f64>>, ret: f64) -> Admission {
    if buffer.capacity == 0 || !ret.is_finite() {
        return Admission::Rejected;
    }
    if buffer.episodes.len() < buffer.capacity {
        buffer.episodes.push(ExpertEpisode { ret, tuples });
        return Admission::Inserted;
    }
    let median = buffer.median_return().expect("full buffer is nonempty");
    if ret <= median {
        return Admission::Rejected;
    }
    // lowest return goes; the oldest among equals
    let (worst, _) = buffer
        .episodes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.ret.total_cmp(&b.1.ret).then(a.0.cmp(&b.0)))
        .expect("nonempty");
    let evicted = buffer.episodes.remove(worst);
    buffer.episodes.push(ExpertEpisode { ret, tuples });
    Admission::Replaced(evicted.ret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ep(ret: f64) -> Vec<Vec<f64>> {
        vec![vec![ret]]
    }

    #[test]
    fn first_episode_admitted() {
        let mut b = ExpertBuffer::new(3);
        assert_eq!(update_expert_buffer(&mut b, ep(-5.0), -5.0), Admission::Inserted);
        assert_eq!(b.returns(), vec![-5.0]);
    }

    #[test]
    fn below_median_rejected() {
        let mut b = ExpertBuffer::new(3);
        for r in [1.0, 5.0, 9.0] {
            assert_ne!(update_expert_buffer(&mut b, ep(r), r), Admission::Rejected);
        }
        let before = b.clone();
        assert_eq!(update_expert_buffer(&mut b, ep(4.0), 4.0), Admission::Rejected);
        assert_eq!(update_expert_buffer(&mut b, ep(5.0), 5.0), Admission::Rejected);
        assert_eq!(b, before);
        assert_eq!(update_expert_buffer(&mut b, ep(6.0), 6.0), Admission::Replaced(1.0));
        assert_eq!(b.returns(), vec![5.0, 9.0, 6.0]);
    }

    #[test]
    fn increasing_stream_keeps_best() {
        let mut b = ExpertBuffer::new(10);
        for r in 0..50 {
            update_expert_buffer(&mut b, ep(r as f64), r as f64);
        }
        let mut kept = b.returns();
        kept.sort_by(f64::total_cmp);
        assert_eq!(kept, (40..50).map(|r| r as f64).collect::<Vec<_>>());
    }

    #[test]
    fn tuple_indexing_spans_episodes() {
        let mut b = ExpertBuffer::new(4);
        update_expert_buffer(&mut b, vec![vec![1.0], vec![2.0]], 0.0);
        update_expert_buffer(&mut b, vec![vec![3.0]], 0.0);
        assert_eq!(b.num_tuples(), 3);
        assert_eq!(b.tuple(2), &[3.0]);
    }

    /// Replays the admission rule on plain numbers.
    fn simulate(capacity: usize, stream: &[f64]) -> Vec<f64> {
        let mut kept: Vec<f64> = Vec::new();
        for &r in stream {
            if kept.len() < capacity {
                kept.push(r);
                continue;
            }
            let mut s = kept.clone();
            s.sort_by(f64::total_cmp);
            let n = s.len();
            let med = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
            if r > med {
                let mut worst = 0;
                for i in 1..kept.len() {
                    if kept[i] < kept[worst] {
                        worst = i;
                    }
                }
                kept.remove(worst);
                kept.push(r);
            }
        }
        kept
    }

    proptest! {
        #[test]
        fn matches_simulated_admission(
            stream in proptest::collection::vec(-100.0f64..100.0, 0..80),
            capacity in 1usize..12,
        ) {
            let mut b = ExpertBuffer::new(capacity);
            for &r in &stream {
                let min_before = b.returns().into_iter().fold(f64::INFINITY, f64::min);
                if let Admission::Replaced(evicted) = update_expert_buffer(&mut b, ep(r), r) {
                    prop_assert!(r >= evicted);
                    prop_assert_eq!(evicted, min_before);
                }
                prop_assert!(b.episodes.len() <= capacity);
            }
            prop_assert_eq!(b.returns(), simulate(capacity, &stream));
        }
    }
}
