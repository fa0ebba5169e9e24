use std::collections::HashSet;

use super::{Sample, SampleId};
use crate::error::{Error, Result};

/// Run-wide record of purchased labels. Each sample id is charged at most
/// once; re-selecting an already annotated sample is free.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationLedger {
    per_episode_counts: Vec<usize>,
    annotated_ids: HashSet<SampleId>,
}

impl AnnotationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn per_episode_counts(&self) -> &[usize] {
        &self.per_episode_counts
    }

    pub fn total(&self) -> usize {
        self.per_episode_counts.iter().sum()
    }

    pub fn is_charged(&self, id: SampleId) -> bool {
        self.annotated_ids.contains(&id)
    }

    fn slot(&mut self, episode: usize) -> Result<&mut usize> {
        let open = self.per_episode_counts.len();
        if episode == open {
            self.per_episode_counts.push(0);
        } else if episode + 1 != open {
            return Err(Error::contract(format!(
                "charge for episode {episode} but the ledger is at episode {}",
                open.saturating_sub(1)
            )));
        }
        Ok(self.per_episode_counts.last_mut().expect("slot pushed"))
    }

    /// Charges `ids` to `episode` (the current or the next episode) and
    /// returns how many were newly charged.
    pub fn charge(
        &mut self,
        episode: usize,
        ids: impl IntoIterator<Item = SampleId>,
    ) -> Result<usize> {
        self.slot(episode)?;
        let fresh = ids
            .into_iter()
            .filter(|id| self.annotated_ids.insert(*id))
            .count();
        *self.slot(episode)? += fresh;
        Ok(fresh)
    }

    /// Like [`charge`](Self::charge) but also marks the samples annotated.
    pub fn charge_samples<'a>(
        &mut self,
        episode: usize,
        samples: impl IntoIterator<Item = &'a mut Sample>,
    ) -> Result<usize> {
        let mut ids = Vec::new();
        for sample in samples {
            sample.annotated = true;
            ids.push(sample.id);
        }
        self.charge(episode, ids)
    }
}
