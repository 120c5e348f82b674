//! Curriculum over concentric goal zones, advanced on rolling success.

use alloc::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const CURRICULUM_WINDOW: usize = 1000;
pub const MAX_ZONE: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub zone: u8,
    pub window: VecDeque<bool>,
    pub window_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneAdvance {
    /// Zone whose checkpoint should be written.
    pub completed_zone: u8,
    pub zone: u8,
}

impl Default for CurriculumState {
    fn default() -> Self {
        CurriculumState::new(CURRICULUM_WINDOW)
    }
}

impl CurriculumState {
    pub fn new(window_len: usize) -> Self {
        CurriculumState {
            zone: 0,
            window: VecDeque::with_capacity(window_len),
            window_len: window_len.max(1),
        }
    }

    pub fn successes(&self) -> usize {
        self.window.iter().filter(|&&s| s).count()
    }

    /// Records one episode outcome. Advances when the window is full and
    /// strictly more than half of it succeeded.
    pub fn record(&mut self, success: bool) -> Option<ZoneAdvance> {
        if self.window.len() == self.window_len {
            self.window.pop_front();
        }
        self.window.push_back(success);
        if self.zone < MAX_ZONE && self.window.len() == self.window_len && 2 * self.successes() > self.window_len {
            let completed_zone = self.zone;
            self.zone += 1;
            self.window.clear();
            return Some(ZoneAdvance {
                completed_zone,
                zone: self.zone,
            });
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(s: &mut CurriculumState, succ: usize, total: usize) -> usize {
        let mut adv = 0;
        for i in 0..total {
            if s.record(i < succ).is_some() {
                adv += 1;
            }
        }
        adv
    }

    #[test]
    fn thresholds() {
        let mut s = CurriculumState::default();
        assert_eq!(feed(&mut s, 501, 1000), 1);
        assert_eq!(s.zone, 1);
        let mut s = CurriculumState::default();
        assert_eq!(feed(&mut s, 500, 1000), 0);
        let mut s = CurriculumState::default();
        assert_eq!(feed(&mut s, 999, 999), 0);
        assert_eq!(s.zone, 0);
    }

    #[test]
    fn caps_at_last_zone() {
        let mut s = CurriculumState::default();
        for _ in 0..5000 {
            s.record(true);
        }
        assert_eq!(s.zone, MAX_ZONE);
    }
}
