//! Lost-track rule: a run of consecutive low-SINR measurements.

use serde::{Deserialize, Serialize};

pub const LOST_TRACK_THRESHOLD_DB: f64 = 3.0;
pub const LOST_TRACK_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LostTrackDetector {
    pub threshold_db: f64,
    pub window_length: usize,
    pub consecutive_below: usize,
    /// Latches: once a track is lost it stays lost.
    pub tripped: bool,
}

impl Default for LostTrackDetector {
    fn default() -> Self {
        Self::new(LOST_TRACK_THRESHOLD_DB, LOST_TRACK_WINDOW)
    }
}

impl LostTrackDetector {
    pub fn new(threshold_db: f64, window_length: usize) -> Self {
        Self {
            threshold_db,
            window_length,
            consecutive_below: 0,
            tripped: false,
        }
    }

    #[must_use]
    pub fn observe(mut self, sinr_db: f64) -> Self {
        if sinr_db < self.threshold_db {
            self.consecutive_below += 1;
        } else {
            self.consecutive_below = 0;
        }
        if self.consecutive_below >= self.window_length {
            self.tripped = true;
        }
        self
    }
}

pub fn detect_lost_track(det: LostTrackDetector, sinr_db: f64) -> LostTrackDetector {
    det.observe(sinr_db)
}
