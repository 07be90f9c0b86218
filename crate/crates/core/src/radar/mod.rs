//! Waveform-agile tracking environment.

pub mod detector;
pub mod scene;
pub mod target;

pub use detector::{detect_lost_track, LostTrackDetector, LOST_TRACK_THRESHOLD_DB, LOST_TRACK_WINDOW};
pub use scene::{
    context_features, observe_state, realize_loss, realize_loss_with, sample_task, step_state, Scene,
    SceneParams, FEATURE_DIM,
};
pub use target::{
    measurement_variance, sinr_linear, step_target, step_target_with, tracker_update, Kinematics,
    TargetState, TrackerParams, TrackerState,
};
