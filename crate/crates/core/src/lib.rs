//! Crowdsourced gaze-location collection.
//!
//! Instead of tracking the eyes, a participant watches a short clip that ends on a frame of
//! interest; the frame is replaced for about a second by a chart of jittered letter-digit
//! triplets and the participant types the triplet they saw most clearly. The triplet's position
//! is the gaze sample. Participants are screened with moving-target tutorials, and the samples
//! for each frame are smoothed into a gaze density and compared against reference tracking data.
//!
//! * [`chart`]: chart layout and report lookup.
//! * [`tutorial`]: moving-target tutorials and the screening state machine.
//! * [`session`]: campaigns, sessions, trial responses and cost.
//! * [`analysis`]: KDE, χ² distance, sample files and heatmaps, generic over [`Scalar`].
//! * [`simulate`]: synthetic participants and parameter sweeps.
//!
//! All randomness is ChaCha8 seeded from explicit `u64` seeds (see [`rng`]).

pub mod analysis;
pub mod chart;
pub mod geometry;
pub mod rng;
pub mod scalar;
pub mod session;
pub mod simulate;
pub mod tutorial;

pub use chart::{derive_spacing, generate_chart, ChartParams, ChartSpec, TripletLabel, TripletPlacement};
pub use geometry::{FrameSize, Point};
pub use scalar::Scalar;
pub use session::{Campaign, ExperimentParams, GazeSample, Session, TrialSpec};
pub use tutorial::{ParticipantScreeningState, PathParams, ScreeningStatus, TutorialSpec};

pub type SampleSet = analysis::SampleSet<f64>;
pub type SampleSetF32 = analysis::SampleSet<f32>;
pub type BandwidthSpec = analysis::BandwidthSpec<f64>;
pub type BandwidthSpecF32 = analysis::BandwidthSpec<f32>;
pub type DensityGrid = analysis::DensityGrid<f64>;
pub type DensityGridF32 = analysis::DensityGrid<f32>;
pub type ComparisonReport = analysis::ComparisonReport<f64>;
pub type ComparisonReportF32 = analysis::ComparisonReport<f32>;

/// Exact currency amounts for [`session::estimate_cost`].
pub type Money = num_rational::Ratio<i64>;
