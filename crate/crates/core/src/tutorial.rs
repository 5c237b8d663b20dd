//! Moving-target tutorials and participant screening.
//!
//! A tutorial animates a colored `X` along a random constant-speed path for `t_t` seconds, then
//! shows a chart. The participant passes if the triplet they report lies within the approval
//! radius of the letter's final position. Two passes admit the participant to the real trials;
//! ten attempts without two passes reject them.

use std::f64::consts::{PI, TAU};

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{generate_chart, ChartError, ChartParams, ChartSpec};
use crate::geometry::{FrameSize, Point};
use crate::rng::{derive_seed, rng_from_seed};

pub const REQUIRED_PASSES: u32 = 2;
pub const MAX_ATTEMPTS: u32 = 10;
pub const TUTORIAL_LETTER: &str = "X";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TutorialError {
    #[error("invalid tutorial parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("screening already finished with status {0:?}")]
    ScreeningFinished(ScreeningStatus),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LetterColor {
    Red,
    Green,
    Yellow,
    Cyan,
    Magenta,
}

impl LetterColor {
    pub const ALL: [LetterColor; 5] = [
        LetterColor::Red,
        LetterColor::Green,
        LetterColor::Yellow,
        LetterColor::Cyan,
        LetterColor::Magenta,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Pixels per second.
    pub speed: f64,
    /// Standard deviation of the per-step heading change, radians.
    pub heading_sigma: f64,
    /// Samples per second.
    pub sample_rate: f64,
    pub edge_margin: f64,
    /// Animation length `t_t` in seconds.
    pub duration: f64,
    /// Fixed starting heading; drawn uniformly when absent.
    #[serde(default)]
    pub initial_heading: Option<f64>,
}

impl PathParams {
    /// Defaults for a given font size: 150 px/s, 60 Hz, 0.15 rad/step, margin `2 f_s`, 3 s.
    pub fn for_font_size(font_size: f64) -> Self {
        Self {
            speed: 150.0,
            heading_sigma: 0.15,
            sample_rate: 60.0,
            edge_margin: 2.0 * font_size,
            duration: 3.0,
            initial_heading: None,
        }
    }

    pub fn step_length(&self) -> f64 {
        self.speed / self.sample_rate
    }

    fn validate(&self, font_size: f64, frame: FrameSize) -> Result<(), TutorialError> {
        let check = |ok: bool, name: &'static str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(TutorialError::Parameter {
                    name,
                    reason: reason.to_owned(),
                })
            }
        };
        check(self.speed.is_finite() && self.speed > 0.0, "speed", "must be positive")?;
        check(
            self.sample_rate.is_finite() && self.sample_rate > 0.0,
            "sample_rate",
            "must be positive",
        )?;
        check(
            self.heading_sigma.is_finite() && self.heading_sigma >= 0.0,
            "heading_sigma",
            "must be non-negative",
        )?;
        check(self.duration.is_finite() && self.duration > 0.0, "duration", "must be positive")?;
        check(self.edge_margin >= font_size, "edge_margin", "must be at least the font size")?;
        let inner_w = frame.width as f64 - 2.0 * self.edge_margin;
        let inner_h = frame.height as f64 - 2.0 * self.edge_margin;
        check(
            inner_w > 0.0 && inner_h > 0.0,
            "edge_margin",
            "frame is smaller than twice the edge margin",
        )?;
        check(
            inner_w > 2.0 * self.step_length() && inner_h > 2.0 * self.step_length(),
            "speed",
            "one path step is too long for the frame",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl PathSample {
    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

// Path samples travel as `[t, x, y]` triples.
impl Serialize for PathSampleList {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(|s| [s.t, s.x, s.y]))
    }
}

impl<'de> Deserialize<'de> for PathSampleList {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<[f64; 3]>::deserialize(deserializer)?;
        Ok(Self(
            raw.into_iter()
                .map(|[t, x, y]| PathSample { t, x, y })
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSampleList(pub Vec<PathSample>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialSpec {
    pub duration: f64,
    pub letter: String,
    pub color: LetterColor,
    pub sample_rate: f64,
    pub path: PathSampleList,
    pub final_position: Point,
    pub chart: ChartSpec,
    pub seed: u64,
}

impl TutorialSpec {
    pub fn samples(&self) -> &[PathSample] {
        &self.path.0
    }
}

/// Generates the animation path, letter color and follow-up chart for one tutorial attempt.
///
/// The path starts at the frame center. Each step the heading takes a Gaussian increment and the
/// letter advances `v / sample_rate` pixels; a step that would enter the edge margin has the
/// offending heading component reflected.
pub fn generate_tutorial(
    frame: FrameSize,
    path_params: &PathParams,
    chart_params: &ChartParams,
    seed: u64,
) -> Result<TutorialSpec, TutorialError> {
    path_params.validate(chart_params.font_size, frame)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[0]));
    let color = *LetterColor::ALL.choose(&mut rng).expect("non-empty color set");
    let mut heading = match path_params.initial_heading {
        Some(h) => h,
        None => rng.random_range(0.0..TAU),
    };
    let turn = Normal::new(0.0, path_params.heading_sigma).map_err(|e| {
        TutorialError::Parameter {
            name: "heading_sigma",
            reason: e.to_string(),
        }
    })?;

    let steps = (path_params.duration * path_params.sample_rate).round().max(1.0) as usize;
    let step = path_params.step_length();
    let (lo_x, hi_x) = (path_params.edge_margin, frame.width as f64 - path_params.edge_margin);
    let (lo_y, hi_y) = (path_params.edge_margin, frame.height as f64 - path_params.edge_margin);

    let mut position = frame.center();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(PathSample {
        t: 0.0,
        x: position.x,
        y: position.y,
    });
    for k in 1..=steps {
        if k > 1 {
            heading += turn.sample(&mut rng);
        }
        let mut next_x = position.x + step * heading.cos();
        if next_x < lo_x || next_x > hi_x {
            heading = PI - heading;
            next_x = position.x + step * heading.cos();
        }
        let mut next_y = position.y + step * heading.sin();
        if next_y < lo_y || next_y > hi_y {
            heading = -heading;
            next_y = position.y + step * heading.sin();
        }
        heading = heading.rem_euclid(TAU);
        position = Point::new(next_x, next_y);
        path.push(PathSample {
            t: k as f64 / path_params.sample_rate,
            x: position.x,
            y: position.y,
        });
    }
    // the last sample lands exactly on t_t
    if let Some(last) = path.last_mut() {
        last.t = path_params.duration;
    }

    let chart = generate_chart(&ChartParams {
        frame_width: frame.width,
        frame_height: frame.height,
        seed: derive_seed(seed, &[1]),
        ..*chart_params
    })?;

    Ok(TutorialSpec {
        duration: path_params.duration,
        letter: TUTORIAL_LETTER.to_owned(),
        color,
        sample_rate: path_params.sample_rate,
        final_position: position,
        path: PathSampleList(path),
        chart,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum TutorialOutcome {
    Pass,
    Fail(FailReason),
}

impl TutorialOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, TutorialOutcome::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    InvalidTriplet,
    OutsideRadius,
}

/// Passes when the reported triplet's anchor is strictly closer than `approval_radius` to the
/// letter's final position.
pub fn score_tutorial(spec: &TutorialSpec, reported_text: &str, approval_radius: f64) -> TutorialOutcome {
    match spec.chart.lookup(reported_text) {
        None => TutorialOutcome::Fail(FailReason::InvalidTriplet),
        Some(anchor) if anchor.distance(&spec.final_position) < approval_radius => {
            TutorialOutcome::Pass
        }
        Some(_) => TutorialOutcome::Fail(FailReason::OutsideRadius),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreeningStatus {
    InTraining,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantScreeningState {
    pub attempts: u32,
    pub passes: u32,
    pub status: ScreeningStatus,
}

impl Default for ParticipantScreeningState {
    fn default() -> Self {
        Self {
            attempts: 0,
            passes: 0,
            status: ScreeningStatus::InTraining,
        }
    }
}

impl ParticipantScreeningState {
    pub fn is_terminal(&self) -> bool {
        self.status != ScreeningStatus::InTraining
    }

    /// Records one tutorial result and recomputes the status.
    pub fn record(self, passed: bool) -> Result<Self, TutorialError> {
        if self.is_terminal() {
            return Err(TutorialError::ScreeningFinished(self.status));
        }
        let attempts = self.attempts + 1;
        let passes = self.passes + u32::from(passed);
        let status = if passes >= REQUIRED_PASSES {
            ScreeningStatus::Approved
        } else if attempts >= MAX_ATTEMPTS {
            ScreeningStatus::Rejected
        } else {
            ScreeningStatus::InTraining
        };
        Ok(Self {
            attempts,
            passes,
            status,
        })
    }
}

pub fn record_tutorial_result(
    state: ParticipantScreeningState,
    passed: bool,
) -> Result<ParticipantScreeningState, TutorialError> {
    state.record(passed)
}
