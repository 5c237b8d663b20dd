//! Campaigns, sessions and trial responses.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use num_traits::{FromPrimitive, Num};
use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{generate_chart, ChartError, ChartParams, ChartSpec};
use crate::geometry::{FrameSize, Point};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tutorial::{ParticipantScreeningState, PathParams, ScreeningStatus, TutorialError};

pub const MIN_SCREEN_WIDTH: u32 = 1024;
pub const MIN_SCREEN_HEIGHT: u32 = 768;
pub const DEFAULT_BATCH_SIZE: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("invalid campaign: {0}")]
    Configuration(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("success rate of an empty sample list is undefined")]
    EmptySamples,
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Tutorial(#[from] TutorialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    Admitted,
    Refused,
}

/// Screens below 1024×768 cannot show the clips at full size.
pub fn admit_participant(screen_width: u32, screen_height: u32) -> Admission {
    if screen_width >= MIN_SCREEN_WIDTH && screen_height >= MIN_SCREEN_HEIGHT {
        Admission::Admitted
    } else {
        Admission::Refused
    }
}

/// Experiment timing and chart parameters; defaults are the values used throughout the
/// collection (clip 10 s, tutorial 3 s, chart 1 s, 20 px font, density 0.5, radius 100 px).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    /// Clip length `t_v`, seconds.
    pub t_v: f64,
    /// Chart display time `t_c`, seconds.
    pub t_c: f64,
    /// Tutorial animation length `t_t`, seconds.
    pub t_t: f64,
    /// Font size `f_s`, pixels.
    pub f_s: f64,
    /// Approval radius `R_a`, pixels.
    pub r_a: f64,
    /// Relative triplet density `D_r`.
    pub d_r: f64,
    pub jitter_fraction: f64,
    /// Frame used for tutorials, which run without video.
    pub tutorial_frame: FrameSize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            t_v: 10.0,
            t_c: 1.0,
            t_t: 3.0,
            f_s: 20.0,
            r_a: 100.0,
            d_r: 0.5,
            jitter_fraction: 0.25,
            tutorial_frame: FrameSize::new(1024, 576),
        }
    }
}

impl ExperimentParams {
    pub fn chart_params(&self, frame: FrameSize, seed: u64) -> ChartParams {
        ChartParams {
            frame_width: frame.width,
            frame_height: frame.height,
            font_size: self.f_s,
            relative_density: self.d_r,
            jitter_fraction: self.jitter_fraction,
            seed,
        }
    }

    pub fn path_params(&self) -> PathParams {
        PathParams {
            duration: self.t_t,
            ..PathParams::for_font_size(self.f_s)
        }
    }

    /// Field-level problems, empty when valid.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push((format!("parameters.{name}"), "must be a positive number".to_owned()));
            }
        };
        positive("t_v", self.t_v);
        positive("t_c", self.t_c);
        positive("t_t", self.t_t);
        positive("f_s", self.f_s);
        positive("r_a", self.r_a);
        positive("d_r", self.d_r);
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            out.push((
                "parameters.jitter_fraction".to_owned(),
                "must lie in [0, 0.5)".to_owned(),
            ));
        }
        if self.tutorial_frame.width == 0 || self.tutorial_frame.height == 0 {
            out.push((
                "parameters.tutorial_frame".to_owned(),
                "dimensions must be positive".to_owned(),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Video {
    pub video_id: String,
    /// Seconds.
    pub duration: f64,
    pub frame_width: u32,
    pub frame_height: u32,
    pub uri: String,
}

impl Video {
    pub fn frame(&self) -> FrameSize {
        FrameSize::new(self.frame_width, self.frame_height)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameOfInterest {
    pub video_id: String,
    pub frame_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: String,
    pub videos: Vec<Video>,
    pub frames_of_interest: Vec<FrameOfInterest>,
    pub parameters: ExperimentParams,
    /// Currency units paid per completed session.
    pub pay_per_session: f64,
    pub batch_size: usize,
}

impl Campaign {
    pub fn video(&self, video_id: &str) -> Option<&Video> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    /// Every violated invariant as `(field path, reason)`; empty when the campaign is valid.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = self.parameters.problems();
        if self.videos.is_empty() {
            out.push(("videos".into(), "at least one video is required".into()));
        }
        let mut ids = BTreeSet::new();
        for (i, v) in self.videos.iter().enumerate() {
            if v.video_id.is_empty() {
                out.push((format!("videos[{i}].video_id"), "must not be empty".into()));
            }
            if !ids.insert(v.video_id.as_str()) {
                out.push((format!("videos[{i}].video_id"), "duplicate video id".into()));
            }
            if !(v.duration.is_finite() && v.duration > 0.0) {
                out.push((format!("videos[{i}].duration"), "must be positive".into()));
            }
            if v.frame_width == 0 || v.frame_height == 0 {
                out.push((format!("videos[{i}].frame_width"), "frame must be non-empty".into()));
            }
        }
        if self.frames_of_interest.is_empty() {
            out.push((
                "frames_of_interest".into(),
                "at least one frame of interest is required".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for (i, f) in self.frames_of_interest.iter().enumerate() {
            match self.video(&f.video_id) {
                None => out.push((
                    format!("frames_of_interest[{i}].video_id"),
                    format!("unknown video {:?}", f.video_id),
                )),
                Some(v) if f.frame_time_ms as f64 > v.duration * 1000.0 => out.push((
                    format!("frames_of_interest[{i}].frame_time_ms"),
                    format!("beyond the {} s video", v.duration),
                )),
                Some(_) => {}
            }
            if !seen.insert(f) {
                out.push((
                    format!("frames_of_interest[{i}]"),
                    "duplicate frame of interest".into(),
                ));
            }
        }
        if self.batch_size == 0 {
            out.push(("batch_size".into(), "must be at least 1".into()));
        }
        if !(self.pay_per_session.is_finite() && self.pay_per_session >= 0.0) {
            out.push(("pay_per_session".into(), "must be non-negative".into()));
        }
        out
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        match self.problems().first() {
            None => Ok(()),
            Some((field, reason)) => Err(SessionError::Configuration(format!("{field}: {reason}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub video_id: String,
    pub video_uri: String,
    pub frame_time_ms: u64,
    pub clip_start_ms: u64,
    pub chart: ChartSpec,
    /// Chart display time `t_c`, seconds.
    pub chart_duration: f64,
}

/// Start of the clip that ends at the frame of interest, clamped at the video start.
pub fn clip_start_ms(frame_time_ms: u64, clip_length_s: f64) -> u64 {
    frame_time_ms.saturating_sub((clip_length_s * 1000.0).round() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Screening,
    Running,
    Completed,
    Abandoned,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub campaign_id: String,
    pub participant_id: String,
    pub seed: u64,
    pub screening: ParticipantScreeningState,
    pub trials: Vec<TrialSpec>,
    /// Index of the next trial awaiting a response.
    pub cursor: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub campaign_id: String,
    pub video_id: String,
    pub frame_time_ms: u64,
    pub participant_id: String,
    pub session_id: String,
    pub reported_text: String,
    pub location: Option<Point>,
    pub valid: bool,
    pub submitted_at: DateTime<Utc>,
}

/// Picks `min(batch_size, available)` frames of interest and builds a chart for each.
///
/// The session starts in `Screening` unless the participant's screening already finished.
pub fn build_session(
    campaign: &Campaign,
    session_id: impl Into<String>,
    participant_id: impl Into<String>,
    screening: ParticipantScreeningState,
    seed: u64,
) -> Result<Session, SessionError> {
    if campaign.frames_of_interest.is_empty() {
        return Err(SessionError::Configuration(
            "campaign has no frames of interest".into(),
        ));
    }
    let batch = campaign.batch_size.max(1).min(campaign.frames_of_interest.len());
    let mut rng = rng_from_seed(derive_seed(seed, &[0]));
    let mut picked = index::sample(&mut rng, campaign.frames_of_interest.len(), batch).into_vec();
    picked.sort_unstable();

    let params = &campaign.parameters;
    let trials = picked
        .into_iter()
        .enumerate()
        .map(|(k, fi)| {
            let foi = &campaign.frames_of_interest[fi];
            let video = campaign.video(&foi.video_id).ok_or_else(|| {
                SessionError::Configuration(format!("unknown video {:?}", foi.video_id))
            })?;
            let chart = generate_chart(
                &params.chart_params(video.frame(), derive_seed(seed, &[1, k as u64])),
            )?;
            Ok(TrialSpec {
                video_id: foi.video_id.clone(),
                video_uri: video.uri.clone(),
                frame_time_ms: foi.frame_time_ms,
                clip_start_ms: clip_start_ms(foi.frame_time_ms, params.t_v),
                chart,
                chart_duration: params.t_c,
            })
        })
        .collect::<Result<Vec<_>, SessionError>>()?;

    let status = match screening.status {
        ScreeningStatus::InTraining => SessionStatus::Screening,
        ScreeningStatus::Approved => SessionStatus::Running,
        ScreeningStatus::Rejected => SessionStatus::Rejected,
    };
    Ok(Session {
        id: session_id.into(),
        campaign_id: campaign.id.clone(),
        participant_id: participant_id.into(),
        seed,
        screening,
        trials,
        cursor: 0,
        status,
    })
}

impl Session {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self.status,
            SessionStatus::Completed | SessionStatus::Abandoned | SessionStatus::Rejected
        )
    }

    pub fn current_trial(&self) -> Option<&TrialSpec> {
        (self.status == SessionStatus::Running)
            .then(|| self.trials.get(self.cursor))
            .flatten()
    }

    /// Applies one tutorial result to the session's screening state.
    pub fn record_tutorial(&mut self, passed: bool) -> Result<ScreeningStatus, SessionError> {
        if self.status != SessionStatus::Screening {
            return Err(SessionError::Protocol(format!(
                "tutorial result recorded in {:?} session",
                self.status
            )));
        }
        self.screening = self.screening.record(passed)?;
        match self.screening.status {
            ScreeningStatus::Approved => self.status = SessionStatus::Running,
            ScreeningStatus::Rejected => self.status = SessionStatus::Rejected,
            ScreeningStatus::InTraining => {}
        }
        Ok(self.screening.status)
    }

    /// Resolves the response to trial `trial_index` and advances the cursor. Invalid reports
    /// produce a sample without location; they are kept for the success-rate statistic.
    pub fn submit_trial_response(
        &mut self,
        trial_index: usize,
        raw_text: &str,
        submitted_at: DateTime<Utc>,
    ) -> Result<GazeSample, SessionError> {
        if self.status != SessionStatus::Running {
            return Err(SessionError::Protocol(format!(
                "trial response submitted to {:?} session",
                self.status
            )));
        }
        if trial_index < self.cursor {
            return Err(SessionError::Protocol(format!(
                "trial {trial_index} was already answered"
            )));
        }
        if trial_index != self.cursor {
            return Err(SessionError::Protocol(format!(
                "trial {trial_index} submitted while trial {} is pending",
                self.cursor
            )));
        }
        let trial = &self.trials[trial_index];
        let location = trial.chart.lookup(raw_text);
        let sample = GazeSample {
            campaign_id: self.campaign_id.clone(),
            video_id: trial.video_id.clone(),
            frame_time_ms: trial.frame_time_ms,
            participant_id: self.participant_id.clone(),
            session_id: self.id.clone(),
            reported_text: raw_text.to_owned(),
            location,
            valid: location.is_some(),
            submitted_at,
        };
        self.cursor += 1;
        if self.cursor == self.trials.len() {
            self.status = SessionStatus::Completed;
        }
        Ok(sample)
    }

    pub fn abandon(&mut self) {
        if !self.is_terminal() {
            self.status = SessionStatus::Abandoned;
        }
    }
}

/// Total pay for `n_locations` gaze locations of one frame: every session contributes one
/// location to each of `batch_size` different frames.
///
/// Generic over the currency representation; use a rational type for exact cents.
pub fn estimate_cost<T>(n_locations: u64, pay_per_session: T, batch_size: u64) -> T
where
    T: Num + FromPrimitive + Clone,
{
    assert!(batch_size >= 1, "batch size must be at least 1");
    let n = T::from_u64(n_locations).expect("count representable in the currency type");
    let b = T::from_u64(batch_size).expect("count representable in the currency type");
    n * pay_per_session / b
}

/// Fraction of samples whose report matched a triplet.
pub fn success_rate(samples: &[GazeSample]) -> Result<f64, SessionError> {
    if samples.is_empty() {
        return Err(SessionError::EmptySamples);
    }
    let valid = samples.iter().filter(|s| s.valid).count();
    Ok(valid as f64 / samples.len() as f64)
}

pub const SAMPLE_CSV_HEADER: [&str; 10] = [
    "campaign_id",
    "video_id",
    "frame_time_ms",
    "participant_id",
    "session_id",
    "reported_text",
    "x",
    "y",
    "valid",
    "submitted_at",
];

/// Writes samples as CSV; `x` and `y` are empty for invalid reports.
pub fn write_samples_csv<W: std::io::Write>(
    samples: &[GazeSample],
    out: W,
) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(SAMPLE_CSV_HEADER)?;
    for s in samples {
        let (x, y) = s
            .location
            .map(|p| (p.x.to_string(), p.y.to_string()))
            .unwrap_or_default();
        writer.write_record([
            s.campaign_id.as_str(),
            &s.video_id,
            &s.frame_time_ms.to_string(),
            &s.participant_id,
            &s.session_id,
            &s.reported_text,
            &x,
            &y,
            if s.valid { "true" } else { "false" },
            &s.submitted_at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use num_rational::Ratio;

    use super::*;

    pub(crate) fn campaign(frames: usize) -> Campaign {
        let videos = (0..4)
            .map(|v| Video {
                video_id: format!("v{v}"),
                duration: 60.0,
                frame_width: 1024,
                frame_height: 576,
                uri: format!("https://example.org/v{v}.mp4"),
            })
            .collect();
        let frames_of_interest = (0..frames)
            .map(|i| FrameOfInterest {
                video_id: format!("v{}", i % 4),
                frame_time_ms: 5_000 + 2_000 * i as u64,
            })
            .collect();
        Campaign {
            id: "c1".into(),
            videos,
            frames_of_interest,
            parameters: ExperimentParams::default(),
            pay_per_session: 0.15,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }

    fn approved() -> ParticipantScreeningState {
        ParticipantScreeningState::default()
            .record(true)
            .and_then(|s| s.record(true))
            .unwrap()
    }

    fn now() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    #[test]
    fn admission_threshold() {
        assert_eq!(admit_participant(1024, 768), Admission::Admitted);
        assert_eq!(admit_participant(1023, 768), Admission::Refused);
        assert_eq!(admit_participant(1024, 767), Admission::Refused);
        assert_eq!(admit_participant(1920, 1080), Admission::Admitted);
    }

    #[test]
    fn batch_selection() {
        let c = campaign(20);
        let s = build_session(&c, "s1", "p1", Default::default(), 11).unwrap();
        assert_eq!(s.trials.len(), 6);
        let distinct: BTreeSet<_> = s
            .trials
            .iter()
            .map(|t| (t.video_id.clone(), t.frame_time_ms))
            .collect();
        assert_eq!(distinct.len(), 6);
        assert_eq!(s.status, SessionStatus::Screening);

        let small = build_session(&campaign(4), "s2", "p1", Default::default(), 11).unwrap();
        assert_eq!(small.trials.len(), 4);

        let again = build_session(&c, "s1", "p1", Default::default(), 11).unwrap();
        assert_eq!(again, s);

        let mut empty = campaign(1);
        empty.frames_of_interest.clear();
        assert!(matches!(
            build_session(&empty, "s", "p", Default::default(), 0),
            Err(SessionError::Configuration(_))
        ));
    }

    #[test]
    fn clip_window_clamps() {
        assert_eq!(clip_start_ms(5_000, 10.0), 0);
        assert_eq!(clip_start_ms(30_000, 10.0), 20_000);
    }

    #[test]
    fn trial_responses() {
        let mut s = build_session(&campaign(20), "s1", "p1", approved(), 5).unwrap();
        assert_eq!(s.status, SessionStatus::Running);
        let label = s.trials[0].chart.placements[3].label.to_string();
        let anchor = s.trials[0].chart.placements[3].anchor;
        let sample = s.submit_trial_response(0, &label, now()).unwrap();
        assert!(sample.valid);
        assert_eq!(sample.location, Some(anchor));

        let sample = s.submit_trial_response(1, "ZZZ", now()).unwrap();
        assert!(!sample.valid);
        assert_eq!(sample.location, None);

        assert!(matches!(
            s.submit_trial_response(3, "A00", now()),
            Err(SessionError::Protocol(_))
        ));
        assert!(matches!(
            s.submit_trial_response(1, "A00", now()),
            Err(SessionError::Protocol(_))
        ));
        for i in 2..6 {
            s.submit_trial_response(i, "A00", now()).unwrap();
        }
        assert_eq!(s.status, SessionStatus::Completed);
        assert!(s.submit_trial_response(6, "A00", now()).is_err());
    }

    #[test]
    fn screening_gates_trials() {
        let mut s = build_session(&campaign(8), "s1", "p1", Default::default(), 5).unwrap();
        assert!(s.submit_trial_response(0, "A00", now()).is_err());
        assert!(s.current_trial().is_none());
        s.record_tutorial(true).unwrap();
        assert_eq!(s.status, SessionStatus::Screening);
        s.record_tutorial(true).unwrap();
        assert_eq!(s.status, SessionStatus::Running);
        assert!(s.record_tutorial(true).is_err());
        assert!(s.current_trial().is_some());
    }

    #[test]
    fn cost_model() {
        let exact = estimate_cost(100, Ratio::new(15i64, 100), 6);
        assert_eq!(exact, Ratio::new(5, 2));
        assert_relative_eq!(estimate_cost(100, 0.15f64, 6), 2.5, epsilon = 1e-12);
        assert_relative_eq!(estimate_cost(6, 0.15f64, 6), 0.15, epsilon = 1e-12);
        assert_eq!(estimate_cost(0, 0.15f64, 6), 0.0);
    }

    #[test]
    fn success_rate_arithmetic() {
        let mut s = build_session(&campaign(20), "s1", "p1", approved(), 5).unwrap();
        let sample = s.submit_trial_response(0, "ZZZ", now()).unwrap();
        let mut samples = vec![GazeSample { valid: true, ..sample.clone() }; 19];
        samples.push(sample);
        assert_relative_eq!(success_rate(&samples).unwrap(), 0.95);
        assert_eq!(success_rate(&samples[..19]).unwrap(), 1.0);
        assert_eq!(success_rate(&[]), Err(SessionError::EmptySamples));
    }

    #[test]
    fn campaign_validation() {
        assert!(campaign(12).problems().is_empty());
        let mut c = campaign(3);
        c.frames_of_interest[1].frame_time_ms = 61_000;
        let problems = c.problems();
        assert_eq!(problems.len(), 1);
        assert_eq!(problems[0].0, "frames_of_interest[1].frame_time_ms");
        let mut c = campaign(3);
        c.videos.clear();
        assert!(c.problems().iter().any(|(f, _)| f == "videos"));
    }

    #[test]
    fn csv_export() {
        let mut s = build_session(&campaign(20), "s1", "p1", approved(), 5).unwrap();
        let p = s.trials[0].chart.placements[0].clone();
        let a = s.submit_trial_response(0, &p.label.to_string(), now()).unwrap();
        let b = s.submit_trial_response(1, "nope", now()).unwrap();
        let mut out = Vec::new();
        write_samples_csv(&[a, b], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "campaign_id,video_id,frame_time_ms,participant_id,session_id,reported_text,x,y,valid,submitted_at"
        );
        assert!(lines[1].contains(&format!(",{},{},true,", p.anchor.x, p.anchor.y)));
        assert!(lines[2].ends_with(",nope,,,false,2023-11-14T22:13:20.000Z"));
    }
}
