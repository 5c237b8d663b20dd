//! Synthetic participants and parameter sweeps.
//!
//! The participant model is a stand-in used to exercise the whole pipeline without a crowd: it
//! attends a point drawn from a Gaussian mixture, perceives it with Gaussian noise, and reads the
//! nearest triplet with probability `p_read(t_c, D_r)`. A failed read is either garbage text
//! (never on the chart) or a random chart triplet. The default `p_read` drops for charts shown
//! shorter than 0.5 s and for densities above 0.5; it encodes those two trends by construction,
//! so sweeps over it check the harness, not human behavior.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, SampleSet};
use crate::chart::{generate_chart, ChartError, ChartParams, ChartSpec};
use crate::geometry::{FrameSize, Point};
use crate::rng::{derive_seed, stream, Rng};
use crate::tutorial::{generate_tutorial, score_tutorial, PathParams, TutorialError};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid simulation setting: {0}")]
    Config(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Tutorial(#[from] TutorialError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Point,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

/// Mixture of axis-aligned Gaussians over a frame; draws are truncated to the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeMixture {
    pub components: Vec<GaussianComponent>,
}

impl GazeMixture {
    pub fn single(mean: Point, sigma: f64) -> Self {
        Self {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean,
                sigma_x: sigma,
                sigma_y: sigma,
            }],
        }
    }

    /// Two off-center blobs, the main one twice as likely as the other.
    pub fn two_blobs(frame: FrameSize) -> Self {
        let (w, h) = (frame.width as f64, frame.height as f64);
        Self {
            components: vec![
                GaussianComponent {
                    weight: 2.0,
                    mean: Point::new(0.3 * w, 0.4 * h),
                    sigma_x: 0.06 * w,
                    sigma_y: 0.08 * h,
                },
                GaussianComponent {
                    weight: 1.0,
                    mean: Point::new(0.72 * w, 0.62 * h),
                    sigma_x: 0.05 * w,
                    sigma_y: 0.07 * h,
                },
            ],
        }
    }

    fn validate(&self) -> Result<(), SimulationError> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let ok = !self.components.is_empty()
            && total > 0.0
            && self
                .components
                .iter()
                .all(|c| c.weight >= 0.0 && c.sigma_x >= 0.0 && c.sigma_y >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(SimulationError::Config(
                "mixture needs non-negative weights and spreads with positive total weight".into(),
            ))
        }
    }

    /// One draw inside `[0, width) × [0, height)`; out-of-frame draws are repeated, and after 64
    /// misses the last draw is clamped into the frame.
    pub fn sample(&self, frame: FrameSize, rng: &mut Rng) -> Point {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let (w, h) = (frame.width as f64, frame.height as f64);
        let mut last = frame.center();
        for _ in 0..64 {
            let mut pick = rng.random_range(0.0..total);
            let component = self
                .components
                .iter()
                .find(|c| {
                    pick -= c.weight;
                    pick < 0.0
                })
                .unwrap_or_else(|| self.components.last().expect("validated non-empty"));
            last = Point::new(
                component.mean.x + component.sigma_x * standard_normal(rng),
                component.mean.y + component.sigma_y * standard_normal(rng),
            );
            if last.x >= 0.0 && last.y >= 0.0 && last.x < w && last.y < h {
                return last;
            }
        }
        Point::new(last.x.clamp(0.0, w - 1e-6), last.y.clamp(0.0, h - 1e-6))
    }
}

fn standard_normal(rng: &mut Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

/// Default reading probability: `min(1, t_c / 0.5) · (1 − 2 max(0, D_r − 0.5))`, clamped to
/// `[0, 1]`.
pub fn default_p_read(chart_duration: f64, relative_density: f64) -> f64 {
    let time = (chart_duration / 0.5).min(1.0);
    let clutter = 1.0 - 2.0 * (relative_density - 0.5).max(0.0);
    (time * clutter).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "p", rename_all = "snake_case")]
pub enum ReadModel {
    Default,
    Constant(f64),
}

impl ReadModel {
    pub fn p_read(&self, chart_duration: f64, relative_density: f64) -> f64 {
        match *self {
            ReadModel::Default => default_p_read(chart_duration, relative_density),
            ReadModel::Constant(p) => p.clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantModel {
    pub gaze: GazeMixture,
    pub read_model: ReadModel,
    /// Probability that a failed read produces text that is on no chart.
    pub p_garbage: f64,
    /// Per-axis standard deviation between attended and perceived location, pixels.
    pub report_noise_sigma: f64,
    pub seed: u64,
}

impl ParticipantModel {
    /// Default behavior (`p_garbage = 0.5`, 15 px perception noise) attending the given mixture.
    pub fn with_gaze(gaze: GazeMixture, seed: u64) -> Self {
        Self {
            gaze,
            read_model: ReadModel::Default,
            p_garbage: 0.5,
            report_noise_sigma: 15.0,
            seed,
        }
    }

    /// A reader that never fails and perceives without noise.
    pub fn perfect(gaze: GazeMixture, seed: u64) -> Self {
        Self {
            read_model: ReadModel::Constant(1.0),
            report_noise_sigma: 0.0,
            ..Self::with_gaze(gaze, seed)
        }
    }

    pub fn p_read(&self, chart_duration: f64, relative_density: f64) -> f64 {
        self.read_model.p_read(chart_duration, relative_density)
    }

    fn validate(&self) -> Result<(), SimulationError> {
        self.gaze.validate()?;
        if !(0.0..=1.0).contains(&self.p_garbage) {
            return Err(SimulationError::Config("p_garbage must lie in [0, 1]".into()));
        }
        if !(self.report_noise_sigma.is_finite() && self.report_noise_sigma >= 0.0) {
            return Err(SimulationError::Config("report noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Text that matches no chart: the letters I and O are never used.
fn garbage_text(rng: &mut Rng) -> String {
    let letter = *b"IO".choose(rng).expect("non-empty");
    format!("{}{:02}", letter as char, rng.random_range(0..100u8))
}

/// What a simulated participant types after seeing `chart` while attending `true_gaze`.
pub fn simulate_report(
    model: &ParticipantModel,
    chart: &ChartSpec,
    true_gaze: Point,
    chart_duration: f64,
    rng: &mut Rng,
) -> String {
    let sigma = model.report_noise_sigma;
    let perceived = if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("finite non-negative sigma");
        Point::new(true_gaze.x + noise.sample(rng), true_gaze.y + noise.sample(rng))
    } else {
        true_gaze
    };
    let p_read = model.p_read(chart_duration, chart.params.relative_density);
    if rng.random_bool(p_read) {
        if let Some(p) = chart.nearest(perceived) {
            return p.label.to_string();
        }
    }
    if rng.random_bool(model.p_garbage) || chart.placements.is_empty() {
        garbage_text(rng)
    } else {
        chart
            .placements
            .choose(rng)
            .expect("non-empty placements")
            .label
            .to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Relative density `D_r`.
    Density,
    /// Chart duration `t_c`, seconds.
    Duration,
}

impl SweepAxis {
    /// Admissible parameter range.
    pub fn range(&self) -> (f64, f64) {
        match self {
            SweepAxis::Density => (0.3, 1.0),
            SweepAxis::Duration => (0.1, 1.5),
        }
    }
}

/// `from, from + step, …` up to `to` inclusive, snapped to 1e-9 to absorb float drift.
pub fn stepped_range(from: f64, to: f64, step: f64) -> Vec<f64> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(step > 0.0) || to < from {
        return Vec::new();
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((from + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub approval_radii: Vec<f64>,
    pub trials_per_point: usize,
    /// Chart parameters; the swept density overrides `relative_density`.
    pub chart: ChartParams,
    /// Chart duration when sweeping density.
    pub chart_duration: f64,
    pub seed: u64,
}

impl SweepConfig {
    /// `D_r` from 0.3 to 1.0 in steps of 0.1 at `t_c = 1 s`, `R_a` from 20 to 200 px.
    pub fn density(trials_per_point: usize, seed: u64) -> Self {
        Self {
            axis: SweepAxis::Density,
            values: stepped_range(0.3, 1.0, 0.1),
            approval_radii: stepped_range(20.0, 200.0, 20.0),
            trials_per_point,
            chart: ChartParams::default(),
            chart_duration: 1.0,
            seed,
        }
    }

    /// `t_c` from 0.1 to 1.5 s in steps of 0.1 at `D_r = 0.5`, `R_a` from 20 to 200 px.
    pub fn duration(trials_per_point: usize, seed: u64) -> Self {
        Self {
            axis: SweepAxis::Duration,
            values: stepped_range(0.1, 1.5, 0.1),
            ..Self::density(trials_per_point, seed)
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.trials_per_point == 0 {
            return Err(SimulationError::Config("trials per point must be positive".into()));
        }
        if self.values.is_empty() || self.approval_radii.is_empty() {
            return Err(SimulationError::Config(
                "sweep needs parameter values and approval radii".into(),
            ));
        }
        let (lo, hi) = self.axis.range();
        if let Some(v) = self.values.iter().find(|v| !(lo - 1e-9..=hi + 1e-9).contains(*v)) {
            return Err(SimulationError::Config(format!(
                "{v} is outside the {:?} range [{lo}, {hi}]",
                self.axis
            )));
        }
        if self.approval_radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(SimulationError::Config("approval radii must be positive".into()));
        }
        self.chart.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub r_a: f64,
    pub trials: usize,
    pub successes: usize,
}

impl SweepRow {
    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// Ordered by parameter value, then approval radius.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn rate(&self, param_value: f64, r_a: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.param_value - param_value).abs() < 1e-9 && (r.r_a - r_a).abs() < 1e-9)
            .map(SweepRow::rate)
    }

    /// `param_value,R_a,trials,successes,rate`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param_value,R_a,trials,successes,rate\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.param_value,
                r.r_a,
                r.trials,
                r.successes,
                r.rate()
            );
        }
        out
    }
}

/// Runs simulated tutorials at every sweep value and scores each report against every approval
/// radius. Trial `t` at value index `v` draws from streams `(config.seed, v, t)` and
/// `(model.seed, v, t)`.
pub fn run_tutorial_sweep(
    config: &SweepConfig,
    model: &ParticipantModel,
    path_params: &PathParams,
    frame: FrameSize,
) -> Result<SweepResult, SimulationError> {
    config.validate()?;
    model.validate()?;
    let mut rows = Vec::with_capacity(config.values.len() * config.approval_radii.len());
    for (vi, &value) in config.values.iter().enumerate() {
        let (density, duration) = match config.axis {
            SweepAxis::Density => (value, config.chart_duration),
            SweepAxis::Duration => (config.chart.relative_density, value),
        };
        let chart_params = ChartParams {
            frame_width: frame.width,
            frame_height: frame.height,
            relative_density: density,
            ..config.chart
        };
        let mut successes = vec![0usize; config.approval_radii.len()];
        for trial in 0..config.trials_per_point {
            let path = (vi as u64, trial as u64);
            let tutorial = generate_tutorial(
                frame,
                path_params,
                &chart_params,
                derive_seed(config.seed, &[path.0, path.1]),
            )?;
            let mut rng = stream(model.seed, &[path.0, path.1]);
            let text = simulate_report(model, &tutorial.chart, tutorial.final_position, duration, &mut rng);
            for (count, &r_a) in successes.iter_mut().zip(&config.approval_radii) {
                if score_tutorial(&tutorial, &text, r_a).passed() {
                    *count += 1;
                }
            }
        }
        rows.extend(config.approval_radii.iter().zip(successes).map(|(&r_a, successes)| SweepRow {
            param_value: value,
            r_a,
            trials: config.trials_per_point,
            successes,
        }));
    }
    Ok(SweepResult {
        axis: config.axis,
        rows,
    })
}

/// One collected location with the gaze point that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectedSample {
    pub gaze: Point,
    pub location: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Valid reports resolved through the charts.
    pub ours: SampleSet<f64>,
    /// Direct draws from the ground truth, one per participant.
    pub truth_draws: SampleSet<f64>,
    pub collected: Vec<CollectedSample>,
    pub n_participants: usize,
}

/// Chart → simulated report → lookup for `n_participants` participants, plus an equal number
/// of direct draws from `truth` standing in for a hardware tracker.
pub fn run_pipeline_experiment(
    truth: &GazeMixture,
    n_participants: usize,
    chart_params: &ChartParams,
    chart_duration: f64,
    model: &ParticipantModel,
    seed: u64,
) -> Result<PipelineOutput, SimulationError> {
    if n_participants == 0 {
        return Err(SimulationError::Config("at least one participant is required".into()));
    }
    truth.validate()?;
    model.validate()?;
    chart_params.validate()?;
    let frame = chart_params.frame();
    let mut collected = Vec::new();
    let mut truth_points = Vec::with_capacity(n_participants);
    for i in 0..n_participants as u64 {
        let gaze = truth.sample(frame, &mut stream(seed, &[0, i]));
        let chart = generate_chart(&chart_params.with_seed(derive_seed(seed, &[1, i])))?;
        let text = simulate_report(model, &chart, gaze, chart_duration, &mut stream(model.seed, &[2, i]));
        if let Some(location) = chart.lookup(&text) {
            collected.push(CollectedSample { gaze, location });
        }
        truth_points.push(truth.sample(frame, &mut stream(seed, &[3, i])));
    }
    Ok(PipelineOutput {
        ours: SampleSet::new(frame, collected.iter().map(|c| c.location).collect())?,
        truth_draws: SampleSet::new(frame, truth_points)?,
        collected,
        n_participants,
    })
}

/// Largest distance between a gaze point and the anchor of its nearest triplet:
/// half the cell diagonal plus the largest jitter displacement.
pub fn quantization_bound(d_v: f64, d_h: f64, jitter_fraction: f64) -> f64 {
    (d_h / 2.0).hypot(d_v / 2.0) + jitter_fraction * d_v * std::f64::consts::SQRT_2
}

/// Expected share of reports that resolve to a chart triplet.
pub fn expected_valid_fraction(p_read: f64, p_garbage: f64) -> f64 {
    p_read + (1.0 - p_read) * (1.0 - p_garbage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn default_read_model_shape() {
        assert_eq!(default_p_read(1.0, 0.5), 1.0);
        assert_eq!(default_p_read(1.0, 0.3), 1.0);
        assert!((default_p_read(1.0, 0.9) - 0.2).abs() < 1e-12);
        assert_eq!(default_p_read(1.0, 1.0), 0.0);
        assert!((default_p_read(0.1, 0.5) - 0.2).abs() < 1e-12);
        assert!((default_p_read(0.25, 0.6) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn read_model_monotone() {
        for ti in 1..=15 {
            let t = ti as f64 / 10.0;
            for di in 3..10 {
                let d = di as f64 / 10.0;
                assert!(default_p_read(t, d + 0.1) <= default_p_read(t, d));
                assert!(default_p_read(t + 0.1, d) >= default_p_read(t, d));
            }
        }
    }

    #[test]
    fn perfect_reader_reports_attended_triplet() {
        let chart = generate_chart(&ChartParams::default().with_seed(8)).unwrap();
        let model = ParticipantModel::perfect(GazeMixture::single(Point::new(0.0, 0.0), 1.0), 1);
        let mut rng = rng_from_seed(0);
        for p in chart.placements.iter().step_by(7) {
            assert_eq!(simulate_report(&model, &chart, p.anchor, 1.0, &mut rng), p.label.to_string());
        }
    }

    #[test]
    fn garbage_never_resolves() {
        let chart = generate_chart(&ChartParams::default()).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..500 {
            assert_eq!(chart.lookup(&garbage_text(&mut rng)), None);
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(stepped_range(0.3, 1.0, 0.1), vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        assert_eq!(stepped_range(0.1, 1.5, 0.1).len(), 15);
        assert_eq!(stepped_range(20.0, 200.0, 20.0).len(), 10);
        assert!(stepped_range(1.0, 0.0, 0.1).is_empty());
    }

    #[test]
    fn sweep_validation() {
        let mut c = SweepConfig::density(0, 1);
        assert!(c.validate().is_err());
        c.trials_per_point = 3;
        assert!(c.validate().is_ok());
        c.values.push(1.2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn mixture_draws_stay_in_frame() {
        let frame = FrameSize::new(100, 80);
        let mix = GazeMixture::single(Point::new(95.0, 5.0), 40.0);
        let mut rng = rng_from_seed(2);
        for _ in 0..2000 {
            let p = mix.sample(frame, &mut rng);
            assert!(p.x >= 0.0 && p.x < 100.0 && p.y >= 0.0 && p.y < 80.0);
        }
    }

    #[test]
    fn pipeline_requires_participants() {
        let frame = FrameSize::new(1024, 576);
        let model = ParticipantModel::with_gaze(GazeMixture::two_blobs(frame), 0);
        assert!(run_pipeline_experiment(&model.gaze, 0, &ChartParams::default(), 1.0, &model, 0).is_err());
    }

    #[test]
    fn quantization_bound_default_geometry() {
        let b = quantization_bound(40.0, 80.0, 0.25);
        assert!((b - (1600.0f64 + 400.0).sqrt() - 10.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((b - 58.86).abs() < 0.01);
    }
}
