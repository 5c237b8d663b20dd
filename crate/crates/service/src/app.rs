//! Commands and queries over the platform state. Every mutation computes its events from the
//! current state, appends them to the store, then folds them in, all under one lock.

use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};
use crowdgaze::analysis::{self, AnalysisError, ComparisonReport, DensityGrid, SampleSet};
use crowdgaze::rng::derive_seed;
use crowdgaze::session::{
    admit_participant, build_session, write_samples_csv, Admission, Campaign, ExperimentParams,
    FrameOfInterest, GazeSample, SessionStatus, TrialSpec, Video, DEFAULT_BATCH_SIZE,
};
use crowdgaze::tutorial::{
    generate_tutorial, score_tutorial, ParticipantScreeningState, ScreeningStatus, TutorialOutcome,
    TutorialSpec,
};
use crowdgaze::{FrameSize, Point};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{ClientTiming, Event, EventRecord};
use crate::state::{PendingStep, PlatformState, SessionRecord};
use crate::store::{EventStore, StoreError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("refused: {0}")]
    Forbidden(String),
    #[error("invalid request")]
    Unprocessable(Vec<FieldError>),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ApiError::Unprocessable(vec![FieldError {
            field: field.into(),
            reason: reason.into(),
        }])
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::Internal(e.to_string())
    }
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

#[derive(Debug, Clone)]
pub struct PlatformConfig {
    /// Root of every seed the server derives when a request does not supply one.
    pub server_seed: u64,
    /// Sessions idle longer than this are marked abandoned; `None` disables expiry.
    pub abandon_after: Option<Duration>,
    /// Write a snapshot after this many events; 0 disables snapshots.
    pub snapshot_every: u64,
    /// Parameters for campaigns that omit some or all of them.
    pub default_params: ExperimentParams,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            server_seed: 0,
            abandon_after: Some(Duration::minutes(30)),
            snapshot_every: 1000,
            default_params: ExperimentParams::default(),
        }
    }
}

/// Body of `POST /campaigns`. `parameters` may be partial; missing fields take server defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
pub struct CampaignDefinition {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub videos: Option<Vec<Video>>,
    #[serde(default)]
    pub frames_of_interest: Vec<FrameOfInterest>,
    #[serde(default)]
    pub parameters: Option<serde_json::Value>,
    #[serde(default)]
    pub pay_per_session: Option<f64>,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignCreated {
    pub campaign_id: String,
    pub frames_of_interest: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct AdmissionRequest {
    pub screen_width: u32,
    pub screen_height: u32,
    #[serde(default)]
    pub window_maximized: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionResponse {
    pub participant_id: String,
    /// Set when the client reports a window that is not maximized.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advisory: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct SessionRequest {
    pub campaign_id: String,
    pub participant_id: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub trial_count: usize,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepView {
    Tutorial {
        step_id: u64,
        /// 1-based attempt number across all of the participant's sessions.
        attempt: u32,
        approval_radius: f64,
        spec: Box<TutorialSpec>,
    },
    Trial {
        step_id: u64,
        trial_index: usize,
        trial_count: usize,
        spec: Box<TrialSpec>,
    },
    Done {
        trials_completed: usize,
    },
    Rejected {
        screening: ParticipantScreeningState,
    },
    Abandoned,
}

impl StepView {
    pub fn kind(&self) -> &'static str {
        match self {
            StepView::Tutorial { .. } => "tutorial",
            StepView::Trial { .. } => "trial",
            StepView::Done { .. } => "done",
            StepView::Rejected { .. } => "rejected",
            StepView::Abandoned => "abandoned",
        }
    }

    pub fn step_id(&self) -> Option<u64> {
        match self {
            StepView::Tutorial { step_id, .. } | StepView::Trial { step_id, .. } => Some(*step_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ResponseSubmission {
    pub text: String,
    #[serde(default)]
    pub timing: Option<ClientTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubmitOutcome {
    Tutorial {
        #[serde(flatten)]
        outcome: TutorialOutcome,
        screening: ParticipantScreeningState,
    },
    Trial {
        valid: bool,
        location: Option<Point>,
        trials_remaining: usize,
    },
}

struct Inner {
    state: PlatformState,
    store: Box<dyn EventStore>,
    since_snapshot: u64,
}

pub struct Platform {
    inner: Mutex<Inner>,
    config: PlatformConfig,
    clock: Clock,
}

impl Platform {
    /// Rebuilds state from the store: the snapshot if present, then every later event.
    pub fn open(store: Box<dyn EventStore>, config: PlatformConfig, clock: Clock) -> Result<Self, ApiError> {
        let records = store.load()?;
        let mut state = match store.load_snapshot()? {
            Some(s) if s.last_seq as usize <= records.len() => s,
            _ => PlatformState::default(),
        };
        for r in records.iter().skip(state.last_seq as usize) {
            state.apply(r).map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        Ok(Self {
            inner: Mutex::new(Inner {
                state,
                store,
                since_snapshot: 0,
            }),
            config,
            clock,
        })
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // a panic mid-command never leaves a partial batch behind the lock, so poison is benign
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn state(&self) -> PlatformState {
        self.lock().state.clone()
    }

    pub fn events(&self) -> Result<Vec<EventRecord>, ApiError> {
        Ok(self.lock().store.load()?)
    }

    /// State folded from the stored log alone, ignoring the live copy and any snapshot.
    pub fn replay_from_log(&self) -> Result<PlatformState, ApiError> {
        PlatformState::replay(&self.events()?).map_err(|e| ApiError::Internal(e.to_string()))
    }

    fn commit(&self, inner: &mut Inner, now: DateTime<Utc>, events: Vec<Event>) -> Result<(), ApiError> {
        let first = inner.state.last_seq + 1;
        let records: Vec<EventRecord> = events
            .into_iter()
            .enumerate()
            .map(|(i, event)| EventRecord {
                seq: first + i as u64,
                timestamp: now,
                event,
            })
            .collect();
        inner.store.append(&records)?;
        for r in &records {
            inner
                .state
                .apply(r)
                .map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        inner.since_snapshot += records.len() as u64;
        if self.config.snapshot_every > 0 && inner.since_snapshot >= self.config.snapshot_every {
            let snapshot = inner.state.clone();
            inner.store.save_snapshot(&snapshot)?;
            inner.since_snapshot = 0;
        }
        Ok(())
    }

    fn resolve_params(&self, given: Option<serde_json::Value>) -> Result<ExperimentParams, ApiError> {
        let Some(given) = given else {
            return Ok(self.config.default_params);
        };
        let serde_json::Value::Object(overrides) = given else {
            return Err(ApiError::field("parameters", "must be an object"));
        };
        let mut merged = serde_json::to_value(self.config.default_params)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        let target = merged.as_object_mut().expect("parameters serialize as an object");
        for (k, v) in overrides {
            if !target.contains_key(&k) {
                return Err(ApiError::field(format!("parameters.{k}"), "unknown parameter"));
            }
            target.insert(k, v);
        }
        serde_json::from_value(merged).map_err(|e| ApiError::field("parameters", e.to_string()))
    }

    pub fn create_campaign(&self, definition: CampaignDefinition) -> Result<CampaignCreated, ApiError> {
        let parameters = self.resolve_params(definition.parameters)?;
        let mut inner = self.lock();
        let mut problems = Vec::new();
        if definition.videos.is_none() {
            problems.push(FieldError {
                field: "videos".into(),
                reason: "missing".into(),
            });
        }
        let id = definition
            .id
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        if id.is_empty() {
            problems.push(FieldError {
                field: "id".into(),
                reason: "must not be empty".into(),
            });
        }
        let campaign = Campaign {
            id,
            videos: definition.videos.unwrap_or_default(),
            frames_of_interest: definition.frames_of_interest,
            parameters,
            pay_per_session: definition.pay_per_session.unwrap_or(0.15),
            batch_size: definition.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
        };
        for (field, reason) in campaign.problems() {
            if field != "videos" || definition_had_videos(&problems) {
                problems.push(FieldError { field, reason });
            }
        }
        if !problems.is_empty() {
            return Err(ApiError::Unprocessable(problems));
        }
        if inner.state.campaigns.contains_key(&campaign.id) {
            return Err(ApiError::Conflict(format!("campaign {} exists", campaign.id)));
        }
        let created = CampaignCreated {
            campaign_id: campaign.id.clone(),
            frames_of_interest: campaign.frames_of_interest.len(),
        };
        let now = (self.clock)();
        self.commit(&mut inner, now, vec![Event::CampaignCreated(campaign)])?;
        Ok(created)
    }

    pub fn admit(&self, request: AdmissionRequest) -> Result<AdmissionResponse, ApiError> {
        if admit_participant(request.screen_width, request.screen_height) == Admission::Refused {
            return Err(ApiError::Forbidden(format!(
                "screen {}x{} is below the 1024x768 minimum",
                request.screen_width, request.screen_height
            )));
        }
        let participant_id = uuid::Uuid::new_v4().to_string();
        let mut inner = self.lock();
        let now = (self.clock)();
        self.commit(
            &mut inner,
            now,
            vec![Event::ParticipantAdmitted {
                participant_id: participant_id.clone(),
                screen_width: request.screen_width,
                screen_height: request.screen_height,
                window_maximized: request.window_maximized,
            }],
        )?;
        Ok(AdmissionResponse {
            participant_id,
            advisory: (request.window_maximized == Some(false))
                .then(|| "please maximize the browser window".to_owned()),
        })
    }

    pub fn create_session(&self, request: SessionRequest) -> Result<SessionCreated, ApiError> {
        let mut inner = self.lock();
        let now = (self.clock)();
        let mut events = Vec::new();
        let state = &inner.state;
        let campaign = state
            .campaigns
            .get(&request.campaign_id)
            .ok_or_else(|| ApiError::NotFound(format!("campaign {}", request.campaign_id)))?;
        let participant = state
            .participants
            .get(&request.participant_id)
            .ok_or_else(|| ApiError::NotFound(format!("participant {}", request.participant_id)))?;
        if participant.screening.status == ScreeningStatus::Rejected {
            return Err(ApiError::Conflict("participant was rejected by screening".into()));
        }
        if let Some(active) = state.active_session(&request.participant_id) {
            if self.is_idle(active, now) {
                events.push(Event::SessionAbandoned {
                    session_id: active.session.id.clone(),
                });
            } else {
                return Err(ApiError::Conflict(format!(
                    "participant already has active session {}",
                    active.session.id
                )));
            }
        }
        let seed = request
            .seed
            .unwrap_or_else(|| derive_seed(self.config.server_seed, &[state.last_seq + 1]));
        let session_id = uuid::Uuid::new_v4().to_string();
        let session = build_session(
            campaign,
            session_id.clone(),
            request.participant_id.clone(),
            participant.screening,
            seed,
        )
        .map_err(|e| ApiError::Internal(e.to_string()))?;
        let created = SessionCreated {
            session_id,
            trial_count: session.trials.len(),
            status: session.status,
        };
        events.push(Event::SessionBuilt(session));
        self.commit(&mut inner, now, events)?;
        Ok(created)
    }

    fn is_idle(&self, rec: &SessionRecord, now: DateTime<Utc>) -> bool {
        !rec.session.is_terminal()
            && self
                .config
                .abandon_after
                .is_some_and(|limit| now - rec.last_activity > limit)
    }

    /// Abandons `session_id` first if it has been idle too long.
    fn expire_if_idle(&self, inner: &mut Inner, session_id: &str, now: DateTime<Utc>) -> Result<(), ApiError> {
        let rec = inner
            .state
            .sessions
            .get(session_id)
            .ok_or_else(|| ApiError::NotFound(format!("session {session_id}")))?;
        if self.is_idle(rec, now) {
            self.commit(
                inner,
                now,
                vec![Event::SessionAbandoned {
                    session_id: session_id.to_owned(),
                }],
            )?;
        }
        Ok(())
    }

    /// Marks every idle session abandoned; returns their ids.
    pub fn expire_idle(&self) -> Result<Vec<String>, ApiError> {
        let mut inner = self.lock();
        let now = (self.clock)();
        let idle: Vec<String> = inner
            .state
            .sessions
            .values()
            .filter(|r| self.is_idle(r, now))
            .map(|r| r.session.id.clone())
            .collect();
        if !idle.is_empty() {
            let events = idle
                .iter()
                .map(|id| Event::SessionAbandoned { session_id: id.clone() })
                .collect();
            self.commit(&mut inner, now, events)?;
        }
        Ok(idle)
    }

    fn view_pending(rec: &SessionRecord, pending: &PendingStep, r_a: f64) -> StepView {
        match pending {
            PendingStep::Tutorial { step_id, spec } => StepView::Tutorial {
                step_id: *step_id,
                attempt: rec.session.screening.attempts + 1,
                approval_radius: r_a,
                spec: spec.clone(),
            },
            PendingStep::Trial {
                step_id,
                trial_index,
            } => StepView::Trial {
                step_id: *step_id,
                trial_index: *trial_index,
                trial_count: rec.session.trials.len(),
                spec: Box::new(rec.session.trials[*trial_index].clone()),
            },
        }
    }

    /// The step the session is waiting on, issuing a new one when nothing is pending.
    pub fn next_step(&self, session_id: &str) -> Result<StepView, ApiError> {
        let mut inner = self.lock();
        let now = (self.clock)();
        self.expire_if_idle(&mut inner, session_id, now)?;
        let rec = &inner.state.sessions[session_id];
        let campaign = &inner.state.campaigns[&rec.session.campaign_id];
        let params = campaign.parameters;
        if let Some(p) = &rec.pending {
            return Ok(Self::view_pending(rec, p, params.r_a));
        }
        let step_id = rec.next_step_id;
        let event = match rec.session.status {
            SessionStatus::Completed => {
                return Ok(StepView::Done {
                    trials_completed: rec.session.cursor,
                })
            }
            SessionStatus::Rejected => {
                return Ok(StepView::Rejected {
                    screening: rec.session.screening,
                })
            }
            SessionStatus::Abandoned => return Ok(StepView::Abandoned),
            SessionStatus::Screening => {
                let participant = &inner.state.participants[&rec.session.participant_id];
                let seed = derive_seed(rec.session.seed, &[2, participant.screening.attempts as u64]);
                let frame: FrameSize = params.tutorial_frame;
                let spec = generate_tutorial(frame, &params.path_params(), &params.chart_params(frame, seed), seed)
                    .map_err(|e| ApiError::Internal(e.to_string()))?;
                Event::TutorialIssued {
                    session_id: session_id.to_owned(),
                    step_id,
                    spec: Box::new(spec),
                }
            }
            SessionStatus::Running => Event::TrialIssued {
                session_id: session_id.to_owned(),
                step_id,
                trial_index: rec.session.cursor,
            },
        };
        self.commit(&mut inner, now, vec![event])?;
        let rec = &inner.state.sessions[session_id];
        let pending = rec.pending.as_ref().expect("a step was just issued");
        Ok(Self::view_pending(rec, pending, params.r_a))
    }

    pub fn submit(&self, session_id: &str, step_id: u64, submission: ResponseSubmission) -> Result<SubmitOutcome, ApiError> {
        let mut inner = self.lock();
        let now = (self.clock)();
        self.expire_if_idle(&mut inner, session_id, now)?;
        let rec = &inner.state.sessions[session_id];
        let pending = match &rec.pending {
            Some(p) if p.step_id() == step_id => p,
            _ => {
                return Err(ApiError::Conflict(format!(
                    "step {step_id} is not the pending step of session {session_id}"
                )))
            }
        };
        let r_a = inner.state.campaigns[&rec.session.campaign_id].parameters.r_a;
        let (events, outcome) = match pending {
            PendingStep::Tutorial { spec, .. } => {
                let outcome = score_tutorial(spec, &submission.text, r_a);
                let participant = &inner.state.participants[&rec.session.participant_id];
                let screening = participant
                    .screening
                    .record(outcome.passed())
                    .map_err(|e| ApiError::Conflict(e.to_string()))?;
                (
                    vec![Event::TutorialScored {
                        session_id: session_id.to_owned(),
                        step_id,
                        reported_text: submission.text,
                        outcome,
                        screening,
                        timing: submission.timing,
                    }],
                    SubmitOutcome::Tutorial { outcome, screening },
                )
            }
            PendingStep::Trial { trial_index, .. } => {
                let mut session = rec.session.clone();
                let sample = session
                    .submit_trial_response(*trial_index, &submission.text, now)
                    .map_err(|e| ApiError::Conflict(e.to_string()))?;
                let outcome = SubmitOutcome::Trial {
                    valid: sample.valid,
                    location: sample.location,
                    trials_remaining: session.trials.len() - session.cursor,
                };
                (
                    vec![
                        Event::TrialAnswered {
                            session_id: session_id.to_owned(),
                            step_id,
                            trial_index: *trial_index,
                            reported_text: submission.text,
                            timing: submission.timing,
                        },
                        Event::SampleRecorded(sample),
                    ],
                    outcome,
                )
            }
        };
        self.commit(&mut inner, now, events)?;
        Ok(outcome)
    }

    /// All samples for frame `frame_index` of the campaign, plus the frame size.
    pub fn frame_samples(&self, campaign_id: &str, frame_index: usize) -> Result<(FrameSize, Vec<GazeSample>), ApiError> {
        let inner = self.lock();
        let campaign = inner
            .state
            .campaigns
            .get(campaign_id)
            .ok_or_else(|| ApiError::NotFound(format!("campaign {campaign_id}")))?;
        let foi = campaign
            .frames_of_interest
            .get(frame_index)
            .ok_or_else(|| ApiError::NotFound(format!("frame {frame_index} of campaign {campaign_id}")))?;
        let frame = campaign
            .video(&foi.video_id)
            .map(Video::frame)
            .ok_or_else(|| ApiError::Internal("frame of interest without video".into()))?;
        let samples = inner
            .state
            .samples
            .iter()
            .filter(|s| {
                s.campaign_id == campaign_id && s.video_id == foi.video_id && s.frame_time_ms == foi.frame_time_ms
            })
            .cloned()
            .collect();
        Ok((frame, samples))
    }

    pub fn samples_csv(&self, campaign_id: &str, frame_index: usize) -> Result<Vec<u8>, ApiError> {
        let (_, samples) = self.frame_samples(campaign_id, frame_index)?;
        let mut out = Vec::new();
        write_samples_csv(&samples, &mut out).map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(out)
    }

    fn valid_set(&self, campaign_id: &str, frame_index: usize) -> Result<SampleSet<f64>, ApiError> {
        let (frame, samples) = self.frame_samples(campaign_id, frame_index)?;
        let points: Vec<Point> = samples.iter().filter_map(|s| s.location).collect();
        let set = SampleSet::new(frame, points).map_err(|e| ApiError::Internal(e.to_string()))?;
        if set.is_empty() {
            return Err(ApiError::Conflict("frame has no valid samples".into()));
        }
        Ok(set)
    }

    pub fn density(&self, campaign_id: &str, frame_index: usize, downsample: u32) -> Result<DensityGrid<f64>, ApiError> {
        if downsample == 0 {
            return Err(ApiError::field("downsample", "must be at least 1"));
        }
        let set = self.valid_set(campaign_id, frame_index)?;
        let bw = analysis::estimate_bandwidth(&set).map_err(analysis_error)?;
        analysis::kde_downsampled(&set, &bw, downsample).map_err(analysis_error)
    }

    pub fn heatmap_pgm(&self, campaign_id: &str, frame_index: usize, downsample: u32) -> Result<Vec<u8>, ApiError> {
        let grid = self.density(campaign_id, frame_index, downsample)?;
        Ok(analysis::render_heatmap(&grid).to_pgm())
    }

    /// Compares the frame's valid samples with a reference sample file in the CSV format.
    pub fn compare(
        &self,
        campaign_id: &str,
        frame_index: usize,
        reference_csv: &[u8],
        downsample: u32,
    ) -> Result<ComparisonReport<f64>, ApiError> {
        if downsample == 0 {
            return Err(ApiError::field("downsample", "must be at least 1"));
        }
        let ours = self.valid_set(campaign_id, frame_index)?;
        let reference = analysis::read_samples::<f64, _>(reference_csv).map_err(analysis_error)?;
        if reference.samples.is_empty() {
            return Err(ApiError::field("reference", "no samples inside the frame"));
        }
        if reference.samples.frame() != ours.frame() {
            return Err(ApiError::field(
                "reference",
                format!(
                    "frame {}x{} differs from the video's {}x{}",
                    reference.samples.width, reference.samples.height, ours.width, ours.height
                ),
            ));
        }
        analysis::compare(&ours, &reference.samples, downsample).map_err(analysis_error)
    }
}

fn definition_had_videos(problems: &[FieldError]) -> bool {
    !problems.iter().any(|p| p.field == "videos")
}

fn analysis_error(e: AnalysisError) -> ApiError {
    match e {
        AnalysisError::Parse { lines, message } => ApiError::Unprocessable(
            lines
                .into_iter()
                .map(|l| FieldError {
                    field: format!("reference:line {l}"),
                    reason: message.clone(),
                })
                .collect(),
        ),
        AnalysisError::Empty => ApiError::Conflict("no samples".into()),
        AnalysisError::Underflow => ApiError::Conflict("density underflows".into()),
        other => ApiError::field("reference", other.to_string()),
    }
}
