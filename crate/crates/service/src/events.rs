//! Event records, the unit of persistence. Server state is a fold over the log.

use chrono::{DateTime, Utc};
use crowdgaze::session::{Campaign, GazeSample, Session};
use crowdgaze::tutorial::{ParticipantScreeningState, TutorialOutcome, TutorialSpec};
use serde::{Deserialize, Serialize};

/// Client-side monotonic timestamps in milliseconds, stored for timing audits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClientTiming {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimulus_started_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_shown_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_hidden_at: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_submitted_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    CampaignCreated(Campaign),
    ParticipantAdmitted {
        participant_id: String,
        screen_width: u32,
        screen_height: u32,
        #[serde(default)]
        window_maximized: Option<bool>,
    },
    SessionBuilt(Session),
    TutorialIssued {
        session_id: String,
        step_id: u64,
        spec: Box<TutorialSpec>,
    },
    TutorialScored {
        session_id: String,
        step_id: u64,
        reported_text: String,
        outcome: TutorialOutcome,
        screening: ParticipantScreeningState,
        #[serde(default)]
        timing: Option<ClientTiming>,
    },
    TrialIssued {
        session_id: String,
        step_id: u64,
        trial_index: usize,
    },
    TrialAnswered {
        session_id: String,
        step_id: u64,
        trial_index: usize,
        reported_text: String,
        #[serde(default)]
        timing: Option<ClientTiming>,
    },
    SampleRecorded(GazeSample),
    SessionAbandoned {
        session_id: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::CampaignCreated(_) => "campaign_created",
            Event::ParticipantAdmitted { .. } => "participant_admitted",
            Event::SessionBuilt(_) => "session_built",
            Event::TutorialIssued { .. } => "tutorial_issued",
            Event::TutorialScored { .. } => "tutorial_scored",
            Event::TrialIssued { .. } => "trial_issued",
            Event::TrialAnswered { .. } => "trial_answered",
            Event::SampleRecorded(_) => "sample_recorded",
            Event::SessionAbandoned { .. } => "session_abandoned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Dense, starting at 1.
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
}
