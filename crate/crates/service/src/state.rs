use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use crowdgaze::session::{Campaign, GazeSample, Session};
use crowdgaze::tutorial::{ParticipantScreeningState, TutorialSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Event, EventRecord};

#[derive(Debug, Error, PartialEq)]
#[error("event {seq} cannot be applied: {reason}")]
pub struct ReplayError {
    pub seq: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub screen_width: u32,
    pub screen_height: u32,
    pub window_maximized: Option<bool>,
    /// Carried across sessions, never reset.
    pub screening: ParticipantScreeningState,
    pub sessions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PendingStep {
    Tutorial { step_id: u64, spec: Box<TutorialSpec> },
    Trial { step_id: u64, trial_index: usize },
}

impl PendingStep {
    pub fn step_id(&self) -> u64 {
        match self {
            PendingStep::Tutorial { step_id, .. } | PendingStep::Trial { step_id, .. } => *step_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session: Session,
    pub pending: Option<PendingStep>,
    pub next_step_id: u64,
    pub tutorials_issued: u32,
    pub created_at: DateTime<Utc>,
    pub last_activity: DateTime<Utc>,
}

/// Everything the server knows, rebuilt by folding [`EventRecord`]s in sequence order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlatformState {
    pub last_seq: u64,
    pub campaigns: BTreeMap<String, Campaign>,
    pub participants: BTreeMap<String, ParticipantRecord>,
    pub sessions: BTreeMap<String, SessionRecord>,
    pub samples: Vec<GazeSample>,
}

impl PlatformState {
    pub fn replay<'a>(records: impl IntoIterator<Item = &'a EventRecord>) -> Result<Self, ReplayError> {
        let mut state = Self::default();
        for r in records {
            state.apply(r)?;
        }
        Ok(state)
    }

    /// The participant's session that has not finished yet, if any.
    pub fn active_session(&self, participant_id: &str) -> Option<&SessionRecord> {
        self.participants
            .get(participant_id)?
            .sessions
            .iter()
            .filter_map(|id| self.sessions.get(id))
            .find(|r| !r.session.is_terminal())
    }

    pub fn apply(&mut self, record: &EventRecord) -> Result<(), ReplayError> {
        let seq = record.seq;
        let fail = |reason: String| ReplayError { seq, reason };
        if seq != self.last_seq + 1 {
            return Err(fail(format!("expected sequence number {}", self.last_seq + 1)));
        }
        let at = record.timestamp;
        match &record.event {
            Event::CampaignCreated(c) => {
                if self.campaigns.contains_key(&c.id) {
                    return Err(fail(format!("campaign {} exists", c.id)));
                }
                self.campaigns.insert(c.id.clone(), c.clone());
            }
            Event::ParticipantAdmitted {
                participant_id,
                screen_width,
                screen_height,
                window_maximized,
            } => {
                if self.participants.contains_key(participant_id) {
                    return Err(fail(format!("participant {participant_id} exists")));
                }
                self.participants.insert(
                    participant_id.clone(),
                    ParticipantRecord {
                        screen_width: *screen_width,
                        screen_height: *screen_height,
                        window_maximized: *window_maximized,
                        screening: ParticipantScreeningState::default(),
                        sessions: Vec::new(),
                    },
                );
            }
            Event::SessionBuilt(session) => {
                if self.sessions.contains_key(&session.id) {
                    return Err(fail(format!("session {} exists", session.id)));
                }
                let participant = self
                    .participants
                    .get_mut(&session.participant_id)
                    .ok_or_else(|| fail(format!("unknown participant {}", session.participant_id)))?;
                participant.sessions.push(session.id.clone());
                self.sessions.insert(
                    session.id.clone(),
                    SessionRecord {
                        session: session.clone(),
                        pending: None,
                        next_step_id: 1,
                        tutorials_issued: 0,
                        created_at: at,
                        last_activity: at,
                    },
                );
            }
            Event::TutorialIssued {
                session_id,
                step_id,
                spec,
            } => {
                let rec = self.session_mut(session_id).map_err(fail)?;
                if rec.pending.is_some() || *step_id != rec.next_step_id {
                    return Err(fail(format!("tutorial step {step_id} out of order")));
                }
                rec.pending = Some(PendingStep::Tutorial {
                    step_id: *step_id,
                    spec: spec.clone(),
                });
                rec.next_step_id += 1;
                rec.tutorials_issued += 1;
                rec.last_activity = at;
            }
            Event::TutorialScored {
                session_id,
                step_id,
                outcome,
                screening,
                ..
            } => {
                let rec = self.sessions.get_mut(session_id).ok_or_else(|| fail(format!("unknown session {session_id}")))?;
                match &rec.pending {
                    Some(PendingStep::Tutorial { step_id: s, .. }) if s == step_id => {}
                    _ => return Err(fail(format!("no pending tutorial {step_id}"))),
                }
                let participant = self
                    .participants
                    .get_mut(&rec.session.participant_id)
                    .ok_or_else(|| fail("session without participant".into()))?;
                rec.session.screening = participant.screening;
                rec.session
                    .record_tutorial(outcome.passed())
                    .map_err(|e| fail(e.to_string()))?;
                if rec.session.screening != *screening {
                    return Err(fail("recorded screening state disagrees with replay".into()));
                }
                participant.screening = rec.session.screening;
                rec.pending = None;
                rec.last_activity = at;
            }
            Event::TrialIssued {
                session_id,
                step_id,
                trial_index,
            } => {
                let rec = self.session_mut(session_id).map_err(fail)?;
                if rec.pending.is_some() || *step_id != rec.next_step_id || *trial_index != rec.session.cursor {
                    return Err(fail(format!("trial step {step_id} out of order")));
                }
                rec.pending = Some(PendingStep::Trial {
                    step_id: *step_id,
                    trial_index: *trial_index,
                });
                rec.next_step_id += 1;
                rec.last_activity = at;
            }
            Event::TrialAnswered {
                session_id,
                step_id,
                trial_index,
                reported_text,
                ..
            } => {
                let rec = self.session_mut(session_id).map_err(fail)?;
                match rec.pending {
                    Some(PendingStep::Trial { step_id: s, trial_index: t }) if s == *step_id && t == *trial_index => {}
                    _ => return Err(fail(format!("no pending trial step {step_id}"))),
                }
                rec.session
                    .submit_trial_response(*trial_index, reported_text, at)
                    .map_err(|e| fail(e.to_string()))?;
                rec.pending = None;
                rec.last_activity = at;
            }
            Event::SampleRecorded(sample) => {
                if !self.sessions.contains_key(&sample.session_id) {
                    return Err(fail(format!("sample for unknown session {}", sample.session_id)));
                }
                self.samples.push(sample.clone());
            }
            Event::SessionAbandoned { session_id } => {
                let rec = self.session_mut(session_id).map_err(fail)?;
                rec.session.abandon();
                rec.pending = None;
                rec.last_activity = at;
            }
        }
        self.last_seq = seq;
        Ok(())
    }

    fn session_mut(&mut self, session_id: &str) -> Result<&mut SessionRecord, String> {
        self.sessions
            .get_mut(session_id)
            .ok_or_else(|| format!("unknown session {session_id}"))
    }
}
