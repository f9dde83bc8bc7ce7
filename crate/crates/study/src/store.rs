//! Durable study state: registered templates, participants and responses.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use bayesvis_core::analysis::{AnalysisError, ResponseRow, ResponseTable};
use bayesvis_core::scoring::{evaluate_response, ResponsePayload, ScoreError, ScoreRecord};
use bayesvis_core::task::TaskSpec;
use rand::Rng;
use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blobs::{BlobError, BlobStore};
use crate::expand::expand_for_user;
use crate::template::{StudyTemplate, TemplateError};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("expected a response to task `{expected}`, got `{got}`")]
    SequenceViolation { expected: String, got: String },
    #[error("task `{0}` already answered")]
    AlreadyAnswered(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("scoring failed: {0}")]
    Scoring(ScoreError),
    #[error("study `{0}` is already registered with a different template")]
    Conflict(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("database: {0}")]
    Database(#[from] rusqlite::Error),
    #[error("stored record is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
}

impl From<ScoreError> for StudyError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::InvalidResponse(m) => StudyError::InvalidResponse(m),
            ScoreError::EmptyResponse => StudyError::InvalidResponse("no chips placed".into()),
            other => StudyError::Scoring(other),
        }
    }
}

/// One client-side interaction, timestamped in ms since the task was loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLogEntry {
    pub action: String,
    #[serde(default)]
    pub digest: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub user_id: String,
    pub study_id: String,
    pub seed: u64,
    pub task_order: Vec<String>,
    pub cursor: usize,
    pub cumulative_reward: f64,
    /// Milliseconds since the Unix epoch.
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub user_id: String,
    pub task_id: String,
    pub position: usize,
    pub payload: ResponsePayload,
    pub score: ScoreRecord,
    pub action_log: Vec<ActionLogEntry>,
    /// Milliseconds since the Unix epoch; non-decreasing per participant.
    pub submitted_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task {
        position: usize,
        total: usize,
        cumulative_reward: f64,
        task: Box<TaskSpec>,
    },
    Complete {
        answered: usize,
        cumulative_reward: f64,
    },
}

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS studies (
    id          TEXT PRIMARY KEY,
    template    TEXT NOT NULL,
    created_at  INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS participants (
    user_id            TEXT PRIMARY KEY,
    study_id           TEXT NOT NULL REFERENCES studies(id),
    seed               INTEGER NOT NULL,
    task_order         TEXT NOT NULL,
    cursor             INTEGER NOT NULL,
    cumulative_reward  REAL NOT NULL,
    created_at         INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS responses (
    user_id       TEXT NOT NULL REFERENCES participants(user_id),
    task_id       TEXT NOT NULL,
    position      INTEGER NOT NULL,
    payload       TEXT NOT NULL,
    score         TEXT NOT NULL,
    reward        REAL NOT NULL,
    action_log    TEXT NOT NULL,
    submitted_at  INTEGER NOT NULL,
    PRIMARY KEY (user_id, task_id)
);
";

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as i64)
}

struct Inner {
    conn: Connection,
    studies: HashMap<String, Arc<StudyTemplate>>,
}

/// All mutations run under one lock, so each participant's requests are serialized
/// and every write is committed before the call returns.
pub struct StudyStore {
    inner: Mutex<Inner>,
}

impl StudyStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StudyError> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self, StudyError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, StudyError> {
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            inner: Mutex::new(Inner {
                conn,
                studies: HashMap::new(),
            }),
        })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Stores a template under its id. Registering the same template again is a no-op.
    pub fn register_study(&self, template: &StudyTemplate) -> Result<String, StudyError> {
        let body = serde_json::to_string(template)?;
        let mut inner = self.lock();
        let existing: Option<String> = inner
            .conn
            .query_row("SELECT template FROM studies WHERE id = ?1", [&template.id], |r| r.get(0))
            .optional()?;
        match existing {
            Some(stored) if stored == body => {}
            Some(_) => return Err(StudyError::Conflict(template.id.clone())),
            None => {
                inner.conn.execute(
                    "INSERT INTO studies (id, template, created_at) VALUES (?1, ?2, ?3)",
                    params![template.id, body, now_ms()],
                )?;
            }
        }
        inner.studies.insert(template.id.clone(), Arc::new(template.clone()));
        Ok(template.id.clone())
    }

    pub fn study(&self, study_id: &str) -> Result<Arc<StudyTemplate>, StudyError> {
        study_in(&mut self.lock(), study_id)
    }

    pub fn study_ids(&self) -> Result<Vec<String>, StudyError> {
        let inner = self.lock();
        let mut stmt = inner.conn.prepare("SELECT id FROM studies ORDER BY id")?;
        let ids = stmt.query_map([], |r| r.get(0))?.collect::<Result<_, _>>()?;
        Ok(ids)
    }

    /// Subscribes with identifiers and task order drawn from the thread RNG.
    pub fn subscribe(&self, study_id: &str) -> Result<ParticipantRecord, StudyError> {
        self.subscribe_with(study_id, &mut rand::rng())
    }

    /// Subscribes a new participant: a 128-bit hex user id and an expansion seed are
    /// drawn from `rng`.
    pub fn subscribe_with(&self, study_id: &str, rng: &mut impl Rng) -> Result<ParticipantRecord, StudyError> {
        let mut inner = self.lock();
        let template = study_in(&mut inner, study_id)?;
        let seed: u64 = rng.random();
        let task_order: Vec<String> = expand_for_user(&template, seed).into_iter().map(|t| t.id).collect();
        let record = ParticipantRecord {
            user_id: format!("{:032x}", rng.random::<u128>()),
            study_id: study_id.to_owned(),
            seed,
            task_order,
            cursor: 0,
            cumulative_reward: 0.0,
            created_at: now_ms(),
        };
        inner.conn.execute(
            "INSERT INTO participants (user_id, study_id, seed, task_order, cursor, cumulative_reward, created_at)
             VALUES (?1, ?2, ?3, ?4, 0, 0.0, ?5)",
            params![
                record.user_id,
                record.study_id,
                record.seed as i64,
                serde_json::to_string(&record.task_order)?,
                record.created_at
            ],
        )?;
        Ok(record)
    }

    pub fn participant(&self, study_id: &str, user_id: &str) -> Result<ParticipantRecord, StudyError> {
        participant_in(&self.lock().conn, study_id, user_id)
    }

    pub fn participants(&self, study_id: &str) -> Result<Vec<ParticipantRecord>, StudyError> {
        let inner = self.lock();
        let ids: Vec<String> = {
            let mut stmt = inner
                .conn
                .prepare("SELECT user_id FROM participants WHERE study_id = ?1 ORDER BY created_at, user_id")?;
            let rows = stmt.query_map([study_id], |r| r.get(0))?;
            rows.collect::<Result<_, _>>()?
        };
        ids.iter().map(|u| participant_in(&inner.conn, study_id, u)).collect()
    }

    /// The first unanswered task, or the completion marker. Idempotent.
    pub fn next_task(&self, study_id: &str, user_id: &str) -> Result<NextTask, StudyError> {
        let mut inner = self.lock();
        let p = participant_in(&inner.conn, study_id, user_id)?;
        let template = study_in(&mut inner, study_id)?;
        if p.cursor >= p.task_order.len() {
            return Ok(NextTask::Complete {
                answered: p.cursor,
                cumulative_reward: p.cumulative_reward,
            });
        }
        let id = &p.task_order[p.cursor];
        let task = template
            .task(id)
            .ok_or_else(|| StudyError::NotFound(format!("task `{id}`")))?
            .clone();
        Ok(NextTask::Task {
            position: p.cursor,
            total: p.task_order.len(),
            cumulative_reward: p.cumulative_reward,
            task: Box::new(task),
        })
    }

    /// Scores and stores a response to the participant's current task, advancing
    /// the cursor in the same transaction.
    pub fn record_response(
        &self,
        study_id: &str,
        user_id: &str,
        task_id: &str,
        payload: ResponsePayload,
        action_log: Vec<ActionLogEntry>,
        blobs: &BlobStore,
    ) -> Result<ResponseRecord, StudyError> {
        let mut inner = self.lock();
        let p = participant_in(&inner.conn, study_id, user_id)?;
        let template = study_in(&mut inner, study_id)?;
        let answered: bool = inner.conn.query_row(
            "SELECT EXISTS (SELECT 1 FROM responses WHERE user_id = ?1 AND task_id = ?2)",
            params![user_id, task_id],
            |r| r.get(0),
        )?;
        if answered {
            return Err(StudyError::AlreadyAnswered(task_id.to_owned()));
        }
        match p.task_order.get(p.cursor) {
            Some(current) if current == task_id => {}
            Some(current) => {
                return Err(StudyError::SequenceViolation {
                    expected: current.clone(),
                    got: task_id.to_owned(),
                })
            }
            None => {
                return Err(StudyError::SequenceViolation {
                    expected: "<study complete>".into(),
                    got: task_id.to_owned(),
                })
            }
        }
        if action_log.windows(2).any(|w| w[1].timestamp_ms < w[0].timestamp_ms) {
            return Err(StudyError::InvalidResponse("action log timestamps decrease".into()));
        }
        let task = template
            .task(task_id)
            .ok_or_else(|| StudyError::NotFound(format!("task `{task_id}`")))?;
        let model = blobs.get(&task.model_ref)?;
        let score = evaluate_response(task, &payload, &model.samples)?;
        let tx = inner.conn.transaction()?;
        let last: Option<i64> = tx.query_row(
            "SELECT MAX(submitted_at) FROM responses WHERE user_id = ?1",
            [user_id],
            |r| r.get(0),
        )?;
        let record = ResponseRecord {
            user_id: user_id.to_owned(),
            task_id: task_id.to_owned(),
            position: p.cursor,
            payload,
            score,
            action_log,
            submitted_at: now_ms().max(last.unwrap_or(i64::MIN)),
        };
        insert_response(&tx, &record)?;
        tx.execute(
            "UPDATE participants SET cursor = cursor + 1, cumulative_reward = cumulative_reward + ?2 WHERE user_id = ?1",
            params![user_id, record.score.reward],
        )?;
        tx.commit()?;
        Ok(record)
    }

    /// A participant's responses in answer order.
    pub fn responses(&self, study_id: &str, user_id: &str) -> Result<Vec<ResponseRecord>, StudyError> {
        let inner = self.lock();
        participant_in(&inner.conn, study_id, user_id)?;
        responses_in(&inner.conn, user_id)
    }

    /// Flat response table over every participant; response time is the last
    /// logged action's timestamp.
    pub fn response_table(&self, study_id: &str) -> Result<ResponseTable, StudyError> {
        let template = self.study(study_id)?;
        let mut rows = Vec::new();
        for p in self.participants(study_id)? {
            for r in self.responses(study_id, &p.user_id)? {
                let task = template
                    .task(&r.task_id)
                    .ok_or_else(|| StudyError::NotFound(format!("task `{}`", r.task_id)))?;
                let time = r.action_log.last().map_or(0.0, |a| a.timestamp_ms as f64 / 1000.0);
                rows.push(ResponseRow::new(&p.user_id, task, r.score.reward, time));
            }
        }
        Ok(ResponseTable::new(rows)?)
    }
}

fn study_in(inner: &mut Inner, study_id: &str) -> Result<Arc<StudyTemplate>, StudyError> {
    if let Some(t) = inner.studies.get(study_id) {
        return Ok(t.clone());
    }
    let body: Option<String> = inner
        .conn
        .query_row("SELECT template FROM studies WHERE id = ?1", [study_id], |r| r.get(0))
        .optional()?;
    let body = body.ok_or_else(|| StudyError::NotFound(format!("study `{study_id}`")))?;
    let template = Arc::new(serde_json::from_str::<StudyTemplate>(&body)?);
    inner.studies.insert(study_id.to_owned(), template.clone());
    Ok(template)
}

fn participant_in(conn: &Connection, study_id: &str, user_id: &str) -> Result<ParticipantRecord, StudyError> {
    let row = conn
        .query_row(
            "SELECT seed, task_order, cursor, cumulative_reward, created_at FROM participants
             WHERE user_id = ?1 AND study_id = ?2",
            params![user_id, study_id],
            |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, i64>(2)?,
                    r.get::<_, f64>(3)?,
                    r.get::<_, i64>(4)?,
                ))
            },
        )
        .optional()?;
    let (seed, order, cursor, cumulative_reward, created_at) =
        row.ok_or_else(|| StudyError::NotFound(format!("participant `{user_id}`")))?;
    Ok(ParticipantRecord {
        user_id: user_id.to_owned(),
        study_id: study_id.to_owned(),
        seed: seed as u64,
        task_order: serde_json::from_str(&order)?,
        cursor: cursor as usize,
        cumulative_reward,
        created_at,
    })
}

fn insert_response(tx: &Transaction<'_>, r: &ResponseRecord) -> Result<(), StudyError> {
    tx.execute(
        "INSERT INTO responses (user_id, task_id, position, payload, score, reward, action_log, submitted_at)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
        params![
            r.user_id,
            r.task_id,
            r.position as i64,
            serde_json::to_string(&r.payload)?,
            serde_json::to_string(&r.score)?,
            r.score.reward,
            serde_json::to_string(&r.action_log)?,
            r.submitted_at
        ],
    )?;
    Ok(())
}

fn responses_in(conn: &Connection, user_id: &str) -> Result<Vec<ResponseRecord>, StudyError> {
    let mut stmt = conn.prepare(
        "SELECT task_id, position, payload, score, action_log, submitted_at FROM responses
         WHERE user_id = ?1 ORDER BY position",
    )?;
    let raw = stmt
        .query_map([user_id], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, i64>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
                r.get::<_, i64>(5)?,
            ))
        })?
        .collect::<Result<Vec<_>, _>>()?;
    raw.into_iter()
        .map(|(task_id, position, payload, score, log, submitted_at)| {
            Ok(ResponseRecord {
                user_id: user_id.to_owned(),
                task_id,
                position: position as usize,
                payload: serde_json::from_str(&payload)?,
                score: serde_json::from_str(&score)?,
                action_log: serde_json::from_str(&log)?,
                submitted_at,
            })
        })
        .collect()
}
