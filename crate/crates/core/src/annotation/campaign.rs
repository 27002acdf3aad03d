use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationResponse, Effect, RawResponse, ValidationError};
use crate::corpus::{DatasetManifest, LabelRecord, ToxicityCategory, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Assigned,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub task_id: u64,
    pub utterance_id: String,
    pub lang: String,
    pub audio_path: Option<String>,
    pub transcript: Option<String>,
    pub status: TaskStatus,
}

/// One task per utterance, numbered from 1 in manifest order. `ids`
/// restricts the campaign to the listed utterances, in that order.
pub fn tasks_from_manifest(
    manifest: &DatasetManifest,
    ids: Option<&[String]>,
) -> Result<Vec<AnnotationTask>, AnnotationError> {
    let by_id: HashMap<&str, &crate::corpus::Utterance> =
        manifest.utterances.iter().map(|u| (u.id.as_str(), u)).collect();
    let chosen: Vec<&crate::corpus::Utterance> = match ids {
        Some(ids) => ids
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect(),
        None => manifest.utterances.iter().collect(),
    };
    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(chosen.len());
    for (i, u) in chosen.into_iter().enumerate() {
        if !seen.insert(u.id.as_str()) {
            return Err(AnnotationError::DuplicateUtterance(u.id.clone()));
        }
        tasks.push(AnnotationTask {
            task_id: i as u64 + 1,
            utterance_id: u.id.clone(),
            lang: u.lang.clone(),
            audio_path: u.audio_path.clone(),
            transcript: u.transcript.clone(),
            status: TaskStatus::Pending,
        });
    }
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub lease: Duration,
    /// Distinct annotators needed before a task is done.
    pub replication: usize,
    /// Accept a submission from an annotator whose lease has lapsed, as
    /// long as no one else holds the task.
    pub accept_expired_lease: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            lease: Duration::minutes(30),
            replication: 1,
            accept_expired_lease: true,
        }
    }
}

/// One line of the append-only label log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLogRecord {
    pub task_id: u64,
    pub annotator_id: String,
    pub verdict: Verdict,
    pub categories: BTreeSet<ToxicityCategory>,
    pub toxic_spans: Vec<String>,
    pub effects: BTreeSet<Effect>,
    pub timestamp: DateTime<Utc>,
    pub seq: u64,
}

impl LabelLogRecord {
    fn response(&self) -> AnnotationResponse {
        AnnotationResponse {
            task_id: self.task_id,
            annotator_id: self.annotator_id.clone(),
            verdict: self.verdict,
            categories: self.categories.clone(),
            toxic_spans: self.toxic_spans.clone(),
            effects: self.effects.clone(),
            timestamp: Some(self.timestamp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub task_id: u64,
    pub seq: u64,
    /// The annotator had already labeled this task; the new entry replaces it.
    pub superseded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedLabel {
    pub task_id: u64,
    pub utterance_id: String,
    pub lang: String,
    pub verdict: Verdict,
    pub categories: BTreeSet<ToxicityCategory>,
    pub toxic_spans: Vec<String>,
    pub effects: BTreeSet<Effect>,
    pub annotators: Vec<String>,
}

impl ExportedLabel {
    pub fn label_record(&self) -> LabelRecord {
        LabelRecord {
            id: self.utterance_id.clone(),
            lang: self.lang.clone(),
            verdict: self.verdict,
            categories: self.categories.clone(),
        }
    }
}

/// Verdict counts in the order total, cannot say, not toxic, toxic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub total: usize,
    pub cannot_say: usize,
    pub not_toxic: usize,
    pub toxic: usize,
    pub categories: BTreeMap<ToxicityCategory, usize>,
}

impl ExportSummary {
    pub fn from_labels(labels: &[ExportedLabel]) -> Self {
        let mut s = ExportSummary {
            total: labels.len(),
            ..Default::default()
        };
        for l in labels {
            match l.verdict {
                Verdict::Toxic => s.toxic += 1,
                Verdict::NotToxic => s.not_toxic += 1,
                Verdict::CannotSay => s.cannot_say += 1,
            }
            for c in &l.categories {
                *s.categories.entry(*c).or_default() += 1;
            }
        }
        s
    }

    pub fn table_row(&self) -> [usize; 4] {
        [self.total, self.cannot_say, self.not_toxic, self.toxic]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub campaign: String,
    pub tasks: usize,
    pub pending: usize,
    pub assigned: usize,
    pub done: usize,
    pub log_entries: usize,
    pub verdicts: ExportSummary,
}

#[derive(Debug, Clone)]
struct Lease {
    annotator: String,
    expires: DateTime<Utc>,
}

/// In-memory campaign state backed by an optional JSON-lines log.
#[derive(Debug)]
pub struct Campaign {
    id: String,
    config: CampaignConfig,
    tasks: Vec<AnnotationTask>,
    index: HashMap<u64, usize>,
    log: Vec<LabelLogRecord>,
    latest: HashMap<u64, BTreeMap<String, usize>>,
    leases: HashMap<u64, Lease>,
    writer: Option<(PathBuf, File)>,
}

impl Campaign {
    pub fn new(
        id: impl Into<String>,
        tasks: Vec<AnnotationTask>,
        config: CampaignConfig,
    ) -> Result<Self, AnnotationError> {
        if config.replication == 0 {
            return Err(AnnotationError::InvalidReplication);
        }
        let mut tasks = tasks;
        tasks.sort_by_key(|t| t.task_id);
        let mut seen = HashSet::new();
        for t in &tasks {
            if !seen.insert(t.utterance_id.clone()) {
                return Err(AnnotationError::DuplicateUtterance(t.utterance_id.clone()));
            }
        }
        let index = tasks.iter().enumerate().map(|(i, t)| (t.task_id, i)).collect();
        Ok(Self {
            id: id.into(),
            config,
            tasks,
            index,
            log: Vec::new(),
            latest: HashMap::new(),
            leases: HashMap::new(),
            writer: None,
        })
    }

    /// Replays `log_path` if it exists, then appends new labels to it.
    /// Leases are not persisted, so tasks that were assigned come back
    /// pending.
    pub fn open(
        id: impl Into<String>,
        tasks: Vec<AnnotationTask>,
        config: CampaignConfig,
        log_path: impl AsRef<Path>,
    ) -> Result<Self, AnnotationError> {
        let path = log_path.as_ref().to_path_buf();
        let io = |source| AnnotationError::Io {
            path: path.clone(),
            source,
        };
        let mut campaign = Self::new(id, tasks, config)?;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |detail: String| AnnotationError::CorruptLog {
                    path: path.clone(),
                    line: i + 1,
                    detail,
                };
                let record: LabelLogRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                campaign.apply(record).map_err(corrupt)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        campaign.writer = Some((path, file));
        Ok(campaign)
    }

    fn apply(&mut self, record: LabelLogRecord) -> Result<(), String> {
        if !self.index.contains_key(&record.task_id) {
            return Err(format!("unknown task {}", record.task_id));
        }
        if let Some(last) = self.log.last() {
            if record.seq <= last.seq {
                return Err(format!("seq {} does not follow {}", record.seq, last.seq));
            }
        }
        record.response().check().map_err(|e| e.to_string())?;
        self.latest
            .entry(record.task_id)
            .or_default()
            .insert(record.annotator_id.clone(), self.log.len());
        self.log.push(record);
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn log(&self) -> &[LabelLogRecord] {
        &self.log
    }

    fn answered(&self, task_id: u64) -> usize {
        self.latest.get(&task_id).map_or(0, BTreeMap::len)
    }

    fn has_answered(&self, task_id: u64, annotator: &str) -> bool {
        self.latest.get(&task_id).is_some_and(|m| m.contains_key(annotator))
    }

    fn live_lease(&self, task_id: u64, now: DateTime<Utc>) -> Option<&Lease> {
        self.leases.get(&task_id).filter(|l| l.expires > now)
    }

    pub fn status(&self, task_id: u64, now: DateTime<Utc>) -> Option<TaskStatus> {
        self.index.contains_key(&task_id).then(|| {
            if self.answered(task_id) >= self.config.replication {
                TaskStatus::Done
            } else if self.live_lease(task_id, now).is_some() {
                TaskStatus::Assigned
            } else {
                TaskStatus::Pending
            }
        })
    }

    fn task_view(&self, i: usize, now: DateTime<Utc>) -> AnnotationTask {
        let mut t = self.tasks[i].clone();
        t.status = self.status(t.task_id, now).expect("indexed task");
        t
    }

    pub fn tasks(&self, now: DateTime<Utc>) -> Vec<AnnotationTask> {
        (0..self.tasks.len()).map(|i| self.task_view(i, now)).collect()
    }

    /// The annotator's current live task, or else the lowest-id task that is
    /// neither done, held by someone else, nor already answered by them.
    pub fn next_task(&mut self, annotator: &str, now: DateTime<Utc>) -> Option<AnnotationTask> {
        let held = self.tasks.iter().position(|t| {
            self.live_lease(t.task_id, now).is_some_and(|l| l.annotator == annotator)
                && self.status(t.task_id, now) != Some(TaskStatus::Done)
        });
        if let Some(i) = held {
            return Some(self.task_view(i, now));
        }
        let free = self.tasks.iter().position(|t| {
            self.answered(t.task_id) < self.config.replication
                && self.live_lease(t.task_id, now).is_none()
                && !self.has_answered(t.task_id, annotator)
        })?;
        self.leases.insert(
            self.tasks[free].task_id,
            Lease {
                annotator: annotator.to_string(),
                expires: now + self.config.lease,
            },
        );
        Some(self.task_view(free, now))
    }

    pub fn submit_raw(&mut self, raw: RawResponse, now: DateTime<Utc>) -> Result<SubmitAck, AnnotationError> {
        let response = raw.validate()?;
        self.submit(response, now)
    }

    pub fn submit(&mut self, response: AnnotationResponse, now: DateTime<Utc>) -> Result<SubmitAck, AnnotationError> {
        response.check()?;
        let task_id = response.task_id;
        if !self.index.contains_key(&task_id) {
            return Err(ValidationError::new("unknown_task", format!("no task {task_id} in campaign {}", self.id)).into());
        }
        let annotator = response.annotator_id.clone();
        let annotator = annotator.as_str();
        let superseded = self.has_answered(task_id, annotator);
        if !superseded {
            if self.status(task_id, now) == Some(TaskStatus::Done) {
                return Err(ValidationError::new("task_done", format!("task {task_id} needs no more labels")).into());
            }
            match self.leases.get(&task_id) {
                Some(l) if l.annotator == annotator && (l.expires > now || self.config.accept_expired_lease) => {}
                Some(l) if l.annotator != annotator && l.expires > now => {
                    return Err(ValidationError::new(
                        "assigned_elsewhere",
                        format!("task {task_id} is leased to another annotator"),
                    )
                    .into())
                }
                Some(l) if l.annotator == annotator => {
                    return Err(ValidationError::new("lease_expired", format!("lease on task {task_id} expired")).into())
                }
                _ => {
                    return Err(ValidationError::new(
                        "not_assigned",
                        format!("task {task_id} is not assigned to `{annotator}`"),
                    )
                    .into())
                }
            }
        }
        let record = LabelLogRecord {
            task_id,
            annotator_id: response.annotator_id,
            verdict: response.verdict,
            categories: response.categories,
            toxic_spans: response.toxic_spans,
            effects: response.effects,
            timestamp: response.timestamp.unwrap_or(now),
            seq: self.log.last().map_or(1, |r| r.seq + 1),
        };
        if let Some((path, file)) = &mut self.writer {
            let mut line = serde_json::to_string(&record).expect("log record serializes");
            line.push('\n');
            let io = |source| AnnotationError::Io {
                path: path.clone(),
                source,
            };
            file.write_all(line.as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        let seq = record.seq;
        self.apply(record).expect("validated record applies");
        if self.leases.get(&task_id).is_some_and(|l| l.annotator == annotator) {
            self.leases.remove(&task_id);
        }
        Ok(SubmitAck {
            task_id,
            seq,
            superseded,
        })
    }

    /// One label per done task, in task order. With replication the
    /// verdict is the strict majority of each annotator's latest entry,
    /// and a tie yields `CannotSay`.
    pub fn export(&self) -> Vec<ExportedLabel> {
        let mut out = Vec::new();
        for task in &self.tasks {
            let Some(entries) = self.latest.get(&task.task_id) else {
                continue;
            };
            if entries.len() < self.config.replication {
                continue;
            }
            let votes: Vec<&LabelLogRecord> = entries.values().map(|&i| &self.log[i]).collect();
            let mut counts: BTreeMap<Verdict, usize> = BTreeMap::new();
            for v in &votes {
                *counts.entry(v.verdict).or_default() += 1;
            }
            let top = counts.values().copied().max().unwrap_or(0);
            let leaders: Vec<Verdict> = counts.iter().filter(|(_, c)| **c == top).map(|(v, _)| *v).collect();
            let verdict = if leaders.len() == 1 { leaders[0] } else { Verdict::CannotSay };
            let mut label = ExportedLabel {
                task_id: task.task_id,
                utterance_id: task.utterance_id.clone(),
                lang: task.lang.clone(),
                verdict,
                categories: BTreeSet::new(),
                toxic_spans: Vec::new(),
                effects: BTreeSet::new(),
                annotators: entries.keys().cloned().collect(),
            };
            if verdict == Verdict::Toxic {
                for v in votes.iter().filter(|v| v.verdict == Verdict::Toxic) {
                    label.categories.extend(v.categories.iter().copied());
                    label.effects.extend(v.effects.iter().copied());
                    for s in &v.toxic_spans {
                        if !label.toxic_spans.contains(s) {
                            label.toxic_spans.push(s.clone());
                        }
                    }
                }
            }
            out.push(label);
        }
        out
    }

    pub fn label_records(&self) -> Vec<LabelRecord> {
        self.export().iter().map(ExportedLabel::label_record).collect()
    }

    pub fn summary(&self) -> ExportSummary {
        ExportSummary::from_labels(&self.export())
    }

    pub fn progress(&self, now: DateTime<Utc>) -> Progress {
        let mut p = Progress {
            campaign: self.id.clone(),
            tasks: self.tasks.len(),
            pending: 0,
            assigned: 0,
            done: 0,
            log_entries: self.log.len(),
            verdicts: self.summary(),
        };
        for t in &self.tasks {
            match self.status(t.task_id, now).expect("indexed task") {
                TaskStatus::Pending => p.pending += 1,
                TaskStatus::Assigned => p.assigned += 1,
                TaskStatus::Done => p.done += 1,
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks(n: u64) -> Vec<AnnotationTask> {
        (1..=n)
            .map(|i| AnnotationTask {
                task_id: i,
                utterance_id: format!("u{i}"),
                lang: "eng".into(),
                audio_path: None,
                transcript: Some(format!("text {i}")),
                status: TaskStatus::Pending,
            })
            .collect()
    }

    fn t0() -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z").unwrap().with_timezone(&Utc)
    }

    fn answer(task_id: u64, who: &str, verdict: Verdict) -> AnnotationResponse {
        let toxic = verdict == Verdict::Toxic;
        AnnotationResponse {
            task_id,
            annotator_id: who.into(),
            verdict,
            categories: if toxic { [ToxicityCategory::Profanity].into() } else { BTreeSet::new() },
            toxic_spans: if toxic { vec!["shit".into()] } else { vec![] },
            effects: BTreeSet::new(),
            timestamp: None,
        }
    }

    #[test]
    fn lowest_id_and_idempotent_assignment() {
        let mut c = Campaign::new("c", tasks(3), CampaignConfig::default()).unwrap();
        assert_eq!(c.next_task("a", t0()).unwrap().task_id, 1);
        assert_eq!(c.next_task("a", t0()).unwrap().task_id, 1);
        assert_eq!(c.next_task("b", t0()).unwrap().task_id, 2);
        assert_eq!(c.next_task("a", t0()).unwrap().status, TaskStatus::Assigned);
    }

    #[test]
    fn lease_expiry_frees_the_task() {
        let mut c = Campaign::new("c", tasks(1), CampaignConfig::default()).unwrap();
        c.next_task("a", t0()).unwrap();
        assert!(c.next_task("b", t0() + Duration::minutes(29)).is_none());
        assert_eq!(c.next_task("b", t0() + Duration::minutes(30)).unwrap().task_id, 1);
    }

    #[test]
    fn exhausted_campaign() {
        let mut c = Campaign::new("c", tasks(2), CampaignConfig::default()).unwrap();
        for _ in 0..2 {
            let t = c.next_task("a", t0()).unwrap();
            c.submit(answer(t.task_id, "a", Verdict::NotToxic), t0()).unwrap();
        }
        assert!(c.next_task("a", t0()).is_none());
        assert!(c.next_task("b", t0()).is_none());
    }

    #[test]
    fn submission_checks() {
        let mut c = Campaign::new("c", tasks(2), CampaignConfig::default()).unwrap();
        let err = |e: AnnotationError| match e {
            AnnotationError::Validation(v) => v.rule,
            other => panic!("{other}"),
        };
        assert_eq!(err(c.submit(answer(9, "a", Verdict::Toxic), t0()).unwrap_err()), "unknown_task");
        assert_eq!(err(c.submit(answer(1, "a", Verdict::Toxic), t0()).unwrap_err()), "not_assigned");
        c.next_task("a", t0());
        assert_eq!(err(c.submit(answer(1, "b", Verdict::Toxic), t0()).unwrap_err()), "assigned_elsewhere");
        assert!(c.submit(answer(1, "a", Verdict::Toxic), t0()).is_ok());
    }

    #[test]
    fn supersession_keeps_the_later_label() {
        let mut c = Campaign::new("c", tasks(1), CampaignConfig::default()).unwrap();
        c.next_task("a", t0());
        c.submit(answer(1, "a", Verdict::Toxic), t0()).unwrap();
        let ack = c.submit(answer(1, "a", Verdict::NotToxic), t0()).unwrap();
        assert!(ack.superseded);
        let export = c.export();
        assert_eq!(export.len(), 1);
        assert_eq!(export[0].verdict, Verdict::NotToxic);
        assert_eq!(c.log().len(), 2);
    }

    #[test]
    fn majority_with_ties_to_cannot_say() {
        let cfg = CampaignConfig {
            replication: 2,
            ..Default::default()
        };
        let mut c = Campaign::new("c", tasks(2), cfg).unwrap();
        for who in ["a", "b"] {
            let t = c.next_task(who, t0()).unwrap();
            assert_eq!(t.task_id, 1);
            let v = if who == "a" { Verdict::Toxic } else { Verdict::NotToxic };
            c.submit(answer(1, who, v), t0()).unwrap();
        }
        let export = c.export();
        assert_eq!(export.len(), 1);
        assert_eq!(export[0].verdict, Verdict::CannotSay);
        assert!(export[0].categories.is_empty());
    }

    #[test]
    fn table_row_order() {
        let mut c = Campaign::new("c", tasks(20), CampaignConfig::default()).unwrap();
        for i in 1..=20u64 {
            let t = c.next_task("a", t0()).unwrap();
            assert_eq!(t.task_id, i);
            let v = match i {
                1..=3 => Verdict::Toxic,
                4 => Verdict::CannotSay,
                _ => Verdict::NotToxic,
            };
            c.submit(answer(i, "a", v), t0()).unwrap();
        }
        assert_eq!(c.summary().table_row(), [20, 1, 16, 3]);
    }

    #[test]
    fn empty_campaign_exports_nothing() {
        let c = Campaign::new("c", vec![], CampaignConfig::default()).unwrap();
        assert!(c.export().is_empty());
        assert_eq!(c.summary().table_row(), [0, 0, 0, 0]);
    }

    #[test]
    fn replay_reconstructs_state() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("labels.jsonl");
        let mut c = Campaign::open("c", tasks(4), CampaignConfig::default(), &log).unwrap();
        for (who, v) in [("a", Verdict::Toxic), ("b", Verdict::NotToxic)] {
            let t = c.next_task(who, t0()).unwrap();
            c.submit(answer(t.task_id, who, v), t0()).unwrap();
        }
        c.submit(answer(1, "a", Verdict::CannotSay), t0()).unwrap();
        c.next_task("c", t0());
        let before = c.progress(t0() + Duration::hours(1));
        let export = c.export();
        drop(c);
        let replayed = Campaign::open("c", tasks(4), CampaignConfig::default(), &log).unwrap();
        assert_eq!(replayed.progress(t0() + Duration::hours(1)), before);
        assert_eq!(replayed.export(), export);
        assert_eq!(replayed.log().iter().map(|r| r.seq).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn corrupt_log_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("labels.jsonl");
        std::fs::write(&log, "{\"not\": \"a record\"}\n").unwrap();
        assert!(matches!(
            Campaign::open("c", tasks(1), CampaignConfig::default(), &log),
            Err(AnnotationError::CorruptLog { line: 1, .. })
        ));
    }
}
