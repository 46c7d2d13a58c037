//! On-disk annotation sessions. Each session directory holds `session.json`
//! (frame manifest, revision, job table) and `document.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use e2vts_core::annotation::{Annotation, AnnotationDocument, Source};
use e2vts_core::autolabel::{propagate_annotations, PropagateParams, StepDiagnostics, StepStatus};
use e2vts_core::io::{open_source, FrameSource};
use serde::{Deserialize, Serialize};

use crate::ApiError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Running,
    Completed,
    Halted { frame: usize, reason: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub from: usize,
    pub to: usize,
    /// Frames written so far, the seed frame excluded.
    pub frames_done: usize,
    #[serde(flatten)]
    pub state: JobState,
}

/// Everything a reader may see, swapped as a whole on every write.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SessionState {
    pub revision: u64,
    #[serde(skip)]
    pub document: AnnotationDocument,
    /// Propagated frame index to the seed frame it was derived from.
    pub origin: BTreeMap<usize, usize>,
    pub jobs: BTreeMap<String, Job>,
    pub running: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    id: String,
    source: PathBuf,
    frame_count: usize,
    #[serde(flatten)]
    state: SessionState,
}

pub struct Session {
    pub id: String,
    pub source: PathBuf,
    frames: Box<dyn FrameSource>,
    dir: PathBuf,
    current: RwLock<Arc<SessionState>>,
    writer: Mutex<()>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn random_id(prefix: char) -> String {
    format!("{prefix}{:016x}", rand::random::<u64>())
}

impl Session {
    pub fn create(root: &Path, source: &Path) -> Result<Arc<Self>, ApiError> {
        let frames = open_source(source).map_err(|e| ApiError::bad_request("unreadable_source", e))?;
        if frames.is_empty() {
            return Err(ApiError::bad_request("empty_source", format!("{} holds no frames", source.display())));
        }
        let id = random_id('s');
        let dir = root.join(&id);
        fs::create_dir_all(&dir).map_err(ApiError::internal)?;
        let session = Arc::new(Self {
            id,
            source: source.to_path_buf(),
            frames,
            dir,
            current: RwLock::new(Arc::new(SessionState::default())),
            writer: Mutex::new(()),
        });
        session.persist(&session.snapshot()).map_err(ApiError::internal)?;
        Ok(session)
    }

    /// Reopens a persisted session. A job that was running when the process
    /// stopped is marked failed.
    pub fn load(dir: &Path) -> Result<Arc<Self>, String> {
        let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| format!("{}: {e}", dir.join(name).display()));
        let manifest: Manifest = serde_json::from_str(&read("session.json")?).map_err(|e| e.to_string())?;
        let document = AnnotationDocument::from_json(&read("document.json")?).map_err(|e| e.to_string())?;
        let frames = open_source(&manifest.source).map_err(|e| e.to_string())?;
        if frames.len() != manifest.frame_count {
            return Err(format!("{} now holds {} frames, expected {}", manifest.source.display(), frames.len(), manifest.frame_count));
        }
        let mut state = manifest.state;
        state.document = document;
        if let Some(jid) = state.running.take() {
            if let Some(job) = state.jobs.get_mut(&jid) {
                job.state = JobState::Failed { reason: "interrupted by shutdown".into() };
            }
        }
        Ok(Arc::new(Self {
            id: manifest.id,
            source: manifest.source,
            frames,
            dir: dir.to_path_buf(),
            current: RwLock::new(Arc::new(state)),
            writer: Mutex::new(()),
        }))
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &dyn FrameSource {
        self.frames.as_ref()
    }

    pub fn snapshot(&self) -> Arc<SessionState> {
        self.current.read().expect("state lock").clone()
    }

    fn persist(&self, state: &SessionState) -> std::io::Result<()> {
        let manifest = Manifest { id: self.id.clone(), source: self.source.clone(), frame_count: self.frames.len(), state: state.clone() };
        write_atomic(&self.dir.join("document.json"), state.document.to_json().map_err(std::io::Error::other)?.as_bytes())?;
        write_atomic(&self.dir.join("session.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())
    }

    /// Applies `f` to a copy of the state, persists it and publishes it.
    /// `bump` says whether the document changed.
    fn write<T>(&self, bump: bool, f: impl FnOnce(&mut SessionState) -> Result<T, ApiError>) -> Result<(T, Arc<SessionState>), ApiError> {
        let _guard = self.writer.lock().expect("writer lock");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        if bump {
            next.revision += 1;
        }
        self.persist(&next).map_err(ApiError::internal)?;
        let next = Arc::new(next);
        *self.current.write().expect("state lock") = next.clone();
        Ok((out, next))
    }

    fn check_index(&self, index: usize) -> Result<(), ApiError> {
        if index >= self.frames.len() {
            return Err(ApiError::not_found("frame_out_of_range", format!("frame {index} of {}", self.frames.len())));
        }
        Ok(())
    }

    /// Replaces a frame's annotations with human ones and marks frames that
    /// were propagated through it as stale.
    pub fn set_annotations(&self, index: usize, annotations: Vec<Annotation>, expected_revision: Option<u64>) -> Result<u64, ApiError> {
        self.check_index(index)?;
        let (_, state) = self.write(true, |st| {
            if st.running.is_some() {
                return Err(ApiError::conflict("job_running", "a propagation job is writing this session"));
            }
            if let Some(rev) = expected_revision.filter(|&r| r != st.revision) {
                return Err(ApiError::conflict("revision_mismatch", format!("expected revision {rev}, session is at {}", st.revision)));
            }
            let upstream = st.origin.remove(&index).unwrap_or(index);
            for (&j, &o) in &st.origin {
                if j > index && (o == upstream || o == index) {
                    if let Some(f) = st.document.frames.iter_mut().find(|f| f.index == j) {
                        f.stale = true;
                    }
                }
            }
            let annotations = annotations.into_iter().map(|a| Annotation { source: Source::Human, ..a }).collect();
            st.document.set_frame(index, annotations);
            Ok(())
        })?;
        Ok(state.revision)
    }

    /// Validates the request and registers a running job. The caller runs it
    /// with [`Session::run_job`].
    pub fn start_job(&self, from: usize, to: usize) -> Result<(Job, Vec<Annotation>), ApiError> {
        if from >= to {
            return Err(ApiError::bad_request("invalid_range", format!("from ({from}) must be below to ({to})")));
        }
        self.check_index(to)?;
        let (out, _) = self.write(false, |st| {
            if st.running.is_some() {
                return Err(ApiError::conflict("job_running", "a propagation job is already running"));
            }
            let seeds = match st.document.frame(from) {
                Some(f) if !f.stale && !f.annotations.is_empty() => f.annotations.clone(),
                Some(f) if f.stale => return Err(ApiError::bad_request("stale_seed", format!("annotations at frame {from} are stale"))),
                _ => return Err(ApiError::bad_request("missing_seed", format!("no annotations at frame {from}"))),
            };
            let job = Job { id: random_id('j'), from, to, frames_done: 0, state: JobState::Running };
            st.jobs.insert(job.id.clone(), job.clone());
            st.running = Some(job.id.clone());
            Ok((job, seeds))
        })?;
        Ok(out)
    }

    /// Runs a started job to its end, appending each frame as it completes.
    pub fn run_job(&self, job: &Job, seeds: &[Annotation], params: &PropagateParams) {
        let finish = |state: JobState| {
            let _ = self.write(false, |st| {
                if let Some(j) = st.jobs.get_mut(&job.id) {
                    j.state = state;
                }
                st.running = None;
                Ok(())
            });
        };
        let frames: Result<Vec<_>, _> = (job.from..=job.to).map(|i| self.frames.load(i)).collect();
        let frames = match frames {
            Ok(f) => f,
            Err(e) => return finish(JobState::Failed { reason: e.to_string() }),
        };
        let quads: Vec<_> = seeds.iter().map(|a| a.quad).collect();
        let result = propagate_annotations(&frames, &quads, params, |diag, step_quads| {
            let index = job.from + diag.frame;
            let diag = StepDiagnostics { frame: index, ..diag.clone() };
            let _ = self.write(true, |st| {
                if let Some(step_quads) = step_quads {
                    let annotations = seeds
                        .iter()
                        .zip(step_quads)
                        .map(|(s, q)| Annotation { track_id: s.track_id, quad: *q, label: s.label.clone(), source: Source::Propagated, transcription: None })
                        .collect();
                    st.document.set_frame(index, annotations);
                    st.origin.insert(index, job.from);
                }
                st.document.diagnostics.retain(|x| x.frame != index);
                let at = st.document.diagnostics.partition_point(|x| x.frame < index);
                st.document.diagnostics.insert(at, diag);
                if let Some(j) = st.jobs.get_mut(&job.id) {
                    j.frames_done += step_quads.is_some() as usize;
                }
                Ok(())
            });
        });
        match result {
            Ok(p) => match p.halted_at {
                None => finish(JobState::Completed),
                Some(pos) => {
                    let reason = match &p.diagnostics.last().map(|d| &d.status) {
                        Some(StepStatus::PropagationFailed { reason }) => reason.clone(),
                        _ => "propagation failed".into(),
                    };
                    finish(JobState::Halted { frame: job.from + pos, reason })
                }
            },
            Err(e) => finish(JobState::Failed { reason: e.to_string() }),
        }
    }
}
