//! Versioned JSON interchange document for quad annotations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autolabel::{Propagation, Quad, StepDiagnostics};
use crate::error::{Error, Result};

pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Human,
    Propagated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub track_id: u64,
    pub quad: Quad,
    pub label: Option<String>,
    pub source: Source,
    /// Recognized text, used by evaluation when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
}

impl Annotation {
    /// Text compared during evaluation: the transcription, else the label, else empty.
    pub fn text(&self) -> &str {
        self.transcription.as_deref().or(self.label.as_deref()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotations {
    pub index: usize,
    pub annotations: Vec<Annotation>,
    /// Derived from annotations that have since been corrected.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    pub version: u32,
    pub frames: Vec<FrameAnnotations>,
    #[serde(default)]
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Default for AnnotationDocument {
    fn default() -> Self {
        Self { version: DOCUMENT_VERSION, frames: Vec::new(), diagnostics: Vec::new() }
    }
}

impl AnnotationDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: AnnotationDocument = serde_json::from_str(text)?;
        if doc.version != DOCUMENT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported document version {}", doc.version)));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(f) = doc.frames.iter().find(|f| !seen.insert(f.index)) {
            return Err(Error::InvalidArgument(format!("frame {} listed twice", f.index)));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn frame(&self, index: usize) -> Option<&FrameAnnotations> {
        self.frames.iter().find(|f| f.index == index)
    }

    /// Replaces one frame's annotations, keeping frames sorted by index.
    pub fn set_frame(&mut self, index: usize, annotations: Vec<Annotation>) {
        match self.frames.binary_search_by_key(&index, |f| f.index) {
            Ok(i) => self.frames[i] = FrameAnnotations { index, annotations, stale: false },
            Err(i) => self.frames.insert(i, FrameAnnotations { index, annotations, stale: false }),
        }
    }

    /// Copy without stale frames.
    pub fn exported(&self) -> AnnotationDocument {
        AnnotationDocument {
            version: self.version,
            frames: self.frames.iter().filter(|f| !f.stale).cloned().collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Annotations keyed by frame index, skipping stale frames.
    pub fn by_frame(&self) -> BTreeMap<usize, &[Annotation]> {
        self.frames.iter().filter(|f| !f.stale).map(|f| (f.index, f.annotations.as_slice())).collect()
    }
}

/// Turns a propagation over frames `first..` into document frames. Seeds keep
/// their given annotations; later frames reuse track ids and labels with source
/// `Propagated`. Diagnostics are re-indexed to absolute frame numbers.
pub fn propagation_frames(first: usize, seeds: &[Annotation], prop: &Propagation) -> (Vec<FrameAnnotations>, Vec<StepDiagnostics>) {
    let frames = prop
        .quads
        .iter()
        .enumerate()
        .map(|(pos, quads)| FrameAnnotations {
            index: first + pos,
            annotations: if pos == 0 {
                seeds.to_vec()
            } else {
                seeds
                    .iter()
                    .zip(quads)
                    .map(|(s, q)| Annotation { track_id: s.track_id, quad: *q, label: s.label.clone(), source: Source::Propagated, transcription: None })
                    .collect()
            },
            stale: false,
        })
        .collect();
    let diagnostics = prop.diagnostics.iter().map(|d| StepDiagnostics { frame: first + d.frame, ..d.clone() }).collect();
    (frames, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(id: u64, label: Option<&str>) -> Annotation {
        Annotation { track_id: id, quad: Quad::from_rect(1.0, 2.0, 10.0, 5.0).unwrap(), label: label.map(str::to_owned), source: Source::Human, transcription: None }
    }

    #[test]
    fn json_shape() {
        let mut doc = AnnotationDocument::default();
        doc.set_frame(3, vec![ann(7, Some("EXIT"))]);
        let v: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["frames"][0]["index"], 3);
        let a = &v["frames"][0]["annotations"][0];
        assert_eq!(a["track_id"], 7);
        assert_eq!(a["label"], "EXIT");
        assert_eq!(a["source"], "human");
        assert_eq!(a["quad"][1], serde_json::json!([11.0, 2.0]));
        assert!(a.get("transcription").is_none());
        assert!(v["frames"][0].get("stale").is_none());
        assert_eq!(AnnotationDocument::from_json(&doc.to_json().unwrap()).unwrap(), doc);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(AnnotationDocument::from_json(r#"{"version":2,"frames":[]}"#).is_err());
        assert!(AnnotationDocument::from_json(r#"{"version":1,"frames":[{"index":0,"annotations":[]},{"index":0,"annotations":[]}]}"#).is_err());
        let bowtie = r#"{"version":1,"frames":[{"index":0,"annotations":[{"track_id":1,"quad":[[0,0],[1,1],[1,0],[0,1]],"label":null,"source":"human"}]}]}"#;
        assert!(AnnotationDocument::from_json(bowtie).is_err());
    }

    #[test]
    fn set_frame_keeps_order_and_export_drops_stale() {
        let mut doc = AnnotationDocument::default();
        doc.set_frame(5, vec![ann(1, None)]);
        doc.set_frame(2, vec![ann(2, None)]);
        doc.set_frame(5, vec![ann(3, None)]);
        assert_eq!(doc.frames.iter().map(|f| f.index).collect::<Vec<_>>(), vec![2, 5]);
        assert_eq!(doc.frame(5).unwrap().annotations[0].track_id, 3);
        doc.frames[1].stale = true;
        assert_eq!(doc.exported().frames.len(), 1);
        assert_eq!(doc.by_frame().len(), 1);
    }

    #[test]
    fn text_precedence() {
        let mut a = ann(1, Some("label"));
        assert_eq!(a.text(), "label");
        a.transcription = Some("read".into());
        assert_eq!(a.text(), "read");
        assert_eq!(ann(1, None).text(), "");
    }
}
