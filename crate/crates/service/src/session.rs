//! One operator session: a loaded capture, the corrections applied to it and an
//! undo stack. Everything here is synchronous; the HTTP layer serializes access.

use tofcorr::correction::{PipelineOptions, SegmentRule};
use tofcorr::io::narrow_polar;
use tofcorr::{
    apply_correction, correct_pipeline, per_plane_correct, vector_to_polar, CorrectionError,
    CorrectionReport, CorrectionVector, PolarImage, SegmentMask, TagObservation,
};

/// A correction as it was applied: the vector and, for per-plane steps, its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub correction: CorrectionVector,
    pub mask: Option<SegmentMask>,
}

#[derive(Debug)]
pub struct Session {
    original: PolarImage,
    current: PolarImage,
    history: Vec<HistoryEntry>,
    /// States before each history entry, for bit-exact undo.
    undo: Vec<PolarImage>,
}

/// Applies one stored correction the way the pipeline does, then narrows to
/// file precision.
fn apply_entry(p: &PolarImage, entry: &HistoryEntry) -> PolarImage {
    let v = p.to_vector();
    let corrected = match &entry.mask {
        Some(m) => per_plane_correct(&v, &[(m.clone(), entry.correction.clone())])
            .expect("mask derived from this image"),
        None => apply_correction(&v, &entry.correction),
    };
    narrow_polar(&vector_to_polar(&corrected))
}

impl Session {
    pub fn new(capture: PolarImage) -> Self {
        Self {
            original: capture.clone(),
            current: capture,
            history: Vec::new(),
            undo: Vec::new(),
        }
    }

    pub fn current(&self) -> &PolarImage {
        &self.current
    }

    pub fn original(&self) -> &PolarImage {
        &self.original
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn depth(&self) -> usize {
        self.history.len()
    }

    /// Runs the pipeline on the current state. The state changes only on success;
    /// the new state is what a TOFC file of the result reads back as.
    pub fn correct(
        &mut self,
        tags: &[TagObservation],
        options: &PipelineOptions,
    ) -> Result<CorrectionReport, CorrectionError> {
        let out = correct_pipeline(&self.current, tags, options)?;
        let next = narrow_polar(&out.corrected);
        self.undo.push(std::mem::replace(&mut self.current, next));
        self.history.push(HistoryEntry {
            correction: out.correction,
            mask: out.mask,
        });
        Ok(out.report)
    }

    /// Reverts the last correction; `None` when there is nothing to undo.
    pub fn undo(&mut self) -> Option<usize> {
        let previous = self.undo.pop()?;
        self.history.pop();
        self.current = previous;
        Some(self.history.len())
    }

    /// Recomputes the current state from the original capture and the history.
    pub fn replay(&self) -> PolarImage {
        self.history
            .iter()
            .fold(self.original.clone(), |p, e| apply_entry(&p, e))
    }

    pub fn segment_preview(&self, rule: SegmentRule) -> Result<SegmentMask, CorrectionError> {
        tofcorr::segment_by_distance(&self.current, rule.threshold_m, rule.relation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tofcorr::simulator::capture;
    use tofcorr::simulator::fixtures::two_plane_scene_with_constant;
    use tofcorr::Relation;

    fn session() -> (Session, Vec<TagObservation>) {
        let scene = two_plane_scene_with_constant(0.05, 3.3);
        let cap = capture(&scene).unwrap();
        (
            Session::new(narrow_polar(&cap.polar)),
            scene.tag_observations(),
        )
    }

    #[test]
    fn replay_matches_state() {
        let (mut s, tags) = session();
        s.correct(&tags[1..], &PipelineOptions::default()).unwrap();
        let seg = PipelineOptions {
            segment: Some(SegmentRule::from_mm(1500.0, Relation::CloserThan)),
            ..PipelineOptions::default()
        };
        s.correct(&tags[..1], &seg).unwrap();
        assert_eq!(s.depth(), 2);
        assert_eq!(&s.replay(), s.current());
        assert_eq!(s.undo(), Some(1));
        assert_eq!(&s.replay(), s.current());
        assert_eq!(s.undo(), Some(0));
        assert_eq!(s.current(), s.original());
        assert_eq!(s.undo(), None);
    }

    #[test]
    fn failed_correction_keeps_state() {
        let (mut s, tags) = session();
        let before = s.current().clone();
        let opts = PipelineOptions {
            ratio: 1e-6,
            ..PipelineOptions::default()
        };
        assert!(matches!(
            s.correct(&tags, &opts),
            Err(CorrectionError::Implausible(_))
        ));
        assert_eq!(s.current(), &before);
        assert_eq!(s.depth(), 0);
    }
}
