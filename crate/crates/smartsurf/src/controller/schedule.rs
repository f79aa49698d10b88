//! Per-entity phase scheduling.
//!
//! The controller keeps one optimized phase vector per (eNB, direction, UE)
//! entity and flips the surface ahead of each subframe to the vector for
//! the entity it predicts will occupy it. Prediction replays the previous
//! frame: the entity observed in DCI at subframe index `n` last frame is
//! assumed to occupy subframe `n` this frame. Unpredicted subframes fall
//! back; uplink entities with no trained vector fall back to the downlink
//! vector for the same UE, and failing that to the schedule default.

use std::collections::BTreeMap;

use crate::linkbudget::PhaseVector;
use crate::sim::{DciRecord, Direction};

pub type EntityKey = (usize, Direction, usize);

#[derive(Debug, Clone)]
pub struct PhaseSchedule {
    entries: BTreeMap<EntityKey, PhaseVector>,
    fallback: PhaseVector,
}

impl PhaseSchedule {
    pub fn new(fallback: PhaseVector) -> Self {
        Self {
            entries: BTreeMap::new(),
            fallback,
        }
    }

    pub fn set(&mut self, key: EntityKey, theta: PhaseVector) {
        self.entries.insert(key, theta);
    }

    pub fn get(&self, key: &EntityKey) -> Option<&PhaseVector> {
        self.entries.get(key)
    }

    pub fn fallback(&self) -> &PhaseVector {
        &self.fallback
    }

    /// Vector to apply for a predicted entity (or none).
    pub fn vector_for(&self, predicted: Option<EntityKey>) -> &PhaseVector {
        let Some(key) = predicted else {
            return &self.fallback;
        };
        if let Some(v) = self.entries.get(&key) {
            return v;
        }
        if key.1 == Direction::Ul {
            if let Some(v) = self.entries.get(&(key.0, Direction::Dl, key.2)) {
                return v;
            }
        }
        &self.fallback
    }
}

/// Predicts subframe occupancy for one eNB by replaying the previous
/// frame's DCI observations.
#[derive(Debug, Clone, Default)]
pub struct SubframePredictor {
    last_frame: BTreeMap<u8, (Direction, usize)>,
    current_frame: BTreeMap<u8, (Direction, usize)>,
    frame: u64,
}

impl SubframePredictor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold in a decoded record for this eNB.
    pub fn observe(&mut self, rec: &DciRecord) {
        if rec.timestamp.frame != self.frame {
            self.last_frame = std::mem::take(&mut self.current_frame);
            self.frame = rec.timestamp.frame;
        }
        self.current_frame
            .insert(rec.timestamp.subframe, (rec.direction, rec.ue_id));
    }

    /// Predict the entity occupying `subframe` of the upcoming/current
    /// frame for eNB `enb_id`.
    pub fn predict(&self, enb_id: usize, subframe: u8) -> Option<EntityKey> {
        // Prefer the most recent completed frame; fall back to what has
        // been seen in the frame in progress.
        self.last_frame
            .get(&subframe)
            .or_else(|| self.current_frame.get(&subframe))
            .map(|&(dir, ue)| (enb_id, dir, ue))
    }
}

/// Convenience wrapper: the vector the surface should carry during the
/// given subframe for one eNB's slice of the surface.
pub fn apply_schedule<'a>(
    schedule: &'a PhaseSchedule,
    predictor: &SubframePredictor,
    enb_id: usize,
    subframe: u8,
) -> &'a PhaseVector {
    schedule.vector_for(predictor.predict(enb_id, subframe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdd::SubframeClock;

    fn rec(frame: u64, subframe: u8, dir: Direction, ue: usize) -> DciRecord {
        DciRecord {
            timestamp: SubframeClock { frame, subframe },
            enb_id: 0,
            ue_id: ue,
            direction: dir,
            rate_index: 5,
            n_prb: 10,
        }
    }

    fn vec_of(level: u8) -> PhaseVector {
        PhaseVector::from_levels(vec![level; 4])
    }

    #[test]
    fn unpredicted_subframe_uses_fallback() {
        let sched = PhaseSchedule::new(vec_of(0));
        let pred = SubframePredictor::new();
        assert_eq!(apply_schedule(&sched, &pred, 0, 3), &vec_of(0));
    }

    #[test]
    fn replays_previous_frame() {
        let mut sched = PhaseSchedule::new(vec_of(0));
        sched.set((0, Direction::Dl, 7), vec_of(3));
        sched.set((0, Direction::Dl, 8), vec_of(9));
        let mut pred = SubframePredictor::new();
        pred.observe(&rec(0, 0, Direction::Dl, 7));
        pred.observe(&rec(0, 5, Direction::Dl, 8));
        // Advance into frame 1: frame 0 becomes the replayed frame.
        pred.observe(&rec(1, 0, Direction::Dl, 8));
        assert_eq!(pred.predict(0, 5), Some((0, Direction::Dl, 8)));
        assert_eq!(apply_schedule(&sched, &pred, 0, 5), &vec_of(9));
        // Subframe 0 prefers last frame's occupant even though the current
        // frame already observed a different one.
        assert_eq!(apply_schedule(&sched, &pred, 0, 0), &vec_of(3));
    }

    #[test]
    fn uplink_falls_back_to_downlink_vector() {
        let mut sched = PhaseSchedule::new(vec_of(0));
        sched.set((0, Direction::Dl, 7), vec_of(5));
        let mut pred = SubframePredictor::new();
        pred.observe(&rec(0, 2, Direction::Ul, 7));
        pred.observe(&rec(1, 0, Direction::Dl, 7));
        // UL entity has no trained vector; the DL vector for UE 7 is used.
        assert_eq!(apply_schedule(&sched, &pred, 0, 2), &vec_of(5));
        // Once a dedicated UL vector exists it wins.
        sched.set((0, Direction::Ul, 7), vec_of(11));
        assert_eq!(apply_schedule(&sched, &pred, 0, 2), &vec_of(11));
    }

    #[test]
    fn unknown_ue_uses_fallback() {
        let mut sched = PhaseSchedule::new(vec_of(1));
        sched.set((0, Direction::Dl, 7), vec_of(5));
        let mut pred = SubframePredictor::new();
        pred.observe(&rec(0, 0, Direction::Dl, 42));
        pred.observe(&rec(1, 0, Direction::Dl, 42));
        assert_eq!(apply_schedule(&sched, &pred, 0, 0), &vec_of(1));
    }
}
