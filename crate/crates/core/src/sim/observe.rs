//! Stacked observation vectors.
//!
//! One frame contributes, in order: node load ratios, node execution costs,
//! per-user quality gaps, per-user upload flags from the previous frame and
//! the row-major association matrix.

use std::collections::VecDeque;

use crate::model::NodeId;

pub fn frame_width(nodes: usize, users: usize) -> usize {
    2 * nodes + 2 * users + users * nodes
}

pub fn observation_width(nodes: usize, users: usize, history: usize) -> usize {
    history * frame_width(nodes, users)
}

#[derive(Debug, Clone, Copy)]
pub struct FrameFeatures<'a> {
    pub load_ratio: &'a [f64],
    pub exec_cost: &'a [f64],
    pub quality_gap: &'a [f64],
    pub uploaded: &'a [bool],
    pub association: &'a [NodeId],
}

pub fn encode_frame(f: &FrameFeatures<'_>) -> Vec<f64> {
    let nodes = f.load_ratio.len();
    let users = f.quality_gap.len();
    let mut out = Vec::with_capacity(frame_width(nodes, users));
    out.extend_from_slice(f.load_ratio);
    out.extend_from_slice(f.exec_cost);
    out.extend_from_slice(f.quality_gap);
    out.extend(f.uploaded.iter().map(|&m| if m { 1.0 } else { 0.0 }));
    for poa in f.association {
        out.extend((0..nodes).map(|n| if n == poa.0 { 1.0 } else { 0.0 }));
    }
    out
}

/// The last `history` frames, oldest first, zero-padded at episode start.
#[derive(Debug, Clone)]
pub struct History {
    width: usize,
    depth: usize,
    frames: VecDeque<Vec<f64>>,
}

impl History {
    pub fn new(width: usize, depth: usize) -> Self {
        Self {
            width,
            depth,
            frames: VecDeque::with_capacity(depth),
        }
    }

    pub fn push(&mut self, frame: Vec<f64>) {
        assert_eq!(frame.len(), self.width, "frame width");
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut out = vec![0.0; (self.depth - self.frames.len()) * self.width];
        for f in &self.frames {
            out.extend_from_slice(f);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(load: f64) -> Vec<f64> {
        encode_frame(&FrameFeatures {
            load_ratio: &[load, 0.0],
            exec_cost: &[2.0, 3.0],
            quality_gap: &[-0.5, -0.1, 0.2, -0.3],
            uploaded: &[true, false, false, true],
            association: &[NodeId(0), NodeId(0), NodeId(0), NodeId(1)],
        })
    }

    #[test]
    fn width_for_two_nodes_four_users() {
        assert_eq!(observation_width(2, 4, 3), 60);
        let mut h = History::new(frame_width(2, 4), 3);
        h.push(sample(0.5));
        assert_eq!(h.stacked().len(), 60);
    }

    #[test]
    fn first_frame_is_zero_padded() {
        let mut h = History::new(20, 3);
        h.push(sample(1.0));
        let s = h.stacked();
        assert!(s[..40].iter().all(|&v| v == 0.0));
        assert_eq!(&s[40..], &sample(1.0)[..]);
    }

    #[test]
    fn frame_layout() {
        let f = sample(1.0);
        assert_eq!(&f[..2], &[1.0, 0.0]);
        assert_eq!(&f[2..4], &[2.0, 3.0]);
        assert_eq!(&f[8..12], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(&f[12..], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn oldest_frame_drops_out() {
        let mut h = History::new(20, 3);
        for load in [0.1, 0.2, 0.3, 0.4] {
            h.push(sample(load));
        }
        let s = h.stacked();
        assert_eq!(s[0], 0.2);
        assert_eq!(s[20], 0.3);
        assert_eq!(s[40], 0.4);
    }
}
