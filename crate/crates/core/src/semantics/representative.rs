use std::collections::HashSet;

use crate::imgcore::{linear_rgb_to_lab, ImageBuffer};

use super::ProposalSet;

pub const DEFAULT_MAX_REPRESENTATIVES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Representative {
    pub pixel: usize,
    pub proposal: usize,
}

/// One representative pixel per proposal, for scene-level colour pairing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RepresentativeSet {
    pub entries: Vec<Representative>,
}

impl RepresentativeSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.pixel)
    }
}

/// For every proposal, the pixel closest (in CIELab) to the proposal's mean
/// colour. Proposals are visited by decreasing score, duplicates are dropped
/// and at most `max_pixels` are kept.
pub fn representative_pixels(props: &ProposalSet, img: &ImageBuffer, max_pixels: usize) -> RepresentativeSet {
    let rgb = img.broadcast3();
    let lab: Vec<[f64; 3]> = rgb
        .data()
        .chunks_exact(3)
        .map(|p| linear_rgb_to_lab([p[0], p[1], p[2]]))
        .collect();
    let mut order: Vec<usize> = (0..props.len()).collect();
    order.sort_by(|&a, &b| props.proposals[b].score.total_cmp(&props.proposals[a].score).then(a.cmp(&b)));

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for c in order {
        if entries.len() >= max_pixels {
            break;
        }
        let prop = &props.proposals[c];
        let area = prop.area();
        if area == 0 {
            continue;
        }
        let mut mean = [0.0; 3];
        for p in prop.pixels() {
            for t in 0..3 {
                mean[t] += lab[p][t];
            }
        }
        mean.iter_mut().for_each(|m| *m /= area as f64);
        let mut best: Option<(f64, usize)> = None;
        for p in prop.pixels() {
            let d: f64 = (0..3).map(|t| (lab[p][t] - mean[t]).powi(2)).sum();
            // pixels arrive in increasing order, so strict < keeps the lowest index on ties
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, p));
            }
        }
        let (_, pixel) = best.expect("non-empty proposal");
        if seen.insert(pixel) {
            entries.push(Representative { pixel, proposal: c });
        }
    }
    RepresentativeSet { entries }
}
