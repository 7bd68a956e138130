//! Region proposals: the scored-mask container and a classical builtin
//! generator (multi-scale graph segmentation + greedy hierarchical grouping).

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use crate::imgcore::{gaussian_filter, ImageBuffer};

pub const DEFAULT_MAX_PROPOSALS: usize = 256;

const SMOOTHING_SCALES: [f64; 3] = [0.5, 1.0, 2.0];
// Felzenszwalb threshold constant in linear-intensity units.
const SEGMENT_K: f64 = 0.5;
const MIN_SEGMENT: usize = 20;
const HIST_BINS: usize = 25;

/// A binary region mask stored as sorted, non-overlapping runs over
/// row-major pixel order, with an objectness score.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub score: f64,
    /// `(start, length)` pairs.
    pub runs: Vec<(u32, u32)>,
}

impl Proposal {
    pub fn from_mask(mask: &[bool], score: f64) -> Self {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < mask.len() {
            if mask[i] {
                let start = i;
                while i < mask.len() && mask[i] {
                    i += 1;
                }
                runs.push((start as u32, (i - start) as u32));
            } else {
                i += 1;
            }
        }
        Self { score, runs }
    }

    pub fn area(&self) -> usize {
        self.runs.iter().map(|&(_, l)| l as usize).sum()
    }

    pub fn pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.runs
            .iter()
            .flat_map(|&(s, l)| (s as usize)..(s as usize + l as usize))
    }

    pub fn mask(&self, pixel_count: usize) -> Vec<bool> {
        let mut m = vec![false; pixel_count];
        for p in self.pixels() {
            m[p] = true;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub width: usize,
    pub height: usize,
    pub proposals: Vec<Proposal>,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
    internal: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize, weight: f64) -> usize {
        let (big, small) = if self.size[a] >= self.size[b] { (a, b) } else { (b, a) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.internal[big] = weight;
        big
    }
}

/// Graph-based segmentation on an 8-connected grid. Returns a label per pixel
/// with labels numbered in first-occurrence order.
fn segment(img: &ImageBuffer, k: f64, min_size: usize) -> Vec<usize> {
    let (w, h) = (img.width(), img.height());
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(4 * w * h);
    let diff = |a: usize, b: usize| -> f64 {
        img.pixel(a)
            .iter()
            .zip(img.pixel(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                edges.push((diff(i, i + 1), i, i + 1));
            }
            if y + 1 < h {
                edges.push((diff(i, i + w), i, i + w));
                if x + 1 < w {
                    edges.push((diff(i, i + w + 1), i, i + w + 1));
                }
                if x > 0 {
                    edges.push((diff(i, i + w - 1), i, i + w - 1));
                }
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut ds = DisjointSet::new(w * h);
    for &(wt, a, b) in &edges {
        let (ra, rb) = (ds.find(a), ds.find(b));
        if ra == rb {
            continue;
        }
        let ta = ds.internal[ra] + k / ds.size[ra] as f64;
        let tb = ds.internal[rb] + k / ds.size[rb] as f64;
        if wt <= ta.min(tb) {
            ds.union(ra, rb, wt);
        }
    }
    for &(wt, a, b) in &edges {
        let (ra, rb) = (ds.find(a), ds.find(b));
        if ra != rb && (ds.size[ra] < min_size || ds.size[rb] < min_size) {
            let keep = ds.internal[ra].max(ds.internal[rb]).max(wt);
            ds.union(ra, rb, keep);
        }
    }

    let mut label_of_root = vec![usize::MAX; w * h];
    let mut next = 0;
    (0..w * h)
        .map(|i| {
            let r = ds.find(i);
            if label_of_root[r] == usize::MAX {
                label_of_root[r] = next;
                next += 1;
            }
            label_of_root[r]
        })
        .collect()
}

struct Region {
    pixels: Vec<usize>,
    hist: Vec<f64>,
    neighbours: BTreeSet<usize>,
    alive: bool,
}

fn colour_hist(img: &ImageBuffer, pixels: &[usize]) -> Vec<f64> {
    let ch = img.channels();
    let mut hist = vec![0.0; HIST_BINS * ch];
    for &p in pixels {
        for (c, v) in img.pixel(p).iter().enumerate() {
            let bin = ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
            hist[c * HIST_BINS + bin] += 1.0;
        }
    }
    let total = (pixels.len() * ch) as f64;
    hist.iter_mut().for_each(|v| *v /= total);
    hist
}

fn similarity(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

/// Initial segments plus every region formed by repeatedly merging the most
/// similar adjacent pair, until one region remains.
fn hierarchical_regions(img: &ImageBuffer, labels: &[usize]) -> Vec<Vec<usize>> {
    let (w, h) = (img.width(), img.height());
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut regions: Vec<Region> = (0..count)
        .map(|_| Region {
            pixels: Vec::new(),
            hist: Vec::new(),
            neighbours: BTreeSet::new(),
            alive: true,
        })
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        regions[l].pixels.push(i);
        let (x, y) = (i % w, i / w);
        if x + 1 < w && labels[i + 1] != l {
            regions[l].neighbours.insert(labels[i + 1]);
            regions[labels[i + 1]].neighbours.insert(l);
        }
        if y + 1 < h && labels[i + w] != l {
            regions[l].neighbours.insert(labels[i + w]);
            regions[labels[i + w]].neighbours.insert(l);
        }
    }
    for r in &mut regions {
        r.hist = colour_hist(img, &r.pixels);
    }

    let mut out: Vec<Vec<usize>> = regions.iter().map(|r| r.pixels.clone()).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (a, r) in regions.iter().enumerate() {
            if !r.alive {
                continue;
            }
            for &b in r.neighbours.range(a + 1..) {
                let s = similarity(&r.hist, &regions[b].hist);
                if best.is_none_or(|(bs, _, _)| s > bs) {
                    best = Some((s, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        let (na, nb) = (regions[a].pixels.len() as f64, regions[b].pixels.len() as f64);
        let hist: Vec<f64> = regions[a]
            .hist
            .iter()
            .zip(&regions[b].hist)
            .map(|(x, y)| (na * x + nb * y) / (na + nb))
            .collect();
        let mut pixels = std::mem::take(&mut regions[a].pixels);
        pixels.extend(std::mem::take(&mut regions[b].pixels));
        pixels.sort_unstable();
        let mut neighbours: BTreeSet<usize> = &regions[a].neighbours | &regions[b].neighbours;
        neighbours.remove(&a);
        neighbours.remove(&b);
        regions[a].alive = false;
        regions[b].alive = false;
        let id = regions.len();
        for &n in &neighbours {
            regions[n].neighbours.remove(&a);
            regions[n].neighbours.remove(&b);
            regions[n].neighbours.insert(id);
        }
        out.push(pixels.clone());
        regions.push(Region {
            pixels,
            hist,
            neighbours,
            alive: true,
        });
    }
    out
}

fn gradient_magnitude(img: &ImageBuffer) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let lum = img.luminance().into_data();
    let at = |x: isize, y: isize| lum[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let gx = 0.5 * (at(x + 1, y) - at(x - 1, y));
            let gy = 0.5 * (at(x, y + 1) - at(x, y - 1));
            (gx * gx + gy * gy).sqrt()
        })
        .collect()
}

fn region_score(mask: &[bool], area: usize, grad: &[f64], w: usize, h: usize) -> f64 {
    let mut boundary_sum = 0.0;
    let mut boundary_count = 0usize;
    for (i, &m) in mask.iter().enumerate() {
        if !m {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let outside = (x > 0 && !mask[i - 1])
            || (x + 1 < w && !mask[i + 1])
            || (y > 0 && !mask[i - w])
            || (y + 1 < h && !mask[i + w]);
        if outside {
            boundary_sum += grad[i];
            boundary_count += 1;
        }
    }
    let mean_grad = if boundary_count > 0 {
        boundary_sum / boundary_count as f64
    } else {
        0.0
    };
    (area as f64 / (w * h) as f64 * (1.0 - mean_grad)).clamp(0.0, 1.0)
}

/// Builtin region proposals: graph segmentation at three smoothing scales,
/// each followed by greedy colour-histogram grouping; duplicates removed and
/// the `max_proposals` best-scoring regions kept.
pub fn builtin_proposals(img: &ImageBuffer, max_proposals: usize) -> ProposalSet {
    let (w, h) = (img.width(), img.height());
    let n = w * h;
    let per_scale: Vec<Vec<Vec<usize>>> = SMOOTHING_SCALES
        .par_iter()
        .map(|&sigma| {
            let smoothed = gaussian_filter(img, sigma);
            let labels = segment(&smoothed, SEGMENT_K, MIN_SEGMENT.min(n));
            hierarchical_regions(img, &labels)
        })
        .collect();

    let grad = gradient_magnitude(img);
    let mut seen: HashSet<Vec<(u32, u32)>> = HashSet::new();
    let mut proposals = Vec::new();
    for pixels in per_scale.into_iter().flatten() {
        let mut mask = vec![false; n];
        for &p in &pixels {
            mask[p] = true;
        }
        let mut prop = Proposal::from_mask(&mask, 0.0);
        if !seen.insert(prop.runs.clone()) {
            continue;
        }
        prop.score = region_score(&mask, pixels.len(), &grad, w, h);
        proposals.push(prop);
    }
    proposals.sort_by(|a, b| b.score.total_cmp(&a.score));
    proposals.truncate(max_proposals);
    ProposalSet {
        width: w,
        height: h,
        proposals,
    }
}
