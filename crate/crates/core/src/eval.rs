//! Reflectance metrics: WHDR against sparse pairwise judgements and LMSE
//! against dense ground truth.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{Domain, ImageBuffer};

pub const DEFAULT_DELTA: f64 = 0.10;
pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_STEP: usize = 10;

/// Luminance floor when forming ratios.
const LUM_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Darker {
    First,
    Second,
    Equal,
}

impl Darker {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "1" => Some(Self::First),
            "2" => Some(Self::Second),
            "E" => Some(Self::Equal),
            _ => None,
        }
    }
}

/// One "which point is darker" comparison. Points are normalized `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub point1: [f64; 2],
    pub point2: [f64; 2],
    pub darker: Darker,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgementSet {
    pub comparisons: Vec<Judgement>,
    /// Comparisons dropped on load: no answer, no score, or a non-opaque point.
    pub skipped: usize,
}

impl JudgementSet {
    pub fn new(comparisons: Vec<Judgement>) -> Result<Self> {
        for (k, j) in comparisons.iter().enumerate() {
            let inside = |p: [f64; 2]| p.iter().all(|v| (0.0..=1.0).contains(v));
            if !inside(j.point1) || !inside(j.point2) {
                return Err(Error::Annotation(format!("comparison {k}: point outside [0,1]^2")));
            }
            if !j.weight.is_finite() || j.weight < 0.0 {
                return Err(Error::Annotation(format!("comparison {k}: invalid weight {}", j.weight)));
            }
        }
        Ok(Self { comparisons, skipped: 0 })
    }

    pub fn len(&self) -> usize {
        self.comparisons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comparisons.is_empty()
    }
}

#[derive(Deserialize)]
struct IiwPoint {
    id: i64,
    x: f64,
    y: f64,
    #[serde(default)]
    opaque: Option<bool>,
}

#[derive(Deserialize)]
struct IiwComparison {
    point1: i64,
    point2: i64,
    darker: Option<String>,
    darker_score: Option<f64>,
}

#[derive(Deserialize)]
struct IiwFile {
    intrinsic_points: Vec<IiwPoint>,
    intrinsic_comparisons: Vec<IiwComparison>,
}

pub fn parse_iiw_str(text: &str) -> Result<JudgementSet> {
    let file: IiwFile = serde_json::from_str(text)?;
    let points: HashMap<i64, &IiwPoint> = file.intrinsic_points.iter().map(|p| (p.id, p)).collect();
    let mut comparisons = Vec::with_capacity(file.intrinsic_comparisons.len());
    let mut skipped = 0;
    for c in &file.intrinsic_comparisons {
        let lookup = |id: i64| {
            points
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Annotation(format!("comparison references unknown point {id}")))
        };
        let (p1, p2) = (lookup(c.point1)?, lookup(c.point2)?);
        let darker = match c.darker.as_deref() {
            None => None,
            Some(s) => Some(
                Darker::parse(s).ok_or_else(|| Error::Annotation(format!("unknown darker value {s:?}")))?,
            ),
        };
        let opaque = p1.opaque != Some(false) && p2.opaque != Some(false);
        match (darker, c.darker_score) {
            (Some(darker), Some(weight)) if opaque => comparisons.push(Judgement {
                point1: [p1.x, p1.y],
                point2: [p2.x, p2.y],
                darker,
                weight,
            }),
            _ => skipped += 1,
        }
    }
    let mut set = JudgementSet::new(comparisons)?;
    set.skipped = skipped;
    Ok(set)
}

/// Reads an IIW annotation file (`intrinsic_points` and `intrinsic_comparisons`).
pub fn parse_iiw_json(path: impl AsRef<Path>) -> Result<JudgementSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_iiw_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    /// `None` when nothing could be scored.
    pub value: Option<f64>,
    pub count: usize,
    pub params: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }
}

/// Metric line as written by the evaluation tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub image: String,
    #[serde(flatten)]
    pub report: MetricReport,
}

/// Unweighted mean over defined per-image values.
pub fn mean_value(reports: &[MetricReport]) -> Option<f64> {
    let vals: Vec<f64> = reports.iter().filter_map(|r| r.value).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn nearest(v: f64, len: usize) -> usize {
    ((v * len as f64).floor().max(0.0) as usize).min(len - 1)
}

fn check_linear(img: &ImageBuffer) -> Result<()> {
    if img.domain() != Domain::Linear {
        return Err(Error::Contract("metrics expect linear images".into()));
    }
    Ok(())
}

/// Predicted answer for every comparison, sampling mean-RGB luminance at the
/// nearest pixel.
pub fn predict_judgements(reflectance: &ImageBuffer, set: &JudgementSet, delta: f64) -> Result<Vec<Darker>> {
    check_linear(reflectance)?;
    if !(delta >= 0.0) {
        return Err(Error::Param(format!("delta must be non-negative, got {delta}")));
    }
    let lum = reflectance.luminance();
    let (w, h) = (lum.width(), lum.height());
    let at = |p: [f64; 2]| lum.get(nearest(p[0], w), nearest(p[1], h), 0).max(LUM_FLOOR);
    Ok(set
        .comparisons
        .iter()
        .map(|j| {
            let ratio = at(j.point1) / at(j.point2);
            if ratio > 1.0 + delta {
                Darker::Second
            } else if ratio < 1.0 / (1.0 + delta) {
                Darker::First
            } else {
                Darker::Equal
            }
        })
        .collect())
}

/// Weighted human disagreement rate in [0, 1].
pub fn whdr(reflectance: &ImageBuffer, set: &JudgementSet, delta: f64) -> Result<MetricReport> {
    let predicted = predict_judgements(reflectance, set, delta)?;
    let (mut wrong, mut total) = (0.0, 0.0);
    for (j, p) in set.comparisons.iter().zip(&predicted) {
        total += j.weight;
        if *p != j.darker {
            wrong += j.weight;
        }
    }
    if set.is_empty() {
        log::warn!("WHDR undefined: no comparisons");
    }
    Ok(MetricReport {
        metric: "whdr".into(),
        value: (total > 0.0).then(|| wrong / total),
        count: set.len(),
        params: BTreeMap::from([("delta".to_string(), delta)]),
    })
}

fn window_starts(len: usize, window: usize, step: usize) -> Vec<usize> {
    if len <= window {
        return vec![0];
    }
    (0..=len - window).step_by(step).collect()
}

/// Scale-invariant local error: every `window`² patch of each channel gets
/// its own least-squares scale, and the residual is normalized by the energy
/// of `gt`. Channels are averaged. Images smaller than the window are scored
/// as one clipped window.
pub fn lmse(pred: &ImageBuffer, gt: &ImageBuffer, window: usize, step: usize) -> Result<MetricReport> {
    check_linear(pred)?;
    check_linear(gt)?;
    pred.check_same_shape(gt)?;
    if window == 0 || step == 0 {
        return Err(Error::Param("window and step must be positive".into()));
    }
    let (w, h) = (gt.width(), gt.height());
    let (xs, ys) = (window_starts(w, window, step), window_starts(h, window, step));
    let mut per_channel = Vec::new();
    let mut scored = 0;
    for c in 0..gt.channels() {
        let (mut sse, mut energy) = (0.0, 0.0);
        for &y0 in &ys {
            for &x0 in &xs {
                let (mut gg, mut gp, mut pp) = (0.0, 0.0, 0.0);
                for y in y0..(y0 + window).min(h) {
                    for x in x0..(x0 + window).min(w) {
                        let (g, p) = (gt.get(x, y, c), pred.get(x, y, c));
                        gg += g * g;
                        gp += g * p;
                        pp += p * p;
                    }
                }
                if gg == 0.0 {
                    continue;
                }
                let alpha = if pp > 0.0 { gp / pp } else { 0.0 };
                // ‖g − αp‖² expanded; clamp the rounding floor.
                sse += (gg - 2.0 * alpha * gp + alpha * alpha * pp).max(0.0);
                energy += gg;
                scored += 1;
            }
        }
        if energy > 0.0 {
            per_channel.push(sse / energy);
        }
    }
    Ok(MetricReport {
        metric: "lmse".into(),
        value: (!per_channel.is_empty()).then(|| per_channel.iter().sum::<f64>() / per_channel.len() as f64),
        count: scored,
        params: BTreeMap::from([("window".to_string(), window as f64), ("step".to_string(), step as f64)]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judgement(p1: [f64; 2], p2: [f64; 2], darker: Darker, weight: f64) -> Judgement {
        Judgement { point1: p1, point2: p2, darker, weight }
    }

    /// Left half 0.2, right half 0.8.
    fn halves() -> ImageBuffer {
        ImageBuffer::from_fn(10, 4, 3, |x, _, _| if x < 5 { 0.2 } else { 0.8 }).unwrap()
    }

    #[test]
    fn weighted_disagreement() {
        let set = JudgementSet::new(vec![
            judgement([0.1, 0.5], [0.9, 0.5], Darker::First, 1.0),
            judgement([0.1, 0.5], [0.9, 0.5], Darker::Second, 3.0),
        ])
        .unwrap();
        let r = whdr(&halves(), &set, DEFAULT_DELTA).unwrap();
        assert_eq!(r.value, Some(0.75));
        assert_eq!(r.count, 2);
    }

    #[test]
    fn empty_set_is_undefined() {
        let r = whdr(&halves(), &JudgementSet::default(), DEFAULT_DELTA).unwrap();
        assert_eq!(r.value, None);
        assert!(!r.is_defined());
    }

    #[test]
    fn threshold_boundary() {
        let img = ImageBuffer::from_fn(2, 1, 1, |x, _, _| if x == 0 { 1.0 } else { 1.05 }).unwrap();
        let set = JudgementSet::new(vec![judgement([0.0, 0.0], [1.0, 0.0], Darker::Equal, 1.0)]).unwrap();
        assert_eq!(predict_judgements(&img, &set, 0.10).unwrap(), vec![Darker::Equal]);
        assert_eq!(predict_judgements(&img, &set, 0.01).unwrap(), vec![Darker::First]);
    }

    #[test]
    fn nearest_pixel_edges() {
        assert_eq!(nearest(0.0, 10), 0);
        assert_eq!(nearest(0.099, 10), 0);
        assert_eq!(nearest(0.1, 10), 1);
        assert_eq!(nearest(1.0, 10), 9);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(JudgementSet::new(vec![judgement([1.2, 0.0], [0.0, 0.0], Darker::Equal, 1.0)]).is_err());
        assert!(JudgementSet::new(vec![judgement([0.0, 0.0], [0.0, 0.0], Darker::Equal, -1.0)]).is_err());
    }

    #[test]
    fn iiw_parsing() {
        let text = r#"{
            "intrinsic_points": [
                {"id": 1, "x": 0.1, "y": 0.2, "opaque": true},
                {"id": 2, "x": 0.8, "y": 0.3, "opaque": true},
                {"id": 3, "x": 0.5, "y": 0.5, "opaque": false}
            ],
            "intrinsic_comparisons": [
                {"point1": 1, "point2": 2, "darker": "1", "darker_score": 0.9},
                {"point1": 2, "point2": 1, "darker": "E", "darker_score": 0.5},
                {"point1": 1, "point2": 2, "darker": null, "darker_score": null},
                {"point1": 1, "point2": 3, "darker": "2", "darker_score": 1.0}
            ]
        }"#;
        let set = parse_iiw_str(text).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.skipped, 2);
        assert_eq!(set.comparisons[0].point1, [0.1, 0.2]);
        assert_eq!(set.comparisons[1].darker, Darker::Equal);
        assert_eq!(set.comparisons[1].weight, 0.5);
    }

    #[test]
    fn iiw_errors() {
        let dangling = r#"{"intrinsic_points": [{"id": 1, "x": 0, "y": 0}],
            "intrinsic_comparisons": [{"point1": 1, "point2": 7, "darker": "1", "darker_score": 1}]}"#;
        assert!(matches!(parse_iiw_str(dangling), Err(Error::Annotation(_))));
        assert!(matches!(parse_iiw_str("{not json"), Err(Error::Json(_))));
        let empty = r#"{"intrinsic_points": [], "intrinsic_comparisons": []}"#;
        assert!(parse_iiw_str(empty).unwrap().is_empty());
    }

    #[test]
    fn lmse_identity_and_scale() {
        let gt = ImageBuffer::from_fn(40, 30, 3, |x, y, c| 0.1 + 0.01 * ((x * 7 + y * 3 + c) % 50) as f64).unwrap();
        assert_eq!(lmse(&gt, &gt, 20, 10).unwrap().value, Some(0.0));
        let scaled = gt.map(|v| 2.0 * v).unwrap();
        assert!(lmse(&scaled, &gt, 20, 10).unwrap().value.unwrap() < 1e-15);
    }

    #[test]
    fn lmse_orthogonal_perturbation() {
        // One 20x20 window: gt = 1, perturbation ±0.5 sums to zero.
        // With G = ‖gt‖² and P = ‖p‖² the residual ratio is P / (G + P).
        let gt = ImageBuffer::filled(20, 20, 1, 1.0).unwrap();
        let pred = ImageBuffer::from_fn(20, 20, 1, |x, y, _| if (x + y) % 2 == 0 { 1.5 } else { 0.5 }).unwrap();
        let (g, p) = (400.0, 400.0 * 0.25);
        let v = lmse(&pred, &gt, 20, 10).unwrap().value.unwrap();
        assert!((v - p / (g + p)).abs() < 1e-12);
    }

    #[test]
    fn lmse_skips_zero_windows() {
        let gt = ImageBuffer::from_fn(40, 20, 1, |x, _, _| if x < 20 { 0.0 } else { 0.5 }).unwrap();
        let pred = gt.map(|v| 3.0 * v).unwrap();
        let r = lmse(&pred, &gt, 20, 10).unwrap();
        assert_eq!(r.value, Some(0.0));
        assert_eq!(r.count, 2);
        let pred = ImageBuffer::filled(40, 20, 1, 0.3).unwrap();
        let zero = ImageBuffer::filled(40, 20, 1, 0.0).unwrap();
        assert_eq!(lmse(&pred, &zero, 20, 10).unwrap().value, None);
    }

    #[test]
    fn record_serializes_flat() {
        let r = MetricRecord {
            image: "a.png".into(),
            report: MetricReport {
                metric: "lmse".into(),
                value: Some(0.5),
                count: 3,
                params: BTreeMap::new(),
            },
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["image"], "a.png");
        assert_eq!(v["metric"], "lmse");
        assert_eq!(v["value"], 0.5);
    }
}
