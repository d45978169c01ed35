//! Per-image detection scoring: box overlap, greedy matching and miss-rate curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: Option<f64>,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox { x_min, y_min, x_max, y_max, score: None };
        b.validate()?;
        Ok(b)
    }

    pub fn scored(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::invalid(format!(
                "box ({}, {}, {}, {}) needs x_max > x_min and y_max > y_min",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Intersection over union.
pub fn bbox_overlap(d: &BBox, g: &BBox) -> f64 {
    let w = d.x_max.min(g.x_max) - d.x_min.max(g.x_min);
    let h = d.y_max.min(g.y_max) - d.y_min.max(g.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = d.area() + g.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(detection index, ground-truth index)`.
    pub pairs: Vec<(usize, usize)>,
}

/// Detection indices by decreasing score; unscored boxes go last, ties keep input order.
fn score_order(dets: &[BBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    let key = |i: usize| dets[i].score.unwrap_or(f64::NEG_INFINITY);
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    order
}

/// Greedy matching in decreasing score order. Each detection takes the unmatched
/// ground truth of largest overlap when that overlap exceeds `threshold`, and
/// every ground truth is matched at most once.
pub fn match_detections(dets: &[BBox], gts: &[BBox], threshold: f64) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut out = MatchResult::default();
    for i in score_order(dets) {
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in gts.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let ov = bbox_overlap(&dets[i], g);
            if ov > threshold && best.is_none_or(|(b, _)| ov > b) {
                best = Some((ov, j));
            }
        }
        match best {
            Some((_, j)) => {
                taken[j] = true;
                out.tp += 1;
                out.pairs.push((i, j));
            }
            None => out.fp += 1,
        }
    }
    out.fn_ = taken.iter().filter(|t| !**t).count();
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImageBoxes {
    pub detections: Vec<BBox>,
    pub ground_truth: Vec<BBox>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub miss_rate: f64,
    pub fppi: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Miss rate and false positives per image at each score threshold (detections
/// with `score >= threshold` are kept), sorted by FPPI.
pub fn missrate_fppi_curve(images: &[ImageBoxes], thresholds: &[f64], overlap: f64) -> Result<Vec<CurvePoint>> {
    if images.is_empty() {
        return Err(Error::invalid("curve needs at least one image"));
    }
    let total_gt: usize = images.iter().map(|im| im.ground_truth.len()).sum();
    if total_gt == 0 {
        return Err(Error::invalid("no ground-truth boxes; miss rate is undefined"));
    }
    let mut points: Vec<CurvePoint> = thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for im in images {
                let kept: Vec<BBox> =
                    im.detections.iter().filter(|d| d.score.unwrap_or(f64::NEG_INFINITY) >= t).copied().collect();
                let m = match_detections(&kept, &im.ground_truth, overlap);
                tp += m.tp;
                fp += m.fp;
                fn_ += m.fn_;
            }
            CurvePoint {
                threshold: t,
                miss_rate: fn_ as f64 / (tp + fn_) as f64,
                fppi: fp as f64 / images.len() as f64,
                tp,
                fp,
                fn_,
            }
        })
        .collect();
    points.sort_by(|a, b| a.fppi.total_cmp(&b.fppi).then(b.threshold.total_cmp(&a.threshold)));
    Ok(points)
}

/// Distinct detection scores from high to low, which is every threshold at which the curve can change.
pub fn score_thresholds(images: &[ImageBoxes]) -> Vec<f64> {
    let mut s: Vec<f64> = images.iter().flat_map(|im| im.detections.iter().filter_map(|d| d.score)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    s
}

/// Parses `image_id x_min y_min x_max y_max [score]` lines. Blank lines and `#` comments are skipped.
pub fn parse_boxes(text: &str) -> Result<BTreeMap<String, Vec<BBox>>> {
    let mut out: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != 5 && toks.len() != 6 {
            return Err(Error::Parse { line, message: format!("expected 5 or 6 fields, found {}", toks.len()) });
        }
        let nums = toks[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("`{t}` is not a number") }))
            .collect::<Result<Vec<_>>>()?;
        let mut b =
            BBox::new(nums[0], nums[1], nums[2], nums[3]).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        b.score = nums.get(4).copied();
        out.entry(toks[0].to_string()).or_default().push(b);
    }
    Ok(out)
}

/// Pairs parsed detections with parsed ground truth by image id; images that
/// appear in either file are included.
pub fn join_images(dets: BTreeMap<String, Vec<BBox>>, gts: BTreeMap<String, Vec<BBox>>) -> Vec<(String, ImageBoxes)> {
    let mut all: BTreeMap<String, ImageBoxes> = BTreeMap::new();
    for (id, d) in dets {
        all.entry(id).or_default().detections = d;
    }
    for (id, g) in gts {
        all.entry(id).or_default().ground_truth = g;
    }
    all.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_boxes() {
        assert!(BBox::new(1.0, 0.0, 1.0, 2.0).is_err());
        assert!(BBox::new(0.0, 3.0, 1.0, 2.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 2.0).is_err());
    }

    #[test]
    fn parser_reads_optional_score() {
        let m = parse_boxes("img1 0 0 2 2 0.9\n# c\nimg1 1 1 3 3\nimg2 0 0 1 1\n").unwrap();
        assert_eq!(m["img1"].len(), 2);
        assert_eq!(m["img1"][0].score, Some(0.9));
        assert_eq!(m["img1"][1].score, None);
        assert!(matches!(parse_boxes("a 0 0 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_boxes("a 0 0 1 1\nb 2 0 1 1\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_inputs_error() {
        assert!(missrate_fppi_curve(&[], &[0.5], 0.5).is_err());
        let im = ImageBoxes { detections: vec![], ground_truth: vec![] };
        assert!(missrate_fppi_curve(&[im], &[0.5], 0.5).is_err());
    }
}
