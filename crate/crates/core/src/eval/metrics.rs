use crate::error::{Error, Result};

fn check_lengths(preds: &[i64], truth: &[i64]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::dims(truth.len(), preds.len()));
    }
    if truth.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    Ok(())
}

/// Fraction of predictions equal to the truth.
pub fn accuracy(preds: &[i64], truth: &[i64]) -> Result<f64> {
    check_lengths(preds, truth)?;
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// F1 of one class. Undefined precision or recall count as zero, and so does
/// the score when both are zero.
pub fn f1_score(preds: &[i64], truth: &[i64], positive: i64) -> Result<f64> {
    check_lengths(preds, truth)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in preds.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Unweighted mean of per-class F1 over the given classes.
pub fn macro_f1(preds: &[i64], truth: &[i64], classes: &[i64]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::invalid("macro f1 needs at least one class"));
    }
    let mut sum = 0.0;
    for &c in classes {
        sum += f1_score(preds, truth, c)?;
    }
    Ok(sum / classes.len() as f64)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
