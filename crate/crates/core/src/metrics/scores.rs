use crate::error::{Error, Result};

/// Fixed decision threshold used for FPR/FNR.
pub const DEFAULT_THRESHOLD: f64 = 0.075;

fn check_lengths(metric: &'static str, scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{metric}: {} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Indices ordered by ascending score; ties keep input order.
fn ascending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

/// Area under the ROC curve as the Mann-Whitney statistic with midranks for ties.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths("auc_roc", scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::undefined(
            "auc_roc",
            format!("needs both classes ({n_pos} positives, {n_neg} negatives)"),
        ));
    }
    let order = ascending(scores);
    // Work in doubled ranks so midranks stay integral.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank2 = (i + 1 + j + 1) as u128;
        let pos_in_block = order[i..=j].iter().filter(|&&r| labels[r] == 1).count() as u128;
        pos_rank_sum2 += midrank2 * pos_in_block;
        i = j + 1;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    let u2 = pos_rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Average precision.
///
/// Positives are visited in descending score order. A block of tied scores is
/// treated as one threshold: every positive in it gets the precision measured
/// after the whole block is admitted.
pub fn auc_prc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths("auc_prc", scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 {
        return Err(Error::undefined("auc_prc", "no positive examples"));
    }
    let mut order = ascending(scores);
    order.reverse();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut total = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let block_pos = order[i..=j].iter().filter(|&&r| labels[r] == 1).count();
        tp += block_pos;
        seen += j - i + 1;
        if block_pos > 0 {
            total += block_pos as f64 * (tp as f64 / seen as f64);
        }
        i = j + 1;
    }
    Ok(total / n_pos as f64)
}

pub fn brier(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths("brier", scores, labels)?;
    if scores.is_empty() {
        return Err(Error::undefined("brier", "empty input"));
    }
    let sum: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&s, &y)| (s - y as f64).powi(2))
        .sum();
    Ok(sum / scores.len() as f64)
}

/// Counts at a threshold. Rates are `None` when their class is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionAtThreshold {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

impl ConfusionAtThreshold {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Fraction predicted positive.
    pub fn positive_rate(&self) -> Option<f64> {
        let n = self.n();
        (n > 0).then(|| (self.tp + self.fp) as f64 / n as f64)
    }
}

/// Predicts positive iff `score >= threshold`.
pub fn confusion_at(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionAtThreshold> {
    check_lengths("confusion_at", scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(ConfusionAtThreshold {
        threshold,
        tp,
        fp,
        tn,
        fn_,
        fpr: rate(fp, fp + tn),
        fnr: rate(fn_, fn_ + tp),
    })
}

/// Population standard deviation over the mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::undefined("coefficient_of_variation", "no values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 || !mean.is_finite() {
        return Err(Error::undefined(
            "coefficient_of_variation",
            format!("mean is {mean}"),
        ));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// CV over group rates, skipping undefined ones with a warning.
pub fn cv_of_rates(what: &str, rates: &[Option<f64>]) -> Result<f64> {
    let skipped = rates.iter().filter(|r| r.is_none()).count();
    if skipped > 0 {
        log::warn!("{what}: skipping {skipped} group(s) with an undefined rate");
    }
    let defined: Vec<f64> = rates.iter().flatten().copied().collect();
    coefficient_of_variation(&defined)
}

/// 1-Wasserstein distance between two empirical distributions.
///
/// Integrates |F_a - F_b| exactly over the merged sorted support.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::undefined(
            "emd_1d",
            format!("empty sample ({} vs {})", a.len(), b.len()),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(emd_sorted(&a, &b))
}

/// `emd_1d` for inputs that are already sorted ascending.
pub fn emd_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as i128, b.len() as i128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    // CDF difference scaled by na*nb stays an exact integer.
    let mut prev = f64::min(a[0], b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let diff = (i as i128 * nb - j as i128 * na).abs();
        total += diff as f64 * (next - prev);
        prev = next;
        while i < a.len() && a[i] == next {
            i += 1;
        }
        while j < b.len() && b[j] == next {
            j += 1;
        }
    }
    total / (na * nb) as f64
}

/// Mean EMD over all unordered pairs of non-empty groups among examples with label `y`.
///
/// Returns `None` when fewer than two groups have members in the stratum.
pub fn mean_pairwise_emd(scores: &[f64], labels: &[u8], groups: &[usize], k: usize, y: u8) -> Option<f64> {
    let mut per_group: Vec<Vec<f64>> = vec![Vec::new(); k];
    for ((&s, &l), &g) in scores.iter().zip(labels).zip(groups) {
        if l == y {
            per_group[g].push(s);
        }
    }
    for g in &mut per_group {
        g.sort_by(f64::total_cmp);
    }
    let present: Vec<&Vec<f64>> = per_group.iter().filter(|g| !g.is_empty()).collect();
    if present.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            sum += emd_sorted(present[i], present[j]);
            pairs += 1;
        }
    }
    Some(sum / pairs as f64)
}

/// Equal-weight mean of the two stratum-level mean pairwise EMDs.
pub fn alignment_score(scores: &[f64], labels: &[u8], groups: &[usize], k: usize) -> Option<f64> {
    let y0 = mean_pairwise_emd(scores, labels, groups, k, 0)?;
    let y1 = mean_pairwise_emd(scores, labels, groups, k, 1)?;
    Some(0.5 * (y0 + y1))
}

/// Largest minus smallest positive-prediction rate across groups.
pub fn demographic_parity_gap(scores: &[f64], groups: &[usize], k: usize, threshold: f64) -> Option<f64> {
    let mut pos = vec![0usize; k];
    let mut tot = vec![0usize; k];
    for (&s, &g) in scores.iter().zip(groups) {
        tot[g] += 1;
        if s >= threshold {
            pos[g] += 1;
        }
    }
    let rates: Vec<f64> = (0..k)
        .filter(|&g| tot[g] > 0)
        .map(|g| pos[g] as f64 / tot[g] as f64)
        .collect();
    if rates.len() < 2 {
        return None;
    }
    let max = rates.iter().copied().fold(f64::MIN, f64::max);
    let min = rates.iter().copied().fold(f64::MAX, f64::min);
    Some(max - min)
}

pub const HISTOGRAM_BINS: usize = 50;

/// Counts over uniform bins on [0, 1]; a score of exactly 1 lands in the last bin.
pub fn histogram(scores: impl IntoIterator<Item = f64>, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for s in scores {
        let b = ((s * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    counts
}
