use rand::seq::SliceRandom;

use crate::rng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); NaN below two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn std_err(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// 1-based ranks, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    pearson(&ranks(a), &ranks(b))
}

/// One-sided two-sample permutation test of `mean(a) > mean(b)`.
/// Returns `(observed difference, p)` with `p = (hits + 1) / (rounds + 1)`.
pub fn permutation_test(a: &[f64], b: &[f64], rounds: usize, seed: u64) -> (f64, f64) {
    let observed = mean(a) - mean(b);
    if a.is_empty() || b.is_empty() {
        return (f64::NAN, 1.0);
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = rng::seeded(seed);
    let mut hits = 0usize;
    for _ in 0..rounds {
        pooled.shuffle(&mut rng);
        let (pa, pb) = pooled.split_at(a.len());
        if mean(pa) - mean(pb) >= observed - 1e-12 {
            hits += 1;
        }
    }
    (observed, (hits + 1) as f64 / (rounds + 1) as f64)
}
