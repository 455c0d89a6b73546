//! Clustering agreement and distribution distances.

use std::collections::HashMap;

use crate::error::{input, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Homogeneity, completeness and their harmonic mean (natural logarithms).
pub fn v_measure_parts(predicted: &[usize], truth: &[usize]) -> Result<VMeasure> {
    if predicted.len() != truth.len() {
        return input(format!(
            "label sequences differ in length ({} vs {})",
            predicted.len(),
            truth.len()
        ));
    }
    if predicted.is_empty() {
        return input("V-measure of empty labelings");
    }
    let n = predicted.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pred_counts: HashMap<usize, usize> = HashMap::new();
    let mut true_counts: HashMap<usize, usize> = HashMap::new();
    for (&k, &c) in predicted.iter().zip(truth) {
        *joint.entry((c, k)).or_default() += 1;
        *pred_counts.entry(k).or_default() += 1;
        *true_counts.entry(c).or_default() += 1;
    }
    let h_c = entropy(true_counts.values().copied(), n);
    let h_k = entropy(pred_counts.values().copied(), n);
    // H(C|K) = -sum a_ck/N ln(a_ck / a_k), and symmetrically H(K|C)
    let mut h_c_given_k = 0.0;
    let mut h_k_given_c = 0.0;
    for (&(c, k), &a) in &joint {
        let a = a as f64;
        h_c_given_k -= a / n * (a / pred_counts[&k] as f64).ln();
        h_k_given_c -= a / n * (a / true_counts[&c] as f64).ln();
    }
    let homogeneity = if h_c == 0.0 { 1.0 } else { 1.0 - h_c_given_k / h_c };
    let completeness = if h_k == 0.0 { 1.0 } else { 1.0 - h_k_given_c / h_k };
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    Ok(VMeasure {
        homogeneity: homogeneity.clamp(0.0, 1.0),
        completeness: completeness.clamp(0.0, 1.0),
        v_measure: v_measure.clamp(0.0, 1.0),
    })
}

pub fn v_measure(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(v_measure_parts(predicted, truth)?.v_measure)
}

/// Total variation distance `0.5 * sum |p - q|` between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return input("distributions have different supports");
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
