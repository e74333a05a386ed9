use std::collections::HashMap;

use super::SampleCloud;
use crate::error::{Result, VortexError};

/// Total-variation distance `½ Σ |p̂_A − p̂_B|` between histogram estimates of
/// two clouds of dimension at most 3, on a shared grid with Scott's-rule bin
/// widths `3.49 σ N^{−1/(d+2)}` per coordinate.
///
/// The estimate is biased upward by sampling noise; it is meant for
/// comparing trends across times, not as an absolute value.
pub fn histogram_tv(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    let d = a.dim();
    if d != b.dim() {
        return Err(VortexError::SizeMismatch { left: d, right: b.dim() });
    }
    if d > 3 {
        return Err(VortexError::domain(format!("histogram TV supports d ≤ 3, got {d}")));
    }
    let n = a.len().min(b.len()) as f64;
    let mut lo = vec![f64::INFINITY; d];
    let mut width = vec![0.0; d];
    for k in 0..d {
        let col: Vec<f64> = a.column(k).into_iter().chain(b.column(k)).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        if !(sd > 0.0) {
            return Err(VortexError::Degenerate(format!("coordinate {k} is constant")));
        }
        lo[k] = col.iter().cloned().fold(f64::INFINITY, f64::min);
        width[k] = 3.49 * sd * n.powf(-1.0 / (d as f64 + 2.0));
    }
    let key = |r: &[f64]| -> [i64; 3] {
        let mut k = [0i64; 3];
        for i in 0..d {
            k[i] = ((r[i] - lo[i]) / width[i]).floor() as i64;
        }
        k
    };
    let mut hist: HashMap<[i64; 3], (f64, f64)> = HashMap::new();
    let (wa, wb) = (1.0 / a.len() as f64, 1.0 / b.len() as f64);
    for r in a.rows() {
        hist.entry(key(r)).or_default().0 += wa;
    }
    for r in b.rows() {
        hist.entry(key(r)).or_default().1 += wb;
    }
    Ok(0.5 * hist.values().map(|(p, q)| (p - q).abs()).sum::<f64>())
}
