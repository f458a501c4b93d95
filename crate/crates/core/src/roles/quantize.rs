//! Lloyd-Max scalar quantization, used by the MDL score to model the cost
//! of storing factor matrices at a fixed number of bits per value.

use ndarray::Array2;

/// Optimal (local) 1-D quantizer levels for `data` with at most `levels`
/// centroids. Deterministic: centroids start at evenly spaced quantiles
/// and Lloyd iterations run to a fixed point.
pub fn lloyd_levels(data: &[f64], levels: usize) -> Vec<f64> {
    assert!(levels >= 1);
    let mut sorted: Vec<f64> = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.is_empty() {
        return vec![0.0];
    }
    if sorted.len() <= levels {
        return sorted;
    }

    let mut values: Vec<f64> = data.to_vec();
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut centroids: Vec<f64> = (0..levels)
        .map(|i| values[((i as f64 + 0.5) / levels as f64 * n as f64) as usize])
        .collect();
    centroids.dedup();

    for _ in 0..100 {
        // Partition by midpoints, then move each centroid to its cell mean.
        let mut sums = vec![0.0; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        let mut cell = 0;
        for &v in &values {
            while cell + 1 < centroids.len() && (centroids[cell] + centroids[cell + 1]) / 2.0 < v {
                cell += 1;
            }
            sums[cell] += v;
            counts[cell] += 1;
        }
        let mut next: Vec<f64> = centroids
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if counts[i] > 0 {
                    sums[i] / counts[i] as f64
                } else {
                    c
                }
            })
            .collect();
        next.sort_by(f64::total_cmp);
        next.dedup();
        if next == centroids {
            break;
        }
        centroids = next;
    }
    centroids
}

fn nearest(levels: &[f64], v: f64) -> f64 {
    match levels.binary_search_by(|l| l.total_cmp(&v)) {
        Ok(i) => levels[i],
        Err(i) => {
            if i == 0 {
                levels[0]
            } else if i == levels.len() {
                levels[levels.len() - 1]
            } else if (v - levels[i - 1]) <= (levels[i] - v) {
                levels[i - 1]
            } else {
                levels[i]
            }
        }
    }
}

/// Replace every entry with its nearest quantizer level (2^bits levels).
pub fn quantize_matrix(m: &Array2<f64>, bits: u32) -> Array2<f64> {
    let values: Vec<f64> = m.iter().copied().collect();
    let levels = lloyd_levels(&values, 1usize << bits);
    m.mapv(|v| nearest(&levels, v))
}
