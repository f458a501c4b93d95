//! Vertical logarithmic binning.
//!
//! A column is discretized by repeatedly placing the fraction `p` of the
//! remaining nodes with the smallest values into the next bin, so bin
//! populations shrink geometrically. Ties never straddle a bin boundary.
//! Used only to compare columns for redundancy; raw values are untouched.

/// Bin count that exhausts `n` values at fraction `p` per step.
pub fn derived_bin_count(n: usize, fraction: f64) -> usize {
    if n <= 1 {
        return 2;
    }
    let base = 1.0 / (1.0 - fraction);
    ((n as f64).ln() / base.ln()).ceil().max(2.0) as usize
}

/// Assign each value to one of `bins` levels. `fraction` of the remaining
/// values (rounded up) go into each successive bin; the last bin takes
/// whatever is left. Equal values always share a bin: a tie group that
/// would straddle a boundary moves whole into the next bin, unless the
/// current bin would stay empty.
pub fn log_bins(column: &[f64], bins: usize, fraction: f64) -> Vec<u32> {
    assert!(bins >= 2, "need at least 2 bins");
    assert!(
        fraction > 0.0 && fraction < 1.0,
        "bin fraction must be in (0, 1)"
    );
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));

    let group_end = |start: usize| {
        let mut end = start + 1;
        while end < n && column[order[end]] == column[order[start]] {
            end += 1;
        }
        end
    };

    let mut assigned = vec![0u32; n];
    let mut i = 0;
    for b in 0..bins {
        if i >= n {
            break;
        }
        let mut end = i;
        if b + 1 == bins {
            end = n;
        } else {
            let target = i + (((n - i) as f64) * fraction).ceil() as usize;
            loop {
                if end >= n {
                    break;
                }
                let g = group_end(end);
                if end == i || g <= target {
                    end = g;
                } else {
                    break;
                }
            }
        }
        for &idx in &order[i..end] {
            assigned[idx] = b as u32;
        }
        i = end;
    }
    assigned
}
