//! Non-negative least squares via the active-set method on the normal
//! equations (Bro & De Jong's fast NNLS). Suited to the small systems
//! that arise here: the number of unknowns is the role count.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Solve `A x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. `A` is consumed as a working copy.
fn solve_dense(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .unwrap();
        if a[[pivot, col]].abs() < 1e-300 {
            return Err(Error::Numerical("singular system in nnls".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let factor = a[[row, col]] / a[[col, col]];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[[row, k]] -= factor * a[[col, k]];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[[row, k]] * x[k];
        }
        x[row] = acc / a[[row, row]];
    }
    Ok(x)
}

/// Solve `min ||A x - b||` subject to `x >= 0`, given the normal-equation
/// products `AtA = A'A` and `Atb = A'b`.
pub fn nnls_normal(ata: ArrayView2<f64>, atb: ArrayView1<f64>) -> Result<Array1<f64>> {
    let k = atb.len();
    if ata.nrows() != k || ata.ncols() != k {
        return Err(Error::InvalidArgument(
            "normal-equation shapes disagree".into(),
        ));
    }
    let scale = (0..k).map(|i| ata[[i, i]].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(1.0);

    let mut passive = vec![false; k];
    let mut x = Array1::<f64>::zeros(k);
    // Gradient of the dual: w = A'b - A'A x.
    let mut w = atb.to_owned();

    let max_outer = 6 * k + 30;
    for _ in 0..max_outer {
        let candidate = (0..k)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let j = match candidate {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;

        loop {
            let active: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let m = active.len();
            let mut sub_a = Array2::zeros((m, m));
            let mut sub_b = Array1::zeros(m);
            for (r, &i) in active.iter().enumerate() {
                sub_b[r] = atb[i];
                for (c, &jj) in active.iter().enumerate() {
                    sub_a[[r, c]] = ata[[i, jj]];
                }
            }
            let s = match solve_dense(sub_a, sub_b) {
                Ok(s) => s,
                Err(_) => {
                    // Degenerate passive set: drop the newest variable.
                    passive[j] = false;
                    break;
                }
            };
            if s.iter().all(|&v| v > tol * 1e-2) {
                x.fill(0.0);
                for (r, &i) in active.iter().enumerate() {
                    x[i] = s[r];
                }
                break;
            }
            // Step back along the segment to the feasibility boundary.
            let mut alpha = f64::INFINITY;
            for (r, &i) in active.iter().enumerate() {
                if s[r] <= tol * 1e-2 {
                    let denom = x[i] - s[r];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (r, &i) in active.iter().enumerate() {
                x[i] += alpha * (s[r] - x[i]);
            }
            for &i in &active {
                if x[i] <= tol * 1e-2 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }

        // Refresh the gradient.
        for i in 0..k {
            let mut acc = atb[i];
            for jj in 0..k {
                acc -= ata[[i, jj]] * x[jj];
            }
            w[i] = acc;
        }
    }
    Ok(x)
}

/// Solve `min ||A x - b||, x >= 0` from the raw factors.
pub fn nnls(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::InvalidArgument("nnls shape mismatch".into()));
    }
    let ata = a.t().dot(&a);
    let atb = a.t().dot(&b);
    nnls_normal(ata.view(), atb.view())
}

/// Solve `min ||X C - Y||_F, C >= 0` column by column. `X` is n-by-k and
/// `Y` is n-by-m; the result is k-by-m. The Gram matrix is formed once.
pub fn nnls_columns(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::InvalidArgument("nnls shape mismatch".into()));
    }
    let gram = x.t().dot(&x);
    let xty = x.t().dot(&y);
    let mut out = Array2::zeros((x.ncols(), y.ncols()));
    for j in 0..y.ncols() {
        let sol = nnls_normal(gram.view(), xty.column(j))?;
        out.column_mut(j).assign(&sol);
    }
    Ok(out)
}
