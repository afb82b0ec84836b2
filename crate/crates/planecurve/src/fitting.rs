//! Growth-rate estimation from tuned log-count data.
//!
//! The counting sequence is expected to grow like `C mu^n n^(gamma-2)`, so
//! `G_n = log C + n log mu + (gamma - 2) log n` is linear in the three
//! unknowns and an ordinary least-squares fit recovers them. Ratio
//! estimates `g_{n+1}/g_n` are also provided; they converge to the same
//! `mu` but are far noisier, which is why the regression is the primary
//! route.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("window [{n_min}, {n_max}] must contain at least 4 sizes")]
    WindowTooSmall { n_min: u32, n_max: u32 },
    #[error("n_min must be at least 2 (the log n regressor), got {0}")]
    NMinTooSmall(u32),
    #[error("window [{n_min}, {n_max}] leaves the data range [{ell}, {max}]")]
    WindowOutOfRange { n_min: u32, n_max: u32, ell: u32, max: u32 },
    #[error("singular normal equations")]
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub log_c: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub rms_residual: f64,
}

/// Unweighted OLS of `g[n]` against `[1, n, ln n]` over `n_min..=n_max`.
/// `g[i]` holds the log weight of size `ell + i`. Invariant under adding a
/// constant to all of `g` (only `log_c` shifts).
pub fn fit_asymptotic(g: &[f64], ell: u32, n_min: u32, n_max: u32) -> Result<FitResult, FitError> {
    if n_min < 2 {
        return Err(FitError::NMinTooSmall(n_min));
    }
    let max = ell + g.len() as u32 - 1;
    if n_min < ell || n_max > max || n_min > n_max {
        return Err(FitError::WindowOutOfRange { n_min, n_max, ell, max });
    }
    let count = (n_max - n_min + 1) as usize;
    if count < 4 {
        return Err(FitError::WindowTooSmall { n_min, n_max });
    }

    // normal equations for the 3-parameter linear model
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for n in n_min..=n_max {
        let x = [1.0, f64::from(n), f64::from(n).ln()];
        let y = g[(n - ell) as usize];
        for r in 0..3 {
            for c in 0..3 {
                ata[r][c] += x[r] * x[c];
            }
            aty[r] += x[r] * y;
        }
    }
    let beta = solve3(ata, aty).ok_or(FitError::Singular)?;

    let mut ss = 0.0;
    for n in n_min..=n_max {
        let x = [1.0, f64::from(n), f64::from(n).ln()];
        let fit = beta[0] + beta[1] * x[1] + beta[2] * x[2];
        let r = g[(n - ell) as usize] - fit;
        ss += r * r;
    }
    Ok(FitResult {
        log_c: beta[0],
        mu: beta[1].exp(),
        gamma: beta[2] + 2.0,
        n_min,
        n_max,
        rms_residual: (ss / count as f64).sqrt(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..3 {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// The ratio sequence `r_n = exp(G_{n+1} - G_n)`, indexed from `ell`.
/// Asymptotically `mu (1 + (gamma-2)/n)`, but noisy in practice.
pub fn ratio_estimates(g: &[f64]) -> Vec<f64> {
    g.windows(2).map(|w| (w[1] - w[0]).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, mu: f64, gamma: f64, max: u32) -> Vec<f64> {
        (1..=max)
            .map(|n| c.ln() + f64::from(n) * mu.ln() + (gamma - 2.0) * f64::from(n).ln())
            .collect()
    }

    #[test]
    fn exact_model_recovery() {
        let g = synthetic(3.0, 7.0, -0.5, 60);
        let fit = fit_asymptotic(&g, 1, 2, 60).unwrap();
        assert!((fit.mu - 7.0).abs() < 1e-9, "mu = {}", fit.mu);
        assert!((fit.gamma + 0.5).abs() < 1e-9, "gamma = {}", fit.gamma);
        assert!((fit.log_c - 3.0_f64.ln()).abs() < 1e-9);
        assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn shift_invariance() {
        let g = synthetic(2.0, 11.4, -0.77, 50);
        let shifted: Vec<f64> = g.iter().map(|v| v + 123.456).collect();
        let a = fit_asymptotic(&g, 1, 10, 50).unwrap();
        let b = fit_asymptotic(&shifted, 1, 10, 50).unwrap();
        assert!((a.mu - b.mu).abs() < 1e-9);
        assert!((a.gamma - b.gamma).abs() < 1e-9);
        assert!((b.log_c - a.log_c - 123.456).abs() < 1e-8);
    }

    #[test]
    fn residual_orthogonality() {
        // add deterministic pseudo-noise, then check A^T r is near zero
        let mut g = synthetic(1.5, 10.0, -1.0, 40);
        for (i, v) in g.iter_mut().enumerate() {
            *v += ((i as f64 * 12.9898).sin() * 43758.5453).fract() * 0.1;
        }
        let fit = fit_asymptotic(&g, 1, 2, 40).unwrap();
        let mut atr = [0.0f64; 3];
        let mut scale = [0.0f64; 3];
        for n in 2..=40u32 {
            let x = [1.0, f64::from(n), f64::from(n).ln()];
            let pred = fit.log_c + fit.mu.ln() * x[1] + (fit.gamma - 2.0) * x[2];
            let r = g[(n - 1) as usize] - pred;
            for k in 0..3 {
                atr[k] += x[k] * r;
                scale[k] += (x[k] * r).abs().max(x[k].abs());
            }
        }
        for k in 0..3 {
            assert!(atr[k].abs() / scale[k] < 1e-8, "component {k}: {}", atr[k]);
        }
    }

    #[test]
    fn ratios() {
        let g = vec![0.0; 7];
        assert!(ratio_estimates(&g).iter().all(|&r| r == 1.0));
        let g = synthetic(1.0, 5.0, -0.7, 200);
        let r = ratio_estimates(&g);
        // first-order model: r_n ~ mu (1 + (gamma-2)/n), error O(1/n^2)
        for n in 50..199usize {
            let model = 5.0 * (1.0 + (-0.7 - 2.0) / n as f64);
            assert!((r[n - 1] - model).abs() < 5.0 * 3.0 / (n * n) as f64 * 10.0);
        }
        let err = fit_asymptotic(&g, 1, 2, 4);
        assert!(matches!(err, Err(FitError::WindowTooSmall { .. })));
    }
}
