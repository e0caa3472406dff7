//! Kernel support vector machines, one-vs-rest, trained by sequential
//! minimal optimization with maximal-violating-pair working-set selection.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ml::ParamMap;

const SMO_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    /// (gamma * <x, y>)^3
    Polynomial { gamma: f64 },
    /// exp(-gamma * |x - y|^2)
    Rbf { gamma: f64 },
}

impl Kernel {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Polynomial { gamma } => (gamma * dot(a, b)).powi(3),
            Kernel::Rbf { gamma } => {
                let mut d = 0.0;
                for (x, y) in a.iter().zip(b) {
                    d += (x - y) * (x - y);
                }
                (-gamma * d).exp()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One binary machine: support vectors with signed dual weights plus bias.
#[derive(Debug, Clone)]
struct BinarySvm {
    sv_rows: Vec<Vec<f64>>,
    /// alpha_i * y_i per support vector
    sv_coef: Vec<f64>,
    bias: f64,
}

impl BinarySvm {
    fn decision(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (row, coef) in self.sv_rows.iter().zip(&self.sv_coef) {
            acc += coef * kernel.eval(row, x);
        }
        acc
    }
}

/// One-vs-rest SVM over class indices 0..k.
#[derive(Debug, Clone)]
pub struct SvmOvr {
    kernel: Kernel,
    machines: Vec<BinarySvm>,
}

impl SvmOvr {
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize, params: &ParamMap) -> Result<SvmOvr> {
        let c = params.get("c").and_then(|v| v.as_f64()).unwrap();
        let gamma = params.get("gamma").and_then(|v| v.as_f64()).unwrap();
        let kernel = match params.get("kernel").and_then(|v| v.as_str()).unwrap() {
            "linear" => Kernel::Linear,
            "polynomial" => Kernel::Polynomial { gamma },
            "rbf" => Kernel::Rbf { gamma },
            other => {
                return Err(Error::InvalidInput(format!("unknown kernel {other:?}")))
            }
        };
        let n = x.nrows();
        let rows: Vec<Vec<f64>> = (0..n).map(|r| x.row(r).to_vec()).collect();
        // dense kernel matrix; training sets here are small (tens of rows)
        let mut k_mat = vec![0.0f64; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(&rows[i], &rows[j]);
                k_mat[i * n + j] = v;
                k_mat[j * n + i] = v;
            }
        }
        let mut machines = Vec::with_capacity(n_classes);
        for cls in 0..n_classes {
            let targets: Vec<f64> = y
                .iter()
                .map(|&t| if t == cls { 1.0 } else { -1.0 })
                .collect();
            machines.push(smo_train(&rows, &k_mat, &targets, c)?);
        }
        Ok(SvmOvr { kernel, machines })
    }

    /// Class index with the largest one-vs-rest decision value; ties resolve
    /// to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for (cls, m) in self.machines.iter().enumerate() {
            let v = m.decision(&self.kernel, x);
            if v > best_v {
                best_v = v;
                best = cls;
            }
        }
        best
    }
}

/// Two-variable SMO on the dual soft-margin problem.
fn smo_train(rows: &[Vec<f64>], k_mat: &[f64], y: &[f64], c: f64) -> Result<BinarySvm> {
    let n = y.len();
    let mut alpha = vec![0.0f64; n];
    // f[i] = sum_j alpha_j y_j K(i, j); the bias is recovered afterwards
    let mut f = vec![0.0f64; n];
    let max_iters = 10_000usize.saturating_mul(n);

    let mut iters = 0usize;
    loop {
        // maximal violating pair over
        //   up:  alpha_i < C for y = +1, alpha_i > 0 for y = -1
        //   low: alpha_i < C for y = -1, alpha_i > 0 for y = +1
        let mut i_up: Option<usize> = None;
        let mut up_val = f64::NEG_INFINITY;
        let mut i_low: Option<usize> = None;
        let mut low_val = f64::INFINITY;
        for t in 0..n {
            let g = y[t] - f[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && g > up_val {
                up_val = g;
                i_up = Some(t);
            }
            if in_low && g < low_val {
                low_val = g;
                i_low = Some(t);
            }
        }
        let (i, j) = match (i_up, i_low) {
            (Some(i), Some(j)) => (i, j),
            _ => break,
        };
        if up_val - low_val <= SMO_TOLERANCE {
            break;
        }
        iters += 1;
        if iters > max_iters {
            log::warn!("SMO hit the iteration cap ({max_iters}); returning current iterate");
            break;
        }

        // analytic two-variable update (working on alpha_j, then alpha_i)
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (lo, hi) = if (y[i] - y[j]).abs() > 1e-12 {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if hi - lo < 1e-12 {
            // pair cannot move; nudge alpha off the active bound marker by
            // breaking out (selection would re-pick the same pair forever)
            break;
        }
        let eta = (k_mat[i * n + i] + k_mat[j * n + j] - 2.0 * k_mat[i * n + j]).max(1e-12);
        let e_i = f[i] - y[i];
        let e_j = f[j] - y[j];
        let mut aj_new = aj_old + y[j] * (e_i - e_j) / eta;
        aj_new = aj_new.clamp(lo, hi);
        if (aj_new - aj_old).abs() < 1e-12 {
            break;
        }
        let ai_new = ai_old + y[i] * y[j] * (aj_old - aj_new);
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        let di = (ai_new - ai_old) * y[i];
        let dj = (aj_new - aj_old) * y[j];
        for t in 0..n {
            f[t] += di * k_mat[i * n + t] + dj * k_mat[j * n + t];
        }
    }

    // bias from free support vectors, else the midpoint of the KKT interval
    let mut b_acc = 0.0;
    let mut b_cnt = 0usize;
    for t in 0..n {
        if alpha[t] > 1e-9 && alpha[t] < c - 1e-9 {
            b_acc += y[t] - f[t];
            b_cnt += 1;
        }
    }
    let bias = if b_cnt > 0 {
        b_acc / b_cnt as f64
    } else {
        let mut up_val = f64::NEG_INFINITY;
        let mut low_val = f64::INFINITY;
        for t in 0..n {
            let g = y[t] - f[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up {
                up_val = up_val.max(g);
            }
            if in_low {
                low_val = low_val.min(g);
            }
        }
        if up_val.is_finite() && low_val.is_finite() {
            (up_val + low_val) / 2.0
        } else {
            0.0
        }
    };

    let mut sv_rows = Vec::new();
    let mut sv_coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 1e-12 {
            sv_rows.push(rows[t].clone());
            sv_coef.push(alpha[t] * y[t]);
        }
    }
    Ok(BinarySvm {
        sv_rows,
        sv_coef,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{default_params, ParamValue};

    fn xor_free_data() -> (Array2<f64>, Vec<usize>) {
        // two linearly separable clusters
        let pts = [
            (-2.0, -1.5),
            (-1.5, -2.2),
            (-2.4, -1.9),
            (-1.8, -1.7),
            (2.0, 1.5),
            (1.5, 2.2),
            (2.4, 1.9),
            (1.8, 1.7),
        ];
        let x = Array2::from_shape_fn((8, 2), |(r, c)| if c == 0 { pts[r].0 } else { pts[r].1 });
        let y = vec![0, 0, 0, 0, 1, 1, 1, 1];
        (x, y)
    }

    #[test]
    fn linear_kernel_separates() {
        let (x, y) = xor_free_data();
        let svm = SvmOvr::fit(&x, &y, 2, &default_params(crate::ml::ModelFamily::Svm)).unwrap();
        for r in 0..8 {
            assert_eq!(svm.predict(&x.row(r).to_vec()), y[r]);
        }
    }

    #[test]
    fn rbf_kernel_separates_rings() {
        // inner cluster vs surrounding ring: not linearly separable
        let mut pts = Vec::new();
        let mut y = Vec::new();
        for k in 0..8 {
            let ang = k as f64 * std::f64::consts::PI / 4.0;
            pts.push((0.3 * ang.cos(), 0.3 * ang.sin()));
            y.push(0);
            pts.push((2.0 * ang.cos(), 2.0 * ang.sin()));
            y.push(1);
        }
        let x = Array2::from_shape_fn((pts.len(), 2), |(r, c)| {
            if c == 0 {
                pts[r].0
            } else {
                pts[r].1
            }
        });
        let params = default_params(crate::ml::ModelFamily::Svm)
            .set("kernel", ParamValue::Text("rbf".into()))
            .set("gamma", ParamValue::Float(1.0))
            .set("c", ParamValue::Float(10.0));
        let svm = SvmOvr::fit(&x, &y, 2, &params).unwrap();
        let hits = (0..x.nrows())
            .filter(|&r| svm.predict(&x.row(r).to_vec()) == y[r])
            .count();
        assert_eq!(hits, x.nrows());
    }

    #[test]
    fn polynomial_kernel_trains() {
        let (x, y) = xor_free_data();
        let params = default_params(crate::ml::ModelFamily::Svm)
            .set("kernel", ParamValue::Text("polynomial".into()))
            .set("gamma", ParamValue::Float(0.5))
            .set("c", ParamValue::Float(10.0));
        let svm = SvmOvr::fit(&x, &y, 2, &params).unwrap();
        let hits = (0..8)
            .filter(|&r| svm.predict(&x.row(r).to_vec()) == y[r])
            .count();
        assert!(hits >= 7, "hits {hits}/8");
    }
}
