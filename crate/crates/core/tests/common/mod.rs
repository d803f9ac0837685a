#![allow(dead_code)]

use dfgp::numeric::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), uniform(rng, len, lo, hi)).unwrap()
}

/// Plain LSTM forward on row-major buffers; returns the `T × K` projected outputs.
pub fn lstm_oracle(
    x: &[f64],
    steps: usize,
    d: usize,
    h: usize,
    w_in: &[f64],
    w_rec: &[f64],
    bias: &[f64],
    proj: &[f64],
    proj_bias: &[f64],
) -> Vec<Vec<f64>> {
    let k = proj_bias.len();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut hid = vec![0.0; h];
    let mut cell = vec![0.0; h];
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut pre = bias.to_vec();
        for j in 0..4 * h {
            for a in 0..d {
                pre[j] += x[t * d + a] * w_in[a * 4 * h + j];
            }
            for b in 0..h {
                pre[j] += hid[b] * w_rec[b * 4 * h + j];
            }
        }
        for u in 0..h {
            let i = sig(pre[u]);
            let f = sig(pre[h + u]);
            let c = pre[2 * h + u].tanh();
            let o = sig(pre[3 * h + u]);
            cell[u] = f * cell[u] + i * c;
            hid[u] = o * cell[u].tanh();
        }
        let row: Vec<f64> = (0..k)
            .map(|j| proj_bias[j] + (0..h).map(|u| hid[u] * proj[u * k + j]).sum::<f64>())
            .collect();
        out.push(row);
    }
    out
}

/// `½ rᵀK⁻¹r + ½ log det K + (n/2) log 2π` through an explicit dense inverse.
pub fn dense_nll(r: &[f64], x: &[f64], amp: f64, len: f64, noise: f64) -> f64 {
    let n = r.len();
    let k = dense_cov(x, amp, len, noise);
    let inv = k.clone().try_inverse().unwrap();
    let rv = nalgebra::DVector::from_column_slice(r);
    let quad = (rv.transpose() * &inv * &rv)[(0, 0)];
    let det = k.lu().determinant();
    0.5 * quad + 0.5 * det.ln() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

pub fn dense_cov(x: &[f64], amp: f64, len: f64, noise: f64) -> nalgebra::DMatrix<f64> {
    let n = x.len();
    nalgebra::DMatrix::from_fn(n, n, |p, q| {
        let d = x[p] - x[q];
        let mut v = amp * amp * (-d * d / (2.0 * len * len)).exp();
        if p == q {
            v += noise * noise;
        }
        v
    })
}
