//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use permanent_bp::*;

/// Full message vector `m_{y_k -> x_i}(x_i = v)` recovered from a ratio state.
pub fn full_my(s: &MessageState, k: usize, i: usize, v: usize) -> f64 {
    if v == k {
        s.ln_my(k, i).exp()
    } else {
        1.0
    }
}

pub fn full_mx(s: &MessageState, l: usize, j: usize, v: usize) -> f64 {
    if v == l {
        s.ln_mx(l, j).exp()
    } else {
        1.0
    }
}

/// psi(x_i = x, y_j = y) for the pair (i, j).
pub fn psi(i: usize, j: usize, x: usize, y: usize) -> f64 {
    if (x == j) != (y == i) {
        0.0
    } else {
        1.0
    }
}

/// Full-vector sum-product update for every message, reduced to ratios
/// afterwards. Returns log-ratios in the same layout as `MessageState`.
pub fn naive_update(w: &SquareMatrix, s: &MessageState) -> (Vec<f64>, Vec<f64>) {
    let n = w.n();
    let phi = |i: usize, j: usize| w.get(i, j).sqrt();
    let mut mx = vec![0.0; n * n];
    let mut my = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // m_{x_i -> y_j}(y_j = v) = sum_x phi(x_i = x) psi prod_{k != j} m_{y_k}(x_i = x)
            let msg: Vec<f64> = (0..n)
                .map(|v| {
                    (0..n)
                        .map(|x| {
                            let incoming: f64 = (0..n)
                                .filter(|&k| k != j)
                                .map(|k| full_my(s, k, i, x))
                                .product();
                            phi(i, x) * psi(i, j, x, v) * incoming
                        })
                        .sum()
                })
                .collect();
            let not: Vec<f64> = (0..n).filter(|&v| v != i).map(|v| msg[v]).collect();
            for pair in not.windows(2) {
                assert!((pair[0] - pair[1]).abs() <= 1e-12 * pair[0].abs());
            }
            mx[i * n + j] = (msg[i] / not[0]).ln();
        }
    }
    for j in 0..n {
        for i in 0..n {
            // m_{y_j -> x_i}(x_i = v) = sum_y phi(y_j = y) psi prod_{l != i} m_{x_l}(y_j = y)
            let msg: Vec<f64> = (0..n)
                .map(|v| {
                    (0..n)
                        .map(|y| {
                            let incoming: f64 = (0..n)
                                .filter(|&l| l != i)
                                .map(|l| full_mx(s, l, j, y))
                                .product();
                            phi(y, j) * psi(i, j, v, y) * incoming
                        })
                        .sum()
                })
                .collect();
            let not: Vec<f64> = (0..n).filter(|&v| v != j).map(|v| msg[v]).collect();
            for pair in not.windows(2) {
                assert!((pair[0] - pair[1]).abs() <= 1e-12 * pair[0].abs());
            }
            my[j * n + i] = (msg[j] / not[0]).ln();
        }
    }
    (mx, my)
}

/// Bethe free energy from explicit n x n pairwise tables and singleton
/// vectors built from full messages:
/// sum_ij sum b (ln b - ln psi phi phi) - (n-1) sum_v sum b_v (ln b_v - ln phi_v).
pub fn materialized_bethe(w: &SquareMatrix, s: &MessageState) -> f64 {
    let n = w.n();
    let ln_phi = |i: usize, j: usize| 0.5 * w.get(i, j).ln();
    let xlogy = |b: f64, lr: f64| if b == 0.0 { 0.0 } else { b * lr };
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut table = vec![0.0; n * n];
            for x in 0..n {
                for y in 0..n {
                    let from_y: f64 = (0..n)
                        .filter(|&k| k != j)
                        .map(|k| full_my(s, k, i, x))
                        .product();
                    let from_x: f64 = (0..n)
                        .filter(|&l| l != i)
                        .map(|l| full_mx(s, l, j, y))
                        .product();
                    table[x * n + y] =
                        psi(i, j, x, y) * (ln_phi(i, x) + ln_phi(y, j)).exp() * from_y * from_x;
                }
            }
            let z: f64 = table.iter().sum();
            for x in 0..n {
                for y in 0..n {
                    let b = table[x * n + y] / z;
                    f += xlogy(b, b.ln() - ln_phi(i, x) - ln_phi(y, j));
                }
            }
        }
    }
    let mut singles = 0.0;
    for i in 0..n {
        let un: Vec<f64> = (0..n)
            .map(|x| ln_phi(i, x).exp() * (0..n).map(|k| full_my(s, k, i, x)).product::<f64>())
            .collect();
        let z: f64 = un.iter().sum();
        for x in 0..n {
            let b = un[x] / z;
            singles += xlogy(b, b.ln() - ln_phi(i, x));
        }
    }
    for j in 0..n {
        let un: Vec<f64> = (0..n)
            .map(|y| ln_phi(y, j).exp() * (0..n).map(|l| full_mx(s, l, j, y)).product::<f64>())
            .collect();
        let z: f64 = un.iter().sum();
        for y in 0..n {
            let b = un[y] / z;
            singles += xlogy(b, b.ln() - ln_phi(y, j));
        }
    }
    f - (n as f64 - 1.0) * singles
}

/// `-F` on a doubly stochastic belief matrix:
/// sum B ln W - sum B ln B + sum (1 - B) ln(1 - B).
pub fn closed_form_neg_bethe(w: &SquareMatrix, b: &SquareMatrix) -> f64 {
    let xlogx = |x: f64| if x <= 0.0 { 0.0 } else { x * x.ln() };
    b.as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(&b, &w)| b * w.ln() - xlogx(b) + xlogx(1.0 - b))
        .sum()
}

pub fn random_state(n: usize, seed: u64) -> MessageState {
    let m = SquareMatrix::constant(n, 1.0);
    init_messages(
        &m,
        &BpConfig {
            init: Init::Random { seed },
            ..Default::default()
        },
    )
    .unwrap()
}

pub fn uniform(n: usize, seed: u64) -> SquareMatrix {
    random_uniform_matrix(n, 0.0, 50.0, &RngSpec::new(seed)).unwrap()
}
