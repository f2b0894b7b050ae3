//! Finite-difference and brute-force oracles for every layer primitive.

use msnet::tensor::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, global_maxpool_backward,
    global_maxpool_forward, relu_backward, relu_forward, ConvKernel, SeqTensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central difference of `f` with respect to each entry of `x`.
fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + EPS;
            let up = f(&probe);
            probe[i] = orig - EPS;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * EPS)
        })
        .collect()
}

fn max_rel(a: &[f64], n: &[f64]) -> f64 {
    assert_eq!(a.len(), n.len());
    a.iter().zip(n).map(|(&a, &n)| rel_err(a, n)).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct definition with explicit zero padding; shares nothing with the
/// library's loop structure.
fn naive_conv(x: &[f64], l: usize, cin: usize, w: &[f64], b: &[f64], k: usize, d: usize) -> Vec<f64> {
    let cout = b.len();
    let half = (k / 2) as isize;
    let mut out = vec![0.0; l * cout];
    for t in 0..l {
        for o in 0..cout {
            let mut s = b[o];
            for j in 0..k {
                let src = t as isize + (j as isize - half) * d as isize;
                if src < 0 || src >= l as isize {
                    continue;
                }
                for i in 0..cin {
                    s += w[(j * cin + i) * cout + o] * x[src as usize * cin + i];
                }
            }
            out[t * cout + o] = s;
        }
    }
    out
}

fn conv_case(l: usize, cin: usize, cout: usize, k: usize, d: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform(&mut rng, l * cin);
    let w = uniform(&mut rng, k * cin * cout);
    let b = uniform(&mut rng, cout);
    let r = uniform(&mut rng, l * cout);

    let input = SeqTensor::new(l, cin, x.clone()).unwrap();
    let kernel = ConvKernel::new(k, cin, cout, &w).unwrap();
    let out = conv1d_forward(&input, &kernel, &b, d).unwrap();
    assert_eq!(out.len(), l);
    let oracle = naive_conv(&x, l, cin, &w, &b, k, d);
    for (a, o) in out.data().iter().zip(&oracle) {
        assert!((a - o).abs() < 1e-12);
    }

    let grads = conv1d_backward(&input, &kernel, d, &SeqTensor::new(l, cout, r.clone()).unwrap()).unwrap();
    assert_eq!(grads.d_weights.len(), w.len() + b.len());

    let n_x = numeric_grad(&x, |x| dot(&naive_conv(x, l, cin, &w, &b, k, d), &r));
    let n_w = numeric_grad(&w, |w| dot(&naive_conv(&x, l, cin, w, &b, k, d), &r));
    let n_b = numeric_grad(&b, |b| dot(&naive_conv(&x, l, cin, &w, b, k, d), &r));
    let (dw, db) = grads.d_weights.split_at(w.len());
    max_rel(grads.d_input.data(), &n_x)
        .max(max_rel(dw, &n_w))
        .max(max_rel(db, &n_b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conv_gradients_match_finite_differences(
        l in prop::sample::select(vec![1usize, 2, 5, 31, 100]),
        cin in 1usize..4,
        cout in 1usize..4,
        k in prop::sample::select(vec![1usize, 3, 5]),
        d in prop::sample::select(vec![1usize, 2, 4, 8]),
        seed in any::<u64>(),
    ) {
        let e = conv_case(l, cin, cout, k, d, seed);
        prop_assert!(e < TOL, "max rel error {e}");
    }

    #[test]
    fn conv_preserves_length(l in 1usize..60, k in prop::sample::select(vec![1usize, 3, 5, 7]), d in 1usize..10) {
        let w = vec![0.5; k * 2 * 3];
        let kernel = ConvKernel::new(k, 2, 3, &w).unwrap();
        let out = conv1d_forward(&SeqTensor::zeros(l, 2).unwrap(), &kernel, &[0.0; 3], d).unwrap();
        prop_assert_eq!(out.shape(), (l, 3));
    }

    #[test]
    fn relu_gradients_away_from_zero(l in 1usize..40, c in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..l * c)
            .map(|_| {
                let v: f64 = rng.random_range(0.01..1.0);
                if rng.random_bool(0.5) { v } else { -v }
            })
            .collect();
        let r = uniform(&mut rng, l * c);
        let input = SeqTensor::new(l, c, x.clone()).unwrap();
        let g = relu_backward(&input, &SeqTensor::new(l, c, r.clone()).unwrap()).unwrap();
        let n = numeric_grad(&x, |x| x.iter().zip(&r).map(|(v, r)| v.max(0.0) * r).sum());
        prop_assert!(max_rel(g.data(), &n) < TOL);
    }

    #[test]
    fn maxpool_gradients_with_unique_maxima(
        l in prop::sample::select(vec![1usize, 2, 31, 100]),
        c in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Values on a 0.01 grid, shuffled: every channel has a unique max
        // separated from the runner-up by far more than EPS.
        let mut x: Vec<f64> = (0..l * c).map(|i| i as f64 * 0.01).collect();
        for i in (1..x.len()).rev() {
            let j = rng.random_range(0..=i);
            x.swap(i, j);
        }
        let r = uniform(&mut rng, c);
        let input = SeqTensor::new(l, c, x.clone()).unwrap();
        let pool = global_maxpool_forward(&input).unwrap();
        let g = global_maxpool_backward(&pool.argmax, &r, l).unwrap();
        let n = numeric_grad(&x, |x| {
            (0..c)
                .map(|ch| (0..l).map(|t| x[t * c + ch]).fold(f64::NEG_INFINITY, f64::max) * r[ch])
                .sum()
        });
        prop_assert!(max_rel(g.data(), &n) < TOL);
    }

    #[test]
    fn maxpool_values_are_permutation_invariant(l in 1usize..30, c in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..l).map(|_| uniform(&mut rng, c)).collect();
        let mut shuffled = rows.clone();
        for i in (1..l).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let a = global_maxpool_forward(&SeqTensor::from_rows(&rows).unwrap()).unwrap();
        let b = global_maxpool_forward(&SeqTensor::from_rows(&shuffled).unwrap()).unwrap();
        prop_assert_eq!(a.values, b.values);
    }

    #[test]
    fn dense_gradients_match_finite_differences(n in 1usize..9, m in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(&mut rng, n);
        let w = uniform(&mut rng, n * m);
        let b = uniform(&mut rng, m);
        let r = uniform(&mut rng, m);
        let g = dense_backward(&x, &w, &r).unwrap();
        let f = |x: &[f64], w: &[f64], b: &[f64]| dot(&dense_forward(x, w, b).unwrap(), &r);
        let n_x = numeric_grad(&x, |x| f(x, &w, &b));
        let n_w = numeric_grad(&w, |w| f(&x, w, &b));
        let n_b = numeric_grad(&b, |b| f(&x, &w, b));
        let (dw, db) = g.d_weights.split_at(n * m);
        prop_assert!(max_rel(g.d_input.data(), &n_x) < TOL);
        prop_assert!(max_rel(dw, &n_w) < TOL);
        prop_assert!(max_rel(db, &n_b) < TOL);
    }
}

#[test]
fn full_width_conv_case() {
    assert!(conv_case(7, 2, 3, 3, 2, 99) < 1e-6);
}

#[test]
fn dense_random_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (x, w, b) = (uniform(&mut rng, 5), uniform(&mut rng, 20), uniform(&mut rng, 4));
    let r = uniform(&mut rng, 4);
    let g = dense_backward(&x, &w, &r).unwrap();
    let n_w = numeric_grad(&w, |w| dot(&dense_forward(&x, w, &b).unwrap(), &r));
    assert!(max_rel(&g.d_weights[..20], &n_w) < 1e-6);
}

#[test]
fn relu_forward_then_backward_on_finite_input_stays_finite() {
    let x = SeqTensor::new(4, 1, vec![-1e300, 1e300, 0.0, -0.0]).unwrap();
    let y = relu_forward(&x);
    assert!(y.is_finite());
}
