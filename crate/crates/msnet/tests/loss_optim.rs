use msnet::loss::{cce_grad_logits, softmax, weighted_cce, ClassWeights};
use msnet::optim::{adam_step, AdamState};
use proptest::prelude::*;

fn logits() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0f64..30.0, 3)
}

/// Scalar Adam recurrence written out step by step.
fn scalar_adam(mut p: f64, grads: &[f64], lr: f64) -> f64 {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut m, mut v) = (0.0, 0.0);
    for (i, &g) in grads.iter().enumerate() {
        let t = (i + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    p
}

proptest! {
    #[test]
    fn softmax_normalized_and_shift_invariant(z in logits(), shift in -100.0f64..100.0) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300 || (a - b).abs() / a < 1e-12);
        }
    }

    #[test]
    fn grad_matches_finite_differences(
        z in prop::collection::vec(-4.0f64..4.0, 3),
        label in 0usize..3,
        w in prop::collection::vec(0.1f64..3.0, 3),
    ) {
        let weights = ClassWeights([w[0], w[1], w[2]]);
        let g = cce_grad_logits(&softmax(&z), label, &weights).unwrap();
        // Fourth-order central stencil: truncation O(h⁴) ≈ 1e-12 at h = 1e-3.
        let h = 1e-3;
        let loss = |zi: f64, i: usize| {
            let mut z = z.clone();
            z[i] = zi;
            weighted_cce(&softmax(&z), label, &weights).unwrap()
        };
        for i in 0..3 {
            let x = z[i];
            let n = (-loss(x + 2.0 * h, i) + 8.0 * loss(x + h, i) - 8.0 * loss(x - h, i)
                + loss(x - 2.0 * h, i))
                / (12.0 * h);
            let rel = (g[i] - n).abs() / g[i].abs().max(n.abs()).max(1e-3);
            prop_assert!(rel < 1e-8, "i={i} analytic {} numeric {n}", g[i]);
        }
    }

    #[test]
    fn unit_weights_equal_plain_cross_entropy(z in logits(), label in 0usize..3) {
        let p = softmax(&z);
        let plain = -p[label].max(1e-12).ln();
        prop_assert_eq!(weighted_cce(&p, label, &ClassWeights::uniform()).unwrap(), plain);
    }

    #[test]
    fn zero_lr_never_moves(grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..6)) {
        let mut p = vec![0.1, -0.2, 0.3, 4.0];
        let mut s = AdamState::new(4, 0.0).unwrap();
        for g in &grads {
            adam_step(&mut p, g, &mut s).unwrap();
        }
        prop_assert_eq!(p, vec![0.1, -0.2, 0.3, 4.0]);
        prop_assert_eq!(s.step_count(), grads.len() as u64);
    }

    #[test]
    fn first_step_is_bounded_by_lr(g in prop::collection::vec(-1e3f64..1e3, 1..8), lr in 1e-6f64..1e-1) {
        let mut p = vec![0.0; g.len()];
        let mut s = AdamState::new(g.len(), lr).unwrap();
        s.step(&mut p, &g).unwrap();
        for v in p {
            prop_assert!(v.abs() <= lr * (1.0 + 1e-9));
        }
        prop_assert!(s.second_moment().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn matches_scalar_recurrence(grads in prop::collection::vec(-2.0f64..2.0, 1..12), lr in 1e-5f64..1e-2) {
        let mut p = vec![0.75];
        let mut s = AdamState::new(1, lr).unwrap();
        for &g in &grads {
            s.step(&mut p, &[g]).unwrap();
        }
        prop_assert!((p[0] - scalar_adam(0.75, &grads, lr)).abs() < 1e-12);
    }
}

#[test]
fn two_constant_steps_against_scalar_oracle() {
    let mut p = vec![1.0];
    let mut s = AdamState::new(1, 1e-4).unwrap();
    s.step(&mut p, &[0.5]).unwrap();
    s.step(&mut p, &[0.5]).unwrap();
    assert!((p[0] - scalar_adam(1.0, &[0.5, 0.5], 1e-4)).abs() < 1e-12);
    assert_eq!(s.step_count(), 2);
}
