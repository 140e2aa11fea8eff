//! End-to-end checks on systems whose dynamics are known in closed form.

use sentidyn::cells::{Architecture, CellParameters};
use sentidyn::fixedpoints::{find_fixed_points, FixedPointConfig};
use sentidyn::linearize::{linearize_all, time_constant};
use sentidyn::manifold::{fit_manifold, overlap_report, LleConfig};
use sentidyn::numerics::{dot, norm2, Matrix};
use sentidyn::training::{evaluate_accuracy, synthetic_dataset, train_classifier, Split, SyntheticSpec, TrainConfig};

const N: usize = 3;
const SPECTRUM: [f64; N] = [1.0, 0.5, 0.2];

/// Orthonormal columns; the first is the line direction.
fn basis() -> Matrix {
    let (c, s) = (0.6f64, 0.8f64);
    // rotation in the (0,1) plane followed by one in the (1,2) plane
    let a = Matrix::from_rows(&[vec![c, -s, 0.0], vec![s, c, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
    let b = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, s, -c], vec![0.0, c, s]]).unwrap();
    a.matmul(&b).unwrap()
}

/// `h' = Q diag(1, 0.5, 0.2) Qᵀ h + W_x x`: every point on span(q₁) is fixed.
fn line_cell() -> (CellParameters, Vec<f64>) {
    let q = basis();
    let w = q.matmul(&Matrix::from_diagonal(&SPECTRUM)).unwrap().matmul(&q.transpose()).unwrap();
    let wx = Matrix::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.4], vec![-0.5, 0.1]]).unwrap();
    let b = Matrix::zeros(N, 1);
    let cell = CellParameters::from_tensors(Architecture::Linear, N, 2, vec![w, wx, b]).unwrap();
    (cell, q.column(0))
}

fn off_line(h: &[f64], q1: &[f64]) -> f64 {
    let a = dot(h, q1);
    let r: Vec<f64> = h.iter().zip(q1).map(|(x, d)| x - a * d).collect();
    norm2(&r)
}

fn starts(q1: &[f64]) -> Vec<Vec<f64>> {
    // evenly spaced along the line, nudged off it
    (0..40)
        .map(|i| {
            let t = -2.0 + 0.1 * i as f64;
            let e = 1e-3 * ((i % 3) as f64 - 1.0);
            vec![t * q1[0] + e, t * q1[1] - e, t * q1[2] + 0.5 * e]
        })
        .collect()
}

#[test]
fn line_attractor_is_recovered_end_to_end() {
    let (cell, q1) = line_cell();
    let config = FixedPointConfig {
        threshold: 1e-14,
        ..FixedPointConfig::default()
    };
    let search = find_fixed_points(&cell, &starts(&q1), &config).unwrap();
    assert_eq!(search.accepted.len(), 40);
    let points: Vec<Vec<f64>> = search.accepted.iter().map(|f| f.h_star.clone()).collect();
    for p in &points {
        assert!(off_line(p, &q1) < 1e-6, "{p:?} is off the line");
    }

    let readout = q1.clone();
    let systems = linearize_all(&cell, &readout, &points).unwrap();
    for s in &systems {
        for (l, want) in s.eigenvalues.iter().zip(SPECTRUM) {
            assert!((l - want).norm() < 1e-10, "{l} vs {want}");
        }
        assert!(time_constant(s.eigenvalues[0]) > 1e9);
        assert!((s.time_constants[1] - 1.0 / 2f64.ln()).abs() < 1e-8);
        assert!((s.time_constants[2] - 1.0 / 5f64.ln()).abs() < 1e-8);
        // the linear cell is its own linearization, up to the residual (I − W)h*
        let residual = (N as f64 * search.accepted[s.fixed_point].q_value).sqrt();
        let (h, x) = (vec![0.3, -0.7, 1.1], vec![0.9, -0.4]);
        let exact = cell.step(&h, &x).unwrap();
        let lin = s.linearized_step(&h, &x).unwrap();
        for (a, b) in exact.iter().zip(&lin) {
            assert!((a - b).abs() <= residual + 1e-12, "{a} vs {b}");
        }
    }

    let fit = fit_manifold(&points, &readout, &LleConfig { k_neighbors: 6, ridge: 1e-3 }).unwrap();
    assert!(fit.top_component_ratio() > 0.999_999);
    assert!((dot(&fit.m, &q1) - 1.0).abs() < 1e-9, "m = {:?}", fit.m);
    assert_eq!(fit.concordance(&points), 1.0);

    // ℓ₁ and r₁ both equal q₁ for a symmetric recurrence
    let report = overlap_report(&systems, &fit.m, 2000, 9).unwrap();
    assert!(report.skipped.is_empty());
    for o in &report.overlaps {
        assert!((o.value.abs() - 1.0).abs() < 1e-9, "{o:?}");
    }
    assert!(report.null_quantile(0.99) < report.median_abs_overlap());
}

#[test]
fn trained_gru_has_slow_fixed_points() {
    let spec = SyntheticSpec::balanced(3, 3, 10, 5, 15, 400, 5);
    let data = synthetic_dataset(&spec, 0.1, 0.1).unwrap();
    let cfg = TrainConfig {
        architecture: Architecture::Gru,
        hidden_size: 8,
        embedding_size: 4,
        epochs: 8,
        batch_size: 16,
        learning_rate: 1e-2,
        seed: 5,
        ..TrainConfig::default()
    };
    let (model, log) = train_classifier(&data, &cfg).unwrap();
    let acc = evaluate_accuracy(&model, data.split(Split::Test)).unwrap();
    assert!(acc > 0.8, "test accuracy {acc}");
    assert!(log.best().validation_accuracy >= log.initial().validation_accuracy);

    let init = sentidyn::training::sample_hidden_states(&model, data.split(Split::Test), 32, 1).unwrap();
    let search = find_fixed_points(&model.cell, &init, &FixedPointConfig::default()).unwrap();
    assert!(!search.accepted.is_empty());
    let points: Vec<Vec<f64>> = search.accepted.iter().map(|f| f.h_star.clone()).collect();
    let systems = linearize_all(&model.cell, &model.readout, &points).unwrap();
    // an integrating network keeps at least one mode near the unit circle
    let slow = systems.iter().filter(|s| s.spectral_radius() > 0.9).count();
    assert!(slow * 2 >= systems.len(), "{slow} of {} fixed points have a slow mode", systems.len());
}
