//! Flow correctness against independent numerical oracles.

mod common;

use rand::Rng;
use vfreg::flow::{
    mean_log_prob, nll_and_grads, train_flow, FlowArch, FlowModel, FlowTrainConfig, Normalizer,
    LOG_NORM_6D,
};
use vfreg::io_core::{seeded_rng, standard_normal};
use vfreg::math::{Vec3, Vec6};

fn random_points(seed: u64, n: usize, scale: f64) -> Vec<Vec6<f64>> {
    let mut rng = seeded_rng(seed, "points");
    (0..n)
        .map(|_| {
            let mut x = [0.0; 6];
            for v in &mut x {
                *v = rng.gen_range(-scale..scale);
            }
            x
        })
        .collect()
}

fn small_model(seed: u64, hidden: usize, layers: usize) -> FlowModel<f64> {
    let arch = FlowArch {
        n_layers: layers,
        hidden,
        n_hidden_layers: 2,
        scale_clamp: 5.0,
    };
    let mut rng = seeded_rng(seed, "model-init");
    FlowModel::init(&arch, Normalizer::identity(), &mut rng).unwrap()
}

/// Perturbs parameters away from the near-identity init so the Jacobian and
/// gradients are generic.
fn kicked_model(seed: u64, hidden: usize, layers: usize, kick: f64) -> FlowModel<f64> {
    let mut model = small_model(seed, hidden, layers);
    let mut rng = seeded_rng(seed, "model-kick");
    for p in model.params_mut() {
        *p += rng.gen_range(-kick..kick);
    }
    model
}

#[test]
fn round_trip_is_bijective() {
    let model = kicked_model(1, 24, 4, 0.3);
    let mut worst: f64 = 0.0;
    for x in random_points(2, 10_000, 2.0) {
        let (z, _) = model.forward(&x).unwrap();
        let back = model.inverse(&z).unwrap();
        for d in 0..6 {
            worst = worst.max((back[d] - x[d]).abs());
        }
    }
    assert!(worst < 1e-8, "max round-trip error {worst}");
}

#[test]
fn logdet_matches_numerical_jacobian() {
    let model = kicked_model(3, 16, 4, 0.3);
    for x in random_points(4, 100, 1.5) {
        let (_, logdet) = model.forward(&x).unwrap();
        let num = common::numerical_logdet(
            |p| model.forward(p).unwrap().0,
            &x,
            1e-5,
        );
        let rel = (logdet - num).abs() / num.abs().max(1.0);
        assert!(rel < 1e-5, "logdet {logdet} vs numerical {num} (rel {rel})");
    }
}

#[test]
fn zero_weight_model_is_the_normalizer() {
    let mut model = small_model(5, 8, 2);
    let zeros = vec![0.0; model.param_count()];
    model.set_flat_params(&zeros).unwrap();
    let x = [0.4, -1.0, 0.2, 0.9, -0.3, 0.1];
    let (z, logdet) = model.forward(&x).unwrap();
    assert_eq!(z, x, "identity normalizer + zero nets must be identity");
    assert_eq!(logdet, 0.0);

    // With a non-trivial normalizer the map is exactly the normalizer.
    let norm = Normalizer {
        shift: [0.5; 6],
        scale: [2.0, 1.0, 0.5, 1.5, 3.0, 0.25],
    };
    let mut rng = seeded_rng(6, "norm-model");
    let mut model = FlowModel::init(
        &FlowArch {
            n_layers: 2,
            hidden: 8,
            n_hidden_layers: 1,
            scale_clamp: 5.0,
        },
        norm.clone(),
        &mut rng,
    )
    .unwrap();
    let zeros = vec![0.0; model.param_count()];
    model.set_flat_params(&zeros).unwrap();
    let (z, logdet) = model.forward(&x).unwrap();
    let expect = norm.forward(&x);
    for d in 0..6 {
        assert!((z[d] - expect[d]).abs() < 1e-15);
    }
    assert!((logdet - norm.logdet()).abs() < 1e-12);
    let back = model.inverse(&z).unwrap();
    for d in 0..6 {
        assert!((back[d] - x[d]).abs() < 1e-12);
    }
}

#[test]
fn composition_matches_per_layer_application() {
    let model = kicked_model(7, 12, 2, 0.2);
    let x = [0.3, -0.2, 0.8, -0.5, 0.1, 0.6];
    let (z, logdet) = model.forward(&x).unwrap();

    let mut u = model.normalizer().forward(&x);
    let mut ld = model.normalizer().logdet();
    for layer in model.layers() {
        let (next, l) = layer.forward(&u).unwrap();
        u = next;
        ld += l;
    }
    for d in 0..6 {
        assert!((z[d] - u[d]).abs() < 1e-12);
    }
    assert!((logdet - ld).abs() < 1e-12);
}

#[test]
fn log_prob_at_gaussian_mode_matches_closed_form() {
    let mut model = small_model(8, 8, 2);
    let zeros = vec![0.0; model.param_count()];
    model.set_flat_params(&zeros).unwrap();
    let lp = model.log_prob(&[0.0; 6]).unwrap();
    assert!((lp + LOG_NORM_6D).abs() < 1e-12);
    assert!((LOG_NORM_6D - 3.0 * std::f64::consts::TAU.ln() + 3.0 * 2.0f64.ln() * 0.0).abs() < 1e-12);
}

#[test]
fn per_layer_logdet_respects_clamp_bound() {
    // Huge parameter kick; tanh clamping must keep logdet bounded.
    let model = kicked_model(9, 16, 4, 50.0);
    for x in random_points(10, 50, 3.0) {
        let mut u = model.normalizer().forward(&x);
        for layer in model.layers() {
            let (next, ld) = layer.forward(&u).unwrap();
            let transformed = layer.mask().iter().filter(|m| !**m).count() as f64;
            assert!(
                ld.abs() <= layer.scale_clamp() * transformed + 1e-12,
                "layer logdet {ld} exceeds clamp bound"
            );
            u = next;
        }
        let lp = model.log_prob(&x).unwrap();
        assert!(lp.is_finite());
    }
}

#[test]
fn training_gradient_matches_finite_differences_everywhere() {
    let mut model = kicked_model(11, 8, 2, 0.2);
    let batch = random_points(12, 24, 1.2);
    let (_, grads) = nll_and_grads(&model, &batch).unwrap();
    let flat = grads.flat();
    assert_eq!(flat.len(), model.param_count());

    let h = 1e-5;
    let loss_of = |m: &FlowModel<f64>| {
        let mut total = 0.0;
        for x in &batch {
            total += -m.log_prob(x).unwrap();
        }
        total / batch.len() as f64
    };
    for idx in 0..model.param_count() {
        let old = {
            let mut p = model.params_mut();
            let v = *p[idx];
            *p[idx] = v + h;
            v
        };
        let lp = loss_of(&model);
        {
            let mut p = model.params_mut();
            *p[idx] = old - h;
        }
        let lm = loss_of(&model);
        {
            let mut p = model.params_mut();
            *p[idx] = old;
        }
        let fd = (lp - lm) / (2.0 * h);
        let g = flat[idx];
        let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-6);
        assert!(rel < 1e-4, "param {idx}: analytic {g} vs fd {fd} (rel {rel})");
    }
}

#[test]
fn training_improves_holdout_likelihood_and_is_deterministic() {
    // Anisotropic Gaussian data exercises the whitening path.
    let mut rng = seeded_rng(13, "train-data");
    let scales = [2.0, 0.5, 1.0, 0.2, 3.0, 1.0];
    let data: Vec<Vec6<f64>> = (0..3000)
        .map(|_| {
            let mut x = [0.0; 6];
            for (v, s) in x.iter_mut().zip(scales) {
                *v = standard_normal(&mut rng) * s;
            }
            x
        })
        .collect();
    let config = FlowTrainConfig {
        learning_rate: 1e-3,
        batch_size: 128,
        n_iterations: 220,
        seed: 42,
        rectified: false,
        arch: FlowArch {
            n_layers: 4,
            hidden: 16,
            n_hidden_layers: 2,
            scale_clamp: 5.0,
        },
    };
    let (model_a, report_a) = train_flow(&data, &config).unwrap();
    assert!(
        report_a.holdout_ll_final > report_a.holdout_ll_init,
        "held-out LL must improve: {} -> {}",
        report_a.holdout_ll_init,
        report_a.holdout_ll_final
    );

    let (model_b, report_b) = train_flow(&data, &config).unwrap();
    assert_eq!(model_a.flat_params(), model_b.flat_params());
    assert_eq!(report_a.loss_history, report_b.loss_history);
}

#[test]
fn training_loss_windows_mostly_non_increasing() {
    // Bimodal data keeps the optimizer descending through the whole run, so
    // the windowed trend is not drowned by batch noise.
    let mut rng = seeded_rng(14, "window-data");
    let data: Vec<Vec6<f64>> = (0..4000)
        .map(|_| {
            let mode = if rng.gen_bool(0.5) { 2.0 } else { -2.0 };
            let mut x = [0.0; 6];
            for v in &mut x {
                *v = standard_normal(&mut rng) * 0.25;
            }
            x[0] += mode;
            x[1] -= mode;
            x
        })
        .collect();
    let config = FlowTrainConfig {
        learning_rate: 2e-3,
        batch_size: 384,
        n_iterations: 200,
        seed: 15,
        rectified: false,
        arch: FlowArch {
            n_layers: 4,
            hidden: 16,
            n_hidden_layers: 2,
            scale_clamp: 5.0,
        },
    };
    let (_, report) = train_flow(&data, &config).unwrap();
    let windows: Vec<f64> = report
        .loss_history
        .chunks(10)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let mut good = 0;
    for pair in windows.windows(2) {
        if pair[1] <= pair[0] + 1e-9 {
            good += 1;
        }
    }
    let frac = good as f64 / (windows.len() - 1) as f64;
    assert!(frac >= 0.9, "only {frac:.2} of windows non-increasing");
}

#[test]
fn training_rejects_small_datasets() {
    let data = random_points(16, 10, 1.0);
    let config = FlowTrainConfig {
        batch_size: 64,
        ..Default::default()
    };
    assert!(train_flow(&data, &config).is_err());
}

#[test]
fn sampling_statistics_and_inverse_consistency() {
    // Zero-weight model with identity normalizer samples a standard Gaussian.
    let mut model = small_model(17, 8, 2);
    let zeros = vec![0.0; model.param_count()];
    model.set_flat_params(&zeros).unwrap();
    let mut rng = seeded_rng(18, "sampling");
    let n = 4000;
    let samples = model.sample(&mut rng, n).unwrap();
    assert_eq!(samples.len(), n);
    for d in 0..6 {
        let mean = samples.iter().map(|s| s[d]).sum::<f64>() / n as f64;
        assert!(
            mean.abs() < 4.0 / (n as f64).sqrt(),
            "dim {d} sample mean {mean}"
        );
    }

    let one = model.sample(&mut rng, 1).unwrap();
    assert_eq!(one.len(), 1);
}

#[test]
fn trained_plane_model_concentrates_mass_near_plane() {
    // Oriented points on a thin slab around z = 0.2 with a mostly-fixed
    // viewing direction.
    let mut rng = seeded_rng(19, "plane-data");
    let data: Vec<Vec6<f64>> = (0..4000)
        .map(|_| {
            let x = rng.gen_range(-1.0..1.0);
            let y = rng.gen_range(-1.0..1.0);
            let z = 0.2 + 0.02 * standard_normal(&mut rng);
            let dir = Vec3::new(
                0.1 * standard_normal(&mut rng),
                0.1 * standard_normal(&mut rng),
                -1.0,
            )
            .normalized();
            [x, y, z, dir.x, dir.y, dir.z]
        })
        .collect();

    let config = FlowTrainConfig {
        learning_rate: 1.5e-3,
        batch_size: 256,
        n_iterations: 500,
        seed: 20,
        rectified: false,
        arch: FlowArch {
            n_layers: 4,
            hidden: 24,
            n_hidden_layers: 2,
            scale_clamp: 5.0,
        },
    };
    let (model, _) = train_flow(&data, &config).unwrap();

    let train_positions: Vec<Vec3<f64>> = data
        .iter()
        .map(|p| Vec3::new(p[0], p[1], p[2]))
        .collect();
    let (normal, offset, sigma_fit) = common::fit_plane(&train_positions);

    let mut rng = seeded_rng(21, "plane-sample");
    let samples = model.sample(&mut rng, 2000).unwrap();
    let within = samples
        .iter()
        .filter(|s| {
            let p = Vec3::new(s[0], s[1], s[2]);
            (normal.dot(p) - offset).abs() <= 3.0 * sigma_fit
        })
        .count();
    let frac = within as f64 / samples.len() as f64;
    assert!(frac >= 0.9, "only {frac:.3} of sampled mass near the plane");
}

#[test]
fn latent_origin_maps_to_high_likelihood_point() {
    let mut rng = seeded_rng(22, "origin-data");
    let data: Vec<Vec6<f64>> = (0..2500)
        .map(|_| {
            let mut x = [0.0; 6];
            for v in &mut x {
                *v = standard_normal(&mut rng) * 0.7;
            }
            x
        })
        .collect();
    let config = FlowTrainConfig {
        learning_rate: 1e-3,
        batch_size: 128,
        n_iterations: 250,
        seed: 23,
        rectified: true,
        arch: FlowArch {
            n_layers: 4,
            hidden: 16,
            n_hidden_layers: 2,
            scale_clamp: 5.0,
        },
    };
    let (model, _) = train_flow(&data, &config).unwrap();

    let x0 = model.inverse(&[0.0; 6]).unwrap();
    let lp0 = model.log_prob(&x0).unwrap();

    let mut rng = seeded_rng(24, "origin-mc");
    let mut lps: Vec<f64> = model
        .sample(&mut rng, 1000)
        .unwrap()
        .iter()
        .map(|x| model.log_prob(x).unwrap())
        .collect();
    let med = common::median(&mut lps);
    assert!(
        lp0 >= med,
        "log_prob at latent origin {lp0} below sample median {med}"
    );
}

#[test]
fn density_integrates_to_one() {
    // Importance-sampled normalization check on a small trained model.
    let mut rng = seeded_rng(25, "norm-data");
    let data: Vec<Vec6<f64>> = (0..3000)
        .map(|_| {
            let mut x = [0.0; 6];
            for v in &mut x {
                *v = standard_normal(&mut rng) * 0.8;
            }
            x
        })
        .collect();
    let config = FlowTrainConfig {
        learning_rate: 1e-3,
        batch_size: 128,
        n_iterations: 200,
        seed: 26,
        rectified: false,
        arch: FlowArch {
            n_layers: 2,
            hidden: 8,
            n_hidden_layers: 1,
            scale_clamp: 5.0,
        },
    };
    let (model, _) = train_flow(&data, &config).unwrap();

    // Proposal q = N(0, s^2 I) wide enough to dominate the trained density
    // inside the box; the box holds >= 99.9% of the model mass.
    let s = 1.6;
    let box_half = 6.0;
    let mut rng = seeded_rng(27, "norm-mc");
    let n = 200_000;
    let mut acc = 0.0;
    let log_q_norm = -3.0 * (std::f64::consts::TAU * s * s).ln();
    for _ in 0..n {
        let mut x = [0.0; 6];
        let mut q2 = 0.0;
        for v in &mut x {
            *v = standard_normal(&mut rng) * s;
            q2 += *v * *v;
        }
        if x.iter().any(|v| v.abs() > box_half) {
            continue;
        }
        let log_q = log_q_norm - 0.5 * q2 / (s * s);
        let log_p = model.log_prob(&x).unwrap();
        acc += (log_p - log_q).exp();
    }
    let integral = acc / n as f64;
    assert!(
        (integral - 1.0).abs() < 0.05,
        "density integral estimate {integral}"
    );
}

#[test]
fn mean_log_prob_is_batch_order_invariant() {
    let model = kicked_model(28, 8, 2, 0.2);
    let data = random_points(29, 64, 1.0);
    let mut reversed = data.clone();
    reversed.reverse();
    let a = mean_log_prob(&model, &data).unwrap();
    let b = mean_log_prob(&model, &reversed).unwrap();
    assert!((a - b).abs() < 1e-9);
}
