use mdl_core::analysis::{class_subspace, subspace_overlap, tau_ranking};
use mdl_core::baselines::{make_lrd, train_bp, DenseNetwork};
use mdl_core::checkpoint::{decode, encode, Checkpoint};
use mdl_core::datasets::{sample_mixture, GaussianMixtureSpec, LabeledDataset, TargetKind};
use mdl_core::linalg::{gaussian_matrix, Matrix, RngState};
use mdl_core::modes::{train_mdl, MdlNetwork, Tying};
use mdl_core::training::{evaluate, train, Head, Model, TrainConfig};
use proptest::prelude::*;

fn tying_strategy() -> impl Strategy<Value = Tying> {
    prop_oneof![Just(Tying::OneLayerTwoPatterns), Just(Tying::OneLayerOnePattern)]
}

fn head_strategy() -> impl Strategy<Value = Head> {
    prop_oneof![Just(Head::SoftmaxCrossEntropy), Just(Head::IdentityMse)]
}

fn targets(head: Head, rows: usize, cols: usize, rng: &mut RngState) -> Matrix {
    match head {
        Head::SoftmaxCrossEntropy => {
            let mut t = Matrix::zeros(rows, cols);
            for r in 0..rows {
                t[(r, rng.below(cols))] = 1.0;
            }
            t
        }
        Head::IdentityMse => gaussian_matrix(rows, cols, rng).unwrap(),
    }
}

/// Mode gradients from the dense weight gradient `G` of each layer:
/// `∂ξ̂ = G ξ Σ`, `∂ξ = Gᵀ ξ̂ Σ`, `∂Σ_α = ξ̂_αᵀ G ξ_α`, shared slots summed.
#[test]
fn mode_gradients_follow_chain_rule_through_composed_weights() {
    for tying in [Tying::OneLayerTwoPatterns, Tying::OneLayerOnePattern] {
        for head in [Head::SoftmaxCrossEntropy, Head::IdentityMse] {
            let mut rng = RngState::new(21);
            let net = MdlNetwork::init(&[7, 6, 5, 4], &[3, 3, 3], tying, head, &mut rng).unwrap();
            let x = gaussian_matrix(9, 7, &mut rng).unwrap();
            let t = targets(head, 9, 4, &mut rng);
            let dense = DenseNetwork::from_weights(head, net.composed_weights()).unwrap();
            let g_dense = dense.gradients(&x, &t, 0.0).unwrap();
            let g = net.backward(&net.forward(&x).unwrap(), &t, 0.0).unwrap();

            let mut expect_patterns: Vec<Matrix> =
                net.patterns().iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
            for l in 0..net.num_layers() {
                let layer = net.layer(l);
                let (up, down) = net.pattern_slots(l);
                let gw = &g_dense[l];
                let g_hat = gw.matmul(layer.xi).unwrap().scale_columns(layer.sigma).unwrap();
                let g_xi = gw.t_matmul(layer.xi_hat).unwrap().scale_columns(layer.sigma).unwrap();
                expect_patterns[up].axpy(1.0, &g_hat).unwrap();
                expect_patterns[down].axpy(1.0, &g_xi).unwrap();
                for a in 0..layer.modes() {
                    let v: f64 = (0..gw.rows())
                        .map(|i| layer.xi_hat[(i, a)] * (0..gw.cols()).map(|j| gw[(i, j)] * layer.xi[(j, a)]).sum::<f64>())
                        .sum();
                    assert!((g.sigmas[l][a] - v).abs() < 1e-10, "{tying:?} {head:?} sigma {l},{a}");
                }
            }
            for (slot, expect) in expect_patterns.iter().enumerate() {
                let diff = g.patterns[slot].sub(expect).unwrap().max_abs();
                assert!(diff < 1e-10, "{tying:?} {head:?} slot {slot}: {diff}");
            }
        }
    }
}

#[test]
fn zero_importances_give_chance_outputs() {
    let mut rng = RngState::new(3);
    let mut net = MdlNetwork::init(&[5, 4, 3], &[2, 2], Tying::OneLayerTwoPatterns, Head::SoftmaxCrossEntropy, &mut rng)
        .unwrap();
    for l in 0..net.num_layers() {
        net.sigma_mut(l).iter_mut().for_each(|s| *s = 0.0);
    }
    let x = gaussian_matrix(30, 5, &mut rng).unwrap();
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let ds = LabeledDataset::from_labels(x, &labels, 3).unwrap();
    let e = evaluate(&net, &ds).unwrap();
    // Every row is uniform, so argmax picks class 0.
    assert!((e.accuracy - 1.0 / 3.0).abs() < 1e-12);
    assert!((e.loss - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn training_is_deterministic_per_seed() {
    let spec = GaussianMixtureSpec::default();
    let train_ds = sample_mixture(&spec, 200, TargetKind::OneHot, &mut RngState::new(1)).unwrap();
    let test_ds = sample_mixture(&spec, 100, TargetKind::OneHot, &mut RngState::new(2)).unwrap();
    let cfg = TrainConfig { epochs: 60, batch_size: 16, learning_rate: 0.1, seed: 4, ..Default::default() };
    let run = || train_mdl(&[2, 16, 2], &[4, 2], Tying::OneLayerTwoPatterns, Head::SoftmaxCrossEntropy, &train_ds, &test_ds, &cfg).unwrap();
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
    let other = train_mdl(
        &[2, 16, 2],
        &[4, 2],
        Tying::OneLayerTwoPatterns,
        Head::SoftmaxCrossEntropy,
        &train_ds,
        &test_ds,
        &TrainConfig { seed: 5, ..cfg.clone() },
    )
    .unwrap();
    assert_ne!(other.1, ha);
    let (_, bp) = train_bp(&[2, 16, 2], Head::SoftmaxCrossEntropy, &train_ds, &test_ds, &cfg).unwrap();
    assert!(bp.last().unwrap().test_accuracy > 0.9, "{:?}", bp.last());
    assert!(ha.last().unwrap().test_accuracy > 0.9, "{:?}", ha.last());
}

#[test]
fn lrd_keeps_unit_importances_through_training() {
    let spec = GaussianMixtureSpec::default();
    let ds = sample_mixture(&spec, 100, TargetKind::OneHot, &mut RngState::new(8)).unwrap();
    let mut net = make_lrd(&[2, 6, 2], &[2, 2], Head::SoftmaxCrossEntropy, &mut RngState::new(9)).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 10, ..Default::default() };
    train(&mut net, &ds, &ds, &cfg).unwrap();
    assert!(net.sigmas().iter().flatten().all(|&s| s == 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn factorized_forward_equals_dense(
        seed in any::<u64>(),
        widths in prop::collection::vec(1usize..10, 3..6),
        p in 1usize..6,
        tying in tying_strategy(),
        head in head_strategy(),
    ) {
        let mut rng = RngState::new(seed);
        let layers = widths.len() - 1;
        let net = MdlNetwork::init(&widths, &vec![p; layers], tying, head, &mut rng).unwrap();
        let x = gaussian_matrix(5, widths[0], &mut rng).unwrap();
        let mode = net.forward(&x).unwrap().output;
        let dense = DenseNetwork::from_weights(head, net.composed_weights()).unwrap().predict(&x).unwrap();
        prop_assert!(mode.sub(&dense).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn subspace_overlap_is_symmetric_and_bounded(seed in any::<u64>(), n in 2usize..8, rows in 3usize..20) {
        let mut rng = RngState::new(seed);
        let a = class_subspace(&gaussian_matrix(rows, n, &mut rng).unwrap(), 0.8).unwrap();
        let b = class_subspace(&gaussian_matrix(rows, n, &mut rng).unwrap(), 0.8).unwrap();
        let ab = subspace_overlap(&a.basis, &b.basis).unwrap();
        let ba = subspace_overlap(&b.basis, &a.basis).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&ab));
        let self_overlap = subspace_overlap(&a.basis, &a.basis).unwrap();
        prop_assert!((self_overlap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tau_scales_with_importances(seed in any::<u64>(), c in 0.1f64..10.0, tying in tying_strategy()) {
        let mut rng = RngState::new(seed);
        let net = MdlNetwork::init(&[6, 5, 4], &[4, 4], tying, Head::IdentityMse, &mut rng).unwrap();
        let mut scaled = net.clone();
        for l in 0..scaled.num_layers() {
            scaled.sigma_mut(l).iter_mut().for_each(|s| *s *= c);
        }
        let (a, b) = (tau_ranking(&net), tau_ranking(&scaled));
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            for (ta, tb) in la.tau.iter().zip(&lb.tau) {
                prop_assert!((tb - c * ta).abs() <= 1e-12 * (1.0 + tb.abs()));
            }
            prop_assert_eq!(&la.order, &lb.order);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact(seed in any::<u64>(), tying in tying_strategy(), head in head_strategy()) {
        let mut rng = RngState::new(seed);
        let net = MdlNetwork::init(&[4, 3, 2], &[2, 2], tying, head, &mut rng).unwrap();
        let bytes = encode(&Checkpoint::Mdl(net.clone()));
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(encode(&back), bytes);
        let Checkpoint::Mdl(restored) = back else { panic!("kind changed") };
        prop_assert_eq!(restored, net);
    }
}
