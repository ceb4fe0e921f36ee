use std::sync::Arc;

use credit_assl::assl::AsslConfig;
use credit_assl::data::{
    generate_synthetic, stratified_split, Dataset, DatasetSchema, Normalizer, SplitFractions, SynthConfig,
};
use credit_assl::nn::Matrix;
use credit_assl::pipeline::{evaluate_assl, phase_one, phase_two, prepare_split};
use credit_assl::prm::{GbdtConfig, PrmConfig};

fn synth(seed: u64) -> (Dataset, Dataset) {
    let data = generate_synthetic(&SynthConfig {
        num_features: 4,
        num_classes: 3,
        num_samples: 600,
        labeled_fraction: 0.4,
        seed,
        ..Default::default()
    })
    .unwrap();
    (data.labeled, data.unlabeled)
}

fn prm() -> PrmConfig {
    PrmConfig {
        gbdt: GbdtConfig {
            rounds: 8,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn small_assl(seed: u64) -> AsslConfig {
    AsslConfig {
        embedding_dim: 4,
        encoder_hidden: vec![8],
        head_hidden: vec![6],
        discriminator_hidden: vec![6],
        epochs: 3,
        batch_size: 16,
        seed,
        ..Default::default()
    }
}

/// Row indices of the validation and test parts for `seed`.
fn held_out_indices(labeled: &Dataset, fractions: SplitFractions, seed: u64) -> Vec<usize> {
    let n = labeled.len();
    let idx = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
    let schema = Arc::new(DatasetSchema::generic(1, labeled.num_classes()).unwrap());
    let probe = Dataset::new(schema, idx, labeled.labels().map(<[usize]>::to_vec)).unwrap();
    let (_, val, test) = stratified_split(&probe, fractions, seed).unwrap();
    val.rows()
        .as_slice()
        .iter()
        .chain(test.rows().as_slice())
        .map(|&v| v as usize)
        .collect()
}

#[test]
fn held_out_rows_never_reach_training_state() {
    let (labeled, unlabeled) = synth(3);
    let fractions = SplitFractions::default();
    let seed = 11;
    let held = held_out_indices(&labeled, fractions, seed);
    assert!(!held.is_empty());

    let mut rows = labeled.rows().clone();
    for &r in &held {
        for v in rows.row_mut(r) {
            *v = *v * 1e3 + 50.0;
        }
    }
    let tampered = labeled.with_rows(rows).unwrap();

    let a = prepare_split(&labeled, &unlabeled, fractions, seed).unwrap();
    let b = prepare_split(&tampered, &unlabeled, fractions, seed).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.normalizer, b.normalizer);
    assert_eq!(a.train_z, b.train_z);
    assert_eq!(a.unlabeled_z, b.unlabeled_z);
    assert_ne!(a.test, b.test);

    let (model_a, pseudo_a) = phase_one(&a, &prm()).unwrap();
    let (model_b, pseudo_b) = phase_one(&b, &prm()).unwrap();
    assert_eq!(model_a, model_b);
    assert_eq!(pseudo_a, pseudo_b);
}

#[test]
fn normalizer_is_fitted_on_training_features_only() {
    let (labeled, unlabeled) = synth(4);
    let split = prepare_split(&labeled, &unlabeled, SplitFractions::default(), 2).unwrap();
    assert_eq!(split.normalizer, Normalizer::fit(&split.train.without_labels()).unwrap());
    for c in 0..split.train_z.rows().cols() {
        let mean: f64 = split.train_z.rows().iter_rows().map(|r| r[c]).sum::<f64>() / split.train_z.len() as f64;
        assert!(mean.abs() < 1e-12, "column {c} mean {mean}");
    }
}

#[test]
fn labels_on_the_unlabeled_pool_are_ignored() {
    let (labeled, unlabeled) = synth(5);
    let n = unlabeled.len();
    let fake = Dataset::new(
        unlabeled.schema().clone(),
        unlabeled.rows().clone(),
        Some((0..n).map(|i| i % 3).collect()),
    )
    .unwrap();
    let a = prepare_split(&labeled, &unlabeled, SplitFractions::default(), 1).unwrap();
    let b = prepare_split(&labeled, &fake, SplitFractions::default(), 1).unwrap();
    assert!(!b.unlabeled_z.is_labeled());
    assert_eq!(a.unlabeled_z, b.unlabeled_z);
    assert_eq!(phase_one(&a, &prm()).unwrap().1, phase_one(&b, &prm()).unwrap().1);
}

#[test]
fn phase_two_is_deterministic() {
    let (labeled, unlabeled) = synth(6);
    let split = prepare_split(&labeled, &unlabeled, SplitFractions::default(), 6).unwrap();
    let (_, pseudo) = phase_one(&split, &prm()).unwrap();
    let cfg = small_assl(6);
    let first = phase_two(&split, &pseudo, &cfg).unwrap();
    let second = phase_two(&split, &pseudo, &cfg).unwrap();
    assert_eq!(first, second);
}

#[test]
fn zero_alpha_matches_training_without_discriminator() {
    let (labeled, unlabeled) = synth(7);
    let split = prepare_split(&labeled, &unlabeled, SplitFractions::default(), 7).unwrap();
    let (_, pseudo) = phase_one(&split, &prm()).unwrap();
    let zero_alpha = small_assl(7).without_adversarial();
    let no_disc = AsslConfig {
        use_discriminator: false,
        ..small_assl(7)
    };
    let (a, ha) = phase_two(&split, &pseudo, &zero_alpha).unwrap();
    let (b, hb) = phase_two(&split, &pseudo, &no_disc).unwrap();
    assert_eq!(a.encoder, b.encoder);
    assert_eq!(a.supervised_head, b.supervised_head);
    assert_eq!(a.semi_head, b.semi_head);
    assert_eq!(ha.best_epoch, hb.best_epoch);
    let ra = evaluate_assl(&a, &zero_alpha, &split).unwrap().1;
    let rb = evaluate_assl(&b, &no_disc, &split).unwrap().1;
    assert_eq!(ra, rb);
    for (x, y) in ha.records.iter().zip(&hb.records) {
        assert_eq!(x.loss_l, y.loss_l);
        assert_eq!(x.loss_u, y.loss_u);
    }
}
