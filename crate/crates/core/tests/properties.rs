use std::sync::Arc;

use credit_assl::assl::{class_loss_and_logit_grad, loss_adversarial, loss_bce_l2, ClassLoss};
use credit_assl::data::{stratified_split, Dataset, DatasetSchema, Normalizer, SplitFractions};
use credit_assl::eval::{classification_report, ConfusionMatrix};
use credit_assl::nn::{
    adam_step, argmax, dense_forward, grad_check, mlp_backward, mlp_forward, softmax, Activation, AdamState,
    DenseLayer, Matrix, MlpParams, Parameters,
};
use credit_assl::prm::{fit_regression_tree, pseudo_label, train_gbdt, train_prm, GbdtConfig, PrmConfig, PrmVariant};
use credit_assl::rng::{stream, Stream};
use proptest::prelude::*;

mod common;

use common::{brute_force_metrics, stump_oracle};

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-range..range, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn labeled(x: Matrix, labels: Vec<usize>, m: usize) -> Dataset {
    let schema = Arc::new(DatasetSchema::generic(x.cols(), m).unwrap());
    Dataset::new(schema, x, Some(labels)).unwrap()
}

/// `n` rows of `f` features with labels in `0..m`, every class present.
fn labeled_set(n: usize, f: usize, m: usize) -> impl Strategy<Value = Dataset> {
    (matrix(n, f, 3.0), prop::collection::vec(0..m, n)).prop_map(move |(x, mut y)| {
        for (k, slot) in y.iter_mut().take(m).enumerate() {
            *slot = k;
        }
        labeled(x, y, m)
    })
}

fn assert_simplex(p: &Matrix) -> Result<(), TestCaseError> {
    for row in p.iter_rows() {
        let s: f64 = row.iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12, "row sums to {s}");
        prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)), "{row:?}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_is_a_shift_invariant_simplex(
        logits in prop::collection::vec(-50.0..50.0f64, 1..12),
        shift in -100.0..100.0f64,
    ) {
        let p = softmax(&logits);
        let s: f64 = p.iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_finite_on_extreme_logits(logits in prop::collection::vec(-1e300..1e300f64, 1..8)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|v| v.is_finite()));
        prop_assert_eq!(argmax(&p), argmax(&logits));
    }

    #[test]
    fn dense_layer_is_linear_before_activation(
        w in matrix(3, 4, 2.0),
        x in matrix(5, 4, 2.0),
        y in matrix(5, 4, 2.0),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let layer = DenseLayer::new(w, vec![0.0; 3], Activation::Identity).unwrap();
        let mix = x.scale(a).add(&y.scale(b)).unwrap();
        let lhs = dense_forward(&layer, &mix).unwrap();
        let rhs = dense_forward(&layer, &x).unwrap().scale(a)
            .add(&dense_forward(&layer, &y).unwrap().scale(b)).unwrap();
        for (l, r) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            prop_assert!((l - r).abs() < 1e-12, "{l} vs {r}");
        }
    }

    #[test]
    fn mlp_backward_matches_finite_differences(seed in 0u64..1000, batch in prop::sample::select(vec![1usize, 3, 17])) {
        let mut rng = stream(seed, Stream::Baseline);
        let net = MlpParams::init(4, &[5, 3], 2, Activation::Sigmoid, Activation::Identity, &mut rng);
        let x = Matrix::from_vec(batch, 4, (0..batch * 4).map(|i| ((i * 7 + seed as usize) % 11) as f64 / 5.0 - 1.0).collect()).unwrap();
        let weights = Matrix::from_vec(batch, 2, (0..batch * 2).map(|i| 1.0 - i as f64 / 10.0).collect()).unwrap();
        let loss = |n: &MlpParams| {
            let (out, _) = mlp_forward(n, &x).unwrap();
            out.as_slice().iter().zip(weights.as_slice()).map(|(o, w)| o * w).sum::<f64>()
        };
        let (_, cache) = mlp_forward(&net, &x).unwrap();
        let (grads, _) = mlp_backward(&net, &cache, &weights).unwrap();
        let mut probe = net.clone();
        let err = grad_check(|theta| { probe.set_flat(theta); loss(&probe) }, &net.flat(), &grads.flat(), 1e-5);
        prop_assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn adam_with_zero_learning_rate_is_identity(seed in 0u64..1000, g in prop::collection::vec(-10.0..10.0f64, 26)) {
        let mut rng = stream(seed, Stream::Baseline);
        let net = MlpParams::init(3, &[4], 2, Activation::Relu, Activation::Identity, &mut rng);
        let mut grads = net.zeros_like();
        grads.set_flat(&g);
        let mut stepped = net.clone();
        let mut opt = AdamState::new(net.num_params(), 0.0);
        for _ in 0..3 {
            adam_step(&mut stepped, &grads, &mut opt).unwrap();
        }
        prop_assert_eq!(stepped, net);
    }

    #[test]
    fn class_losses_finite_and_nonnegative(
        raw in prop::collection::vec(prop::sample::select(vec![0.0, 1e-300, 1e-13, 0.2, 0.5, 1.0 - 1e-13, 1.0]), 3),
        y in 0usize..3,
    ) {
        let s: f64 = raw.iter().sum();
        let row: Vec<f64> = if s > 0.0 { raw.iter().map(|v| v / s).collect() } else { vec![1.0 / 3.0; 3] };
        let probs = Matrix::from_vec(1, 3, row).unwrap();
        for kind in [ClassLoss::PerClassBce, ClassLoss::Categorical] {
            let (v, g) = class_loss_and_logit_grad(kind, &probs, &[y]).unwrap();
            prop_assert!(v.is_finite() && v >= 0.0);
            prop_assert!(g.is_finite());
        }
        prop_assert!(loss_bce_l2(&probs, &[y], 0.0, &[]).unwrap() >= 0.0);
    }

    #[test]
    fn adversarial_loss_is_nonpositive(
        dl in prop::collection::vec(0.0..=1.0f64, 1..6),
        du in prop::collection::vec(0.0..=1.0f64, 1..6),
    ) {
        let none = MlpParams::new(vec![DenseLayer::zeros(1, 1, Activation::Sigmoid)]).unwrap();
        let v = loss_adversarial(&dl, &du, 0.0, &none).unwrap();
        prop_assert!(v.is_finite() && v <= 0.0);
    }

    #[test]
    fn plain_models_emit_simplices(ds in labeled_set(30, 3, 3), probe in matrix(6, 3, 1e6)) {
        for variant in [PrmVariant::Gbdt, PrmVariant::LogisticRegression] {
            let cfg = PrmConfig {
                variant,
                gbdt: GbdtConfig { rounds: 10, ..Default::default() },
                logreg: credit_assl::prm::LogregConfig { epochs: 50, ..Default::default() },
                ..Default::default()
            };
            let model = train_prm(&ds, &cfg).unwrap();
            assert_simplex(&model.predict_proba_batch(&probe).unwrap())?;
            assert_simplex(&model.predict_proba_batch(ds.rows()).unwrap())?;
            prop_assert_eq!(&train_prm(&ds, &cfg).unwrap(), &model);
        }
    }

    #[test]
    fn pseudo_labels_are_argmax_and_pure(ds in labeled_set(25, 2, 3), pool in matrix(15, 2, 4.0)) {
        let model = train_prm(&ds, &PrmConfig { gbdt: GbdtConfig { rounds: 5, ..Default::default() }, ..Default::default() }).unwrap();
        let unlabeled = Dataset::new(ds.schema().clone(), pool, None).unwrap();
        let a = pseudo_label(&model, &unlabeled).unwrap();
        let b = pseudo_label(&model, &unlabeled).unwrap();
        prop_assert_eq!(&a, &b);
        let probs = model.predict_proba_batch(unlabeled.rows()).unwrap();
        for (r, row) in probs.iter_rows().enumerate() {
            prop_assert_eq!(a.labels()[r], argmax(row));
            prop_assert_eq!(a.confidences()[r], row.iter().cloned().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn gbdt_log_loss_never_increases(ds in labeled_set(40, 3, 3), depth in 1usize..4) {
        let model = train_gbdt(&ds, &GbdtConfig { rounds: 15, max_depth: depth, min_leaf_count: 2, ..Default::default() }).unwrap();
        prop_assert!(model.train_log_loss.windows(2).all(|w| w[1] <= w[0]), "{:?}", model.train_log_loss);
    }

    #[test]
    fn stump_matches_exhaustive_search(
        (x, t) in (2usize..=50, 1usize..=5).prop_flat_map(|(n, f)| (
            prop::collection::vec(prop::sample::select(vec![-2.0, -1.0, -0.5, 0.0, 0.25, 1.0, 3.0]), n * f)
                .prop_map(move |v| Matrix::from_vec(n, f, v).unwrap()),
            prop::collection::vec(-5.0..5.0f64, n),
        )),
    ) {
        let tree = fit_regression_tree(&x, &t, 1, 1).unwrap();
        match (tree.root_split(), stump_oracle(&x, &t)) {
            (None, None) => {}
            (Some((tf, tt)), Some((of, ot, reduction, ml, mr))) => {
                prop_assert_eq!((tf, tt), (of, ot));
                let mean = |v: f64| tree.predict(&(0..x.cols()).map(|j| if j == of { v } else { 0.0 }).collect::<Vec<_>>());
                let (pl, pr) = (mean(ot - 1e-9), mean(ot + 1e-9));
                prop_assert!((pl - ml).abs() <= 1e-9 && (pr - mr).abs() <= 1e-9);
                let sse = |pred: &dyn Fn(&[f64]) -> f64| (0..x.rows()).map(|r| (t[r] - pred(x.row(r))).powi(2)).sum::<f64>();
                let mean_t = t.iter().sum::<f64>() / t.len() as f64;
                let tree_reduction = sse(&|_| mean_t) - sse(&|row| tree.predict(row));
                prop_assert!((tree_reduction - reduction).abs() <= 1e-9 * (1.0 + reduction.abs()));
            }
            (a, b) => prop_assert!(false, "tree {a:?} vs oracle {b:?}"),
        }
    }

    #[test]
    fn report_matches_brute_force(
        counts in (2usize..=6).prop_flat_map(|m| prop::collection::vec(prop::collection::vec(0u64..=20, m), m)),
    ) {
        prop_assume!(counts.iter().flatten().any(|&c| c > 0));
        let r = classification_report(&ConfusionMatrix::from_counts(counts.clone()).unwrap()).unwrap();
        for (c, (p, rc, f1, support)) in r.per_class.iter().zip(brute_force_metrics(&counts)) {
            prop_assert_eq!((c.precision, c.recall, c.f1, c.support), (p, rc, f1, support));
            if c.precision == 0.0 || c.recall == 0.0 {
                prop_assert_eq!(c.f1, 0.0);
            }
        }
        let total: u64 = counts.iter().flatten().sum();
        let trace: u64 = (0..counts.len()).map(|k| counts[k][k]).sum();
        prop_assert_eq!(r.accuracy, trace as f64 / total as f64);
        for (_, v) in r.summary() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn macro_metrics_invariant_under_relabeling(
        counts in prop::collection::vec(prop::collection::vec(0u64..=20, 4), 4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        prop_assume!(counts.iter().flatten().any(|&c| c > 0));
        let permuted: Vec<Vec<u64>> = (0..4).map(|i| (0..4).map(|j| counts[perm[i]][perm[j]]).collect()).collect();
        let a = classification_report(&ConfusionMatrix::from_counts(counts).unwrap()).unwrap();
        let b = classification_report(&ConfusionMatrix::from_counts(permuted).unwrap()).unwrap();
        prop_assert!((a.macro_precision - b.macro_precision).abs() < 1e-12);
        prop_assert!((a.macro_recall - b.macro_recall).abs() < 1e-12);
        prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        prop_assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn stratified_split_preserves_class_counts(ds in labeled_set(60, 2, 4), seed in 0u64..100) {
        let (train, val, test) = stratified_split(&ds, SplitFractions::default(), seed).unwrap();
        let counts = ds.class_counts().unwrap();
        let parts = [train.class_counts().unwrap(), val.class_counts().unwrap(), test.class_counts().unwrap()];
        for k in 0..4 {
            prop_assert_eq!(parts.iter().map(|c| c[k]).sum::<usize>(), counts[k]);
        }
        prop_assert_eq!(train.len() + val.len() + test.len(), ds.len());
    }

    #[test]
    fn normalized_training_rows_are_centered(ds in labeled_set(20, 3, 2)) {
        let norm = Normalizer::fit(&ds).unwrap();
        let z = norm.apply(&ds).unwrap();
        for f in 0..3 {
            let col: Vec<f64> = z.rows().iter_rows().map(|r| r[f]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(col.iter().all(|v| v.is_finite()));
        }
    }
}
