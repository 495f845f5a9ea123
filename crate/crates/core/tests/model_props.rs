use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shortspam::mela::MelaContext;
use shortspam::model::{
    decide, deserialize, io, predict, serialize, train, train_with_oob, CostMatrix, Dataset, Forest, ForestParams,
};
use shortspam::pipeline::{fit_domain_scorer, mela_row, prepare_all};
use shortspam::simgen::{gen_messages, GenConfig};
use shortspam::Label;

fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Label>)> {
    (1usize..5, 6usize..60).prop_flat_map(|(d, n)| {
        (
            proptest::collection::vec(proptest::collection::vec(-5i32..5, d), n),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
    .prop_map(|(rows, spam)| {
        let mut labels: Vec<Label> = spam.into_iter().map(|s| if s { Label::Spam } else { Label::Ham }).collect();
        labels[0] = Label::Ham;
        labels[1] = Label::Spam;
        let rows = rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect();
        (rows, labels)
    })
}

fn fit(rows: &[Vec<f64>], labels: &[Label], trees: usize, seed: u64) -> Forest {
    let data = Dataset::from_dense(rows, labels).unwrap();
    train(&data, &ForestParams::with_trees(trees, seed), "props/1").unwrap()
}

fn probes(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-6.0f64..6.0, d), 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_same_forest((rows, labels) in dataset(), seed in any::<u64>()) {
        let a = fit(&rows, &labels, 7, seed);
        let b = fit(&rows, &labels, 7, seed);
        prop_assert_eq!(serialize(&a), serialize(&b));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn prediction_ignores_tree_order((rows, labels) in dataset(), seed in any::<u64>(), shuffle in any::<u64>()) {
        let f = fit(&rows, &labels, 9, seed);
        let mut g = f.clone();
        g.trees.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        for r in &rows {
            prop_assert_eq!(predict(&f, r).unwrap(), predict(&g, r).unwrap());
        }
    }

    #[test]
    fn unit_costs_are_a_majority_vote((rows, labels) in dataset(), seed in any::<u64>()) {
        let f = fit(&rows, &labels, 8, seed);
        let unit = CostMatrix::new(1.0, 1.0).unwrap();
        for r in &rows {
            let spam_votes = f.trees.iter().filter(|t| t.votes_spam(r.as_slice())).count();
            let expected = if 2 * spam_votes >= f.trees.len() { Label::Spam } else { Label::Ham };
            let score = predict(&f, r).unwrap();
            prop_assert_eq!(score, spam_votes as f64 / f.trees.len() as f64);
            prop_assert_eq!(decide(score, &unit), expected);
        }
    }

    #[test]
    fn raising_the_false_positive_cost_never_creates_spam(score in 0.0f64..=1.0, cost_fn in 0.01f64..100.0, steps in proptest::collection::vec(0.0f64..50.0, 1..20)) {
        let mut cost_fp = 0.01;
        let mut prev = decide(score, &CostMatrix::new(cost_fp, cost_fn).unwrap());
        for s in steps {
            cost_fp += s;
            let now = decide(score, &CostMatrix::new(cost_fp, cost_fn).unwrap());
            prop_assert!(!(prev == Label::Ham && now == Label::Spam));
            prev = now;
        }
    }

    #[test]
    fn persistence_round_trip((rows, labels) in dataset(), seed in any::<u64>(), xs in probes(4)) {
        let d = rows[0].len();
        let f = fit(&rows, &labels, 6, seed);
        let bin = deserialize(&serialize(&f)).unwrap();
        let txt = io::from_text(&io::to_text(&f)).unwrap();
        for x in xs.iter().map(|x| &x[..d]).chain(rows.iter().map(Vec::as_slice)) {
            let p = predict(&f, x).unwrap();
            prop_assert_eq!(p, predict(&bin, x).unwrap());
            prop_assert_eq!(p, predict(&txt, x).unwrap());
        }
    }

    #[test]
    fn scores_are_vote_fractions((rows, labels) in dataset(), x in proptest::collection::vec(-6.0f64..6.0, 4)) {
        let f = fit(&rows, &labels, 5, 1);
        let d = rows[0].len();
        let p = predict(&f, &x[..d]).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert_eq!((p * 5.0).round() / 5.0, p);
    }
}

#[test]
fn corrupt_payloads_are_rejected() {
    assert!(deserialize(&[]).is_err());
    let f = fit(&[vec![0.0], vec![1.0]], &[Label::Ham, Label::Spam], 3, 0);
    let bytes = serialize(&f);
    assert!(deserialize(&bytes[..bytes.len() / 2]).is_err());
    let mut wrong = f.clone();
    wrong.schema_version = "other/9".into();
    assert!(deserialize(&serialize(&wrong)).unwrap().check_schema("props/1").is_err());
}

#[test]
fn xor_is_shattered() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 2) as f64, ((i / 2) % 2) as f64]).collect();
    let labels: Vec<Label> = rows.iter().map(|r| if r[0] != r[1] { Label::Spam } else { Label::Ham }).collect();
    let f = fit(&rows, &labels, 100, 4);
    for (r, l) in rows.iter().zip(&labels) {
        assert_eq!(decide(predict(&f, r).unwrap(), &CostMatrix::default()), *l);
    }
}

#[test]
fn oob_accuracy_does_not_fall_with_more_trees() {
    let ctx = MelaContext::bundled();
    let g = gen_messages(&GenConfig::bundled(21, 900, 2100)).unwrap();
    let prepared = prepare_all(&ctx, &g.messages, true);
    let domains = fit_domain_scorer(
        &ctx,
        prepared.iter().map(|p| &p.ents).zip(g.labels.iter().copied()),
        &ForestParams::with_trees(100, 42),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = g
        .messages
        .iter()
        .zip(&prepared)
        .zip(&g.labels)
        .map(|((m, p), l)| mela_row(&ctx, m, p, &domains, Some(*l)).unwrap())
        .collect();
    let data = Dataset::from_dense(&rows, &g.labels).unwrap();
    let acc: Vec<f64> = [10, 100, 500]
        .iter()
        .map(|&n| train_with_oob(&data, &ForestParams::with_trees(n, 42), "mela-message/1").unwrap().0.oob_accuracy)
        .collect();
    assert!(acc[1] >= acc[0] - 0.005, "{acc:?}");
    assert!(acc[2] >= acc[1] - 0.005, "{acc:?}");
}
