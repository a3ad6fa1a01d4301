mod common;

use std::collections::BTreeMap;

use hashrag::codes::CodeMatrix;
use hashrag::eval::{
    recall_at_k, run_eval, run_exact, synth_corpus, EvalConfig, LshHasher, QrelSet, Strategy,
};
use hashrag::trainer::{code_objective, h_step, pairwise_loss, train, TrainConfig};
use hashrag::{HammingIndex, QueryCode};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

#[test]
fn loss_matches_plain_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let (m, n, l) = (rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=10));
        let inst = random_instance(&mut rng, m, n, l);
        let h = random_signs(&mut rng, n, l);
        let fast = pairwise_loss(inst.relaxed.view(), h.view(), inst.s.view(), &inst.omega, inst.gamma).unwrap();
        let slow = naive_loss(&inst.relaxed, &h, &inst.s, &inst.omega, inst.gamma);
        assert!((fast - slow).abs() <= 1e-9 * slow.abs().max(1.0), "{fast} vs {slow}");
    }
}

#[test]
fn code_objective_differs_from_loss_by_a_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let (m, n, l) = (rng.random_range(1..=5), rng.random_range(1..=5), rng.random_range(1..=8));
        let inst = random_instance(&mut rng, m, n, l);
        let gap = |h: &Array2<f64>| {
            naive_loss(&inst.relaxed, h, &inst.s, &inst.omega, inst.gamma)
                - code_objective(inst.relaxed.view(), h.view(), inst.s.view(), &inst.omega, inst.gamma).unwrap()
        };
        let (a, b) = (random_signs(&mut rng, n, l), random_signs(&mut rng, n, l));
        assert!((gap(&a) - gap(&b)).abs() < 1e-8);
    }
}

#[test]
fn one_sweep_never_beats_brute_force_and_never_rises() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (m, n, l) = (rng.random_range(1..=4), rng.random_range(1..=3), rng.random_range(1..=4));
        let inst = random_instance(&mut rng, m, n, l);
        let start = random_signs(&mut rng, n, l);
        let codes = CodeMatrix::from_rows(
            &start.outer_iter().map(|r| r.iter().map(|&x| x as i8).collect()).collect::<Vec<_>>(),
        )
        .unwrap();
        let next = h_step(inst.relaxed.view(), inst.s.view(), &codes, &inst.omega, inst.gamma).unwrap();
        let next = Array2::from_shape_fn((n, l), |(j, k)| f64::from(next.get(j, k)));
        let best = inst.brute_force_min();
        assert!(inst.objective(&next) >= best - 1e-9);
        assert!(inst.objective(&next) <= inst.objective(&start) + 1e-9);
    }
}

#[test]
fn two_clusters_train_to_tighter_within_cluster_codes() {
    let data = synth_corpus(2, 40, 16, 0.2, 4).unwrap();
    let props = data.proposition_embeddings().unwrap();
    let cfg = TrainConfig {
        bits: 64,
        epochs: 10,
        batch_size: 16,
        learning_rate: 0.1,
        seed: 4,
        ..TrainConfig::default()
    };
    // Self-match mode over propositions only.
    let trained = train(&data.corpus, &props, None, &cfg).unwrap();
    let (mut within, mut across) = ((0.0, 0usize), (0.0, 0usize));
    for a in 0..props.len() {
        for b in a + 1..props.len() {
            let d = naive_hamming(trained.codes.row(a), trained.codes.row(b)) as f64;
            let slot = if data.labels[a] == data.labels[b] { &mut within } else { &mut across };
            slot.0 += d;
            slot.1 += 1;
        }
    }
    let (w, c) = (within.0 / within.1 as f64, across.0 / across.1 as f64);
    assert!(w < c, "within {w} vs across {c}");
}

#[test]
fn exact_scan_is_perfect_on_low_noise_clusters() {
    let data = synth_corpus(8, 125, 64, 0.05, 6).unwrap();
    let props = data.proposition_embeddings().unwrap();
    let cfg = EvalConfig {
        j_props: 125,
        ks: vec![1, 10, 125],
        ..EvalConfig::default()
    };
    let report = run_exact(&props, &data.query_vectors().unwrap(), &data.corpus, &data.qrels, &cfg).unwrap();
    assert_eq!(report.recall_props.as_ref().unwrap()[&125], 1.0);
    assert_eq!(report.recall_docs[&1], 1.0);
    // Every query's top-125 is exactly its cluster.
    assert!((report.map_props.unwrap() - 1.0).abs() < 1e-12);
}

fn lsh_setup(seed: u64) -> (hashrag::eval::SynthData, LshHasher, HammingIndex) {
    let data = synth_corpus(8, 125, 64, 0.1, seed).unwrap();
    let props = data.proposition_embeddings().unwrap();
    let hasher = LshHasher::new(64, 64, seed).unwrap();
    let codes = hasher.codes((0..props.len()).map(|i| props.row(i))).unwrap();
    let index = HammingIndex::build(&codes, props.ids().to_vec()).unwrap();
    (data, hasher, index)
}

#[test]
fn hash_recall_stays_within_oracle() {
    let (data, hasher, index) = lsh_setup(7);
    let cfg = EvalConfig {
        alpha: 100,
        j_props: 20,
        ks: vec![1, 5, 10, 20],
        ..EvalConfig::default()
    };
    let queries = data.query_vectors().unwrap();
    let hashed = run_eval("lsh", &index, &hasher, &queries, &data.corpus, &data.qrels, &cfg).unwrap();
    let exact = run_exact(&data.proposition_embeddings().unwrap(), &queries, &data.corpus, &data.qrels, &cfg).unwrap();
    for k in [1, 5, 10, 20] {
        assert!(hashed.recall(k).unwrap() <= exact.recall(k).unwrap() + 1e-12);
    }
}

#[test]
fn full_scan_and_truncated_expansion_give_equal_recall() {
    let (data, hasher, index) = lsh_setup(8);
    let queries = data.query_vectors().unwrap();
    let j = 10;
    let by_scan = run_eval(
        "scan",
        &index,
        &hasher,
        &queries,
        &data.corpus,
        &data.qrels,
        &EvalConfig {
            j_props: j,
            ks: vec![1, 5, 10],
            strategy: Strategy::HammingScan,
            ..EvalConfig::default()
        },
    )
    .unwrap();
    let mut per_k: BTreeMap<usize, f64> = BTreeMap::new();
    for (qid, v) in &queries {
        let q = QueryCode::from_real(&hasher.project(v).unwrap());
        let mut c = index.radius_expand(&q, j).unwrap();
        c.candidates.truncate(j);
        let props: Vec<&str> = c.candidates.iter().map(|c| index.prop_id(c.row)).collect();
        let rel = &data.qrels.get(qid).unwrap().relevant_props;
        for k in [1, 5, 10] {
            *per_k.entry(k).or_default() += recall_at_k(&props, rel, k) / queries.len() as f64;
        }
    }
    for (k, r) in per_k {
        assert!((by_scan.recall(k).unwrap() - r).abs() < 1e-12, "k = {k}");
    }
}

#[test]
fn index_bytes_match_file_payload() {
    let (_, _, index) = lsh_setup(9);
    let ids: usize = index.prop_ids().iter().map(|id| 2 + id.len()).sum();
    assert_eq!(index.index_bytes(), 1000 * 64 / 8 + ids);
    // Header: magic, n, l.
    assert_eq!(index.to_bytes().unwrap().len(), 12 + index.index_bytes());
}

#[test]
fn empty_query_set_is_an_error() {
    let (data, hasher, index) = lsh_setup(10);
    let err = run_eval("lsh", &index, &hasher, &[], &data.corpus, &data.qrels, &EvalConfig::default()).unwrap_err();
    assert!(matches!(err, hashrag::Error::EmptyRetrieval(_)));
    assert!(QrelSet::new([]).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recall_is_monotone_in_k(ranked in proptest::collection::vec(0u8..20, 0..30), rel in proptest::collection::btree_set(0u8..20, 1..5)) {
        let ranked: Vec<String> = ranked.iter().map(|x| x.to_string()).collect();
        let rel = rel.iter().map(|x| x.to_string()).collect();
        let mut last = 0.0;
        for k in 1..=31 {
            let r = recall_at_k(&ranked, &rel, k);
            prop_assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn map_is_one_for_prefix_rankings(rel in 1usize..8, tail in 0usize..8) {
        let ranked: Vec<String> = (0..rel + tail).map(|i| format!("d{i}")).collect();
        let relevant = (0..rel).map(|i| format!("d{i}")).collect();
        prop_assert!((hashrag::eval::average_precision(&ranked, &relevant) - 1.0).abs() < 1e-12);
    }
}
