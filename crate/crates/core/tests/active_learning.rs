use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use sda2e_core::active::{
    build_ranking, replay, run_session, select_candidates, strategy1_expand, strategy2_prioritize, Journal,
    JournalEntry, LabeledSets, Phase, SessionConfig, Session, SimulatedOracle, Strategy,
};
use sda2e_core::data::{generate_synthetic, BinaryDataset, Label, LabelMap, SyntheticSpec};
use sda2e_core::eval::RelevanceLabels;
use sda2e_core::rng::child_rng;
use sda2e_core::sda2e::Sda2eConfig;
use sda2e_core::simsearch::{percentile_threshold, sim_metric, BitVector, SimilarityMetric};
use sda2e_core::Error;

fn small() -> (Arc<BinaryDataset>, LabelMap) {
    let (ds, labels) = generate_synthetic(&SyntheticSpec {
        n: 120,
        d: 16,
        anomaly_fraction: 0.05,
        seed: 5,
        ..SyntheticSpec::default()
    })
    .unwrap();
    (Arc::new(ds), labels)
}

fn model_cfg(d: usize) -> Sda2eConfig {
    let mut cfg = Sda2eConfig::for_dimension(d);
    cfg.epochs = 4;
    cfg
}

fn session_cfg(strategy: Strategy, iterations: usize) -> SessionConfig {
    SessionConfig {
        strategy,
        iterations,
        budget: 5,
        ..SessionConfig::default()
    }
}

fn run(ds: &Arc<BinaryDataset>, labels: &LabelMap, cfg: SessionConfig) -> Session {
    let mut oracle = SimulatedOracle::new(labels.clone());
    run_session(
        ds.clone(),
        &mut oracle,
        Some(RelevanceLabels::from_labels(labels)),
        cfg,
        model_cfg(ds.d()),
        Journal::in_memory(),
    )
    .unwrap()
    .session
}

fn random_rows(n: usize, d: usize, seed: u64) -> Vec<BitVector> {
    let mut rng = child_rng(seed, 0);
    (0..n)
        .map(|_| BitVector::from_bools(&(0..d).map(|_| rng.gen_bool(0.3)).collect::<Vec<_>>()))
        .collect()
}

#[test]
fn candidate_selection_matches_brute_force() {
    let mut rng = child_rng(100, 0);
    let scores: Vec<f64> = (0..100).map(|_| (rng.gen_range(0..40) as f64) / 4.0).collect();
    let mut sets = LabeledSets::new(100);
    for i in (0..100).step_by(7) {
        sets.record(i, Label::Normal).unwrap();
    }
    for (p, q) in [(80.0, 10), (50.0, 3), (95.0, 100), (1.0, 1)] {
        let sel = select_candidates(&scores, &sets, p, q).unwrap().unwrap();
        let mut pool: Vec<f64> = (0..100).filter(|i| i % 7 != 0).map(|i| scores[i]).collect();
        pool.sort_by(f64::total_cmp);
        let tau = pool[((p / 100.0 * pool.len() as f64).ceil() as usize).max(1) - 1];
        assert_eq!(sel.tau, tau);
        let mut want: Vec<usize> = (0..100).filter(|&i| i % 7 != 0 && scores[i] > tau).collect();
        want.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        want.truncate(q);
        assert_eq!(sel.candidates, want);
    }
}

fn brute_neighbours(anchors: &[usize], pool: &[usize], rows: &[BitVector], p: f64) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &a in anchors {
        let sims: Vec<f64> = pool
            .iter()
            .map(|&x| sim_metric(&rows[x], &rows[a], SimilarityMetric::Nm1).unwrap())
            .collect();
        let t = percentile_threshold(&sims, p).unwrap();
        out.extend(pool.iter().zip(&sims).filter(|(_, &s)| s >= t).map(|(&x, _)| x));
    }
    out
}

#[test]
fn expansion_is_union_of_anchor_neighbourhoods() {
    let rows = random_rows(300, 40, 3);
    let normals = [0, 10, 20, 30, 40];
    let unlabeled: Vec<usize> = (50..300).collect();
    let e = strategy1_expand(&normals, &unlabeled, &rows, SimilarityMetric::Nm1, 80.0).unwrap();
    assert_eq!(e.rows.iter().copied().collect::<BTreeSet<_>>(), brute_neighbours(&normals, &unlabeled, &rows, 80.0));
    assert_eq!(e.thresholds.len(), 5);
    assert!(e.rows.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn prioritization_matches_brute_force() {
    let rows = random_rows(200, 30, 4);
    let mut rng = child_rng(4, 1);
    let scores: Vec<f64> = (0..200).map(|_| rng.gen()).collect();
    let anomalies = [3, 17, 99];
    let unlabeled: Vec<usize> = (100..200).collect();
    let p = strategy2_prioritize(&anomalies, &unlabeled, &rows, SimilarityMetric::Nm1, 80.0, &scores).unwrap();
    let desc = |v: &mut Vec<usize>| v.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut head = anomalies.to_vec();
    desc(&mut head);
    let mut tail: Vec<usize> = brute_neighbours(&anomalies, &unlabeled, &rows, 80.0).into_iter().collect();
    desc(&mut tail);
    head.extend(tail);
    assert_eq!(p.rows, head);
}

#[test]
fn ranking_places_priority_block_first() {
    let scores = [0.1, 0.9, 0.5, 0.7, 0.3, 0.2];
    let r = build_ranking(Strategy::S2, &scores, &[4, 0, 5]);
    assert_eq!(r, vec![4, 0, 5, 1, 3, 2]);
    assert_eq!(build_ranking(Strategy::S1, &scores, &[4, 0, 5]), vec![1, 3, 2, 4, 5, 0]);
    assert_eq!(build_ranking(Strategy::Hybrid, &scores, &[]), vec![1, 3, 2, 4, 5, 0]);
}

#[test]
fn single_iteration_passive_session() {
    let (ds, labels) = small();
    let s = run(&ds, &labels, session_cfg(Strategy::Passive, 1));
    assert_eq!(s.records().len(), 2);
    assert!(s.is_complete());
    assert_eq!(s.records()[0].ndcg, s.records()[1].ndcg);
}

#[test]
fn session_invariants_hold_for_every_strategy() {
    let (ds, labels) = small();
    for strategy in Strategy::ALL {
        let s = run(&ds, &labels, session_cfg(strategy, 4));
        assert_eq!(s.phase(), Phase::Complete);
        assert!(s.records().len() <= 5);
        let mut seen = BTreeSet::new();
        for rec in s.records() {
            assert!(rec.queried.len() <= 5);
            for q in &rec.queried {
                assert!(seen.insert(q.row), "row {} queried twice", q.row);
                assert_eq!(q.label, labels.get(q.row));
            }
            let v = rec.ndcg.unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        let mut sorted = s.ranking().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..ds.len()).collect::<Vec<_>>());
        if strategy.prioritizes() {
            // Confirmed anomalies lead the ranking.
            let found = s.sets().anomalies();
            let mut head = s.ranking()[..found.len()].to_vec();
            head.sort_unstable();
            assert_eq!(head, found);
        }
        if strategy == Strategy::Passive {
            let first = s.records()[0].ranking_digest.clone();
            assert!(s.records().iter().all(|r| r.ranking_digest == first));
        }
    }
}

#[test]
fn all_normal_oracle_leaves_score_order() {
    let (ds, labels) = small();
    let normal = LabelMap::new(vec![Label::Normal; ds.len()]);
    let mut oracle = SimulatedOracle::new(normal);
    let out = run_session(
        ds.clone(),
        &mut oracle,
        Some(RelevanceLabels::from_labels(&labels)),
        session_cfg(Strategy::S2, 2),
        model_cfg(ds.d()),
        Journal::in_memory(),
    )
    .unwrap();
    let s = out.session;
    let scores = s.scores();
    assert!(s.ranking().windows(2).all(|w| scores[w[0]] >= scores[w[1]]));
    assert!(s.records().iter().all(|r| r.priority.is_empty()));
}

#[test]
fn sessions_are_deterministic() {
    let (ds, labels) = small();
    let a = run(&ds, &labels, session_cfg(Strategy::Hybrid, 3));
    let b = run(&ds, &labels, session_cfg(Strategy::Hybrid, 3));
    assert_eq!(a.records(), b.records());
    assert_eq!(a.report("x").body_json(), b.report("x").body_json());
}

#[test]
fn zero_anomaly_ground_truth_is_rejected() {
    let (ds, _) = small();
    let err = Session::start(
        ds.clone(),
        Some(RelevanceLabels::new(vec![false; ds.len()])),
        session_cfg(Strategy::S1, 2),
        model_cfg(ds.d()),
        Journal::in_memory(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::UndefinedMetric(_)));
}

#[test]
fn journal_replay_reproduces_session() {
    let (ds, labels) = small();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.jsonl");
    let mut oracle = SimulatedOracle::new(labels.clone());
    let rel = RelevanceLabels::from_labels(&labels);
    let out = run_session(
        ds.clone(),
        &mut oracle,
        Some(rel.clone()),
        session_cfg(Strategy::Hybrid, 3),
        model_cfg(ds.d()),
        Journal::create(&path).unwrap(),
    )
    .unwrap();
    let entries = Journal::load(&path).unwrap();
    assert_eq!(entries.len(), out.session.journal().entries().len());
    let again = replay(&entries, ds.clone(), Some(rel.clone()), Journal::in_memory()).unwrap();
    assert_eq!(again.records(), out.session.records());
    assert_eq!(again.ranking(), out.session.ranking());

    // Cut after the first label of iteration 1: the session resumes awaiting the rest.
    let cut = entries
        .iter()
        .position(|e| matches!(e, JournalEntry::Label { iteration: 1, .. }))
        .unwrap();
    let partial = replay(&entries[..=cut], ds.clone(), Some(rel.clone()), Journal::in_memory()).unwrap();
    assert_eq!(partial.phase(), Phase::AwaitingLabels);
    assert_eq!(partial.pending().len() + 1, out.session.records()[1].queried.len());
    let mut resumed = partial;
    let mut oracle = SimulatedOracle::new(labels.clone());
    while resumed.phase() == Phase::AwaitingLabels {
        for row in resumed.pending() {
            use sda2e_core::active::Oracle;
            resumed.submit(row, oracle.label(row).unwrap()).unwrap();
        }
        resumed.advance().unwrap();
    }
    assert_eq!(resumed.records(), out.session.records());

    // A tampered record is detected.
    let mut bad = entries.clone();
    if let Some(JournalEntry::Iteration { record }) = bad.iter_mut().find(|e| matches!(e, JournalEntry::Iteration { .. })) {
        record.pool_size += 1;
    }
    assert!(replay(&bad, ds.clone(), Some(rel), Journal::in_memory()).is_err());
}
