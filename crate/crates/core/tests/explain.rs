mod common;

use common::{noisy_table, random_problem, separable_toy};
use leafrep::data::flip_labels;
use leafrep::explain::{
    aggregate_explanations, global_importance, local_explanation, loss_ordering, random_ordering,
    surrogate_losses, tune_teknn, Ordering, Teknn,
};
use leafrep::gbdt::{self, GbdtConfig};
use leafrep::kernel::{feature_map, transform, KernelKind};
use leafrep::stats::pearson;
use leafrep::surrogate::{fit, fit_klr, fit_svm, validation_split, Family, SolverOptions};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn position(o: &Ordering, id: u64) -> usize {
    o.ranked_row_ids.iter().position(|&r| r == id).unwrap()
}

#[test]
fn leaf_path_self_similarity_is_tree_count() {
    let data = noisy_table(120, 3, 2);
    let ens = gbdt::fit(&data, &GbdtConfig { num_trees: 15, ..Default::default() }).unwrap();
    let rep = transform(&ens, &data, KernelKind::LeafPath).unwrap();
    let yhat = ens.predict_labels(&data).unwrap();
    let m = fit_klr(&rep, &yhat, 1.0, &SolverOptions::default()).unwrap();
    for j in [0, 17, 119] {
        let e = local_explanation(&m, &ens, data.row(j), format!("q{j}")).unwrap();
        assert_eq!(e.similarities[j], ens.n_trees() as f64);
        assert!(e.similarities.iter().all(|&g| g <= ens.n_trees() as f64));
    }
}

#[test]
fn contributions_sum_to_decision() {
    for seed in 0..10 {
        let kind = KernelKind::ALL[seed as usize % 3];
        let p = random_problem(seed, kind);
        for family in [Family::Klr, Family::Svm] {
            let m = fit(&p.rep, &p.yhat, 1.0, family, &SolverOptions::default()).unwrap();
            for j in 0..p.data.n_rows() {
                let e = local_explanation(&m, &p.ensemble, p.data.row(j), "q").unwrap();
                let tol = 1e-9 * e.decision.abs().max(1.0);
                assert!((e.total_contribution() - e.decision).abs() <= tol);
                assert_eq!(e.predicted_label, p.yhat[j]);
            }
        }
    }
}

#[test]
fn aggregate_of_one_query_matches_local_ranking() {
    let p = random_problem(6, KernelKind::LeafOutput);
    let m = fit_klr(&p.rep, &p.yhat, 1.0, &SolverOptions::default()).unwrap();
    for j in 0..p.data.n_rows() {
        let q = p.data.subset(&[j]);
        let agg = aggregate_explanations(&m, &p.ensemble, &q).unwrap();
        let e = local_explanation(&m, &p.ensemble, p.data.row(j), "q").unwrap();
        let label = e.predicted_label as f64;
        let scores: Vec<f64> = e.contributions.iter().map(|c| c * label).collect();
        let direct = Ordering::from_scores("x", &e.row_ids, &scores).unwrap();
        for (a, b) in agg.scores.iter().zip(&direct.scores) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn aggregate_matches_explicit_sum_and_duplicates_do_not_reorder() {
    let data = noisy_table(200, 3, 5);
    let ens = gbdt::fit(&data, &GbdtConfig { num_trees: 20, ..Default::default() }).unwrap();
    let (train, test) = leafrep::data::split(&data, 0.25, 1).unwrap();
    let rep = transform(&ens, &train, KernelKind::LeafOutput).unwrap();
    let yhat = ens.predict_labels(&train).unwrap();
    let m = fit_klr(&rep, &yhat, 1.0, &SolverOptions::default()).unwrap();
    let queries = test.subset(&(0..test.n_rows().min(50)).collect::<Vec<_>>());

    let agg = aggregate_explanations(&m, &ens, &queries).unwrap();
    let mut explicit = vec![0.0; train.n_rows()];
    for j in 0..queries.n_rows() {
        let e = local_explanation(&m, &ens, queries.row(j), "q").unwrap();
        for (s, c) in explicit.iter_mut().zip(&e.contributions) {
            *s += c * e.predicted_label as f64;
        }
    }
    let direct = Ordering::from_scores("x", train.row_ids(), &explicit).unwrap();
    assert_eq!(agg.ranked_row_ids, direct.ranked_row_ids);
    for (a, b) in agg.scores.iter().zip(&direct.scores) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }

    let twice = leafrep::Dataset::from_flat(
        queries.rows().chain(queries.rows()).flatten().copied().collect(),
        queries.n_features(),
        queries.labels().iter().chain(queries.labels()).copied().collect(),
        queries.feature_names().to_vec(),
        (0..2 * queries.n_rows() as u64).collect(),
    )
    .unwrap();
    let agg2 = aggregate_explanations(&m, &ens, &twice).unwrap();
    assert_eq!(agg.ranked_row_ids, agg2.ranked_row_ids);

    let again = aggregate_explanations(&m, &ens, &queries).unwrap();
    assert_eq!(agg, again);
}

#[test]
fn svm_zero_weight_rows_rank_after_support_vectors() {
    let train = separable_toy(150, 3);
    let ens = gbdt::fit(
        &train,
        &GbdtConfig { num_trees: 30, learning_rate: 0.3, ..Default::default() },
    )
    .unwrap();
    let rep = transform(&ens, &train, KernelKind::LeafOutput).unwrap();
    let yhat = ens.predict_labels(&train).unwrap();
    let m = fit_svm(&rep, &yhat, 1.0, &SolverOptions::default()).unwrap();
    let o = global_importance(&m);
    let support = m.alphas().iter().filter(|&&a| a > 0.0).count();
    assert!(support < train.n_rows());
    assert!(o.scores[..support].iter().all(|&s| s > 0.0));
    assert!(o.scores[support..].iter().all(|&s| s == 0.0));
    // ties among zeros fall back to ascending row id
    let tail = &o.ranked_row_ids[support..];
    assert!(tail.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn flipped_rows_surface_early_in_loss_and_importance_orderings() {
    let clean = noisy_table(400, 3, 11);
    let (noisy, record) = flip_labels(&clean, 0.2, 4).unwrap();
    let cfg = GbdtConfig { num_trees: 30, max_depth: Some(3), ..Default::default() };
    let ens = gbdt::fit(&noisy, &cfg).unwrap();
    let mean_rank = |o: &Ordering, flipped: bool| {
        let ids: Vec<u64> = noisy
            .row_ids()
            .iter()
            .zip(&record.flipped_mask)
            .filter(|(_, &m)| m == flipped)
            .map(|(&id, _)| id)
            .collect();
        ids.iter().map(|&id| position(o, id) as f64).sum::<f64>() / ids.len() as f64
    };

    let gbdt_loss = loss_ordering("gbdt_loss", noisy.row_ids(), &ens.losses(&noisy).unwrap()).unwrap();
    assert!(mean_rank(&gbdt_loss, true) < mean_rank(&gbdt_loss, false));

    let rep = transform(&ens, &noisy, KernelKind::LeafOutput).unwrap();
    let yhat = ens.predict_labels(&noisy).unwrap();
    let m = fit_klr(&rep, &yhat, 1.0, &SolverOptions::default()).unwrap();
    let imp = global_importance(&m);
    assert!(mean_rank(&imp, true) < mean_rank(&imp, false));

    let sl = surrogate_losses(&m, &ens, &noisy).unwrap();
    let sl = loss_ordering("surrogate_loss", noisy.row_ids(), &sl).unwrap();
    assert!(mean_rank(&sl, true) < mean_rank(&sl, false));
}

#[test]
fn teknn_with_all_neighbors_approaches_global_rate() {
    let p = random_problem(14, KernelKind::LeafPath);
    let n = p.data.n_rows();
    let knn = Teknn::new(p.rep.clone(), p.yhat.clone(), n - 1).unwrap();
    let pos = p.yhat.iter().filter(|&&y| y > 0).count() as f64;
    for j in 0..n {
        let map = feature_map(&p.ensemble, p.data.row(j), KernelKind::LeafPath).unwrap();
        let pr = knn.predict_proba(&map).unwrap();
        // one row is left out of the vote
        assert!((pr - pos / n as f64).abs() <= 1.0 / (n - 1) as f64 + 1e-12);
    }
}

#[test]
fn teknn_density_scores_total_k_times_n() {
    let p = random_problem(21, KernelKind::LeafOutput);
    let n = p.data.n_rows();
    for k in [1, 2, n - 1] {
        let knn = Teknn::new(p.rep.clone(), p.yhat.clone(), k).unwrap();
        let o = knn.density_ordering().unwrap();
        assert_eq!(o.scores.iter().sum::<f64>(), (k * n) as f64);
        o.check_permutation_of(p.data.row_ids()).unwrap();
    }
}

#[test]
fn teknn_neighbors_match_brute_force() {
    let p = random_problem(8, KernelKind::LeafOutput);
    let knn = Teknn::new(p.rep.clone(), p.yhat.clone(), 3).unwrap();
    let dense: Vec<Vec<f64>> = p.rep.maps().iter().map(|m| m.to_dense()).collect();
    for (j, q) in dense.iter().enumerate() {
        let mut d: Vec<(f64, usize)> = dense
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: Vec<usize> = d.iter().map(|x| x.1).filter(|&i| i != j).take(3).collect();
        let got = knn.neighbors(&p.rep.maps()[j], Some(j)).unwrap();
        // distances must agree even where float ties reorder
        let dist = |i: usize| d.iter().find(|x| x.1 == i).unwrap().0;
        for (a, b) in got.iter().zip(&want) {
            assert!((dist(*a) - dist(*b)).abs() <= 1e-9);
        }
    }
}

#[test]
fn tuned_k_is_best_on_validation() {
    let train = noisy_table(300, 3, 31);
    let ens = gbdt::fit(&train, &GbdtConfig { num_trees: 20, ..Default::default() }).unwrap();
    let grid = [3, 5, 11, 21];
    let t = tune_teknn(&ens, &train, KernelKind::LeafOutput, &grid, 9).unwrap();
    let (fit_part, val) = validation_split(&train, 9).unwrap();
    let rep = transform(&ens, &fit_part, KernelKind::LeafOutput).unwrap();
    let yhat = ens.predict_labels(&fit_part).unwrap();
    let target = ens.predict_probas(&val).unwrap();
    let mut best = (0, f64::NEG_INFINITY);
    for &k in &grid {
        let knn = Teknn::new(rep.clone(), yhat.clone(), k).unwrap();
        let pr = knn.predict_probas(&ens, &val).unwrap();
        if let Ok(r) = pearson(&pr, &target) {
            if r > best.1 {
                best = (k, r);
            }
        }
    }
    assert_eq!(t.k, best.0);
    assert_eq!(t.model.k(), best.0);
    assert_eq!(t.model.rep().len(), train.n_rows());
}

#[test]
fn random_ordering_first_position_is_uniform() {
    let ids = [10u64, 11, 12, 13, 14];
    let mut counts = [0usize; 5];
    for seed in 0..1000 {
        let o = random_ordering(&ids, seed).unwrap();
        counts[(o.ranked_row_ids[0] - 10) as usize] += 1;
    }
    let expected = 200.0;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square p = {p}, counts {counts:?}");
}

#[test]
fn global_importance_invariant_to_symmetric_relabeling() {
    for seed in 0..5 {
        let p = random_problem(seed, KernelKind::LeafOutput);
        let neg: Vec<i8> = p.yhat.iter().map(|y| -y).collect();
        for family in [Family::Klr, Family::Svm] {
            let opts = SolverOptions::default();
            let a = fit(&p.rep, &p.yhat, 1.0, family, &opts).unwrap();
            let b = fit(&p.rep, &neg, 1.0, family, &opts).unwrap();
            for (x, y) in a.alphas().iter().zip(b.alphas()) {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}
