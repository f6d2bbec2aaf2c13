use dictmatch::bundle::{directory_digest, load_library, save_library};
use dictmatch::metrics::{default_delta, dissimilarity_index};
use dictmatch::pipeline::{
    build_library, identify_clusters, match_datum, BuildConfig, IdentifyConfig, MatchConfig,
};
use dictmatch::synth::{
    generate_clustered_dictionary, generate_mixtures, ClusteredSpec, MixtureSpec,
};
use dictmatch::Dictionary;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec() -> ClusteredSpec {
    ClusteredSpec {
        atoms_per_cluster: 40,
        ..Default::default()
    }
}

/// The same dictionary with its columns shuffled, so stored and original
/// orders differ.
fn shuffled(d: &Dictionary, seed: u64) -> (Dictionary, Vec<usize>) {
    let p = d.n_atoms();
    let mut order: Vec<usize> = (0..p).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..p).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let atoms = DMatrix::from_fn(d.n_rows(), p, |r, c| d.atoms()[(r, order[c])]);
    let labels = order.iter().map(|&j| d.labels().unwrap()[j]).collect();
    (Dictionary::with_labels(atoms, labels).unwrap(), order)
}

#[test]
fn saved_library_matches_identically() {
    let (d, _) = shuffled(&generate_clustered_dictionary(&spec()).unwrap(), 4);
    let lib = build_library(&d, &BuildConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_library(&lib, dir.path()).unwrap();
    let loaded = load_library(dir.path()).unwrap();
    let b = d.atoms().column(7) * 1.3 + d.atoms().column(100) * 0.6;
    let cfg = MatchConfig::default();
    assert_eq!(
        match_datum(&lib, &b, &cfg).unwrap(),
        match_datum(&loaded, &b, &cfg).unwrap()
    );

    let again = tempfile::tempdir().unwrap();
    save_library(
        &build_library(&d, &BuildConfig::default()).unwrap(),
        again.path(),
    )
    .unwrap();
    assert_eq!(
        directory_digest(dir.path()).unwrap(),
        directory_digest(again.path()).unwrap()
    );
}

#[test]
fn within_sample_atoms_recovered_in_original_order() {
    let base = generate_clustered_dictionary(&spec()).unwrap();
    let (d, order) = shuffled(&base, 9);
    let lib = build_library(&d, &BuildConfig::default()).unwrap();
    let batch = generate_mixtures(
        &base,
        &MixtureSpec {
            n_mixtures: 40,
            ..Default::default()
        },
    )
    .unwrap();
    let mut exact = 0;
    for i in 0..40 {
        let b = batch.data.column(i).into_owned();
        // ground truth in the shuffled dictionary's column order
        let x = DVector::from_fn(d.n_atoms(), |c, _| batch.coefficients[(order[c], i)]);
        let r = match_datum(&lib, &b, &MatchConfig::default()).unwrap();
        let x_hat = lib.to_original_order(&r.coefficients);
        if dissimilarity_index(&x, &x_hat, default_delta(&x)).unwrap() == 0 {
            exact += 1;
        }
        let json = r.to_json(&lib);
        let labels: Vec<u64> = json["selected_clusters"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .collect();
        assert!(labels.iter().all(|&l| (1..=4).contains(&l)));
    }
    assert!(exact >= 36, "{exact}/40 exact");
}

#[test]
fn mixture_of_first_and_third_cluster_selects_both() {
    let d = generate_clustered_dictionary(&spec()).unwrap();
    let lib = build_library(&d, &BuildConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut hits = 0;
    for _ in 0..100 {
        let i = rng.gen_range(0..40);
        let j = rng.gen_range(80..120);
        let b = d.atoms().column(i) * rng.gen_range(0.5..1.5)
            + d.atoms().column(j) * rng.gen_range(0.5..1.5);
        let id = identify_clusters(&lib, &b, &IdentifyConfig::default()).unwrap();
        if id.selected.contains(&0) && id.selected.contains(&2) {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/100");
}

#[test]
fn zero_datum_selects_nothing_under_trace_rule() {
    let d = generate_clustered_dictionary(&spec()).unwrap();
    let lib = build_library(&d, &BuildConfig::default()).unwrap();
    let cfg = IdentifyConfig {
        relevance: dictmatch::pipeline::Relevance::Trace,
        ..Default::default()
    };
    let id = identify_clusters(&lib, &DVector::zeros(lib.dim()), &cfg).unwrap();
    assert!(id.selected.is_empty());
}
