use aaerec::corpus::{generate_synthetic, prune, time_split, to_matrix, SynthMode, SynthParams, SYNTH_SPLIT_YEAR};
use aaerec::eval::{corrupt, mrr, CorruptedTestSet};
use aaerec::recommenders::{ae_fit, fit_model, Checkpoint, FitInput, Model, PredictInput, TrainConfig};
use aaerec::textfeat::{EmbeddingTable, TitleFeaturizer};
use aaerec::{DenseMatrix, Error, ModelKind, Modality, Recommender, SparseBinaryMatrix, TitleFeatures};

struct Fixture {
    x_train: SparseBinaryMatrix,
    titles_train: TitleFeatures,
    titles_test: TitleFeatures,
    corrupted: CorruptedTestSet,
}

fn fixture() -> Fixture {
    let files = generate_synthetic(&SynthParams {
        mode: SynthMode::Relatedness,
        n_clusters: 4,
        docs_per_cluster: 25,
        items_per_cluster: 8,
        items_per_doc: 3,
        seed: 5,
    })
    .unwrap();
    let corpus = files.to_corpus().unwrap();
    let split = time_split(&corpus, SYNTH_SPLIT_YEAR).unwrap();
    let (pruned, _, _) = prune(&split, 2).unwrap();
    let featurizer = TitleFeaturizer::fit(&pruned.train.titles(), EmbeddingTable::hashed(16, 1));
    Fixture {
        x_train: to_matrix(&pruned.train),
        titles_train: featurizer.transform(&pruned.train.titles()),
        titles_test: featurizer.transform(&pruned.test.titles()),
        corrupted: corrupt(&to_matrix(&pruned.test), 3).unwrap(),
    }
}

fn cfg() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        hidden: 24,
        code_dim: 8,
        svd_rank: 6,
        seed: 2,
        ..Default::default()
    }
}

fn cells() -> Vec<(ModelKind, Modality)> {
    let mut out = Vec::new();
    for kind in ModelKind::ALL {
        for modality in [Modality::Items, Modality::Titles, Modality::Both] {
            if kind.supports(modality) {
                out.push((kind, modality));
            }
        }
    }
    out
}

fn fit(f: &Fixture, kind: ModelKind, modality: Modality) -> Model {
    let input = FitInput {
        x_train: &f.x_train,
        titles_train: modality.uses_titles().then_some(&f.titles_train),
    };
    fit_model(kind, modality, &input, &cfg()).unwrap()
}

fn predict(f: &Fixture, model: &Model, modality: Modality) -> DenseMatrix {
    model
        .predict(&PredictInput {
            x_corrupted: &f.corrupted.x_corrupted,
            titles_test: modality.uses_titles().then_some(&f.titles_test),
        })
        .unwrap()
}

#[test]
fn every_model_scores_every_test_row() {
    let f = fixture();
    for (kind, modality) in cells() {
        let model = fit(&f, kind, modality);
        assert_eq!(model.kind(), kind);
        let s = predict(&f, &model, modality);
        assert_eq!(s.shape(), (f.corrupted.omitted.len(), f.x_train.n_cols()), "{kind}/{modality}");
        assert!(s.is_finite(), "{kind}/{modality}");
        if matches!(kind, ModelKind::Mlp | ModelKind::Ae | ModelKind::Aae) {
            assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)), "{kind}/{modality}");
        }
        let m = mrr(&s, &f.corrupted).unwrap();
        assert!(m > 0.0 && m <= 1.0);
    }
}

#[test]
fn fitting_twice_gives_identical_models() {
    let f = fixture();
    for (kind, modality) in cells() {
        assert_eq!(fit(&f, kind, modality), fit(&f, kind, modality), "{kind}/{modality}");
    }
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for (kind, modality) in cells() {
        let model = fit(&f, kind, modality);
        let before = predict(&f, &model, modality);
        let path = dir.path().join(format!("{kind}-{modality}.json"));
        Checkpoint::new(model.clone(), modality, cfg()).save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.model, model, "{kind}/{modality}");
        assert_eq!(loaded.config, cfg());
        let after = predict(&f, &loaded.model, modality);
        let same = before
            .values()
            .iter()
            .zip(after.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "{kind}/{modality}");
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    assert!(matches!(Checkpoint::from_json("{}"), Err(Error::Checkpoint(_))));
    let f = fixture();
    let ck = Checkpoint::new(fit(&f, ModelKind::Cooc, Modality::Items), Modality::Items, cfg());
    let json = ck.to_json().unwrap().replace("aaerec-checkpoint/1", "other/9");
    assert!(matches!(Checkpoint::from_json(&json), Err(Error::Checkpoint(_))));
}

#[test]
fn full_rank_svd_ranks_like_the_corrupted_rows() {
    let f = fixture();
    let full = f.x_train.n_rows().min(f.x_train.n_cols());
    let cfg = TrainConfig { svd_rank: full, ..cfg() };
    let input = FitInput { x_train: &f.x_train, titles_train: None };
    let model = fit_model(ModelKind::Svd, Modality::Items, &input, &cfg).unwrap();
    let svd = mrr(&predict(&f, &model, Modality::Items), &f.corrupted).unwrap();
    let plain = mrr(&f.corrupted.x_corrupted.to_dense(), &f.corrupted).unwrap();
    assert!((svd - plain).abs() < 1e-6, "{svd} vs {plain}");
}

#[test]
fn modality_mismatch_is_an_error() {
    let f = fixture();
    let both = fit(&f, ModelKind::Aae, Modality::Both);
    let no_titles = PredictInput { x_corrupted: &f.corrupted.x_corrupted, titles_test: None };
    assert!(matches!(both.predict(&no_titles), Err(Error::ModelMismatch(_))));
    let items = fit(&f, ModelKind::Ae, Modality::Items);
    let with_titles = PredictInput {
        x_corrupted: &f.corrupted.x_corrupted,
        titles_test: Some(&f.titles_test),
    };
    assert!(matches!(items.predict(&with_titles), Err(Error::ModelMismatch(_))));
    let input = FitInput { x_train: &f.x_train, titles_train: Some(&f.titles_train) };
    assert!(fit_model(ModelKind::Mlp, Modality::Items, &input, &cfg()).is_err());
}

#[test]
fn non_finite_titles_report_the_diverging_phase() {
    let f = fixture();
    let mut titles = f.titles_train.embedded.clone();
    titles.values_mut()[0] = f64::NAN;
    let err = ae_fit(&f.x_train, Some(&titles), &cfg()).unwrap_err();
    assert!(
        matches!(err, Error::Divergence { phase: "reconstruction", .. }),
        "{err}"
    );
}
