use iseel::bank::{build_bank, encode_bank, load_bank, retrieve_top_n, save_bank, BankConfig, SceneBank};
use iseel::corpus::CorpusItem;
use iseel::elm::ElmConfig;
use iseel::features::{DescriptorWeights, FeatureSource};
use iseel::fixation::FixationSet;
use iseel::synth::{generate, SynthConfig};

fn corpus(train: usize, seed: u64) -> Vec<CorpusItem> {
    generate(&SynthConfig {
        train,
        test: 0,
        seed,
        ..Default::default()
    })
    .unwrap()
    .train_items()
}

#[test]
fn single_image_gives_single_entry() {
    let (bank, summary) = build_bank(&corpus(1, 1), &BankConfig::default()).unwrap();
    assert_eq!(bank.len(), 1);
    assert_eq!(summary.entries, 1);
    assert_eq!(bank.hidden(), 20);
}

#[test]
fn same_corpus_and_seed_serialize_identically() {
    let items = corpus(6, 2);
    let cfg = BankConfig {
        elm: ElmConfig {
            seed: 99,
            ..Default::default()
        },
        ..Default::default()
    };
    let a = encode_bank(&build_bank(&items, &cfg).unwrap().0).unwrap();
    let b = encode_bank(&build_bank(&items, &cfg).unwrap().0).unwrap();
    assert_eq!(a, b);
    let other = BankConfig {
        elm: ElmConfig {
            seed: 100,
            ..Default::default()
        },
        ..Default::default()
    };
    assert_ne!(a, encode_bank(&build_bank(&items, &other).unwrap().0).unwrap());
}

#[test]
fn every_unit_beats_the_constant_predictor() {
    let (bank, summary) = build_bank(&corpus(20, 3), &BankConfig::default()).unwrap();
    assert_eq!(bank.len(), 20);
    for r in &summary.residuals {
        assert!(r.unit_rms < r.constant_rms, "{}: {} vs {}", r.id, r.unit_rms, r.constant_rms);
    }
}

#[test]
fn corpus_order_does_not_matter() {
    let items = corpus(7, 4);
    let mut reversed = items.clone();
    reversed.reverse();
    let a = encode_bank(&build_bank(&items, &BankConfig::default()).unwrap().0).unwrap();
    let b = encode_bank(&build_bank(&reversed, &BankConfig::default()).unwrap().0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn images_without_fixations_are_skipped() {
    let mut items = corpus(4, 5);
    let blank = &items[1];
    let empty = FixationSet::new(blank.id.clone(), blank.image.width(), blank.image.height(), vec![]).unwrap();
    items[1].fixations = empty;
    let (bank, summary) = build_bank(&items, &BankConfig::default()).unwrap();
    assert_eq!(bank.len(), 3);
    assert_eq!(summary.skipped, vec![items[1].id.clone()]);
    assert!(bank.get(&items[1].id).is_none());
}

#[test]
fn stored_descriptor_retrieves_its_own_entry() {
    let (bank, _) = build_bank(&corpus(8, 6), &BankConfig::default()).unwrap();
    for entry in bank.entries() {
        let hits = retrieve_top_n(&bank, &entry.combined, 1).unwrap();
        assert_eq!(hits[0].entry.id, entry.id);
        assert_eq!(hits[0].distance, 0.0);
        let all = retrieve_top_n(&bank, &entry.combined, 100).unwrap();
        assert_eq!(all.len(), bank.len());
        assert!(all.windows(2).all(|w| w[0].distance <= w[1].distance));
    }
}

#[test]
fn retrieval_order_survives_global_scaling() {
    // equal block weights multiply every standardized descriptor by the same factor
    let items = corpus(9, 7);
    let (train, queries) = items.split_at(6);
    let weighted = |w: f64| BankConfig {
        weights: DescriptorWeights { classemes: w, gist: w },
        ..Default::default()
    };
    let (plain, _) = build_bank(train, &weighted(1.0)).unwrap();
    let (scaled, _) = build_bank(train, &weighted(3.5)).unwrap();
    let source = FeatureSource::default();
    for q in queries {
        let raw = source.descriptor(&q.id, &q.image).unwrap();
        let order = |bank: &SceneBank| -> Vec<String> {
            let d = bank.describe(&raw).unwrap();
            retrieve_top_n(bank, &d.combined, 6).unwrap().into_iter().map(|r| r.entry.id.clone()).collect()
        };
        assert_eq!(order(&plain), order(&scaled));
    }
}

#[test]
fn saved_bank_reloads_exactly() {
    let (bank, _) = build_bank(&corpus(5, 8), &BankConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.iseelbnk");
    save_bank(&bank, &path).unwrap();
    let loaded = load_bank(&path).unwrap();
    assert_eq!(encode_bank(&loaded).unwrap(), std::fs::read(&path).unwrap());
    for (a, b) in bank.entries().iter().zip(loaded.entries()) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.combined, b.combined);
        assert_eq!(a.unit.gamma(), b.unit.gamma());
        assert_eq!(a.unit.layer().omega, b.unit.layer().omega);
    }
    assert!(load_bank(&dir.path().join("missing")).is_err());
}
