use iseel::fixation::{default_sigma_gt, fixations_to_density, Fixation, FixationSet};
use iseel::metrics::{auc_borji, auc_judd, evaluate, kl, sauc, sim, EvalItem, EvalOptions, Metric};
use iseel::raster::{normalize, resize_bilinear};
use iseel::{Grid, Normalization};
use proptest::prelude::*;

fn set(id: &str, w: usize, h: usize, pts: &[(u32, u32)]) -> FixationSet {
    FixationSet::new(id, w, h, pts.iter().map(|&(x, y)| Fixation::new(x, y)).collect()).unwrap()
}

fn points(w: u32, h: u32) -> impl Strategy<Value = Vec<(u32, u32)>> {
    prop::collection::vec((0..w, 0..h), 1..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn auc_variants_ignore_monotonic_transforms(
        vals in prop::collection::vec(0.0f64..1.0, 20 * 15),
        fix in points(20, 15),
        pool in points(20, 15),
        seed in any::<u64>(),
    ) {
        let map = Grid::from_vec(20, 15, vals).unwrap();
        let warped = map.map(|v| (3.0 * v).exp() + 0.5 * v.powi(3));
        let fix = set("a", 20, 15, &fix);
        let others = [set("b", 20, 15, &pool)];
        prop_assert_eq!(auc_judd(&map, &fix).unwrap(), auc_judd(&warped, &fix).unwrap());
        prop_assert_eq!(auc_borji(&map, &fix, 10, seed).unwrap(), auc_borji(&warped, &fix, 10, seed).unwrap());
        prop_assert_eq!(
            sauc(&map, &fix, &others, 10, seed).unwrap(),
            sauc(&warped, &fix, &others, 10, seed).unwrap()
        );
    }

    #[test]
    fn kl_is_asymmetric_but_sim_is_not(
        a in prop::collection::vec(0.01f64..1.0, 12),
        b in prop::collection::vec(0.01f64..1.0, 12),
    ) {
        let p = normalize(&Grid::from_vec(4, 3, a).unwrap(), Normalization::SumsToOne).unwrap();
        let q = normalize(&Grid::from_vec(4, 3, b).unwrap(), Normalization::SumsToOne).unwrap();
        prop_assert!((sim(&p, &q).unwrap() - sim(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(kl(&p, &q).unwrap() >= 0.0);
    }
}

#[test]
fn kl_direction_matters_on_a_fixed_pair() {
    let p = normalize(&Grid::from_vec(2, 1, vec![0.9, 0.1]).unwrap(), Normalization::SumsToOne).unwrap();
    let q = normalize(&Grid::from_vec(2, 1, vec![0.5, 0.5]).unwrap(), Normalization::SumsToOne).unwrap();
    let forward = kl(&p, &q).unwrap();
    let backward = kl(&q, &p).unwrap();
    assert!((forward - 0.368_064).abs() < 1e-5, "{forward}");
    assert!((backward - 0.510_826).abs() < 1e-5, "{backward}");
}

#[test]
fn half_resolution_maps_score_like_full_resolution_ones() {
    let (w, h) = (64, 48);
    let fixations = [
        set("a", w, h, &[(10, 10), (12, 11), (50, 30)]),
        set("b", w, h, &[(32, 24), (30, 20)]),
        set("c", w, h, &[(5, 40), (60, 5), (33, 33), (34, 30)]),
    ];
    let full: Vec<EvalItem> = fixations
        .iter()
        .map(|f| EvalItem {
            id: f.image_id().to_string(),
            map: fixations_to_density(f, w, h, default_sigma_gt(w, h)).unwrap().into_grid(),
            fixations: f.clone(),
        })
        .collect();
    let half: Vec<EvalItem> = full
        .iter()
        .map(|it| EvalItem {
            map: resize_bilinear(&it.map, w / 2, h / 2),
            ..it.clone()
        })
        .collect();
    let metrics = [Metric::Nss, Metric::AucJudd, Metric::Kl];
    let a = evaluate(&full, &metrics, &EvalOptions::default()).unwrap();
    let b = evaluate(&half, &metrics, &EvalOptions::default()).unwrap();
    assert!(a.mean(Metric::Kl).unwrap() < 1e-9);
    assert!(a.mean(Metric::Nss).unwrap() > 1.0);
    assert!(b.mean(Metric::Nss).unwrap() > 1.0);
    assert!(b.mean(Metric::AucJudd).unwrap() > 0.9);
    assert!(b.mean(Metric::Kl).unwrap() < 0.1);
}

#[test]
fn report_is_reproducible_and_lists_every_score() {
    let (w, h) = (30, 20);
    let items: Vec<EvalItem> = (0..4)
        .map(|i| {
            let f = set(&format!("img{i}"), w, h, &[(3 + 5 * i, 4 + i), (20, 10 + i)]);
            EvalItem {
                id: f.image_id().to_string(),
                map: Grid::from_fn(w, h, |x, y| ((x * 7 + y * 3 + i as usize) % 11) as f64),
                fixations: f,
            }
        })
        .collect();
    let opts = EvalOptions {
        splits: 20,
        seed: 4,
        ..Default::default()
    };
    let a = evaluate(&items, &Metric::ALL, &opts).unwrap();
    let b = evaluate(&items, &Metric::ALL, &opts).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    let csv = String::from_utf8(a.to_csv().unwrap()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * Metric::ALL.len());
    assert_eq!(a.negative_samples[&Metric::Sauc], 8);
}
