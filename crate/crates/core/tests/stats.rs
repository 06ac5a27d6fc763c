mod common;

use proptest::prelude::*;

use ltss::dataset::{generate_synthetic, SyntheticProfile};
use ltss::stats::{
    compute_stats, gini, gini_pairwise, image_level_weights, pixel_level_weights, split_weights,
    Bucket, ClassStats, Mode,
};

fn weights() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1000.0, 1..40)
        .prop_filter("needs positive mass", |w| w.iter().any(|&x| x > 1e-6))
}

#[test]
fn hand_values() {
    assert_eq!(gini(&[5.0, 5.0, 5.0, 5.0]).unwrap(), 0.0);
    assert!((gini(&[0.0, 0.0, 0.0, 1.0]).unwrap() - 0.75).abs() < 1e-12);
    assert!((gini(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 0.25).abs() < 1e-12);
    assert!(gini(&[]).is_err());
    assert!(gini(&[0.0, 0.0]).is_err());
    assert!(gini(&[1.0, -1.0]).is_err());
    assert!(gini(&[1.0, f64::NAN]).is_err());
}

#[test]
fn split_examples() {
    // 50, 20, 15, 10, 5: masses before are 0, 50, 70, 85, 95
    let s = split_weights(&[10.0, 50.0, 5.0, 20.0, 15.0], Mode::Image);
    assert_eq!(s.frequent.iter().copied().collect::<Vec<_>>(), vec![1, 3]);
    assert_eq!(s.common.iter().copied().collect::<Vec<_>>(), vec![4]);
    assert_eq!(s.rare.iter().copied().collect::<Vec<_>>(), vec![0, 2]);

    // ties resolved by ascending id
    let s = split_weights(&[1.0, 1.0, 1.0, 1.0, 1.0], Mode::Pixel);
    assert_eq!(
        s.frequent.iter().copied().collect::<Vec<_>>(),
        vec![0, 1, 2]
    );
    assert_eq!(s.common.iter().copied().collect::<Vec<_>>(), vec![3]);
    assert_eq!(s.rare.iter().copied().collect::<Vec<_>>(), vec![4]);

    let s = split_weights(&[3.0, 0.0], Mode::Image);
    assert_eq!(s.bucket_of(1), Some(Bucket::Rare));
}

#[test]
fn stats_file_round_trip() {
    let idx = generate_synthetic(&SyntheticProfile {
        num_classes: 9,
        num_images: 40,
        rank_decay: 0.4,
        image_size: 12,
        seed: 11,
    })
    .unwrap();
    let s = compute_stats(&idx).unwrap();
    let json = serde_json::to_string(&s.to_file()).unwrap();
    let back = ClassStats::from_file(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back, s);
    assert_eq!(s.num_images, 40);
    assert_eq!(s.gini_image, gini(&s.weights(Mode::Image)).unwrap());
    assert_eq!(s.gini_pixel, gini(&s.weights(Mode::Pixel)).unwrap());
    let f = s.frequencies(Mode::Image);
    for (fr, w) in f.iter().zip(&s.image_weights) {
        assert!(*fr >= 0.0 && *fr <= 1.0);
        assert_eq!(*fr, *w as f64 / 40.0);
    }
}

proptest! {
    #[test]
    fn lorenz_matches_pairwise_and_oracle(w in weights()) {
        let a = gini(&w).unwrap();
        let b = gini_pairwise(&w).unwrap();
        let o = common::gini_oracle(&w);
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
        prop_assert!((a - o).abs() < 1e-12, "{} vs {}", a, o);
        let n = w.len() as f64;
        prop_assert!(a >= 0.0 && a <= (n - 1.0) / n + 1e-12);
    }

    #[test]
    fn permutation_invariant(w in weights(), seed in any::<u64>()) {
        let mut p = w.clone();
        // Fisher-Yates with a small LCG so the shuffle depends only on `seed`
        let mut s = seed;
        for i in (1..p.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            p.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert!((gini(&w).unwrap() - gini(&p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scale_invariant(w in weights(), k in 0.01f64..100.0) {
        let scaled: Vec<f64> = w.iter().map(|x| x * k).collect();
        prop_assert!((gini(&w).unwrap() - gini(&scaled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn appending_zero_never_decreases(w in weights()) {
        let mut z = w.clone();
        z.push(0.0);
        prop_assert!(gini(&z).unwrap() >= gini(&w).unwrap() - 1e-12);
    }

    #[test]
    fn split_is_an_ordered_partition(w in weights()) {
        let s = split_weights(&w, Mode::Image);
        let c = w.len() as u32;
        for id in 0..c {
            let hits = [&s.frequent, &s.common, &s.rare]
                .iter()
                .filter(|b| b.contains(&id))
                .count();
            prop_assert_eq!(hits, 1);
        }
        prop_assert_eq!(s.frequent.len() + s.common.len() + s.rare.len(), w.len());
        // every frequent class outweighs (or ties) every common one, and so on
        let min = |b: &std::collections::BTreeSet<u32>| b.iter().map(|&i| w[i as usize]).fold(f64::INFINITY, f64::min);
        let max = |b: &std::collections::BTreeSet<u32>| b.iter().map(|&i| w[i as usize]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min(&s.frequent) >= max(&s.common));
        prop_assert!(min(&s.common) >= max(&s.rare));
        prop_assert!(min(&s.frequent) >= max(&s.rare));
        // the heaviest class is always frequent
        prop_assert!(!s.frequent.is_empty());
    }

    #[test]
    fn subset_weights_bounded_by_full(seed in 0u64..50, keep_every in 2usize..5) {
        let idx = generate_synthetic(&SyntheticProfile {
            num_classes: 6,
            num_images: 30,
            rank_decay: 0.5,
            image_size: 8,
            seed,
        })
        .unwrap();
        let keep: Vec<&str> = idx
            .images()
            .iter()
            .step_by(keep_every)
            .map(|r| r.id.as_str())
            .collect();
        let sub = idx.subset(keep).unwrap();
        for (s, f) in image_level_weights(&sub).iter().zip(image_level_weights(&idx)) {
            prop_assert!(*s <= f);
        }
        for (s, f) in pixel_level_weights(&sub).iter().zip(pixel_level_weights(&idx)) {
            prop_assert!(*s <= f + 1e-12);
        }
    }
}
