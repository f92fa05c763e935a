mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use regnn::consts::{CAPACITY_EQUIVARIANCE_TOL, FILTER_EQUIVARIANCE_TOL, REGNN_EQUIVARIANCE_TOL};
use regnn::rng::{substream, Stream};
use regnn::wireless::capacity;
use regnn::{apply_filter, permute, GraphSignal, Permutation, RegnnConfig};

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn filter_commutes_with_relabeling(seed in any::<u64>(), m in 1usize..=16, f in 1usize..=3, k in 1usize..=6) {
        let mut rng = substream(seed, Stream::Init, 0);
        let h = bounded_channel(m, &mut rng);
        let z = signal(m, f, &mut rng);
        let taps: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pi = Permutation::random(m, &mut rng);
        let (hp, zp) = permute(&h, &z, &pi).unwrap();
        let lhs = apply_filter(&hp, &zp, &taps).unwrap();
        let rhs = pi.apply_signal(&apply_filter(&h, &z, &taps).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= FILTER_EQUIVARIANCE_TOL);
    }

    #[test]
    fn filter_is_linear(seed in any::<u64>(), m in 1usize..=16, k in 1usize..=6) {
        let mut rng = substream(seed, Stream::Init, 1);
        let h = bounded_channel(m, &mut rng);
        let z1 = signal(m, 2, &mut rng);
        let z2 = signal(m, 2, &mut rng);
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let taps: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = apply_filter(&h, &z1.combine(a, &z2, b).unwrap(), &taps).unwrap();
        let rhs = apply_filter(&h, &z1, &taps).unwrap()
            .combine(a, &apply_filter(&h, &z2, &taps).unwrap(), b).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn relabeled_entries_follow_the_permutation(seed in any::<u64>(), m in 1usize..=12) {
        let mut rng = substream(seed, Stream::Init, 2);
        let h = bounded_channel(m, &mut rng);
        let x = signal(m, 1, &mut rng);
        let pi = Permutation::random(m, &mut rng);
        let (hp, xp) = permute(&h, &x, &pi).unwrap();
        for i in 0..m {
            prop_assert_eq!(xp.values()[pi.image(i)], x.values()[i]);
            for j in 0..m {
                prop_assert_eq!(hp.get(pi.image(i), pi.image(j)), h.get(i, j));
            }
        }
        let (hb, xb) = permute(&hp, &xp, &pi.inverse()).unwrap();
        prop_assert_eq!(hb, h);
        prop_assert_eq!(xb, x);
    }

    #[test]
    fn capacity_commutes_with_relabeling(seed in any::<u64>(), m in 1usize..=24) {
        let mut rng = substream(seed, Stream::Init, 3);
        let h = regnn::ChannelMatrix::from_fn(m, |_, _| rng.random_range(0.0..3.0)).unwrap();
        let p: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { rng.random_range(0.0..2.0) } else { 0.0 }).collect();
        let pi = Permutation::random(m, &mut rng);
        let hp = pi.apply_matrix(&h).unwrap();
        let lhs = capacity(&pi.apply_vec(&p), &hp, 0.7);
        let rhs = pi.apply_vec(&capacity(&p, &h, 0.7));
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= CAPACITY_EQUIVARIANCE_TOL);
        }
    }
}

#[test]
fn regnn_is_permutation_equivariant_on_200_instances() {
    let mut worst = 0.0f64;
    for seed in 0..200u64 {
        let mut rng = substream(seed, Stream::Init, 4);
        let m = rng.random_range(3..=32);
        let cfg = random_config(rng.random_range(1..=4), 3, 5, &mut rng);
        let params = random_taps(&cfg, 1.0, &mut rng);
        let h = bounded_channel(m, &mut rng);
        let x = signal(m, 1, &mut rng);
        let pi = Permutation::random(m, &mut rng);
        let (hp, xp) = permute(&h, &x, &pi).unwrap();
        let lhs = regnn::model::evaluate(&params, &hp, &xp).unwrap();
        let rhs = pi.apply_signal(&regnn::model::evaluate(&params, &h, &x).unwrap()).unwrap();
        let d = lhs.max_abs_diff(&rhs);
        worst = worst.max(d);
        assert!(d <= REGNN_EQUIVARIANCE_TOL, "seed {seed}: residual {d:e}");
    }
    eprintln!("worst equivariance residual {worst:e}");
}

#[test]
fn parameter_count_does_not_depend_on_network_size() {
    let cfg = RegnnConfig::uniform(8, 1, 5);
    assert_eq!(regnn::num_params(&cfg), 40);
    let mut rng = substream(1, Stream::Init, 5);
    let params = random_taps(&cfg, 0.5, &mut rng);
    for m in [1usize, 2, 7, 20, 50, 100] {
        let h = bounded_channel(m, &mut rng);
        let q = regnn::model::evaluate(&params, &h, &GraphSignal::from_vec(vec![1.0; m])).unwrap();
        assert_eq!(q.dim(), m);
        assert!(q.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
