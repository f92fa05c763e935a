use regnn::policy::{self, AllocationSpec};
use regnn::rng::{stream, Stream};
use regnn::wireless::{random_selection, sample_demand, sample_fading, NetworkModel, TopologyKind};
use regnn::GraphSignal;

const N: usize = 1_000_000;

fn within_three_se(mean: f64, expected: f64, var: f64, n: usize) -> bool {
    (mean - expected).abs() <= 3.0 * (var / n as f64).sqrt()
}

/// Four pairs whose direct links have unit path loss.
fn unit_links() -> NetworkModel {
    let tx: Vec<[f64; 2]> = (0..4).map(|i| [10.0 * i as f64, 0.0]).collect();
    let rx: Vec<[f64; 2]> = (0..4).map(|i| [10.0 * i as f64 + 1.0, 0.0]).collect();
    NetworkModel::new(TopologyKind::Adhoc, tx, rx, (0..4).collect()).unwrap()
}

#[test]
fn bernoulli_frequencies_match_probabilities() {
    let q = [0.05, 0.3, 0.5, 0.8, 0.99];
    let probs = GraphSignal::from_vec(q.to_vec());
    let mut rng = stream(11, Stream::Policy);
    let mut counts = [0usize; 5];
    for _ in 0..N {
        let s = policy::sample(&probs, AllocationSpec { p0: 1.0 }, &mut rng);
        for (c, &b) in counts.iter_mut().zip(&s.transmit) {
            *c += b as usize;
        }
    }
    for (c, &p) in counts.iter().zip(&q) {
        let freq = *c as f64 / N as f64;
        assert!(within_three_se(freq, p, p * (1.0 - p), N), "q={p}: frequency {freq}");
    }
}

#[test]
fn score_has_zero_mean() {
    let q = [0.2, 0.5, 0.7];
    let probs = GraphSignal::from_vec(q.to_vec());
    let mut rng = stream(12, Stream::Policy);
    let mut sums = [0.0; 3];
    for _ in 0..N {
        let s = policy::sample(&probs, AllocationSpec { p0: 1.0 }, &mut rng);
        for (acc, g) in sums.iter_mut().zip(policy::grad_log_prob(&s, &probs).values()) {
            *acc += g;
        }
    }
    for (s, &p) in sums.iter().zip(&q) {
        let mean = s / N as f64;
        assert!(within_three_se(mean, 0.0, 1.0 / (p * (1.0 - p)), N), "q={p}: mean score {mean}");
    }
}

#[test]
fn rayleigh_fading_has_unit_second_moment() {
    let net = unit_links();
    let mut rng = stream(13, Stream::FadingTrain);
    let mut sum = 0.0;
    for d in 0..N / 4 {
        let h = sample_fading(&net, &mut rng, d as u64).h;
        sum += (0..4).map(|i| h.get(i, i).powi(2)).sum::<f64>();
    }
    let mean = sum / N as f64;
    assert!((0.99..=1.01).contains(&mean), "second moment {mean}");
    // h² is exponential with unit mean, hence unit variance.
    assert!(within_three_se(mean, 1.0, 1.0, N), "second moment {mean}");
}

#[test]
fn exponential_demand_has_requested_mean() {
    let mean_target = 0.05;
    let x = sample_demand(N, mean_target, &mut stream(14, Stream::Demand)).unwrap();
    let mean = x.iter().sum::<f64>() / N as f64;
    assert!(mean >= 0.99 * mean_target && mean <= 1.01 * mean_target, "mean {mean}");
    assert!(within_three_se(mean, mean_target, mean_target * mean_target, N), "mean {mean}");
    assert!(x.iter().all(|&v| v >= 0.0));
}

#[test]
fn random_selection_is_uniform_over_users() {
    let (m, draws) = (10usize, 100_000usize);
    let mut rng = stream(15, Stream::Baseline);
    let mut counts = vec![0usize; m];
    for _ in 0..draws {
        let p = random_selection(m, 4.5, 1.0, &mut rng).unwrap();
        assert_eq!(p.iter().filter(|&&v| v == 1.0).count(), 4);
        for (c, v) in counts.iter_mut().zip(&p) {
            *c += (*v > 0.0) as usize;
        }
    }
    let target = 4.0 / m as f64;
    for c in counts {
        let f = c as f64 / draws as f64;
        assert!(within_three_se(f, target, target * (1.0 - target), draws), "frequency {f}");
    }
}
