use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use regnn::model::evaluate;
use regnn::policy::{self, AllocationSpec};
use regnn::rng::{stream, Stream};
use regnn::wireless::{generate_adhoc, sample_fading, sum_rate, wmmse, WmmseSettings};
use regnn::{apply_filter, backward, forward, ChannelMatrix, FilterTensor, GraphSignal, RegnnConfig};

const SIZES: [usize; 3] = [20, 50, 100];

fn channel(m: usize) -> ChannelMatrix {
    let net = generate_adhoc(m, &mut stream(0, Stream::Topology), 1.0, m).unwrap();
    sample_fading(&net, &mut stream(0, Stream::FadingEval), 0).h
}

fn filter(c: &mut Criterion) {
    let mut g = c.benchmark_group("graph_filter_k5");
    let taps = [0.5, -0.2, 0.1, 0.05, -0.01];
    for m in SIZES {
        let h = channel(m);
        let z = GraphSignal::from_vec(vec![1.0; m]);
        g.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| b.iter(|| apply_filter(&h, &z, &taps).unwrap()));
    }
    g.finish();
}

fn regnn_passes(c: &mut Criterion) {
    let params = FilterTensor::init(RegnnConfig::uniform(8, 1, 5), &mut stream(0, Stream::Init)).unwrap();
    let mut g = c.benchmark_group("regnn_l8_k5");
    for m in SIZES {
        let h = channel(m);
        let x = GraphSignal::from_vec(vec![1.0; m]);
        g.bench_with_input(BenchmarkId::new("forward", m), &m, |b, _| b.iter(|| evaluate(&params, &h, &x).unwrap()));
        g.bench_with_input(BenchmarkId::new("forward_backward", m), &m, |b, _| {
            let mut rng = stream(0, Stream::Policy);
            b.iter(|| {
                let (probs, tape) = forward(&params, &h, &x).unwrap();
                let draw = policy::sample(&probs, AllocationSpec { p0: 1.0 }, &mut rng);
                backward(&tape, &params, &h, &policy::grad_log_prob(&draw, &probs)).unwrap()
            })
        });
    }
    g.finish();
}

fn baselines(c: &mut Criterion) {
    let mut g = c.benchmark_group("baselines");
    for m in SIZES {
        let h = channel(m);
        g.bench_with_input(BenchmarkId::new("wmmse", m), &m, |b, _| {
            b.iter(|| wmmse(&h, 1.0, 1.0, WmmseSettings::default()))
        });
        let p = vec![1.0; m];
        g.bench_with_input(BenchmarkId::new("sum_rate", m), &m, |b, _| b.iter(|| sum_rate(&p, &h, 1.0)));
    }
    g.finish();
}

criterion_group!(kernels, filter, regnn_passes, baselines);
criterion_main!(kernels);
