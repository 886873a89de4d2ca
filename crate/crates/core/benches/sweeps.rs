use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use recon_core::analysis::{coherence_seminorm, Sampling};
use recon_core::bump::{make_standard_bump, sample_br};
use recon_core::functions::cos;
use recon_core::germs::taylor_germ;
use recon_core::pairing::QuadratureSpec;
use recon_core::par::{set_mode, Mode};
use recon_core::reconstruction::{rate_certificate, reconstruct, ReconstructionConfig};
use recon_core::{BoxDomain, Point};

const MODES: [(&str, Mode); 2] = [("parallel", Mode::Parallel), ("sequential", Mode::Sequential)];

fn coherence_sweep(c: &mut Criterion) {
    let g = taylor_germ(cos(1), 2.5).unwrap();
    let phi = make_standard_bump(1).unwrap();
    let k = BoxDomain::unit(1);
    let s = Sampling::default_for(1);
    let q = QuadratureSpec::default_for(1);
    let mut group = c.benchmark_group("coherence_seminorm");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_mode(mode);
            b.iter(|| coherence_seminorm(&g, &k, &phi, 0.0, 2.5, &s, &q).unwrap().seminorm)
        });
    }
    group.finish();
    set_mode(Mode::Parallel);
}

fn rate_sweep(c: &mut Criterion) {
    let g = taylor_germ(cos(1), 2.5).unwrap();
    let mut cfg = ReconstructionConfig::new(1, 2.5, 0.0, 0.0, 3).unwrap();
    cfg.n_max = 8;
    cfg.quadrature = QuadratureSpec::new(32).unwrap();
    let rec = reconstruct(&g, &cfg).unwrap();
    let centers: Vec<Point> = [-0.4, 0.0, 0.4].map(Point::d1).to_vec();
    let lambdas: Vec<f64> = (2..=5).map(|k| 2f64.powi(-k)).collect();
    let psis = sample_br(3, 1, 1, 0).unwrap();
    let mut group = c.benchmark_group("rate_certificate");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_mode(mode);
            b.iter(|| rate_certificate(&g, &rec, &cfg, &centers, &lambdas, &psis).unwrap().power_slope)
        });
    }
    group.finish();
    set_mode(Mode::Parallel);
}

criterion_group!(benches, coherence_sweep, rate_sweep);
criterion_main!(benches);
