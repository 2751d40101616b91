use criterion::{criterion_group, criterion_main, Criterion};
use vspfit_bench::{full_lists, random_tree};
use vspfit_core::mcmc::{Chain, McmcConfig, Parameterization};
use vspfit_core::{HyperPriorSpec, ObsModel};

fn sweeps(c: &mut Criterion) {
    let t = random_tree(12, 0.6, 1);
    let ds = full_lists(&t, ObsModel::QjU, 20, 2);
    for param in [Parameterization::Bdt, Parameterization::Mdt] {
        let cfg = McmcConfig { param, check_every: 0, ..McmcConfig::default() };
        let mut chain = Chain::new(&ds, cfg, HyperPriorSpec::default()).unwrap();
        c.bench_function(&format!("{param:?} sweep n=12 N=20"), |b| b.iter(|| chain.sweep().unwrap()));
    }
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
