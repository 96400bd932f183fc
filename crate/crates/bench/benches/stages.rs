use clothground::csf;
use clothground::denoise;
use clothground::synth::GroundModel;
use clothground::terrain::{self, DtmParams};
use clothground::{CsfParams, NeighborIndex, SorParams};
use clothground_bench::forest;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn knn(c: &mut Criterion) {
    let cloud = forest(40.0, GroundModel::Flat { z0: 0.0 }, 0);
    let mut g = c.benchmark_group("knn");
    g.bench_function("build", |b| {
        b.iter(|| NeighborIndex::build(black_box(&cloud)).unwrap())
    });
    let index = NeighborIndex::build(&cloud).unwrap();
    for k in [8, 20, 100] {
        g.bench_with_input(BenchmarkId::new("query_1000", k), &k, |b, &k| {
            b.iter(|| {
                for i in (0..cloud.len()).step_by(cloud.len() / 1000) {
                    black_box(index.knn_of_point(i, k).unwrap());
                }
            })
        });
    }
    g.finish();
}

fn sor(c: &mut Criterion) {
    let cloud = forest(40.0, GroundModel::Flat { z0: 0.0 }, 2000);
    c.bench_function("sor/k20", |b| {
        b.iter(|| {
            denoise::statistical_outlier_removal(black_box(&cloud), &SorParams::default()).unwrap()
        })
    });
}

fn cloth(c: &mut Criterion) {
    let mut g = c.benchmark_group("csf");
    g.sample_size(10);
    for (name, ground) in [
        ("flat", GroundModel::Flat { z0: 0.0 }),
        (
            "ravine",
            GroundModel::Ravine {
                depth: 10.0,
                width: 20.0,
            },
        ),
    ] {
        let cloud = forest(40.0, ground, 0);
        g.bench_function(BenchmarkId::new("filter", name), |b| {
            b.iter(|| csf::filter(black_box(&cloud), &CsfParams::default()).unwrap())
        });
    }
    let cloud = forest(40.0, GroundModel::Flat { z0: 0.0 }, 0);
    let inverted = csf::invert_cloud(&cloud).unwrap();
    let cloth = csf::init_cloth(&inverted, &CsfParams::default()).unwrap();
    g.bench_function("iterate", |b| {
        b.iter_batched(
            || cloth.clone(),
            |mut cl| cl.iterate(&CsfParams::default()),
            criterion::BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn dtm(c: &mut Criterion) {
    let cloud = forest(40.0, GroundModel::Ramp { slope: 0.3 }, 0);
    let ground = csf::filter(&cloud, &CsfParams::default()).unwrap();
    let ground = cloud.select(&ground.labels.indices_of(clothground::Label::Ground));
    c.bench_function("dtm/idw_0.5m", |b| {
        b.iter(|| terrain::build_dtm(black_box(&ground), &DtmParams::with_cell_size(0.5)).unwrap())
    });
}

criterion_group!(benches, knn, sor, cloth, dtm);
criterion_main!(benches);
