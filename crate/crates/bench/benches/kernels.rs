use std::net::{IpAddr, Ipv4Addr};

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subnetgeo::enrichment::{Cidr, PrefixTable};
use subnetgeo::geodesy::{hull_scale, vincenty_distance, HullPoints};
use subnetgeo::metrics::EcdfTable;
use subnetgeo::{GeoPoint, PlanePoint};

fn vincenty(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(GeoPoint, GeoPoint)> = (0..1024)
        .map(|_| {
            let p = |rng: &mut ChaCha8Rng| GeoPoint::new(rng.gen_range(41.3..42.4), rng.gen_range(-88.4..-87.0));
            (p(&mut rng), p(&mut rng))
        })
        .collect();
    let mut g = c.benchmark_group("vincenty");
    g.throughput(Throughput::Elements(pairs.len() as u64));
    g.bench_function("city_pairs", |b| {
        b.iter(|| pairs.iter().map(|(a, b)| vincenty_distance(*a, *b).unwrap()).sum::<f64>())
    });
    g.finish();
}

fn prefix_lookup(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut g = c.benchmark_group("prefix_lookup");
    for n in [1_000usize, 100_000] {
        let entries: Vec<(Cidr, u32)> = (0..n as u32)
            .map(|i| {
                let len = [16u8, 20, 24, 28, 32][i as usize % 5];
                let addr = Ipv4Addr::from(rng.gen::<u32>() & (u32::MAX << (32 - len as u32)));
                (Cidr::new(IpAddr::V4(addr), len).unwrap(), i)
            })
            .collect();
        let table = PrefixTable::build(entries.iter().map(|(c, v)| (*c, *v)).collect::<std::collections::BTreeMap<_, _>>()).unwrap();
        let probes: Vec<IpAddr> = (0..4096).map(|_| IpAddr::V4(Ipv4Addr::from(rng.gen::<u32>()))).collect();
        g.throughput(Throughput::Elements(probes.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(n), &probes, |b, probes| {
            b.iter(|| probes.iter().filter(|ip| table.lookup(**ip).is_some()).count())
        });
    }
    g.finish();
}

fn hull(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = c.benchmark_group("hull_scale");
    for n in [100usize, 3_000] {
        let pts: Vec<PlanePoint> =
            (0..n).map(|_| PlanePoint::new(rng.gen_range(-4e3..4e3), rng.gen_range(-4e3..4e3))).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &pts, |b, pts| {
            b.iter(|| hull_scale(black_box(pts), 0.9, HullPoints::Duplicates).unwrap())
        });
    }
    g.finish();
}

fn ecdf(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sample: Vec<f64> = (0..100_000).map(|_| rng.gen_range(0.0..50_000.0)).collect();
    c.bench_function("ecdf_build_100k", |b| {
        b.iter(|| EcdfTable::new(black_box(sample.clone())).unwrap().quantile(0.5))
    });
}

criterion_group!(benches, vincenty, prefix_lookup, hull, ecdf);
criterion_main!(benches);
