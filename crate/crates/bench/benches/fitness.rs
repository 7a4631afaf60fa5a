use criterion::{black_box, criterion_group, criterion_main, Criterion};
use dssa_core::ga::init_population;
use dssa_core::numeric::{build_pencil, extract_coeffs};
use dssa_core::sampling::{frequency_grid, sample_dataset};
use dssa_core::{parse_netlist, FitnessConfig, FitnessContext, GaConfig, Layout};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NMAM: &str = include_str!("../../../circuits/nmam.net");

fn nmam(c: &mut Criterion) {
    let model = parse_netlist(NMAM).unwrap();
    let values = model.nominal_values();
    let pencil = build_pencil(&model, &values).unwrap();

    c.bench_function("nmam/extract_coeffs", |b| {
        b.iter(|| extract_coeffs(black_box(&pencil)).unwrap())
    });

    let nominal = extract_coeffs(&pencil).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let train = sample_dataset(&model, 100, &mut rng).unwrap();
    let grid = frequency_grid(&nominal, 3);
    let layout = Layout::for_degrees(
        nominal.num_degree(),
        nominal.den_degree(),
        15,
        model.param_count(),
    );
    let ctx = FitnessContext::new(layout, &train, &grid, FitnessConfig::default());
    let members = init_population(&GaConfig::default(), layout, &mut rng);

    c.bench_function("nmam/evaluate_chromosome_100_points", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % members.len();
            ctx.evaluate(black_box(&members[i]))
        })
    });
}

criterion_group!(benches, nmam);
criterion_main!(benches);
