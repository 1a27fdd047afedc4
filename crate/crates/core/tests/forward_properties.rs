use ctgi::{
    build_hadamard_basis, build_random_basis, direct_capture, modulate_accumulate,
    modulate_accumulate_scene, upsample_scene, HadamardOrdering, ModulationBasis,
    SuperPixelGeometry, Video,
};
use ndarray::Array3;
use proptest::prelude::*;

fn video_strategy(k: usize, side: usize) -> impl Strategy<Value = Video> {
    prop::collection::vec(0.0f64..1.0, k * side * side).prop_map(move |v| {
        Video::new(Array3::from_shape_vec((k, side, side), v).unwrap()).unwrap()
    })
}

fn basis(seed: u64) -> ModulationBasis {
    let g = SuperPixelGeometry::new(4, 3).unwrap();
    if seed.is_multiple_of(2) {
        build_hadamard_basis(g, HadamardOrdering::WalshSequency).unwrap()
    } else {
        build_random_basis(g, 16, seed, 0.5).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearity(v1 in video_strategy(16, 12), v2 in video_strategy(16, 12),
                 a in 0.0f64..3.0, b in 0.0f64..3.0, seed in 0u64..8) {
        let x = basis(seed);
        let mix = Video::new(v1.frames() * a + v2.frames() * b).unwrap();
        let s1 = modulate_accumulate(&v1, &x).unwrap().values;
        let s2 = modulate_accumulate(&v2, &x).unwrap().values;
        let s = modulate_accumulate(&mix, &x).unwrap().values;
        for ((&got, &p), &q) in s.iter().zip(&s1).zip(&s2) {
            let want = a * p + b * q;
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn masking_bound(v in video_strategy(16, 12), seed in 0u64..8) {
        let x = basis(seed);
        let s = modulate_accumulate(&v, &x).unwrap().values;
        let blur = direct_capture(&v).unwrap();
        let peak = 16.0 * v.max_intensity();
        for (&si, &bi) in s.iter().zip(&blur) {
            prop_assert!(si >= 0.0 && si <= bi && si <= peak);
        }
    }

    #[test]
    fn upsampled_blocks_are_constant(v in video_strategy(3, 5), l in 1usize..5) {
        let g = SuperPixelGeometry::new(l, 5).unwrap();
        let up = upsample_scene(&v, g).unwrap();
        for k in 0..3 {
            let f = up.frame(k);
            for ((i, j), &val) in f.indexed_iter() {
                prop_assert_eq!(val, v.frame(k)[[i / l, j / l]]);
            }
        }
    }

    #[test]
    fn pattern_is_tiling(seed in 0u64..1000, l in 1usize..6, n in 1usize..4) {
        let g = SuperPixelGeometry::new(l, n).unwrap();
        let b = build_random_basis(g, 5, seed, 0.3).unwrap();
        for k in 0..5 {
            for ((i, j), &v) in b.pattern(k).indexed_iter() {
                prop_assert_eq!(v, b.tile(k)[(i % l) * l + j % l]);
            }
        }
    }
}

#[test]
fn accumulation_is_thread_count_invariant() {
    let g = SuperPixelGeometry::new(8, 16).unwrap();
    let b = build_hadamard_basis(g, HadamardOrdering::WalshSequency).unwrap();
    let scene = Video::new(Array3::from_shape_fn((64, 16, 16), |(k, i, j)| {
        ((k * 31 + i * 17 + j * 7) % 97) as f64 / 96.0
    }))
    .unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| modulate_accumulate_scene(&scene, &b).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert!(one
        .values
        .iter()
        .zip(many.values.iter())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}
