use mimo_sic::signal::{
    build_qam, generate_channel, generate_noise, neighbor_order, quantize, random_frame,
    sigma2_to_snr, snr_to_sigma2, transmit, NoiseModel, RngStream, SystemDims, TxFrame,
};
use mimo_sic::Complex64;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Complex64> {
    (-5.0f64..5.0, -5.0f64..5.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn modulation() -> impl Strategy<Value = usize> {
    prop_oneof![Just(4usize), Just(16usize)]
}

proptest! {
    #[test]
    fn quantize_is_idempotent(z in point(), m in modulation()) {
        let c = build_qam(m).unwrap();
        let q = quantize(z, &c);
        prop_assert_eq!(quantize(q, &c), q);
    }

    #[test]
    fn quantize_is_nearest(z in point(), m in modulation()) {
        let c = build_qam(m).unwrap();
        let q = quantize(z, &c);
        let best = c.points().iter().map(|p| (z - p).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(((z - q).norm() - best).abs() < 1e-12);
    }

    #[test]
    fn first_neighbor_is_quantized(z in point(), m in modulation()) {
        let c = build_qam(m).unwrap();
        prop_assert_eq!(neighbor_order(z, &c, 1).unwrap()[0], quantize(z, &c));
    }

    #[test]
    fn neighbor_distances_non_decreasing(z in point(), m in modulation()) {
        let c = build_qam(m).unwrap();
        let list = neighbor_order(z, &c, m).unwrap();
        prop_assert_eq!(list.len(), m);
        for w in list.windows(2) {
            prop_assert!((z - w[0]).norm() <= (z - w[1]).norm());
        }
        let mut idx: Vec<usize> = list.iter().map(|p| c.index_of(*p).unwrap()).collect();
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..m).collect::<Vec<_>>());
    }

    #[test]
    fn four_qam_sign_rule(z in point()) {
        prop_assume!(z.re != 0.0 && z.im != 0.0);
        let c = build_qam(4).unwrap();
        prop_assert_eq!(quantize(z, &c), Complex64::new(z.re.signum(), z.im.signum()));
    }

    #[test]
    fn transmit_is_linear(seed in any::<u64>(), nt in 1usize..5, extra in 0usize..3) {
        let dims = SystemDims::new(nt, nt + extra).unwrap();
        let c = build_qam(16).unwrap();
        let mut rng = RngStream::new(seed, 0).rng();
        let h = generate_channel(dims, &mut rng);
        let s1 = random_frame(dims, &c, &mut rng).symbols;
        let s2 = random_frame(dims, &c, &mut rng).symbols;
        let zero = vec![Complex64::new(0.0, 0.0); dims.nr];
        let sum: Vec<Complex64> = s1.iter().zip(s2.iter()).map(|(a, b)| a + b).collect();
        let lhs = transmit(&h, &sum, &zero).unwrap();
        let a = transmit(&h, &s1, &zero).unwrap();
        let b = transmit(&h, &s2, &zero).unwrap();
        for i in 0..dims.nr {
            prop_assert!((lhs[i] - a[i] - b[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn snr_round_trip(snr in -20.0f64..60.0, nt in 1usize..17, m in modulation()) {
        let dims = SystemDims::square(nt).unwrap();
        let c = build_qam(m).unwrap();
        let back = sigma2_to_snr(snr_to_sigma2(snr, dims, &c), dims, &c);
        prop_assert!((back - snr).abs() < 1e-9);
    }
}

#[test]
fn channel_statistics() {
    let dims = SystemDims::new(1, 1).unwrap();
    let mut rng = RngStream::new(2024, 7).rng();
    let n = 100_000;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for _ in 0..n {
        let h = generate_channel(dims, &mut rng)[(0, 0)];
        sum += h;
        energy += h.norm_sqr();
    }
    assert!((sum / n as f64).norm() < 0.02);
    assert!((energy / n as f64 - 1.0).abs() < 0.02);
}

#[test]
fn noise_statistics() {
    let dims = SystemDims::new(1, 1).unwrap();
    let nm = NoiseModel::new(0.8).unwrap();
    let mut rng = RngStream::new(2024, 8).rng();
    let n = 100_000;
    let (mut energy, mut re2) = (0.0, 0.0);
    for _ in 0..n {
        let v = generate_noise(dims, nm, &mut rng)[0];
        energy += v.norm_sqr();
        re2 += v.re * v.re;
    }
    assert!((energy / n as f64 - 0.8).abs() < 0.02);
    assert!((re2 / n as f64 - 0.4).abs() < 0.02);
}

#[test]
fn zero_noise_is_zero() {
    let dims = SystemDims::new(3, 5).unwrap();
    let mut rng = RngStream::new(1, 1).rng();
    let v = generate_noise(dims, NoiseModel::new(0.0).unwrap(), &mut rng);
    assert!(v.iter().all(|z| z.norm() == 0.0));
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let dims = SystemDims::square(4).unwrap();
    let a = generate_channel(dims, &mut RngStream::new(5, 9).rng());
    let b = generate_channel(dims, &mut RngStream::new(5, 9).rng());
    let c = generate_channel(dims, &mut RngStream::new(5, 10).rng());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn symbol_frequencies_are_uniform() {
    for m in [4usize, 16] {
        let c = build_qam(m).unwrap();
        let dims = SystemDims::new(1, 1).unwrap();
        let mut rng = RngStream::new(77, m as u64).rng();
        let n = 100_000;
        let mut counts = vec![0u64; m];
        for _ in 0..n {
            let f = random_frame(dims, &c, &mut rng);
            counts[f.indices[0]] += 1;
        }
        let p = 1.0 / m as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for &k in &counts {
            assert!(
                (k as f64 - n as f64 * p).abs() <= 3.0 * sd,
                "m={m} counts={counts:?}"
            );
        }
    }
}

#[test]
fn bits_symbols_round_trip() {
    let c = build_qam(16).unwrap();
    let dims = SystemDims::square(6).unwrap();
    let mut rng = RngStream::new(3, 3).rng();
    for _ in 0..100 {
        let f = random_frame(dims, &c, &mut rng);
        let again = TxFrame::from_symbols(&f.symbols, &c).unwrap();
        assert_eq!(again, f);
        let from_bits = TxFrame::from_bits(f.bits.clone(), &c).unwrap();
        assert_eq!(from_bits, f);
    }
}
