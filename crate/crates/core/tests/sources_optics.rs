use std::sync::Arc;

use homdip::fock::{ModeLabel, ModeRegistry, Spatial, DEFAULT_MAX_PHOTONS};
use homdip::optics::*;
use homdip::pdc::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn stimulated_emission_identity() {
    for p in [0.001, 0.04, 0.1, 0.2, 0.5] {
        let s = SourceParams::from_pair_probability(p).unwrap();
        let lhs = pair_number_distribution(&s, 2) * pair_number_distribution(&s, 0);
        let rhs = pair_number_distribution(&s, 1).powi(2);
        assert!((lhs - rhs).abs() <= 1e-15 * rhs, "P={p}");
    }
}

#[test]
fn thermal_law_sums_to_one() {
    let s = SourceParams::from_zeta(0.7).unwrap();
    let total: f64 = (0..400).map(|n| pair_number_distribution(&s, n)).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let mean: f64 = (0..400).map(|n| f64::from(n) * pair_number_distribution(&s, n)).sum();
    assert!((mean - s.zeta().sinh().powi(2)).abs() < 1e-10);
}

fn four_sigma(count: u64, n: u64, p: f64) -> bool {
    let expected = n as f64 * p;
    (count as f64 - expected).abs() <= 4.0 * (n as f64 * p * (1.0 - p)).sqrt()
}

#[test]
fn sampled_pair_numbers_follow_thermal_law() {
    let s1 = SourceParams::from_pair_probability(0.04).unwrap();
    let s2 = SourceParams::from_pair_probability(0.1).unwrap();
    let sampler = PairSampler::new(&s1, &s2);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 1_000_000u64;
    let mut counts = [[0u64; 4]; 4];
    for _ in 0..n {
        let c = sampler.sample(&mut rng);
        if c.n1 < 4 && c.n2 < 4 {
            counts[c.n1 as usize][c.n2 as usize] += 1;
        }
    }
    for n1 in 0..4u32 {
        for n2 in 0..4u32 {
            let p = PairCountSample { n1, n2 }.probability(&s1, &s2);
            assert!(four_sigma(counts[n1 as usize][n2 as usize], n, p), "({n1},{n2})");
        }
    }
}

#[test]
fn four_photon_configurations_equally_likely() {
    let s = SourceParams::from_pair_probability(0.04).unwrap();
    let sampler = PairSampler::new(&s, &s);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000u64;
    let mut four = [0u64; 3];
    for _ in 0..n {
        let c = sampler.sample(&mut rng);
        if c.total() == 2 {
            four[c.n2 as usize] += 1;
        }
    }
    let p = 0.04f64.powi(2) * 0.96f64.powi(2);
    for count in four {
        assert!(four_sigma(count, n, p), "{four:?}");
    }
}

#[test]
fn joint_state_four_photon_amplitudes_equal() {
    let reg = Arc::new(ModeRegistry::two_source());
    let s = SourceParams::from_pair_probability(0.04).unwrap();
    let state = joint_input_state(&reg, DEFAULT_MAX_PHOTONS, &s, &s, 3, &ModeAmplitudes::IDENTICAL).unwrap();
    let (a, b, h1, h2) = (
        ModeLabel::plain(Spatial::A),
        ModeLabel::plain(Spatial::B),
        ModeLabel::plain(Spatial::Herald1),
        ModeLabel::plain(Spatial::Herald2),
    );
    let double1 = state.amplitude_of(&[(a, 2), (h1, 2)]).unwrap();
    let split = state.amplitude_of(&[(a, 1), (b, 1), (h1, 1), (h2, 1)]).unwrap();
    let double2 = state.amplitude_of(&[(b, 2), (h2, 2)]).unwrap();
    assert!(split.norm() > 0.0);
    assert!((double1 - split).norm() < 1e-15 && (double2 - split).norm() < 1e-15);
    assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn joint_state_single_pair_ratio() {
    let reg = Arc::new(ModeRegistry::two_source());
    let s1 = SourceParams::from_zeta(0.25).unwrap();
    let s2 = SourceParams::from_zeta(0.1).unwrap();
    let state = joint_input_state(&reg, DEFAULT_MAX_PHOTONS, &s1, &s2, 2, &ModeAmplitudes::IDENTICAL).unwrap();
    let one = state
        .amplitude_of(&[(ModeLabel::plain(Spatial::A), 1), (ModeLabel::plain(Spatial::Herald1), 1)])
        .unwrap();
    let two = state
        .amplitude_of(&[(ModeLabel::plain(Spatial::B), 1), (ModeLabel::plain(Spatial::Herald2), 1)])
        .unwrap();
    assert!((one.re / two.re - 0.25f64.tanh() / 0.1f64.tanh()).abs() < 1e-12);
}

#[test]
fn joint_state_needs_room_for_all_photons() {
    let reg = Arc::new(ModeRegistry::two_source());
    let s = SourceParams::from_pair_probability(0.04).unwrap();
    assert!(joint_input_state(&reg, DEFAULT_MAX_PHOTONS, &s, &s, 4, &ModeAmplitudes::IDENTICAL).is_err());
}

#[test]
fn lab_filter_coherence_length() {
    let lc = coherence_length(&FilterSpec::new(1310.0, 10.0).unwrap());
    let oracle = 2.0 * std::f64::consts::LN_2 / std::f64::consts::PI * 1310.0f64.powi(2) / 10.0 / 1000.0;
    assert!((lc.um - oracle).abs() < 1e-12);
    assert!((lc.fs - oracle / 0.299_792_458).abs() < 1e-9);
}

#[test]
fn herald_filter_narrows_signal() {
    let signal = FilterSpec::new(1310.0, 10.0).unwrap();
    let herald = FilterSpec::new(1550.0, 10.0).unwrap();
    let pump = PumpSpec::new(1.0 / (1.0 / 1310.0 + 1.0 / 1550.0), 4.5).unwrap();
    let mapped = 10.0 * (1310.0f64 / 1550.0).powi(2);
    assert!((mapped_herald_width_nm(1310.0, &herald) - mapped).abs() < 1e-12);
    let eff = heralded_bandwidth(&signal, &herald, &pump).unwrap();
    let oracle = 1.0 / (1.0 / 100.0 + 1.0 / (mapped * mapped)).sqrt();
    assert!((eff.fwhm_nm() - oracle).abs() < 1e-12);
    let wrong_pump = PumpSpec::new(750.0, 4.5).unwrap();
    assert!(heralded_bandwidth(&signal, &herald, &wrong_pump).is_err());
}

#[test]
fn partial_overlap_coincidence_through_modes() {
    for q in [0.0, 0.3, 0.77, 1.0] {
        let modes = decompose_modes(Complex64::new(f64::sqrt(q), 0.0)).unwrap();
        let total = modes.matched.norm_sqr() + modes.orthogonal.norm_sqr();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((modes.overlap_sqr() - q).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn heralding_never_widens(signal_fwhm in 0.5f64..50.0, herald_fwhm in 0.5f64..50.0) {
        let signal = FilterSpec::new(1310.0, signal_fwhm).unwrap();
        let herald = FilterSpec::new(1550.0, herald_fwhm).unwrap();
        let pump = PumpSpec::new(1.0 / (1.0 / 1310.0 + 1.0 / 1550.0), 1.0).unwrap();
        let eff = heralded_bandwidth(&signal, &herald, &pump).unwrap();
        prop_assert!(eff.fwhm_nm() <= signal_fwhm);
        prop_assert!(coherence_length(&eff).um >= coherence_length(&signal).um);
    }

    #[test]
    fn narrower_filter_longer_coherence(a in 0.5f64..50.0, b in 0.5f64..50.0) {
        prop_assume!(a < b);
        let la = coherence_length(&FilterSpec::new(1310.0, a).unwrap()).um;
        let lb = coherence_length(&FilterSpec::new(1310.0, b).unwrap()).um;
        prop_assert!(la > lb);
    }

    #[test]
    fn overlap_half_at_half_dip_width(lc in 10.0f64..500.0) {
        let ctx = DistinguishabilityContext::new(dip_fwhm_um(lc) / 2.0, lc);
        prop_assert!((overlap_amplitude(&ctx).norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn overlap_bounded_and_monotone(lc in 10.0f64..500.0, d1 in 0.0f64..1000.0, d2 in 0.0f64..1000.0,
                                    angle in -3.2f64..3.2, mismatch in 0.0f64..=1.0) {
        let m = |d: f64| {
            let mut ctx = DistinguishabilityContext::new(d, lc);
            ctx.polarization_angle = angle;
            ctx.spectral_mismatch = mismatch;
            overlap_amplitude(&ctx).norm_sqr()
        };
        prop_assert!((0.0..=1.0).contains(&m(d1)));
        if d1 < d2 {
            prop_assert!(m(d1) >= m(d2));
        }
        prop_assert!((m(-d1) - m(d1)).abs() < 1e-15);
    }

    #[test]
    fn pair_probability_round_trip(p in 0.0f64..0.9) {
        let s = SourceParams::from_pair_probability(p).unwrap();
        prop_assert!((s.pair_probability() - p).abs() < 1e-12);
        prop_assert!((s.gamma().powi(2) - s.lambda()).abs() < 1e-15);
        prop_assert!((s.g() - s.zeta().cosh().ln()).abs() < 1e-15);
    }
}
