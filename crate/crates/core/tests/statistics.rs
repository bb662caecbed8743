//! Monte Carlo checks of the simulator, counter and estimators against
//! closed-form expectations.

use rayon::prelude::*;

use heralded::bell::{simulate_chsh_trials, EntangledModel};
use heralded::coincidence::{count_coincidences, heralding_ratio, CoincidenceConfig, CountsSummary};
use heralded::correction::{propagate_errors, solve_inverse, CountModel, PropagationMode, WindowParams};
use heralded::pipeline::ZSummary;
use heralded::sim::{generate_pairs, simulate, simulate_trial, thin_and_jitter_trial, SourceModel};
use heralded::stream::Channel;
use heralded::trace::{discriminate, pulse_heights, synthesize, DiscriminatorConfig, Polarity, PulseShape};

const NS: i64 = 1_000;
const US: i64 = 1_000_000;
const S: i64 = 1_000_000_000_000;

fn quiet(rate: f64, e1: f64, e2: f64, secs: i64, seed: u64) -> SourceModel {
    SourceModel {
        pair_rate_hz: rate,
        eta_signal: e1,
        eta_herald: e2,
        deadtime_signal_ps: 0,
        deadtime_herald_ps: 0,
        jitter_fwhm_signal_ps: 0,
        jitter_fwhm_herald_ps: 0,
        background_rate_signal_hz: 0.0,
        background_rate_herald_hz: 0.0,
        duration_ps: secs * S,
        rng_seed: seed,
    }
}

fn reference_window() -> WindowParams {
    WindowParams { tau_w_ps: 1_050_000, tau_max_ps: 1_000_000, tau_d_signal_ps: 50_000, tau_d_herald_ps: 1_000_000 }
}

fn reference_counts() -> CountsSummary {
    CountsSummary::from_rates(46_855.2, 6_525.0, 5_418.8, 100.0).unwrap()
}

#[test]
fn pair_count_at_reference_rate() {
    let pairs = generate_pairs(&quiet(57_000.0, 1.0, 1.0, 100, 4)).unwrap();
    let mean = 5.7e6;
    assert!((pairs.len() as f64 - mean).abs() < 4.0 * mean.sqrt(), "{}", pairs.len());
}

#[test]
fn thinning_is_unbiased_over_many_trials() {
    let model = quiet(10_000.0, 1.0, 1.0, 1, 21);
    let pairs = generate_pairs(&model).unwrap();
    for eta in [0.1, 0.5, 0.9] {
        let mut m = model.clone();
        m.eta_signal = eta;
        let fractions: Vec<f64> = (0..100u64)
            .into_par_iter()
            .map(|k| thin_and_jitter_trial(&pairs, Channel::Signal, &m, k).unwrap().len() as f64 / pairs.len() as f64)
            .collect();
        let mean = fractions.iter().sum::<f64>() / 100.0;
        let sigma = (eta * (1.0 - eta) / (pairs.len() as f64 * 100.0)).sqrt();
        assert!((mean - eta).abs() < 5.0 * sigma, "eta {eta}: mean {mean}");
    }
}

#[test]
fn kept_fraction_matches_analog_arm_efficiency() {
    let mut m = quiet(100_000.0, 0.83, 1.0, 10, 2);
    m.eta_signal = 0.83;
    let pairs = generate_pairs(&m).unwrap();
    let kept = thin_and_jitter_trial(&pairs, Channel::Signal, &m, 0).unwrap().len() as f64 / pairs.len() as f64;
    assert!((kept - 0.83).abs() < 0.002, "{kept}");
}

#[test]
fn signal_background_lifts_singles_above_pair_rate_share() {
    let mut m = quiet(57_200.0, 0.822, 0.115, 10, 9);
    m.background_rate_signal_hz = 5_000.0;
    let (s, h) = simulate(&m).unwrap();
    let c = count_coincidences(&s, &h, &CoincidenceConfig::default()).unwrap();
    assert!(c.singles_signal_hz > m.pair_rate_hz * m.eta_signal + 4_000.0);
    // herald-gated coincidences barely move: background only adds accidentals
    let ratio = heralding_ratio(&c).unwrap().ratio;
    assert!((ratio - 0.822).abs() < 0.02, "{ratio}");
}

#[test]
fn saturation_law_holds_up_to_a_tenth() {
    for (a, tau_ps) in [(2e4, US), (1e5, US), (4e5, 50 * NS)] {
        let mut m = quiet(a, 1.0, 1.0, 5, 77);
        m.deadtime_signal_ps = tau_ps;
        let (s, _) = simulate(&m).unwrap();
        let expected = a / (1.0 + a * tau_ps as f64 * 1e-12);
        // the counting variance of a dead-time-limited process shrinks by
        // (1 + A tau)^-2 relative to Poisson; the Poisson bound is looser
        let sigma = (expected * 5.0).sqrt() / 5.0;
        assert!((s.rate_hz() - expected).abs() < 3.0 * sigma, "A={a}: {} vs {expected}", s.rate_hz());
    }
}

#[test]
fn accidental_floor_of_independent_streams() {
    let (r1, r2) = (5_000.0, 2_000.0);
    let mut m = quiet(0.0, 1.0, 1.0, 100, 31);
    m.background_rate_signal_hz = r1;
    m.background_rate_herald_hz = r2;
    let cfg = CoincidenceConfig::default();
    let tau_w = cfg.window_ps() as f64 * 1e-12;
    let rates: Vec<f64> = (0..30u64)
        .into_par_iter()
        .map(|k| {
            let (s, h) = simulate_trial(&m, k).unwrap();
            count_coincidences(&s, &h, &cfg).unwrap().coincidences_hz
        })
        .collect();
    let mean = rates.iter().sum::<f64>() / 30.0;
    let expected = r1 * r2 * tau_w;
    let sem = (expected / (100.0 * 30.0)).sqrt();
    assert!((mean - expected).abs() < 3.0 * sem, "{mean} vs {expected} (sem {sem})");
}

#[test]
fn saturation_suppresses_coincidences_by_r11() {
    let mut m = quiet(40_000.0, 0.9, 0.9, 30, 12);
    m.deadtime_signal_ps = 50 * NS;
    m.deadtime_herald_ps = US;
    let cfg = CoincidenceConfig::default();
    let (s, h) = simulate(&m).unwrap();
    let c = count_coincidences(&s, &h, &cfg).unwrap();
    let (r, e1, e2) = (m.pair_rate_hz, m.eta_signal, m.eta_herald);
    let cc0 = r * e1 * e2;
    let r10 = 0.5 * 1.05e-6 * r * r * e1 * (1.0 - e1) * e2 * (1.0 - e2);
    let r11 = -1e-6 * r * r * e1 * e1 * e2 * e2;
    let sigma = (c.coincidence_counts as f64).sqrt() / c.duration_s;
    assert!(cc0 - c.coincidences_hz > 10.0 * sigma, "no visible suppression");
    let predicted = cc0 + 2.0 * r10 + r11;
    assert!((c.coincidences_hz - predicted).abs() < 3.0 * sigma, "{} vs {predicted}", c.coincidences_hz);
}

#[test]
fn reference_solution_reproduces_measured_coincidences() {
    let est = solve_inverse(&reference_counts(), &reference_window()).unwrap();
    let mut m = SourceModel::reference_setup(404);
    m.pair_rate_hz = est.pair_rate_hz;
    m.eta_signal = est.eta_signal;
    m.eta_herald = est.eta_herald;
    let (s, h) = simulate(&m).unwrap();
    let c = count_coincidences(&s, &h, &CoincidenceConfig::default()).unwrap();
    let sigma = (5_418.8_f64 * 100.0).sqrt() / 100.0;
    assert!((c.coincidences_hz - 5_418.8).abs() < 3.0 * sigma, "{}", c.coincidences_hz);
    let sigma1 = (46_855.2_f64 * 100.0).sqrt() / 100.0;
    assert!((c.singles_signal_hz - 46_855.2).abs() < 4.0 * sigma1, "{}", c.singles_signal_hz);
}

#[test]
fn jacobian_and_monte_carlo_errors_agree() {
    let w = reference_window();
    for model in [CountModel::Independent, CountModel::SharedCoincidences] {
        let j = propagate_errors(&reference_counts(), &w, PropagationMode::Jacobian, model).unwrap();
        let mc =
            propagate_errors(&reference_counts(), &w, PropagationMode::MonteCarlo { draws: 20_000, seed: 5 }, model)
                .unwrap();
        for (a, b) in [
            (j.sigma_eta_signal, mc.sigma_eta_signal),
            (j.sigma_eta_herald, mc.sigma_eta_herald),
            (j.sigma_pair_rate, mc.sigma_pair_rate),
        ] {
            assert!((a / b - 1.0).abs() < 0.1, "{model:?}: {a} vs {b}");
        }
    }
}

/// Delay from arrival to the half-maximum crossing of the normalized
/// `(1 - exp(-t/rise)) exp(-t/decay)` kernel, by bisection on the rising edge.
fn half_max_lag_ps(rise: f64, decay: f64) -> f64 {
    let k = |t: f64| (1.0 - (-t / rise).exp()) * (-t / decay).exp();
    let peak_t = rise * (1.0 + decay / rise).ln();
    let half = 0.5 * k(peak_t);
    let (mut lo, mut hi) = (0.0, peak_t);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if k(mid) < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn discriminator_recovers_isolated_pulses() {
    let (rise, decay) = (10 * NS, 200 * NS);
    let shape = PulseShape::new(1.0, rise, decay).unwrap();
    let times: Vec<i64> = (0..200).map(|k| 10 * US + k * 40 * US + (k * 7_919) % 5_000).collect();
    // noise a hundredth of the amplitude, spacing and re-arm far beyond the pulse
    let w = synthesize(&times, &shape, 0.01, 8_100 * US, NS, 8).unwrap();
    let cfg = DiscriminatorConfig { threshold: 0.5, rearm_dead_ps: 20 * US, polarity: Polarity::Positive };
    let found = discriminate(&w, &cfg, Channel::Herald).unwrap();
    assert_eq!(found.len(), times.len());
    let lag = half_max_lag_ps(rise as f64, decay as f64);
    for (f, t) in found.timestamps().iter().zip(&times) {
        let err = *f as f64 - (*t as f64 + lag);
        assert!(err.abs() <= NS as f64, "event at {t}: found {f}, error {err} ps");
    }
}

#[test]
fn pulse_heights_are_bimodal_with_pileup_at_twice_amplitude() {
    let shape = PulseShape::new(1.0, 50 * NS, 500 * NS).unwrap();
    // isolated photons plus pairs arriving within one rise time
    let mut times = Vec::new();
    for k in 0..300 {
        let t = 10 * US + k * 30 * US;
        times.push(t);
        if k % 10 == 0 {
            times.push(t + 20 * NS);
        }
    }
    let w = synthesize(&times, &shape, 0.04, 9_100 * US, NS, 3).unwrap();
    let cfg = DiscriminatorConfig { threshold: 0.4, rearm_dead_ps: 10 * US, polarity: Polarity::Positive };
    let heights = pulse_heights(&w, &cfg).unwrap();
    let count = |lo: f64, hi: f64| heights.iter().filter(|&&h| (lo..hi).contains(&h)).count();
    assert_eq!(heights.len(), 300);
    assert_eq!(count(0.85, 1.3), 270);
    assert_eq!(count(1.7, 2.3), 30);
    assert_eq!(count(1.3, 1.7), 0);
}

#[test]
fn chsh_spread_matches_reported_error() {
    let m = EntangledModel::new(0.8874);
    let runs = simulate_chsh_trials(&m, 1e4 / m.detection_probability(), 1.0, 99, 100).unwrap();
    let spread = ZSummary::of(runs.iter().map(|r| r.s)).std_dev;
    let reported = runs.iter().map(|r| r.std_error).sum::<f64>() / runs.len() as f64;
    assert!((spread / reported - 1.0).abs() < 0.2, "{spread} vs {reported}");
}
