use proptest::prelude::*;

use heralded::bell::{chsh_s, AnalyzerAngles, EntangledModel};
use heralded::coincidence::{count_coincidences, CoincidenceConfig};
use heralded::correction::{
    accidental_rate, forward_cc, forward_cc_factored, forward_singles, solve_rates, WindowParams,
};
use heralded::sim::apply_dead_time;
use heralded::stream::{Channel, EventStream};
use heralded::trace::{discriminate, synthesize, Discriminator, DiscriminatorConfig, Polarity, PulseShape};

const DURATION: i64 = 1_000_000_000;

fn sorted_unique(max_len: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::btree_set(0..DURATION, 0..max_len).prop_map(|s| s.into_iter().collect())
}

fn stream(ch: Channel, t: Vec<i64>) -> EventStream {
    EventStream::new(ch, t, DURATION).unwrap()
}

/// Drops events that would overlap the previous kept pulse of length `len`.
fn spaced(t: Vec<i64>, len: i64) -> Vec<i64> {
    let mut out: Vec<i64> = Vec::new();
    for x in t {
        if out.last().is_none_or(|&l| x - l >= len) {
            out.push(x);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn coincidences_symmetric_under_swap(
        a in sorted_unique(300),
        b in sorted_unique(300),
        la in 4_000i64..2_000_000,
        lb in 4_000i64..2_000_000,
    ) {
        let cfg = CoincidenceConfig { pulse_len_signal_ps: la, pulse_len_herald_ps: lb, min_overlap_ps: 3_000, delay_offset_ps: 0 };
        let swapped = CoincidenceConfig { pulse_len_signal_ps: lb, pulse_len_herald_ps: la, ..cfg };
        let x = count_coincidences(&stream(Channel::Signal, a.clone()), &stream(Channel::Herald, b.clone()), &cfg).unwrap();
        let y = count_coincidences(&stream(Channel::Signal, b), &stream(Channel::Herald, a), &swapped).unwrap();
        prop_assert_eq!(x.coincidence_counts, y.coincidence_counts);
    }

    #[test]
    fn coincidences_grow_with_pulse_length(
        a in sorted_unique(300),
        b in sorted_unique(300),
        la in 4_000i64..1_000_000,
        lb in 4_000i64..1_000_000,
        extra in 0i64..1_000_000,
        which in any::<bool>(),
    ) {
        let (la2, lb2) = if which { (la + extra, lb) } else { (la, lb + extra) };
        // same-channel pulses stay disjoint even at the longer length
        let a = spaced(a, la2);
        let b = spaced(b, lb2);
        let short = CoincidenceConfig { pulse_len_signal_ps: la, pulse_len_herald_ps: lb, min_overlap_ps: 3_000, delay_offset_ps: 0 };
        let long = CoincidenceConfig { pulse_len_signal_ps: la2, pulse_len_herald_ps: lb2, ..short };
        let s = stream(Channel::Signal, a);
        let h = stream(Channel::Herald, b);
        let n_short = count_coincidences(&s, &h, &short).unwrap().coincidence_counts;
        let n_long = count_coincidences(&s, &h, &long).unwrap().coincidence_counts;
        prop_assert!(n_long >= n_short);
        prop_assert!(n_long <= s.len().min(h.len()) as u64);
    }

    #[test]
    fn dead_time_leaves_gaps(t in sorted_unique(500), tau in 0i64..50_000_000) {
        let out = apply_dead_time(&stream(Channel::Signal, t.clone()), tau).unwrap();
        prop_assert!(out.timestamps().windows(2).all(|w| w[1] - w[0] >= tau));
        // every dropped event falls inside the dead-time of a kept one
        for x in &t {
            let idx = out.timestamps().partition_point(|&k| k <= *x);
            prop_assert!(idx > 0 && x - out.timestamps()[idx - 1] < tau.max(1));
        }
    }

    #[test]
    fn decomposition_and_round_trip(
        r in 100.0f64..2e5,
        e1 in 0.01f64..0.99,
        e2 in 0.01f64..0.99,
        tau_w in 10_000i64..2_000_000,
        tau_max in 5_000i64..2_000_000,
        d1 in 0i64..1_000_000,
        d2 in 0i64..1_000_000,
    ) {
        let w = WindowParams { tau_w_ps: tau_w, tau_max_ps: tau_max.min(tau_w), tau_d_signal_ps: d1, tau_d_herald_ps: d2 };
        prop_assume!(r * w.tau_w_s() < 0.1);
        let t = accidental_rate(r, e1, e2, &w).unwrap();
        prop_assert_eq!(t.r10, t.r01);
        let cc = forward_cc(r, e1, e2, &w).unwrap();
        prop_assert!(((r * e1 * e2 + t.total()) / cc - 1.0).abs() < 1e-12);
        prop_assert!((forward_cc_factored(r, e1, e2, &w).unwrap() / cc - 1.0).abs() < 1e-12);
        prop_assume!(cc > 0.0);
        let s1 = forward_singles(r, e1, w.tau_d_signal_s()).unwrap();
        let s2 = forward_singles(r, e2, w.tau_d_herald_s()).unwrap();
        let sol = solve_rates(s1, s2, cc, &w).unwrap();
        prop_assert!((sol.pair_rate_hz / r - 1.0).abs() < 1e-8);
        prop_assert!((sol.eta_signal / e1 - 1.0).abs() < 1e-8);
        prop_assert!((sol.eta_herald / e2 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn chsh_never_exceeds_tsirelson(
        v in 0.0f64..=1.0,
        a in -3.2f64..3.2,
        ap in -3.2f64..3.2,
        b in -3.2f64..3.2,
        bp in -3.2f64..3.2,
    ) {
        let mut m = EntangledModel::new(v);
        m.angles = AnalyzerAngles { a, a_prime: ap, b, b_prime: bp };
        prop_assert!(chsh_s(&m).abs() <= 2.0 * 2f64.sqrt() * v + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn chunked_discrimination_matches_single_pass(
        events in prop::collection::btree_set(0i64..400_000_000, 0..40),
        noise in 0.0f64..0.3,
        threshold in 0.05f64..1.2,
        rearm in 0i64..3_000_000,
        chunks in prop::collection::vec(1usize..5_000, 1..20),
        seed in any::<u64>(),
    ) {
        let events: Vec<i64> = events.into_iter().collect();
        let shape = PulseShape::new(1.0, 20_000, 300_000).unwrap().with_wiggle(0.2, 150_000);
        let w = synthesize(&events, &shape, noise, 400_000_000, 1_000, seed).unwrap();
        let cfg = DiscriminatorConfig { threshold, rearm_dead_ps: rearm, polarity: Polarity::Positive };
        let whole = discriminate(&w, &cfg, Channel::Signal).unwrap();
        let mut d = Discriminator::new(cfg, w.sample_period_ps(), w.t0_ps()).unwrap();
        let mut rest = w.samples();
        let mut i = 0;
        while !rest.is_empty() {
            let n = chunks[i % chunks.len()].min(rest.len());
            d.feed(&rest[..n]);
            rest = &rest[n..];
            i += 1;
        }
        let (times, _) = d.finish();
        prop_assert_eq!(whole.timestamps(), times.as_slice());
        prop_assert!(times.windows(2).all(|p| p[1] - p[0] >= rearm));
    }
}
