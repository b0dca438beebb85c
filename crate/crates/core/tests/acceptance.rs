//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ultralola_core::accuracy::{
    d_max_ms, d_max_mv, expected_accuracy_mv, ln_nu_ms, mv_sign_function, surrogate_mv, ScenarioConfig, DEFAULT_ETA,
};
use ultralola_core::channel::{db_to_linear, decode_error_prob, LinkConfig};
use ultralola_core::gmm::{accuracy_lower_bound, binary_accuracy_exact, mc_classification_accuracy, GmmModel};
use ultralola_core::numerics::ln_q_function;
use ultralola_core::optimizer::{
    brute_force, mv_closed_form, mv_stationarity_residual, optimize_ms, optimize_mv, Method, Scenario,
};
use ultralola_core::simulator::{
    rows_to_csv, simulate_ms, simulate_mv, simulate_mv_with_workers, sweep, RowStatus, SweepRow, SweepSpec,
    SweepVariable,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scenario(t: f64, ds: f64, bw: f64, snr_db: f64, xi: f64, n: u32, qb: u32, l: usize, g: f64) -> ScenarioConfig {
    let link = LinkConfig::new(db_to_linear(snr_db), xi, bw, qb, n).unwrap();
    ScenarioConfig::new(t, ds, link, l, g, DEFAULT_ETA).unwrap()
}

/// Short-packet binary setting with minimum gain `g`.
fn short_packet(snr_db: f64, l: usize, g: f64) -> ScenarioConfig {
    scenario(1e-3, 2e-5, 2e5, snr_db, 0.95, 10, 8, l, g)
}

fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn finite_blocklength_sanity() -> Outcome {
    let mut worst_half = 0.0f64;
    // (snr, payload N*Q_B) with an integral capacity quotient
    for (snr, n, qb, d) in [(1.0, 20, 4, 80), (3.0, 20, 4, 40), (3.0, 10, 8, 40), (15.0, 20, 4, 20), (255.0, 20, 4, 10)]
    {
        let link = LinkConfig::new(snr, 1.0, 1e5, qb, n).unwrap();
        worst_half = worst_half.max((decode_error_prob(&link, d) - 0.5).abs());
    }
    let mut violations = 0;
    for snr in [1.0, 3.0, 9.0] {
        let link = LinkConfig::new(snr, 1.0, 1e5, 4, 20).unwrap();
        for d in 1..500u64 {
            let (e0, e1) = (decode_error_prob(&link, d), decode_error_prob(&link, d + 1));
            let (x0, x1) = (link.error_exponent(d as f64), link.error_exponent(d as f64 + 1.0));
            // compare in log space on the side where the f64 value saturates
            let strict = match (x0 >= 0.0, x1 >= 0.0) {
                (true, true) => ln_q_function(x1) < ln_q_function(x0),
                (false, false) => ln_q_function(-x1) > ln_q_function(-x0),
                (false, true) => true,
                (true, false) => false,
            };
            if !strict || e1 > e0 || (e0 < 1.0 && e1 > 0.0 && e1 >= e0) {
                violations += 1;
            }
        }
    }
    outcome(
        worst_half <= 1e-12 && violations == 0,
        format!("max |eps - 0.5| at capacity = {worst_half:.1e}, monotonicity violations = {violations}"),
    )
}

fn binary_exactness() -> Outcome {
    let trials = 1_000_000;
    let mut worst_z = 0.0f64;
    for (variance, g) in [(80.0, 1.0), (3.0, 80.0 / 3.0)] {
        let model = GmmModel::synthetic(2, 20, variance).unwrap();
        assert!((model.min_discriminant_gain() - g).abs() < 1e-12);
        for k in 1..=5u64 {
            let exact = binary_accuracy_exact(g, k);
            let sim = mc_classification_accuracy(&model, k as usize, trials, 100 + k);
            let sigma = binomial_sigma(exact, trials).max(1.0 / trials as f64);
            worst_z = worst_z.max((sim.accuracy - exact).abs() / sigma);
        }
    }
    outcome(worst_z <= 4.0, format!("max |MC - Q(-sqrt(Kg)/2)| = {worst_z:.2} sigma over 10 cells"))
}

fn bound_validity() -> Outcome {
    let trials = 200_000;
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    for l in [2usize, 4, 5, 10] {
        let model = GmmModel::synthetic(l, 20, 3.0).unwrap();
        let g = model.min_discriminant_gain();
        for k in 1..=8u64 {
            let sim = mc_classification_accuracy(&model, k as usize, trials, 1_000 + 10 * l as u64 + k);
            let bound = accuracy_lower_bound(l, g, k);
            let slack = sim.accuracy + 3.0 * sim.std_error() - bound;
            min_slack = min_slack.min(slack);
            if slack < 0.0 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("violations = {violations} of 32 cells, min slack = {min_slack:.4}"))
}

fn multiview_spot_value() -> Outcome {
    let exact = expected_accuracy_mv(2, 4.0, 2, 0.5);
    let model = GmmModel::equidistant(2, 4.0).unwrap();
    // lossless code at very high SNR, activation 0.5, two slots at D = 45
    let link = LinkConfig::new(1e6, 0.5, 1e5, 1, 1).unwrap();
    let cfg = ScenarioConfig::new(1e-3, 1e-4, link, 2, 4.0, DEFAULT_ETA).unwrap();
    let trials = 1_000_000;
    let sim = simulate_mv(&model, &cfg, 45, trials, 4);
    let z = (sim.accuracy - exact).abs() / binomial_sigma(exact, trials);
    outcome(
        (exact - 0.77601).abs() <= 1e-5 && z <= 3.0,
        format!("E_mv = {exact:.6}, simulated {:.5} ({z:.2} sigma)", sim.accuracy),
    )
}

fn ms_near_optimality() -> Outcome {
    let mut worst = 0.0f64;
    for l in [2, 3] {
        for snr in (0..=20).step_by(2) {
            let c = short_packet(snr as f64, l, 1.0);
            let ul = optimize_ms(&c).unwrap();
            let bf = brute_force(&c, Scenario::MultiSnapshot).unwrap();
            worst = worst.max(bf.predicted_accuracy - ul.predicted_accuracy);
        }
    }
    outcome(worst <= 0.01, format!("max gap to brute force = {worst:.2e} over 22 points"))
}

fn mv_closed_form_correctness() -> Outcome {
    let mut mismatches = Vec::new();
    let mut worst_residual = 0.0f64;
    let mut interior_points = 0;
    for snr in (2..=20).step_by(2) {
        let c2 = short_packet(snr as f64, 2, 4.0);
        let c3 = short_packet(snr as f64, 3, 4.0);
        let closed = mv_closed_form(&c2).unwrap();
        let d_max = d_max_mv(&c2).unwrap();
        let grid = (1..=d_max)
            .map(|d| (d, surrogate_mv(&c2, d as f64).unwrap().nu))
            .fold((0, f64::NEG_INFINITY), |best, (d, v)| if v > best.1 { (d, v) } else { best })
            .0;
        if closed.interior {
            interior_points += 1;
            let zeta = closed.zeta.unwrap();
            worst_residual = worst_residual.max(mv_stationarity_residual(zeta, closed.omega).abs());
            if closed.packet_len != grid {
                mismatches.push(format!("{snr} dB closed {} grid {grid}", closed.packet_len));
            }
        }
        let (p2, p3) = (optimize_mv(&c2).unwrap(), optimize_mv(&c3).unwrap());
        if p2.packet_len != grid || p3.packet_len != p2.packet_len {
            mismatches.push(format!("{snr} dB L=2 {} L=3 {} grid {grid}", p2.packet_len, p3.packet_len));
        }
    }
    outcome(
        mismatches.is_empty() && worst_residual < 1e-10 && interior_points > 0,
        format!(
            "interior points = {interior_points}/10, max residual = {worst_residual:.1e}, mismatches = {mismatches:?}"
        ),
    )
}

fn structural_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut concavity_violations = 0;
    let mut worst_excess = 0.0f64;
    for _ in 0..10_000 {
        let snr = rng.random_range(0.0..20.0);
        let l = if rng.random::<bool>() { 2 } else { 3 };
        let c = short_packet(snr, l, if rng.random::<bool>() { 1.0 } else { 4.0 });
        let hi = d_max_ms(&c).unwrap() as f64;
        let a = rng.random_range(1.0..hi);
        let b = rng.random_range(1.0..hi);
        let mid = 0.5 * (a + b);
        let (fa, fb, fm) = (ln_nu_ms(&c, a).unwrap(), ln_nu_ms(&c, b).unwrap(), ln_nu_ms(&c, mid).unwrap());
        let excess = 0.5 * (fa + fb) - fm;
        worst_excess = worst_excess.max(excess);
        if excess > 1e-12 {
            concavity_violations += 1;
        }
    }
    let mut decrease_violations = 0;
    for snr in (0..=20).step_by(2) {
        let c = short_packet(snr as f64, 2, 4.0);
        let d_max = d_max_mv(&c).unwrap();
        let g: Vec<f64> = (1..=d_max).map(|d| mv_sign_function(&c, d as f64)).collect();
        decrease_violations += g.windows(2).filter(|w| !(w[1] < w[0])).count();
    }
    outcome(
        concavity_violations == 0 && decrease_violations == 0,
        format!(
            "log-concavity violations = {concavity_violations}/10000 (max excess {worst_excess:.1e}), \
             g(D) non-decreasing steps = {decrease_violations}"
        ),
    )
}

fn baseline_dominance() -> Outcome {
    let model = GmmModel::synthetic(10, 20, 3.0).unwrap();
    let base = scenario(1e-3, 1e-4, 1e5, 10.0, 1.0 - 1e-5, 20, 4, 10, model.min_discriminant_gain());
    let mut notes = Vec::new();
    let mut pass = true;
    for (scn, ul) in [(Scenario::MultiSnapshot, Method::UltraLoLaMs), (Scenario::MultiView, Method::UltraLoLaMv)] {
        let spec = SweepSpec {
            scenario: scn,
            variable: SweepVariable::SnrDb,
            grid: (0..=20).map(f64::from).collect(),
            methods: vec![ul, Method::Urllc, Method::ShannonRate],
            trials: 100_000,
            seed: 2024,
            workers: ultralola_core::mc::default_workers(),
        };
        let rows = sweep(&model, &base, &spec).unwrap();
        let mut worst_deficit = f64::NEG_INFINITY;
        let mut best_mid_margin = f64::NEG_INFINITY;
        for point in rows.chunks(3) {
            let acc = |r: &SweepRow| if r.status == RowStatus::Ok { r.empirical_accuracy } else { None };
            let Some(ours) = acc(&point[0]) else {
                pass = false;
                notes.push(format!("{} at {} dB not ok", ul.as_str(), point[0].sweep_value));
                continue;
            };
            let baselines: Vec<f64> = point[1..].iter().filter_map(acc).collect();
            if let Some(best) = baselines.iter().copied().reduce(f64::max) {
                worst_deficit = worst_deficit.max(best - ours);
            }
            let snr = point[0].sweep_value;
            if (5.0..=15.0).contains(&snr) {
                // a failed baseline counts as random guessing
                let weakest = point[1..].iter().map(|r| acc(r).unwrap_or(0.1)).fold(f64::INFINITY, f64::min);
                best_mid_margin = best_mid_margin.max(ours - weakest);
            }
        }
        let ok = worst_deficit <= 0.01 && best_mid_margin >= 0.03;
        pass &= ok;
        notes.push(format!(
            "{}: max deficit {worst_deficit:.4}, best mid-SNR margin {best_mid_margin:.4}",
            scn.as_str()
        ));
    }
    outcome(pass, notes.join("; "))
}

fn tradeoff_shape() -> Outcome {
    let model = GmmModel::synthetic(2, 10, 10.0).unwrap();
    let c = short_packet(5.0, 2, model.min_discriminant_gain());
    let trials = 100_000;
    let mut notes = Vec::new();
    let mut pass = true;
    for scn in [Scenario::MultiSnapshot, Scenario::MultiView] {
        let hi = match scn {
            Scenario::MultiSnapshot => d_max_ms(&c).unwrap(),
            Scenario::MultiView => d_max_mv(&c).unwrap(),
        };
        let grid: Vec<u64> = (1..=hi).step_by(5).collect();
        let curve: Vec<(f64, f64)> = grid
            .iter()
            .map(|&d| {
                let s = match scn {
                    Scenario::MultiSnapshot => simulate_ms(&model, &c, d, trials, 9),
                    Scenario::MultiView => simulate_mv(&model, &c, d, trials, 9),
                };
                (s.accuracy, s.std_error())
            })
            .collect();
        let peak = (0..curve.len()).max_by(|&a, &b| curve[a].0.total_cmp(&curve[b].0)).unwrap();
        let sep = |i: usize| {
            let s = (curve[peak].1.powi(2) + curve[i].1.powi(2)).sqrt().max(1.0 / trials as f64);
            (curve[peak].0 - curve[i].0) / s
        };
        let left = (0..peak).map(sep).fold(f64::NEG_INFINITY, f64::max);
        let right = (peak + 1..curve.len()).map(sep).fold(f64::NEG_INFINITY, f64::max);
        let ok = left > 5.0 && right > 5.0;
        pass &= ok;
        notes.push(format!(
            "{}: peak {:.4} at D = {}, separation left {left:.1} sigma, right {right:.1} sigma",
            scn.as_str(),
            curve[peak].0,
            grid[peak]
        ));
    }
    outcome(pass, notes.join("; "))
}

fn determinism() -> Outcome {
    let model = GmmModel::synthetic(5, 20, 3.0).unwrap();
    let base = scenario(1e-3, 1e-4, 1e5, 10.0, 1.0 - 1e-5, 20, 4, 5, model.min_discriminant_gain());
    let run = |workers: usize, scn: Scenario| {
        let spec = SweepSpec {
            scenario: scn,
            variable: SweepVariable::SnrDb,
            grid: vec![0.0, 4.0, 8.0, 12.0],
            methods: vec![Method::UltraLoLaMs, Method::BruteForce, Method::Urllc, Method::ShannonRate],
            trials: 20_000,
            seed: 77,
            workers,
        };
        rows_to_csv(&sweep(&model, &base, &spec).unwrap())
    };
    let mut pass = true;
    for scn in [Scenario::MultiSnapshot, Scenario::MultiView] {
        let serial = run(1, scn);
        pass &= serial == run(1, scn) && serial == run(4, scn) && serial == run(7, scn);
    }
    let a = simulate_mv_with_workers(&model, &base, 30, 50_001, 5, 1);
    let b = simulate_mv_with_workers(&model, &base, 30, 50_001, 5, 6);
    pass &= a == b;
    outcome(pass, "reruns and 1/4/7-worker sweeps byte-identical; 1 vs 6 worker simulation equal")
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("finite-blocklength sanity", finite_blocklength_sanity, Some(Duration::from_secs(1))),
        ("binary accuracy exactness", binary_exactness, Some(Duration::from_secs(60))),
        ("classification bound validity", bound_validity, Some(Duration::from_secs(300))),
        ("multi-view exact bound spot value", multiview_spot_value, None),
        ("multi-snapshot closed form near-optimal", ms_near_optimality, Some(Duration::from_secs(30))),
        ("multi-view closed form correctness", mv_closed_form_correctness, None),
        ("structural properties", structural_properties, None),
        ("baseline dominance", baseline_dominance, Some(Duration::from_secs(600))),
        ("tradeoff shape", tradeoff_shape, None),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let elapsed = start.elapsed();
        let pass = out.pass && budget.is_none_or(|b| elapsed <= b);
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.2} s{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.map(|b| format!(", budget {} s", b.as_secs())).unwrap_or_default()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
