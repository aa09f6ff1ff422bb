//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.
//!
//! Runs as a plain binary (`harness = false`):
//! `cargo test -p peakstream --test acceptance`.

mod support;

use std::process::ExitCode;
use std::time::Instant;

use peakstream::reservoir::active_bound;
use peakstream::scenario::{SDS_MERGE, SDS_SPLIT};
use peakstream::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// Incremental state equals recomputation every 100 points of a 10k stream.
fn oracle_equivalence() -> Outcome {
    let pts: Vec<StreamPoint> = sds_points().into_iter().take(10_000).collect();
    let mut cfg = sds_config();
    cfg.sweep_interval = 100;
    let (mut e, _) = Engine::initialize(cfg, &pts[..INIT_POINTS]).expect("init");
    let mut checks = 0;
    for (k, p) in pts[INIT_POINTS..].iter().enumerate() {
        e.process_point(p).expect("process");
        if (k + 1) % 100 != 0 {
            continue;
        }
        let res = check_against_oracle(&e)
            .and_then(|_| check_partition(&e))
            .and_then(|_| check_snapshot(&e))
            .and_then(|_| e.check_invariants().map_err(|x| x.to_string()));
        if let Err(msg) = res {
            return outcome(false, format!("at point {}: {msg}", INIT_POINTS + k + 1));
        }
        checks += 1;
    }
    outcome(checks == 90, format!("{checks} checkpoints matched"))
}

/// Filters change the work done, not the output.
fn filter_soundness() -> Outcome {
    let pts = sds_points();
    let mut runs = Vec::new();
    for mode in [FilterMode::Both, FilterMode::DensityOnly, FilterMode::Off] {
        let mut cfg = sds_config();
        cfg.filters = mode;
        runs.push(run_with(cfg, &pts, INIT_POINTS));
    }
    let same = runs.iter().all(|r| {
        r.events_jsonl() == runs[0].events_jsonl()
            && r.snapshots_json() == runs[0].snapshots_json()
            && r.snapshots_csv() == runs[0].snapshots_csv()
    });
    let evals: Vec<u64> = runs
        .iter()
        .map(|r| r.engine.counters().dependency.distance_evals)
        .collect();
    let detail = format!(
        "outputs identical: {same}; distance evals both={} density-only={} off={} (off/both = {:.2})",
        evals[0],
        evals[1],
        evals[2],
        evals[2] as f64 / evals[0].max(1) as f64
    );
    outcome(same && evals[0] < evals[2], detail)
}

/// Iterated decay-then-add agrees with summing each point's freshness.
///
/// The reference sum uses the exact power for every term. The per-point
/// `freshness` flushes weights under 1e-12 to zero, so summing it instead
/// drifts by up to n·1e-12 in absolute terms; that drift is reported too.
fn decay_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut worst_flushed: f64 = 0.0;
    for _ in 0..10_000 {
        let a = rng.random_range(0.5..0.9999);
        let lambda = rng.random_range(0.1..3.0);
        let v = rng.random_range(10.0..5000.0);
        let beta = (1.0 - f64::powf(a, lambda)) / v * rng.random_range(1.01..3.0);
        let p = DecayParams::new(a, lambda, v, beta).expect("params");
        let n = rng.random_range(1..200);
        let mut t = rng.random_range(0.0..100.0);
        let mut times = vec![t];
        let mut rho = 1.0;
        for _ in 1..n {
            let next = t + rng.random_range(0.0..2.0);
            rho = p.absorb(rho, t, next).expect("absorb");
            t = next;
            times.push(t);
        }
        let end = t + rng.random_range(0.0..5.0);
        let iterated = p.decay_density(rho, t, end).expect("decay");
        let exact: f64 = times.iter().map(|&ti| a.powf(lambda * (end - ti))).sum();
        let flushed: f64 = times.iter().map(|&ti| p.freshness(ti, end).unwrap()).sum();
        worst = worst.max(rel(iterated, exact));
        worst_flushed = worst_flushed.max(rel(iterated, flushed));
    }
    outcome(
        worst <= 1e-9,
        format!(
            "worst relative error {worst:.2e} over 10000 sequences \
             ({worst_flushed:.2e} against the sum of flushed per-point weights)"
        ),
    )
}

/// Reference-parameter numerics and the reservoir and active-set bounds.
fn bounds() -> Outcome {
    let reference = EngineConfig::parse(REFERENCE_CONF).expect("reference.conf");
    let p = reference.decay;
    let thr = p.active_threshold();
    let total = p.total_freshness();
    let h = p.deletion_horizon();
    let cap = capacity_bound(&p);
    let act = active_bound(&p);
    let numeric = rel(thr, 1050.0) <= 1e-6
        && rel(total, 500_000.0) <= 1e-6
        && rel(h.seconds, 3.4748) <= 1e-6
        && cap == 3951
        && act == 477;

    // learning α needs active cells at initialization, which this decay rate
    // does not produce within the buffer; reuse the one learned on sds.conf
    let pts = sds_points();
    let (probe, _) = Engine::initialize(sds_config(), &pts[..INIT_POINTS]).expect("init");
    let mut cfg = reference.clone();
    cfg.alpha = Some(probe.alpha());
    let (mut e, _) = Engine::initialize(cfg, &pts[..INIT_POINTS]).expect("init");
    let mut max_active = 0;
    let mut max_res = e.reservoir().len();
    for p in &pts[INIT_POINTS..] {
        e.process_point(p).expect("process");
        max_active = max_active.max(e.tree().len());
        max_res = max_res.max(e.reservoir().len());
    }
    // the 20 s planted run barely activates anything at this decay rate, so
    // the active bound is also checked on a long stationary stream
    let steady = stationary().generate(11).expect("stationary stream");
    let (mut s, _) = Engine::initialize(e.config().clone(), &steady[..INIT_POINTS]).expect("init");
    let mut steady_active = 0;
    let mut steady_res = 0;
    for p in &steady[INIT_POINTS..] {
        s.process_point(p).expect("process");
        steady_active = steady_active.max(s.tree().len());
        steady_res = steady_res.max(s.reservoir().len());
    }
    let sized = max_active.max(steady_active) as u64 <= act && (max_res.max(steady_res) as u64) < cap;
    outcome(
        numeric && sized,
        format!(
            "threshold {thr}, total freshness {total}, horizon {:.7} s (rel err {:.1e}), \
             capacity {cap}, active bound {act}; sds: max active {max_active}, max reservoir {max_res}; \
             stationary 60 s: max active {steady_active}, max reservoir {steady_res}",
            h.seconds,
            rel(h.seconds, 3.4748)
        ),
    )
}

/// Eight fixed Gaussian sources and 10% noise for 60 s.
fn stationary() -> PlantedScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sources = (0..8)
        .map(|i| {
            let at = [rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)];
            Source::fixed(&format!("s{i}"), &at, 2.0, 112.5)
        })
        .collect();
    PlantedScenario {
        name: "stationary".into(),
        dim: 2,
        v: 1000.0,
        lo: vec![0.0, 0.0],
        hi: vec![30.0, 30.0],
        epochs: vec![Epoch {
            start: 0.0,
            end: 60.0,
            sources,
            noise: 100.0,
        }],
    }
}

fn static_config() -> EngineConfig {
    let mut cfg = sds_config();
    cfg.adaptive_tau = false;
    cfg
}

/// The planted narrative as non-adjust events of the default adaptive run.
fn narrative(dynamic: &Run, fixed: &Run) -> Outcome {
    let want = [EventKind::Merge, EventKind::Emerge, EventKind::Disappear, EventKind::Split];
    let judge = |seq: &[(EventKind, f64)]| {
        let kinds: Vec<EventKind> = seq.iter().map(|s| s.0).collect();
        kinds == want && (seq[0].1 - SDS_MERGE).abs() <= 1.0 && seq[3].1 >= SDS_SPLIT
    };
    let dyn_seq = dynamic.structural();
    let fix_seq = fixed.structural();
    let shown: Vec<(EventKind, f64)> = dyn_seq.iter().take(12).copied().collect();
    outcome(
        judge(&dyn_seq),
        format!(
            "adaptive: {} events [{}{}]; fixed τ: {} [{}]",
            dyn_seq.len(),
            fmt_kinds(&shown),
            if dyn_seq.len() > shown.len() { " ..." } else { "" },
            if judge(&fix_seq) { "matches" } else { "differs" },
            fmt_kinds(&fix_seq)
        ),
    )
}

/// Adaptive τ keeps two clusters where fixed τ already sees one, before the
/// sources coincide.
fn divergence(dynamic: &Run, fixed: &Run) -> Outcome {
    let d = dynamic.cluster_counts();
    let s = fixed.cluster_counts();
    let hits: Vec<f64> = d
        .iter()
        .zip(&s)
        .filter(|((t, dc), (_, sc))| *t < 10.0 && *dc == 2 && *sc == 1)
        .map(|((t, _), _)| *t)
        .collect();
    let detail = match (hits.first(), hits.last()) {
        (Some(a), Some(b)) => format!("dynamic 2 vs static 1 at {} boundaries, t = {a:.1}..{b:.1} s", hits.len()),
        _ => "no boundary with dynamic 2 and static 1 before 10 s".to_string(),
    };
    outcome(!hits.is_empty(), detail)
}

/// Recycling must not change any boundary's clustering.
fn recycling_safety(with: &Run) -> Outcome {
    let mut cfg = sds_config();
    cfg.recycle = false;
    let without = run_with(cfg, &sds_points(), INIT_POINTS);
    let first_diff = with
        .snapshots
        .iter()
        .zip(&without.snapshots)
        .find(|(a, b)| a.clusters != b.clusters || a.tau != b.tau || a.time != b.time);
    let recycled = with.engine.counters().recycled;
    match first_diff {
        None if with.snapshots.len() == without.snapshots.len() => outcome(
            true,
            format!("{} boundaries identical; {recycled} cells recycled", with.snapshots.len()),
        ),
        None => outcome(false, "different boundary counts"),
        Some((a, b)) => {
            let n = with
                .snapshots
                .iter()
                .zip(&without.snapshots)
                .filter(|(a, b)| a.clusters != b.clusters || a.tau != b.tau)
                .count();
            outcome(
                false,
                format!(
                    "first difference at t = {:.1} s (clusters {} vs {}, τ {:.3} vs {:.3}); \
                     {n} of {} boundaries differ; {recycled} cells recycled",
                    a.time,
                    a.clusters.len(),
                    b.clusters.len(),
                    a.tau,
                    b.tau,
                    with.snapshots.len()
                ),
            )
        }
    }
}

fn throughput() -> Outcome {
    let pts = sds_points();
    let start = Instant::now();
    let run = run_with(sds_config(), &pts, INIT_POINTS);
    let secs = start.elapsed().as_secs_f64();
    let rate = pts.len() as f64 / secs;
    outcome(
        rate >= 10_000.0 && run.engine.store().points_seen() as usize == pts.len(),
        format!("{} points in {secs:.3} s = {rate:.0} points/s", pts.len()),
    )
}

fn properties() -> Outcome {
    let mut failed = Vec::new();
    for name in PROPERTIES {
        if let Err(msg) = run_property(name, 1000) {
            failed.push(format!("{name}: {msg}"));
        }
    }
    if failed.is_empty() {
        outcome(true, format!("{} suites x 1000 cases", PROPERTIES.len()))
    } else {
        outcome(false, failed.join("; "))
    }
}

fn main() -> ExitCode {
    let pts = sds_points();
    let dynamic = run_with(sds_config(), &pts, INIT_POINTS);
    let fixed = run_with(static_config(), &pts, INIT_POINTS);

    let results = [
        ("oracle equivalence", oracle_equivalence()),
        ("filter soundness", filter_soundness()),
        ("decay arithmetic", decay_arithmetic()),
        ("threshold and bound numerics", bounds()),
        ("evolution narrative", narrative(&dynamic, &fixed)),
        ("dynamic vs static threshold", divergence(&dynamic, &fixed)),
        ("recycling safety", recycling_safety(&dynamic)),
        ("throughput", throughput()),
        ("property suites", properties()),
    ];
    let mut ok = true;
    for (i, (name, o)) in results.iter().enumerate() {
        ok &= o.pass;
        println!(
            "{} {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
