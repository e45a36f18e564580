//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chainfree::critical::expectation_exponent;
use chainfree::enumeration::{expected_valid_count, monte_carlo_valid_count, mu_contained_enumerated, mu_valid_within, CountOptions};
use chainfree::lattice::{for_each_maximal_chain_below, Band, Element};
use chainfree::patterns::{augment_with_all_chains, big_l, is_violating_sequence, ChainPattern, ColorId, ColorSet, ForbiddenFamily};
use chainfree::supersat::{audit_codegrees, build_balanced, check_boundlem_many, check_pointwise, ChainMode};
use chainfree::templates::{best_anchor, count_contained, layered_template, mu_contained_closed_form, template_is_valid};
use chainfree::{branching_run, mu_valid, omega_crit, verify_coverage, ChainProfile, Template, WeightVector};
use chainfree_cli::{run, Cli};
use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn four_color() -> ForbiddenFamily {
    ForbiddenFamily::from_lists(
        4,
        &[&[1, 1], &[1, 2], &[1, 3], &[1, 4], &[2, 1], &[2, 2], &[2, 3], &[2, 4], &[3, 2], &[3, 3], &[3, 4], &[4, 3], &[4, 4]],
    )
    .unwrap()
}

fn chain(k: usize) -> ForbiddenFamily {
    ForbiddenFamily::monochromatic_chain(k).unwrap()
}

fn acceptance_families() -> Vec<(String, ForbiddenFamily)> {
    let mut v: Vec<_> = (2..=6).map(|k| (format!("{k}-chain"), chain(k))).collect();
    v.push(("4-color".into(), four_color()));
    v
}

fn random_family(rng: &mut ChaCha8Rng, m: usize, max_patterns: usize, max_len: usize) -> ForbiddenFamily {
    let mut pats: Vec<ChainPattern> =
        (1..=m as u8).map(|c| ChainPattern::new(std::iter::repeat_n(c, rng.gen_range(2..=max_len)))).collect();
    for _ in 0..rng.gen_range(0..=max_patterns.saturating_sub(m)) {
        let len = rng.gen_range(2..=max_len);
        let p = ChainPattern::new((0..len).map(|_| rng.gen_range(1..=m as u8)));
        if !pats.contains(&p) {
            pats.push(p);
        }
    }
    ForbiddenFamily::new(m, pats).unwrap()
}

fn random_template(rng: &mut ChaCha8Rng, n: u32, m: usize, density: f64, band: Band) -> Template {
    let mut t = Template::empty(n, m).unwrap();
    for mask in 0..1u32 << n {
        let x = Element(mask);
        if !band.contains(x) {
            continue;
        }
        let s = ColorSet::from_colors((0..m).filter(|_| rng.gen_bool(density)).map(ColorId::from_index));
        t.set(x, s);
    }
    t
}

fn random_beta(rng: &mut ChaCha8Rng, m: usize) -> WeightVector {
    WeightVector::new((0..m).map(|_| 2.0 * (1.0 - rng.gen::<f64>())).collect()).unwrap()
}

fn timed(limit: Duration, what: &str, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure!(took < limit, "{what} took {took:.2?}, limit {limit:?}");
    Ok(())
}

fn criterion_1() -> Check {
    let mut worst = 0.0f64;
    for k in 2..=6 {
        let start = Instant::now();
        let r = omega_crit(&chain(k), &WeightVector::ones(1)).map_err(fail)?;
        timed(Duration::from_secs(1), &format!("k = {k}"), start)?;
        let want = (k - 1) as f64 * std::f64::consts::LN_2;
        let err = (r.omega_crit - want).abs();
        ensure!(err <= 1e-12, "k = {k}: {} vs {want}", r.omega_crit);
        worst = worst.max(err);
    }
    Ok(format!("k = 2..6 match (k-1) log 2, max error {worst:.1e}"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let r = omega_crit(&four_color(), &WeightVector::ones(4)).map_err(fail)?;
    timed(Duration::from_secs(1), "omega_crit", start)?;
    let err = (r.omega_crit - 6f64.ln()).abs();
    ensure!(err <= 1e-12, "omega_crit = {}, expected log 6", r.omega_crit);
    let mut want =
        vec![ChainProfile::from_lists(&[&[3, 4], &[1]]).unwrap(), ChainProfile::from_lists(&[&[4], &[1, 2]]).unwrap()];
    let mut got = r.optimal_profiles.clone();
    want.sort();
    got.sort();
    ensure!(!r.truncated && got == want, "optimal profiles {got:?}");
    Ok(format!("log 6 within {err:.1e}, two optimal profiles"))
}

fn criterion_3() -> Check {
    let g = ForbiddenFamily::from_lists(2, &[&[1, 2]]).unwrap();
    ensure!(!g.sparsity_report().is_sparse, "reported sparse");
    match omega_crit(&g, &WeightVector::ones(2)) {
        Ok(r) => Err(format!("omega_crit returned {}", r.omega_crit)),
        Err(e) if e.to_string().contains("not sparse") => Ok(format!("rejected: {e}")),
        Err(e) => Err(format!("wrong error: {e}")),
    }
}

fn criterion_4() -> Check {
    let g = chain(2);
    let mut got = Vec::new();
    for n in 0..=4 {
        let start = Instant::now();
        let r = mu_valid(n, &g, &WeightVector::ones(1), None, &CountOptions::default()).map_err(fail)?;
        if n == 4 {
            timed(Duration::from_secs(10), "n = 4", start)?;
        }
        got.push(r.mu.exact().ok_or("count is not exact")?.to_string());
    }
    ensure!(got == ["2", "3", "6", "20", "168"], "counts {got:?}");
    Ok(format!("counts {}", got.join(", ")))
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < 50 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let g = random_family(&mut rng, m, 5, 3);
        let density = rng.gen_range(0.2..0.9);
        let t = random_template(&mut rng, n, m, density, Band::full(n));
        if !template_is_valid(&t, &g) {
            continue;
        }
        let beta = random_beta(&mut rng, m);
        let closed = mu_contained_closed_form(&t, &beta);
        let enumerated = mu_contained_enumerated(&t, &beta).map_err(fail)?;
        let within = mu_valid_within(&t, &g, &beta, &CountOptions::default()).map_err(fail)?.mu.to_f64();
        for v in [enumerated, within] {
            let rel = (v - closed).abs() / closed;
            ensure!(rel <= 1e-9, "template {done}: {v} vs product {closed}");
            worst = worst.max(rel);
        }
        done += 1;
    }
    Ok(format!("50 valid templates, max relative error {worst:.1e}"))
}

fn criterion_6() -> Check {
    let mut checks = 0;
    for (name, g) in acceptance_families() {
        let beta = WeightVector::ones(g.m());
        let r = omega_crit(&g, &beta).map_err(fail)?;
        for n in 2..=4 {
            let valid = mu_valid(n, &g, &beta, None, &CountOptions::default()).map_err(fail)?;
            let valid = valid.mu.exact().ok_or("count is not exact")?.clone();
            for p in &r.optimal_profiles {
                if p.len() > n as usize + 1 {
                    continue;
                }
                let (anchor, _) = best_anchor(p, n, &beta).map_err(fail)?;
                let t = layered_template(p, n, g.m(), anchor).map_err(fail)?;
                let contained = count_contained(&t);
                ensure!(valid >= contained, "{name}, n = {n}: {valid} < {contained} for {p:?}");
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} exact comparisons over 6 families, n = 2..4"))
}

fn criterion_7() -> Check {
    let g = chain(2);
    let exact = expected_valid_count(2, &g, &[0.5], &CountOptions::default()).map_err(fail)?;
    let est = monte_carlo_valid_count(2, &g, &[0.5], 100_000, 7).map_err(fail)?;
    let z = (est.mean - exact) / est.std_err;
    ensure!(z.abs() <= 3.0, "mean {} vs exact {exact}, z = {z:.2}", est.mean);
    let exponent = expectation_exponent(&g, &[0.5]).map_err(fail)?;
    Ok(format!("exact {exact}, estimate {:.5} +- {:.5} (z = {z:.2}); exponent {exponent:.6}", est.mean, est.std_err))
}

fn brute_longest_valid(g: &ForbiddenFamily, max_len: usize) -> usize {
    let m = g.m();
    let mut best = 0;
    for len in 1..=max_len {
        let mut any = false;
        for mut code in 0..m.pow(len as u32) {
            let seq: Vec<ColorId> = (0..len)
                .map(|_| {
                    let c = ColorId::from_index(code % m);
                    code /= m;
                    c
                })
                .collect();
            if !is_violating_sequence(&seq, g) {
                any = true;
                break;
            }
        }
        if any {
            best = len;
        }
    }
    best
}

fn criterion_8() -> Check {
    let mut cases = Vec::new();
    for k in 2..=6 {
        cases.push((format!("{k}-chain"), chain(k), k));
    }
    cases.push(("4-color".into(), four_color(), 3));
    for (name, g, want) in &cases {
        let l = big_l(g).map_err(fail)?;
        ensure!(l == *want, "{name}: L = {l}, expected {want}");
        let brute = brute_longest_valid(g, l + 1) + 1;
        ensure!(brute == l, "{name}: brute force gives {brute}, L = {l}");
    }
    Ok("L = k for k = 2..6 and L = 3 for the 4-color family, brute force agrees".into())
}

fn boundlem_queries(t: &Template, aug: &ForbiddenFamily, m: usize) -> Vec<(Element, Vec<ColorId>)> {
    let mut q = Vec::new();
    for x in t.support() {
        for i in 1..=aug.k() {
            let total = m.pow(i as u32);
            if total <= 27 {
                for mut code in 0..total {
                    q.push((
                        x,
                        (0..i)
                            .map(|_| {
                                let c = ColorId::from_index(code % m);
                                code /= m;
                                c
                            })
                            .collect(),
                    ));
                }
            } else {
                q.extend((0..m).map(|c| (x, vec![ColorId::from_index(c); i])));
            }
        }
    }
    q
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 5;
    let mut chains = 0u64;
    let mut boundlem_checks = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let (g, beta) = if i == 0 {
            (four_color(), WeightVector::ones(4))
        } else {
            let m = rng.gen_range(1..=2);
            let g = random_family(&mut rng, m, 5, 3);
            let beta = random_beta(&mut rng, m);
            (g, beta)
        };
        let density = rng.gen_range(0.3..1.0);
        let t = random_template(&mut rng, n, g.m(), density, Band::full(n));
        let r = check_pointwise(&t, &g, &beta, ChainMode::Exact).map_err(|e| format!("template {i}: {e}"))?;
        ensure!(r.exact, "template {i}: pointwise check was sampled");
        chains += r.chains;
        worst = worst.max(r.max - r.omega_crit);

        let aug = augment_with_all_chains(&g).map_err(fail)?;
        let queries = boundlem_queries(&t, &aug, g.m());
        let reports = check_boundlem_many(&t, &aug, &queries, ChainMode::Exact).map_err(|e| format!("template {i}: {e}"))?;
        ensure!(reports.iter().all(|r| r.exact && r.min_slack >= 0.0), "template {i}: negative slack");
        boundlem_checks += reports.len();
    }
    let mut below = 0u64;
    for_each_maximal_chain_below(Element::full(n), |_| below += 1);
    ensure!(chains == 20 * below, "checked {chains} chains, expected {}", 20 * below);
    Ok(format!(
        "20 templates at n = 5: {chains} chains, max X - C3 Y - omega_crit = {worst:.3}; {boundlem_checks} Z^x checks, no counterexample"
    ))
}

fn criterion_10() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 6;
    let band = Band::closed_middle_third(n);
    let mut edges = 0;
    for i in 0..20 {
        let m = rng.gen_range(1..=2);
        let g = random_family(&mut rng, m, 4, 3);
        let aug = augment_with_all_chains(&g).map_err(fail)?;
        let density = rng.gen_range(0.3..1.0);
        let t = random_template(&mut rng, n, m, density, band);
        let delta = rng.gen_range(0.05..1.0);
        let r = build_balanced(&t, &aug, delta).map_err(|e| format!("run {i}: {e}"))?;
        let audit = audit_codegrees(&r.hypergraph, delta);
        ensure!(audit.violations == 0, "run {i}: {} codegree violations", audit.violations);
        edges += r.hypergraph.total_edges();
    }
    Ok(format!("20 runs at n = 6, {edges} edges, zero codegree violations"))
}

fn criterion_11() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let random = loop {
        let g = random_family(&mut rng, 2, 4, 3);
        if g.len() > 2 {
            break g;
        }
    };
    let n = 3;
    let band = Band::full(n);
    let mut lines = Vec::new();
    for (name, g) in [("2-chain", chain(2)), ("random 2-color", random)] {
        let beta = WeightVector::ones(g.m());
        let start = Instant::now();
        let run = branching_run(n, &g, &beta, 0.5, 0.5, None, band).map_err(|e| format!("{name}: {e}"))?;
        timed(Duration::from_secs(60), name, start)?;
        let cov = verify_coverage(&run.containers, n, &g, band, Default::default()).map_err(fail)?;
        ensure!(cov.exhaustive && cov.covered, "{name}: coverage {cov:?}");
        let valid = mu_valid(n, &g, &beta, Some(band), &CountOptions::default()).map_err(fail)?;
        let valid = valid.mu.exact().ok_or("count is not exact")?.clone();
        let bound = run.union_bound_exact.clone().ok_or("union bound is not exact")?;
        ensure!(bound >= valid, "{name}: union bound {bound} < {valid}");
        lines.push(format!("{name}: {} containers, {bound} >= {valid}", run.containers.len()));
    }
    Ok(lines.join("; "))
}

fn invoke(args: &[String]) -> i32 {
    let cli = Cli::try_parse_from(std::iter::once("chainfree".to_string()).chain(args.iter().cloned())).unwrap();
    run(&cli, &mut Vec::new(), &mut Vec::new())
}

fn criterion_12() -> Check {
    let dir = tempfile::TempDir::new().map_err(fail)?;
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, r#"{"m": 2, "patterns": [[1, 1], [2, 2], [2, 1]], "p": [0.3, 0.4], "seed": 3, "samples": 500}"#)
        .map_err(fail)?;
    let cfg = cfg_path.display().to_string();
    let four = configs.join("four_color.json").display().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("check", vec!["--config", &cfg]),
        ("lcg", vec!["--config", &cfg]),
        ("omega-crit", vec!["--config", &four]),
        ("extremal", vec!["--config", &four, "--n", "4"]),
        ("count", vec!["--config", &cfg, "--n", "3"]),
        ("expect", vec!["--config", &cfg, "--n", "3"]),
        ("sample", vec!["--config", &cfg, "--n", "3"]),
        ("supersat", vec!["--config", &cfg, "--n", "6", "--sample", "--alpha", "0.1"]),
        ("balanced", vec!["--config", &cfg, "--n", "6", "--delta", "0.3"]),
        ("containers", vec!["--config", &cfg, "--n", "3", "--alpha", "0.5", "--delta", "0.5"]),
    ];
    let mut reports: Vec<PathBuf> = Vec::new();
    for (cmd, args) in &runs {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{cmd}-{rep}.json"));
            let mut full = vec![cmd.to_string()];
            full.extend(args.iter().map(|s| s.to_string()));
            full.extend(["--out".to_string(), out.display().to_string()]);
            let code = invoke(&full);
            ensure!(code == 0, "{cmd} exited {code}");
            outs.push(fs::read(&out).map_err(fail)?);
            reports.push(out);
        }
        ensure!(outs[0] == outs[1], "{cmd}: reports differ");
    }
    let containers = reports.iter().find(|p| p.ends_with("containers-0.json")).expect("containers ran");
    let mut outs = Vec::new();
    for rep in 0..2 {
        let out = dir.path().join(format!("verify-{rep}.json"));
        let args = vec![
            "verify".to_string(),
            "--config".to_string(),
            containers.display().to_string(),
            "--out".to_string(),
            out.display().to_string(),
        ];
        ensure!(invoke(&args) == 0, "verify failed");
        outs.push(fs::read(&out).map_err(fail)?);
    }
    ensure!(outs[0] == outs[1], "verify: reports differ");
    Ok(format!("{} commands, byte-identical reports on rerun", runs.len() + 1))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("omega_crit of monochromatic chains", criterion_1),
        ("4-color critical exponent and profiles", criterion_2),
        ("dense family rejected", criterion_3),
        ("antichain counts", criterion_4),
        ("contained measure equals product", criterion_5),
        ("layered lower bound", criterion_6),
        ("Monte Carlo expectation", criterion_7),
        ("longest valid sequence", criterion_8),
        ("supersaturation inequalities", criterion_9),
        ("balanced codegree audit", criterion_10),
        ("container coverage and union bound", criterion_11),
        ("deterministic reports", criterion_12),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({took:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
