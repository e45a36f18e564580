use std::fmt::Write as _;
use std::path::Path;

use chainfree::containers::{branching_run, verify_coverage, BranchingRun, SpotCheck};
use chainfree::critical::{expectation_exponent, omega_crit};
use chainfree::enumeration::{
    expected_valid_count, monte_carlo_valid_count, mu_valid, CountOptions, Measure,
};
use chainfree::lattice::{factorial, Band};
use chainfree::patterns::{augment_with_all_chains, big_l};
use chainfree::supersat::{
    audit_codegrees, audit_extensions, build_balanced, chain_stats, check_averagelem,
    check_boundlem_many, check_pointwise, constants, delta_suggestion, q_constant, ChainMode, EXACT_CHAIN_BUDGET,
};
use chainfree::templates::{best_anchor, count_contained, layered_template, template_is_valid};
use chainfree::{ColorId, Error, ForbiddenFamily, Template, WeightVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, ProblemConfig};
use crate::format::real;
use crate::Command;

pub const DEFAULT_SAMPLES: u64 = 10_000;
const SPLIT_DEPTH: usize = 4;

pub struct Outcome {
    pub result: Value,
    pub summary: String,
    pub exit: i32,
}

impl Outcome {
    fn ok(result: impl Serialize, summary: String) -> Outcome {
        Outcome { result: to_value(result), summary, exit: 0 }
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

pub struct Context<'a> {
    pub cfg: &'a ProblemConfig,
    pub family: ForbiddenFamily,
    pub beta: WeightVector,
    pub csv: Option<&'a Path>,
    pub input: Option<&'a Value>,
}

impl Context<'_> {
    fn n(&self) -> Result<u32, Error> {
        self.cfg.n.ok_or_else(|| Error::Parameter("n is required: set \"n\" in the config or pass --n".into()))
    }

    fn real_param(&self, name: &str, v: Option<f64>) -> Result<f64, Error> {
        v.ok_or_else(|| Error::Parameter(format!("{name} is required: set \"{name}\" in the config or pass --{name}")))
    }

    fn seed(&self) -> u64 {
        self.cfg.seed.unwrap_or(0)
    }

    fn samples(&self) -> u64 {
        self.cfg.samples.unwrap_or(DEFAULT_SAMPLES)
    }

    fn chain_mode(&self) -> ChainMode {
        match self.cfg.mode.unwrap_or(Mode::Exact) {
            Mode::Exact => ChainMode::Exact,
            Mode::Sample => ChainMode::Sample { samples: self.samples(), seed: self.seed() },
        }
    }

    fn band(&self, n: u32) -> Result<Option<Band>, Error> {
        self.cfg.band(n).map_err(|e| Error::Parameter(e.to_string()))
    }

    fn probabilities(&self) -> Result<Vec<f64>, Error> {
        self.cfg
            .p
            .clone()
            .ok_or_else(|| Error::Parameter("p is required: set \"p\" (color probabilities) in the config".into()))
    }
}

pub fn dispatch(cmd: Command, ctx: &Context) -> Result<Outcome, Error> {
    match cmd {
        Command::Check => check(ctx),
        Command::Lcg => lcg(ctx),
        Command::OmegaCrit => omega(ctx),
        Command::Extremal => extremal(ctx),
        Command::Count => count(ctx),
        Command::Expect => expect(ctx),
        Command::Sample => sample(ctx),
        Command::Supersat => supersat(ctx),
        Command::Balanced => balanced(ctx),
        Command::Containers => containers(ctx),
        Command::Verify => verify(ctx),
    }
}

fn check(ctx: &Context) -> Result<Outcome, Error> {
    let g = &ctx.family;
    let s = g.sparsity_report();
    let mut out = format!("sparse: {}\n", s.is_sparse);
    if !s.is_sparse {
        let missing: Vec<String> = s.missing_colors.iter().map(|c| c.to_string()).collect();
        writeln!(out, "colors without a monochromatic pattern: {}", missing.join(", ")).unwrap();
    }
    writeln!(out, "colors: {}\npatterns: {}\nk: {}\ndigest: {}", g.m(), g.len(), g.k(), g.digest()).unwrap();
    let result = json!({
        "sparsity": s,
        "m": g.m(),
        "patterns": g.len(),
        "k": g.k(),
        "family_digest": g.digest(),
    });
    Ok(Outcome::ok(result, out))
}

fn lcg(ctx: &Context) -> Result<Outcome, Error> {
    let l = big_l(&ctx.family)?;
    Ok(Outcome::ok(json!({ "big_l": l }), format!("L = {l}\n")))
}

fn omega(ctx: &Context) -> Result<Outcome, Error> {
    let r = omega_crit(&ctx.family, &ctx.beta)?;
    let mut out = format!("omega_crit = {}\nL = {}\n", real(r.omega_crit), r.big_l);
    writeln!(out, "optimal profiles ({}{}):", r.optimal_profiles.len(), if r.truncated { ", truncated" } else { "" })
        .unwrap();
    for p in &r.optimal_profiles {
        writeln!(out, "  {p:?}").unwrap();
    }
    Ok(Outcome::ok(r, out))
}

#[derive(Serialize)]
struct ExtremalEntry {
    profile: chainfree::ChainProfile,
    anchor: u32,
    omega: f64,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    contained_count: Option<String>,
}

fn extremal(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let r = omega_crit(&ctx.family, &ctx.beta)?;
    let mut entries = Vec::new();
    let mut out = format!("omega_crit = {}\n", real(r.omega_crit));
    for p in &r.optimal_profiles {
        let (anchor, w) = best_anchor(p, n, &ctx.beta)?;
        let t = layered_template(p, n, ctx.family.m(), anchor)?;
        let valid = template_is_valid(&t, &ctx.family);
        let contained_count = ctx.beta.is_all_ones().then(|| count_contained(&t).to_string());
        writeln!(out, "{p:?}: anchor rank {anchor}, omega {}, valid {valid}", real(w)).unwrap();
        if let Some(c) = &contained_count {
            writeln!(out, "  contained colored subsets: {c}").unwrap();
        }
        entries.push(ExtremalEntry { profile: p.clone(), anchor, omega: w, valid, contained_count });
    }
    let exit = if entries.iter().all(|e| e.valid) { 0 } else { 3 };
    Ok(Outcome { result: json!({ "omega_crit": r.omega_crit, "n": n, "templates": entries }), summary: out, exit })
}

fn measure_text(m: &Measure) -> String {
    match m {
        Measure::Exact(v) => v.to_string(),
        Measure::Weighted(v) => real(*v),
    }
}

fn count_options() -> CountOptions {
    CountOptions { split_depth: SPLIT_DEPTH, ..Default::default() }
}

fn count(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let r = mu_valid(n, &ctx.family, &ctx.beta, ctx.band(n)?, &count_options())?;
    let out = format!("mu = {}\nnodes = {}, pruned choices = {}\n", measure_text(&r.mu), r.nodes, r.prunes);
    Ok(Outcome::ok(r, out))
}

fn expect(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let p = ctx.probabilities()?;
    let e = expected_valid_count(n, &ctx.family, &p, &count_options())?;
    let exponent = match expectation_exponent(&ctx.family, &p) {
        Ok(v) => Some(v),
        Err(Error::NotSparse { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut out = format!("E[valid colored subsets] = {}\n", real(e));
    match exponent {
        Some(v) => writeln!(out, "omega_crit(p) = {}", real(v)).unwrap(),
        None => writeln!(out, "omega_crit(p) undefined: family is not sparse").unwrap(),
    }
    Ok(Outcome::ok(json!({ "n": n, "p": p, "expected": e, "omega_crit": exponent }), out))
}

fn sample(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let p = ctx.probabilities()?;
    let est = monte_carlo_valid_count(n, &ctx.family, &p, ctx.samples(), ctx.seed())?;
    let exact = expected_valid_count(n, &ctx.family, &p, &count_options())?;
    let z = if est.std_err > 0.0 { (est.mean - exact) / est.std_err } else if est.mean == exact { 0.0 } else { f64::INFINITY };
    let out = format!(
        "Monte Carlo mean = {} (std err {}, {} samples)\nexact expectation = {}\nz = {}\n",
        real(est.mean),
        real(est.std_err),
        est.samples,
        real(exact),
        real(z)
    );
    Ok(Outcome::ok(json!({ "n": n, "p": p, "estimate": est, "exact": exact, "z_score": z }), out))
}

fn default_band(ctx: &Context, n: u32, fallback: Band) -> Result<Band, Error> {
    Ok(ctx.band(n)?.unwrap_or(fallback))
}

#[derive(Serialize)]
struct BoundlemSummary {
    q: f64,
    checks: u64,
    chains: u64,
    min_slack: Option<f64>,
    skipped_elements: usize,
}

fn color_tuples(m: usize, i: usize) -> Vec<Vec<ColorId>> {
    let total = (m as u64).saturating_pow(i as u32);
    if total <= 64 {
        (0..total)
            .map(|mut code| {
                (0..i)
                    .map(|_| {
                        let c = ColorId::from_index((code % m as u64) as usize);
                        code /= m as u64;
                        c
                    })
                    .collect()
            })
            .collect()
    } else {
        (0..m).map(|c| vec![ColorId::from_index(c); i]).collect()
    }
}

fn supersat(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let g = &ctx.family;
    let mode = ctx.chain_mode();
    let band = default_band(ctx, n, Band::closed_middle_third(n))?;
    let t = Template::full(n, g.m(), band)?;
    let k = constants(g, &ctx.beta, n)?;
    let stats = chain_stats(&t, g, &ctx.beta, mode)?;
    let pointwise = check_pointwise(&t, g, &ctx.beta, mode)?;
    let mut out = format!(
        "C1 = {}, C2 = {}, C3 = {}, C4 = {}, Q = {}\nomega_crit = {}\n",
        real(k.c1),
        real(k.c2),
        real(k.c3),
        real(k.c4),
        real(k.q),
        real(k.omega_crit)
    );
    writeln!(
        out,
        "template: all colors on ranks {}..={}\nE[X] = {}, E[Y] = {} over {} chains\nmax X - C3*Y = {} (bound {})",
        band.lo,
        band.hi,
        real(stats.x_mean),
        real(stats.y_mean),
        stats.samples,
        real(pointwise.max),
        real(k.omega_crit)
    )
    .unwrap();

    let averagelem = match ctx.cfg.alpha {
        None => json!({ "skipped": "alpha not given" }),
        Some(alpha) => match check_averagelem(&t, g, &ctx.beta, alpha, mode) {
            Ok(r) => {
                writeln!(
                    out,
                    "witness x = {:?} with E[Y^x] = {} >= C1*alpha = {}",
                    r.witness,
                    real(r.witness_ey.mean),
                    real(r.threshold)
                )
                .unwrap();
                to_value(r)
            }
            Err(Error::Precondition(why)) => {
                writeln!(out, "averaging check skipped: {why}").unwrap();
                json!({ "skipped": why })
            }
            Err(e) => return Err(e),
        },
    };

    let aug = augment_with_all_chains(g)?;
    let mut b = BoundlemSummary {
        q: q_constant(aug.m(), aug.k(), n),
        checks: 0,
        chains: 0,
        min_slack: None,
        skipped_elements: 0,
    };
    let mut queries = Vec::new();
    for x in t.support() {
        if matches!(mode, ChainMode::Exact) && factorial(x.rank()) > EXACT_CHAIN_BUDGET {
            b.skipped_elements += 1;
            continue;
        }
        for i in 1..=aug.k() {
            queries.extend(color_tuples(g.m(), i).into_iter().map(|c| (x, c)));
        }
    }
    for r in check_boundlem_many(&t, &aug, &queries, mode)? {
        b.checks += 1;
        b.chains += r.chains;
        b.min_slack = Some(b.min_slack.map_or(r.min_slack, |s: f64| s.min(r.min_slack)));
    }
    writeln!(
        out,
        "Z^x <= Q + Y^x with Q = {} (augmented family): {} checks over {} chains, min slack {}",
        real(b.q),
        b.checks,
        b.chains,
        b.min_slack.map_or("n/a".into(), real)
    )
    .unwrap();
    let result = json!({
        "n": n,
        "band": band,
        "constants": k,
        "chain_stats": stats,
        "pointwise": pointwise,
        "averagelem": averagelem,
        "boundlem": b,
    });
    Ok(Outcome::ok(result, out))
}

fn balanced(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let delta = ctx.real_param("delta", ctx.cfg.delta)?;
    let band = default_band(ctx, n, Band::closed_middle_third(n))?;
    let aug = augment_with_all_chains(&ctx.family)?;
    let t = Template::full(n, aug.m(), band)?;
    let r = build_balanced(&t, &aug, delta)?;
    let audit = audit_codegrees(&r.hypergraph, delta);
    let ext = audit_extensions(&t, &aug, &r.hypergraph, delta)?;
    let suggestion = ctx.cfg.alpha.map(|a| delta_suggestion(a, &ctx.beta, aug.k()));

    let mut out = format!("delta = {}, candidates = {}, considered = {}\n", real(delta), r.candidates, r.considered);
    for (l, e, target) in &r.edge_counts {
        writeln!(out, "l = {l}: {e} edges (target {})", real(*target)).unwrap();
    }
    match r.success {
        Some(l) => writeln!(out, "target reached at uniformity {l}").unwrap(),
        None => writeln!(out, "no uniformity reached its target").unwrap(),
    }
    writeln!(out, "codegree caps (l, j, max, cap):").unwrap();
    for row in &audit.rows {
        writeln!(out, "  {} {} {} {}", row.l, row.j, row.max_codegree, real(row.cap)).unwrap();
    }
    writeln!(out, "audit violations: {}", audit.violations).unwrap();
    writeln!(
        out,
        "blocked extensions per prefix: max {} (bound {})",
        ext.max_blocked,
        real(ext.bound)
    )
    .unwrap();
    if let Some(s) = suggestion {
        writeln!(out, "suggested delta for alpha: {}", real(s)).unwrap();
    }
    if let Some(path) = ctx.csv {
        write_codegree_csv(path, &audit.rows)?;
    }
    let mut report = to_value(&r);
    if let Value::Object(o) = &mut report {
        o.remove("hypergraph");
    }
    let result = json!({
        "n": n,
        "band": band,
        "balanced": report,
        "audit": audit,
        "extensions": ext,
        "delta_suggestion": suggestion,
    });
    let exit = if audit.violations == 0 { 0 } else { 3 };
    Ok(Outcome { result, summary: out, exit })
}

fn write_codegree_csv(path: &Path, rows: &[chainfree::supersat::CodegreeRow]) -> Result<(), Error> {
    let io = |e: csv::Error| Error::Parameter(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))
}

fn containers(ctx: &Context) -> Result<Outcome, Error> {
    let n = ctx.n()?;
    let alpha = ctx.real_param("alpha", ctx.cfg.alpha)?;
    let delta = ctx.real_param("delta", ctx.cfg.delta)?;
    let band = default_band(ctx, n, Band::open_middle_third(n).unwrap_or(Band::full(n)))?;
    let run = branching_run(n, &ctx.family, &ctx.beta, alpha, delta, ctx.cfg.tau, band)?;

    let opts = CountOptions { node_cap: 100_000_000, ..count_options() };
    let valid = match mu_valid(n, &ctx.family, &ctx.beta, Some(band), &opts) {
        Ok(r) => Some(r.mu),
        Err(e) if e.is_budget() => None,
        Err(e) => return Err(e),
    };
    let holds = valid.as_ref().map(|mu| match (mu, &run.union_bound_exact) {
        (Measure::Exact(v), Some(u)) => u >= v,
        _ => run.union_bound >= mu.to_f64(),
    });

    let mut out = format!(
        "threshold = {}, band = {}..={}, tau = {}\n",
        real(run.threshold),
        band.lo,
        band.hi,
        real(run.tau)
    );
    for r in &run.rounds {
        writeln!(
            out,
            "round {}: frontier {}, max omega {}, containers {}, forced splits {}",
            r.round,
            r.frontier,
            real(r.max_omega),
            r.containers,
            r.forced_splits
        )
        .unwrap();
    }
    writeln!(out, "final containers: {} (max omega {})", run.containers.len(), real(run.max_final_omega)).unwrap();
    match &run.union_bound_exact {
        Some(u) => writeln!(out, "union bound = {u}").unwrap(),
        None => writeln!(out, "union bound = {}", real(run.union_bound)).unwrap(),
    }
    if let Some(mu) = &valid {
        writeln!(out, "valid colored subsets in band = {}", measure_text(mu)).unwrap();
    }
    let exit = if holds == Some(false) { 3 } else { 0 };
    let result = json!({ "run": run, "valid_measure": valid, "union_bound_holds": holds });
    Ok(Outcome { result, summary: out, exit })
}

fn verify(ctx: &Context) -> Result<Outcome, Error> {
    let input = ctx
        .input
        .ok_or_else(|| Error::Parameter("verify expects a report written by the containers command".into()))?;
    let run: BranchingRun = serde_json::from_value(input["run"].clone())
        .map_err(|e| Error::Parameter(format!("result.run: {e}")))?;
    let spot = SpotCheck { samples: ctx.samples(), seed: ctx.seed() };
    let r = verify_coverage(&run.containers, run.n, &ctx.family, run.band, spot)?;
    let out = format!(
        "covered: {} ({} valid colored subsets checked{})\n",
        r.covered,
        r.checked,
        if r.exhaustive { ", exhaustive" } else { ", sampled" }
    );
    let exit = if r.covered { 0 } else { 3 };
    Ok(Outcome { result: json!({ "containers": run.containers.len(), "coverage": r }), summary: out, exit })
}
