use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stopping_lab::bound::{
    gamma, optimal_schedule, paper_bound, solve_optimal_threshold, truncated_gamma, BoundBreakdown,
    ThresholdSchedule, PAPER_C1, PAPER_C2, PAPER_C3,
};
use stopping_lab::last_success::{
    conditioned_s_distribution, monotone_rule_success, simulate_last_success, success_upper_bound, AcceptSet,
    LastSuccessInstance,
};
use stopping_lab::model::{GoogolInstance, RandomnessSpec};
use stopping_lab::policies::{adversarial_exact_success, ADVERSARIAL_EXACT_LIMIT};
use stopping_lab::rank::{
    fmt_rational, rational_to_f64, verify_pair_position_independence, verify_rank_dominance,
    verify_second_order_inequality, VerifierReport,
};
use stopping_lab::sim::{
    run_monte_carlo, run_trial, superstar_level, top_pair_collision_estimate, EstimateReport,
    InstanceDistribution, SimPolicy,
};

use crate::output::{emit, fmt12, num, nums, Format, Report};

const MAX_VERIFY_WINDOW: usize = 13;
const LOWER_BOUND_TARGET: f64 = 0.5007;
const GAMMA_RANGE: (f64, f64) = (0.5014, 0.5034);

#[derive(Debug, Parser)]
#[command(
    name = "stopping-lab",
    version,
    about = "Single-sample secretary and two-sided Game of Googol experiments",
    after_help = "Exit codes: 0 success, 1 usage error, 2 assertion or verification failure.\n\
                  STOPPING_LAB_THREADS caps the number of worker threads."
)]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Emit JSON.
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    /// Emit CSV.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Write the output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower bound for the block-rank policy with three thresholds, and the gamma benchmark.
    Bound(BoundArgs),
    /// Value of the optimal threshold schedule truncated after block J.
    Gamma(GammaArgs),
    /// Optimal thresholds c_j.
    Thresholds(ThresholdArgs),
    /// Exhaustive checks of the rank-beat inequalities.
    Verify(VerifyArgs),
    /// Monte Carlo estimate of a policy's success probability.
    Simulate(SimulateArgs),
    /// Exact worst-order success of the max-face-up threshold rule.
    AdversarialExact(InstanceArgs),
    /// Optimal single-sample last-success rule: exact value, bound and simulation.
    LastSuccess(LastSuccessArgs),
    /// Superstar level and top-k pair collisions.
    Superstars(SuperstarArgs),
}

#[derive(Debug, Args)]
pub struct Thresholds3 {
    #[arg(long, default_value_t = PAPER_C1)]
    pub c1: f64,
    #[arg(long, default_value_t = PAPER_C2)]
    pub c2: f64,
    #[arg(long, default_value_t = PAPER_C3)]
    pub c3: f64,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub c: Thresholds3,
    /// Report the numbers without checking total >= 0.5007 and the gamma range.
    #[arg(long)]
    pub no_assert: bool,
    /// Also search a grid of (c1, c2, c3) with this spacing for the best total.
    #[arg(long, value_name = "STEP")]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    /// Last block with an optimal threshold.
    #[arg(long, default_value_t = 60)]
    pub j_max: usize,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Largest block index.
    #[arg(long, default_value_t = 30)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Largest window i + j - 1 to enumerate (at most 13).
    #[arg(long, default_value_t = 11)]
    pub max_window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyName {
    BlockRank,
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyName {
    IidUniform,
    ScaledExp,
    BernoulliHard,
    File,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum, default_value_t = FamilyName::IidUniform)]
    pub family: FamilyName,
    /// Number of cards (iid-uniform, bernoulli-hard).
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated means (scaled-exp).
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<f64>,
    /// Comma-separated probabilities, or one value repeated n times
    /// (bernoulli-hard; default n^(-2/3)).
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// Discrete tables file (file family).
    #[arg(long, value_name = "PATH")]
    pub tables: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = PolicyName::BlockRank)]
    pub policy: PolicyName,
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Random stream id, for independent runs under one seed.
    #[arg(long, default_value_t = 0)]
    pub stream: u32,
    #[command(flatten)]
    pub c: Thresholds3,
    /// Include the full records of the first N trials.
    #[arg(long, value_name = "N")]
    pub trace: Option<u64>,
    /// Exact worst-order evaluation of the instance given by --instance
    /// (adversarial policy only).
    #[arg(long, requires = "instance")]
    pub exact: bool,
    /// Instance file {"cards": [[a, b], ...]} for --exact.
    #[arg(long, value_name = "PATH")]
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    /// Instance file {"cards": [[a, b], ...]}.
    #[arg(long, value_name = "PATH", required_unless_present = "cards")]
    pub instance: Option<PathBuf>,
    /// Inline cards, e.g. "10,5;9,1".
    #[arg(long, conflicts_with = "instance")]
    pub cards: Option<String>,
}

#[derive(Debug, Args)]
pub struct LastSuccessArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Success probability of each variable (default n^(-2/3)).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

#[derive(Debug, Args)]
pub struct SuperstarArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
}

pub enum Failure {
    Usage(String),
    Assertion(String),
}

impl From<stopping_lab::Error> for Failure {
    fn from(e: stopping_lab::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(Report, Option<String>), Failure>;

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let format = if cli.json {
        Format::Json
    } else if cli.csv {
        Format::Csv
    } else {
        Format::Text
    };
    let (report, failed) = match &cli.command {
        Command::Bound(a) => bound(a),
        Command::Gamma(a) => gamma_cmd(a),
        Command::Thresholds(a) => thresholds(a),
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate(a, cli.seed),
        Command::AdversarialExact(a) => adversarial_exact(a),
        Command::LastSuccess(a) => last_success(a, cli.seed),
        Command::Superstars(a) => superstars(a, cli.seed),
    }?;
    emit(&report, format, cli.out.as_deref()).map_err(|e| Failure::Usage(format!("cannot write output: {e}")))?;
    match failed {
        Some(msg) => Err(Failure::Assertion(msg)),
        None => Ok(()),
    }
}

fn bound_json(b: &BoundBreakdown) -> Value {
    json!({
        "blocks": nums(&b.blocks),
        "tail": num(b.tail),
        "total": num(b.total),
        "thresholds": nums(&b.thresholds),
    })
}

fn grid_search(step: f64) -> Result<(f64, f64, f64, f64), Failure> {
    if !(step > 0.0 && step < 0.5) {
        return Err(Failure::Usage(format!("--grid-step must lie in (0, 0.5), got {step}")));
    }
    let m = (1.0 / step).floor() as usize;
    let grid: Vec<f64> = (1..m).map(|k| k as f64 * step).filter(|&c| c < 1.0).collect();
    let mut best = (0.0, 0.0, 0.0, f64::NEG_INFINITY);
    for (a, &c1) in grid.iter().enumerate() {
        for (b, &c2) in grid[..=a].iter().enumerate() {
            for &c3 in &grid[..=b] {
                let total = paper_bound(c1, c2, c3)?.total;
                if total > best.3 {
                    best = (c1, c2, c3, total);
                }
            }
        }
    }
    Ok(best)
}

fn bound(a: &BoundArgs) -> Outcome {
    let b = paper_bound(a.c.c1, a.c.c2, a.c.c3)?;
    let g = gamma(60);
    let mut json = bound_json(&b);
    json["gamma"] = json!({ "j_max": 60, "value": num(g.value), "tail_bound": num(g.tail_bound) });
    let mut text = String::new();
    for (j, v) in b.blocks[..3].iter().enumerate() {
        text += &format!("block {j}  ({} .. {}]  {}\n", fmt12(b.thresholds[j + 1]), fmt12(b.thresholds[j]), fmt12(*v));
    }
    text += &format!("tail     (0 .. {}]  {}\n", fmt12(a.c.c3), fmt12(b.tail));
    text += &format!("total    {}\n", fmt12(b.total));
    text += &format!("gamma(60) {}  (tail bound {})\n", fmt12(g.value), fmt12(g.tail_bound));
    let mut csv = String::from("piece,value\n");
    for (j, v) in b.blocks[..3].iter().enumerate() {
        csv += &format!("block{j},{}\n", fmt12(*v));
    }
    csv += &format!("tail,{}\ntotal,{}\ngamma60,{}\n", fmt12(b.tail), fmt12(b.total), fmt12(g.value));
    if let Some(step) = a.grid_step {
        let (c1, c2, c3, total) = grid_search(step)?;
        json["grid_best"] = json!({ "c1": num(c1), "c2": num(c2), "c3": num(c3), "total": num(total) });
        text += &format!("grid best (step {step}): c = ({}, {}, {}) total {}\n", fmt12(c1), fmt12(c2), fmt12(c3), fmt12(total));
        csv += &format!("grid_best,{}\n", fmt12(total));
    }
    let failed = if a.no_assert {
        None
    } else if b.total < LOWER_BOUND_TARGET {
        Some(format!("total {} below {LOWER_BOUND_TARGET}", fmt12(b.total)))
    } else if !(GAMMA_RANGE.0..=GAMMA_RANGE.1).contains(&g.value) {
        Some(format!("gamma(60) = {} outside [{}, {}]", fmt12(g.value), GAMMA_RANGE.0, GAMMA_RANGE.1))
    } else {
        None
    };
    Ok((Report { json, text, csv }, failed))
}

fn gamma_cmd(a: &GammaArgs) -> Outcome {
    if a.j_max == 0 || a.j_max > 2000 {
        return Err(Failure::Usage(format!("--j-max must lie in 1..=2000, got {}", a.j_max)));
    }
    let g = gamma(a.j_max);
    let ks: Vec<usize> = [0, 1, 2, 5, 10, 20, 40].into_iter().filter(|&k| k <= a.j_max).collect();
    let truncated: Vec<Value> = ks
        .iter()
        .map(|&k| json!({ "k": k, "value": num(truncated_gamma(k)), "c_k": num(g.thresholds[k]) }))
        .collect();
    let json = json!({
        "j_max": a.j_max,
        "value": num(g.value),
        "tail_bound": num(g.tail_bound),
        "thresholds": nums(&g.thresholds),
        "truncated": truncated,
    });
    let mut text = format!(
        "gamma({}) = {}  (missing mass at most {})\n",
        a.j_max,
        fmt12(g.value),
        fmt12(g.tail_bound)
    );
    let mut csv = String::from("k,gamma_k,c_k\n");
    for &k in &ks {
        text += &format!("  gamma_{k} = {}\n", fmt12(truncated_gamma(k)));
        csv += &format!("{k},{},{}\n", fmt12(truncated_gamma(k)), fmt12(g.thresholds[k]));
    }
    Ok((Report { json, text, csv }, None))
}

fn thresholds(a: &ThresholdArgs) -> Outcome {
    if a.k > 2000 {
        return Err(Failure::Usage(format!("--k must be at most 2000, got {}", a.k)));
    }
    let roots: Vec<f64> = (0..=a.k).map(solve_optimal_threshold).collect();
    let s = optimal_schedule(a.k);
    let c = s.thresholds().to_vec();
    let json = json!({ "k": a.k, "roots": nums(&roots), "thresholds": nums(&c) });
    let mut text = String::from("j  root  c_j  j*c_j\n");
    let mut csv = String::from("j,root,c_j\n");
    for j in 0..=a.k {
        text += &format!("{j}  {}  {}  {}\n", fmt12(roots[j]), fmt12(c[j]), fmt12(j as f64 * c[j]));
        csv += &format!("{j},{},{}\n", fmt12(roots[j]), fmt12(c[j]));
    }
    Ok((Report { json, text, csv }, None))
}

fn verify(a: &VerifyArgs) -> Outcome {
    if a.max_window == 0 || a.max_window > MAX_VERIFY_WINDOW {
        return Err(Failure::Usage(format!(
            "--max-window must lie in 1..={MAX_VERIFY_WINDOW}, got {}",
            a.max_window
        )));
    }
    let reports: Vec<VerifierReport> = vec![
        verify_rank_dominance(a.max_window),
        verify_pair_position_independence(a.max_window),
        verify_second_order_inequality(),
    ];
    let pass = reports.iter().all(VerifierReport::passed);
    let json = json!({
        "max_window": a.max_window,
        "pass": pass,
        "reports": reports.iter().map(|r| json!({
            "name": r.name,
            "checks": r.checks,
            "pass": r.passed(),
            "failures": r.failures,
            "extremal": r.extremal,
        })).collect::<Vec<_>>(),
    });
    let mut text = String::new();
    let mut csv = String::from("verifier,checks,failures,pass\n");
    for r in &reports {
        text += &format!(
            "{}: {} checks, {} failures{}\n",
            r.name,
            r.checks,
            r.failures.len(),
            if r.passed() { "" } else { " FAILED" }
        );
        csv += &format!("{},{},{},{}\n", r.name, r.checks, r.failures.len(), r.passed());
    }
    let failed = reports.iter().find_map(|r| {
        r.failures.first().map(|f| {
            format!(
                "{}: i={} j={} pairing {:?}: {} vs {}",
                r.name, f.i, f.j, f.pairing, f.lhs, f.rhs
            )
        })
    });
    Ok((Report { json, text, csv }, failed))
}

fn family(a: &FamilyArgs) -> Result<InstanceDistribution, Failure> {
    let need_n = || a.n.ok_or_else(|| Failure::Usage("--n is required for this family".into()));
    let d = match a.family {
        FamilyName::IidUniform => InstanceDistribution::IidUniform { n: need_n()? },
        FamilyName::ScaledExp => {
            if a.scales.is_empty() {
                return Err(Failure::Usage("--scales is required for scaled-exp".into()));
            }
            InstanceDistribution::ScaledExp { scales: a.scales.clone() }
        }
        FamilyName::BernoulliHard => {
            let p = match (a.p.as_slice(), a.n) {
                ([], Some(n)) => vec![(n as f64).powf(-2.0 / 3.0); n],
                ([p], Some(n)) => vec![*p; n],
                ([], None) => return Err(Failure::Usage("bernoulli-hard needs --n or --p".into())),
                (ps, None) => ps.to_vec(),
                (ps, Some(n)) if ps.len() == n => ps.to_vec(),
                (ps, Some(n)) => {
                    return Err(Failure::Usage(format!("--p has {} entries but --n is {n}", ps.len())))
                }
            };
            InstanceDistribution::BernoulliHard { p }
        }
        FamilyName::File => {
            let path = a.tables.as_ref().ok_or_else(|| Failure::Usage("--tables is required for file".into()))?;
            InstanceDistribution::from_table_file(path)?
        }
    };
    d.check()?;
    Ok(d)
}

fn estimate_json(r: &EstimateReport) -> Value {
    json!({
        "policy": r.policy,
        "family": r.family,
        "n": r.n,
        "trials": r.trials,
        "successes": r.successes,
        "estimate": num(r.estimate),
        "wilson95": [num(r.wilson95.0), num(r.wilson95.1)],
        "seed": r.seed,
        "invariant_violations": r.invariant_violations,
    })
}

fn load_instance(path: Option<&PathBuf>, inline: Option<&str>) -> Result<GoogolInstance, Failure> {
    if let Some(path) = path {
        return Ok(GoogolInstance::from_json_file(path)?);
    }
    let text = inline.ok_or_else(|| Failure::Usage("an instance is required".into()))?;
    let cards = text
        .split(';')
        .map(|card| {
            let sides: Vec<f64> = card
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("bad value {v:?}: {e}"))))
                .collect::<Result<_, _>>()?;
            match sides.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(Failure::Usage(format!("card {card:?} needs two values"))),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GoogolInstance::new(cards)?)
}

fn exact_report(inst: &GoogolInstance) -> Outcome {
    if inst.n() > ADVERSARIAL_EXACT_LIMIT {
        return Err(Failure::Usage(format!(
            "exact evaluation supports at most {ADVERSARIAL_EXACT_LIMIT} cards, got {}",
            inst.n()
        )));
    }
    let v = adversarial_exact_success(inst)?;
    let exact = fmt_rational(&v);
    let value = rational_to_f64(&v);
    let json = json!({
        "policy": "adversarial-threshold",
        "n": inst.n(),
        "exact": exact,
        "value": num(value),
    });
    let text = format!("worst-order success {exact} = {}\n", fmt12(value));
    let csv = format!("policy,n,exact,value\nadversarial-threshold,{},{exact},{}\n", inst.n(), fmt12(value));
    Ok((Report { json, text, csv }, None))
}

fn adversarial_exact(a: &InstanceArgs) -> Outcome {
    exact_report(&load_instance(a.instance.as_ref(), a.cards.as_deref())?)
}

fn simulate(a: &SimulateArgs, seed: u64) -> Outcome {
    if a.exact {
        if a.policy != PolicyName::Adversarial {
            return Err(Failure::Usage("--exact is only available for --policy adversarial".into()));
        }
        return exact_report(&load_instance(a.instance.as_ref(), None)?);
    }
    if a.instance.is_some() {
        return Err(Failure::Usage("--instance is only used together with --exact".into()));
    }
    if a.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let dist = family(&a.family)?;
    let policy = match a.policy {
        PolicyName::BlockRank => SimPolicy::BlockRank { schedule: ThresholdSchedule::paper(a.c.c1, a.c.c2, a.c.c3)? },
        PolicyName::Adversarial => SimPolicy::AdversarialThreshold,
    };
    let spec = RandomnessSpec::new(seed, a.stream);
    let r = run_monte_carlo(&policy, &dist, a.trials, spec)?;
    let mut json = estimate_json(&r);
    let mut text = format!(
        "{} on {} (n = {}): {} / {} = {}  95% CI [{}, {}]\n",
        r.policy,
        r.family,
        r.n,
        r.successes,
        r.trials,
        fmt12(r.estimate),
        fmt12(r.wilson95.0),
        fmt12(r.wilson95.1)
    );
    if let Some(v) = r.invariant_violations {
        text += &format!("trials violating success <=> one special number: {v}\n");
    }
    if let Some(count) = a.trace {
        let records = (0..count.min(a.trials))
            .map(|t| run_trial(&policy, &dist, spec, t))
            .collect::<Result<Vec<_>, _>>()?;
        for rec in &records {
            text += &serde_json::to_string(rec).expect("records serialize");
            text.push('\n');
        }
        json["traces"] = serde_json::to_value(&records).expect("records serialize");
    }
    let csv = format!("{}\n{}\n", EstimateReport::CSV_HEADER, r.csv_row());
    let failed = match r.invariant_violations {
        Some(v) if v > 0 => Some(format!("{v} trials violate success <=> exactly one special number")),
        _ => None,
    };
    Ok((Report { json, text, csv }, failed))
}

fn last_success(a: &LastSuccessArgs, seed: u64) -> Outcome {
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let p = a.p.unwrap_or_else(|| (a.n as f64).powf(-2.0 / 3.0));
    let s = conditioned_s_distribution(a.n, p)?;
    let rule = AcceptSet::optimal(&s)?;
    let value = monotone_rule_success(&rule, &s)?;
    let upper = success_upper_bound(&s);
    let inst = LastSuccessInstance::uniform(a.n, p)?;
    let est = if a.trials > 0 {
        Some(simulate_last_success(|st| rule.contains(st), &inst, a.trials, RandomnessSpec::new(seed, 0)))
    } else {
        None
    };
    let json = json!({
        "n": a.n,
        "p": num(p),
        "optimal_value": num(value),
        "upper_bound": num(upper),
        "simulated": est.as_ref().map(|e| num(e.estimate)),
        "ci": est.as_ref().map(|e| json!([num(e.ci.0), num(e.ci.1)])),
    });
    let mut text = format!(
        "n = {}, p = {}\noptimal value {}\nupper bound   {}\n",
        a.n,
        fmt12(p),
        fmt12(value),
        fmt12(upper)
    );
    let mut csv = String::from("n,p,optimal_value,upper_bound,simulated,lo,hi\n");
    match &est {
        Some(e) => {
            text += &format!(
                "simulated     {}  95% CI [{}, {}] over {} trials\n",
                fmt12(e.estimate),
                fmt12(e.ci.0),
                fmt12(e.ci.1),
                e.trials
            );
            csv += &format!(
                "{},{},{},{},{},{},{}\n",
                a.n,
                fmt12(p),
                fmt12(value),
                fmt12(upper),
                fmt12(e.estimate),
                fmt12(e.ci.0),
                fmt12(e.ci.1)
            );
        }
        None => csv += &format!("{},{},{},{},,,\n", a.n, fmt12(p), fmt12(value), fmt12(upper)),
    }
    let failed = (value > upper).then(|| format!("optimal value {} exceeds bound {}", fmt12(value), fmt12(upper)));
    Ok((Report { json, text, csv }, failed))
}

fn superstars(a: &SuperstarArgs, seed: u64) -> Outcome {
    if a.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    if a.k.is_empty() || a.k.contains(&0) {
        return Err(Failure::Usage("--k needs window sizes of at least 1".into()));
    }
    let dist = family(&a.family)?;
    let epsilon = superstar_level(&dist, a.trials, RandomnessSpec::new(seed, 1))?;
    let mut rows = Vec::new();
    let mut text = format!("{} (n = {}): superstar level {}\n", dist.family(), dist.n(), fmt12(epsilon));
    let mut csv = String::from("k,estimate,sigma,bound,within_bound\n");
    let mut failed = None;
    for &k in &a.k {
        let r = top_pair_collision_estimate(&dist, k, a.trials, RandomnessSpec::new(seed, 100 + k as u32))?;
        let ok = r.within_bound();
        rows.push(json!({
            "k": k,
            "estimate": num(r.collision.estimate),
            "sigma": num(r.collision.sigma()),
            "epsilon": num(r.epsilon),
            "bound": num(r.bound),
            "within_bound": ok,
        }));
        text += &format!(
            "k = {k}: collision rate {} vs bound {} (eps {}){}\n",
            fmt12(r.collision.estimate),
            fmt12(r.bound),
            fmt12(r.epsilon),
            if ok { "" } else { "  EXCEEDED" }
        );
        csv += &format!(
            "{k},{},{},{},{ok}\n",
            fmt12(r.collision.estimate),
            fmt12(r.collision.sigma()),
            fmt12(r.bound)
        );
        if !ok && failed.is_none() {
            failed = Some(format!("k = {k}: collision rate exceeds bound + 3 sigma"));
        }
    }
    let json = json!({
        "family": dist.family(),
        "n": dist.n(),
        "trials": a.trials,
        "epsilon": num(epsilon),
        "rows": rows,
    });
    Ok((Report { json, text, csv }, failed))
}
