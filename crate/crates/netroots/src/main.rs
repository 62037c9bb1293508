use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use netroots::estimation::{em_estimate_alpha, estimate_theta, EmConfig};
use netroots::experiment::{self, Scenario};
use netroots::generate::{generate, relabel_randomly};
use netroots::gibbs::{run_chains, tree_root_distributions, ChainConfig, Mode, SampleRecord};
use netroots::inference::{credible_set, FixedKMatcher, KHistogram, RandomKDiscovery};
use netroots::oracle::{exact_root_posterior, exact_seq_root_posterior};
use netroots::report::{self, ClusterReport, Estimates, InferReport};
use netroots::{Error, LabeledGraph, ModelParams, Variant};

#[derive(Parser)]
#[command(name = "netroots", version, about = "Root and community inference for noisy growth networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a graph and write `<out>.edges` and `<out>.truth.json`.
    Simulate(SimulateArgs),
    /// Sample the posterior and report root probabilities and credible sets.
    Infer(InferArgs),
    /// Estimate alpha (with beta = 1) and the noise rate from an edge list.
    Estimate(EstimateArgs),
    /// Compare the sampler with exact enumeration on a small graph.
    OracleCheck(OracleArgs),
    /// Repeated simulate-and-infer trials, written as CSV.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Single,
    FixedK,
    RandomK,
    Seq,
    SeqStar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Standard,
    Collapsed,
    Seq,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" | "ua" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "single")]
    variant: VariantArg,
    /// Attachment offset; `inf` selects uniform attachment.
    #[arg(long, default_value = "0", value_parser = parse_alpha)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 1.5)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_tilde: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_tilde: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
}

impl ModelArgs {
    /// Builds parameters with beta normalized to 1 (or the uniform sentinel when beta = 0).
    fn params(&self) -> netroots::Result<ModelParams> {
        let (mut a, mut b, mut a0) = (self.alpha, self.beta, self.alpha0);
        if b == 0.0 {
            if !(a > 0.0) {
                return Err(Error::InvalidParams("alpha and beta cannot both be 0".into()));
            }
            // uniform attachment; root weights are measured against total weight 1
            a0 /= if a.is_finite() { a } else { 1.0 };
            a = f64::INFINITY;
            b = 1.0;
        } else if b != 1.0 && b.is_finite() && b > 0.0 {
            a /= b;
            a0 /= b;
            b = 1.0;
        }
        let p = match self.variant {
            VariantArg::Single => ModelParams::single_root(a, b),
            VariantArg::FixedK => ModelParams::fixed_k(a, b, self.k.unwrap_or(2)),
            VariantArg::RandomK => ModelParams::random_k(a, b, a0),
            VariantArg::Seq => ModelParams::seq(a, b, self.theta, self.alpha_tilde, self.beta_tilde),
            VariantArg::SeqStar => ModelParams::seq_star(a, b, self.theta, self.alpha_tilde, self.beta_tilde, self.eta),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Clone)]
struct ChainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    max_sweeps: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Hellinger tolerance between chains.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Length of the shuffled prefix for seq root moves.
    #[arg(long)]
    k0: Option<usize>,
    /// Transposition proposals per seq sweep (default: 4n).
    #[arg(long)]
    transpositions: Option<usize>,
    /// Prefix transposition and shuffle rounds per seq sweep.
    #[arg(long)]
    root_moves: Option<usize>,
    /// Sample alpha0 instead of holding it fixed (random-k).
    #[arg(long)]
    sample_alpha0: bool,
    /// Metropolis updates of alpha, theta and alpha-tilde (seq variants).
    #[arg(long)]
    sample_seq_params: bool,
}

impl ChainArgs {
    fn config(&self, params: &ModelParams) -> ChainConfig {
        let mut c = ChainConfig::for_params(params);
        c.seed = self.seed;
        if let Some(x) = self.burn_in {
            c.burn_in = x;
        }
        if let Some(x) = self.max_sweeps {
            c.max_sweeps = x;
        }
        if let Some(x) = self.chains {
            c.num_chains = x;
        }
        if let Some(x) = self.tol {
            c.convergence_tol = x;
        }
        if let Some(m) = self.mode {
            c.mode = match m {
                ModeArg::Standard => Mode::Standard,
                ModeArg::Collapsed => Mode::Collapsed,
                ModeArg::Seq => Mode::Seq,
            };
        }
        if let Some(x) = self.k0 {
            c.k0 = x;
        }
        c.transpositions = self.transpositions;
        if let Some(x) = self.root_moves {
            c.root_moves = x;
        }
        c.sample_alpha0 = self.sample_alpha0;
        c.sample_seq_params = self.sample_seq_params;
        c
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    /// Edge count (not used by the seq variants).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Hide arrival order by relabeling nodes uniformly at random.
    #[arg(long)]
    relabel: bool,
    /// Output prefix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Edge list file (`-` for stdin).
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Estimate alpha and the noise rate instead of using --alpha/--beta.
    #[arg(long)]
    estimate: bool,
    #[command(flatten)]
    chain: ChainArgs,
    /// Credible set levels as epsilon values.
    #[arg(long = "epsilon", default_values_t = vec![0.2, 0.05, 0.01])]
    epsilons: Vec<f64>,
    /// Total-variation threshold for random-k cluster discovery.
    #[arg(long, default_value_t = 0.75)]
    cluster_tv: f64,
    /// Trees smaller than this fraction of n are ignored in cluster summaries.
    #[arg(long, default_value_t = 0.01)]
    min_size_fraction: f64,
    /// Write every post-burn-in sample as newline-delimited JSON.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Per-node probabilities as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    chain: ChainArgs,
    /// Post-burn-in sweeps per chain.
    #[arg(long, default_value_t = 50_000)]
    sweeps: usize,
    /// Largest acceptable total-variation distance.
    #[arg(long, default_value_t = 0.02)]
    max_tv: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    /// Coverage of the credible set at fixed n and m.
    Coverage,
    /// Set size over a grid m = c n sqrt(n).
    SizeVsM,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "coverage")]
    scenario: ScenarioArg,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    m: usize,
    /// Grid of c values for size-vs-m.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.2, 0.4, 0.6, 0.8, 1.0])]
    c: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long)]
    estimate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trial CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Aggregate JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn read_graph(path: &Path) -> anyhow::Result<LabeledGraph> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(LabeledGraph::load_edge_list(&text)?)
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let params = a.model.params()?;
    let m = match (a.m, params.variant.is_seq()) {
        (Some(m), false) => m,
        (None, false) => bail!(Error::InvalidParams("--m is required for this variant".into())),
        (_, true) => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut sim = generate(a.n, m, &params, &mut rng)?;
    if a.relabel {
        sim = relabel_randomly(&sim, &mut rng).0;
    }
    let edges = a.out.with_extension("edges");
    let truth = a.out.with_extension("truth.json");
    fs::write(&edges, sim.graph.to_edge_list())?;
    fs::write(&truth, report::to_json(&sim.to_record())?)?;
    log::info!("wrote {} and {}", edges.display(), truth.display());
    Ok(())
}

enum Clusters {
    None,
    Fixed(FixedKMatcher),
    Random(RandomKDiscovery, KHistogram),
}

fn infer(a: InferArgs) -> anyhow::Result<()> {
    let start = Instant::now();
    let g = read_graph(&a.input)?;
    let mut params = a.model.params()?;
    let mut estimated = None;
    if a.estimate {
        let theta = estimate_theta(g.n(), g.m())?;
        let alpha = em_estimate_alpha(&g, theta, &EmConfig::default()).alpha;
        params = params.with_attachment(alpha, 1.0);
        estimated = Some(Estimates::new(alpha, theta));
    }
    let config = a.chain.config(&params);
    let n = g.n();
    let mut clusters = match params.variant {
        Variant::FixedK => Clusters::Fixed(FixedKMatcher::new(n)),
        Variant::RandomK => Clusters::Random(
            RandomKDiscovery::new(n, a.cluster_tv, a.min_size_fraction),
            KHistogram::new(n, a.min_size_fraction),
        ),
        _ => Clusters::None,
    };
    let mut sample_out = match &a.samples {
        Some(p) => Some(BufWriter::new(fs::File::create(p)?)),
        None => None,
    };
    let mut io_err = None;
    let run = run_chains(&g, &params, &config, &mut |s| {
        if let Some(w) = sample_out.as_mut() {
            let line = report::to_json_line(&SampleRecord::new(s, &g)).map_err(anyhow::Error::from);
            if let Err(e) = line.and_then(|l| writeln!(w, "{l}").map_err(Into::into)) {
                io_err.get_or_insert(e);
            }
        }
        match &mut clusters {
            Clusters::None => {}
            Clusters::Fixed(m) => {
                let (d, t) = tree_root_distributions(s.forest, s.root_probs);
                m.push(&d, &t);
            }
            Clusters::Random(disc, hist) => {
                let (d, t) = tree_root_distributions(s.forest, s.root_probs);
                disc.push(&d, &t);
                hist.push(&t.iter().map(|x| x.len()).collect::<Vec<_>>());
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    if let Some(mut w) = sample_out {
        w.flush()?;
    }
    if !run.diagnostics.converged {
        log::warn!("chains did not reach the Hellinger tolerance within {} sweeps", run.diagnostics.sweeps);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xc5e7);
    let mut sets = BTreeMap::new();
    for &eps in &a.epsilons {
        let cs = credible_set(&run.root_distribution, eps, &mut rng)?;
        sets.insert(
            report::level_key(eps),
            cs.nodes.iter().map(|&u| g.label(u).to_string()).collect(),
        );
    }
    let (cluster_report, k_dist) = match &clusters {
        Clusters::None => (None, None),
        Clusters::Fixed(m) => (Some(ClusterReport::from(&m.finish())), None),
        Clusters::Random(d, h) => (Some(ClusterReport::from(&d.finish())), Some(h.distribution())),
    };
    if let Some(p) = &a.csv {
        let mut text = String::from("node,root_probability\n");
        for (u, x) in run.root_distribution.probs().iter().enumerate() {
            text.push_str(&format!("{},{}\n", g.label(u), report::round_sig(*x, report::SIGNIFICANT_DIGITS)));
        }
        fs::write(p, text)?;
    }
    let rep = InferReport {
        schema_version: netroots::SCHEMA_VERSION,
        variant: params.variant.name(),
        params,
        estimated,
        n,
        m: g.m(),
        nodes: g.labels().to_vec(),
        root_distribution: run.root_distribution.probs().to_vec(),
        credible_sets: sets,
        clusters: cluster_report,
        posterior_over_k: k_dist,
        diagnostics: run.diagnostics,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_out(a.out.as_deref(), &report::to_json(&rep)?)
}

fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let g = read_graph(&a.input)?;
    let theta = estimate_theta(g.n(), g.m())?;
    let em = em_estimate_alpha(&g, theta, &EmConfig::default());
    let out = serde_json::json!({
        "schema_version": netroots::SCHEMA_VERSION,
        "alpha_hat": em.alpha.is_finite().then_some(em.alpha),
        "theta_hat": theta,
        "em_iterations": em.iterations,
        "em_converged": em.converged,
        "n": g.n(),
        "m": g.m(),
    });
    write_out(a.out.as_deref(), &report::to_json(&out)?)
}

fn oracle_check(a: OracleArgs) -> anyhow::Result<bool> {
    let g = read_graph(&a.input)?;
    let params = a.model.params()?;
    let exact = if params.variant.is_seq() {
        exact_seq_root_posterior(&g, &params)?
    } else {
        exact_root_posterior(&g, &params)?.root_dist
    };
    let mut config = a.chain.config(&params);
    config.max_sweeps = config.burn_in + a.sweeps;
    config.stop_at_convergence = false;
    let run = run_chains(&g, &params, &config, &mut |_| {})?;
    let tv = run.root_distribution.tv(&exact)?;
    let pass = tv <= a.max_tv;
    let out = serde_json::json!({
        "schema_version": netroots::SCHEMA_VERSION,
        "variant": params.variant.name(),
        "nodes": g.labels(),
        "exact": exact.probs(),
        "sampled": run.root_distribution.probs(),
        "tv": tv,
        "max_tv": a.max_tv,
        "pass": pass,
    });
    write_out(None, &report::to_json(&out)?)?;
    Ok(pass)
}

fn run_experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    let params = a.model.params()?;
    let grid: Vec<usize> = match a.scenario {
        ScenarioArg::Coverage => vec![a.m],
        ScenarioArg::SizeVsM => experiment::size_sweep_edges(a.n, &a.c),
    };
    let mut csv = String::from("m,trial,seed,covered,set_size,alpha_hat,converged,sweeps\n");
    let mut summary = Vec::new();
    for (i, &m) in grid.iter().enumerate() {
        let s = Scenario {
            params: params.clone(),
            n: a.n,
            m,
            estimate: a.estimate,
            epsilon: a.epsilon,
        };
        let chain = experiment::default_chain(&s);
        let rows = experiment::run_experiment(&s, &chain, a.trials, a.seed.wrapping_add(i as u64))?;
        for r in &rows {
            let ah = r.alpha_hat.map(|x| report::round_sig(x, report::SIGNIFICANT_DIGITS).to_string());
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.m,
                r.trial,
                r.seed,
                r.covered,
                r.set_size,
                ah.unwrap_or_default(),
                r.converged,
                r.sweeps
            ));
        }
        let mut agg = serde_json::to_value(experiment::aggregate(&rows))?;
        agg["m"] = m.into();
        summary.push(agg);
    }
    write_out(a.out.as_deref(), &csv)?;
    let doc = serde_json::json!({
        "schema_version": netroots::SCHEMA_VERSION,
        "params": params,
        "n": a.n,
        "epsilon": a.epsilon,
        "rows": summary,
    });
    match &a.summary {
        Some(p) => fs::write(p, report::to_json(&doc)?)?,
        None => eprint!("{}", report::to_json(&doc)?),
    }
    Ok(())
}

fn init_pool() {
    if let Some(w) = std::env::var("NETROOTS_WORKERS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_pool();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Simulate(a) => simulate(a).map(|_| true),
        Cmd::Infer(a) => infer(a).map(|_| true),
        Cmd::Estimate(a) => estimate(a).map(|_| true),
        Cmd::OracleCheck(a) => oracle_check(a),
        Cmd::Experiment(a) => run_experiment(a).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(err) if err.is_validation() => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
