use std::path::PathBuf;
use std::process::ExitCode;

use bezier_dp::audit::{
    bernstein_map, covariance_map, empirical_sensitivity, transformed_map, ucov_map, uvar_map, variance_map,
    NeighborModel, SensitivityReport,
};
use bezier_dp::harness::{
    run_estimate, Benchmark, Distribution, EstimateRequest, ExperimentConfig, NoiseMode, StatisticKind,
};
use bezier_dp::theory::{
    covariance_instance_constant, instance_constants, moment_release_mse, sigma_lower_bound, sigma_squared,
    worst_case_table, InstanceProfile,
};
use bezier_dp::{Error, MechanismId};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bezier-dp", version, about = "Differentially private moment estimation under add-remove neighbours")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One private release on a CSV dataset.
    Estimate(EstimateArgs),
    /// Monte Carlo error of estimators across privacy budgets.
    Benchmark(BenchmarkArgs),
    /// Randomized sensitivity search over neighbouring datasets.
    Audit(AuditArgs),
    /// Closed-form error constants.
    Theory {
        #[command(subcommand)]
        query: TheoryQuery,
    },
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV: one record per line, optional header.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mechanism: MechanismId,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Statistic, e.g. `moment:2:1`; inferred from the mechanism otherwise.
    #[arg(long)]
    statistic: Option<StatisticKind>,
    #[arg(long, default_value = "seeded")]
    noise: NoiseMode,
    /// Clip out-of-range cells into [0, 1] instead of failing.
    #[arg(long)]
    clip_input: bool,
    /// Clip swap-model releases to the statistic's range.
    #[arg(long)]
    swap_clip: bool,
    /// Also print the noisy intermediate aggregates.
    #[arg(long)]
    debug_aggregates: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// JSON config; inline flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mechanism ids, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    mechanism: Vec<MechanismId>,
    /// Privacy budgets, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// uniform | beta:<mean> | correlated:<rho> | two_point:<p> | csv:<path>
    #[arg(long)]
    distribution: Option<Distribution>,
    #[arg(long)]
    statistic: Option<StatisticKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV path; a JSON config sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    noise: Option<NoiseMode>,
    /// Hold one dataset across all trials.
    #[arg(long, conflicts_with = "fresh_data")]
    fixed_data: bool,
    /// Draw a fresh dataset for every trial.
    #[arg(long)]
    fresh_data: bool,
    #[arg(long)]
    clip_input: bool,
    #[arg(long)]
    swap_clip: bool,
    /// Worker threads (0 = one per core); overrides BEZIER_DP_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct AuditArgs {
    /// Random neighbour pairs per base size and map.
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    /// Base dataset sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,20,100")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Highest Bernstein degree audited.
    #[arg(long, default_value_t = 4)]
    max_degree: u32,
}

#[derive(Subcommand)]
enum TheoryQuery {
    /// Lower-bound constant σ(ε) on a grid of budgets.
    Sigma {
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.3,1,3")]
        epsilon: Vec<f64>,
    },
    /// Instance constants of the three variance estimators at mean r, variance v.
    Constants {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        v: f64,
    },
    /// Instance constant of Bézier covariance.
    Covariance {
        #[arg(long)]
        rx: f64,
        #[arg(long)]
        ry: f64,
        #[arg(long)]
        c: f64,
    },
    /// MSE of the j-th moment of a degree-k release.
    Moment {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        j: u32,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
    },
    /// Worst-case constants of ε²·R.
    Table,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Data(_) | Error::Io(_) | Error::UndefinedStatistic(_) => 3,
        Error::Capacity(_) => 4,
        Error::Exhausted { .. } => 1,
    }
}

fn estimate(a: EstimateArgs) -> Result<(), Error> {
    let est = run_estimate(&EstimateRequest {
        path: a.data,
        mechanism: a.mechanism,
        statistic: a.statistic,
        epsilon: a.epsilon,
        seed: a.seed,
        noise: a.noise,
        clip_input: a.clip_input,
        swap_clip: a.swap_clip,
    })?;
    println!("mechanism: {}", est.mechanism);
    println!("epsilon: {}", est.epsilon);
    println!("value: {}", est.value);
    match est.clip_applied {
        Some(c) => println!("clip: [{}, {}]", c.lo(), c.hi()),
        None => println!("clip: none"),
    }
    if a.debug_aggregates {
        for (name, v) in &est.noisy_aggregates {
            println!("  {name} = {v}");
        }
    }
    Ok(())
}

fn benchmark(a: BenchmarkArgs) -> Result<(), Error> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::new(Vec::new(), Vec::new()),
    };
    if !a.mechanism.is_empty() {
        cfg.mechanisms = a.mechanism;
    }
    if !a.epsilon.is_empty() {
        cfg.epsilons = a.epsilon;
    }
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(d) = a.distribution {
        cfg.distribution = d;
    }
    if a.statistic.is_some() {
        cfg.statistic = a.statistic;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if a.out.is_some() {
        cfg.output_path = a.out;
    }
    if let Some(m) = a.noise {
        cfg.noise = m;
    }
    if a.fixed_data {
        cfg.fixed_data = Some(true);
    }
    if a.fresh_data {
        cfg.fixed_data = Some(false);
    }
    cfg.clip_input |= a.clip_input;
    cfg.swap_clip |= a.swap_clip;

    let report = Benchmark::new(&cfg, a.threads)?.run()?;
    print!("{}", report.to_csv()?);
    if let Some(path) = &cfg.output_path {
        let sidecar = report.write(path)?;
        eprintln!("wrote {} and {}", path.display(), sidecar.display());
    }
    Ok(())
}

fn print_audit(name: &str, rep: &SensitivityReport, claim: &str, ok: bool) {
    println!(
        "{} {name}: pairs={} max_l1={:.12} min_l1={:.12} diff_range=[{:.12}, {:.12}] ({claim})",
        if ok { "PASS" } else { "FAIL" },
        rep.pairs,
        rep.max_l1,
        rep.min_l1,
        rep.min_diff,
        rep.max_diff,
    );
}

fn audit(a: AuditArgs) -> Result<bool, Error> {
    const TOL: f64 = 1e-9;
    let mut all = true;
    let mut check = |name: &str, rep: &SensitivityReport, claim: &str, ok: bool| {
        print_audit(name, rep, claim, ok);
        all &= ok;
    };
    let ar = NeighborModel::AddRemove;
    for k in 1..=a.max_degree {
        for d in 1..=2 {
            let rep = empirical_sensitivity(bernstein_map(k)?, d, ar, a.pairs, &a.sizes, a.seed)?;
            let ok = (rep.max_l1 - 1.0).abs() <= TOL && (rep.min_l1 - 1.0).abs() <= TOL;
            check(&format!("bernstein k={k} d={d}"), &rep, "L1 difference = 1", ok);
        }
    }
    let rep = empirical_sensitivity(uvar_map, 1, ar, a.pairs, &a.sizes, a.seed)?;
    let ok = rep.min_diff >= -TOL && rep.max_diff <= 1.0 + TOL;
    check("uvar", &rep, "difference in [0, 1]", ok);
    let rep = empirical_sensitivity(ucov_map, 2, ar, a.pairs, &a.sizes, a.seed)?;
    let ok = rep.min_diff >= -1.0 - TOL && rep.max_diff <= 1.0 + TOL;
    check("ucov", &rep, "difference in [-1, 1]", ok);
    let rep = empirical_sensitivity(transformed_map, 1, ar, a.pairs, &a.sizes, a.seed)?;
    check("(n - uvar, uvar)", &rep, "L1 <= 1", rep.max_l1 <= 1.0 + TOL);

    let swap_sizes: Vec<usize> = a.sizes.iter().copied().filter(|&n| n > 0).collect();
    if !swap_sizes.is_empty() {
        let sw = NeighborModel::Swap;
        for (name, dim, map) in [
            ("swap variance", 1, variance_map as fn(&_) -> _),
            ("swap covariance", 2, covariance_map),
        ] {
            let rep = empirical_sensitivity(map, dim, sw, a.pairs, &swap_sizes, a.seed)?;
            let ok = rep
                .max_l1_by_size
                .iter()
                .all(|&(n, l1)| l1 <= 1.0 / n as f64 + TOL);
            check(name, &rep, "L1 <= 1/n", ok);
        }
    }
    Ok(all)
}

fn theory(q: TheoryQuery) -> Result<(), Error> {
    match q {
        TheoryQuery::Sigma { epsilon } => {
            println!("epsilon,sigma,sigma_squared,sigma_squared_eps2_over_2");
            for e in epsilon {
                let s = sigma_lower_bound(e)?;
                let s2 = sigma_squared(e)?;
                println!("{e},{s},{s2},{}", s * s * e * e / 2.0);
            }
        }
        TheoryQuery::Constants { r, v } => {
            let c = instance_constants(InstanceProfile::new(r, v)?);
            println!("C_b = {}", c.c_b);
            println!("C_c = {}", c.c_c);
            println!("C_u = {}", c.c_u);
        }
        TheoryQuery::Covariance { rx, ry, c } => {
            println!("C = {}", covariance_instance_constant(rx, ry, c)?);
        }
        TheoryQuery::Moment { k, j, epsilon } => {
            println!("mse = {}", moment_release_mse(k, j, epsilon)?);
        }
        TheoryQuery::Table => {
            for (name, c) in worst_case_table() {
                println!("{name}: {c}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a).map(|_| true),
        Command::Benchmark(a) => benchmark(a).map(|_| true),
        Command::Audit(a) => audit(a),
        Command::Theory { query } => theory(query).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
