//! Seeded experiment runner: configuration, per-seed training runs, theorem
//! sweeps, and CSV/text artifacts.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

use crate::agent::{train, AgentConfig, AgentError, TrainMetrics};
use crate::envs::EnvId;
use crate::par::{map_indexed, Execution};
use crate::seeding::indexed_rng;
use crate::theory::{
    corrupt_lookup, random_small_mdp, sweep_gamma_plan, verify_theorem1, verify_theorem2, BoundReport, Corruption,
    LookupFear, Theorem2Input, TheoryError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse { file: PathBuf, line: u64, message: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Compare,
    Theorem1,
    Theorem2,
    SweepGamma,
}

impl std::str::FromStr for Mode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "train" => Mode::Train,
            "compare" => Mode::Compare,
            "theorem1" => Mode::Theorem1,
            "theorem2" => Mode::Theorem2,
            "sweep-gamma" | "sweep" => Mode::SweepGamma,
            other => return Err(HarnessError::Config(format!("unknown mode `{other}`"))),
        })
    }
}

/// Settings for the randomized tabular sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    pub instances: usize,
    /// Evaluation discount.
    pub gamma: f64,
    /// Planning discount; when absent, `0.5 gamma`, `0.9 gamma` and `gamma`.
    pub gamma_plan: Option<f64>,
    /// Flip probability for corrupted classifiers.
    pub flip: f64,
    /// Penalties, cycled across instances.
    pub lambdas: Vec<f64>,
    pub grid_points: usize,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            gamma: 0.9,
            gamma_plan: None,
            flip: 0.2,
            lambdas: vec![0.1, 1.0, 10.0],
            grid_points: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub env: EnvId,
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub theory: TheoryConfig,
    pub execution: Execution,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, HarnessError> {
    let items = value
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|v| parse(key, v))
        .collect::<Result<Vec<f64>, _>>()?;
    if items.is_empty() {
        return Err(HarnessError::Config(format!("`{key}` needs at least one value")));
    }
    Ok(items)
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode, env: EnvId) -> Self {
        let agent = match env {
            EnvId::AdventureSeeker => AgentConfig::adventure_seeker(),
            EnvId::CartPole => AgentConfig::cartpole(),
        };
        Self {
            mode,
            env,
            agent,
            seeds: vec![0],
            out_dir: PathBuf::from("out"),
            theory: TheoryConfig::default(),
            execution: Execution::default(),
        }
    }

    /// Build from defaults, then `file` entries, then `flags` (later wins).
    /// The environment is resolved first since it selects the agent preset.
    pub fn resolve(mode: Mode, file: &[(String, String)], flags: &[(String, String)]) -> Result<Self, HarnessError> {
        let entries: Vec<&(String, String)> = file.iter().chain(flags).collect();
        let env = match entries.iter().rev().find(|(k, _)| k == "env") {
            Some((_, v)) => v.parse().map_err(|e| HarnessError::Config(format!("{e}")))?,
            None => EnvId::AdventureSeeker,
        };
        let mut cfg = Self::defaults(mode, env);
        // seed offsets and counts combine, so apply counts last
        let (counts, rest): (Vec<_>, Vec<_>) = entries.into_iter().partition(|(k, _)| k == "seeds");
        for (k, v) in rest.into_iter().chain(counts) {
            cfg.apply(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one dotted key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let a = &mut self.agent;
        match key {
            "env" => {}
            "mode" => self.mode = value.parse()?,
            "seed" => {
                let base: u64 = parse(key, value)?;
                let n = self.seeds.len() as u64;
                self.seeds = (base..base + n).collect();
                a.seed = base;
            }
            "seeds" => {
                let n: u64 = parse(key, value)?;
                let base = self.seeds.first().copied().unwrap_or(0);
                self.seeds = (base..base + n).collect();
            }
            "out" | "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            "execution" => self.execution = value.trim().parse().map_err(HarnessError::Config)?,
            "lambda" => {
                a.lambda = parse(key, value)?;
                self.theory.lambdas = vec![a.lambda];
            }
            "gamma" => {
                a.gamma = parse(key, value)?;
                self.theory.gamma = a.gamma;
            }
            "episodes" | "agent.episodes" => a.episodes = parse(key, value)?,
            "fear_radius" | "agent.fear_radius" => a.fear_radius = parse(key, value)?,
            "k_lambda" | "agent.phase_in" | "agent.k_lambda" => a.phase_in = parse(key, value)?,
            "agent.lambda" => a.lambda = parse(key, value)?,
            "agent.gamma" => a.gamma = parse(key, value)?,
            "agent.hidden" => a.hidden = parse(key, value)?,
            "agent.batch_size" => a.batch_size = parse(key, value)?,
            "agent.fear_batch_size" => a.fear_batch_size = parse(key, value)?,
            "agent.q_learning_rate" => a.q_learning_rate = parse(key, value)?,
            "agent.fear_learning_rate" => a.fear_learning_rate = parse(key, value)?,
            "agent.max_total_steps" => a.max_total_steps = parse(key, value)?,
            "agent.replay_capacity" => a.replay_capacity = parse(key, value)?,
            "agent.state_store_capacity" => a.state_store_capacity = parse(key, value)?,
            "agent.epsilon_start" => a.epsilon.start = parse(key, value)?,
            "agent.epsilon_end" => a.epsilon.end = parse(key, value)?,
            "agent.epsilon_decay_steps" => a.epsilon.decay_steps = parse(key, value)?,
            "agent.discount_in_target" => a.discount_in_target = parse(key, value)?,
            "agent.train_fear" => a.train_fear = parse(key, value)?,
            "instances" | "theory.instances" => self.theory.instances = parse(key, value)?,
            "theory.gamma" => self.theory.gamma = parse(key, value)?,
            "gamma_plan" | "theory.gamma_plan" => self.theory.gamma_plan = Some(parse(key, value)?),
            "flip" | "theory.flip" => self.theory.flip = parse(key, value)?,
            "theory.lambda" | "theory.lambdas" => self.theory.lambdas = parse_list(key, value)?,
            "grid_points" | "theory.grid_points" => self.theory.grid_points = parse(key, value)?,
            other => return Err(HarnessError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.agent.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("need at least one seed".into()));
        }
        let t = &self.theory;
        if !(0.0..1.0).contains(&t.gamma) {
            return Err(HarnessError::Config(format!("theory discount {} must lie in [0, 1)", t.gamma)));
        }
        if let Some(gp) = t.gamma_plan {
            if !(0.0..=t.gamma).contains(&gp) {
                return Err(HarnessError::Config(format!("planning discount {gp} must lie in [0, {}]", t.gamma)));
            }
        }
        if !(0.0..=1.0).contains(&t.flip) {
            return Err(HarnessError::Config(format!("flip probability {} outside [0, 1]", t.flip)));
        }
        if t.lambdas.iter().any(|l| !(*l >= 0.0)) {
            return Err(HarnessError::Config("penalties must be nonnegative".into()));
        }
        if t.grid_points == 0 {
            return Err(HarnessError::Config("grid needs at least one point".into()));
        }
        Ok(())
    }
}

/// Flatten a TOML document into dotted `(key, value)` pairs. Arrays become
/// comma-separated lists.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    flatten("", &table, &mut out);
    Ok(out)
}

fn scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, scalar(other))),
        }
    }
}

/// Aggregates of one metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub variant: String,
    pub seed: u64,
    pub episodes: usize,
    pub total_steps: usize,
    pub catastrophes: usize,
    /// Catastrophes in the last third of the episodes.
    pub final_third_catastrophes: usize,
    pub mean_return: f64,
}

impl SeedSummary {
    pub fn from_metrics(variant: &str, seed: u64, m: &TrainMetrics) -> Self {
        let n = m.episodes.len();
        let cut = n - n / 3;
        let mean_return = if n == 0 {
            f64::NAN
        } else {
            m.episodes.iter().map(|e| e.episode_return).sum::<f64>() / n as f64
        };
        Self {
            variant: variant.to_string(),
            seed,
            episodes: n,
            total_steps: m.total_steps(),
            catastrophes: m.catastrophes(),
            final_third_catastrophes: m.episodes[cut..].iter().filter(|e| e.catastrophe).count(),
            mean_return,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub name: String,
    pub catastrophes: usize,
    pub final_third_catastrophes: usize,
    pub mean_return: f64,
    pub per_seed: Vec<SeedSummary>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub variants: Vec<VariantSummary>,
}

impl ComparisonReport {
    pub fn from_seeds(rows: Vec<SeedSummary>) -> Self {
        let mut variants: Vec<VariantSummary> = Vec::new();
        for row in rows {
            match variants.iter_mut().find(|v| v.name == row.variant) {
                Some(v) => v.per_seed.push(row),
                None => variants.push(VariantSummary {
                    name: row.variant.clone(),
                    catastrophes: 0,
                    final_third_catastrophes: 0,
                    mean_return: 0.0,
                    per_seed: vec![row],
                }),
            }
        }
        for v in &mut variants {
            v.catastrophes = v.per_seed.iter().map(|s| s.catastrophes).sum();
            v.final_third_catastrophes = v.per_seed.iter().map(|s| s.final_third_catastrophes).sum();
            v.mean_return = v.per_seed.iter().map(|s| s.mean_return).sum::<f64>() / v.per_seed.len() as f64;
        }
        Self { variants }
    }

    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.name == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record([
            "variant",
            "seed",
            "episodes",
            "total_steps",
            "catastrophes",
            "final_third_catastrophes",
            "mean_return",
        ])?;
        for v in &self.variants {
            for s in &v.per_seed {
                w.write_record([
                    s.variant.clone(),
                    s.seed.to_string(),
                    s.episodes.to_string(),
                    s.total_steps.to_string(),
                    s.catastrophes.to_string(),
                    s.final_third_catastrophes.to_string(),
                    format!("{:.6}", s.mean_return),
                ])?;
            }
        }
        w.flush().map_err(|e| HarnessError::io(path, e))?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.variants {
            let _ = writeln!(
                out,
                "{}: {} catastrophes ({} in final thirds), mean return {:.3} over {} seeds",
                v.name,
                v.catastrophes,
                v.final_third_catastrophes,
                v.mean_return,
                v.per_seed.len()
            );
            for s in &v.per_seed {
                let _ = writeln!(
                    out,
                    "  seed {}: {} episodes, {} steps, {} catastrophes ({} final third), mean return {:.3}",
                    s.seed, s.episodes, s.total_steps, s.catastrophes, s.final_third_catastrophes, s.mean_return
                );
            }
        }
        out
    }
}

/// Split `name_seed7.csv` into `("name", 7)`.
fn variant_and_seed(path: &Path) -> (String, u64) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    match stem.rsplit_once("_seed") {
        Some((name, seed)) => (name.to_string(), seed.parse().unwrap_or(0)),
        None => (stem.to_string(), 0),
    }
}

pub fn read_metrics(path: &Path) -> Result<TrainMetrics, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    TrainMetrics::read_csv(file).map_err(|e| HarnessError::Parse {
        file: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    })
}

/// Aggregate metrics CSVs named `<variant>_seed<n>.csv`.
pub fn summarize(files: &[PathBuf]) -> Result<ComparisonReport, HarnessError> {
    let mut rows = Vec::with_capacity(files.len());
    for path in files {
        let metrics = read_metrics(path)?;
        let (variant, seed) = variant_and_seed(path);
        rows.push(SeedSummary::from_metrics(&variant, seed, &metrics));
    }
    Ok(ComparisonReport::from_seeds(rows))
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// False when a theorem check failed.
    pub passed: bool,
    pub report: String,
    pub files: Vec<PathBuf>,
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn train_variant(cfg: &ExperimentConfig, agent: &AgentConfig, variant: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let results = map_indexed(cfg.execution, cfg.seeds.len(), |i| {
        let seed = cfg.seeds[i];
        let mut env = cfg.env.make(seed);
        let config = AgentConfig { seed, ..agent.clone() };
        let (metrics, _) = train(env.as_mut(), &config)?;
        let path = cfg.out_dir.join(format!("{variant}_seed{seed}.csv"));
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        metrics.write_csv(BufWriter::new(file))?;
        Ok::<_, HarnessError>(path)
    });
    results.into_iter().collect()
}

/// Execute the configured experiment, writing artifacts under `out_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    match cfg.mode {
        Mode::Train | Mode::Compare => run_training(cfg),
        Mode::Theorem1 => run_theorem1(cfg),
        Mode::Theorem2 => run_theorem2(cfg),
        Mode::SweepGamma => run_sweep(cfg),
    }
}

fn run_training(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let mut files = train_variant(cfg, &cfg.agent, "if")?;
    if cfg.mode == Mode::Compare {
        files.extend(train_variant(cfg, &cfg.agent.baseline(), "dqn")?);
    }
    let report = summarize(&files)?;
    let summary = cfg.out_dir.join("summary.csv");
    report.write_csv(&summary)?;
    let text = format!("environment {}\n{}", cfg.env, report.to_text());
    let report_path = cfg.out_dir.join("report.txt");
    write_text(&report_path, &text)?;
    files.push(summary);
    files.push(report_path);
    Ok(RunOutcome {
        passed: true,
        report: text,
        files,
    })
}

fn instance_lambda(cfg: &ExperimentConfig, i: usize) -> f64 {
    cfg.theory.lambdas[i % cfg.theory.lambdas.len()]
}

/// Write per-instance check rows and the report; returns the outcome.
fn finish_reports(
    cfg: &ExperimentConfig,
    what: &str,
    reports: Vec<Vec<BoundReport>>,
) -> Result<RunOutcome, HarnessError> {
    let checks_path = cfg.out_dir.join(format!("{what}_checks.csv"));
    let file = File::create(&checks_path).map_err(|e| HarnessError::io(&checks_path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["instance", "case", "name", "lhs", "rhs", "slack", "pass"])?;
    let mut quantities = csv::Writer::from_path(cfg.out_dir.join(format!("{what}_instances.csv")))?;
    let mut q_header_written = false;
    let mut passed = 0;
    let mut failures = String::new();
    let mut worst = f64::INFINITY;
    for (i, group) in reports.iter().enumerate() {
        let ok = group.iter().all(BoundReport::passed);
        if ok {
            passed += 1;
        }
        for (case, r) in group.iter().enumerate() {
            worst = worst.min(r.min_slack());
            if !q_header_written {
                let mut header = vec!["instance".to_string(), "case".to_string()];
                header.extend(r.quantities.iter().map(|(n, _)| n.clone()));
                header.push("pass".into());
                quantities.write_record(&header)?;
                q_header_written = true;
            }
            let mut row = vec![i.to_string(), case.to_string()];
            row.extend(r.quantities.iter().map(|(_, v)| format!("{v:e}")));
            row.push(u8::from(r.passed()).to_string());
            quantities.write_record(&row)?;
            for c in &r.checks {
                w.write_record([
                    i.to_string(),
                    case.to_string(),
                    c.name.clone(),
                    format!("{:e}", c.lhs),
                    format!("{:e}", c.rhs),
                    format!("{:e}", c.slack),
                    u8::from(c.pass).to_string(),
                ])?;
            }
            if !r.passed() {
                let _ = write!(failures, "instance {i} case {case}: {}", r.to_text());
            }
        }
    }
    w.flush().map_err(|e| HarnessError::io(&checks_path, e))?;
    quantities.flush().map_err(|e| HarnessError::io(&cfg.out_dir, e))?;
    let total = reports.len();
    let mut text = format!("{passed}/{total} inequality chains passed\nsmallest slack {worst:.3e}\n");
    text.push_str(&failures);
    let report_path = cfg.out_dir.join("report.txt");
    write_text(&report_path, &text)?;
    Ok(RunOutcome {
        passed: passed == total,
        report: text,
        files: vec![checks_path, cfg.out_dir.join(format!("{what}_instances.csv")), report_path],
    })
}

fn theory_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

fn run_theorem1(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let reports = map_indexed(cfg.execution, cfg.theory.instances, |i| {
        let mut rng = indexed_rng(theory_seed(cfg), "theorem1", i as u64);
        let mdp = random_small_mdp(&mut rng, cfg.theory.gamma);
        verify_theorem1(&mdp, instance_lambda(cfg, i)).map(|r| vec![r])
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    finish_reports(cfg, "theorem1", reports)
}

/// Random MDP, indicator fear on its danger zone, and a flip-corrupted copy.
pub fn theorem2_instance<R: Rng + ?Sized>(
    rng: &mut R,
    gamma: f64,
    flip: f64,
) -> Result<(crate::theory::TabularMdp, LookupFear, LookupFear), TheoryError> {
    let mdp = random_small_mdp(rng, gamma);
    let fear = LookupFear::indicator(&mdp);
    let fear_hat = corrupt_lookup(&fear, Corruption::Flip(flip), rng)?;
    Ok((mdp, fear, fear_hat))
}

fn planning_discounts(cfg: &ExperimentConfig) -> Vec<f64> {
    let g = cfg.theory.gamma;
    match cfg.theory.gamma_plan {
        Some(gp) => vec![gp],
        None => vec![0.5 * g, 0.9 * g, g],
    }
}

fn run_theorem2(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let gammas = planning_discounts(cfg);
    let reports = map_indexed(cfg.execution, cfg.theory.instances, |i| {
        let mut rng = indexed_rng(theory_seed(cfg), "theorem2", i as u64);
        let (mdp, fear, fear_hat) = theorem2_instance(&mut rng, cfg.theory.gamma, cfg.theory.flip)?;
        gammas
            .iter()
            .map(|&gp| {
                verify_theorem2(&Theorem2Input {
                    mdp: &mdp,
                    fear: &fear,
                    fear_hat: &fear_hat,
                    gamma: cfg.theory.gamma,
                    gamma_plan: gp,
                    lambda: instance_lambda(cfg, i),
                    start: None,
                })
            })
            .collect::<Result<Vec<_>, TheoryError>>()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;
    finish_reports(cfg, "theorem2", reports)
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutcome, HarnessError> {
    let g = cfg.theory.gamma;
    let n = cfg.theory.grid_points;
    let grid: Vec<f64> = if n == 1 {
        vec![g]
    } else {
        (0..n).map(|k| if k + 1 == n { g } else { g * k as f64 / (n - 1) as f64 }).collect()
    };
    let curves = map_indexed(cfg.execution, cfg.theory.instances, |i| {
        let mut rng = indexed_rng(theory_seed(cfg), "sweep-gamma", i as u64);
        let (mdp, fear, fear_hat) = theorem2_instance(&mut rng, g, cfg.theory.flip)?;
        let input = Theorem2Input {
            mdp: &mdp,
            fear: &fear,
            fear_hat: &fear_hat,
            gamma: g,
            gamma_plan: g,
            lambda: instance_lambda(cfg, i),
            start: None,
        };
        sweep_gamma_plan(&input, &grid)
    });
    let curves = curves.into_iter().collect::<Result<Vec<_>, _>>()?;

    let curve_path = cfg.out_dir.join("sweep_curve.csv");
    let mut w = csv::Writer::from_path(&curve_path)?;
    w.write_record(["instance", "gamma_plan", "loss", "best"])?;
    let mut text = String::new();
    let mut nonnegative = true;
    for (i, (best, curve)) in curves.iter().enumerate() {
        for (gp, loss) in curve {
            nonnegative &= *loss >= -crate::theory::bounds::LOSS_TOL;
            w.write_record([
                i.to_string(),
                format!("{gp}"),
                format!("{loss:e}"),
                u8::from(gp == best).to_string(),
            ])?;
        }
        let _ = writeln!(text, "instance {i}: best planning discount {best}");
    }
    w.flush().map_err(|e| HarnessError::io(&curve_path, e))?;
    let header = format!(
        "{} instances, {} grid points; losses {}\n",
        curves.len(),
        grid.len(),
        if nonnegative { "all nonnegative" } else { "include NEGATIVE values" }
    );
    let text = header + &text;
    let report_path = cfg.out_dir.join("report.txt");
    write_text(&report_path, &text)?;
    Ok(RunOutcome {
        passed: nonnegative,
        report: text,
        files: vec![curve_path, report_path],
    })
}
