use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use beliefweb::expansion::{CONSISTENCY_MAX_ITER, CONSISTENCY_TOL};
use beliefweb::format::{format_g, load_structure, load_system, SystemFile, LOAD_SUM_TOL};
use beliefweb::harness::{self, ExperimentConfig, MAX_JOINT_SIZE};
use beliefweb::maxent::{MAXENT_MAX_ITER, MAXENT_TOL};
use beliefweb::scoring::{ScoreTerm, TermKind};
use beliefweb::web::VarSet;
use beliefweb::{
    alternative_model, alternative_model_any, check_consistency, classify, entropy, maxent_fit,
    product_extension, score_report, unpack_with_rule, Error, ExpansionResult, JointDistribution,
    OStarRule, ProbabilitySystem, Result, Structure,
};

#[derive(Parser)]
#[command(name = "beliefweb", version, about = "Expansions and score guarantees for belief-network webs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Standard,
    Alt,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system file's structure and table normalization.
    Validate { file: PathBuf },
    /// Print the unpacking steps and structure labels.
    Unpack {
        file: PathBuf,
        #[arg(long, default_value_t = OStarRule::Maximal)]
        ostar: OStarRule,
    },
    /// Print the full joint table of an expansion.
    Expand {
        file: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Build the alternative model from pairwise intersections when the
        /// structure is not a web.
        #[arg(long)]
        allow_non_web: bool,
        #[arg(long, default_value_t = OStarRule::Maximal)]
        ostar: OStarRule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Guaranteed scores of both models, with a per-term breakdown.
    Score {
        file: PathBuf,
        #[arg(long, default_value_t = OStarRule::Maximal)]
        ostar: OStarRule,
    },
    /// Decide whether the component tables admit a common joint.
    Consistency {
        file: PathBuf,
        #[arg(long, default_value_t = CONSISTENCY_TOL)]
        tol: f64,
        #[arg(long, default_value_t = CONSISTENCY_MAX_ITER)]
        max_iter: usize,
    },
    /// Fit the maximum-entropy joint and compare it with the product extension.
    Maxent {
        file: PathBuf,
        #[arg(long, default_value_t = MAXENT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = MAXENT_MAX_ITER)]
        max_iter: usize,
    },
    /// Compare both models on random consistent systems.
    Experiment {
        /// Preset name or structure file.
        #[arg(long)]
        structure: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = OStarRule::Maximal)]
        ostar: OStarRule,
    },
    /// Standard model under every admissible unpacking.
    Probe { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e);
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { file } => validate(&file),
        Command::Unpack { file, ostar } => {
            let structure = load_structure(&file)?;
            println!("labels = {}", labels(&structure));
            print!("{}", unpack_report(&structure, ostar)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Expand { file, model, allow_non_web, ostar, out } => {
            let system = load(&file)?;
            let result = expand(&system, model, allow_non_web, ostar)?;
            emit(&joint_report(&result), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { file, ostar } => {
            print!("{}", score(&load(&file)?, ostar)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Consistency { file, tol, max_iter } => {
            let v = check_consistency(&load(&file)?, tol, max_iter);
            println!("status = {}", v.status);
            println!("residual = {}", format_g(v.residual, 12));
            println!("sweeps = {}", v.sweeps);
            Ok(ExitCode::SUCCESS)
        }
        Command::Maxent { file, tol, max_iter } => {
            print!("{}", maxent(&load(&file)?, tol, max_iter)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment { structure, trials, seed, out, ostar } => {
            let config = ExperimentConfig {
                structure: resolve_structure(&structure)?,
                trials,
                seed,
                ostar_rule: ostar,
            };
            let exp = harness::run_experiment(&config)?;
            match out {
                Some(path) => {
                    fs::write(&path, exp.to_csv())?;
                    println!("{}", exp.summary);
                }
                None => {
                    print!("{}", exp.to_csv());
                    eprintln!("{}", exp.summary);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Probe { file } => {
            let r = harness::unpacking_invariance_probe(&load(&file)?)?;
            println!("unpackings = {}", r.unpackings);
            println!("distinct_overlap_sets = {}", r.distinct_overlap_sets);
            println!("max_joint_deviation = {}", format_g(r.max_joint_deviation, 12));
            println!("max_score_deviation = {}", format_g(r.max_score_deviation, 12));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(path: &Path) -> Result<ProbabilitySystem> {
    let loaded = load_system(path)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.system)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn resolve_structure(arg: &str) -> Result<Structure> {
    if Path::new(arg).is_file() {
        load_structure(arg)
    } else {
        harness::preset(arg)
    }
}

fn labels(structure: &Structure) -> String {
    classify(structure)
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn braces(structure: &Structure, set: &VarSet) -> String {
    let names: Vec<&str> = set.iter().map(|&v| structure.space().name(v)).collect();
    format!("{{{}}}", names.join(","))
}

fn validate(path: &Path) -> Result<ExitCode> {
    let file = SystemFile::from_json(&fs::read_to_string(path)?)?;
    let structure = file.structure()?;
    println!(
        "variables = {}, joint states = {}, components = {}",
        structure.space().num_variables(),
        structure.space().size(),
        structure.len()
    );
    let mut ok = true;
    for (i, spec) in file.components.iter().enumerate() {
        let label = structure.label(i);
        match &spec.probs {
            None => {
                ok = false;
                println!("component {label}: no probs");
            }
            Some(p) => {
                let sum: f64 = p.iter().sum();
                let fine = (sum - 1.0).abs() <= LOAD_SUM_TOL;
                ok &= fine;
                println!(
                    "component {label}: {} entries, sum = {} {}",
                    p.len(),
                    format_g(sum, 12),
                    if fine { "ok" } else { "FAIL" }
                );
            }
        }
    }
    println!("labels = {}", labels(&structure));
    let loaded = file.to_system()?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    if ok {
        println!("valid");
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::FAILURE)
    }
}

fn unpack_report(structure: &Structure, rule: OStarRule) -> Result<String> {
    let mut s = String::new();
    let u = unpack_with_rule(structure, rule)?;
    writeln!(s, "ostar_rule = {rule}").unwrap();
    for (n, step) in u.steps().iter().enumerate() {
        let ostar: Vec<String> = step.intersection_overlaps.iter().map(|o| braces(structure, o)).collect();
        writeln!(
            s,
            "step {}: component {}, tail {}, overlap {}, O* = {}",
            n + 1,
            structure.label(step.component),
            braces(structure, &step.tail),
            braces(structure, &step.overlap),
            if ostar.is_empty() { "{}".to_string() } else { ostar.join(", ") }
        )
        .unwrap();
    }
    writeln!(s, "partition = {}", u.partition_condition()).unwrap();
    Ok(s)
}

fn expand(
    system: &ProbabilitySystem,
    model: ModelArg,
    allow_non_web: bool,
    rule: OStarRule,
) -> Result<ExpansionResult> {
    let unpacking = unpack_with_rule(system.structure(), rule);
    match (model, unpacking) {
        (ModelArg::Standard, u) => product_extension(system, &u?),
        (ModelArg::Alt, Ok(u)) => alternative_model(system, &u),
        (ModelArg::Alt, Err(Error::NotAWeb { .. })) if allow_non_web => {
            eprintln!("warning: structure is not a web; using pairwise intersection overlaps");
            alternative_model_any(system, rule)
        }
        (ModelArg::Alt, Err(e)) => Err(e),
    }
}

fn joint_report(result: &ExpansionResult) -> String {
    let space = result.joint.space();
    let mut s = String::new();
    writeln!(s, "model = {}", result.model).unwrap();
    writeln!(s, "k = {}", format_g(result.k, 12)).unwrap();
    let names: Vec<&str> = space.variables().iter().map(|v| v.name()).collect();
    writeln!(s, "{} p", names.join(" ")).unwrap();
    for (state, p) in space.enumerate_states().iter().zip(result.joint.values()) {
        let cells: Vec<String> = state.iter().map(|x| x.to_string()).collect();
        writeln!(s, "{} {}", cells.join(" "), format_g(*p, 12)).unwrap();
    }
    s
}

/// Six decimals, without a sign on values that round to zero.
fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        s[1..].to_string()
    } else {
        s
    }
}

fn term_line(structure: &Structure, t: &ScoreTerm) -> String {
    let (sign, note) = match t.kind {
        TermKind::Component => ('+', String::new()),
        _ => ('-', format!(" ({} from {})", t.kind, structure.label(t.component))),
    };
    format!("  {sign} G({}) = {}{note}", t.label, fixed6(t.value))
}

fn score(system: &ProbabilitySystem, rule: OStarRule) -> Result<String> {
    let unpacking = unpack_with_rule(system.structure(), rule)?;
    let reference = if system.space().size() <= MAX_JOINT_SIZE {
        Some(maxent_fit(system, MAXENT_TOL, MAXENT_MAX_ITER))
    } else {
        None
    };
    let witness = reference.as_ref().and_then(|r| r.as_ref().ok()).map(|m| &m.joint);
    let r = score_report(system, &unpacking, witness)?;
    let st = system.structure();
    let mut s = String::new();
    writeln!(s, "g_standard = {}", fixed6(r.g_guaranteed_standard)).unwrap();
    writeln!(s, "g_alt = {}", fixed6(r.g_guaranteed_alt)).unwrap();
    writeln!(s, "k = {}", fixed6(r.k)).unwrap();
    writeln!(s, "ln_k = {}", fixed6(r.ln_k)).unwrap();
    writeln!(s, "uniform = {}", fixed6(r.uniform_baseline)).unwrap();
    writeln!(s, "g_self_standard = {}", fixed6(r.g_self_standard)).unwrap();
    writeln!(s, "g_self_alt = {}", fixed6(r.g_self_alt)).unwrap();
    writeln!(s, "partition = {}", unpacking.partition_condition()).unwrap();
    writeln!(s, "standard terms:").unwrap();
    for t in &r.standard_terms {
        writeln!(s, "{}", term_line(st, t)).unwrap();
    }
    writeln!(s, "alt terms:").unwrap();
    for t in &r.alt_terms {
        writeln!(s, "{}", term_line(st, t)).unwrap();
    }
    writeln!(s, "  + ln k = {}", fixed6(r.ln_k)).unwrap();
    match (reference, r.g_relative) {
        (None, _) => writeln!(s, "cross-check skipped: joint too large").unwrap(),
        (Some(Err(e)), _) => writeln!(s, "cross-check skipped: {e}").unwrap(),
        (Some(Ok(_)), Some((direct_std, direct_alt))) => {
            writeln!(s, "cross-check against the maximum-entropy member:").unwrap();
            writeln!(
                s,
                "  standard: direct = {}, local = {}, diff = {}",
                format_g(direct_std, 12),
                format_g(r.g_guaranteed_standard, 12),
                format_g((direct_std - r.g_guaranteed_standard).abs(), 3)
            )
            .unwrap();
            writeln!(
                s,
                "  alt: direct = {}, local = {}, diff = {}",
                format_g(direct_alt, 12),
                format_g(r.g_guaranteed_alt, 12),
                format_g((direct_alt - r.g_guaranteed_alt).abs(), 3)
            )
            .unwrap();
        }
        (Some(Ok(_)), None) => unreachable!("reference supplied"),
    }
    Ok(s)
}

fn maxent(system: &ProbabilitySystem, tol: f64, max_iter: usize) -> Result<String> {
    let fit = maxent_fit(system, tol, max_iter)?;
    let mut s = String::new();
    writeln!(s, "entropy = {}", format_g(fit.entropy, 12)).unwrap();
    writeln!(s, "iterations = {}", fit.iterations).unwrap();
    writeln!(s, "residual = {}", format_g(fit.residual, 12)).unwrap();
    match unpack_with_rule(system.structure(), OStarRule::Maximal) {
        Ok(u) => {
            let px: JointDistribution = product_extension(system, &u)?.joint;
            let h_px = entropy(&px);
            let in_k = system.marginal_residual(&px)? < tol.max(CONSISTENCY_TOL);
            writeln!(s, "entropy_px = {}", format_g(h_px, 12)).unwrap();
            writeln!(s, "entropy_gap = {}", format_g(fit.entropy - h_px, 12)).unwrap();
            writeln!(s, "px_in_k = {in_k}").unwrap();
        }
        Err(Error::NotAWeb { .. }) => writeln!(s, "entropy_gap = n/a (not a web)").unwrap(),
        Err(e) => return Err(e),
    }
    Ok(s)
}
