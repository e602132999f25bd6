//! `ncgame`: decide perfect strategies of nonlocal games, extract matrix
//! witnesses, look for sum-of-squares coloring obstructions, and re-check
//! any artifact written by an earlier run.
//!
//! Exit codes: 0 perfect (or artifact verified), 1 no perfect strategy,
//! 2 unknown or inconclusive, 64 bad input, 65 artifact failed its check,
//! 70 internal error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use ncgame::decide::{self, DecideOptions, SyncOutcome, Verdict, Witness};
use ncgame::freealg::{FreeAlgebra, NCPoly};
use ncgame::gamealg::{
    encode_coloring, parse_game, DeterminingSet, Dialect, GameSpec, Graph, UniversalAlgebra,
};
use ncgame::gbase::{self, AugmentedInput, CompleteOptions, Membership};
use ncgame::gns::{self, Strategy};
use ncgame::soscert::{self, SolveOptions, SosOptions};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(
    name = "ncgame",
    version,
    about = "Perfect strategies of nonlocal games via noncommutative Groebner bases"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Complete the marker basis of a game and write it out.
    Gb(GameArgs),
    /// Decide whether a game has a perfect commuting-operator strategy.
    Decide(GameArgs),
    /// Like decide, but insists on a finite matrix witness.
    Strategy(GameArgs),
    /// Look for a certificate that a graph has no quantum coloring.
    Color(ColorArgs),
    /// Re-check a basis, witness or sum-of-squares certificate file.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GameArgs {
    input: PathBuf,
    /// Degree cap of the completion.
    #[arg(long, default_value_t = decide::DEFAULT_CAP)]
    cap: usize,
    /// Encoding of table games: projector or signature.
    #[arg(long)]
    dialect: Option<String>,
    /// Largest quotient dimension to materialise.
    #[arg(long, default_value_t = gns::DEFAULT_MAX_DIM)]
    max_dim: usize,
    /// Rule budget of the completion; running out gives "unknown".
    #[arg(long, default_value_t = decide::DEFAULT_MAX_RULES)]
    max_rules: usize,
    /// Output prefix; defaults to the input path without its extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ColorArgs {
    input: PathBuf,
    /// Number of colors; defaults to the count in the graph file.
    #[arg(long)]
    colors: Option<usize>,
    /// Half-degree d of the squares.
    #[arg(long, default_value_t = 2)]
    sos_degree: usize,
    #[arg(long, default_value_t = decide::DEFAULT_CAP)]
    cap: usize,
    /// Gradient tolerance of the float search.
    #[arg(long, default_value_t = SolveOptions::default().tol)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    artifact: PathBuf,
    /// Also check that the artifact belongs to this game or graph.
    #[arg(long)]
    game: Option<PathBuf>,
    /// Color count for graph files, when checking against --game.
    #[arg(long)]
    colors: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Rejected(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_USAGE,
            Failure::Rejected(_) => EXIT_DATA,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

type Res<T> = Result<T, Failure>;

fn internal(e: impl std::fmt::Display) -> Failure {
    Failure::Internal(e.to_string())
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn load_game(path: &Path) -> Res<GameSpec> {
    parse_game(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn prefix(input: &Path, out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| input.with_extension(""))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Re-encodes a table game in the requested dialect. Clause games carry
/// their own dialect and only accept a matching request.
fn determining_set(spec: &GameSpec, dialect: Option<&str>) -> Res<DeterminingSet> {
    let d = spec
        .determining_set()
        .map_err(|e| Failure::Input(e.to_string()))?;
    let Some(name) = dialect else { return Ok(d) };
    let want: Dialect = name
        .parse()
        .map_err(|e: ncgame::gamealg::GameError| Failure::Input(e.to_string()))?;
    if want == d.ua.dialect {
        return Ok(d);
    }
    if d.toric.is_some() || !matches!(spec, GameSpec::Table(_)) {
        return Err(Failure::Input(format!(
            "this game is encoded in the {} dialect; --dialect only applies to table games",
            d.ua.dialect
        )));
    }
    let ua = Arc::new(
        UniversalAlgebra::new(d.ua.shape, want).map_err(|e| Failure::Input(e.to_string()))?,
    );
    let elements = d
        .elements
        .iter()
        .map(|p| ua.convert(&d.ua, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Input(e.to_string()))?;
    Ok(DeterminingSet {
        ua,
        elements,
        toric: None,
    })
}

fn dense(s: &Strategy, l: usize) -> String {
    let m = &s.matrices[l];
    let mut out = String::new();
    for r in 0..s.dim {
        let row: Vec<String> = (0..s.dim)
            .map(|c| {
                m.get(r, c)
                    .map_or_else(|| "0".to_string(), |x| x.to_string())
            })
            .collect();
        let _ = writeln!(out, "  [{}]", row.join(" "));
    }
    out
}

fn run_gb(a: &GameArgs) -> Res<u8> {
    let spec = load_game(&a.input)?;
    let d = determining_set(&spec, a.dialect.as_deref())?;
    let inp = AugmentedInput {
        algebra: d.algebra().clone(),
        two_sided: d.ua.relations.clone(),
        left: d.elements.clone(),
    };
    let opts = CompleteOptions {
        trace: true,
        max_rules: Some(a.max_rules),
    };
    let rs = inp.complete(a.cap, opts).map_err(internal)?;
    let path = with_ext(&prefix(&a.input, &a.out), "basis");
    write(&path, &gbase::export_basis(&rs))?;
    let xi = gbase::member_mixed(&rs, &d.algebra().one()).map_err(internal)?;
    println!(
        "basis {} rules, {}, cap {}",
        rs.rules().len(),
        rs.status(),
        rs.cap()
    );
    println!("xi in ideal: {}", membership_text(xi));
    println!("wrote {}", path.display());
    Ok(if rs.is_complete() { 0 } else { 2 })
}

fn membership_text(m: Membership) -> &'static str {
    match m {
        Membership::Yes => "yes",
        Membership::No => "no",
        Membership::Unknown => "unknown (truncated basis)",
    }
}

fn run_decide(a: &GameArgs, want_witness: bool) -> Res<u8> {
    let spec = load_game(&a.input)?;
    let d = determining_set(&spec, a.dialect.as_deref())?;
    let opts = DecideOptions {
        cap: a.cap,
        max_dim: a.max_dim,
        trace: true,
        max_rules: Some(a.max_rules),
        ..DecideOptions::default()
    };
    let decision = decide::decide(&d, &opts).map_err(internal)?;
    let pre = prefix(&a.input, &a.out);
    let mut report = decision.report();
    match &decision.verdict {
        Verdict::Perfect(Witness::Finite(s)) => {
            let path = with_ext(&pre, "witness");
            write(&path, &gns::export_witness(s, &d.ua.relations, &d.elements))?;
            let _ = writeln!(report, "witness file {}", path.display());
            if want_witness {
                let _ = writeln!(
                    report,
                    "state basis vector {} ({})",
                    s.state,
                    s.basis_names.get(s.state).map_or("", |x| x)
                );
                let _ = writeln!(report, "basis {}", s.basis_names.join(", "));
                for (l, v) in s.algebra.alphabet().vars().iter().enumerate() {
                    let _ = writeln!(report, "{} =", v.name);
                    report += &dense(s, l);
                }
            }
        }
        Verdict::NoPerfect(_) => {
            if let Some(b) = &decision.basis {
                let path = with_ext(&pre, "basis");
                write(&path, &gbase::export_basis(b))?;
                let _ = writeln!(report, "certificate file {}", path.display());
            }
        }
        _ => {}
    }
    write(&with_ext(&pre, "report"), &report)?;
    print!("{report}");
    let code = decision.verdict.exit_code() as u8;
    if want_witness && matches!(decision.verdict, Verdict::Perfect(Witness::Abstract)) {
        println!(
            "no finite witness: the quotient exceeds --max-dim {}",
            a.max_dim
        );
        return Ok(2);
    }
    Ok(code)
}

fn graph_of(spec: GameSpec, colors: Option<usize>) -> Res<(Graph, usize)> {
    match spec {
        GameSpec::Graph { graph, colors: c } => Ok((graph, colors.unwrap_or(c))),
        _ => Err(Failure::Input("expected a graph file".into())),
    }
}

fn run_color(a: &ColorArgs) -> Res<u8> {
    let (graph, colors) = graph_of(load_game(&a.input)?, a.colors)?;
    if colors == 0 {
        return Err(Failure::Input("--colors must be positive".into()));
    }
    let ideal = encode_coloring(&graph, colors).map_err(|e| Failure::Input(e.to_string()))?;
    let opts = SosOptions {
        degree: a.sos_degree,
        cap: a.cap,
        solve: SolveOptions {
            tol: a.tol,
            ..SolveOptions::default()
        },
        ..SosOptions::default()
    };
    let out = decide::decide_synchronous_with(&ideal.ua.algebra, &ideal.generators(), &opts)
        .map_err(internal)?;
    match &out {
        SyncOutcome::NoPerfect(c) => {
            let path = with_ext(&prefix(&a.input, &a.out), "sos");
            write(&path, &soscert::export_certificate(c))?;
            println!("no quantum {colors}-coloring");
            println!(
                "certificate degree {} with {} words, {} squares, minimum Gram eigenvalue {:.3e}",
                c.degree,
                c.words.len(),
                c.squares.len(),
                soscert::gram_min_eigenvalue(c)
            );
            println!("certificate file {}", path.display());
        }
        SyncOutcome::Inconclusive(why) => println!("inconclusive: {why}"),
    }
    Ok(out.exit_code() as u8)
}

fn same_generators(
    what: &str,
    found: &[NCPoly],
    want: &[NCPoly],
    fa: &FreeAlgebra,
    wa: &FreeAlgebra,
) -> Res<()> {
    if fa.alphabet() != wa.alphabet() || fa.field().order() != wa.field().order() || found != want {
        return Err(Failure::Rejected(format!(
            "{what} do not match the given game"
        )));
    }
    Ok(())
}

fn run_verify(a: &VerifyArgs) -> Res<u8> {
    let text = read(&a.artifact)?;
    let kind = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|l| l.strip_prefix("ncgame "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap_or("");
    let bad_file = |e: ncgame::artifact::ArtifactError| {
        Failure::Input(format!("{}: {e}", a.artifact.display()))
    };
    let game = a.game.as_deref().map(load_game).transpose()?;
    match kind {
        "basis" => {
            let rs = gbase::parse_basis(&text).map_err(bad_file)?;
            let trace = rs
                .trace()
                .ok_or_else(|| Failure::Rejected("basis has no derivation trace".into()))?;
            let replayed = gbase::replay_trace(trace).map_err(Failure::Rejected)?;
            if replayed.as_slice() != rs.rules() {
                return Err(Failure::Rejected(
                    "replayed rules differ from the stated rules".into(),
                ));
            }
            if let Some(spec) = game {
                let d = determining_set(&spec, None)?;
                let inp = AugmentedInput {
                    algebra: d.algebra().clone(),
                    two_sided: d.ua.relations.clone(),
                    left: d.elements.clone(),
                };
                let (ext, gens) = inp.augment().map_err(internal)?;
                same_generators(
                    "derivation inputs",
                    &trace.inputs,
                    &gens,
                    rs.algebra(),
                    &ext,
                )?;
            }
            println!(
                "basis verified: {} rules replayed from {} inputs",
                rs.rules().len(),
                trace.inputs.len()
            );
            if let Some(xi) = rs.algebra().alphabet().aux() {
                if rs.normal_form(&rs.algebra().word(&[xi])).is_zero() {
                    println!("xi reduces to 0: no perfect strategy");
                } else {
                    println!("xi does not reduce to 0 ({})", rs.status());
                }
            }
            Ok(0)
        }
        "witness" => {
            let w = gns::parse_witness(&text).map_err(bad_file)?;
            let v = w.verify();
            if !v.passed() {
                return Err(Failure::Rejected(v.failures.join("; ")));
            }
            if let Some(spec) = game {
                let d = determining_set(&spec, None)?;
                same_generators(
                    "relations",
                    &w.relations,
                    &d.ua.relations,
                    &w.strategy.algebra,
                    d.algebra(),
                )?;
                same_generators(
                    "elements",
                    &w.elements,
                    &d.elements,
                    &w.strategy.algebra,
                    d.algebra(),
                )?;
            }
            println!(
                "witness verified: dimension {}, {} relations hold, {} elements annihilate the state",
                w.strategy.dim,
                w.relations.len(),
                w.elements.len()
            );
            Ok(0)
        }
        "sos" => {
            let c = soscert::parse_certificate(&text).map_err(bad_file)?;
            let r = soscert::check_certificate(&c).map_err(Failure::Rejected)?;
            if let Some(spec) = game {
                let (graph, colors) = graph_of(spec, a.colors)?;
                let ideal =
                    encode_coloring(&graph, colors).map_err(|e| Failure::Input(e.to_string()))?;
                same_generators(
                    "generators",
                    &c.generators,
                    &ideal.generators(),
                    &c.algebra,
                    &ideal.ua.algebra,
                )?;
                println!("certificate matches the {colors}-coloring ideal of the graph");
            }
            println!(
                "certificate verified: {} rules replayed, Gram matrix {}x{} is positive semidefinite, {} squares sum to -1 modulo the ideal",
                r.rules, r.dimension, r.dimension, r.squares
            );
            Ok(0)
        }
        other => Err(Failure::Input(format!(
            "{}: unknown artifact kind {other:?}",
            a.artifact.display()
        ))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let res = match &cli.cmd {
        Cmd::Gb(a) => run_gb(a),
        Cmd::Decide(a) => run_decide(a, false),
        Cmd::Strategy(a) => run_decide(a, true),
        Cmd::Color(a) => run_color(a),
        Cmd::Verify(a) => run_verify(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (Failure::Input(m) | Failure::Rejected(m) | Failure::Internal(m)) = &f;
            eprintln!("ncgame: {m}");
            ExitCode::from(f.code())
        }
    }
}
