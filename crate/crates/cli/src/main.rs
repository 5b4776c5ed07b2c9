//! `pdmsym` command-line front end.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdmsym::catalog::{self, CatalogReport, CatalogRow, Verdict};
use pdmsym::killing::{check_killing_identity, family_params, killing_family};
use pdmsym::solve::{find_integrals, EtaPart, FindOptions};
use pdmsym::zero::{DEFAULT_POINTS, DEFAULT_PRECISION, DEFAULT_SEED, DEFAULT_THRESHOLD};
use pdmsym::{expand_generators, parse_expr, parse_operator, serialize_expr, ParseDiagnostic, Policy, Scalar};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "pdmsym", version, about = "Second-order integrals of motion for scale-invariant PDM Hamiltonians")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// Sample points per zero test.
    #[arg(long, global = true, default_value_t = DEFAULT_POINTS)]
    points: usize,
    /// Working precision in decimal digits.
    #[arg(long, global = true, env = "PDMSYM_PRECISION", default_value_t = DEFAULT_PRECISION)]
    precision: u32,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Human-readable output on stdout.
    #[arg(long, global = true)]
    pretty: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify catalog rows.
    Verify {
        #[arg(long)]
        table: Option<u8>,
        #[arg(long)]
        item: Option<u8>,
        /// JSON file of bindings keyed by row id.
        #[arg(long)]
        bindings: Option<PathBuf>,
        /// Alternative catalog file.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Search for integrals of a given Hamiltonian.
    Find {
        #[arg(long = "f")]
        f: String,
        #[arg(long = "V")]
        v: String,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        degrees: Vec<u32>,
        #[arg(long)]
        numeric_fallback: bool,
    },
    /// Instantiate a Killing tensor family.
    Killing {
        #[arg(long)]
        family: u8,
        /// Comma-separated `name=value` pairs.
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
    },
    /// Commutator of two operator expressions.
    Commute {
        #[arg(long = "A")]
        a: String,
        #[arg(long = "B")]
        b: String,
    },
    /// Catalog inspection.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List every row.
    List,
}

enum Failure {
    Input(String),
    Check(String),
}

impl From<ParseInput> for Failure {
    fn from(p: ParseInput) -> Self {
        Failure::Input(p.0)
    }
}

struct ParseInput(String);

fn diagnostic(src: &str, d: &ParseDiagnostic) -> ParseInput {
    let caret = " ".repeat(d.offset.min(src.len()));
    ParseInput(format!("parse error: {d}\n  {src}\n  {caret}^"))
}

fn expr(src: &str) -> Result<pdmsym::Expr, ParseInput> {
    parse_expr(src).map_err(|d| diagnostic(src, &d))
}

struct Output {
    json: Value,
    text: String,
}

fn policy(c: &Common) -> Policy {
    Policy {
        points: c.points,
        precision: c.precision,
        threshold: DEFAULT_THRESHOLD.min(c.precision.saturating_sub(c.precision / 4)),
        seed: c.seed,
    }
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::Verified { .. } => "verified".into(),
        Verdict::Discrepant {
            component,
            suggested_scalar,
            halved_scalar,
            ..
        } => {
            let mut s = format!("DISCREPANT at d^{component:?}");
            if *halved_scalar == Some(true) {
                s.push_str(", commutes with halved scalar");
            }
            if let Some(sug) = suggested_scalar {
                s.push_str(&format!(", commuting scalar: {sug}"));
            }
            s
        }
        Verdict::Unresolved { reason } => format!("unresolved: {reason}"),
        Verdict::Skipped { reason } => format!("skipped: {reason}"),
    }
}

fn report_text(rep: &CatalogReport) -> String {
    let mut out = String::new();
    for r in &rep.reports {
        let b: Vec<String> = r.binding.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("{} [{}]\n", r.id, b.join(", ")));
        if let Some(e) = &r.error {
            out.push_str(&format!("  error: {e}\n"));
        }
        for i in &r.integrals {
            out.push_str(&format!("  {}: {}\n", i.source, verdict_text(&i.verdict)));
        }
        for p in &r.inversion_pairs {
            let status = match &p.sign {
                Some(s) => format!("maps with sign {s}"),
                None => "does not map onto partner".into(),
            };
            out.push_str(&format!("  inversion {} -> {}: {status}\n", p.p, p.k));
        }
    }
    let s = &rep.summary;
    out.push_str(&format!(
        "{} reports: {} verified, {} discrepant, {} skipped, {} unresolved\n",
        s.rows, s.verified, s.discrepant, s.skipped, s.unresolved
    ));
    out
}

fn run_verify(
    c: &Common,
    table: Option<u8>,
    item: Option<u8>,
    bindings: Option<&PathBuf>,
    catalog_path: Option<&PathBuf>,
) -> Result<(Output, bool), Failure> {
    let rows = match catalog_path {
        Some(p) => catalog::load_catalog(p, None).map_err(|e| Failure::Input(e.to_string()))?,
        None => catalog::builtin_catalog(),
    };
    let rows: Vec<CatalogRow> = rows
        .into_iter()
        .filter(|r| table.is_none_or(|t| r.table == t) && item.is_none_or(|i| r.item == i))
        .collect();
    if rows.is_empty() {
        return Err(Failure::Input("no catalog row matches the selection".into()));
    }
    let custom = match bindings {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            catalog::parse_bindings(&text).map_err(|e| Failure::Input(e.to_string()))?
        }
        None => BTreeMap::new(),
    };
    let pol = policy(c);
    let rep = catalog::verify_catalog_with(
        &rows,
        &|r: &CatalogRow| custom.get(&r.id()).cloned().unwrap_or_else(|| catalog::binding_suite(r, pol.seed)),
        &pol,
    );
    let failing = rep.failing_anchors();
    let mut text = report_text(&rep);
    if !failing.is_empty() {
        text.push_str(&format!("anchor rows not verified: {}\n", failing.join(", ")));
    }
    let json = serde_json::to_value(&rep).expect("report serializes");
    Ok((Output { json, text }, failing.is_empty()))
}

fn run_find(c: &Common, f: &str, v: &str, degrees: &[u32], numeric: bool) -> Result<Output, Failure> {
    let fe = expr(f)?;
    let ve = expr(v)?;
    let opts = FindOptions {
        policy: policy(c),
        numeric_fallback: numeric,
        ..FindOptions::default()
    };
    let found = find_integrals(&fe, &ve, degrees, &opts).map_err(|e| Failure::Check(e.to_string()))?;
    let mut text = format!("{} integral(s) for f = {f}, V = {v}\n", found.len());
    for q in &found {
        let body = q.rendering.clone().unwrap_or_else(|| "(unrendered)".into());
        let eta = match &q.eta {
            EtaPart::Recovered { .. } => "",
            EtaPart::GradientOnly { .. } => " [scalar known through its gradient]",
        };
        text.push_str(&format!("  degree {}: {body}{eta}\n", q.degree));
    }
    let json = json!({ "f": f, "V": v, "degrees": degrees, "integrals": found });
    Ok(Output { json, text })
}

fn run_killing(c: &Common, family: u8, params: &[String]) -> Result<Output, Failure> {
    let names = family_params(family).map_err(|e| Failure::Input(e.to_string()))?;
    let mut values = BTreeMap::new();
    for kv in params.iter().filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("expected name=value, got `{kv}`")))?;
        let e = expr(v.trim())?;
        let s: Scalar = e
            .as_const()
            .cloned()
            .ok_or_else(|| Failure::Input(format!("parameter `{k}` must be a number")))?;
        values.insert(k.trim().to_string(), s);
    }
    let pol = policy(c);
    if let Some(bad) = values.keys().find(|k| !names.contains(k)) {
        return Err(Failure::Input(format!("unknown parameter `{bad}`; family {family} takes {}", names.join(", "))));
    }
    let t = killing_family(family, &values, &pol).map_err(|e| Failure::Check(e.to_string()))?;
    let cert = check_killing_identity(&t.mu, &pol).map_err(|e| Failure::Check(e.to_string()))?;
    let mu: Vec<Vec<String>> = t.mu.iter().map(|row| row.iter().map(serialize_expr).collect()).collect();
    let mut text = format!("family {family} (parameters: {})\n", names.join(", "));
    for (a, row) in mu.iter().enumerate() {
        for (b, e) in row.iter().enumerate().skip(a) {
            text.push_str(&format!("  mu^{}{} = {e}\n", a + 1, b + 1));
        }
    }
    text.push_str(&format!("  Killing identity: {}\n", if cert.is_zero() { "holds" } else { "fails" }));
    let json = json!({ "family": family, "params": values.iter().map(|(k, v)| (k.clone(), v.to_string())).collect::<BTreeMap<_, _>>(), "mu": mu, "certificate": cert });
    Ok(Output { json, text })
}

fn run_commute(c: &Common, a: &str, b: &str) -> Result<Output, Failure> {
    let op = |s: &str| -> Result<_, Failure> {
        let g = parse_operator(s).map_err(|d| diagnostic(s, &d))?;
        expand_generators(&g).map_err(|e| Failure::Input(e.to_string()))
    };
    let comm = op(a)?.commutator(&op(b)?).map_err(|e| Failure::Check(e.to_string()))?.simplified();
    let pol = policy(c);
    let gens = pdmsym::diffop::recognize_generators(&comm, &pol).map(|g| pdmsym::lang::serialize_operator(&g));
    let canonical = comm.to_string();
    let mut text = format!("[{a}, {b}] = {canonical}\n");
    if let Some(g) = &gens {
        text.push_str(&format!("          = {g}\n"));
    }
    let json = json!({ "A": a, "B": b, "commutator": canonical, "generators": gens });
    Ok(Output { json, text })
}

fn run_catalog_list() -> Output {
    let rows = catalog::builtin_catalog();
    let mut text = String::new();
    let list: Vec<Value> = rows
        .iter()
        .map(|r| {
            let anchor = catalog::is_anchor(r.table, r.item);
            text.push_str(&format!(
                "{:<6}{} f = {}, V = {}\n",
                r.id(),
                if anchor { "*" } else { " " },
                r.f,
                r.v
            ));
            for i in &r.integrals {
                text.push_str(&format!("        {i}\n"));
            }
            json!({ "id": r.id(), "anchor": anchor, "f": r.f, "V": r.v, "integrals": r.integrals, "skipped": r.skip.is_some() })
        })
        .collect();
    Output {
        json: json!({ "sha256": catalog::CATALOG_SHA256, "rows": list }),
        text,
    }
}

fn emit(c: &Common, out: &Output) -> Result<(), Failure> {
    let body = serde_json::to_string_pretty(&out.json).expect("json");
    if let Some(path) = &c.out {
        fs::write(path, body + "\n").map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        if c.pretty {
            print!("{}", out.text);
        }
    } else if c.pretty {
        print!("{}", out.text);
    } else {
        println!("{body}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let c = &cli.common;
    if let Some(j) = c.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }
    if c.points == 0 || c.precision < 16 {
        return Err(Failure::Input("--points must be positive and --precision at least 16".into()));
    }
    let (out, ok) = match &cli.cmd {
        Command::Verify {
            table,
            item,
            bindings,
            catalog,
        } => run_verify(c, *table, *item, bindings.as_ref(), catalog.as_ref())?,
        Command::Find {
            f,
            v,
            degrees,
            numeric_fallback,
        } => (run_find(c, f, v, degrees, *numeric_fallback)?, true),
        Command::Killing { family, params } => (run_killing(c, *family, params)?, true),
        Command::Commute { a, b } => (run_commute(c, a, b)?, true),
        Command::Catalog {
            action: CatalogAction::List,
        } => (run_catalog_list(), true),
    };
    emit(c, &out)?;
    Ok(ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
