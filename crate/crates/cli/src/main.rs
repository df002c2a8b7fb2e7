//! `riglab`: batch front end producing reproducible JSON (or CSV) reports.
//!
//! Exit codes: 0 success or verdict true, 1 verdict false, 2 input error,
//! 3 resource or precision exhaustion.

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use rand::RngCore;
use serde::Serialize;
use serde_json::{json, Value};

use riglab_core::cantor::{self, ArcTreeConfig, SeedSupply};
use riglab_core::circle::{self, Angle, AngleSource, ScanConfig, Turn};
use riglab_core::contfrac::{self, RealInterval};
use riglab_core::gaussproc::{self, AtomicSpectralMeasure, SimulationConfig};
use riglab_core::measures::{self, Atomic, ChainMeasure, WeylSampling};
use riglab_core::operator::{self, SelectConfig};
use riglab_core::seqgen::{self, CfAlpha, SequencePrefix, SequenceSpec, SuperRule};
use riglab_core::{json as cj, rng, Error, Result};

const TOOL: &str = "riglab";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "riglab", version, about = "Rigidity sequence laboratory")]
struct Cli {
    /// Emit a flat per-row CSV trace instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Working precision in bits for commands that take one.
    #[arg(long, global = true, env = "RIGLAB_PRECISION_BITS")]
    precision: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<std::path::PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a sequence prefix with ratio diagnostics.
    Seq(SeqArgs),
    /// Grid search for the Jamison constant of a prefix.
    Jamison(JamisonArgs),
    /// Fourier certificate of a chain measure along a prefix.
    Certify(CertifyArgs),
    /// Build the upper-triangular operator and its rigidity report.
    Operator(OperatorArgs),
    /// Continued fraction, convergents and approximation checks.
    Cf(CfArgs),
    /// Weyl averages along a prefix.
    Weyl(WeylArgs),
    /// Cantor-type constructions and their uniform bounds.
    Cantor(CantorArgs),
    /// Gaussian process simulation and the rigidity statistic.
    Simulate(SimulateArgs),
}

/// Sequence selection shared by every command that takes a prefix.
#[derive(Args, Debug, Clone, Serialize)]
struct PrefixArgs {
    /// explicit, poly, primes, chain, superlinear, cf_denominators or blocks.
    #[arg(long)]
    family: Option<String>,
    /// Explicit comma-separated terms.
    #[arg(long)]
    terms: Option<String>,
    /// Full sequence spec as JSON, or @path to a JSON file.
    #[arg(long)]
    spec: Option<String>,
    /// Number of terms.
    #[arg(long, default_value_t = 64)]
    count: usize,
    /// Polynomial coefficients c_0,c_1,... (poly).
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    /// First k for poly.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    start_k: i64,
    /// First term (chain, superlinear).
    #[arg(long, default_value = "2")]
    start: String,
    /// power:E, index_mul or pow2_index (superlinear).
    #[arg(long, default_value = "power:2")]
    rule: String,
    /// Cycled multipliers (chain).
    #[arg(long, default_value = "2")]
    multipliers: String,
    /// Block schedule (blocks).
    #[arg(long)]
    schedule: Option<String>,
    /// surd:P,D,Q, liouville:M,V or digits:A0,A1,... (cf_denominators).
    #[arg(long)]
    alpha: Option<String>,
}

#[derive(Args, Debug, Serialize)]
struct SeqArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
}

#[derive(Args, Debug, Serialize)]
struct JamisonArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
    #[arg(long, default_value_t = 16)]
    coarse_bits: usize,
    #[arg(long, default_value_t = 16)]
    keep: usize,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    #[arg(long, default_value_t = 6)]
    factor_bits: usize,
    #[arg(long, default_value_t = 512)]
    max_rounds: usize,
    /// Smallest admissible angle NUM/DEN.
    #[arg(long)]
    floor: Option<String>,
    /// Verdict: estimate at most this value.
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
    /// dyadic_harmonic, dyadic_constant or blocks.
    #[arg(long, default_value = "dyadic_harmonic")]
    measure: String,
    /// Chain depth; defaults to the bit length of the largest term plus 8.
    #[arg(long)]
    depth: Option<usize>,
    /// Constant weight for dyadic_constant.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
}

#[derive(Args, Debug, Serialize)]
struct OperatorArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Number of levels L.
    #[arg(long, default_value_t = 12)]
    levels: usize,
    /// chain_digits:N, grid:DEN:COUNT or points:A/B,C/D,...
    #[arg(long, default_value = "chain_digits:18")]
    supply: String,
}

#[derive(Args, Debug, Serialize)]
struct CfArgs {
    /// surd:P,D,Q, liouville:M,V, rational:P/Q, digits:A0,A1,... or random:BITS.
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value_t = 20)]
    depth: usize,
    /// Seed for random:BITS.
    #[arg(long, default_value_t = rng::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct WeylArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
    /// sqrt:M, golden or P/Q; omitted for a sampled scan.
    #[arg(long)]
    theta: Option<String>,
    /// Averaging length N; defaults to the prefix length.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    #[arg(long, default_value_t = rng::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    sample_bits: usize,
    #[arg(long, default_value_t = 1 << 20)]
    min_denominator: u64,
    #[arg(long, default_value_t = 0.5)]
    scan_delta: f64,
    /// Verdict: average (or 95th percentile) below this value.
    #[arg(long)]
    below: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct CantorArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
    /// arcs, digits or tree.
    #[arg(long, default_value = "arcs")]
    kind: String,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    /// Root arcs kept (arcs); 0 keeps all.
    #[arg(long, default_value_t = 4)]
    root_arcs: usize,
    #[arg(long, default_value_t = 2)]
    max_children: usize,
    /// Chain positions (digits); defaults to 1..=depth.
    #[arg(long)]
    positions: Option<String>,
    /// Include every leaf in the output.
    #[arg(long)]
    leaves: bool,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    prefix: PrefixArgs,
    /// Depth of the dyadic harmonic chain measure.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = rng::DEFAULT_SEED)]
    seed: u64,
}

/// Everything a command produces.
struct Outcome {
    config: Value,
    anchors: Vec<&'static str>,
    result: Value,
    verdict: Option<bool>,
    csv: String,
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a Value,
    anchors: &'a [&'static str],
    result: &'a Value,
    verdict: Option<bool>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            return fail(&cli, Error::InvalidSpec("--threads must be positive".into()));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(&cli) {
        Ok(out) => match emit(&cli, &out) {
            Ok(()) => ExitCode::from(match out.verdict {
                Some(false) => 1,
                _ => 0,
            }),
            Err(e) => fail(&cli, e),
        },
        Err(e) => fail(&cli, e),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Seq(_) => "seq",
        Command::Jamison(_) => "jamison",
        Command::Certify(_) => "certify",
        Command::Operator(_) => "operator",
        Command::Cf(_) => "cf",
        Command::Weyl(_) => "weyl",
        Command::Cantor(_) => "cantor",
        Command::Simulate(_) => "simulate",
    }
}

fn emit(cli: &Cli, out: &Outcome) -> Result<()> {
    let text = if cli.csv {
        out.csv.clone()
    } else {
        let r = Report {
            tool: TOOL,
            version: VERSION,
            command: command_name(&cli.cmd),
            config: &out.config,
            anchors: &out.anchors,
            result: &out.result,
            verdict: out.verdict,
        };
        let mut s = serde_json::to_string_pretty(&r).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        s.push('\n');
        s
    };
    write_out(cli, &text)
}

fn write_out(cli: &Cli, text: &str) -> Result<()> {
    let res = match &cli.output {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    res.map_err(|e| Error::InvalidSpec(format!("cannot write output: {e}")))
}

fn fail(cli: &Cli, e: Error) -> ExitCode {
    eprintln!("error: {e}");
    let body = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command_name(&cli.cmd),
        "error": { "kind": e.kind(), "message": e.to_string() },
    });
    let mut s = serde_json::to_string_pretty(&body).unwrap_or_default();
    s.push('\n');
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
    ExitCode::from(e.exit_code() as u8)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.cmd {
        Command::Seq(a) => cmd_seq(a),
        Command::Jamison(a) => cmd_jamison(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Operator(a) => cmd_operator(a, cli.precision),
        Command::Cf(a) => cmd_cf(a),
        Command::Weyl(a) => cmd_weyl(a),
        Command::Cantor(a) => cmd_cantor(a, cli.precision),
        Command::Simulate(a) => cmd_simulate(a, cli.precision),
    }
}

// ---------------------------------------------------------------------------
// Input parsing

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| bad(e.to_string()))
}

fn big_list(s: &str) -> Result<Vec<String>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse::<BigUint>()
                .map(|_| x.to_string())
                .map_err(|_| bad(format!("not a nonnegative integer: {x:?}")))
        })
        .collect()
}

fn i64_list(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<i64>().map_err(|_| bad(format!("not an integer: {x:?}"))))
        .collect()
}

fn num_list<T: std::str::FromStr>(s: &str, n: usize, what: &str) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| bad(format!("bad {what}: {s:?}"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(bad(format!("{what} needs {n} values")));
    }
    Ok(v)
}

fn parse_ratio(s: &str) -> Result<(BigUint, BigUint)> {
    let (n, d) = s.split_once('/').ok_or_else(|| bad(format!("expected NUM/DEN, got {s:?}")))?;
    let n: BigUint = n.trim().parse().map_err(|_| bad(format!("bad numerator in {s:?}")))?;
    let d: BigUint = d.trim().parse().map_err(|_| bad(format!("bad denominator in {s:?}")))?;
    if d == BigUint::from(0u32) {
        return Err(bad("zero denominator"));
    }
    Ok((n, d))
}

fn parse_alpha(s: &str) -> Result<CfAlpha> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| bad(format!("bad alpha {s:?}")))?;
    match kind {
        "surd" => {
            let v: Vec<i64> = num_list(rest, 3, "surd P,D,Q")?;
            if v[1] < 0 {
                return Err(bad("surd D must be nonnegative"));
            }
            Ok(CfAlpha::Surd { p: v[0], d: v[1] as u64, q: v[2] })
        }
        "liouville" => {
            let v: Vec<u64> = num_list(rest, 2, "liouville M,V")?;
            let v1 = u32::try_from(v[1]).map_err(|_| bad("V too large"))?;
            Ok(CfAlpha::Liouville { m: v[0], v: v1 })
        }
        "digits" => Ok(CfAlpha::Digits { a: big_list(rest)? }),
        _ => Err(bad(format!("unknown alpha kind {kind:?}"))),
    }
}

fn parse_rule(s: &str) -> Result<SuperRule> {
    match s {
        "index_mul" => Ok(SuperRule::IndexMul),
        "pow2_index" => Ok(SuperRule::Pow2Index),
        _ => match s.strip_prefix("power:") {
            Some(e) => Ok(SuperRule::Power {
                e: e.parse().map_err(|_| bad(format!("bad exponent in {s:?}")))?,
            }),
            None => Err(bad(format!("unknown rule {s:?}"))),
        },
    }
}

fn read_json_arg(s: &str) -> Result<String> {
    match s.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {path}: {e}"))),
        None => Ok(s.to_string()),
    }
}

impl PrefixArgs {
    fn sequence_spec(&self) -> Result<SequenceSpec> {
        let given = [self.family.is_some(), self.terms.is_some(), self.spec.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 && !(self.terms.is_some() && self.family.as_deref() == Some("explicit")) {
            return Err(bad("give exactly one of --family, --terms or --spec"));
        }
        if let Some(s) = &self.spec {
            let text = read_json_arg(s)?;
            return serde_json::from_str(&text).map_err(|e| bad(format!("malformed spec: {e}")));
        }
        if let Some(t) = &self.terms {
            return Ok(SequenceSpec::Explicit { terms: big_list(t)? });
        }
        let fam = self.family.as_deref().unwrap();
        Ok(match fam {
            "poly" => SequenceSpec::Poly {
                coeffs: i64_list(self.coeffs.as_deref().ok_or_else(|| bad("poly needs --coeffs"))?)?,
                start_k: self.start_k,
            },
            "primes" => SequenceSpec::Primes {},
            "chain" => SequenceSpec::Chain {
                start: self.start.clone(),
                multipliers: seqgen::parse_list(&self.multipliers)?,
            },
            "superlinear" => SequenceSpec::Superlinear {
                start: self.start.clone(),
                rule: parse_rule(&self.rule)?,
            },
            "cf_denominators" => SequenceSpec::CfDenominators {
                alpha: parse_alpha(self.alpha.as_deref().ok_or_else(|| bad("cf_denominators needs --alpha"))?)?,
            },
            "blocks" | "ex77" => SequenceSpec::Blocks {
                schedule: seqgen::parse_list(self.schedule.as_deref().ok_or_else(|| bad("blocks needs --schedule"))?)?,
            },
            "explicit" => return Err(bad("explicit family needs --terms")),
            _ => return Err(bad(format!("unknown family {fam:?}"))),
        })
    }

    /// The prefix and the spec it was built from.
    fn build(&self) -> Result<(SequenceSpec, SequencePrefix)> {
        let spec = self.sequence_spec()?;
        let count = match &spec {
            SequenceSpec::Explicit { terms } if self.terms.is_some() => terms.len(),
            _ => self.count,
        };
        if count == 0 {
            return Err(bad("empty prefix"));
        }
        let p = seqgen::generate(&spec, count)?;
        if p.is_empty() {
            return Err(bad("empty prefix"));
        }
        Ok((spec, p))
    }

    /// The same family with a different length.
    fn build_with(&self, spec: &SequenceSpec, count: usize) -> Result<SequencePrefix> {
        seqgen::generate(spec, count)
    }
}

fn terms_csv(terms: &[BigUint]) -> String {
    let mut s = String::from("k,n\n");
    for (k, n) in terms.iter().enumerate() {
        s.push_str(&format!("{k},{n}\n"));
    }
    s
}

fn config_with(args: &impl Serialize, spec: &SequenceSpec, extra: Value) -> Result<Value> {
    let mut c = to_value(args)?;
    if let Value::Object(m) = &mut c {
        m.insert("sequence".into(), to_value(spec)?);
        if let Value::Object(e) = extra {
            m.extend(e);
        }
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_seq(a: &SeqArgs) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let diag = if prefix.len() >= 2 {
        to_value(&seqgen::ratio_diagnostics(&prefix)?)?
    } else {
        Value::Null
    };
    Ok(Outcome {
        config: config_with(a, &spec, json!({}))?,
        anchors: vec!["n_{k+1}/n_k", "n_k | n_{k+1}"],
        result: json!({ "len": prefix.len(), "prefix": to_value(&prefix)?, "diagnostics": diag }),
        verdict: None,
        csv: terms_csv(&prefix.terms),
    })
}

fn cmd_jamison(a: &JamisonArgs) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let floor = match &a.floor {
        Some(f) => {
            let (n, d) = parse_ratio(f)?;
            Some((n.to_string(), d.to_string()))
        }
        None => None,
    };
    let cfg = ScanConfig {
        coarse_bits: a.coarse_bits,
        keep: a.keep,
        rounds: a.rounds,
        factor_bits: a.factor_bits,
        max_rounds: a.max_rounds,
        floor,
    };
    let r = circle::jamison_scan(&prefix.terms, &cfg)?;
    let mut csv = String::from("k,n,dist\n");
    for (k, (n, d)) in prefix.terms.iter().zip(&r.profile).enumerate() {
        csv.push_str(&format!("{k},{n},{}\n", cj::fmt_f64(*d)));
    }
    Ok(Outcome {
        config: config_with(a, &spec, json!({ "scan": to_value(&cfg)? }))?,
        anchors: vec!["inf_theta sup_k |exp(2 pi i n_k theta) - 1|"],
        verdict: a.target.map(|t| r.estimate <= t),
        result: to_value(&r)?,
        csv,
    })
}

fn chain_depth_for(terms: &[BigUint]) -> usize {
    terms.iter().map(|n| n.bits() as usize).max().unwrap_or(0) + 8
}

fn cmd_certify(a: &CertifyArgs) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let depth = a.depth.unwrap_or_else(|| chain_depth_for(&prefix.terms));
    let report = match a.measure.as_str() {
        "dyadic_harmonic" => measures::verify_chain_certificate(&ChainMeasure::dyadic_harmonic(depth), &prefix)?,
        "dyadic_constant" => measures::verify_chain_certificate(&ChainMeasure::dyadic_constant(depth, a.a)?, &prefix)?,
        "blocks" | "ex77" => {
            let schedule = match &spec {
                SequenceSpec::Blocks { schedule } => schedule.clone(),
                _ => return Err(bad("blocks measure needs the blocks family")),
            };
            measures::blocks_certificate(&schedule, &prefix)?
        }
        m => return Err(bad(format!("unknown measure {m:?}"))),
    };
    let anchors = if matches!(a.measure.as_str(), "blocks" | "ex77") {
        vec!["|sigma(n) - 1| <= 2^-p", "sigma(n_k) -> 1"]
    } else {
        vec!["|sigma(n_k) - 1| <= 4 pi a_{k+1}", "sigma(n_k) -> 1"]
    };
    Ok(Outcome {
        config: config_with(a, &spec, json!({ "chain_depth": depth }))?,
        anchors,
        verdict: Some(report.verdict),
        csv: report.to_csv(),
        result: to_value(&report)?,
    })
}

fn parse_supply(s: &str, pa: &PrefixArgs, spec: &SequenceSpec) -> Result<SeedSupply> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| bad(format!("bad supply {s:?}")))?;
    match kind {
        "chain_digits" => {
            let n: usize = rest.parse().map_err(|_| bad("chain_digits needs a count"))?;
            if n < 2 {
                return Err(bad("chain_digits needs at least 2 terms"));
            }
            SeedSupply::chain_digits(&pa.build_with(spec, n)?.terms)
        }
        "grid" => {
            let v: Vec<u64> = num_list(rest, 2, "grid DEN:COUNT")
                .or_else(|_| num_list(&rest.replace(':', ","), 2, "grid DEN:COUNT"))?;
            Ok(operator::grid_supply(v[0], v[1]))
        }
        "points" => {
            let pts = rest
                .split(',')
                .map(|x| parse_ratio(x).map(|(n, d)| Turn::new(n, d)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SeedSupply::from_points("explicit points", pts))
        }
        _ => Err(bad(format!("unknown supply kind {kind:?}"))),
    }
}

fn cmd_operator(a: &OperatorArgs, precision: Option<usize>) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let supply = parse_supply(&a.supply, &a.prefix, &spec)?;
    let cfg = SelectConfig {
        bits: precision.unwrap_or(operator::SELECT_BITS),
        ..SelectConfig::default()
    };
    let model = operator::select_parameters(&prefix.terms, a.delta, &supply, a.levels, &cfg)?;
    let rigidity = operator::rigidity_report(&model, &prefix.terms)?;
    let spectral = if model.len() >= 4 {
        Some(operator::spectral_criterion_check(&model)?)
    } else {
        None
    };
    let verdict = rigidity.verdict && spectral.as_ref().map_or(true, |s| s.verdict);
    Ok(Outcome {
        config: config_with(
            a,
            &spec,
            json!({
                "start_bits": cfg.bits,
                "max_bits": cfg.max_bits,
                "max_halvings": cfg.max_halvings,
                "tol0": cfg.tol0,
                "supply_source": supply.source,
                "supply_size": supply.candidates.len(),
            }),
        )?,
        anchors: vec![
            "sum_k |t_{k,l}^{(n)}|^2 <= delta^2 2^-l",
            "||u^(l) - u^(j(l))|| <= 2^-l",
            "sup_k ||T^{n_k}|| <= 1 + delta",
        ],
        verdict: Some(verdict),
        csv: rigidity.to_csv(),
        result: json!({
            "model": to_value(&model)?,
            "rigidity": to_value(&rigidity)?,
            "spectral": to_value(&spectral)?,
        }),
    })
}

/// `[lo, hi]` around `(p + √d)/q` with at least `bits` fractional bits.
fn surd_interval(p: i64, d: u64, q: i64, bits: usize) -> Result<RealInterval> {
    if q <= 0 {
        return Err(bad("surd denominator must be positive"));
    }
    let s = (BigUint::from(d) << (2 * bits)).sqrt();
    let pp = num_bigint::BigInt::from(p) << bits;
    let num = pp + num_bigint::BigInt::from(s);
    let m = num / q;
    let m = m.to_biguint().ok_or_else(|| bad("surd must be nonnegative"))?;
    // Truncated square root and division each lose under one ulp.
    Ok(RealInterval::dyadic(&m, bits, 2))
}

fn cmd_cf(a: &CfArgs) -> Result<Outcome> {
    let (kind, rest) = a.alpha.split_once(':').ok_or_else(|| bad(format!("bad alpha {:?}", a.alpha)))?;
    let mut notes: Vec<String> = Vec::new();
    let mut shallit: Option<bool> = None;
    let (cf, interval) = match kind {
        "rational" => {
            let (p, q) = parse_ratio(rest)?;
            let cf = contfrac::cf_of_rational(&p, &q);
            let iv = RealInterval::exact(cf.value());
            (cf, Some(iv))
        }
        "liouville" => {
            let v: Vec<u64> = num_list(rest, 2, "liouville M,V")?;
            let vv = u32::try_from(v[1]).map_err(|_| bad("V too large"))?;
            let x = contfrac::liouville_partial(v[0], vv)?;
            let cf = contfrac::cf_of_rational(&x.numer().to_biguint().unwrap(), &x.denom().to_biguint().unwrap());
            let sh = contfrac::shallit_expand(v[0], vv)?;
            if sh != cf {
                return Err(Error::PatternMismatch("pattern expansion differs from Euclid".into()));
            }
            shallit = Some(true);
            (cf, Some(RealInterval::exact(x)))
        }
        "surd" => {
            let v: Vec<i64> = num_list(rest, 3, "surd P,D,Q")?;
            if v[1] < 0 {
                return Err(bad("surd D must be nonnegative"));
            }
            let cf = contfrac::cf_of_surd(v[0], v[1] as u64, v[2], a.depth + 1)?;
            let qbits: usize = contfrac::convergents(&cf).q().last().map_or(1, |q| q.bits() as usize);
            let iv = surd_interval(v[0], v[1] as u64, v[2], 4 * qbits + 64)?;
            (cf, Some(iv))
        }
        "digits" => {
            let a_: Vec<BigUint> = big_list(rest)?.iter().map(|x| x.parse().unwrap()).collect();
            if a_.is_empty() {
                return Err(bad("no digits"));
            }
            notes.push("digits only: approximation checks need a value".into());
            (contfrac::CFExpansion { a: a_, exact: false }, None)
        }
        "random" => {
            let bits: usize = rest.parse().map_err(|_| bad("random needs a bit count"))?;
            if bits == 0 || bits > 1 << 16 {
                return Err(bad("random bit count must be in 1..=65536"));
            }
            let mut r = rng::stream(a.seed, 0);
            let mut bytes = vec![0u8; bits.div_ceil(8)];
            r.fill_bytes(&mut bytes);
            let m = BigUint::from_bytes_le(&bytes) & ((BigUint::from(1u32) << bits) - 1u32);
            let iv = RealInterval::dyadic(&m, bits, 0);
            let cf = contfrac::cf_of_interval(&iv.lo, &iv.hi, a.depth + 1)?;
            (cf, Some(iv))
        }
        _ => return Err(bad(format!("unknown alpha kind {kind:?}"))),
    };
    let table = contfrac::convergents(&cf);
    let mut checked = table.clone();
    if cf.exact && checked.rows.len() > 1 {
        // The last convergent equals α; the strict upper bound cannot hold there.
        checked.rows.pop();
    }
    checked.rows.truncate(a.depth + 1);
    let rows = match &interval {
        Some(iv) => contfrac::check_convergent_bounds(iv, &checked)?,
        None => Vec::new(),
    };
    let det = contfrac::determinant_ok(&table);
    let verdict = det && rows.iter().all(|r| r.pass) && shallit.unwrap_or(true);
    let mut csv = String::from("n,a,p,q\n");
    for (n, (ai, (p, q))) in cf.a.iter().zip(&table.rows).enumerate() {
        csv.push_str(&format!("{n},{ai},{p},{q}\n"));
    }
    Ok(Outcome {
        config: to_value(a)?,
        anchors: vec![
            "1/(2 q_n q_{n+1}) <= |alpha - p_n/q_n| < 1/(q_n q_{n+1})",
            "|p_n q_{n+1} - p_{n+1} q_n| = 1",
        ],
        verdict: Some(verdict),
        result: json!({
            "expansion": to_value(&cf)?,
            "convergents": to_value(&table.to_json())?,
            "determinant_ok": det,
            "approximation": to_value(&rows)?,
            "pattern_match": shallit,
            "notes": notes,
        }),
        csv,
    })
}

fn parse_theta(s: &str) -> Result<AngleSource> {
    if s == "golden" {
        return Ok(AngleSource::Golden);
    }
    if let Some(m) = s.strip_prefix("sqrt:") {
        return Ok(AngleSource::FracSqrt {
            m: m.parse().map_err(|_| bad(format!("bad sqrt argument {m:?}")))?,
        });
    }
    let (n, d) = parse_ratio(s)?;
    Ok(AngleSource::Exact { num: n.to_string(), den: d.to_string() })
}

fn cmd_weyl(a: &WeylArgs) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let n = a.n.unwrap_or(prefix.len());
    let anchors = vec!["|N^-1 sum_{k<N} exp(2 pi i n_k theta)|"];
    match &a.theta {
        Some(t) => {
            let src = parse_theta(t)?;
            let max = prefix.terms[..n.min(prefix.len())].iter().max().cloned().unwrap_or_default();
            let theta: Angle = src.at_bits(AngleSource::bits_for(&max))?;
            let avg = measures::weyl_average(&prefix.terms, &theta, n)?;
            Ok(Outcome {
                config: config_with(a, &spec, json!({ "theta_source": to_value(&src)?, "N": n }))?,
                anchors,
                verdict: a.below.map(|b| avg < b),
                result: json!({ "average": cj::fmt_f64(avg), "theta_f64": cj::fmt_f64(theta.to_f64()) }),
                csv: format!("N,average\n{n},{}\n", cj::fmt_f64(avg)),
            })
        }
        None => {
            let plan = WeylSampling {
                samples: a.samples,
                seed: a.seed,
                bits: a.sample_bits,
                min_denominator: a.min_denominator,
                delta: a.scan_delta,
            };
            let r = measures::nonrigidity_scan(&prefix.terms, &plan, n)?;
            let mut csv = String::from("bin_lo,bin_hi,count\n");
            for (i, c) in r.histogram.iter().enumerate() {
                csv.push_str(&format!("{},{},{c}\n", i as f64 / 20.0, (i + 1) as f64 / 20.0));
            }
            Ok(Outcome {
                config: config_with(a, &spec, json!({ "sampling": to_value(&plan)?, "N": n }))?,
                anchors,
                verdict: a.below.map(|b| r.p95 < b),
                result: to_value(&r)?,
                csv,
            })
        }
    }
}

fn uniform_csv(r: &cantor::UniformReport) -> String {
    let mut s = String::from("k,n,max,target,pass\n");
    for row in &r.rows {
        s.push_str(&format!("{},{},{},{},{}\n", row.k, row.n, cj::fmt_f64(row.max), cj::fmt_f64(row.target), row.pass));
    }
    s
}

fn cmd_cantor(a: &CantorArgs, precision: Option<usize>) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let terms = &prefix.terms;
    match a.kind.as_str() {
        "arcs" => {
            let cfg = ArcTreeConfig {
                root_arcs: (a.root_arcs > 0).then_some(a.root_arcs),
                max_children: a.max_children,
                bits: precision.unwrap_or(ArcTreeConfig::default().bits),
            };
            let tree = cantor::build_arc_tree(terms, a.depth, &cfg)?;
            let leaves = tree.leaves();
            let uni = cantor::verify_uniform(&cantor::as_points(&leaves), &tree.uniform_targets())?;
            let structure = tree.check_containment() && tree.check_disjoint() && tree.keeps_one();
            let mut result = json!({
                "k1": tree.k1,
                "levels": to_value(&tree.levels)?,
                "leaf_count": leaves.len(),
                "nested_disjoint_keeps_one": structure,
                "uniform": to_value(&uni)?,
            });
            if a.leaves {
                result["leaves"] = to_value(&tree.leaves_json())?;
            }
            Ok(Outcome {
                config: config_with(a, &spec, json!({ "tree": to_value(&cfg)? }))?,
                anchors: vec!["|lambda^{n_k} - 1| <= 2 gamma_k"],
                verdict: Some(uni.verdict && structure),
                csv: uniform_csv(&uni),
                result,
            })
        }
        "digits" => {
            let positions: Vec<usize> = match &a.positions {
                Some(p) => seqgen::parse_list(p)?.into_iter().map(|x| x as usize).collect(),
                None => (1..=a.depth).collect(),
            };
            let ds = cantor::build_digit_set(terms, &positions, a.depth)?;
            let leaves = ds.leaves()?;
            let uni = cantor::verify_uniform(&cantor::as_points(&leaves), &ds.bounds)?;
            let mut result = json!({ "digit_set": to_value(&ds)?, "leaf_count": leaves.len(), "uniform": to_value(&uni)? });
            if a.leaves {
                result["leaves"] = to_value(&leaves.iter().map(|t| cj::RatJson::from_parts(t.num(), t.den())).collect::<Vec<_>>())?;
            }
            Ok(Outcome {
                config: config_with(a, &spec, json!({ "positions": positions }))?,
                anchors: vec!["|lambda^{n_k} - 1| <= 4 pi n_k / n_{k_{p+1}}"],
                verdict: Some(uni.verdict),
                csv: uniform_csv(&uni),
                result,
            })
        }
        "tree" => {
            let supply = SeedSupply::chain_digits(terms)?;
            let ts = cantor::build_seed_tree(&supply, terms, a.depth)?;
            let injective = ts.injective();
            let bounds = ts.check_bounds(terms);
            let mut csv = String::from("depth,leaf,num,den\n");
            for (i, t) in ts.leaves().iter().enumerate() {
                csv.push_str(&format!("{},{i},{},{}\n", a.depth, t.num(), t.den()));
            }
            Ok(Outcome {
                config: config_with(a, &spec, json!({ "supply": supply.source }))?,
                anchors: vec!["d(mu_n, 1) < 4^-n d(mu_{n-1}, conj mu_{n-1})"],
                verdict: Some(injective && bounds),
                result: json!({ "tree": to_value(&ts)?, "injective": injective, "bounds_ok": bounds }),
                csv,
            })
        }
        k => Err(bad(format!("unknown cantor kind {k:?}"))),
    }
}

fn cmd_simulate(a: &SimulateArgs, precision: Option<usize>) -> Result<Outcome> {
    let (spec, prefix) = a.prefix.build()?;
    let bits = precision.unwrap_or(128);
    let chain = ChainMeasure::dyadic_harmonic(a.depth);
    let atomic = Atomic::from_chain(&chain, a.depth, bits)?;
    let mu = AtomicSpectralMeasure::from_atomic(&atomic)?.symmetrize();
    let mut indices = vec![BigUint::from(0u32)];
    indices.extend(prefix.terms.iter().cloned());
    indices.sort();
    indices.dedup();
    let cfg = SimulationConfig { trials: a.trials, seed: a.seed, indices };
    let paths = gaussproc::sample_paths(&mu, &cfg)?;
    let r = gaussproc::rigidity_statistic(&paths, &prefix.terms, &mu)?;
    Ok(Outcome {
        config: config_with(a, &spec, json!({ "measure": "dyadic_harmonic", "atom_bits": bits, "atoms": mu.atoms().len() }))?,
        anchors: vec!["E|X_{n_k} - X_0|^2 = 2(1 - Re sigma(n_k))"],
        verdict: Some(r.verdict),
        csv: r.to_csv(),
        result: to_value(&r)?,
    })
}
