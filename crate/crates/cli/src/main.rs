use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use envy_pricing::choice::{draw_order, Adversary, Arrivals, Odometer, Policy, TieBreak};
use envy_pricing::envy::{verify_envy_free, EnvyNotion, Timing};
use envy_pricing::lab::adversary::{for_each_branch, AdversaryReport, ReportBuilder, SchemeDescriptor, DEFAULT_MAX_AGENTS};
use envy_pricing::lab::generators::{gen_cyclic_triple, gen_harmonic, gen_random, gen_vertex_cover_market, Graph};
use envy_pricing::lab::oracles::{next_permutation, oracle_expost_revenue_opt, oracle_static_ef_revenue};
use envy_pricing::market::{instance_to_json, load_instance, ArrivalOrder, Market};
use envy_pricing::matching::enumerate_max_matchings;
use envy_pricing::rational::{format_rational, parse_rational, Rational};
use envy_pricing::revenue::{run_revenue_ex_ante, run_revenue_ex_post, run_revenue_weak};
use envy_pricing::trace::{Offer, Trace};
use envy_pricing::welfare::WelfareScheme;
use envy_pricing::Error;

#[derive(Parser)]
#[command(name = "envy-pricing", version, about = "Envy-free posted pricing: schemes, verifiers and oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pricing scheme on an instance and write its trace.
    Run(RunArgs),
    /// Check a trace against an envy-freeness notion.
    Verify(VerifyArgs),
    /// Write a generated instance.
    Gen(GenArgs),
    /// Run a brute-force oracle and write its report.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeName {
    WelfareExpost,
    WelfareExante,
    RevenueExpost,
    RevenueExante,
    RevenueWeak,
}

impl SchemeName {
    fn label(self) -> &'static str {
        match self {
            SchemeName::WelfareExpost => "welfare-expost",
            SchemeName::WelfareExante => "welfare-exante",
            SchemeName::RevenueExpost => "revenue-expost",
            SchemeName::RevenueExante => "revenue-exante",
            SchemeName::RevenueWeak => "revenue-weak",
        }
    }

    fn descriptor(self, delta: Option<Rational>) -> SchemeDescriptor {
        match self {
            SchemeName::WelfareExpost => SchemeDescriptor::WelfareExPost,
            SchemeName::WelfareExante => SchemeDescriptor::WelfareExAnte,
            SchemeName::RevenueExpost => SchemeDescriptor::RevenueExPost,
            SchemeName::RevenueExante => SchemeDescriptor::RevenueExAnte(delta),
            SchemeName::RevenueWeak => SchemeDescriptor::RevenueWeak,
        }
    }
}

/// `given`, `seed:<k>` or `all`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum OrderFlag {
    Given,
    Seed(u64),
    All,
}

/// `lex`, `seed:<k>` or `all`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TieFlag {
    Lex,
    Seed(u64),
    All,
}

fn parse_seed(text: &str) -> Option<Result<u64, String>> {
    text.strip_prefix("seed:")
        .map(|k| k.parse().map_err(|_| format!("bad seed `{k}`")))
}

impl FromStr for OrderFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "given" => Ok(OrderFlag::Given),
            "all" => Ok(OrderFlag::All),
            _ => parse_seed(s)
                .map(|k| k.map(OrderFlag::Seed))
                .unwrap_or_else(|| Err(format!("expected given, seed:<k> or all, got `{s}`"))),
        }
    }
}

impl FromStr for TieFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lex" => Ok(TieFlag::Lex),
            "all" => Ok(TieFlag::All),
            _ => parse_seed(s)
                .map(|k| k.map(TieFlag::Seed))
                .unwrap_or_else(|| Err(format!("expected lex, seed:<k> or all, got `{s}`"))),
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    scheme: SchemeName,
    /// Arrival order: the instance's own, a seeded draw, or every order.
    #[arg(long)]
    order: Option<OrderFlag>,
    /// Tie-breaking among equally good options.
    #[arg(long, default_value = "lex")]
    tie: TieFlag,
    /// Price shift for revenue-exante, as `p/q`.
    #[arg(long)]
    delta: Option<String>,
    /// Amount taken off every revenue-scheme offer so that no buyer is
    /// left exactly indifferent.
    #[arg(long)]
    discount: Option<String>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    notion: EnvyNotion,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Harmonic,
    VertexCover,
    Cyclic3,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum CanonicalOrder {
    EdgeFirst,
    VertexFirst,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Size for harmonic; number of agents for random.
    #[arg(long)]
    n: Option<usize>,
    /// Number of items for random (defaults to `n`).
    #[arg(long)]
    items: Option<usize>,
    /// Largest valuation for random.
    #[arg(long, default_value_t = 5)]
    max: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge-list JSON file, or `k4` / `k33`.
    #[arg(long)]
    graph: Option<String>,
    /// Which canonical order a vertex-cover instance carries.
    #[arg(long, value_enum, default_value = "edge-first")]
    canonical_order: CanonicalOrder,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleName {
    StaticEfRevenue,
    MaxMatchings,
    ExpostRevenueGrid,
    Adversary,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    oracle: OracleName,
    /// JSON array of agent ids; defaults to the instance's order.
    #[arg(long)]
    order_file: Option<PathBuf>,
    /// Candidate prices for the grid search.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    grid: Vec<String>,
    /// Scheme explored by the adversary oracle.
    #[arg(long, value_enum, default_value = "welfare-expost")]
    scheme: SchemeName,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Scheme { message: String, trace: Box<Trace> },
    TooLarge(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InstanceTooLarge { .. } => Failure::TooLarge(e.to_string()),
            Error::SchemeFailure { ref trace, .. } => Failure::Scheme {
                message: e.to_string(),
                trace: trace.clone(),
            },
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            // a closed pipe (`| head`) is not an error worth reporting
            let _ = writeln!(io::stdout().lock(), "{text}");
            Ok(())
        }
    }
}

fn pretty(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("JSON values always serialize")
}

fn trace_value(trace: &Trace) -> Value {
    serde_json::from_str(&trace.to_json()).expect("trace JSON is valid")
}

fn parse_flag(flag: &str, text: Option<&str>) -> Result<Option<Rational>, Failure> {
    text.map(|t| parse_rational(t).map_err(|e| Failure::Usage(format!("--{flag}: {e}"))))
        .transpose()
}

fn report_value(scheme: SchemeName, report: &AdversaryReport) -> Value {
    let mut v = serde_json::to_value(report).expect("reports serialize");
    if let Value::Object(map) = &mut v {
        map.insert("scheme".into(), json!(scheme.label()));
    }
    v
}

fn tie_rule(tie: TieFlag) -> TieBreak {
    match tie {
        TieFlag::Seed(k) => TieBreak::Seeded(k),
        _ => TieBreak::Lexicographic,
    }
}

fn given_order(order: &Option<ArrivalOrder>, market: &Market) -> ArrivalOrder {
    order.clone().unwrap_or_else(|| ArrivalOrder::identity(market.num_agents()))
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let instance = load_instance(&read(&args.input)?)?;
    let market = instance.market;
    let delta = parse_flag("delta", args.delta.as_deref())?;
    if delta.is_some() && args.scheme != SchemeName::RevenueExante {
        return Err(Failure::Usage("--delta only applies to revenue-exante".into()));
    }
    let discount = parse_flag("discount", args.discount.as_deref())?;
    let exhaustive = args.order == Some(OrderFlag::All) || args.tie == TieFlag::All;
    if discount.is_some() && (exhaustive || matches!(args.scheme, SchemeName::WelfareExpost | SchemeName::WelfareExante)) {
        return Err(Failure::Usage("--discount applies to single revenue-scheme runs only".into()));
    }
    let output = Some(args.output.as_path());

    let trace = match args.scheme {
        SchemeName::WelfareExpost | SchemeName::WelfareExante => {
            let timing = if args.scheme == SchemeName::WelfareExpost { Timing::ExPost } else { Timing::ExAnte };
            let scheme = WelfareScheme::prepare(&market, timing)?;
            let order = args.order.unwrap_or(OrderFlag::Given);
            if exhaustive {
                let mut builder = ReportBuilder::default();
                let mut visit = |adv: &mut dyn Adversary| -> Result<(), Error> { builder.add(&scheme.run(adv)?) };
                if market.num_agents() > DEFAULT_MAX_AGENTS {
                    return Err(Failure::TooLarge(format!(
                        "{} agents exceeds the exhaustive limit of {DEFAULT_MAX_AGENTS}",
                        market.num_agents()
                    )));
                }
                match (order, args.tie) {
                    (OrderFlag::All, TieFlag::All) => {
                        Odometer::new().for_each(|adv| visit(adv))?;
                    }
                    (OrderFlag::All, tie) => {
                        let mut seq: Vec<usize> = (0..market.num_agents()).collect();
                        loop {
                            let fixed = ArrivalOrder::new(seq.clone(), market.num_agents())?;
                            visit(&mut Policy::new(Arrivals::Given(fixed), tie_rule(tie)))?;
                            if !next_permutation(&mut seq) {
                                break;
                            }
                        }
                    }
                    (order, _) => {
                        let fixed = match order {
                            OrderFlag::Seed(k) => draw_order(&mut Policy::new(Arrivals::Seeded(k), TieBreak::Lexicographic), market.num_agents()),
                            _ => given_order(&instance.order, &market),
                        };
                        Odometer::with_order(fixed).for_each(|adv| visit(adv))?;
                    }
                }
                emit(output, &pretty(&report_value(args.scheme, &builder.finish())))?;
                return Ok(ExitCode::SUCCESS);
            }
            let arrivals = match order {
                OrderFlag::Seed(k) => Arrivals::Seeded(k),
                _ => Arrivals::Given(given_order(&instance.order, &market)),
            };
            scheme.run(&mut Policy::new(arrivals, tie_rule(args.tie)))?
        }
        SchemeName::RevenueExpost | SchemeName::RevenueExante => {
            if matches!(args.order, Some(OrderFlag::Given | OrderFlag::Seed(_))) {
                return Err(Failure::Usage(format!("{} chooses its own arrival order", args.scheme.label())));
            }
            if exhaustive {
                return run_report(&market, args.scheme, delta, output);
            }
            match args.scheme {
                SchemeName::RevenueExpost => run_revenue_ex_post(&market, discount.as_ref())?,
                _ => run_revenue_ex_ante(&market, delta.as_ref(), discount.as_ref())?,
            }
        }
        SchemeName::RevenueWeak => {
            if exhaustive {
                if args.order != Some(OrderFlag::All) {
                    return Err(Failure::Usage("revenue-weak explores orders only; use --order all".into()));
                }
                return run_report(&market, args.scheme, None, output);
            }
            let order = match args.order {
                Some(OrderFlag::Seed(k)) => draw_order(&mut Policy::new(Arrivals::Seeded(k), TieBreak::Lexicographic), market.num_agents()),
                _ => instance.order.clone().ok_or_else(|| {
                    Failure::Usage("revenue-weak needs an arrival order: add one to the instance or pass --order seed:<k>".into())
                })?,
            };
            run_revenue_weak(&market, &order, discount.as_ref())?
        }
    };
    emit(output, &trace.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn run_report(market: &Market, scheme: SchemeName, delta: Option<Rational>, output: Option<&Path>) -> CmdResult {
    let mut builder = ReportBuilder::default();
    for_each_branch(market, &scheme.descriptor(delta), DEFAULT_MAX_AGENTS, |t| builder.add(t))?;
    emit(output, &pretty(&report_value(scheme, &builder.finish())))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let trace = Trace::from_json(&read(&args.trace)?)?;
    match verify_envy_free(&trace, args.notion)? {
        None => {
            println!("ok: {} envy-free", args.notion);
            Ok(ExitCode::SUCCESS)
        }
        Some(w) => {
            println!("{}", serde_json::to_string_pretty(&w).expect("witnesses serialize"));
            eprintln!("{w}");
            Ok(ExitCode::from(1))
        }
    }
}

fn load_graph(source: &str) -> Result<Graph, Failure> {
    match source {
        "k4" => Ok(Graph::complete(4)),
        "k33" => Ok(Graph::complete_bipartite(3, 3)),
        path => Ok(Graph::from_json(&read(Path::new(path))?)?),
    }
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let need_n = || match args.n {
        Some(n) if n > 0 => Ok(n),
        _ => Err(Failure::Usage("this family needs --n with a positive size".into())),
    };
    let text = match args.family {
        Family::Harmonic => instance_to_json(&gen_harmonic(need_n()?), None),
        Family::Cyclic3 => instance_to_json(&gen_cyclic_triple(), None),
        Family::Random => {
            let n = need_n()?;
            instance_to_json(&gen_random(n, args.items.unwrap_or(n), args.max, args.seed), None)
        }
        Family::VertexCover => {
            let source = args
                .graph
                .as_deref()
                .ok_or_else(|| Failure::Usage("vertex-cover needs --graph <file|k4|k33>".into()))?;
            let vc = gen_vertex_cover_market(&load_graph(source)?)?;
            let order = match args.canonical_order {
                CanonicalOrder::EdgeFirst => &vc.edge_first,
                CanonicalOrder::VertexFirst => &vc.vertex_first,
            };
            instance_to_json(&vc.market, Some(order))
        }
    };
    emit(args.output.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn offer_text(offer: &Offer) -> String {
    match offer {
        Offer::Price(p) => format_rational(p),
        Offer::NotOffered => "NOT_OFFERED".into(),
    }
}

fn pairs_value(market: &Market, pairs: &[(usize, usize)]) -> Value {
    pairs
        .iter()
        .map(|&(a, i)| json!([market.agents()[a], market.items()[i]]))
        .collect()
}

fn cmd_oracle(args: OracleArgs) -> CmdResult {
    let instance = load_instance(&read(&args.input)?)?;
    let market = &instance.market;
    let report = match args.oracle {
        OracleName::StaticEfRevenue => {
            let r = oracle_static_ef_revenue(market)?;
            let prices: Map<String, Value> = r
                .pricing
                .prices
                .iter()
                .map(|(&i, o)| (market.items()[i].clone(), json!(offer_text(o))))
                .collect();
            json!({
                "oracle": "static-ef-revenue",
                "revenue": format_rational(&r.revenue),
                "prices": prices,
                "allocation": pairs_value(market, &r.pricing.allocation),
            })
        }
        OracleName::MaxMatchings => {
            let all = enumerate_max_matchings(market)?;
            let weight = all.first().map(|m| m.weight(market)).unwrap_or_default();
            json!({
                "oracle": "max-matchings",
                "weight": format_rational(&weight),
                "count": all.len(),
                "matchings": all.iter().map(|m| pairs_value(market, &m.pairs())).collect::<Vec<_>>(),
            })
        }
        OracleName::ExpostRevenueGrid => {
            let order = match &args.order_file {
                Some(path) => {
                    let ids: Vec<String> = serde_json::from_str(&read(path)?)
                        .map_err(|e| Failure::Usage(format!("--order-file: expected a JSON array of agent ids: {e}")))?;
                    ArrivalOrder::from_ids(market, &ids)?
                }
                None => instance
                    .order
                    .clone()
                    .ok_or_else(|| Failure::Usage("no arrival order: pass --order-file or add one to the instance".into()))?,
            };
            let grid = args
                .grid
                .iter()
                .map(|p| parse_rational(p).map_err(|e| Failure::Usage(format!("--grid: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let r = oracle_expost_revenue_opt(market, &order, &grid)?;
            json!({
                "oracle": "expost-revenue-grid",
                "revenue": format_rational(&r.revenue),
                "grid": grid.iter().map(format_rational).collect::<Vec<_>>(),
                "order": order.ids(market),
                "nodes": r.nodes,
                "trace": trace_value(&r.trace),
            })
        }
        OracleName::Adversary => {
            let delta = parse_flag("delta", args.delta.as_deref())?;
            let mut builder = ReportBuilder::default();
            for_each_branch(market, &args.scheme.descriptor(delta), DEFAULT_MAX_AGENTS, |t| builder.add(t))?;
            let mut v = report_value(args.scheme, &builder.finish());
            if let Value::Object(map) = &mut v {
                map.insert("oracle".into(), json!("adversary"));
            }
            v
        }
    };
    emit(args.output.as_deref(), &pretty(&report))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, output) = match cli.command {
        Command::Run(a) => {
            let out = a.output.clone();
            (cmd_run(a), Some(out))
        }
        Command::Verify(a) => (cmd_verify(a), None),
        Command::Gen(a) => (cmd_gen(a), None),
        Command::Oracle(a) => (cmd_oracle(a), None),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Scheme { message, trace }) => {
            eprintln!("error: {message}");
            if let Some(path) = output {
                match fs::write(&path, format!("{}\n", trace.to_json())) {
                    Ok(()) => eprintln!("partial trace written to {}", path.display()),
                    Err(e) => eprintln!("cannot write {}: {e}", path.display()),
                }
            }
            ExitCode::from(3)
        }
        Err(Failure::TooLarge(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use envy_pricing::market::load_market;

    #[test]
    fn errors_map_to_exit_classes() {
        let m = load_market(r#"{"agents":["a"],"items":["i"],"valuations":{}}"#).unwrap();
        let failure = Error::SchemeFailure {
            step: 1,
            reason: "boom".into(),
            trace: Box::new(Trace::new(m)),
        };
        assert!(matches!(Failure::from(failure), Failure::Scheme { .. }));
        let big = Error::InstanceTooLarge { what: "x", detail: "y".into() };
        assert!(matches!(Failure::from(big), Failure::TooLarge(_)));
        assert!(matches!(Failure::from(Error::InvalidParameter("z".into())), Failure::Usage(_)));
    }

    #[test]
    fn flag_parsing() {
        assert_eq!("seed:12".parse::<OrderFlag>().unwrap(), OrderFlag::Seed(12));
        assert_eq!("all".parse::<TieFlag>().unwrap(), TieFlag::All);
        assert!("seed:x".parse::<TieFlag>().is_err());
        assert!("random".parse::<OrderFlag>().is_err());
    }
}
