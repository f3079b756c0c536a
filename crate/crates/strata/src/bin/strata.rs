//! Command-line front end: graph enumeration, class construction, and the
//! verification suites, with a persisted intersection-number table.

use clap::{Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::path::PathBuf;
use strata::algebra::{class_to_string, Space};
use strata::graphs::{enumerate_stable_graphs, GraphFilter};
use strata::hyperelliptic::{
    hyp_ct_formula, hyp_recursive, hyp_rt_formula, hyp_tilde_formula, nct_closed, nct_recursive,
    phigamma, pixton_exponential, prod_formula,
};
use strata::integrals::table;
use strata::rat::{rat_i64, Rat};
use strata::verify::{report, suite_hyp, suite_nct, suite_pixton, suite_trees, vanishing_proxy_n7};

#[derive(Parser)]
#[command(name = "strata", about = "Exact strata algebra for genus <= 2", version)]
struct Cli {
    /// Intersection-number table file (default: $STRATA_TABLE)
    #[arg(long, global = true)]
    table: Option<PathBuf>,

    /// Output directory for class and report files
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker pool size (0 = default)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Recompute every table entry from scratch, auditing persisted values
    #[arg(long, global = true)]
    rebuild_table: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    Ct,
    Rt,
    Nrt,
    Tilde,
}

impl FilterArg {
    fn to_filter(self) -> GraphFilter {
        match self {
            FilterArg::All => GraphFilter::All,
            FilterArg::Ct => GraphFilter::CompactType,
            FilterArg::Rt => GraphFilter::RationalTails,
            FilterArg::Nrt => GraphFilter::NoRationalTails,
            FilterArg::Tilde => GraphFilter::Extended,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassName {
    HypCt,
    HypRt,
    HypTilde,
    HypRec,
    Phigamma,
    NctRec,
    NctClosed,
    Pixton,
    Prod,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    Trees,
    Pixton,
    Hyp,
    Nct,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate canonical stable graphs
    Graphs {
        #[arg(short = 'g')]
        genus: u32,
        #[arg(short = 'n')]
        n: u32,
        #[arg(long, value_enum, default_value = "all")]
        filter: FilterArg,
        /// Print only the number of graphs
        #[arg(long)]
        count: bool,
    },
    /// Construct a named class and write its file
    Class {
        #[arg(value_enum)]
        name: ClassName,
        #[arg(short = 'n')]
        n: u32,
        /// Divisor coefficients a,c,b for the exponential and product forms
        #[arg(long, default_value = "3,-1,1", allow_hyphen_values = true)]
        params: String,
        /// Genus for the exponential and product forms
        #[arg(short = 'g', default_value_t = 2)]
        genus: u32,
        /// Truncation degree for the exponential form
        #[arg(long, default_value_t = 3)]
        max_degree: i64,
        /// Allow the extended-family formula at n = 5, 6
        #[arg(long)]
        experimental_tilde_n56: bool,
    },
    /// Run verification suites; exit code 0 iff everything passes
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteName,
        #[arg(long, default_value_t = 3)]
        max_n: u32,
        /// Include the compact-type vanishing proxy on seven points
        #[arg(long)]
        vanishing_n7: bool,
    },
}

fn main() {
    let cli = Cli::parse();
    strata::par::configure_threads(cli.jobs);
    let table_path = cli
        .table
        .clone()
        .or_else(|| std::env::var("STRATA_TABLE").ok().map(PathBuf::from));
    if let Some(p) = &table_path {
        if cli.rebuild_table {
            let t = table();
            if p.exists() {
                t.load(p).expect("table load failed");
                let entries = t.entries();
                t.clear();
                let mut bad = 0;
                for ((g, a), v) in entries {
                    let fresh = strata::integrals::psi_integral(g, &a);
                    if fresh != v {
                        bad += 1;
                        eprintln!("table audit mismatch at g={} a={:?}", g, a);
                    }
                }
                if bad > 0 {
                    eprintln!("table audit: {} mismatches (recomputed values kept)", bad);
                } else {
                    eprintln!("table audit: all entries reproduced");
                }
            }
        } else if p.exists() {
            let n = table().load(p).expect("table load failed");
            eprintln!("loaded {} table entries", n);
        }
    }

    let code = run(&cli);

    if let Some(p) = &table_path {
        if table().is_dirty() {
            table().save(p).expect("table save failed");
        }
    }
    std::process::exit(code);
}

fn out_writer(cli: &Cli, name: &str, contents: &str) {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).expect("cannot create output directory");
            let path = dir.join(name);
            std::fs::write(&path, contents).expect("write failed");
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", contents),
    }
}

fn parse_params(s: &str) -> (i64, i64, i64) {
    let parts: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse().expect("bad coefficient"))
        .collect();
    assert_eq!(parts.len(), 3, "expected a,c,b");
    (parts[0], parts[1], parts[2])
}

fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Graphs {
            genus,
            n,
            filter,
            count,
        } => {
            let space = Space::new(*genus, *n);
            let graphs = enumerate_stable_graphs(*genus, &space.marks, filter.to_filter());
            if *count {
                println!("{}", graphs.len());
            } else {
                let mut lines = String::new();
                for g in &graphs {
                    let aut = g.canonicalize().aut_count;
                    lines.push_str(&g.record(aut));
                    lines.push('\n');
                }
                out_writer(cli, &format!("graphs_g{}_n{}.txt", genus, n), &lines);
            }
            0
        }
        Command::Class {
            name,
            n,
            params,
            genus,
            max_degree,
            experimental_tilde_n56,
        } => {
            let (a, c, b) = parse_params(params);
            let (cls, fname) = match name {
                ClassName::HypCt => (hyp_ct_formula(*n), format!("hyp_ct_n{}.txt", n)),
                ClassName::HypRt => (hyp_rt_formula(*n), format!("hyp_rt_n{}.txt", n)),
                ClassName::HypTilde => (
                    hyp_tilde_formula(*n, *experimental_tilde_n56),
                    format!("hyp_tilde_n{}.txt", n),
                ),
                ClassName::HypRec => (hyp_recursive(*n), format!("hyp_rec_n{}.txt", n)),
                ClassName::Phigamma => (phigamma(*n), format!("phigamma_n{}.txt", n)),
                ClassName::NctRec => (nct_recursive(*n), format!("nct_rec_n{}.txt", n)),
                ClassName::NctClosed => (nct_closed(*n), format!("nct_closed_n{}.txt", n)),
                ClassName::Pixton => {
                    let amap: BTreeMap<u32, Rat> = (1..=*n).map(|i| (i, rat_i64(a))).collect();
                    (
                        pixton_exponential(*genus, *n, &amap, &rat_i64(c), &rat_i64(b), *max_degree),
                        format!("pixton_g{}_n{}.txt", genus, n),
                    )
                }
                ClassName::Prod => (
                    prod_formula(*genus, *n, a, c, b),
                    format!("prod_g{}_n{}.txt", genus, n),
                ),
            };
            out_writer(cli, &fname, &class_to_string(&cls));
            0
        }
        Command::Verify {
            suite,
            max_n,
            vanishing_n7,
        } => {
            let mut results = Vec::new();
            match suite {
                SuiteName::Trees => results.extend(suite_trees()),
                SuiteName::Pixton => results.extend(suite_pixton()),
                SuiteName::Hyp => results.extend(suite_hyp(*max_n)),
                SuiteName::Nct => results.extend(suite_nct(*max_n)),
                SuiteName::All => {
                    results.extend(suite_trees());
                    results.extend(suite_pixton());
                    results.extend(suite_hyp(*max_n));
                    results.extend(suite_nct(*max_n));
                }
            }
            if *vanishing_n7 {
                results.push(vanishing_proxy_n7());
            }
            let rep = report(&results);
            print!("{}", rep);
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).expect("cannot create output directory");
                std::fs::write(dir.join("verify_report.txt"), &rep).expect("write failed");
                let failed = results.iter().filter(|r| !r.pass).count();
                let summary = format!(
                    "checks={} failed={} status={}\n",
                    results.len(),
                    failed,
                    if failed == 0 { "PASS" } else { "FAIL" }
                );
                std::fs::write(dir.join("verify_summary.txt"), summary).expect("write failed");
            }
            if results.iter().all(|r| r.pass) {
                0
            } else {
                1
            }
        }
    }
}
