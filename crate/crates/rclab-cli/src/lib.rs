//! Command-line surface of rclab.
//!
//! Every subcommand reads its parameters from defaults, then an optional `--config`
//! file of `key=value` lines, then flags. Data goes to `--out` (or stdout) and the run
//! record, which holds the timestamps, goes beside it (or to stderr), so replaying the
//! same arguments reproduces the data byte for byte.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::error::ErrorKind;
use clap::{Arg, ArgMatches, Command};

mod commands;
pub mod params;
pub mod record;

use params::{key, parse_config, required, Key, ParamMap};

/// Bad invocation: exit status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

const OUT: Key = key("out", "-", "Data file; `-` writes to stdout");
const JOBS: Key = key("jobs", "1", "Worker threads");
const SEED: Key = key("seed", "1", "Random seed");

const SUBCOMMANDS: [(&str, &str); 8] = [
    ("oracle", "Exact event probabilities by enumeration (CSV)"),
    ("sample", "Per-sweep observables of one chain (JSON lines)"),
    ("measure", "Arm, mixing and crossing estimates over scales (CSV)"),
    ("couple", "Monotone coupling runs along a decision tree (JSON lines)"),
    ("length", "Characteristic-length scan (JSON)"),
    ("parafermion", "Exact parafermionic observable and its identities (JSON)"),
    ("exponents", "Fit exponents to a measure CSV and compare with predictions (CSV)"),
    ("verify", "Run the acceptance suite"),
];

/// Keys accepted by `cmd`, plumbing included.
pub fn keys(cmd: &str) -> Vec<Key> {
    let mut k = match cmd {
        "oracle" => vec![
            key("domain", "box:1", "box:N, rect:WxH, annulus:r:R or a domain file"),
            key("q", "2", "Cluster weights (comma list)"),
            key("p", "pc", "Edge weights (comma list; pc = critical point)"),
            key("h", "0", "Fields (comma list)"),
            key("bc", "free", "Boundary conditions: free, wired, ghost (comma list)"),
            key("event", "crossing", "Events: crossing, edge:K (comma list)"),
        ],
        "sample" => vec![
            key("domain", "box:8", "box:N, rect:WxH, annulus:r:R or a domain file"),
            key("q", "2", "Cluster weight"),
            key("p", "pc", "Edge weight (pc = critical point)"),
            key("h", "0", "Field"),
            key("bc", "free", "free, wired or ghost"),
            key("algo", "heatbath", "heatbath or cm"),
            key("sweeps", "1000", "Recorded sweeps"),
            key("burn-in", "100", "Discarded sweeps"),
            key("every", "1", "Record every k-th sweep"),
            key("obs", "open-fraction,clusters,crossing", "Observables (comma list)"),
            key("seed", "1", "Seeds, one chain each (comma list)"),
        ],
        "measure" => vec![
            key("obs", "pi1", "pi1, pi4, delta, delta-cross, crossing (comma list)"),
            key("q", "2", "Cluster weights (comma list)"),
            key("p", "pc", "Edge weights (comma list; pc = critical point)"),
            key("h", "0", "Fields (comma list)"),
            key("r", "auto", "Inner radius (auto: 0 for pi1, else 1)"),
            required("R", "Outer radii (comma list)"),
            key("box", "auto", "Half-width of the sampled box (auto: R)"),
            key("algo", "heatbath", "heatbath or cm"),
            key("sweeps", "2000", "Sweeps per point"),
            key("burn-in", "200", "Burn-in per point, or auto"),
            SEED,
        ],
        "couple" => vec![
            key("domain", "box:4", "box:N, rect:WxH, annulus:r:R or a domain file"),
            key("q", "2", "Cluster weight"),
            key("p", "pc", "Edge weight of both sides unless overridden"),
            key("p-low", "auto", "Edge weight of the lower measure"),
            key("p-high", "auto", "Edge weight of the upper measure"),
            key("bc-low", "free", "Lower boundary condition"),
            key("bc-high", "wired", "Upper boundary condition"),
            key("tree", "boundary", "boundary, dual or deterministic"),
            key("stop", "coincide", "coincide or none"),
            key("runs", "10", "Number of runs; run i uses seed + i"),
            key("r", "1", "Core radius of the inner flower"),
            key("R", "auto", "Outer radius of the inner flower (auto: box half-width)"),
            SEED,
        ],
        "length" => vec![
            key("q", "1", "Cluster weight"),
            key("p", "pc", "Edge weight"),
            key("delta", "0.05", "Crossing window [delta, 1 - delta]"),
            key("cap", "64", "Largest scale tried"),
            key("algo", "heatbath", "heatbath or cm"),
            key("sweeps", "2000", "Sweeps per scale"),
            key("burn-in", "200", "Burn-in per scale, or auto"),
            SEED,
        ],
        "parafermion" => vec![
            key("domain", "box:1", "box:N, rect:WxH or a domain file"),
            key("root", "auto", "Root vertex x,y on the outer boundary"),
            key("p", "pc", "Edge weight (pc = critical point at q = 4)"),
        ],
        "exponents" => vec![
            required("input", "CSV written by measure"),
            key("exclude", "4", "Scales left out of the fit (comma list, or none)"),
        ],
        "verify" => vec![key("tier", "full", "exact or full")],
        _ => Vec::new(),
    };
    k.push(OUT);
    k.push(JOBS);
    k
}

fn cli() -> Command {
    let mut c = Command::new("rclab")
        .about("Random-cluster model laboratory")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        let mut s = Command::new(name).about(about).arg(Arg::new("config").long("config").value_name("FILE").help("key=value file"));
        for k in keys(name) {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => format!("{} [required]", k.help),
            };
            s = s.arg(Arg::new(k.name).long(k.name).value_name("VALUE").allow_hyphen_values(true).help(help));
        }
        c = c.subcommand(s);
    }
    c
}

/// Runs `argv` (program name first) against the process streams.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    dispatch_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Exit status: 0 success, 1 failure (including a failed acceptance run), 2 bad invocation.
pub fn dispatch_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let m = match cli().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand | ErrorKind::MissingSubcommand => {
                    let _ = writeln!(err, "\n{}", cli().render_help());
                    2
                }
                _ => 2,
            };
        }
    };
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let res = params_of(name, sub).map_err(anyhow::Error::from).and_then(|p| commands::run(name, &p, out, err));
    match res {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() || e.downcast_ref::<rclab::Error>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn params_of(name: &str, sub: &ArgMatches) -> Result<ParamMap, Usage> {
    let keys = keys(name);
    let config = match sub.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("config file {path:?}: {e}")))?;
            parse_config(&text, &keys)?
        }
        None => BTreeMap::new(),
    };
    let flags = keys.iter().filter_map(|k| sub.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone()))).collect();
    ParamMap::resolve(&keys, config, flags)
}

/// Applies `f` to every item on `jobs` threads; results keep the order of `items`.
pub fn par_map<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every item ran")).collect()
}
