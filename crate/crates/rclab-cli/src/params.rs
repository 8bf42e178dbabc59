//! Parameter maps: defaults, then a `key=value` config file, then flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use rclab::lattice::{build_annulus, build_box, p_c, BoundaryCondition, Domain};

use crate::Usage;

/// A recognised key. `default: None` marks a required key.
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default: Some(default), help }
}

pub const fn required(name: &'static str, help: &'static str) -> Key {
    Key { name, default: None, help }
}

/// Keys accepted by every subcommand. They shape where output goes or how fast it is
/// produced, never what it contains, so they stay out of the content hash.
pub const PLUMBING: [&str; 3] = ["config", "out", "jobs"];

/// Parses a config file body. Blank lines and lines starting with `#` are skipped.
pub fn parse_config(text: &str, keys: &[Key]) -> Result<BTreeMap<String, String>, Usage> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Usage(format!("config line {}: expected key=value", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "config" || !keys.iter().any(|x| x.name == k) {
            return Err(Usage(format!("config line {}: unknown key {k:?}", n + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Usage(format!("config line {}: key {k:?} repeated", n + 1)));
        }
    }
    Ok(out)
}

/// Fully resolved parameters of one invocation.
#[derive(Clone, Debug)]
pub struct ParamMap(pub BTreeMap<String, String>);

impl ParamMap {
    /// Later layers win: defaults, config, flags.
    pub fn resolve(keys: &[Key], config: BTreeMap<String, String>, flags: BTreeMap<String, String>) -> Result<Self, Usage> {
        let mut m = BTreeMap::new();
        for k in keys {
            if let Some(d) = k.default {
                m.insert(k.name.to_string(), d.to_string());
            }
        }
        m.extend(config);
        m.extend(flags);
        for k in keys {
            if !m.contains_key(k.name) {
                return Err(Usage(format!("missing required parameter --{}", k.name)));
            }
        }
        Ok(ParamMap(m))
    }

    pub fn str(&self, k: &str) -> &str {
        self.0.get(k).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, k: &str) -> Result<T, Usage>
    where
        T::Err: Display,
    {
        parse_one(k, self.str(k))
    }

    pub fn list<T: FromStr>(&self, k: &str) -> Result<Vec<T>, Usage>
    where
        T::Err: Display,
    {
        split(self.str(k)).map(|s| parse_one(k, s)).collect()
    }

    /// `p` values for a given `q`; `pc` stands for the critical point.
    pub fn p_list(&self, k: &str, q: f64) -> Result<Vec<f64>, Usage> {
        split(self.str(k)).map(|s| if s == "pc" { Ok(p_c(q)) } else { parse_one(k, s) }).collect()
    }

    pub fn p(&self, k: &str, q: f64) -> Result<f64, Usage> {
        match self.p_list(k, q)?.as_slice() {
            [p] => Ok(*p),
            _ => Err(Usage(format!("--{k} takes a single value"))),
        }
    }

    /// `auto` maps to `None`.
    pub fn opt<T: FromStr>(&self, k: &str) -> Result<Option<T>, Usage>
    where
        T::Err: Display,
    {
        match self.str(k) {
            "auto" => Ok(None),
            s => parse_one(k, s).map(Some),
        }
    }

    /// Map without the plumbing keys, as `key=value` lines.
    pub fn canonical(&self) -> String {
        self.0.iter().filter(|(k, _)| !PLUMBING.contains(&k.as_str())).map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_one<T: FromStr>(k: &str, s: &str) -> Result<T, Usage>
where
    T::Err: Display,
{
    s.parse().map_err(|e| Usage(format!("--{k} {s:?}: {e}")))
}

/// A domain read from `box:N`, `rect:WxH` (vertices), `annulus:r:R` or a path to a file in
/// the plain-text domain format. File contents are returned so they can be hashed.
pub fn domain(spec: &str) -> anyhow::Result<(Domain, Option<String>)> {
    let num = |s: &str| s.parse::<u32>().map_err(|e| Usage(format!("domain {spec:?}: {e}")));
    if let Some(n) = spec.strip_prefix("box:") {
        return Ok((build_box(num(n)?), None));
    }
    if let Some(wh) = spec.strip_prefix("rect:") {
        let (w, h) = wh.split_once('x').ok_or_else(|| Usage(format!("domain {spec:?}: expected rect:WxH")))?;
        return Ok((Domain::rect(0, 0, num(w)? as i32, num(h)? as i32)?, None));
    }
    if let Some(rr) = spec.strip_prefix("annulus:") {
        let (r, big) = rr.split_once(':').ok_or_else(|| Usage(format!("domain {spec:?}: expected annulus:r:R")))?;
        return Ok((build_annulus(num(r)?, num(big)?)?, None));
    }
    let path = spec.strip_prefix("file:").unwrap_or(spec);
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("domain file {path:?}: {e}")))?;
    Ok((Domain::from_text(&text)?, Some(text)))
}

/// `free`, `wired`, or `ghost` (wired, and wired to the ghost vertex).
pub fn boundary(d: &Domain, id: &str) -> Result<BoundaryCondition, Usage> {
    match id {
        "free" => Ok(BoundaryCondition::free(d)),
        "wired" => Ok(BoundaryCondition::wired(d)),
        "ghost" => Ok(BoundaryCondition::wired_with_ghost(d)),
        _ => Err(Usage(format!("unknown boundary condition {id:?}; expected free, wired or ghost"))),
    }
}
