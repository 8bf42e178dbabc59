use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use rclab::acceptance::{run_tier, Budget, Tier};
use rclab::coupling::{
    boundary_cluster_tree, conditions_coincide, deterministic_tree, dual_cluster_tree, explore_inner_flower, is_boosting_pair,
    run_coupling, DecisionTree, History, PetalKind,
};
use rclab::exact::{cluster_count, event_probability, Clusters, EdgeConfig, ModelParams};
use rclab::lattice::{p_c, BoundaryCondition, Domain, Vertex};
use rclab::observables::{arm_probability, box_crossing, characteristic_length, delta_hat, ArmSpec, LengthScanResult};
use rclab::parafermion::{observable_exact, root_edge, ObservableValue};
use rclab::sampler::{bounding_box_crossing, estimate, Algorithm, ChainState, RunSpec};
use rclab::scaling::{exponent_for_observable, fit_exponent_with, predicted, FitPoint};

use crate::params::{boundary, domain, ParamMap};
use crate::record::{input_hash, now, RunRecord, Sink};
use crate::{par_map, Usage};

/// Shared state of one invocation.
struct Run<'a> {
    name: &'a str,
    params: &'a ParamMap,
    started: String,
    files: Vec<(String, String)>,
}

impl Run<'_> {
    fn jobs(&self) -> Result<usize> {
        Ok(self.params.get("jobs")?)
    }

    /// Content hash of the inputs; its prefix is the id every data row carries.
    fn hash(&self) -> String {
        input_hash(self.name, self.params, &self.files)
    }

    fn id(&self) -> String {
        self.hash()[..16].to_string()
    }

    fn record(&self) -> RunRecord {
        RunRecord {
            id: self.id(),
            command: self.name.to_string(),
            params: self.params.0.clone(),
            seed: self.params.0.get("seed").cloned(),
            input_hash: self.hash(),
            started: self.started.clone(),
            finished: String::new(),
            outputs: Vec::new(),
        }
    }

    fn domain(&mut self, key: &str) -> Result<Domain> {
        let spec = self.params.str(key);
        let (d, text) = domain(spec)?;
        if let Some(t) = text {
            self.files.push((spec.to_string(), t));
        }
        Ok(d)
    }

    fn finish(self, sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
        sink.finish(self.record(), out, err)?;
        Ok(0)
    }
}

pub fn run(name: &str, params: &ParamMap, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let run = Run { name, params, started: now(), files: Vec::new() };
    let sink = Sink::new(params.str("out"));
    match name {
        "oracle" => oracle(run, sink, out, err),
        "sample" => sample(run, sink, out, err),
        "measure" => measure(run, sink, out, err),
        "couple" => couple(run, sink, out, err),
        "length" => length(run, sink, out, err),
        "parafermion" => parafermion(run, sink, out, err),
        "exponents" => exponents(run, sink, out, err),
        "verify" => verify(run, sink, out, err),
        _ => Err(Usage(format!("unknown subcommand {name:?}")).into()),
    }
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn sorted_strings(xs: &str) -> Vec<String> {
    let mut v: Vec<String> = xs.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    v.sort();
    v.dedup();
    v
}

fn spec(p: &ParamMap, seed: u64) -> Result<RunSpec> {
    Ok(RunSpec { sweeps: p.get("sweeps")?, burn_in: p.opt("burn-in")?, seed, algo: p.get::<Algorithm>("algo")? })
}

fn oracle(mut run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let d = run.domain("domain")?;
    let m = d.n_edges();
    let events = sorted_strings(p.str("event"));
    for ev in &events {
        match ev.strip_prefix("edge:") {
            None if ev == "crossing" => {}
            Some(k) if k.parse::<usize>().is_ok_and(|k| k < m) => {}
            _ => return Err(Usage(format!("unknown event {ev:?}; expected crossing or edge:K with K < {m}")).into()),
        }
    }
    let bcs = sorted_strings(p.str("bc"));
    let mut points = Vec::new();
    for q in sorted(p.list("q")?) {
        for pp in sorted(p.p_list("p", q)?) {
            for h in sorted(p.list("h")?) {
                for bc in &bcs {
                    for ev in &events {
                        points.push((q, pp, h, bc.clone(), ev.clone()));
                    }
                }
            }
        }
    }
    let rows = par_map(run.jobs()?, &points, |(q, pp, h, bc, ev)| -> Result<f64> {
        let params = ModelParams::new(*pp, *q, *h)?;
        let bc = boundary(&d, bc)?;
        let prob = match ev.strip_prefix("edge:") {
            Some(k) => {
                let k: usize = k.parse()?;
                event_probability(&params, &d, &bc, &move |c: &EdgeConfig, _: &Clusters| c.is_open(k))?
            }
            None => event_probability(&params, &d, &bc, &|c: &EdgeConfig, _: &Clusters| bounding_box_crossing(&d, c))?,
        };
        Ok(prob)
    });
    let id = run.id();
    let mut w = csv::Writer::from_writer(&mut sink.data);
    w.write_record(["domain_id", "p", "q", "h", "bc_id", "event_id", "probability", "run_id"])?;
    for ((q, pp, h, bc, ev), prob) in points.iter().zip(rows) {
        let prob = prob?;
        w.write_record([p.str("domain"), &pp.to_string(), &q.to_string(), &h.to_string(), bc, ev, &prob.to_string(), &id])?;
    }
    w.flush()?;
    drop(w);
    run.finish(sink, out, err)
}

#[derive(Serialize)]
struct SampleLine<'a> {
    sweep: u64,
    observable: &'a str,
    value: f64,
    seed: u64,
    algo: Algorithm,
    run_id: &'a str,
}

fn sample(mut run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let d = run.domain("domain")?;
    let q: f64 = p.get("q")?;
    let params = ModelParams::new(p.p("p", q)?, q, p.get("h")?)?;
    let bc = boundary(&d, p.str("bc"))?;
    let algo: Algorithm = p.get("algo")?;
    let (sweeps, burn, every): (u64, u64, u64) = (p.get("sweeps")?, p.get("burn-in")?, p.get("every")?);
    if every == 0 {
        return Err(Usage("--every must be positive".into()).into());
    }
    let obs: Vec<String> = p.str("obs").split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if let Some(o) = obs.iter().find(|o| !["open-fraction", "clusters", "crossing"].contains(&o.as_str())) {
        return Err(Usage(format!("unknown observable {o:?}; expected open-fraction, clusters or crossing")).into());
    }
    let mut seeds: Vec<u64> = p.list("seed")?;
    seeds.sort();
    seeds.dedup();
    let series = par_map(run.jobs()?, &seeds, |&seed| -> Result<Vec<(u64, Vec<f64>)>> {
        let mut chain = ChainState::new(&d, &bc, params.has_ghost(), seed)?;
        for _ in 0..burn {
            chain.step(algo, &params)?;
        }
        let mut rows = Vec::new();
        for k in 1..=sweeps {
            chain.step(algo, &params)?;
            if k % every != 0 {
                continue;
            }
            let c = chain.config();
            let vals = obs
                .iter()
                .map(|o| match o.as_str() {
                    "open-fraction" => c.n_open() as f64 / d.n_edges().max(1) as f64,
                    "clusters" => cluster_count(&d, c, &bc) as f64,
                    _ => f64::from(u8::from(bounding_box_crossing(&d, c))),
                })
                .collect();
            rows.push((chain.sweep_count(), vals));
        }
        Ok(rows)
    });
    let id = run.id();
    for (seed, rows) in seeds.iter().zip(series) {
        for (sweep, vals) in rows? {
            for (o, &value) in obs.iter().zip(&vals) {
                let line = SampleLine { sweep, observable: o, value, seed: *seed, algo, run_id: &id };
                serde_json::to_writer(&mut sink.data, &line)?;
                sink.data.push(b'\n');
            }
        }
    }
    run.finish(sink, out, err)
}

fn measure(run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let seed: u64 = p.get("seed")?;
    let rs = spec(p, seed)?;
    let r_opt: Option<u32> = p.opt("r")?;
    let box_opt: Option<u32> = p.opt("box")?;
    let obs = sorted_strings(p.str("obs"));
    if let Some(o) = obs.iter().find(|o| !["pi1", "pi4", "delta", "delta-cross", "crossing"].contains(&o.as_str())) {
        return Err(Usage(format!("unknown observable {o:?}")).into());
    }
    let mut radii: Vec<u32> = p.list("R")?;
    radii.sort();
    radii.dedup();
    let mut points = Vec::new();
    for o in &obs {
        for q in sorted(p.list("q")?) {
            for pp in sorted(p.p_list("p", q)?) {
                for h in sorted(p.list("h")?) {
                    for &big_r in &radii {
                        let r = r_opt.unwrap_or(if o == "pi1" { 0 } else { 1 });
                        let bx = if o.starts_with("delta") { big_r } else { box_opt.unwrap_or(big_r) };
                        points.push((o.clone(), q, pp, h, r, big_r, bx));
                    }
                }
            }
        }
    }
    let rows = par_map(run.jobs()?, &points, |(o, q, pp, h, r, big_r, bx)| -> Result<(f64, f64, usize)> {
        let params = ModelParams::new(*pp, *q, *h)?;
        let e = match o.as_str() {
            "pi1" => arm_probability(&params, &ArmSpec::one_arm(*r, *big_r)?, *bx, &rs)?,
            "pi4" => arm_probability(&params, &ArmSpec::four_arm(*r, *big_r)?, *bx, &rs)?,
            "delta" => delta_hat(&params, *r, *big_r, &rs)?.0,
            "delta-cross" => delta_hat(&params, *r, *big_r, &rs)?.1,
            _ => {
                if bx < big_r {
                    return Err(Usage("box smaller than R".into()).into());
                }
                let d = rclab::lattice::build_box(*bx);
                let bc = BoundaryCondition::free(&d);
                estimate(|c| f64::from(u8::from(box_crossing(&d, c.config(), *big_r))), &params, &d, &bc, &rs)?
            }
        };
        Ok((e.mean, e.stderr, e.n_samples))
    });
    let id = run.id();
    let mut w = csv::Writer::from_writer(&mut sink.data);
    w.write_record(["quantity", "q", "p", "h", "r", "R", "box", "mean", "stderr", "n", "seed", "algo", "run_id"])?;
    for ((o, q, pp, h, r, big_r, bx), row) in points.iter().zip(rows) {
        let (mean, se, n) = row?;
        w.write_record([
            o.clone(),
            q.to_string(),
            pp.to_string(),
            h.to_string(),
            r.to_string(),
            big_r.to_string(),
            bx.to_string(),
            mean.to_string(),
            se.to_string(),
            n.to_string(),
            seed.to_string(),
            rs.algo.to_string(),
            id.clone(),
        ])?;
    }
    w.flush()?;
    drop(w);
    run.finish(sink, out, err)
}

#[derive(Serialize)]
struct Flower {
    petals: Vec<PetalKind>,
    endpoints: Vec<Vertex>,
    /// Some pair of primal petals is not yet wired by the minimal coherent condition,
    /// so wiring it gives a boosting pair below the fully wired condition.
    boosting: bool,
}

#[derive(Serialize)]
struct CoupleLine<'a> {
    run: usize,
    seed: u64,
    algo: &'a str,
    q: f64,
    p_low: f64,
    p_high: f64,
    n_edges: usize,
    revealed: Vec<usize>,
    stop_time: Option<usize>,
    stall_time: Option<usize>,
    monotonicity_violations: usize,
    lower_open: usize,
    upper_open: usize,
    flower: Option<Flower>,
    run_id: &'a str,
}

fn tree_for(name: &str, d: &Domain) -> Result<Box<dyn DecisionTree>> {
    Ok(match name {
        "boundary" => Box::new(boundary_cluster_tree(d)),
        "dual" => Box::new(dual_cluster_tree(d)),
        "deterministic" => Box::new(deterministic_tree(d, (0..d.n_edges()).collect())?),
        _ => return Err(Usage(format!("unknown tree {name:?}; expected boundary, dual or deterministic")).into()),
    })
}

fn couple(mut run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let d = run.domain("domain")?;
    let q: f64 = p.get("q")?;
    let base = p.p("p", q)?;
    let side = |k: &str| -> Result<f64> { Ok(if p.str(k) == "auto" { base } else { p.p(k, q)? }) };
    let (p_low, p_high) = (side("p-low")?, side("p-high")?);
    let (bc_low, bc_high) = (boundary(&d, p.str("bc-low"))?, boundary(&d, p.str("bc-high"))?);
    let stop_on = match p.str("stop") {
        "coincide" => true,
        "none" => false,
        s => return Err(Usage(format!("unknown stop rule {s:?}; expected coincide or none")).into()),
    };
    let tree_name = tree_for(p.str("tree"), &d)?.name();
    let half_width = p.str("domain").strip_prefix("box:").and_then(|n| n.parse::<u32>().ok());
    let r: u32 = p.get("r")?;
    let big_r: Option<u32> = p.opt("R")?;
    let flower_radii = match (half_width, big_r) {
        (Some(n), None) if r < n => Some((r, n)),
        (_, Some(rr)) => Some((r, rr)),
        _ => None,
    };
    let seed: u64 = p.get("seed")?;
    let runs: Vec<usize> = (0..p.get::<usize>("runs")?).collect();
    let lines = par_map(run.jobs()?, &runs, |&i| -> Result<_> {
        let mut tree = tree_for(p.str("tree"), &d)?;
        let coincide = conditions_coincide(&d, &bc_low, &bc_high);
        let stop: Option<&dyn Fn(&History) -> bool> = if stop_on { Some(&coincide) } else { None };
        let s = seed.wrapping_add(i as u64);
        let o = run_coupling(tree.as_mut(), &d, &bc_low, &bc_high, p_low, p_high, q, s, stop)?;
        let flower = match flower_radii {
            Some((r, rr)) => explore_inner_flower(&d, &o.upper, r, rr)?.map(|f| {
                let boosting = is_boosting_pair(&f, &f.minimal_coherent(), &BoundaryCondition::wired(&f.region));
                Flower { petals: f.petals.iter().map(|x| x.kind).collect(), endpoints: f.endpoints.clone(), boosting }
            }),
            None => None,
        };
        Ok((s, o, flower))
    });
    let id = run.id();
    for (i, line) in lines.into_iter().enumerate() {
        let (s, o, flower) = line?;
        let l = CoupleLine {
            run: i,
            seed: s,
            algo: tree_name,
            q,
            p_low,
            p_high,
            n_edges: d.n_edges(),
            revealed: o.state.revealed.clone(),
            stop_time: o.stop_time,
            stall_time: o.stall_time,
            monotonicity_violations: o.monotonicity_violations,
            lower_open: o.lower.n_open(),
            upper_open: o.upper.n_open(),
            flower,
            run_id: &id,
        };
        serde_json::to_writer(&mut sink.data, &l)?;
        sink.data.push(b'\n');
    }
    run.finish(sink, out, err)
}

#[derive(Serialize)]
struct LengthOut<'a> {
    #[serde(flatten)]
    result: LengthScanResult,
    seed: u64,
    algo: Algorithm,
    sweeps: u64,
    run_id: &'a str,
}

fn length(run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let q: f64 = p.get("q")?;
    let seed: u64 = p.get("seed")?;
    let rs = spec(p, seed)?;
    let result = characteristic_length(q, p.p("p", q)?, p.get("delta")?, p.get("cap")?, &rs)?;
    let id = run.id();
    serde_json::to_writer(&mut sink.data, &LengthOut { result, seed, algo: rs.algo, sweeps: rs.sweeps, run_id: &id })?;
    sink.data.push(b'\n');
    run.finish(sink, out, err)
}

#[derive(Serialize)]
struct ParafermionOut<'a> {
    #[serde(flatten)]
    value: ObservableValue,
    max_vertex_residual: f64,
    run_id: &'a str,
}

fn parafermion(mut run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let d = run.domain("domain")?;
    let root = match p.str("root") {
        "auto" => d
            .outer_cycle()
            .into_iter()
            .find(|&i| root_edge(&d, i).is_ok())
            .map(|i| d.vertex(i))
            .ok_or_else(|| Usage("domain has no admissible root".into()))?,
        s => {
            let (x, y) = s.split_once(',').ok_or_else(|| Usage(format!("--root {s:?}: expected x,y")))?;
            Vertex::new(x.trim().parse()?, y.trim().parse()?)
        }
    };
    let pp = if p.str("p") == "pc" { p_c(4.0) } else { p.get("p")? };
    let value = observable_exact(&d, root, pp)?;
    let id = run.id();
    let max_vertex_residual = value.max_vertex_residual();
    serde_json::to_writer(&mut sink.data, &ParafermionOut { value, max_vertex_residual, run_id: &id })?;
    sink.data.push(b'\n');
    run.finish(sink, out, err)
}

/// Measure rows sharing everything but the outer radius.
#[derive(Clone, Debug, PartialEq)]
struct Group {
    quantity: String,
    q: f64,
    p: f64,
    h: f64,
    r: f64,
    points: Vec<FitPoint>,
}

fn exponents(mut run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = run.params;
    let path = p.str("input").to_string();
    let text = std::fs::read_to_string(&path).map_err(|e| Usage(format!("input {path:?}: {e}")))?;
    let exclude: Vec<f64> = if p.str("exclude") == "none" { Vec::new() } else { p.list("exclude")? };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Usage(format!("input lacks column {name:?}")));
    let (cq, cqq, cp, ch, cbig, cm, cs) = (need("quantity")?, need("q")?, need("p")?, need("h")?, need("R")?, need("mean")?, need("stderr")?);
    let cr = col("r");
    let mut groups: Vec<Group> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> { rec[i].parse::<f64>().map_err(|e| Usage(format!("input value {:?}: {e}", &rec[i])).into()) };
        let (quantity, q, pp, h) = (rec[cq].to_string(), num(cqq)?, num(cp)?, num(ch)?);
        let r = match cr {
            Some(i) => num(i)?,
            None => 0.0,
        };
        let pt = FitPoint { scale: num(cbig)?, estimate: num(cm)?, stderr: num(cs)? };
        match groups.iter_mut().find(|g| g.quantity == quantity && g.q == q && g.p == pp && g.h == h && g.r == r) {
            Some(g) => g.points.push(pt),
            None => groups.push(Group { quantity, q, p: pp, h, r, points: vec![pt] }),
        }
    }
    groups.sort_by(|a, b| {
        a.quantity.cmp(&b.quantity).then(a.q.total_cmp(&b.q)).then(a.p.total_cmp(&b.p)).then(a.h.total_cmp(&b.h)).then(a.r.total_cmp(&b.r))
    });
    run.files.push((path, text.clone()));
    let id = run.id();
    let mut w = csv::Writer::from_writer(&mut sink.data);
    w.write_record(["exponent", "q", "predicted", "measured", "stderr", "n_scales", "quantity", "p", "h", "r", "run_id"])?;
    for g in &groups {
        let Some((name, pred)) = exponent_for_observable(&g.quantity, &predicted(g.q)?) else {
            writeln!(err, "skipping {} at q = {}: no predicted exponent", g.quantity, g.q)?;
            continue;
        };
        let fit = fit_exponent_with(&g.points, &exclude)?;
        w.write_record([
            name.to_string(),
            g.q.to_string(),
            pred.to_string(),
            fit.slope.to_string(),
            fit.slope_stderr.to_string(),
            fit.n_points.to_string(),
            g.quantity.clone(),
            g.p.to_string(),
            g.h.to_string(),
            g.r.to_string(),
            id.clone(),
        ])?;
    }
    w.flush()?;
    drop(w);
    run.finish(sink, out, err)
}

fn verify(run: Run, mut sink: Sink, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let tier: Tier = run.params.get("tier")?;
    let budget = Budget::default();
    writeln!(out, "acceptance: tier {tier:?}, seed {}", budget.seed)?;
    let reports = run_tier(tier, &budget, |r| {
        let _ = writeln!(out, "{}", r.render());
        let _ = out.flush();
    });
    writeln!(out)?;
    for r in &reports {
        writeln!(out, "{}", r.line())?;
    }
    let ok = reports.iter().all(|r| r.passed());
    if sink.path.is_some() {
        for r in &reports {
            serde_json::to_writer(&mut sink.data, r)?;
            sink.data.push(b'\n');
        }
        sink.finish(run.record(), out, err)?;
    }
    Ok(if ok { 0 } else { 1 })
}
