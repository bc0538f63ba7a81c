// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde_json::{json, Value};
use wolff_trace::bench::{run_bench, BENCH_CSV_HEADER};
use wolff_trace::certifier::{certificate, TraceProblem};
use wolff_trace::continuum::compare_continuum;
use wolff_trace::instance::{generate, InstanceSpec, KernelClass};
use wolff_trace::{
    best_constant, equivalence_report, AscentConfig, CarlesonStatus, DyadicModel, Error, Instance, Result,
};

use crate::report::{cell, coords, index_cell, num, opt_num, Outcome, Status, Table};
use crate::{Command, Common, GenArgs, KernelKind};

/// Slack for the unit Carleson bound of `mu_1`.
const MU1_SLACK: f64 = 1e-12;
/// Relative tolerance when recomputing a constant from its witness.
const SELF_CHECK: f64 = 1e-10;

pub fn spec_from(args: &GenArgs, common: &Common, seed: u64) -> InstanceSpec {
    let (level_min, level_max) = common.window_levels.unwrap_or((-4, 0));
    let kernel = match args.kernel {
        KernelKind::Power => KernelClass::Power { gamma_min: args.gamma.0, gamma_max: args.gamma.1, jitter: args.jitter },
        KernelKind::Riesz => KernelClass::Riesz { alpha_min: args.alpha.0, alpha_max: args.alpha.1 },
        KernelKind::SingleCube => KernelClass::SingleCube { value: args.cube_value },
    };
    InstanceSpec {
        seed,
        n: args.n,
        level_min,
        level_max,
        roots_per_axis: args.roots_per_axis,
        sigma_atoms: args.sigma_atoms,
        mu_atoms: args.mu_atoms,
        mass_min: args.mass.0,
        mass_max: args.mass.1,
        kernel,
        p: args.p,
        q: args.q,
        max_dlbo: args.max_dlbo,
        max_attempts: args.max_attempts,
    }
}

pub fn gen(args: &GenArgs, common: &Common) -> Result<Instance> {
    generate(&spec_from(args, common, common.seed))
}

fn load(common: &Common) -> Result<Instance> {
    let path = common
        .instance
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("this command needs --instance PATH".into()))?;
    let inst = Instance::load(path)?;
    match common.window_levels {
        Some((a, b)) => inst.with_levels(a, b),
        None => Ok(inst),
    }
}

fn ascent(common: &Common) -> AscentConfig {
    AscentConfig { restarts: common.restarts.max(1), tolerance: common.tol, seed: common.seed, ..AscentConfig::default() }
}

/// Runs an instance-based command; returns the hash of the loaded instance.
pub fn dispatch(command: &Command, common: &Common) -> Result<(Option<String>, Outcome)> {
    match command {
        Command::Family { gen, count, window } => return Ok((None, family(gen, common, *count, *window)?)),
        Command::Bench { depths, atoms, n } => return Ok((None, bench(depths, atoms, *n, common.seed)?)),
        _ => {}
    }
    let inst = load(common)?;
    let hash = inst.hash();
    let outcome = match command {
        Command::Dlbo => dlbo(&inst)?,
        Command::Wolff => wolff(&inst)?,
        Command::Energy => energy(&inst)?,
        Command::Carleson => carleson(&inst)?,
        Command::Mu1 => mu1(&inst)?,
        Command::Certify => certify(&inst, common)?,
        Command::VerifyWolff => verify_wolff(&inst)?,
        Command::CompareContinuum => continuum(&inst, common)?,
        Command::Gen(_) | Command::Calibrate | Command::Family { .. } | Command::Bench { .. } => unreachable!(),
    };
    Ok((Some(hash), outcome))
}

fn dlbo(inst: &Instance) -> Result<Outcome> {
    let m = inst.model()?;
    let w = m.window();
    let mut table = Table::new(&["level", "index", "sigma", "kbar_inf", "kbar_sup"]);
    let mut cubes = Vec::new();
    for id in 0..w.cube_count() {
        let s = m.sigma_tree().mass(id);
        if s == 0.0 {
            continue;
        }
        let c = w.cube(id);
        let (lo, hi) = (m.kbar_inf_values()[id], m.kbar_sup_values()[id]);
        table.push(vec![c.level.to_string(), index_cell(&c.index), cell(s), cell(lo), cell(hi)]);
        cubes.push(json!({"level": c.level, "index": c.index, "sigma": num(s), "kbar_inf": num(lo), "kbar_sup": num(hi)}));
    }
    Ok(Outcome::new(json!({"a": num(m.dlbo_constant()), "cubes": cubes})).with_csv(table))
}

fn wolff(inst: &Instance) -> Result<Outcome> {
    let m = inst.model()?;
    let e = inst.exponents();
    let mut table = Table::new(&["atom", "x", "w", "wolff_general", "wolff_dlbo"]);
    let mut points = Vec::new();
    for (j, a) in inst.mu().atoms().iter().enumerate() {
        let g = m.wolff_general(inst.mu(), e, &a.x)?;
        let d = m.wolff_dlbo(inst.mu(), e, &a.x)?;
        table.push(vec![j.to_string(), coords(&a.x), cell(a.w), cell(g), cell(d)]);
        points.push(json!({"atom": j, "x": a.x, "w": a.w, "wolff_general": num(g), "wolff_dlbo": num(d)}));
    }
    let out = json!({
        "a": num(m.dlbo_constant()),
        "p": e.p(),
        "points": points,
        "wolff_energy": num(m.wolff_energy(inst.mu(), e)?),
    });
    Ok(Outcome::new(out).with_csv(table))
}

fn energy(inst: &Instance) -> Result<Outcome> {
    let m = inst.model()?;
    let e = inst.exponents();
    let field = m.operator_field(inst.mu(), None)?;
    let mut table = Table::new(&["atom", "x", "w", "potential"]);
    let mut potentials = Vec::new();
    for (j, a) in inst.sigma().atoms().iter().enumerate() {
        let t = field.eval(m.window(), &a.x)?;
        table.push(vec![j.to_string(), coords(&a.x), cell(a.w), cell(t)]);
        potentials.push(num(t));
    }
    let out = json!({"p": e.p(), "energy": num(m.energy(inst.mu(), e)?), "potentials": potentials});
    Ok(Outcome::new(out).with_csv(table))
}

fn carleson(inst: &Instance) -> Result<Outcome> {
    let m = inst.model()?;
    let r = m.carleson_constant(inst.mu(), inst.exponents())?;
    let mut table = Table::new(&["bound", "argmax_level", "argmax_index", "status"]);
    let status_name = serde_json::to_value(r.status)?;
    let status_str = status_name.as_str().unwrap_or_default().to_string();
    let (lvl, ix) = match &r.argmax {
        Some(c) => (c.level.to_string(), index_cell(&c.index)),
        None => (String::new(), String::new()),
    };
    table.push(vec![cell(r.bound), lvl, ix, status_str]);
    let argmax = r.argmax.as_ref().map(|c| json!({"level": c.level, "index": c.index}));
    let out = json!({"bound": num(r.bound), "argmax": argmax, "carleson_status": status_name});
    let status = if r.status == CarlesonStatus::Infeasible {
        Status::Degenerate("Carleson condition infeasible: a cube without mu mass has a positive sum".into())
    } else {
        Status::Pass
    };
    Ok(Outcome::new(out).with_csv(table).with_status(status))
}

fn mu1(inst: &Instance) -> Result<Outcome> {
    let m = inst.model()?;
    let e = inst.exponents();
    let mu1 = m.make_mu1(inst.mu(), e)?;
    let bound = m.carleson_constant(&mu1.measure, e)?.bound;
    let mut table = Table::new(&["atom", "x", "w_mu", "wolff", "w_mu1", "dropped"]);
    let mut masses = vec![None; inst.mu().len()];
    for (k, &j) in mu1.kept.iter().enumerate() {
        masses[j] = Some(mu1.measure.atoms()[k].w);
    }
    for (j, a) in inst.mu().atoms().iter().enumerate() {
        table.push(vec![
            j.to_string(),
            coords(&a.x),
            cell(a.w),
            cell(mu1.wolff[j]),
            masses[j].map(cell).unwrap_or_default(),
            mu1.dropped.contains(&j).to_string(),
        ]);
    }
    let out = json!({
        "kept": mu1.kept,
        "dropped": mu1.dropped,
        "wolff": mu1.wolff.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "mu1": mu1.kept.iter().zip(mu1.measure.atoms()).map(|(j, a)| json!([j, a.w])).collect::<Vec<_>>(),
        "carleson_bound": num(bound),
        "slack": MU1_SLACK,
    });
    let status = if mu1.is_degenerate() {
        Status::Degenerate(format!("W[mu] vanishes at mu atoms {:?}; they were dropped", mu1.dropped))
    } else if !(bound <= 1.0 + MU1_SLACK) {
        Status::Violation(format!("Carleson constant of mu_1 is {bound}, above 1"))
    } else {
        Status::Pass
    };
    Ok(Outcome::new(out).with_csv(table).with_status(status))
}

fn certify(inst: &Instance, common: &Common) -> Result<Outcome> {
    let m = inst.model()?;
    let e = inst.exponents();
    let cert = certificate(&m, inst.mu(), e)?;
    let problem = TraceProblem::new(&m, inst.mu(), e)?;
    let est = problem.best_constant(&ascent(common))?;
    let ratio = if est.trace_constant == 0.0 && cert.value == 0.0 { None } else { Some(est.trace_constant / cert.value) };
    let recomputed = problem.ratio(&est.witness_f);
    let consistent = est.value == recomputed || (est.value - recomputed).abs() <= SELF_CHECK * est.value.abs();
    let out = json!({
        "p": e.p(),
        "q": e.q(),
        "s": num(e.s()),
        "A": num(m.dlbo_constant()),
        "certificate": num(cert.value),
        "wolff_norm": num(cert.wolff_norm),
        "best_constant": num(est.value),
        "trace_constant": num(est.trace_constant),
        "ratio": opt_num(ratio),
        "witness_f": est.witness_f,
        "method": est.method,
        "iterations": est.iterations,
        "restarts": common.restarts.max(1),
        "tolerance": est.tolerance,
        "seed": est.seed,
    });
    let mut table = Table::new(&["p", "q", "s", "a", "certificate", "best_constant", "trace_constant", "ratio"]);
    table.push(vec![
        cell(e.p()),
        cell(e.q()),
        cell(e.s()),
        cell(m.dlbo_constant()),
        cell(cert.value),
        cell(est.value),
        cell(est.trace_constant),
        ratio.map(cell).unwrap_or_default(),
    ]);
    let status = if !consistent {
        Status::Violation(format!("witness recomputes to {recomputed}, estimate says {}", est.value))
    } else if !cert.finite {
        Status::Degenerate("certificate is infinite".into())
    } else {
        Status::Pass
    };
    Ok(Outcome::new(out).with_csv(table).with_status(status))
}

struct Member {
    seed: u64,
    hash: String,
    a: f64,
    best: f64,
    trace_constant: f64,
    certificate: f64,
}

fn family(args: &GenArgs, common: &Common, count: usize, window: Option<f64>) -> Result<Outcome> {
    let cfg = ascent(common);
    let members: Vec<Member> = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = common.seed.wrapping_add(i as u64);
            let inst = generate(&spec_from(args, common, seed))?;
            let m: DyadicModel = inst.model()?;
            let e = inst.exponents();
            let est = best_constant(&m, inst.mu(), e, &cfg)?;
            let cert = certificate(&m, inst.mu(), e)?;
            Ok(Member {
                seed,
                hash: inst.hash(),
                a: m.dlbo_constant(),
                best: est.value,
                trace_constant: est.trace_constant,
                certificate: cert.value,
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = members.iter().map(|m| (m.trace_constant, m.certificate)).collect();
    let report = equivalence_report(&pairs, window);

    let mut table = Table::new(&[
        "index",
        "seed",
        "instance_hash",
        "a",
        "best_constant",
        "trace_constant",
        "certificate",
        "ratio",
    ]);
    let mut rows = Vec::new();
    for (i, (mem, row)) in members.iter().zip(&report.rows).enumerate() {
        table.push(vec![
            i.to_string(),
            mem.seed.to_string(),
            mem.hash.clone(),
            cell(mem.a),
            cell(mem.best),
            cell(mem.trace_constant),
            cell(mem.certificate),
            row.ratio.map(cell).unwrap_or_default(),
        ]);
        rows.push(json!({
            "index": i,
            "seed": mem.seed,
            "instance_hash": mem.hash,
            "a": num(mem.a),
            "best_constant": num(mem.best),
            "trace_constant": num(mem.trace_constant),
            "certificate": num(mem.certificate),
            "ratio": opt_num(row.ratio),
        }));
    }
    // summary row: min, max, median ratio and their spread
    table.push(vec![
        "summary".into(),
        count.to_string(),
        String::new(),
        cell(report.min_ratio),
        cell(report.max_ratio),
        cell(report.median_ratio),
        cell(report.spread),
        report.pass.to_string(),
    ]);
    let out = json!({
        "count": count,
        "rows": rows,
        "summary": {
            "min_ratio": num(report.min_ratio),
            "max_ratio": num(report.max_ratio),
            "median_ratio": num(report.median_ratio),
            "spread": num(report.spread),
            "declared_window": report.declared_window,
            "pass": report.pass,
        },
    });
    let status = if report.pass {
        Status::Pass
    } else {
        Status::Violation(format!("ratio spread {} outside the declared window", report.spread))
    };
    Ok(Outcome::new(out).with_csv(table).with_status(status))
}

fn verify_wolff(inst: &Instance) -> Result<Outcome> {
    let m = inst.model()?;
    let e = inst.exponents();
    let energy = m.energy(inst.mu(), e)?;
    let wolff_energy = m.wolff_energy(inst.mu(), e)?;
    let vacuous = energy == 0.0 && wolff_energy == 0.0;
    let ratio = (!vacuous).then(|| energy / wolff_energy);
    let out = json!({
        "a": num(m.dlbo_constant()),
        "p": e.p(),
        "energy": num(energy),
        "wolff_energy": num(wolff_energy),
        "ratio": opt_num(ratio),
        "ratio_status": if vacuous { "vacuous" } else { "finite" },
    });
    let mut table = Table::new(&["a", "p", "energy", "wolff_energy", "ratio"]);
    table.push(vec![cell(m.dlbo_constant()), cell(e.p()), cell(energy), cell(wolff_energy), ratio.map(cell).unwrap_or_default()]);
    let status = match ratio {
        Some(r) if !(r.is_finite() && r > 0.0) => {
            Status::Violation(format!("energy / Wolff energy = {r} is not finite and positive"))
        }
        _ => Status::Pass,
    };
    Ok(Outcome::new(out).with_csv(table).with_status(status))
}

fn continuum(inst: &Instance, common: &Common) -> Result<Outcome> {
    let k = inst
        .radial()
        .ok_or_else(|| Error::InvalidArgument("compare-continuum needs an instance with a radial kernel".into()))?;
    let w = inst.window();
    let c = compare_continuum(
        k,
        inst.sigma(),
        inst.mu(),
        inst.exponents(),
        common.shifts,
        common.seed,
        w.level_min(),
        w.level_max(),
    )?;
    let out = json!({
        "energy_continuous": num(c.energy_continuous),
        "shifted_energy_sup": num(c.shifted_energy_sup),
        "ratio": num(c.ratio),
        "shifts_used": c.shifts_used,
        "seed": c.seed,
        "argmax_shift": c.argmax_shift,
        "sampled_doubling": num(c.sampled_doubling),
        "levels": [w.level_min(), w.level_max()],
    });
    let mut table = Table::new(&["energy_continuous", "shifted_energy_sup", "ratio", "shifts_used", "seed", "sampled_doubling"]);
    table.push(vec![
        cell(c.energy_continuous),
        cell(c.shifted_energy_sup),
        cell(c.ratio),
        c.shifts_used.to_string(),
        c.seed.to_string(),
        cell(c.sampled_doubling),
    ]);
    Ok(Outcome::new(out).with_csv(table))
}

/// Largest acceptable naive-versus-tree relative discrepancy.
const BENCH_DISCREPANCY: f64 = 1e-12;

fn bench(depths: &[usize], atoms: &[usize], n: usize, seed: u64) -> Result<Outcome> {
    let sizes: Vec<(usize, usize)> = depths.iter().flat_map(|&d| atoms.iter().map(move |&a| (d, a))).collect();
    let rows = run_bench(n, &sizes, seed)?;
    let header: Vec<&'static str> = BENCH_CSV_HEADER.split(',').collect();
    let mut table = Table::new(&header);
    for r in &rows {
        table.push(r.csv().split(',').map(String::from).collect());
    }
    let worst = rows.iter().map(|r| r.max_rel_discrepancy).fold(0.0, f64::max);
    let status = if worst <= BENCH_DISCREPANCY {
        Status::Pass
    } else {
        Status::Violation(format!("naive and tree paths differ by {worst:e}"))
    };
    let rows: Vec<Value> = rows.iter().map(|r| serde_json::to_value(r).expect("bench rows serialize")).collect();
    Ok(Outcome::new(json!({"n": n, "seed": seed, "rows": rows, "max_rel_discrepancy": worst})).with_csv(table).with_status(status))
}
