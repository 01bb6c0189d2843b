//! The `model`, `reduce`, `compare`, `simulate`, `freq` and `validate` verbs.

use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

use phred_core::analysis::{error_system, frequency_response, make_signal, simulate, simulate_ph, ResponseTable, Trajectory};
use phred_core::Error;

use crate::config::{Method, ModelSource, Settings};
use crate::engine::{self, Reduced};
use crate::model::Model;
use crate::mtx::fmt_f64;
use crate::{write_atomic, CliError};

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("json serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        fmt_f64(x)
    }
}

/// Writes the generated benchmark model as Matrix Market files plus a manifest.
pub fn cmd_model(s: &Settings) -> Result<Value, CliError> {
    let ModelSource::Generated(spec) = &s.model else {
        return Err(CliError::Config("model needs a generator spec (--family and --n)".into()));
    };
    let ph = spec.build()?;
    let source = serde_json::to_value(spec).expect("spec serializes");
    let path = Model::Ph(ph).save(&s.out, Some(source))?;
    Ok(json!({ "manifest": path }))
}

fn single_method(s: &Settings) -> Result<(Method, usize), CliError> {
    let method = match s.methods[..] {
        [m] => m,
        [] => Method::IrkaPh,
        _ => return Err(CliError::Config("reduce takes exactly one method".into())),
    };
    let r = match s.orders[..] {
        [r] => r,
        [] => return Err(CliError::Config("reduce needs --order".into())),
        _ => return Err(CliError::Config("reduce takes a single order".into())),
    };
    Ok((method, r))
}

/// Reduces once, writing the reduced matrices, a manifest and `report.json`.
pub fn cmd_reduce(s: &Settings) -> Result<Value, CliError> {
    let (method, r) = single_method(s)?;
    let full = s.load_model()?;
    let red = match engine::reduce(&full, method, r, s) {
        Ok(red) => red,
        Err(CliError::Numerical(Error::MaxIterationsExceeded(f))) => {
            let rep = json!({
                "method": method.name(),
                "n": full.n(),
                "r": r,
                "converged": false,
                "failure": engine::failure_json(&f),
            });
            write_json(&s.out.join("report.json"), &rep)?;
            return Err(CliError::Numerical(Error::MaxIterationsExceeded(f)));
        }
        Err(e) => return Err(e),
    };
    let errs = engine::errors(&full.state_space(), &red.model.state_space(), &s.grid, s.dense_ceiling);
    let rep = engine::report_json(&full, &red, &errs);
    let manifest = red.model.save(&s.out, Some(json!({ "method": method.name(), "r": r })))?;
    write_json(&s.out.join("report.json"), &rep)?;
    Ok(json!({
        "manifest": manifest,
        "report": s.out.join("report.json"),
        "converged": red.trace.as_ref().map(|t| t.converged),
        "iterations": red.iterations(),
        "rel_h2": errs.rel_h2,
    }))
}

pub struct Cell {
    pub r: usize,
    pub method: Method,
    pub rel_h2: f64,
    pub rel_hinf: f64,
    pub iterations: Option<usize>,
    pub reason: String,
}

fn run_cell(full: &Model, method: Method, r: usize, s: &Settings) -> Cell {
    match engine::reduce(full, method, r, s) {
        Ok(red) => {
            let errs = engine::errors(&full.state_space(), &red.model.state_space(), &s.grid, s.dense_ceiling);
            Cell { r, method, rel_h2: errs.rel_h2, rel_hinf: errs.rel_hinf, iterations: red.iterations(), reason: errs.notes.join("; ") }
        }
        Err(e) => {
            let iterations = match &e {
                CliError::Numerical(Error::MaxIterationsExceeded(f)) => Some(f.trace.iterations()),
                _ => None,
            };
            Cell { r, method, rel_h2: f64::NAN, rel_hinf: f64::NAN, iterations, reason: e.to_string() }
        }
    }
}

/// Every method at every order; failed cells become NaN rows with a reason.
pub fn compare_cells(full: &Model, s: &Settings) -> Result<Vec<Cell>, CliError> {
    if s.methods.is_empty() {
        return Err(CliError::Config("compare needs at least one method".into()));
    }
    if s.orders.is_empty() {
        return Err(CliError::Config("compare needs --orders".into()));
    }
    for &r in &s.orders {
        engine::check_order(full.n(), r)?;
    }
    let jobs: Vec<(usize, Method)> = s.orders.iter().flat_map(|&r| s.methods.iter().map(move |&m| (r, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", s.jobs)))?;
    Ok(pool.install(|| jobs.par_iter().map(|&(r, m)| run_cell(full, m, r, s)).collect()))
}

pub fn cmd_compare(s: &Settings) -> Result<Value, CliError> {
    let full = s.load_model()?;
    let cells = compare_cells(&full, s)?;
    let header: Vec<String> = ["r", "method", "rel_h2", "rel_hinf_sampled", "iterations", "reason"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.r.to_string(),
                c.method.name().to_string(),
                num(c.rel_h2),
                num(c.rel_hinf),
                c.iterations.map(|k| k.to_string()).unwrap_or_default(),
                c.reason.clone(),
            ]
        })
        .collect();
    let path = s.out.join("compare.csv");
    write_atomic(&path, &csv_bytes(&header, &rows))?;
    let ok = cells.iter().filter(|c| c.rel_h2.is_finite() || c.rel_hinf.is_finite()).count();
    if ok == 0 {
        return Err(CliError::Numerical(Error::BadParams(format!(
            "every comparison cell failed (first: {})",
            cells[0].reason
        ))));
    }
    Ok(json!({ "table": path, "cells": cells.len(), "succeeded": ok }))
}

/// Reduced models named on the command line and loaded from manifests.
fn reduced_models(full: &Model, s: &Settings) -> Result<Vec<(String, Model)>, CliError> {
    let mut out = Vec::new();
    for &r in &s.orders {
        for &m in &s.methods {
            let red: Reduced = engine::reduce(full, m, r, s)?;
            out.push((red.label(), red.model));
        }
    }
    for (k, path) in s.reduced.iter().enumerate() {
        let model = Model::load(path)?;
        let ss = model.state_space();
        let fs = full.state_space();
        if ss.m() != fs.m() || ss.p() != fs.p() {
            return Err(CliError::Config(format!("{}: port counts differ from the full model", path.display())));
        }
        out.push((format!("reduced{}", k + 1), model));
    }
    Ok(out)
}

fn run_sim(model: &Model, s: &Settings) -> Result<(Trajectory, Option<phred_core::analysis::EnergyAudit>), CliError> {
    let m = model.state_space().m();
    if s.channel.0 >= m {
        return Err(CliError::Config(format!("input channel {} exceeds the {m} inputs", s.channel.0 + 1)));
    }
    let u = make_signal(s.signal)
        .map_err(|e| CliError::Config(e.to_string()))?
        .on_channels(vec![s.channel.0]);
    let opts = s.sim_options();
    match model {
        Model::Ph(ph) => {
            let (t, audit) = simulate_ph(ph, &u, s.t_end, None, &opts)?;
            Ok((t, Some(audit)))
        }
        Model::General(ss) => Ok((simulate(ss, &u, s.t_end, None, &opts)?, None)),
    }
}

/// Full and reduced output trajectories for one input channel, plus error summary.
pub fn cmd_simulate(s: &Settings) -> Result<Value, CliError> {
    let full = s.load_model()?;
    let p = full.state_space().p();
    if s.channel.1 >= p {
        return Err(CliError::Config(format!("output channel {} exceeds the {p} outputs", s.channel.1 + 1)));
    }
    let mut models = vec![("full".to_string(), full.clone())];
    models.extend(reduced_models(&full, s)?);
    let mut runs = Vec::new();
    for (label, m) in &models {
        runs.push((label.clone(), run_sim(m, s)?));
    }
    let base = &runs[0].1 .0;
    let mut header = vec!["t".to_string()];
    for (label, _) in &runs {
        header.extend((1..=p).map(|i| format!("{label}_y{i}")));
    }
    let rows: Vec<Vec<String>> = (0..base.times.len())
        .map(|k| {
            let mut row = vec![fmt_f64(base.times[k])];
            for (_, (t, _)) in &runs {
                row.extend((0..p).map(|i| num(t.outputs[(i, k)])));
            }
            row
        })
        .collect();
    write_atomic(&s.out.join("trajectories.csv"), &csv_bytes(&header, &rows))?;
    let summary: Vec<Value> = runs
        .iter()
        .map(|(label, (t, audit))| {
            let per_output: Vec<f64> = (0..p).map(|i| base.max_abs_diff(t, i)).collect();
            json!({
                "label": label,
                "max_abs_error": per_output[s.channel.1],
                "max_abs_error_per_output": per_output,
                "supplied_energy": audit.map(|a| a.supplied),
                "delta_hamiltonian": audit.map(|a| a.delta_h),
                "passivity_margin": audit.map(|a| a.margin()),
                "passive": audit.map(|a| a.passes(s.rtol)),
                "steps": { "accepted": t.stats.accepted, "rejected": t.stats.rejected },
            })
        })
        .collect();
    let doc = json!({
        "signal": format!("{:?}", s.signal),
        "t_end": s.t_end,
        "input_channel": s.channel.0 + 1,
        "output_channel": s.channel.1 + 1,
        "models": summary,
    });
    write_json(&s.out.join("simulate.json"), &doc)?;
    Ok(doc)
}

fn response_csv(t: &ResponseTable) -> Vec<u8> {
    let mut header = vec!["omega".to_string(), "sigma".to_string()];
    for i in 0..t.outputs {
        for j in 0..t.inputs {
            header.push(format!("phase_{}_{}", i + 1, j + 1));
        }
    }
    let rows: Vec<Vec<String>> = (0..t.omegas.len())
        .map(|k| {
            let mut row = vec![fmt_f64(t.omegas[k]), num(t.sigma[k])];
            row.extend(t.phase.iter().map(|ph| num(ph[k])));
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

/// Sigma and phase tables for every model and every error system.
pub fn cmd_freq(s: &Settings) -> Result<Value, CliError> {
    let full = s.load_model()?;
    let fs = full.state_space();
    let reduced = reduced_models(&full, s)?;
    let full_resp = frequency_response(&fs, &s.grid)?;
    write_atomic(&s.out.join("freq_full.csv"), &response_csv(&full_resp))?;
    let peak = full_resp.sigma.iter().cloned().filter(|v| !v.is_nan()).fold(0.0, f64::max);
    let mut entries = Vec::new();
    for (label, m) in &reduced {
        let rs = m.state_space();
        let resp = frequency_response(&rs, &s.grid)?;
        write_atomic(&s.out.join(format!("freq_{label}.csv")), &response_csv(&resp))?;
        let err = frequency_response(&error_system(&fs, &rs)?, &s.grid)?;
        write_atomic(&s.out.join(format!("freq_error_{label}.csv")), &response_csv(&err))?;
        let err_peak = err.sigma.iter().cloned().filter(|v| !v.is_nan()).fold(0.0, f64::max);
        entries.push(json!({ "label": label, "error_peak": err_peak, "relative_error_peak": err_peak / peak }));
    }
    let doc = json!({ "points": s.grid.len(), "full_peak": peak, "models": entries });
    write_json(&s.out.join("freq.json"), &doc)?;
    Ok(doc)
}

/// Structural and stability report for the configured model.
pub fn cmd_validate(s: &Settings) -> Result<(Value, bool), CliError> {
    let model = s.load_model()?;
    let ss = model.state_space();
    let mut doc = json!({ "n": model.n(), "inputs": ss.m(), "outputs": ss.p() });
    let obj = doc.as_object_mut().expect("object");
    let ok = match &model {
        Model::Ph(ph) if ph.n() <= s.dense_ceiling => {
            let rep = ph.structure_report()?;
            obj.insert("kind".into(), json!("port_hamiltonian"));
            obj.insert(
                "structure".into(),
                json!({
                    "skewness": rep.skewness,
                    "r_min_eig": rep.r_min_eig,
                    "q_min_eig": rep.q_min_eig,
                    "spectral_abscissa": rep.spectral_abscissa,
                }),
            );
            rep.passes()
        }
        Model::Ph(_) => {
            // assembly already checked skewness, symmetry and definiteness
            obj.insert("kind".into(), json!("port_hamiltonian"));
            obj.insert("structure".into(), json!({ "checked_at_assembly": true }));
            true
        }
        Model::General(g) => {
            obj.insert("kind".into(), json!("state_space"));
            if g.n() > s.dense_ceiling {
                return Err(CliError::Numerical(Error::SizeLimitExceeded { n: g.n(), limit: s.dense_ceiling }));
            }
            let a = g.spectral_abscissa()?;
            obj.insert("spectral_abscissa".into(), json!(a));
            a < 0.0
        }
    };
    obj.insert("valid".into(), json!(ok));
    Ok((doc, ok))
}
