//! Runs one reduction method and collects everything a report needs.

use std::fs;
use std::path::Path;

use faer::{c64, Mat};
use serde::Deserialize;
use serde_json::{json, Value};

use phred_core::analysis::{relative_h2_error_with, relative_hinf_sampled, FrequencyGrid, H2Method};
use phred_core::balancing::{balanced_truncation_with, effort_constraint_reduce_with};
use phred_core::irka::{
    h2_optimality_residuals, initial_data, irka_general, irka_ph, stability_certificate, IrkaFailure, IrkaTrace,
};
use phred_core::reduction::{interpolation_residuals, ph_structure_reduce_detailed};
use phred_core::system::{InterpolationData, StateSpaceSystem};
use phred_core::Error;

use crate::config::{InitSpec, Method, Settings};
use crate::model::Model;
use crate::CliError;

#[derive(Deserialize)]
struct InitFile {
    points: Vec<[f64; 2]>,
    directions: Vec<Vec<[f64; 2]>>,
}

/// Reads `{"points": [[re, im], …], "directions": [[[re, im], …m], …]}`.
pub fn read_init_file(path: &Path) -> Result<InterpolationData, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let f: InitFile = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if f.points.len() != f.directions.len() || f.points.is_empty() {
        return Err(CliError::Config(format!("{}: need one direction per point", path.display())));
    }
    let m = f.directions[0].len();
    if f.directions.iter().any(|d| d.len() != m) {
        return Err(CliError::Config(format!("{}: directions differ in length", path.display())));
    }
    let points = f.points.iter().map(|p| c64::new(p[0], p[1])).collect();
    let dirs = Mat::from_fn(m, f.points.len(), |a, i| c64::new(f.directions[i][a][0], f.directions[i][a][1]));
    InterpolationData::new(points, dirs).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn initial(sys: &StateSpaceSystem, r: usize, spec: &InitSpec) -> Result<InterpolationData, CliError> {
    match spec {
        InitSpec::Strategy(s) => initial_data(sys, r, *s).map_err(|e| match e {
            Error::BadParams(msg) => CliError::Config(msg),
            other => CliError::Numerical(other),
        }),
        InitSpec::File(path) => {
            let data = read_init_file(path)?;
            if data.len() != r || data.directions().nrows() != sys.m() {
                return Err(CliError::Config(format!(
                    "{}: holds {} points with {} inputs, need {r} with {}",
                    path.display(),
                    data.len(),
                    data.directions().nrows(),
                    sys.m()
                )));
            }
            Ok(data)
        }
    }
}

pub struct Reduced {
    pub method: Method,
    pub r: usize,
    pub model: Model,
    pub init: Option<InterpolationData>,
    pub trace: Option<IrkaTrace>,
    pub warnings: Vec<String>,
    /// Hankel singular values of the balancing methods.
    pub hankel_values: Option<Vec<f64>>,
}

impl Reduced {
    pub fn label(&self) -> String {
        format!("{}_r{}", self.method.name(), self.r)
    }

    pub fn iterations(&self) -> Option<usize> {
        self.trace.as_ref().map(|t| t.iterations())
    }
}

pub fn check_order(n: usize, r: usize) -> Result<(), CliError> {
    if r == 0 || r >= n {
        return Err(CliError::Config(format!("reduction order must be < n (got r = {r}, n = {n})")));
    }
    Ok(())
}

fn needs_ph(method: Method) -> CliError {
    CliError::Config(format!("method {} needs a port-Hamiltonian model", method.name()))
}

pub fn reduce(full: &Model, method: Method, r: usize, s: &Settings) -> Result<Reduced, CliError> {
    check_order(full.n(), r)?;
    let ss = full.state_space();
    let init = if method.uses_init() { Some(initial(&ss, r, &s.init)?) } else { None };
    let mut warnings = Vec::new();
    let mut hankel = None;
    let (model, trace) = match method {
        Method::IrkaPh => {
            let ph = full.ph().ok_or_else(|| needs_ph(method))?;
            let (red, trace) = irka_ph(ph, init.as_ref().expect("init"), &s.irka)?;
            warnings.extend(trace.warnings.iter().map(|w| format!("{w:?}")));
            (Model::Ph(red), Some(trace))
        }
        Method::OneStep => {
            let ph = full.ph().ok_or_else(|| needs_ph(method))?;
            let red = ph_structure_reduce_detailed(ph, init.as_ref().expect("init"))?;
            warnings.extend(red.warnings.iter().map(|w| format!("{w:?}")));
            (Model::Ph(red.system), None)
        }
        Method::EffortBal => {
            let ph = full.ph().ok_or_else(|| needs_ph(method))?;
            let red = effort_constraint_reduce_with(ph, r, s.dense_ceiling)?;
            warnings.extend(red.warnings.iter().map(|w| format!("{w:?}")));
            hankel = Some(red.hankel_values);
            (Model::Ph(red.system), None)
        }
        Method::Balanced => {
            let red = balanced_truncation_with(&ss, r, s.dense_ceiling)?;
            warnings.extend(red.warnings.iter().map(|w| format!("{w:?}")));
            hankel = Some(red.hankel_values);
            (Model::General(red.system), None)
        }
        Method::IrkaGeneral => {
            let (red, trace) = irka_general(&ss, init.as_ref().expect("init"), &s.irka)?;
            warnings.extend(trace.warnings.iter().map(|w| format!("{w:?}")));
            (Model::General(red), Some(trace))
        }
    };
    Ok(Reduced { method, r, model, init, trace, warnings, hankel_values: hankel })
}

/// Relative H2 and sampled relative H∞ errors.
pub struct Errors {
    pub rel_h2: f64,
    pub h2_method: Option<H2Method>,
    pub rel_hinf: f64,
    pub notes: Vec<String>,
}

pub fn errors(full: &StateSpaceSystem, reduced: &StateSpaceSystem, grid: &FrequencyGrid, ceiling: usize) -> Errors {
    let mut notes = Vec::new();
    let (rel_h2, h2_method) = match relative_h2_error_with(full, reduced, ceiling) {
        Ok(h) => (h.value, Some(h.method)),
        Err(e) => {
            notes.push(format!("rel_h2: {e}"));
            (f64::NAN, None)
        }
    };
    let rel_hinf = relative_hinf_sampled(full, reduced, grid).unwrap_or_else(|e| {
        notes.push(format!("rel_hinf_sampled: {e}"));
        f64::NAN
    });
    Errors { rel_h2, h2_method, rel_hinf, notes }
}

pub fn complex_json(z: c64) -> Value {
    json!([z.re, z.im])
}

pub fn data_json(d: &InterpolationData) -> Value {
    let dirs: Vec<Value> = (0..d.len()).map(|i| Value::Array(d.direction(i).into_iter().map(complex_json).collect())).collect();
    json!({ "points": d.points().iter().map(|z| complex_json(*z)).collect::<Vec<_>>(), "directions": dirs })
}

pub fn trace_json(t: &IrkaTrace) -> Value {
    let its: Vec<Value> = t
        .iterations
        .iter()
        .enumerate()
        .map(|(k, it)| {
            json!({
                "iteration": k + 1,
                "shifts": it.shifts.iter().map(|z| complex_json(*z)).collect::<Vec<_>>(),
                "change": it.change,
                "h2_estimate": it.h2_proxy,
                "perturbed": it.perturbed,
            })
        })
        .collect();
    Value::Array(its)
}

pub fn failure_json(f: &IrkaFailure) -> Value {
    json!({
        "reason": format!("{:?}", f.reason),
        "iterations": f.trace.iterations(),
        "best_iteration": f.best.as_ref().map(|b| b.iteration),
        "best_h2_estimate": f.best.as_ref().map(|b| b.h2_proxy),
        "trace": trace_json(&f.trace),
    })
}

/// Everything needed to re-verify a reduced model.
pub fn report_json(full: &Model, red: &Reduced, errs: &Errors) -> Value {
    let ss = full.state_space();
    let rss = red.model.state_space();
    let mut rep = json!({
        "method": red.method.name(),
        "n": full.n(),
        "r": red.r,
        "inputs": ss.m(),
        "outputs": ss.p(),
        "norms": {
            "rel_h2": errs.rel_h2,
            "h2_method": errs.h2_method.map(|m| format!("{m:?}").to_lowercase()),
            "rel_hinf_sampled": errs.rel_hinf,
            "notes": errs.notes,
        },
        "warnings": red.warnings,
    });
    let obj = rep.as_object_mut().expect("object");
    match &red.model {
        Model::Ph(ph) => {
            let structure = ph.structure_report().map(|s| {
                json!({
                    "skewness": s.skewness,
                    "r_min_eig": s.r_min_eig,
                    "q_min_eig": s.q_min_eig,
                    "spectral_abscissa": s.spectral_abscissa,
                    "passes": s.passes(),
                })
            });
            obj.insert("structure".into(), structure.unwrap_or_else(|e| json!({ "error": e.to_string() })));
        }
        Model::General(g) => {
            let abscissa = g.spectral_abscissa().map(Value::from).unwrap_or_else(|e| json!({ "error": e.to_string() }));
            obj.insert("structure".into(), json!({ "spectral_abscissa": abscissa }));
        }
    }
    if let Some(h) = &red.hankel_values {
        obj.insert("hankel_values".into(), json!(h));
    }
    if let Some(init) = &red.init {
        obj.insert("initial_interpolation".into(), data_json(init));
    }
    let final_data = red.trace.as_ref().and_then(|t| t.final_data.clone()).or_else(|| red.init.clone());
    if let Some(d) = &final_data {
        obj.insert("interpolation".into(), data_json(d));
        if let Ok(res) = interpolation_residuals(&ss, &rss, d) {
            obj.insert("interpolation_residuals".into(), json!(res));
        }
    }
    if let Some(t) = &red.trace {
        obj.insert("converged".into(), json!(t.converged));
        obj.insert("iterations".into(), json!(t.iterations()));
        obj.insert("trace".into(), trace_json(t));
        match h2_optimality_residuals(&ss, &rss) {
            Ok(o) => obj.insert("optimality".into(), json!({ "res_b": o.res_b, "res_c": o.res_c, "res_h": o.res_h })),
            Err(e) => obj.insert("optimality".into(), json!({ "error": e.to_string() })),
        };
        if let (Some(ph), Some(basis)) = (full.ph(), t.final_basis.as_ref()) {
            if red.method == Method::IrkaPh {
                let cert = stability_certificate(ph, t, basis.as_ref()).map(|c| {
                    json!({
                        "sylvester_residual": c.sylvester_residual,
                        "lyapunov_residual": c.lyapunov_residual,
                        "spectral_abscissa": c.spectral_abscissa,
                        "k_r_condition": c.k_r_condition,
                    })
                });
                obj.insert("certificate".into(), cert.unwrap_or_else(|e| json!({ "error": e.to_string() })));
            }
        }
    }
    rep
}
