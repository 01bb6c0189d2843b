//! Model sources: benchmark generator specs and Matrix Market directories with a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use faer::Mat;
use serde::{Deserialize, Serialize};

use phred_core::linalg::Matrix;
use phred_core::models::{build_ladder, build_msd, LadderParams, MsdParams};
use phred_core::system::{build_ph, ph_to_state_space, PortHamiltonianSystem, StateSpaceSystem};

use crate::{mtx, write_atomic, CliError};

/// A scalar broadcast to every element, or one value per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Scalar(f64),
    List(Vec<f64>),
}

impl Param {
    fn expand(&self, len: usize, name: &str) -> Result<Vec<f64>, CliError> {
        match self {
            Param::Scalar(v) => Ok(vec![*v; len]),
            Param::List(v) if v.len() == len => Ok(v.clone()),
            Param::List(v) => Err(CliError::Config(format!("{name} has {} entries, expected {len}", v.len()))),
        }
    }
}

/// `{"family": "msd" | "ladder", "n": …, params…}`; omitted parameters take the benchmark values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Msd {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        masses: Option<Param>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stiffness: Option<Param>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        damping: Option<Param>,
    },
    Ladder {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        capacitances: Option<Param>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inductances: Option<Param>,
        /// The first `n/2` resistors; the terminal one is separate.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resistances: Option<Param>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terminal_resistance: Option<f64>,
    },
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Msd { n, .. } | ModelSpec::Ladder { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<PortHamiltonianSystem, CliError> {
        let half = self.n() / 2;
        let pick = |p: &Option<Param>, default: f64, name: &str| match p {
            Some(p) => p.expand(half, name),
            None => Ok(vec![default; half]),
        };
        let built = match self {
            ModelSpec::Msd { n, masses, stiffness, damping } => build_msd(&MsdParams {
                n: *n,
                masses: pick(masses, 4.0, "masses")?,
                stiffness: pick(stiffness, 4.0, "stiffness")?,
                damping: pick(damping, 1.0, "damping")?,
            }),
            ModelSpec::Ladder { n, capacitances, inductances, resistances, terminal_resistance } => {
                let mut r = pick(resistances, 3.0, "resistances")?;
                r.push(terminal_resistance.unwrap_or(1.0));
                build_ladder(&LadderParams {
                    n: *n,
                    capacitances: pick(capacitances, 0.1, "capacitances")?,
                    inductances: pick(inductances, 0.1, "inductances")?,
                    resistances: r,
                })
            }
        };
        built.map_err(|e| match e {
            phred_core::Error::BadParams(msg) => CliError::Config(msg),
            other => CliError::Numerical(other),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PortHamiltonian,
    StateSpace,
}

/// `manifest.json` next to the Matrix Market files of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ModelKind,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// Matrix name (`J`, `R`, `Q`, `B` or `E`, `A`, `B`, `C`) to file name relative to the manifest.
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<serde_json::Value>,
}

#[derive(Clone, Debug)]
pub enum Model {
    Ph(PortHamiltonianSystem),
    General(StateSpaceSystem),
}

impl Model {
    pub fn state_space(&self) -> StateSpaceSystem {
        match self {
            Model::Ph(ph) => ph_to_state_space(ph),
            Model::General(ss) => ss.clone(),
        }
    }

    pub fn ph(&self) -> Option<&PortHamiltonianSystem> {
        match self {
            Model::Ph(ph) => Some(ph),
            Model::General(_) => None,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Model::Ph(ph) => ph.n(),
            Model::General(ss) => ss.n(),
        }
    }

    /// Writes the matrices and `manifest.json` into `dir`, returning the manifest path.
    pub fn save(&self, dir: &Path, source: Option<serde_json::Value>) -> Result<PathBuf, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut files = BTreeMap::new();
        let mut put = |name: &str, m: &Matrix| -> Result<(), CliError> {
            let file = format!("{name}.mtx");
            write_atomic(&dir.join(&file), mtx::to_string(m).as_bytes())?;
            files.insert(name.to_string(), file);
            Ok(())
        };
        let (kind, n, m, p) = match self {
            Model::Ph(ph) => {
                put("J", ph.j())?;
                put("R", ph.r())?;
                put("Q", ph.q())?;
                put("B", &Matrix::Dense(ph.b().to_owned()))?;
                (ModelKind::PortHamiltonian, ph.n(), ph.m(), ph.m())
            }
            Model::General(ss) => {
                if let Some(e) = ss.e() {
                    put("E", e)?;
                }
                put("A", ss.a())?;
                put("B", &Matrix::Dense(ss.b().to_owned()))?;
                put("C", &Matrix::Dense(ss.c().to_owned()))?;
                (ModelKind::StateSpace, ss.n(), ss.m(), ss.p())
            }
        };
        let manifest = Manifest { kind, n, m, p, files, source };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    /// Loads from a manifest file or a directory containing `manifest.json`.
    pub fn load(path: &Path) -> Result<Model, CliError> {
        let manifest_path = if path.is_dir() { path.join("manifest.json") } else { path.to_path_buf() };
        let text = fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let get = |name: &str| -> Result<Option<Matrix>, CliError> {
            match manifest.files.get(name) {
                Some(f) => mtx::read(&base.join(f)).map(Some),
                None => Ok(None),
            }
        };
        let need = |name: &str| -> Result<Matrix, CliError> {
            get(name)?.ok_or_else(|| CliError::Config(format!("{}: manifest lacks matrix {name}", manifest_path.display())))
        };
        let check = |name: &str, m: &Matrix, rows: usize, cols: usize| {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(CliError::Config(format!(
                    "{name} is {}x{}, manifest declares {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(())
        };
        let (n, m, p) = (manifest.n, manifest.m, manifest.p);
        let dense = |x: Matrix| -> Mat<f64> { x.to_dense() };
        match manifest.kind {
            ModelKind::PortHamiltonian => {
                let (j, r, q, b) = (need("J")?, need("R")?, need("Q")?, need("B")?);
                for (name, x, rows, cols) in [("J", &j, n, n), ("R", &r, n, n), ("Q", &q, n, n), ("B", &b, n, m)] {
                    check(name, x, rows, cols)?;
                }
                Ok(Model::Ph(build_ph(j, r, q, dense(b))?))
            }
            ModelKind::StateSpace => {
                let e = get("E")?;
                let (a, b, c) = (need("A")?, need("B")?, need("C")?);
                if let Some(e) = &e {
                    check("E", e, n, n)?;
                }
                for (name, x, rows, cols) in [("A", &a, n, n), ("B", &b, n, m), ("C", &c, p, n)] {
                    check(name, x, rows, cols)?;
                }
                Ok(Model::General(StateSpaceSystem::new(e, a, dense(b), dense(c))?))
            }
        }
    }
}
