//! Checkpoints: a CHBK snapshot of the state plus a `key = value` sidecar
//! `<path>.meta` holding the scalar part of the state.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::energetics::{chemical_potentials, compute_energy};
use crate::error::{Error, Result};
use crate::evolution::{SimState, Simulation};
use crate::flow::{FlowDiagnostics, FlowMode};
use crate::io::csv::fmt_f64;
use crate::io::snapshot::Snapshot;
use crate::spectral::{Grid, VectorField};

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Snapshot with fields `phi, mu, w, v_1..v_d` and, if present, `p`.
pub fn state_snapshot(state: &SimState) -> Snapshot {
    let mut snap = Snapshot::new(state.phi.grid());
    snap.push("phi", &state.phi);
    snap.push("mu", &state.mu);
    snap.push("w", &state.w);
    for (i, c) in state.v.components().iter().enumerate() {
        snap.push(&format!("v_{}", i + 1), c);
    }
    if let Some(p) = &state.pressure {
        snap.push("p", p);
    }
    snap
}

pub fn write_checkpoint(path: &Path, state: &SimState, seed: u64) -> Result<()> {
    state_snapshot(state).write(path)?;
    let mut meta = String::new();
    let f = &state.flow;
    for (k, v) in [
        ("version", CHECKPOINT_VERSION.to_string()),
        ("seed", seed.to_string()),
        ("step", state.step.to_string()),
        ("t", fmt_f64(state.t)),
        ("dt", fmt_f64(state.dt)),
        ("dt_used", fmt_f64(state.dt_used)),
        ("streak", state.streak.to_string()),
        ("flow_mode", f.mode.name().to_string()),
        ("flow_iterations", f.iterations.to_string()),
        ("flow_residual", fmt_f64(f.final_residual)),
        ("flow_alpha", fmt_f64(f.coercivity_alpha)),
        ("flow_dissipation", fmt_f64(f.dissipation)),
    ] {
        writeln!(meta, "{k} = {v}").unwrap();
    }
    let side = sidecar_path(path);
    std::fs::write(&side, meta).map_err(|e| Error::io(&side, e))
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: SimState,
    pub seed: u64,
}

fn parse_meta(path: &Path, text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::format(path, format!("bad sidecar line '{l}'")))
        })
        .collect()
}

/// Restores a state written by [`write_checkpoint`]. Energy and the mean-μ
/// identity are recomputed from `φ`; they are deterministic functions of it.
pub fn read_checkpoint(path: &Path, sim: &Simulation, grid: &Grid) -> Result<Checkpoint> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(Error::Mismatch(format!(
            "checkpoint {} has no sidecar {}",
            path.display(),
            side.display()
        )));
    }
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta = parse_meta(&side, &text)?;
    let get = |k: &str| -> Result<&str> {
        meta.iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::format(&side, format!("sidecar lacks '{k}'")))
    };
    fn num<T: std::str::FromStr>(side: &Path, k: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::format(side, format!("'{k}' has unparsable value '{v}'")))
    }
    let version: u32 = num(&side, "version", get("version")?)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Mismatch(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let mode = FlowMode::parse(get("flow_mode")?)
        .ok_or_else(|| Error::format(&side, "unknown flow_mode"))?;
    if mode != sim.flow.mode {
        return Err(Error::Mismatch(format!(
            "checkpoint was written in {} mode, configuration asks for {}",
            mode.name(),
            sim.flow.mode.name()
        )));
    }

    let snap = Snapshot::read(path)?;
    if snap.sizes != grid.sizes() || snap.lengths != grid.lengths() {
        return Err(Error::Mismatch(format!(
            "checkpoint grid {:?} × {:?} differs from configured {:?} × {:?}",
            snap.sizes,
            snap.lengths,
            grid.sizes(),
            grid.lengths()
        )));
    }
    let phi = snap.scalar(grid, "phi")?;
    let mu = snap.scalar(grid, "mu")?;
    let w = snap.scalar(grid, "w")?;
    let comps = (1..=grid.dims())
        .map(|i| snap.scalar(grid, &format!("v_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let v = VectorField::from_components_flagged(comps, true);
    let pressure = snap.field("p").map(|_| snap.scalar(grid, "p")).transpose()?;

    let energy = compute_energy(&phi, &sim.spec);
    let mean_mu_identity = chemical_potentials(&phi, &sim.spec).mean_mu;
    let state = SimState {
        t: num(&side, "t", get("t")?)?,
        step: num(&side, "step", get("step")?)?,
        dt: num(&side, "dt", get("dt")?)?,
        dt_used: num(&side, "dt_used", get("dt_used")?)?,
        streak: num(&side, "streak", get("streak")?)?,
        phi,
        mu,
        w,
        v,
        pressure,
        energy,
        mean_mu_identity,
        flow: FlowDiagnostics {
            mode,
            iterations: num(&side, "flow_iterations", get("flow_iterations")?)?,
            final_residual: num(&side, "flow_residual", get("flow_residual")?)?,
            residual_history: Vec::new(),
            coercivity_alpha: num(&side, "flow_alpha", get("flow_alpha")?)?,
            dissipation: num(&side, "flow_dissipation", get("flow_dissipation")?)?,
        },
    };
    Ok(Checkpoint {
        state,
        seed: num(&side, "seed", get("seed")?)?,
    })
}
