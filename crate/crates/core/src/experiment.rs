//! Drivers: time integration with observers, the circle convergence study,
//! and file-producing simulation runs.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::analytic::{exact_field, PointSourceSolution};
use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::mesh::{generate_circle_mesh, MultiblockMesh};
use crate::sbp1d::SbpOperator1D;
use crate::wave::{
    build_system, convergence_rate, discrete_energy, l2_error, rk4_step, stable_dt,
    BoundaryCondition, ProblemFile, SemiDiscreteSystem, TimeStep, WaveProblem, WaveState,
};

pub const CIRCLE_TAG: &str = "outer";

/// A discretized problem ready to be stepped.
pub struct Simulation {
    pub disc: Discretization,
    pub system: SemiDiscreteSystem,
    pub problem: WaveProblem,
    pub time_step: TimeStep,
    /// Step actually used: `t_end / steps`.
    pub dt: f64,
    pub steps: usize,
    pub assembly_seconds: f64,
}

impl Simulation {
    pub fn new(mesh: MultiblockMesh, op: SbpOperator1D, problem: WaveProblem) -> Result<Self> {
        problem.validate()?;
        let start = Instant::now();
        let disc = Discretization::new(mesh, op)?;
        let system = build_system(&disc, &problem)?;
        let time_step = stable_dt(&system, problem.cfl_fraction)?;
        let steps = (problem.t_end / time_step.dt).ceil().max(1.0) as usize;
        Ok(Self {
            dt: problem.t_end / steps as f64,
            steps,
            disc,
            system,
            problem,
            time_step,
            assembly_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn energy(&self, state: &WaveState) -> f64 {
        discrete_energy(state, &self.system, &self.disc.global, &self.disc.embedding)
    }

    /// Step from zero data to `t_end`. The observer sees the initial state
    /// (step 0) and the state after every step.
    pub fn run(
        &self,
        mut observer: impl FnMut(usize, &WaveState) -> Result<()>,
    ) -> Result<WaveState> {
        self.run_from(
            WaveState::zeros(self.system.len()),
            self.steps,
            &mut observer,
        )
    }

    pub fn run_from(
        &self,
        mut state: WaveState,
        steps: usize,
        observer: &mut impl FnMut(usize, &WaveState) -> Result<()>,
    ) -> Result<WaveState> {
        observer(0, &state)?;
        let t0 = state.t;
        for step in 1..=steps {
            state = rk4_step(&self.system, &state, self.dt, step)?;
            // Avoid drift in the accumulated time.
            state.t = t0 + step as f64 * self.dt;
            observer(step, &state)?;
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub p: usize,
    pub refinement: u32,
    pub n_blocks: usize,
    pub n_dofs: usize,
    pub l2_error: f64,
    pub log10_error: f64,
    pub rate_q: Option<f64>,
    pub steps: usize,
    pub dt: f64,
    pub seconds: f64,
    /// `None` on success, otherwise why the level failed.
    pub failure: Option<String>,
}

/// Error at `t_end` of the circle experiment against the free-space
/// solution, excluding the source point.
pub fn circle_error(p: usize, refinement: u32) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let problem = WaveProblem::circle_experiment(CIRCLE_TAG, BoundaryCondition::Dirichlet);
    let mesh = generate_circle_mesh(refinement, CIRCLE_TAG);
    let n_blocks = mesh.num_blocks();
    let sim = Simulation::new(mesh, SbpOperator1D::gauss_lobatto(p)?, problem.clone())?;
    let n_dofs = sim.disc.n_reduced();
    let mut row = ConvergenceRow {
        p,
        refinement,
        n_blocks,
        n_dofs,
        l2_error: f64::NAN,
        log10_error: f64::NAN,
        rate_q: None,
        steps: sim.steps,
        dt: sim.dt,
        seconds: 0.0,
        failure: None,
    };
    match sim.run(|_, _| Ok(())) {
        Ok(state) => {
            let s = &problem.source;
            let exact = PointSourceSolution {
                c: problem.c,
                ..PointSourceSolution::new(s.x, s.y, s.sigma, s.t_source)?
            };
            let field = exact_field(sim.disc.coords(), state.t, &exact)?;
            let mut excluded = field.excluded.clone();
            excluded.push(sim.system.source_index);
            row.l2_error = l2_error(&state.v, &field.values, &sim.system.h, &excluded);
            row.log10_error = row.l2_error.log10();
        }
        Err(Error::Divergence { step }) => row.failure = Some(format!("diverged at step {step}")),
        Err(e) => return Err(e),
    }
    row.seconds = start.elapsed().as_secs_f64();
    Ok(row)
}

/// Run several refinement levels and fill in the rate between consecutive
/// successful levels.
pub fn circle_convergence(
    p: usize,
    refinements: &[u32],
    mut progress: impl FnMut(&ConvergenceRow),
) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &r in refinements {
        let mut row = circle_error(p, r)?;
        if let Some(prev) = rows.last() {
            row.rate_q = convergence_rate(prev.l2_error, prev.n_dofs, row.l2_error, row.n_dofs);
        }
        progress(&row);
        rows.push(row);
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "p,n_blocks,N_dofs,l2_error,log10_error,rate_q,refinement,status";

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "nan".into()
    }
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.p,
            r.n_blocks,
            r.n_dofs,
            fmt_float(r.l2_error),
            fmt_float(r.log10_error),
            r.rate_q.map_or("nan".into(), fmt_float),
            r.refinement,
            r.failure.as_deref().unwrap_or("ok"),
        );
    }
    out
}

/// FNV-1a over the bit patterns of a vector, for regression hashes.
pub fn state_hash(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// One section `block k` per block followed by `x y v` rows on that block's
/// `n x n` grid (xi-major).
pub fn format_snapshot(disc: &Discretization, v: &[f64]) -> String {
    let ev = disc.embedding.embed(v);
    let per_block = disc.tensor.n * disc.tensor.n;
    let mut out = String::new();
    for (b, block) in disc.blocks.iter().enumerate() {
        let _ = writeln!(out, "block {b}");
        for (k, p) in block.coords.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.12e} {:.12e} {:.12e}",
                p[0],
                p[1],
                ev[b * per_block + k]
            );
        }
    }
    out
}

pub fn snapshot_file_name(step: usize, t: f64) -> String {
    format!("snapshot_{step:07}_t{t:.6}.txt")
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTimes {
    pub assembly_seconds: f64,
    pub stepping_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: serde_json::Value,
    pub status: String,
    pub p: usize,
    pub n_blocks: usize,
    pub n_dofs: usize,
    pub dt: f64,
    pub time_step: TimeStep,
    pub steps: usize,
    pub steps_completed: usize,
    pub final_time: f64,
    pub final_energy: f64,
    pub max_energy_increase_after_source: f64,
    pub state_hash: String,
    pub timings: PhaseTimes,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Step a problem to `t_end`, writing snapshots (every `snapshot_every`
/// steps and at the final step), an energy log and a JSON
/// report into `out_dir`. A divergence stops the run with the snapshots
/// written so far kept and `status` set accordingly.
pub fn run_simulation(
    mesh: MultiblockMesh,
    problem: WaveProblem,
    p: usize,
    out_dir: &Path,
) -> Result<RunReport> {
    let n_blocks = mesh.num_blocks();
    let sim = Simulation::new(mesh, SbpOperator1D::gauss_lobatto(p)?, problem)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let energy_path = out_dir.join("energy.csv");
    let energy_file =
        std::fs::File::create(&energy_path).map_err(|e| Error::io(&energy_path, e))?;
    let mut energy_log = std::io::BufWriter::new(energy_file);
    writeln!(energy_log, "step,t,energy").map_err(|e| Error::io(&energy_path, e))?;

    let source_off = sim.problem.source.t_source + 10.0 * sim.problem.source.sigma;
    let mut outputs = Vec::new();
    let mut last_energy = f64::NAN;
    let mut max_increase = 0.0f64;
    let mut completed = 0;
    let mut last_state = None;
    let mut stepping = 0.0;
    let mut tick = Instant::now();

    let result = sim.run(|step, state| {
        stepping += tick.elapsed().as_secs_f64();
        completed = step;
        let e = sim.energy(state);
        writeln!(energy_log, "{step},{:.12e},{:.12e}", state.t, e)
            .map_err(|x| Error::io(&energy_path, x))?;
        if state.t > source_off && last_energy.is_finite() && last_energy > 0.0 {
            max_increase = max_increase.max((e - last_energy) / last_energy);
        }
        last_energy = e;
        if step % sim.problem.snapshot_every == 0 || step == sim.steps {
            let path = out_dir.join(snapshot_file_name(step, state.t));
            write_file(&path, &format_snapshot(&sim.disc, &state.v))?;
            outputs.push(path);
        }
        if step == sim.steps {
            last_state = Some(state.clone());
        }
        tick = Instant::now();
        Ok(())
    });
    energy_log.flush().map_err(|e| Error::io(&energy_path, e))?;
    outputs.push(energy_path);

    let status = match result {
        Ok(_) => "ok".to_string(),
        Err(Error::Divergence { step }) => format!("diverged at step {step}"),
        Err(e) => return Err(e),
    };
    let final_state = last_state.unwrap_or_else(|| WaveState::zeros(sim.system.len()));
    let mut report = RunReport {
        command: "run".into(),
        parameters: serde_json::to_value(ProblemFile::from(&sim.problem))
            .expect("problem serializes"),
        status,
        p,
        n_blocks,
        n_dofs: sim.disc.n_reduced(),
        dt: sim.dt,
        time_step: sim.time_step,
        steps: sim.steps,
        steps_completed: completed,
        final_time: final_state.t,
        final_energy: last_energy,
        max_energy_increase_after_source: max_increase,
        state_hash: format!("{:016x}", state_hash(&final_state.v)),
        timings: PhaseTimes {
            assembly_seconds: sim.assembly_seconds,
            stepping_seconds: stepping,
        },
        outputs,
    };
    let report_path = out_dir.join("report.json");
    report.outputs.push(report_path.clone());
    write_file(
        &report_path,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(report)
}
