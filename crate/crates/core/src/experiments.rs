//! The seven test problems, convergence tables and their artifacts.

use std::f64::consts::TAU;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flux::{make_flux, FluxField, FluxKind};
use crate::geometry::triangle_area;
use crate::initial::InitialData;
use crate::mesh::{build_icosphere, build_torus, mesh_quality, TriMesh};
use crate::motion::SurfaceMotion;
use crate::quadrature::{quad_cell, QuadratureSet, TriangleRule};
use crate::second_order::Reconstruction;
use crate::solver::{
    l1_diff, run_from, write_step_log_csv, CellField, CurvedScheme, Discretization, FlatScheme, RunOptions, RunOutput,
};
use crate::vec3::Vec3;
use crate::vtk::write_vtk_frame;

/// Reference torus of the deforming-surface problem.
pub const TORUS_RADII: (f64, f64) = (1.0, 0.4);

/// Torus resolution `(around, tube)` at a refinement level.
pub fn torus_resolution(level: u32) -> (usize, usize) {
    (32 << level, 16 << level)
}

/// What a run is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    /// The curved scheme on the same mesh.
    Curved,
    /// The exact solution `0`.
    Zero,
    /// The exact solution of rigid rotation by `V`.
    Rotation,
    /// No comparison; the deforming torus.
    None,
}

/// Flux, data and comparison of one test problem.
#[derive(Clone, Debug)]
pub struct TestProblem {
    pub id: u8,
    pub flux: FluxField,
    pub u0: InitialData,
    pub t_end: f64,
    pub second_order: bool,
    pub reference: Reference,
}

/// The setup of test problem `id` with an optional viscosity override.
pub fn test_problem(id: u8, lambda: Option<f64>) -> Result<TestProblem> {
    let unit = (0.0, 1.0);
    let (kind, range, u0, t_end, second_order, reference, default_lambda) = match id {
        1 => (
            FluxKind::StationaryV,
            (0.0, 0.0),
            InitialData::Constant(0.0),
            1.0,
            false,
            Reference::Curved,
            None,
        ),
        2 => (
            FluxKind::LinearW,
            unit,
            InitialData::indicator_x1(),
            1.0,
            false,
            Reference::Curved,
            None,
        ),
        3 => (
            FluxKind::BurgersV,
            unit,
            InitialData::indicator_x1(),
            1.0,
            false,
            Reference::Curved,
            None,
        ),
        4 => (
            FluxKind::TwoDim,
            unit,
            InitialData::indicator_x1(),
            1.0,
            false,
            Reference::Curved,
            Some(std::f64::consts::PI),
        ),
        5 => (
            FluxKind::StationaryV,
            (0.0, 0.0),
            InitialData::Constant(0.0),
            1.0,
            true,
            Reference::Zero,
            Some(0.0),
        ),
        6 => {
            let bump = InitialData::smooth_bump();
            let r = bump.range().expect("bump has a range");
            (FluxKind::LinearV, r, bump, 1.0, true, Reference::Rotation, None)
        }
        7 => (
            FluxKind::TorusBurgers,
            (0.0, 2.0),
            InitialData::Constant(1.0),
            4.0,
            false,
            Reference::None,
            None,
        ),
        _ => return Err(Error::Parameter(format!("unknown test problem {id}, expected 1..=7"))),
    };
    Ok(TestProblem {
        id,
        flux: make_flux(kind, range, lambda.or(default_lambda))?,
        u0,
        t_end,
        second_order,
        reference,
    })
}

/// `u₀` of the smooth rotation problem.
pub fn tp6_initial(x: Vec3) -> f64 {
    InitialData::smooth_bump().eval(x)
}

/// Exact solution of `u·V` transport: rotation about the x₃ axis with
/// angular speed 2π, so `u(x, t) = u₀(R(2πt)x)` with `R` the
/// counter-clockwise rotation.
pub fn tp6_exact_solution(x: Vec3, t: f64) -> f64 {
    let (s, c) = (TAU * t).sin_cos();
    tp6_initial(Vec3::new(c * x.x - s * x.y, s * x.x + c * x.y, x.z))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub tp: u8,
    pub levels: RangeInclusive<u32>,
    /// Defaults to 1, or 4 for the torus.
    pub t_end: Option<f64>,
    pub lambda: Option<f64>,
    pub cfl: f64,
    /// `(p₁, p₂, p₃)`: cell, edge and time quadrature orders of the flat scheme.
    pub quadrature_orders: (u32, u32, u32),
    /// Use the second-order flat scheme (always on for problems 5 and 6).
    pub second_order: bool,
    pub limiter: bool,
    pub out_dir: Option<PathBuf>,
    pub vtk_every: Option<usize>,
}

impl RunConfig {
    pub fn new(tp: u8) -> Self {
        RunConfig {
            tp,
            levels: if tp == 7 { 1..=1 } else { 0..=4 },
            t_end: None,
            lambda: None,
            cfl: 1.0,
            quadrature_orders: (2, 3, 1),
            second_order: false,
            limiter: false,
            out_dir: None,
            vtk_every: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub level: u32,
    pub h: f64,
    pub ncells: usize,
    pub l1: f64,
    /// Absent on the first row; infinite when the error vanished.
    pub eoc: Option<f64>,
    /// Largest relative mass drift of the runs at this level.
    pub mass_drift: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub tp: u8,
    pub lambda: f64,
    pub t_end: f64,
    pub cfl: f64,
    pub quadrature_orders: (u32, u32, u32),
    pub second_order: bool,
    pub rows: Vec<TableRow>,
}

impl ConvergenceTable {
    pub fn finest_eoc(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eoc)
    }

    pub fn max_mass_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.mass_drift).fold(0.0, f64::max)
    }

    fn push(&mut self, level: u32, h: f64, ncells: usize, l1: f64, mass_drift: f64, steps: usize) {
        let eoc = self.rows.last().map(|p| eoc_step(p.l1, l1, p.h, h));
        self.rows.push(TableRow {
            level,
            h,
            ncells,
            l1,
            eoc,
            mass_drift,
            steps,
        });
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "test problem {}, lambda = {}, T = {}",
            self.tp, self.lambda, self.t_end
        )?;
        writeln!(f, "{:>5} {:>12} {:>9} {:>14} {:>7}", "level", "h", "cells", "L1", "EOC")?;
        for r in &self.rows {
            let eoc = r.eoc.map_or("---".to_string(), |e| format!("{e:.3}"));
            writeln!(
                f,
                "{:>5} {:>12.6} {:>9} {:>14.6e} {:>7}",
                r.level, r.h, r.ncells, r.l1, eoc
            )?;
        }
        Ok(())
    }
}

/// `log(E_l/E_{l+1}) / log(h_l/h_{l+1})`; infinite when `E_{l+1} = 0`.
pub fn eoc_step(e_l: f64, e_l1: f64, h_l: f64, h_l1: f64) -> f64 {
    if e_l1 == 0.0 {
        return f64::INFINITY;
    }
    (e_l / e_l1).ln() / (h_l / h_l1).ln()
}

/// Writes `level,h,ncells,l1,eoc` with six significant digits for the error
/// and three decimals for the EOC (blank on the first row).
pub fn write_table_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_table(table, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_table(table: &ConvergenceTable, mut w: impl Write) -> Result<()> {
    writeln!(w, "level,h,ncells,l1,eoc")?;
    for r in &table.rows {
        let eoc = match r.eoc {
            None => String::new(),
            Some(e) if e.is_infinite() => "inf".into(),
            Some(e) => format!("{e:.3}"),
        };
        writeln!(w, "{},{:.6e},{},{:.5e},{}", r.level, r.h, r.ncells, r.l1, eoc)?;
    }
    Ok(())
}

/// Result of the deforming torus run.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusReport {
    pub level: u32,
    pub ncells: usize,
    pub t_end: f64,
    pub steps: usize,
    pub min: f64,
    pub max: f64,
    pub mass_drift: f64,
    pub frames: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemReport {
    Table(ConvergenceTable),
    Torus(TorusReport),
}

fn frame_writer<'a>(
    dir: Option<&'a Path>,
    every: Option<usize>,
    prefix: String,
    mesh: &'a TriMesh,
    motion: &'a SurfaceMotion,
    frames: &'a mut Vec<PathBuf>,
) -> impl FnMut(&CellField, usize) -> Result<()> + 'a {
    move |field, step| {
        let (Some(dir), Some(_)) = (dir, every) else {
            return Ok(());
        };
        let path = dir.join(format!("{prefix}_{step:06}.vtk"));
        let pos = motion.positions(mesh.vertices(), field.time)?;
        write_vtk_frame(mesh, &pos, &field.values, &path)?;
        frames.push(path);
        Ok(())
    }
}

fn save_log(dir: Option<&Path>, name: String, out: &RunOutput) -> Result<()> {
    if let Some(dir) = dir {
        let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
        write_step_log_csv(&out.log, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

/// Σ_K̄ |K̄|·|ū_K − mean of the exact solution over K̄|.
fn rotation_error(mesh: &TriMesh, field: &CellField, t: f64) -> f64 {
    let rule = TriangleRule::degree5();
    (0..mesh.num_cells())
        .map(|k| {
            let p = mesh.cell_points(k, mesh.vertices());
            let area = triangle_area(p[0], p[1], p[2]);
            let exact = quad_cell(&rule, p, |x| tp6_exact_solution(x, t)) / area;
            area * (field.values[k] - exact).abs()
        })
        .sum()
}

/// Runs one test problem over the configured levels.
pub fn run_test_problem(cfg: &RunConfig) -> Result<ProblemReport> {
    let problem = test_problem(cfg.tp, cfg.lambda)?;
    let t_end = cfg.t_end.unwrap_or(problem.t_end);
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Parameter(format!(
            "final time must be non-negative, got {t_end}"
        )));
    }
    let (p1, p2, p3) = cfg.quadrature_orders;
    let quadrature = QuadratureSet::with_orders(p1, p2, p3)?;
    let out_dir = cfg.out_dir.as_deref();
    if let Some(d) = out_dir {
        fs::create_dir_all(d)?;
    }
    let mut opts = RunOptions::new(t_end);
    opts.cfl = cfg.cfl;
    opts.observe_every = cfg.vtk_every;
    let second_order = problem.second_order || cfg.second_order;
    if second_order {
        opts.second_order = Some(Reconstruction {
            enabled: true,
            limiter: cfg.limiter,
        });
    }
    if cfg.levels.is_empty() {
        return Err(Error::Parameter("empty level range".into()));
    }

    if problem.reference == Reference::None {
        let level = *cfg.levels.end();
        if level > 5 {
            return Err(Error::Capacity(format!(
                "torus level {level} too large, the maximum is 5"
            )));
        }
        let mesh = build_torus(TORUS_RADII.0, TORUS_RADII.1, torus_resolution(level))?;
        let motion = SurfaceMotion::torus(t_end.max(4.0));
        let scheme = FlatScheme::new(&mesh, motion.clone(), quadrature);
        opts.second_order = None;
        let mut frames = Vec::new();
        let init = scheme.init(&problem.u0)?;
        let out = {
            let mut obs = frame_writer(
                out_dir,
                cfg.vtk_every,
                format!("tp7_l{level}"),
                &mesh,
                &motion,
                &mut frames,
            );
            run_from(&scheme, &problem.flux, init, &opts, &mut obs)?
        };
        save_log(out_dir, format!("tp7_l{level}_steps.csv"), &out)?;
        log::info!(
            "torus level {level}: {} steps, range [{}, {}]",
            out.steps(),
            out.field.min(),
            out.field.max()
        );
        return Ok(ProblemReport::Torus(TorusReport {
            level,
            ncells: mesh.num_cells(),
            t_end,
            steps: out.steps(),
            min: out.field.min(),
            max: out.field.max(),
            mass_drift: out.mass_drift(),
            frames,
        }));
    }

    let mut table = ConvergenceTable {
        tp: cfg.tp,
        lambda: problem.flux.lambda,
        t_end,
        cfl: cfg.cfl,
        quadrature_orders: quadrature.orders(),
        second_order,
        rows: Vec::new(),
    };
    for level in cfg.levels.clone() {
        let mesh = build_icosphere(level)?;
        let h = mesh_quality(&mesh, mesh.vertices())?.h;
        let motion = SurfaceMotion::identity(t_end);
        let flat = FlatScheme::new(&mesh, motion.clone(), quadrature.clone());
        let mut frames = Vec::new();
        let flat_out = {
            let prefix = format!("tp{}_l{level}", cfg.tp);
            let mut obs = frame_writer(out_dir, cfg.vtk_every, prefix, &mesh, &motion, &mut frames);
            run_from(&flat, &problem.flux, flat.init(&problem.u0)?, &opts, &mut obs)?
        };
        save_log(out_dir, format!("tp{}_l{level}_flat_steps.csv", cfg.tp), &flat_out)?;
        let mut drift = flat_out.mass_drift();
        let l1 = match problem.reference {
            Reference::Curved => {
                let curved = CurvedScheme::stationary(&mesh, t_end);
                let mut copts = opts.clone();
                copts.second_order = None;
                copts.observe_every = None;
                let curved_init = curved.init(&problem.u0)?;
                let curved_out = run_from(&curved, &problem.flux, curved_init, &copts, &mut |_, _| Ok(()))?;
                save_log(out_dir, format!("tp{}_l{level}_curved_steps.csv", cfg.tp), &curved_out)?;
                drift = drift.max(curved_out.mass_drift());
                l1_diff(&curved_out.field, &flat_out.field, &flat_out.final_areas)?
            }
            Reference::Zero => {
                let zero = CellField::constant(mesh.num_cells(), 0.0, t_end);
                l1_diff(&zero, &flat_out.field, &flat_out.final_areas)?
            }
            Reference::Rotation => rotation_error(&mesh, &flat_out.field, t_end),
            Reference::None => unreachable!(),
        };
        log::info!("tp{} level {level}: L1 = {l1:.6e}, {} steps", cfg.tp, flat_out.steps());
        table.push(level, h, mesh.num_cells(), l1, drift, flat_out.steps());
    }
    if let Some(d) = out_dir {
        write_table_csv(&table, &d.join(format!("tp{}_table.csv", cfg.tp)))?;
    }
    Ok(ProblemReport::Table(table))
}
