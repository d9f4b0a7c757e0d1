use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nmgm_core::cases::{
    case_registry, discharge_constancy, l1_error, observed_order, wedge_exact, wedge_point_probe, write_oracle_csv, Case1d,
    Case2d, CaseSpec, WEDGE_PROBE,
};
use nmgm_core::driver::{solve_1d, solve_2d, RunOptions};
use nmgm_core::jacobian::{fd_jacobian, FdConfig, JacobianVariant};
use nmgm_core::mesh::{Mesh1D, Mesh2D};
use nmgm_core::model::State;
use nmgm_core::newton::{epsilon_for_mesh, NmgmResult, Outcome};

use crate::config::{Cells, RunConfig};

/// What a finished `run` reports back to `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub outcome: Outcome,
    pub steps: usize,
    pub final_residual: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_history<const D: usize>(result: &NmgmResult<D>, dir: &Path) -> Result<()> {
    let mut out = create(&dir.join("history.csv"))?;
    result.finest().result.history.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn summary_head<const D: usize>(out: &mut impl Write, run: &RunConfig, result: &NmgmResult<D>) -> Result<RunReport> {
    let finest = &result.finest().result;
    let report = RunReport {
        outcome: finest.outcome,
        steps: finest.steps(),
        final_residual: finest.history.final_residual(),
    };
    writeln!(out, "case = {}", run.case.name())?;
    writeln!(out, "cells = {}", run.cells)?;
    writeln!(out, "outcome = {}", report.outcome.as_str())?;
    writeln!(out, "converged = {}", report.outcome == Outcome::Converged)?;
    writeln!(out, "n_step = {}", report.steps)?;
    writeln!(out, "initial_residual = {:.16e}", finest.history.initial_residual())?;
    writeln!(out, "final_residual = {:.16e}", report.final_residual)?;
    writeln!(out, "total_steps_all_levels = {}", result.total_steps())?;
    writeln!(out, "wall_seconds = {:.6}", result.wall_seconds())?;
    writeln!(out, "jacobian_seconds = {:.6}", result.jacobian_seconds())?;
    for l in &result.levels {
        writeln!(
            out,
            "level {} cells {}: {} steps, {}, residual {:.6e}",
            l.level,
            l.shape.len(),
            l.result.steps(),
            l.result.outcome.as_str(),
            l.result.history.final_residual()
        )?;
    }
    Ok(report)
}

fn solution_1d(case: &Case1d, mesh: &Mesh1D, field: &[State<2>], out: &mut impl Write) -> Result<()> {
    if case.channel {
        writeln!(out, "x,b,h,hu,h_plus_b,sigma,Q")?;
    } else {
        writeln!(out, "x,b,h,hu,h_plus_b")?;
    }
    for (j, u) in field.iter().enumerate() {
        let x = mesh.center(j);
        let g = case.geometry(x);
        let (h, hu) = (u[0] / g.sigma, u[1] / g.sigma);
        write!(out, "{x:.16e},{:.16e},{h:.16e},{hu:.16e},{:.16e}", g.b, h + g.b)?;
        if case.channel {
            write!(out, ",{:.16e},{:.16e}", g.sigma, u[1])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn solution_2d(case: &Case2d, mesh: &Mesh2D, field: &[State<3>], out: &mut impl Write) -> Result<()> {
    writeln!(out, "x,y,b,h,hu,hv")?;
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let (x, y) = mesh.center(i, j);
            let u = field[j * mesh.nx + i];
            writeln!(out, "{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", case.geometry(x, y).b, u[0], u[1], u[2])?;
        }
    }
    Ok(())
}

/// Solves the configured case and writes `solution.csv`, `history.csv`
/// and `summary.txt` into the output directory.
pub fn cmd_run(run: &RunConfig) -> Result<RunReport> {
    let dir = &run.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let g = run.options.gravity;
    let mut summary = create(&dir.join("summary.txt"))?;
    let report = match (&run.case, run.cells) {
        (CaseSpec::OneD(case), Cells::OneD(n)) => {
            let (mesh, result) = solve_1d(case, n, &run.options)?;
            let mut out = create(&dir.join("solution.csv"))?;
            solution_1d(case, &mesh, result.field(), &mut out)?;
            out.flush()?;
            write_history(&result, dir)?;
            let report = summary_head(&mut summary, run, &result)?;
            let field = result.field();
            writeln!(summary, "discharge_deviation = {:.16e}", discharge_constancy(field, case.inflow_discharge))?;
            if let Ok(exact) = case.exact_averages(&mesh, g) {
                let e = l1_error(field, &exact, mesh.dx)?;
                writeln!(summary, "l1_error_h = {:.16e}", e[0])?;
                writeln!(summary, "l1_error_hu = {:.16e}", e[1])?;
                writeln!(summary, "max_surface_error = {:.16e}", case.surface_error(&mesh, field, g)?)?;
            }
            report
        }
        (CaseSpec::TwoD(case), Cells::TwoD(nx, ny)) => {
            let (mesh, result) = solve_2d(case, nx, ny, &run.options)?;
            let mut out = create(&dir.join("solution.csv"))?;
            solution_2d(case, &mesh, result.field(), &mut out)?;
            out.flush()?;
            write_history(&result, dir)?;
            let report = summary_head(&mut summary, run, &result)?;
            if case.name == "wedge" {
                let (h, speed) = wedge_point_probe(&mesh, result.field(), WEDGE_PROBE)?;
                let (h_ex, s_ex) = wedge_exact(g)?;
                let line = format!(
                    "probe ({}, {}): h = {h:.6}, speed = {speed:.6} (jump relations: h = {h_ex:.6}, speed = {s_ex:.6})",
                    WEDGE_PROBE.0, WEDGE_PROBE.1
                );
                println!("{line}");
                writeln!(summary, "{line}")?;
            }
            report
        }
        _ => bail!("cell count does not match the case dimension"),
    };
    summary.flush()?;
    println!(
        "{}: {} after {} Newton steps on the finest mesh, residual {:.3e}",
        run.case.name(),
        report.outcome.as_str(),
        report.steps,
        report.final_residual
    );
    Ok(report)
}

/// One line of the convergence-order table.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub cells: usize,
    pub error_h: f64,
    pub order_h: Option<f64>,
    pub error_hu: f64,
    pub order_hu: Option<f64>,
}

/// Pairwise orders between consecutive meshes; `None` where an error is
/// not positive.
pub fn order_rows(cells: &[usize], errors: &[(f64, f64)]) -> Vec<OrderRow> {
    let mut rows: Vec<OrderRow> = Vec::with_capacity(cells.len());
    for (k, (&n, &(eh, ehu))) in cells.iter().zip(errors).enumerate() {
        let (order_h, order_hu) = if k == 0 {
            (None, None)
        } else {
            let prev = &rows[k - 1];
            let ratio = (n as f64 / prev.cells as f64).log2();
            let order = |a: f64, b: f64| observed_order(a, b).ok().map(|p| p / ratio);
            (order(prev.error_h, eh), order(prev.error_hu, ehu))
        };
        rows.push(OrderRow {
            cells: n,
            error_h: eh,
            order_h,
            error_hu: ehu,
            order_hu,
        });
    }
    rows
}

pub fn write_order_table(rows: &[OrderRow], out: &mut impl Write) -> Result<()> {
    let fmt = |o: Option<f64>| o.map_or_else(String::new, |v| format!("{v:.16e}"));
    writeln!(out, "N,L1_h,order_h,L1_hu,order_hu")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{},{:.16e},{}",
            r.cells,
            r.error_h,
            fmt(r.order_h),
            r.error_hu,
            fmt(r.order_hu)
        )?;
    }
    Ok(())
}

/// Finest-pair orders, or `None` when undefined.
pub fn finest_orders(rows: &[OrderRow]) -> Option<(f64, f64)> {
    let last = rows.last()?;
    Some((last.order_h?, last.order_hu?))
}

/// L¹ errors against the case oracle on each mesh.
pub fn order_table(case: &Case1d, cells: &[usize], options: &RunOptions) -> Result<Vec<OrderRow>> {
    let mut errors = Vec::with_capacity(cells.len());
    for &n in cells {
        let (mesh, result) = solve_1d(case, n, options)?;
        let exact = case.exact_averages(&mesh, options.gravity)?;
        let e = l1_error(result.field(), &exact, mesh.dx)?;
        errors.push((e[0], e[1]));
    }
    Ok(order_rows(cells, &errors))
}

/// Mean assembly time of one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: JacobianVariant,
    pub mean_seconds: f64,
    pub perturbations: usize,
    pub max_rows_per_perturbation: usize,
}

/// Assembles J21 then J9 from the same initial field `repetitions` times.
pub fn jacobian_bench(case: &Case2d, nx: usize, ny: usize, repetitions: usize, gravity: f64) -> Result<Vec<BenchRow>> {
    let mesh = case.mesh(nx, ny)?;
    let scheme = case.scheme(&mesh, gravity)?;
    let field = case.initial_field(&mesh);
    let fd = FdConfig::new(epsilon_for_mesh(nx * ny, 2))?;
    let reps = repetitions.max(1);
    [JacobianVariant::J21, JacobianVariant::J9]
        .into_iter()
        .map(|variant| {
            let pattern = variant.pattern();
            let mut total = 0.0;
            let mut stats = None;
            for _ in 0..reps {
                let jac = fd_jacobian(&scheme, &field, &pattern, fd)?;
                total += jac.stats.seconds;
                stats = Some(jac.stats);
            }
            let stats = stats.expect("at least one repetition");
            Ok(BenchRow {
                variant,
                mean_seconds: total / reps as f64,
                perturbations: stats.perturbations,
                max_rows_per_perturbation: stats.max_rows_per_perturbation,
            })
        })
        .collect()
}

pub fn write_bench(rows: &[BenchRow], out: &mut impl Write) -> Result<()> {
    let full = rows.iter().find(|r| r.variant == JacobianVariant::J21).map(|r| r.mean_seconds);
    writeln!(out, "pattern,mean_seconds,perturbations,rows_per_perturbation,ratio_to_J21")?;
    for r in rows {
        let ratio = match full {
            Some(t) if t > 0.0 => r.mean_seconds / t,
            _ => f64::NAN,
        };
        writeln!(
            out,
            "{},{:.16e},{},{},{:.16e}",
            r.variant, r.mean_seconds, r.perturbations, r.max_rows_per_perturbation, ratio
        )?;
    }
    Ok(())
}

pub fn list_cases(out: &mut impl Write) -> Result<()> {
    for c in case_registry() {
        let cells = match &c {
            CaseSpec::OneD(c) => c.default_cells.to_string(),
            CaseSpec::TwoD(c) => format!("{}x{}", c.default_cells.0, c.default_cells.1),
        };
        writeln!(out, "{:<28} {}D  {:>6}  {}", c.name(), c.dimension(), cells, c.description())?;
    }
    Ok(())
}

/// Writes the exact profile of a 1D case, or the jump state for the wedge.
pub fn dump_oracle(case: &CaseSpec, cells: Option<usize>, gravity: f64, out: &mut impl Write) -> Result<()> {
    match case {
        CaseSpec::OneD(c) => {
            let mesh = c.mesh(cells.unwrap_or(c.default_cells))?;
            write_oracle_csv(c, &mesh, gravity, out)?;
        }
        CaseSpec::TwoD(c) if c.name == "wedge" => {
            let (h, speed) = wedge_exact(gravity)?;
            writeln!(out, "x,y,h_exact,speed_exact")?;
            writeln!(out, "{:.16e},{:.16e},{h:.16e},{speed:.16e}", WEDGE_PROBE.0, WEDGE_PROBE.1)?;
        }
        CaseSpec::TwoD(c) => bail!("case `{}` has no closed-form oracle", c.name),
    }
    Ok(())
}
