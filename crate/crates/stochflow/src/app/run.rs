//! Run orchestration and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::calculus::dec_vorticity;
use crate::dynamics::{run, Integrator, RunSummary, SimState, StepReport};
use crate::kelvin::{circulation, curve_from_cell_loop, CurveAdvector, DiscreteCurve};
use crate::mesh::{build_regular_grid, read_mesh_file, MeshGeometry, MeshQuality};

use super::config::{MeshSource, RunConfig};
use super::scenario::build_scenario;
use super::AppError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AppError + '_ {
    move |source| AppError::Io { path: path.display().to_string(), source }
}

pub fn build_mesh(cfg: &RunConfig) -> Result<MeshGeometry, AppError> {
    Ok(match &cfg.mesh {
        MeshSource::Regular { nx, ny, h } => build_regular_grid(*nx, *ny, *h, cfg.boundary)?,
        MeshSource::File(p) => read_mesh_file(p)?.build()?,
    })
}

pub fn build_curves(mesh: &MeshGeometry, cfg: &RunConfig) -> Result<Vec<DiscreteCurve>, AppError> {
    cfg.curves
        .iter()
        .enumerate()
        .map(|(id, cells)| curve_from_cell_loop(mesh, cells).map_err(|source| AppError::Curve { id, source }))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub summary: RunSummary,
    pub frames: usize,
    pub output_dir: PathBuf,
}

struct Outputs {
    energy: BufWriter<File>,
    circulation: BufWriter<File>,
    energy_path: PathBuf,
    circulation_path: PathBuf,
}

/// Runs the configured simulation, writing `resolved_config.txt`,
/// `energy.csv`, `circulation.csv` and `frame_%06d.txt` into the output directory.
pub fn simulate(cfg: &RunConfig) -> Result<RunReport, AppError> {
    let mesh = build_mesh(cfg)?;
    let a0 = build_scenario(&mesh, &cfg.scenario)?;
    let mut curves = build_curves(&mesh, cfg)?;
    let mut integrator = Integrator::new(&mesh, cfg.sim.clone())?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let resolved = dir.join("resolved_config.txt");
    fs::write(&resolved, cfg.to_text()).map_err(io_err(&resolved))?;
    let create = |name: &str| -> Result<(BufWriter<File>, PathBuf), AppError> {
        let p = dir.join(name);
        let f = File::create(&p).map_err(io_err(&p))?;
        Ok((BufWriter::new(f), p))
    };
    let (energy, energy_path) = create("energy.csv")?;
    let (circ, circulation_path) = create("circulation.csv")?;
    let mut out = Outputs { energy, circulation: circ, energy_path, circulation_path };
    writeln!(out.energy, "step,time,kinetic_energy,max_divergence,newton_iters").map_err(io_err(&out.energy_path))?;
    writeln!(out.circulation, "step,time,curve_id,circulation,support_size").map_err(io_err(&out.circulation_path))?;

    let every = cfg.sim.output_every;
    let mut frames = 0;
    let mut prev = a0.clone();
    let initial = SimState::new(&mesh, a0);
    let observe = |s: &SimState, rep: Option<&StepReport>| -> Result<(), AppError> {
        if rep.is_some() {
            let adv = CurveAdvector::new(&mesh, &prev, &s.velocity, cfg.sim.dt)
                .map_err(|source| AppError::Curve { id: 0, source })?;
            for (id, c) in curves.iter_mut().enumerate() {
                *c = adv.advect(c).map_err(|source| AppError::Curve { id, source })?;
            }
            prev = s.velocity.clone();
        }
        let (energy, div) = match rep {
            Some(r) => (r.energy, r.max_divergence),
            None => (crate::dynamics::kinetic_energy(&mesh, &s.velocity), crate::fields::max_divergence(&mesh, &s.velocity)),
        };
        let iters = rep.map_or(0, |r| r.newton_iters);
        writeln!(out.energy, "{},{},{},{},{}", s.step, fmt17(s.time), fmt17(energy), fmt17(div), iters)
            .map_err(io_err(&out.energy_path))?;
        for (id, c) in curves.iter().enumerate() {
            let v = circulation(&mesh, &s.velocity, c).map_err(|source| AppError::Curve { id, source })?;
            writeln!(out.circulation, "{},{},{},{},{}", s.step, fmt17(s.time), id, fmt17(v), c.support_size())
                .map_err(io_err(&out.circulation_path))?;
        }
        if s.step % every == 0 {
            let p = dir.join(format!("frame_{:06}.txt", s.step));
            write_frame(&p, &mesh, s)?;
            frames += 1;
        }
        Ok(())
    };
    let (_, summary) = run(&mut integrator, initial, cfg.sim.steps, observe)?;
    out.energy.flush().map_err(io_err(&out.energy_path))?;
    out.circulation.flush().map_err(io_err(&out.circulation_path))?;
    Ok(RunReport { summary, frames, output_dir: dir.clone() })
}

/// Field snapshot; see `docs/formats.md`.
pub fn frame_text(mesh: &MeshGeometry, s: &SimState) -> String {
    let mut t = String::new();
    t.push_str("stochflow-frame 1\n");
    t.push_str(&format!("step {}\ntime {}\n", s.step, fmt17(s.time)));
    t.push_str(&format!("faces {}\n", mesh.face_count()));
    for (face, f) in mesh.faces().iter().zip(&s.velocity.flux) {
        t.push_str(&format!("{} {} {}\n", face.cells[0], face.cells[1], fmt17(*f)));
    }
    t.push_str(&format!("cells {}\n", mesh.cell_count()));
    for p in &s.pressure {
        t.push_str(&fmt17(*p));
        t.push('\n');
    }
    let omega = dec_vorticity(mesh, &s.velocity);
    t.push_str(&format!("hinges {}\n", omega.len()));
    for (h, w) in mesh.hinges().iter().zip(omega) {
        t.push_str(&format!("{} {} {} {}\n", fmt17(h.point.x), fmt17(h.point.y), fmt17(h.point.z), fmt17(w)));
    }
    t
}

pub fn write_frame(path: &Path, mesh: &MeshGeometry, s: &SimState) -> Result<(), AppError> {
    fs::write(path, frame_text(mesh, s)).map_err(io_err(path))
}

/// Human-readable summary of a mesh file that built successfully.
pub fn check_mesh(path: &Path) -> Result<String, AppError> {
    let mesh = read_mesh_file(path)?.build()?;
    let q: MeshQuality = mesh.quality();
    Ok(format!(
        "dimension {}\nnodes {}\ncells {}\ninterior faces {}\nboundary faces {}\nhinges {}\ncorner triples {}\n\
         total volume {}\ncell volume range {} .. {}\nmin dual length {}\nhodge ratio range {} .. {}\n",
        mesh.dim(),
        mesh.node_count(),
        mesh.cell_count(),
        mesh.face_count(),
        mesh.boundary_faces().len(),
        mesh.hinges().len(),
        mesh.triples().len(),
        fmt17(q.total_volume),
        fmt17(q.min_volume),
        fmt17(q.max_volume),
        fmt17(q.min_dual_length),
        fmt17(q.min_hodge),
        fmt17(q.max_hodge),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::config::parse_config_str;
    use crate::mesh::{parse_mesh_file, write_mesh_file, MeshError, MeshFile, Vec3};

    fn temp_dir(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("stochflow-run-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn uniform_flow_run_writes_constant_energy() {
        let dir = temp_dir("uniform");
        let text = "mesh.nx = 6\nmesh.h = 0.5\nscenario.name = uniform_flow\nsim.steps = 100\n\
                    output.every = 50\ncurve.N = 1\ncurve.0.cells = 0, 1, 2, 3, 4, 5\n";
        let cfg = parse_config_str(text, &dir).unwrap();
        let rep = simulate(&cfg).unwrap();
        assert_eq!(rep.frames, 3);
        assert_eq!(rep.summary.steps, 100);
        let energy = fs::read_to_string(dir.join("out/energy.csv")).unwrap();
        let rows: Vec<&str> = energy.lines().collect();
        assert_eq!(rows[0], "step,time,kinetic_energy,max_divergence,newton_iters");
        assert_eq!(rows.len(), 102);
        let e: Vec<f64> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect();
        assert!(e.iter().all(|v| (v - e[0]).abs() <= 1e-12 * e[0]));
        assert!(rows[2].ends_with(",1"));
        let circ = fs::read_to_string(dir.join("out/circulation.csv")).unwrap();
        assert_eq!(circ.lines().count(), 102);
        assert!(dir.join("out/frame_000100.txt").is_file());
        let resolved = fs::read_to_string(dir.join("out/resolved_config.txt")).unwrap();
        assert_eq!(parse_config_str(&resolved, &dir).unwrap(), cfg);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn zero_steps_write_initial_rows_only() {
        let dir = temp_dir("zero");
        let cfg = parse_config_str("mesh.nx = 4\nsim.steps = 0\n", &dir).unwrap();
        simulate(&cfg).unwrap();
        let energy = fs::read_to_string(dir.join("out/energy.csv")).unwrap();
        assert_eq!(energy.lines().count(), 2);
        assert!(energy.lines().nth(1).unwrap().starts_with("0,0.0000000000000000e0,"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn runs_are_bit_identical() {
        let dir = temp_dir("determinism");
        let text = "mesh.nx = 8\nsim.steps = 5\nscenario.a = 0.6\nscenario.d = 1.6\noutput.every = 5\n\
                    curve.N = 1\ncurve.0.cells = 9, 10, 18, 17\n";
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let cfg = parse_config_str(&format!("{text}output.dir = {run}\n"), &dir).unwrap();
            simulate(&cfg).unwrap();
            let read = |f: &str| fs::read(dir.join(run).join(f)).unwrap();
            outputs.push((read("energy.csv"), read("circulation.csv"), read("frame_000005.txt")));
        }
        assert_eq!(outputs[0], outputs[1]);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn frame_layout() {
        let m = build_regular_grid(3, 3, 1.0, crate::mesh::Boundary::Periodic).unwrap();
        let s = SimState::new(&m, crate::fields::VelocityField::zeros(&m));
        let t = frame_text(&m, &s);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "stochflow-frame 1");
        assert_eq!(lines[3], format!("faces {}", m.face_count()));
        assert_eq!(lines.len(), 4 + m.face_count() + 1 + m.cell_count() + 1 + m.hinges().len());
    }

    #[test]
    fn check_mesh_reports_and_rejects() {
        let dir = temp_dir("check");
        let good = MeshFile {
            dim: 2,
            nodes: vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.5, 0.8, 0.0), Vec3::new(0.5, -0.8, 0.0)],
            cells: vec![vec![0, 1, 2], vec![1, 0, 3]],
        };
        let p = dir.join("good.mesh");
        fs::write(&p, write_mesh_file(&good)).unwrap();
        let text = check_mesh(&p).unwrap();
        assert!(text.contains("cells 2\n"));
        let mut bad = good.clone();
        bad.nodes[2] = Vec3::new(0.5, 0.1, 0.0);
        bad.nodes[3] = Vec3::new(0.5, -0.1, 0.0);
        let q = dir.join("bad.mesh");
        fs::write(&q, write_mesh_file(&bad)).unwrap();
        assert_eq!(parse_mesh_file(&fs::read_to_string(&q).unwrap()).unwrap(), bad);
        match check_mesh(&q) {
            Err(AppError::Mesh(MeshError::NonDelaunay { pairs, .. })) => assert_eq!((pairs[0].0, pairs[0].1), (0, 1)),
            other => panic!("{other:?}"),
        }
        fs::remove_dir_all(&dir).unwrap();
    }
}
