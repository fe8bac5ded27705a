use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::driver::config::SimulationConfig;
use crate::driver::metric::error_metric;
use crate::driver::run::{Simulation, TimeSeriesRecord};
use crate::error::{Error, Result};
use crate::hierarchy::{HierarchicalMesh, HierarchicalSpace};
use crate::timestep::State;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Legacy VTK structured-points raster of a field sampled on an
/// `n x n` grid covering the domain.
pub fn vtk_raster(space: &HierarchicalSpace, u: &[f64], n: usize, time: f64) -> Result<String> {
    let g = space.mesh().geometry();
    let (dx, dy) = (g.extent(0) / (n - 1) as f64, g.extent(1) / (n - 1) as f64);
    let points: Vec<[f64; 2]> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| {
            // exact end points avoid rounding just outside the domain
            let x = if i + 1 == n { g.max[0] } else { g.min[0] + i as f64 * dx };
            let y = if j + 1 == n { g.max[1] } else { g.min[1] + j as f64 * dy };
            [x, y]
        })
        .collect();
    let values = space.eval_field(u, &points, 0)?;
    let mut s = String::with_capacity(24 * n * n + 256);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "phase field u at t = {time:.10e}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {n} {n} 1");
    let _ = writeln!(s, "ORIGIN {:e} {:e} 0", g.min[0], g.min[1]);
    let _ = writeln!(s, "SPACING {dx:e} {dy:e} 1");
    let _ = writeln!(s, "POINT_DATA {}", n * n);
    let _ = writeln!(s, "SCALARS u double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for fp in values {
        let _ = writeln!(s, "{:.10e}", fp.value);
    }
    Ok(s)
}

/// Coefficient file: `# step`, `# time` headers, then one `u v` pair per
/// active function.
pub fn coefficients_text(step: usize, time: f64, state: &State) -> String {
    let mut s = String::with_capacity(50 * state.len() + 64);
    let _ = writeln!(s, "# step {step}");
    let _ = writeln!(s, "# time {time:.17e}");
    for (u, v) in state.u.iter().zip(&state.v) {
        let _ = writeln!(s, "{u:.17e} {v:.17e}");
    }
    s
}

/// Parse a coefficient file into `(step, time, state)`.
pub fn parse_coefficients(text: &str) -> Result<(usize, f64, State)> {
    let mut step = None;
    let mut time = None;
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse("coefficient file", format!("line {}: {m}", ln + 1));
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match (it.next(), it.next()) {
                (Some("step"), Some(x)) => step = Some(x.parse().map_err(|_| bad("invalid step"))?),
                (Some("time"), Some(x)) => time = Some(x.parse().map_err(|_| bad("invalid time"))?),
                _ => {}
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let mut num = || -> Result<f64> {
            it.next()
                .ok_or_else(|| bad("expected two values"))?
                .parse()
                .map_err(|_| bad("invalid number"))
        };
        u.push(num()?);
        v.push(num()?);
    }
    let step = step.ok_or_else(|| Error::parse("coefficient file", "missing `# step` header"))?;
    let time = time.ok_or_else(|| Error::parse("coefficient file", "missing `# time` header"))?;
    Ok((step, time, State::new(u, v)?))
}

/// Paths of the snapshot files of one step.
pub fn snapshot_paths(dir: &Path, step: usize) -> [PathBuf; 3] {
    [
        dir.join(format!("field_{step:06}.vtk")),
        dir.join(format!("mesh_{step:06}.txt")),
        dir.join(format!("coef_{step:06}.txt")),
    ]
}

pub fn write_snapshot(dir: &Path, sim: &Simulation) -> Result<()> {
    let [vtk, mesh, coef] = snapshot_paths(dir, sim.steps());
    let res = sim.config().raster_resolution;
    write_file(&vtk, &vtk_raster(sim.space(), &sim.state().u, res, sim.time())?)?;
    write_file(&mesh, &sim.space().mesh().dump())?;
    write_file(&coef, &coefficients_text(sim.steps(), sim.time(), sim.state()))
}

/// Snapshot read back from a run directory.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub space: HierarchicalSpace,
    pub state: State,
}

pub fn read_snapshot(dir: &Path, step: usize) -> Result<Snapshot> {
    let [_, mesh, coef] = snapshot_paths(dir, step);
    let mtext = fs::read_to_string(&mesh).map_err(|e| Error::io(&mesh, e))?;
    let ctext = fs::read_to_string(&coef).map_err(|e| Error::io(&coef, e))?;
    let space = HierarchicalSpace::new(HierarchicalMesh::from_dump(&mtext)?, true)?;
    let (s, time, state) = parse_coefficients(&ctext)?;
    space.check_len(&state.u)?;
    Ok(Snapshot {
        step: s,
        time,
        space,
        state,
    })
}

/// Steps with a coefficient snapshot in `dir`, ascending.
pub fn list_snapshots(dir: &Path) -> Result<Vec<usize>> {
    let mut steps = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(n) = name.strip_prefix("coef_").and_then(|r| r.strip_suffix(".txt")) {
            if let Ok(k) = n.parse() {
                steps.push(k);
            }
        }
    }
    steps.sort_unstable();
    Ok(steps)
}

/// Error of a run against a reference run at every common snapshot:
/// `(step, time, error)`.
pub fn compare_runs(run: &Path, reference: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let ours = list_snapshots(run)?;
    let theirs = list_snapshots(reference)?;
    let mut out = Vec::new();
    for step in ours.into_iter().filter(|s| theirs.contains(s)) {
        let a = read_snapshot(run, step)?;
        let b = read_snapshot(reference, step)?;
        let err = error_metric(&a.space, &a.state.u, &b.space, &b.state.u)?;
        out.push((step, a.time, err));
    }
    Ok(out)
}

/// CSV time-series writer flushed after every row.
pub struct TimeSeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TimeSeriesWriter {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path,
        };
        w.line(TimeSeriesRecord::CSV_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, r: &TimeSeriesRecord) -> Result<()> {
        self.line(&r.csv_row())
    }
}

pub fn write_manifest(dir: &Path, config: &SimulationConfig) -> Result<()> {
    write_file(&dir.join(MANIFEST_FILE), &config.to_toml()?)
}

/// Write the CSV time series, manifest and snapshots of a finished set of
/// records.
pub fn write_outputs(dir: &Path, sim: &Simulation, records: &[TimeSeriesRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_manifest(dir, sim.config())?;
    let mut w = TimeSeriesWriter::create(dir.join(TIMESERIES_FILE))?;
    for r in records {
        w.write(r)?;
    }
    write_snapshot(dir, sim)
}

/// Outcome of a complete run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub simulation: Simulation,
    pub records: Vec<TimeSeriesRecord>,
}

/// Run a configuration to `t_end`. With an output directory the manifest,
/// time series and snapshots are written as the run proceeds; on failure
/// the rows written so far remain on disk.
pub fn run(config: SimulationConfig, output: Option<&Path>) -> Result<RunSummary> {
    let mut sim = Simulation::new(config)?;
    let mut writer = match output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write_manifest(dir, sim.config())?;
            write_snapshot(dir, &sim)?;
            Some(TimeSeriesWriter::create(dir.join(TIMESERIES_FILE))?)
        }
        None => None,
    };
    let n = sim.config().num_steps();
    let every = sim.config().output_every;
    let mut records = Vec::with_capacity(n);
    for k in 1..=n {
        let rec = match sim.advance() {
            Ok(r) => r,
            Err(e) => {
                log::error!("step {k} failed at t = {:.6}: {e}", sim.time());
                return Err(e);
            }
        };
        log::info!(
            "step {} t={:.4} dofs={} newton={} adapt={} energy={:.6e}",
            rec.step,
            rec.time,
            rec.dofs,
            rec.newton_iters,
            rec.adapt_iters,
            rec.energy
        );
        if let Some(w) = writer.as_mut() {
            w.write(&rec)?;
        }
        if let Some(dir) = output {
            if (every > 0 && k % every == 0) || k == n {
                write_snapshot(dir, &sim)?;
            }
        }
        records.push(rec);
    }
    Ok(RunSummary {
        simulation: sim,
        records,
    })
}
