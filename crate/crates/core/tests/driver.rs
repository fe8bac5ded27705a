use std::fs;

use thbch::driver::{
    compare_runs, initial_condition, list_snapshots, parse_coefficients, read_snapshot, run, vtk_raster,
    MANIFEST_FILE, TIMESERIES_FILE,
};
use thbch::projection::{l2_project, refine_transfer};
use thbch::{error_metric, Cell, Error, HierarchicalMesh, HierarchicalSpace, Rect, Simulation, SimulationConfig};

fn small_config() -> SimulationConfig {
    SimulationConfig {
        levels: 2,
        lambda: 2.5 / 64.0,
        dt: 1e-3,
        t_end: 3e-3,
        seed: 3,
        perturbation: 0.05,
        ..Default::default()
    }
}

#[test]
fn config_round_trip_and_validation() {
    let cfg = small_config();
    let text = cfg.to_toml().unwrap();
    let back = SimulationConfig::from_toml_str(&text).unwrap();
    assert_eq!(back.mu(), 2);
    assert_eq!(back.lambda, cfg.lambda);
    assert_eq!(back.seed, 3);
    assert!(SimulationConfig::from_toml_str("nonsense = 1").is_err());
    assert!(SimulationConfig::from_toml_str("schema_version = 2").is_err());
    assert!(SimulationConfig::from_toml_str("degree = 1").is_err());
    assert!(SimulationConfig::from_toml_str("base_elements_x = 2").is_err());
    assert!(SimulationConfig::from_toml_str("dt = 0.0").is_err());
    assert!(SimulationConfig::from_toml_str("rho_inf = 2.0").is_err());
    let partial = SimulationConfig::from_toml_str("levels = 3\nindicator = \"gradient\"\n").unwrap();
    assert_eq!(partial.levels, 3);
    assert_eq!(partial.num_steps(), 1000);
    assert!((partial.finest_h() - 1.0 / 16.0).abs() < 1e-15);
}

#[test]
fn initial_condition_is_seeded_and_bounded() {
    let cfg = SimulationConfig { mean: 0.2, ..small_config() };
    let space = HierarchicalSpace::new(thbch::driver::initial_mesh(&cfg).unwrap(), true).unwrap();
    let a = initial_condition(&cfg, &space).unwrap();
    let b = initial_condition(&cfg, &space).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|x| (x - 0.2).abs() <= 0.05 + 1e-12));
    let c = initial_condition(&SimulationConfig { seed: 4, ..cfg }, &space).unwrap();
    assert_ne!(a, c);
}

#[test]
fn runs_are_deterministic() {
    let a = run(small_config(), None).unwrap();
    let b = run(small_config(), None).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.simulation.state(), b.simulation.state());
    assert_eq!(a.records.len(), 3);
    for (k, r) in a.records.iter().enumerate() {
        assert_eq!(r.step, k + 1);
        assert!((r.time - (k + 1) as f64 * 1e-3).abs() < 1e-15);
        assert_eq!(r.active_cells_per_level.iter().sum::<usize>(), a.simulation.space().cells().len());
    }
}

#[test]
fn single_step_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimulationConfig {
        t_end: 1e-3,
        raster_resolution: 8,
        ..small_config()
    };
    let summary = run(cfg, Some(dir.path())).unwrap();
    assert_eq!(summary.records.len(), 1);
    let csv = fs::read_to_string(dir.path().join(TIMESERIES_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    assert!(lines[1].starts_with("1,"));
    let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    let back = SimulationConfig::from_toml_str(&manifest).unwrap();
    assert_eq!(back.t_end, 1e-3);
    assert_eq!(list_snapshots(dir.path()).unwrap(), vec![0, 1]);
    let snap = read_snapshot(dir.path(), 1).unwrap();
    assert_eq!(snap.step, 1);
    assert_eq!(&snap.state, summary.simulation.state());
    let vtk = fs::read_to_string(dir.path().join("field_000001.vtk")).unwrap();
    assert!(vtk.contains("DIMENSIONS 8 8 1"));
    assert_eq!(vtk.lines().count(), 10 + 64);
    // a run compared with itself has zero error everywhere
    for (_, _, e) in compare_runs(dir.path(), dir.path()).unwrap() {
        assert_eq!(e, 0.0);
    }
}

#[test]
fn error_metric_properties() {
    let m = HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 3, 0).unwrap();
    let coarse = HierarchicalSpace::new(m.clone(), true).unwrap();
    let mut m2 = m;
    m2.refine_cell(Cell::new(0, 1, 2)).unwrap();
    m2.refine_cell(Cell::new(1, 2, 4)).unwrap();
    let fine = HierarchicalSpace::new(m2, true).unwrap();
    let u = l2_project(&coarse, |x| (3.0 * x[0]).sin() + x[1]).unwrap();
    let w = refine_transfer(&u, &coarse, &fine).unwrap();
    assert!(error_metric(&coarse, &u, &fine, &w).unwrap() < 1e-13);
    let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
    assert!((error_metric(&coarse, &u, &coarse, &u2).unwrap() - 0.5).abs() < 1e-13);
    // homogeneous of degree zero
    let v = l2_project(&fine, |x| x[0] * x[1]).unwrap();
    let e1 = error_metric(&coarse, &u, &fine, &v).unwrap();
    let (us, vs): (Vec<f64>, Vec<f64>) = (u.iter().map(|x| 3.0 * x).collect(), v.iter().map(|x| 3.0 * x).collect());
    assert!((error_metric(&coarse, &us, &fine, &vs).unwrap() - e1).abs() < 1e-13);
    let zero = vec![0.0; fine.num_functions()];
    assert!(matches!(error_metric(&coarse, &u, &fine, &zero), Err(Error::UndefinedMetric)));
}

#[test]
fn coefficient_files_parse() {
    let (step, time, st) = parse_coefficients("# step 4\n# time 0.004\n1.0 0.5\n-1.0 0.25\n").unwrap();
    assert_eq!((step, time), (4, 0.004));
    assert_eq!(st.u, vec![1.0, -1.0]);
    assert_eq!(st.v, vec![0.5, 0.25]);
    assert!(parse_coefficients("# time 0\n1 2\n").is_err());
    assert!(parse_coefficients("# step 1\n# time 0\n1\n").is_err());
    assert!(parse_coefficients("# step 1\n# time 0\n1 x\n").is_err());
}

#[test]
fn raster_of_constant_field() {
    let s = HierarchicalSpace::new(HierarchicalMesh::uniform(2, [4, 4], Rect::UNIT, 1, 0).unwrap(), true).unwrap();
    let text = vtk_raster(&s, &vec![0.5; s.num_functions()], 5, 0.0).unwrap();
    let values: Vec<f64> = text.lines().skip(10).map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 25);
    assert!(values.iter().all(|v| (v - 0.5).abs() < 1e-14));
}

#[test]
fn uniform_run_never_adapts() {
    let cfg = SimulationConfig {
        adaptive: false,
        ..small_config()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let n0 = sim.space().num_functions();
    for _ in 0..3 {
        let r = sim.advance().unwrap();
        assert_eq!(r.adapt_iters, 0);
        assert_eq!(r.dofs, n0);
    }
}

#[test]
fn coarsening_start_is_respected() {
    let cfg = SimulationConfig {
        coarsen_start: 1.0,
        threshold: 0.99,
        ..small_config()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let n0 = sim.space().num_functions();
    for _ in 0..3 {
        assert_eq!(sim.advance().unwrap().dofs, n0);
    }
    let cfg = SimulationConfig {
        coarsen_start: 0.0,
        threshold: 0.99,
        ..small_config()
    };
    let mut sim = Simulation::new(cfg).unwrap();
    let r = sim.advance().unwrap();
    assert!(r.dofs < n0);
}
