//! CSV, SVG and command-level behaviour of the front end.

use std::process::Command as Process;

use nijenhuis::flows::{AxisSpec, CotangentPoint, GridMeta, IntegratorSettings, SolutionGrid};
use nijenhuis::problem::{default_initial_point, e0, e2};
use nijenhuis_cli::gridcsv::{grid_csv_string, read_grid_csv};
use nijenhuis_cli::plot::render_svg;
use nijenhuis_cli::{execute, Command, Flags, ProblemConfig};

const E2: &str = r#"{
  "label": "E2", "n": 2, "sigma": ["u1", "u2 - 1/2*u1^2"],
  "initial": {"u": [0.2, 1.0], "p": [0.3, -0.2]},
  "grid": {"x": {"min": 0, "max": 1, "count": 11}, "t": [{"min": 0, "max": 0.5, "count": 6}]},
  "integrator": {"method": "rk4", "step": 1e-3},
  "seed": 7
}"#;

fn x2_config() -> String {
    E2.replace(r#""u2 - 1/2*u1^2""#, r#""u2""#)
        .replace(r#""E2""#, r#""X2""#)
}

fn write_config(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&std::ffi::OsStr]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_nijenhuis"))
        .args(args)
        .output()
        .unwrap()
}

fn tiny_grid() -> SolutionGrid {
    SolutionGrid {
        axes: vec![
            AxisSpec::new(0.0, 0.1, 2).unwrap(),
            AxisSpec::new(0.0, 0.3, 2).unwrap(),
        ],
        axis_names: vec!["x".into(), "t1".into()],
        n: 1,
        u: vec![
            vec![0.1],
            vec![1.0 / 3.0],
            vec![-2.5e-300],
            vec![std::f64::consts::PI],
        ],
        p: Some(vec![vec![1e300], vec![0.0], vec![-0.7], vec![f64::EPSILON]]),
        meta: GridMeta::default(),
        flow_generated: true,
    }
}

#[test]
fn two_by_two_lattice_gives_four_rows_of_four_columns() {
    let text = grid_csv_string(&tiny_grid()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,t1,u1,p1");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
    // x is the slowest index.
    assert!(lines[2].starts_with("0.0000000000000000e0,2.9999999999999999e-1,"));
    assert!(lines[3].starts_with("1.0000000000000001e-1,0.0000000000000000e0"));
}

#[test]
fn csv_round_trip_is_bit_exact() {
    let g = tiny_grid();
    let back = read_grid_csv(grid_csv_string(&g).unwrap().as_bytes()).unwrap();
    assert_eq!(back.axes, g.axes);
    assert_eq!(back.axis_names, g.axis_names);
    for (a, b) in back.u.iter().flatten().zip(g.u.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in back
        .p
        .unwrap()
        .iter()
        .flatten()
        .zip(g.p.unwrap().iter().flatten())
    {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let sys = e2();
    let axes = [
        AxisSpec::new(0.0, 1.0, 21).unwrap(),
        AxisSpec::new(0.0, 0.5, 11).unwrap(),
    ];
    let grid = sys
        .orbit_grid(
            &default_initial_point(2),
            &axes,
            &IntegratorSettings::default(),
        )
        .unwrap();
    let back = read_grid_csv(grid_csv_string(&grid).unwrap().as_bytes()).unwrap();
    assert_eq!(back.axes, grid.axes);
    assert_eq!(back.u, grid.u);
    assert_eq!(back.p, grid.p);
}

#[test]
fn reference_grid_has_5151_rows() {
    let sys = e2();
    let axes = [
        AxisSpec::new(0.0, 1.0, 101).unwrap(),
        AxisSpec::new(0.0, 0.5, 51).unwrap(),
    ];
    let grid = sys
        .orbit_grid(
            &default_initial_point(2),
            &axes,
            &IntegratorSettings::default(),
        )
        .unwrap();
    assert_eq!(grid_csv_string(&grid).unwrap().lines().count(), 5152);
}

#[test]
fn csv_rejects_shuffled_rows() {
    let text = grid_csv_string(&tiny_grid()).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(2, 3);
    assert!(read_grid_csv(lines.join("\n").as_bytes()).is_err());
    assert!(read_grid_csv("x,t1,v1\n0,0,0\n".as_bytes()).is_err());
}

fn polylines(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter_map(|l| l.split("points=\"").nth(1))
        .map(|rest| {
            rest.split('"')
                .next()
                .unwrap()
                .split(' ')
                .map(|pt| {
                    let (x, y) = pt.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn constant_grid_plots_horizontal_lines() {
    let sys = e2();
    let z0 = CotangentPoint::new(vec![0.2, 1.0], vec![0.0, 0.0]).unwrap();
    let axes = [
        AxisSpec::new(0.0, 1.0, 11).unwrap(),
        AxisSpec::new(0.0, 0.5, 3).unwrap(),
    ];
    let grid = sys
        .orbit_grid(&z0, &axes, &IntegratorSettings::default())
        .unwrap();
    let svg = render_svg(&grid, &[0, 2]).unwrap();
    let lines = polylines(&svg);
    assert_eq!(lines.len(), 4);
    for l in &lines {
        assert_eq!(l.len(), 11);
        assert!(l.iter().all(|p| p.1 == l[0].1));
    }
}

#[test]
fn e0_plots_straight_sloped_lines() {
    let sys = e0(2);
    let z0 = CotangentPoint::new(vec![0.1, -0.3], vec![0.4, 0.25]).unwrap();
    let axes = [
        AxisSpec::new(0.0, 1.0, 11).unwrap(),
        AxisSpec::new(0.0, 0.5, 3).unwrap(),
    ];
    let grid = sys
        .orbit_grid(&z0, &axes, &IntegratorSettings::default())
        .unwrap();
    let svg = render_svg(&grid, &[1]).unwrap();
    for l in polylines(&svg) {
        let slope = (l[10].1 - l[0].1) / (l[10].0 - l[0].0);
        assert!(slope.abs() > 1e-3);
        for p in &l {
            let expected = l[0].1 + slope * (p.0 - l[0].0);
            // Pixel coordinates are printed with two decimals.
            assert!((p.1 - expected).abs() < 0.02, "{p:?} vs {expected}");
        }
    }
    assert!(svg.contains("u1 @ t1=0.25"));
}

#[test]
fn svg_is_deterministic_and_checks_slices() {
    let sys = e2();
    let axes = [
        AxisSpec::new(0.0, 1.0, 11).unwrap(),
        AxisSpec::new(0.0, 0.5, 6).unwrap(),
    ];
    let grid = sys
        .orbit_grid(
            &default_initial_point(2),
            &axes,
            &IntegratorSettings::default(),
        )
        .unwrap();
    let a = render_svg(&grid, &[0, 5]).unwrap();
    let b = render_svg(&grid.clone(), &[0, 5]).unwrap();
    assert_eq!(a, b);
    let empty = render_svg(&grid, &[]).unwrap();
    assert!(polylines(&empty).is_empty());
    assert!(empty.contains("<g id=\"axes\""));
    assert!(render_svg(&grid, &[6]).is_err());
}

#[test]
fn verify_reports_are_pure() {
    let problem = ProblemConfig::from_json(E2).unwrap().validate().unwrap();
    let a = execute(Command::Verify, &problem, &Flags::default()).unwrap();
    let b = execute(Command::Verify, &problem, &Flags::default()).unwrap();
    assert_eq!(a, b);
    assert!(!a.failed);
    let report: serde_json::Value = serde_json::from_str(&a.body).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert!(report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["verdict"] == "pass"));
}

#[test]
fn verify_names_failing_checks_on_x2() {
    let problem = ProblemConfig::from_json(&x2_config())
        .unwrap()
        .validate()
        .unwrap();
    let a = execute(Command::Verify, &problem, &Flags::default()).unwrap();
    assert!(a.failed);
    let report: serde_json::Value = serde_json::from_str(&a.body).unwrap();
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["verdict"] == "fail")
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    for name in ["torsion", "benenti", "lifted_identities"] {
        assert!(failing.contains(&name), "{failing:?}");
    }
    assert!(!failing.contains(&"generating_identity"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let e2 = write_config(&dir, "e2.json", E2);
    let x2 = write_config(&dir, "x2.json", &x2_config());
    let bad = write_config(&dir, "bad.json", r#"{"n": 2, "sigma": ["u1", "u3"]}"#);
    let short = write_config(&dir, "short.json", r#"{"n": 3, "sigma": ["u1", "u2"]}"#);
    let garbage = write_config(&dir, "garbage.json", "{not json");

    let out = run(&["verify".as_ref(), e2.as_os_str()]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&["verify".as_ref(), x2.as_os_str()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"fail\""));
    for cfg in [&bad, &short, &garbage] {
        let out = run(&["verify".as_ref(), cfg.as_os_str()]);
        assert_eq!(out.status.code(), Some(2));
        assert!(!out.stderr.is_empty());
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["verify".as_ref(), missing.as_os_str()]).status.code(),
        Some(2)
    );
}

#[test]
fn binary_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let e2 = write_config(&dir, "e2.json", E2);
    let csv = dir.path().join("grid.csv");
    let svg = dir.path().join("plot.svg");
    let out = run(&[
        "evolve".as_ref(),
        e2.as_os_str(),
        "--out".as_ref(),
        csv.as_os_str(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let grid = read_grid_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(grid.len(), 66);

    let args = [
        "plot".as_ref(),
        e2.as_os_str(),
        "--input".as_ref(),
        csv.as_os_str(),
        "--slices".as_ref(),
        "".as_ref(),
        "--out".as_ref(),
        svg.as_os_str(),
    ];
    assert_eq!(run(&args).status.code(), Some(0));
    assert!(polylines(&std::fs::read_to_string(&svg).unwrap()).is_empty());

    let args = [
        "plot".as_ref(),
        e2.as_os_str(),
        "--slices".as_ref(),
        "0,9".as_ref(),
    ];
    assert_eq!(run(&args).status.code(), Some(2));

    for cmd in ["build-metric", "hierarchy", "residual"] {
        let out = run(&[cmd.as_ref(), e2.as_os_str()]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        let _: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    }
}

#[test]
fn direct_solve_from_a_curve() {
    let cfg = r#"{
      "n": 2, "sigma": ["u1", "u2 - 1/2*u1^2"],
      "initial": {"curve": ["1/10*x", "1 + 1/5*x"]},
      "grid": {"x": {"min": -1, "max": 1, "count": 201}, "t": [{"min": 0, "max": 0.05, "count": 2}]}
    }"#;
    let problem = ProblemConfig::from_json(cfg).unwrap().validate().unwrap();
    let a = execute(Command::SolveDirect, &problem, &Flags::default()).unwrap();
    let grid = read_grid_csv(a.body.as_bytes()).unwrap();
    assert!(grid.p.is_none());
    assert_eq!(grid.axis_names, ["x", "t1"]);
    assert!(grid.axes[1].count > 1);
    // A curve is not a cotangent point: evolve refuses it.
    assert!(execute(Command::Evolve, &problem, &Flags::default()).is_err());
}

#[test]
fn config_validation() {
    let bad_grid = E2.replace(r#""t": [{"min": 0, "max": 0.5, "count": 6}]"#, r#""t": []"#);
    assert!(ProblemConfig::from_json(&bad_grid)
        .unwrap()
        .validate()
        .is_err());
    let bad_tol = E2.replace(r#""step": 1e-3"#, r#""step": -1"#);
    assert!(ProblemConfig::from_json(&bad_tol)
        .unwrap()
        .validate()
        .is_err());
    let unknown = E2.replace(r#""seed": 7"#, r#""seed": 7, "extra": 1"#);
    assert!(ProblemConfig::from_json(&unknown).is_err());
    let short_u = E2.replace("[0.2, 1.0]", "[0.2]");
    assert!(ProblemConfig::from_json(&short_u)
        .unwrap()
        .validate()
        .is_err());
}

#[test]
fn shipped_configs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ProblemConfig::load(&path).unwrap().validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
