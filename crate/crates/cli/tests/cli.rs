use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crosspoint")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_prints_csv_with_header() {
    let o = run(&["solve", "--p", "2", "--cells", "8x8", "--subdomains", "2x2", "--iters", "3", "--no-timing"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("# seed=42 method=aux"));
    assert_eq!(lines[1], "iteration,error_linf,energy,elapsed_seconds");
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("3,") && lines[5].ends_with(','));
}

#[test]
fn solve_is_reproducible_without_timing() {
    let args = [
        "solve",
        "--p",
        "1.5",
        "--cells",
        "9x6",
        "--subdomains",
        "3x2",
        "--method",
        "complete",
        "--iters",
        "5",
        "--no-timing",
    ];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn config_file_and_flag_override() {
    let dir = std::env::temp_dir().join(format!("crosspoint-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "p = 2\ncells = 8x8\nsubdomains = 2x2\niters = 2\n").unwrap();
    let csv = dir.join("out.csv");
    let o = run(&["solve", "--config", cfg.to_str().unwrap(), "--iters", "4", "--csv-out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_required_key_exits_2() {
    let o = run(&["solve", "--cells", "8x8", "--subdomains", "2x2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing required key 'p'"));
}

#[test]
fn bad_values_exit_2() {
    assert_eq!(run(&["solve", "--p", "-1", "--cells", "8x8", "--subdomains", "2x2"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--p", "1", "--cells", "7x8", "--subdomains", "2x2"]).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--grids", "40", "--subdomains", "2x1"]).status.code(), Some(2));
}

#[test]
fn fixed_point_pass_and_fail() {
    let base = ["fixed-point", "--p", "2", "--cells", "8x8", "--subdomains", "2x2"];
    let o = run(&base);
    assert!(o.status.success());
    assert!(stdout(&o).contains("fixed point: pass"));
    let mut bad = base.to_vec();
    bad.extend(["--perturb", "0.01"]);
    let o = run(&bad);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("fixed point: FAIL"));
}

#[test]
fn degenerate_eigenvector_is_stationary() {
    let o = run(&["degenerate", "--iters", "5", "--init", "plus-one"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 6);
    let first = rows[0].split_once(',').unwrap().1;
    assert!(rows.iter().all(|r| r.split_once(',').unwrap().1 == first));
}

#[test]
fn sweep_reports_best_cell() {
    let o = run(&["sweep", "--grids", "4", "--subdomains", "2x1", "--p-range", "1:3:1", "--omega-range", "0:2:1"]);
    assert!(o.status.success());
    let all = format!("{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(all.contains("best: p=2 omega=2"), "{all}");
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with('#') && l.contains(',')).count(), 10);
}

#[test]
fn mono_reports_nodal_error() {
    let o = run(&["mono", "--cells", "8x8", "--extent", "4x4"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("max_nodal_error="));
}
