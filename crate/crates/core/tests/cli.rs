use std::path::Path;
use std::process::{Command, Output};

use gknock::io::{read_table, write_table_file};
use gknock::pipeline::{select_in_memory, SelectionOptions, StatisticConfig};
use gknock::simulate::{generate, make_covariance, SimDesign};
use gknock::{GroupPartition, Method};
use nalgebra::DMatrix;

fn gknock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gknock"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_design() -> SimDesign {
    SimDesign {
        n: 150,
        m: 6,
        group_size: 3,
        k: 2,
        seed: 3,
        ..SimDesign::default()
    }
}

fn write_dataset(dir: &Path, design: &SimDesign) -> (DMatrix<f64>, Vec<f64>, Vec<String>) {
    let sigma = make_covariance(design).unwrap();
    let data = generate(design, &sigma).unwrap();
    let names: Vec<String> = (0..design.p()).map(|i| format!("f{i}")).collect();
    write_table_file(&dir.join("x.csv"), &names, &data.x).unwrap();
    let y = DMatrix::from_column_slice(data.y.len(), 1, &data.y);
    write_table_file(&dir.join("y.csv"), &["y".to_string()], &y).unwrap();
    let mut map = String::from("feature,group\n");
    for (i, name) in names.iter().enumerate() {
        map.push_str(&format!("{name},g{}\n", i / design.group_size));
    }
    std::fs::write(dir.join("groups.csv"), map).unwrap();
    (data.x, data.y, names)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(gknock(&["--help"]).status.code(), Some(0));
    assert_eq!(gknock(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(gknock(&[]).status.code(), Some(1));
    assert_eq!(gknock(&["simulate", "--method", "forest"]).status.code(), Some(1));
}

#[test]
fn hypergeom_subcommand() {
    let out = gknock(&["hypergeom", "--successes", "21", "--failures", "85", "--draws", "41", "--threshold", "12"]);
    assert_eq!(out.status.code(), Some(0));
    let p: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((p - 0.04673).abs() < 5e-5);
    let out = gknock(&["hypergeom", "--successes", "2", "--failures", "2", "--draws", "9", "--threshold", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulation_output_is_reproducible_and_schedule_free() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "n = 120\nm = 4\ngroup_size = 3\nk = 1\nmethod = gknock\nepochs = 10\nreplications = 3\n",
    )
    .unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let status = gknock(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(status.status.code(), Some(0), "{}", stderr(&status));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "replicate,seed,method,n_selected,fdp,tpr,tau");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("0,1,gknock,"));
    assert!(lines[4].starts_with("aggregate,,gknock,"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "n = 100\nm = 3\ngroup_size = 2\nk = 1\nmethod = gknock\nreplications = 5\nseed = 40\n").unwrap();
    let out = dir.path().join("r.csv");
    let status = gknock(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "group_lcd",
        "--reps",
        "2",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(0), "{}", stderr(&status));
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,7,group_lcd,"));
    assert!(lines[2].starts_with("1,8,group_lcd,"));
}

#[test]
fn bad_config_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "n = 100\nq = often\n").unwrap();
    let out = gknock(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2:"), "{}", stderr(&out));
}

#[test]
fn csv_round_trip_preserves_every_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (x, _, names) = write_dataset(dir.path(), &small_design());
    let table = read_table(&dir.path().join("x.csv")).unwrap();
    assert_eq!(table.names, names);
    assert_eq!(table.values, x);
}

#[test]
fn cli_selection_matches_the_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let design = small_design();
    let (x, y, _) = write_dataset(dir.path(), &design);
    let report = dir.path().join("selection.csv");
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = gknock(&[
        "select",
        "--x",
        &p("x.csv"),
        "--y",
        &p("y.csv"),
        "--groups",
        &p("groups.csv"),
        "--method",
        "group_lcd",
        "--q",
        "0.3",
        "--seed",
        "5",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let opts = SelectionOptions {
        q: 0.3,
        seed: 5,
        statistic: StatisticConfig {
            method: Method::GroupLcd,
            ..StatisticConfig::default()
        },
        ..SelectionOptions::default()
    };
    let part = GroupPartition::contiguous(design.m, design.group_size).unwrap();
    let expected = select_in_memory(&x, &y, &part, &opts).unwrap();

    let text = std::fs::read_to_string(report).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("group,w,selected"));
    for (j, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[0], format!("g{j}"));
        assert_eq!(fields[1].parse::<f64>().unwrap(), expected.w[j]);
        assert_eq!(fields[2] == "true", expected.selected.contains(&j));
    }
}

#[test]
fn knockoffs_subcommand_writes_one_column_per_feature() {
    let dir = tempfile::tempdir().unwrap();
    let design = small_design();
    write_dataset(dir.path(), &design);
    let out_path = dir.path().join("xk.csv");
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let out = gknock(&[
        "knockoffs",
        "--x",
        &p("x.csv"),
        "--groups",
        &p("groups.csv"),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = read_table(&out_path).unwrap();
    assert_eq!(table.values.shape(), (design.n, design.p()));
    assert_eq!(table.names[0], "f0_knockoff");
}

#[test]
fn malformed_inputs_are_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let design = small_design();
    write_dataset(dir.path(), &design);
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let text = std::fs::read_to_string(dir.path().join("x.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[4] = lines[4].replacen(',', ",oops,", 1);
    std::fs::write(dir.path().join("bad_x.csv"), lines.join("\n")).unwrap();
    let out = gknock(&["select", "--x", &p("bad_x.csv"), "--y", &p("y.csv"), "--groups", &p("groups.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":5:"), "{}", stderr(&out));

    let map = std::fs::read_to_string(dir.path().join("groups.csv")).unwrap();
    let short: Vec<&str> = map.lines().filter(|l| !l.starts_with("f7,")).collect();
    std::fs::write(dir.path().join("short_groups.csv"), short.join("\n")).unwrap();
    let out = gknock(&["select", "--x", &p("x.csv"), "--y", &p("y.csv"), "--groups", &p("short_groups.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("f7"), "{}", stderr(&out));

    let constant = "a,b\n1,2\n1,3\n1,5\n";
    std::fs::write(dir.path().join("const.csv"), constant).unwrap();
    std::fs::write(dir.path().join("const_groups.csv"), "feature,group\na,1\nb,2\n").unwrap();
    let out = gknock(&["knockoffs", "--x", &p("const.csv"), "--groups", &p("const_groups.csv")]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
