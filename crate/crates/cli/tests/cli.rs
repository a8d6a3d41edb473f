use std::path::Path;
use std::process::{Command, Output};

use ldscope::{SectionId, SystemId};
use ldscope_cli::figures::{figure, ids, FIGURES};

fn ldscope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldscope"))
        .current_dir(dir)
        .env_remove("LDSCOPE_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn golden_parameter_table() {
    let expected = [
        "saddle-same-tau",
        "saddle-balanced",
        "nonlinear-saddle",
        "hopf-beta-neg",
        "hopf-beta-0",
        "hopf-beta-pos",
        "vdp-0.1",
        "vdp-0.5",
        "vdp-1.5",
        "vdp-3",
        "slow-manifold",
        "bead",
        "lienard",
        "duffing-conservative",
        "duffing-damped",
        "duffing-forced",
        "duffing-ueda",
        "dwell-sigma1-gamma0.1",
        "dwell-sigma1-gamma0.25",
        "dwell-sigma1-gamma1",
        "dwell-sigma2-gamma0.1",
        "dwell-sigma2-gamma0.25",
        "dwell-sigma2-gamma1",
        "dwell-sigma3",
    ];
    assert_eq!(ids().collect::<Vec<_>>(), expected);
    assert!(FIGURES.iter().all(|f| f.p == 0.5));

    let f = figure("saddle-same-tau").unwrap();
    assert_eq!((f.system, f.param("lambda"), f.param("mu"), f.tau_f, f.tau_b), (SystemId::LinearSaddle, Some(1.0), Some(2.0), 8.0, 8.0));
    let f = figure("saddle-balanced").unwrap();
    assert_eq!((f.param("lambda"), f.param("mu"), f.tau_f, f.tau_b), (Some(1.0), Some(2.0), 8.0, 4.346));

    let f = figure("nonlinear-saddle").unwrap();
    assert_eq!((f.system, f.tau_f, f.tau_b), (SystemId::NonlinearSaddle, 26.0, 25.0));

    for (id, beta) in [("hopf-beta-neg", -0.5), ("hopf-beta-0", 0.0), ("hopf-beta-pos", 0.5)] {
        let f = figure(id).unwrap();
        assert_eq!((f.system, f.param("beta"), f.param("sigma"), f.tau_f, f.tau_b), (SystemId::Hopf, Some(beta), Some(1.0), 8.0, 8.0));
    }
    for (id, mu) in [("vdp-0.1", 0.1), ("vdp-0.5", 0.5), ("vdp-1.5", 1.5), ("vdp-3", 3.0)] {
        let f = figure(id).unwrap();
        assert_eq!((f.system, f.param("mu"), f.tau_f, f.tau_b, f.escape_radius), (SystemId::Vanderpol, Some(mu), 50.0, 50.0, Some(20.0)));
    }

    let f = figure("slow-manifold").unwrap();
    assert_eq!((f.system, f.param("lambda"), f.param("mu"), f.tau_f), (SystemId::NonlinearSaddle, Some(-1.0), Some(-0.05), 5.0));
    let f = figure("bead").unwrap();
    assert_eq!((f.system, f.param("epsilon"), f.param("mu"), f.tau_f, f.tau_b), (SystemId::BeadHoop, Some(0.02), Some(2.3), 10.0, 10.0));
    let f = figure("lienard").unwrap();
    assert_eq!((f.system, f.param("mu"), f.tau_f, f.escape_radius), (SystemId::VdpLienard, Some(10.0), 50.0, Some(6.0)));

    let f = figure("duffing-conservative").unwrap();
    assert_eq!((f.param("delta"), f.param("gamma"), f.tau_f), (Some(0.0), Some(0.0), 20.0));
    let f = figure("duffing-damped").unwrap();
    assert_eq!((f.param("alpha"), f.param("beta"), f.param("delta"), f.param("gamma"), f.tau_f), (Some(1.0), Some(1.0), Some(0.3), Some(0.0), 25.0));
    let f = figure("duffing-forced").unwrap();
    assert_eq!((f.param("delta"), f.param("gamma"), f.param("omega"), f.tau_f), (Some(0.3), Some(0.5), Some(1.2), 20.0));
    let s = f.strobe.unwrap();
    assert_eq!((s.ic, s.periods, s.skip), ([1.0, 0.0], 15000, 100));
    let f = figure("duffing-ueda").unwrap();
    assert_eq!(
        (f.param("alpha"), f.param("beta"), f.param("delta"), f.param("gamma"), f.param("omega"), f.tau_b),
        (Some(0.0), Some(1.0), Some(0.05), Some(7.5), Some(1.0), 50.0)
    );
    let s = f.strobe.unwrap();
    assert_eq!((s.ic, s.periods, s.skip), ([1.0, 0.0], 15000, 100));

    for (id, sid, gamma) in [
        ("dwell-sigma1-gamma0.1", SectionId::Sigma1, 0.1),
        ("dwell-sigma1-gamma0.25", SectionId::Sigma1, 0.25),
        ("dwell-sigma1-gamma1", SectionId::Sigma1, 1.0),
        ("dwell-sigma2-gamma0.1", SectionId::Sigma2, 0.1),
        ("dwell-sigma2-gamma0.25", SectionId::Sigma2, 0.25),
        ("dwell-sigma2-gamma1", SectionId::Sigma2, 1.0),
        ("dwell-sigma3", SectionId::Sigma3, 0.25),
    ] {
        let f = figure(id).unwrap();
        let s = f.section.unwrap();
        assert_eq!((f.system, s.id, s.h0, f.param("gamma"), f.tau_f), (SystemId::DoubleWell2dof, sid, 0.05, Some(gamma), 15.0));
    }
    assert!(figure("dwell-sigma3").unwrap().section.unwrap().classify);
}

#[test]
fn every_figure_builds_a_valid_system() {
    for f in FIGURES {
        ldscope::SystemSpec::new(f.system, f.params).unwrap_or_else(|e| panic!("{}: {e}", f.id));
        assert!(f.x[0] < f.x[1] && f.y[0] < f.y[1], "{}", f.id);
    }
}

#[test]
fn both_horizons_zero_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ldscope(dir.path(), &["field", "--system", "hopf", "--tau-f", "0", "--tau-b", "0", "--grid", "[-1,1]x[-1,1]@5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau_f"), "{}", stderr(&o));
    assert!(!dir.path().join("field.ldf").exists());
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "system = \"hopf\"\ngrid = \"[-1,1]x[-1,1]@5\"\n\n[ld]\ntau_f = 0.0\ntau_b = 0.0\n",
    )
    .unwrap();
    let o = ldscope(dir.path(), &["field", "--config", "run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.toml:5:"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.toml"), "system = \"hopf\"\n\n[ld]\ntau = 8.0\ncolour = 1\n").unwrap();
    let o = ldscope(dir.path(), &["field", "--config", "bad.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:5:"), "{}", stderr(&o));

    std::fs::write(dir.path().join("param.toml"), "system = \"hopf\"\ngrid = \"[-1,1]x[-1,1]@5\"\n[params]\nbogus = 1.0\n").unwrap();
    let o = ldscope(dir.path(), &["field", "--config", "param.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("param.toml:4:"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "system = \"hopf\"\ngrid = \"[-1,1]x[-1,1]@5\"\n[params]\nbeta = 0.5\n[ld]\ntau_f = 0.0\ntau_b = 0.0\n",
    )
    .unwrap();
    let o = ldscope(dir.path(), &["field", "--config", "run.toml", "--tau-b", "2", "--param", "beta=-0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let field = ldscope::io::read_field(dir.path().join("field.ldf")).unwrap();
    assert_eq!(field.meta.ld.tau_b, 2.0);
    assert_eq!(field.meta.system.param("beta").unwrap(), -0.5);
}

#[test]
fn section_commands_require_the_double_well() {
    let dir = tempfile::tempdir().unwrap();
    let o = ldscope(
        dir.path(),
        &["section", "--system", "hopf", "--section", "sigma3", "--h0", "0.05", "--grid", "[-0.5,0.5]x[-0.5,0.5]@5"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("double_well_2dof"));
}

#[test]
fn unknown_figure_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ldscope(dir.path(), &["repro", "no-such-figure"]).status.code(), Some(2));
    assert_eq!(ldscope(dir.path(), &["field", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ldscope(dir.path(), &["field", "--system", "hopf", "--grid", "[-1,1]x[-1,1]@5", "--workers", "0"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.ldf"), b"XXXXjunk").unwrap();
    let o = ldscope(dir.path(), &["extract", "--input", "junk.ldf"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, w: &'static str| {
        vec!["field", "--system", "vanderpol", "--param", "mu=1.5", "--tau", "10", "--escape-radius", "20", "--grid", "[-4,4]x[-4,4]@41", "-o", out, "--workers", w]
    };
    assert!(ldscope(dir.path(), &args("one.ldf", "1")).status.success());
    assert!(ldscope(dir.path(), &args("four.ldf", "4")).status.success());
    let a = std::fs::read(dir.path().join("one.ldf")).unwrap();
    let b = std::fs::read(dir.path().join("four.ldf")).unwrap();
    assert_eq!(a, b);

    let o = Command::new(env!("CARGO_BIN_EXE_ldscope"))
        .current_dir(dir.path())
        .env("LDSCOPE_WORKERS", "3")
        .args(&args("env.ldf", "1")[..11])
        .arg("-o")
        .arg("env.ldf")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(dir.path().join("env.ldf")).unwrap(), a);
}

#[test]
fn every_command_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let o = ldscope(d, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    };
    ok(&["field", "--system", "linear_saddle", "--tau", "4", "--grid", "[-1,1]x[-1,1]@21", "--png", "f.png", "--csv", "f.csv"]);
    ok(&["extract", "-i", "field.ldf", "--operator", "laplacian", "--png", "r.png"]);
    ok(&["section", "--section", "sigma3", "--h0", "0.05", "--param", "gamma=0.25", "--tau-f", "5", "--tau-b", "0", "--grid", "[-0.55,0.55]x[-0.55,0.55]@11"]);
    ok(&["classify", "--section", "sigma3", "--h0", "0.05", "--param", "gamma=0.25", "--grid", "[-0.55,0.55]x[-0.55,0.55]@7"]);
    ok(&["strobe", "--system", "duffing", "--param", "gamma=0.5", "--ic", "1,0", "--periods", "20", "--skip", "10"]);
    for f in ["field.ldf", "f.png", "f.csv", "ridges.csv", "r.png", "section.ldf", "labels.csv", "strobe.csv"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let section = ldscope::io::read_field(d.join("section.ldf")).unwrap();
    assert!(section.meta.section.is_some());
    assert_eq!(std::fs::read_to_string(d.join("strobe.csv")).unwrap().lines().count(), 12);
}

#[test]
fn repro_writes_field_ridges_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = ldscope(dir.path(), &["repro", "saddle-balanced", "--resolution", "21", "--out-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    let field = ldscope::io::read_field(out.join("saddle-balanced.ldf")).unwrap();
    assert_eq!((field.meta.ld.p, field.meta.ld.tau_f, field.meta.ld.tau_b), (0.5, 8.0, 4.346));
    assert_eq!(field.meta.system.param("mu").unwrap(), 2.0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("saddle-balanced_params.json")).unwrap()).unwrap();
    assert_eq!(manifest["figure"]["params"]["lambda"], 1.0);
    assert_eq!(manifest["figure"]["tau_b"], 4.346);
    assert_eq!(manifest["grid"]["resolution"], serde_json::json!([21, 21]));
    for f in ["saddle-balanced_ridges_forward_gradient_norm.csv", "saddle-balanced_ridges_backward_gradient_norm.csv", "saddle-balanced.png"] {
        assert!(out.join(f).exists(), "{f}");
    }
}
