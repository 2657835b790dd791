use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ifsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifsnet")).args(args).output().unwrap()
}

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.cfg"))
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const TRIANGLE: &str = "
[space]
box = 0 1 0 1
[system]
mode = ifs
[map.1]
x = 0.5*x
y = 0.5*y
[map.2]
x = 0.5*x + 0.5
y = 0.5*y
[map.3]
x = 0.5*x + 0.25
y = 0.5*y + 0.5
[run]
delta = 0.05
theta = 0.5
[output]
path = out/triangle.pgm
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn lipschitz_prints_the_constant() {
    let o = ifsnet(&["lipschitz", &example("maple")]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.8000000000");
}

#[test]
fn plan_chooses_epsilon_iterations_and_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.cfg", TRIANGLE);
    let o = ifsnet(&["plan", &cfg]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    // ε = (1-α)θδ/5 = 0.0025, N = ceil(log(0.025/√2)/log 0.5) = 6.
    assert!(text.contains("planned_epsilon: 2.500000e-3"), "{text}");
    assert!(text.contains("iterations: 6\n"), "{text}");
    assert!(text.contains("n: 566\n"), "{text}");
}

#[test]
fn render_writes_image_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.cfg", &TRIANGLE.replace("delta = 0.05\ntheta = 0.5", "iterations = 8"));
    fs::create_dir(dir.path().join("out")).unwrap();
    let text = TRIANGLE.replace("delta = 0.05\ntheta = 0.5", "iterations = 8").replace("[run]", "[net]\nn = 32\n[run]");
    fs::write(&cfg, text).unwrap();
    let report = dir.path().join("report.txt");
    let o = ifsnet(&["render", &cfg, "--report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    // The output path in the config is relative to the config file.
    let image = fs::read(dir.path().join("out/triangle.pgm")).unwrap();
    assert!(image.starts_with(b"P5\n33 33\n255\n"));
    assert_eq!(image.len(), 13 + 33 * 33);
    let r = fs::read_to_string(report).unwrap();
    assert!(r.contains("mode: ifs\n"));
    assert!(r.contains("alpha: 0.5000000000\n"));
    assert!(r.lines().any(|l| l.starts_with("stop_reason: ")));
    assert_eq!(stdout(&o).lines().next(), Some("mode: ifs"));

    let inverted = dir.path().join("inv.pgm");
    let o = ifsnet(&["render", &cfg, "--invert", "--output", inverted.to_str().unwrap()]);
    assert!(o.status.success());
    let inv = fs::read(inverted).unwrap();
    assert!(image[13..].iter().zip(&inv[13..]).all(|(a, b)| a + b == 255));
}

#[test]
fn fuzzy_backends_agree_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(example("quarters")).unwrap().replace("n = 200", "n = 24");
    let cfg = write(dir.path(), "q.cfg", &text);
    let mut images = Vec::new();
    for b in ["ram", "file", "direct"] {
        let out = dir.path().join(format!("{b}.pgm"));
        let o = ifsnet(&["render", &cfg, "--backend", b, "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{b}: {o:?}");
        assert!(stdout(&o).contains(&format!("backend: {b}\n")));
        images.push(fs::read(out).unwrap());
    }
    assert_eq!(images[0], images[1]);
    assert_eq!(images[0], images[2]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.cfg", &TRIANGLE.replace("0.5*y + 0.5", "0.5*y +"));
    let o = ifsnet(&["render", &broken]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 14"));

    let expanding = write(dir.path(), "big.cfg", &TRIANGLE.replace("x = 0.5*x + 0.5", "x = 1.5*x - 0.2"));
    assert_eq!(ifsnet(&["plan", &expanding]).status.code(), Some(2));
    assert_eq!(ifsnet(&["render", &expanding]).status.code(), Some(2));
    assert_eq!(ifsnet(&["lipschitz", &expanding]).status.code(), Some(2));

    let starved = write(
        dir.path(),
        "starved.cfg",
        &TRIANGLE.replace("theta = 0.5", "theta = 0.5\nbudget = 10\ninitial = 0 0 ; 1 1 ; 0.5 0.5 ; 0.2 0.7"),
    );
    let o = ifsnet(&["render", &starved, "--output", dir.path().join("x.pgm").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{o:?}");

    assert_eq!(ifsnet(&["render", &example("sierpinski"), "--backend", "gpu"]).status.code(), Some(1));
}

#[test]
fn validate_reports_admissibility() {
    let o = ifsnet(&["validate", &example("fuzzy_gifs_square")]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("alpha: 0.77"), "{text}");
    assert!(text.trim_end().ends_with("ok"));
}
