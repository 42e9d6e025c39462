use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dgflow::dg::FlowTrace;
use dgflow::io::{self, Scaling};
use dgflow::ImageGrid;

fn dgflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn slack(t: &FlowTrace) -> f64 {
    1e-8 * (1.0 + t.rows[0].energy.abs())
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {line:?}"))
        .parse()
        .unwrap()
}

const DENOISE: &[&str] = &[
    "denoise", "--sigma", "0.1", "--seed", "1", "--scheme", "gonzalez", "--tau", "2.5", "--alpha",
    "0.05", "--beta", "0.001",
];

#[test]
fn denoise_fixture_converges_with_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = DENOISE.to_vec();
    args.extend(["--output", "out.pgm", "--trace", "trace.csv"]);
    let o = dgflow(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("final_energy="), "{line}");
    let t = io::read_trace(dir.path().join("trace.csv")).unwrap();
    assert!(t.is_monotone(slack(&t)));
    assert_eq!(t.last().unwrap().step as f64, field(&line, "steps"));
    assert_eq!(t.last().unwrap().energy, field(&line, "final_energy"));
    let img = io::read_image(dir.path().join("out.pgm"), Scaling::Unit).unwrap();
    assert_eq!((img.nx(), img.ny(), img.channels()), (32, 32, 1));
}

#[test]
fn step_cap_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = DENOISE.to_vec();
    args.extend(["--max-steps", "3"]);
    let o = dgflow(dir.path(), &args);
    assert_eq!(code(&o), 2);
    assert_eq!(field(&stdout(&o), "steps"), 3.0);
}

#[test]
fn inpaint_without_mask_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(dir.path(), &["inpaint"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--mask"), "{}", stderr(&o));
}

#[test]
fn side_inputs_must_match_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &["fixture", "--output", "s.pgm", "--mask", "m.pgm"],
    );
    assert_eq!(code(&o), 0);
    for args in [
        &["denoise", "--mask", "m.pgm"][..],
        &["denoise", "--kernel", "box7"],
        &["deblur"],
        &["denoise", "--p", "0.5"],
        &["denoise", "--scheme", "bogus"],
        &["denoise", "--input", "missing.pgm"],
    ] {
        let o = dgflow(dir.path(), args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(stderr(&o).starts_with("error"), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn failing_stage_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.pgm"), "P5\n4 4\n255\n").unwrap();
    let o = dgflow(dir.path(), &["denoise", "--input", "bad.pgm"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("read-input"), "{}", stderr(&o));
    fs::write(dir.path().join("k.txt"), "1 1\n1 1\n").unwrap();
    let o = dgflow(dir.path(), &["deblur", "--kernel", "k.txt"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("read-kernel"), "{}", stderr(&o));
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(dir.path(), &["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("denoise-color"));
}

#[test]
fn deblurring_a_constant_image_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let c = ImageGrid::from_vec(16, 16, 1, vec![128.0 / 255.0; 256]).unwrap();
    io::write_image(dir.path().join("c.pgm"), &c, 255, Scaling::Unit).unwrap();
    let o = dgflow(
        dir.path(),
        &[
            "deblur", "--input", "c.pgm", "--kernel", "box7", "--output", "o.pgm",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        fs::read(dir.path().join("o.pgm")).unwrap(),
        fs::read(dir.path().join("c.pgm")).unwrap()
    );
}

#[test]
fn tvp_from_random_start_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &[
            "tvp", "--p", "0.8", "--init", "random", "--seed", "7", "--sigma", "0.05", "--trace",
            "t.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = io::read_trace(dir.path().join("t.csv")).unwrap();
    assert!(t.is_monotone(slack(&t)));
}

#[test]
fn color_denoising_runs_in_byte_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &[
            "denoise-color",
            "--sigma",
            "20",
            "--seed",
            "3",
            "--output",
            "c.ppm",
            "--trace",
            "t.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let img = io::read_image(dir.path().join("c.ppm"), Scaling::Byte).unwrap();
    assert_eq!(img.channels(), 3);
    let t = io::read_trace(dir.path().join("t.csv")).unwrap();
    assert!(t.is_monotone(slack(&t)));
}

fn summary(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("summary.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn compare_dg_against_small_step_euler() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &[
            "compare",
            "--model",
            "denoise",
            "--sigma",
            "0.1",
            "--seed",
            "1",
            "--max-steps",
            "20",
            "--run",
            "gonzalez:2.5",
            "--run",
            "euler:0.001",
            "--out-dir",
            "cmp",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let g = io::read_trace(dir.path().join("cmp/00-gonzalez.csv")).unwrap();
    let e = io::read_trace(dir.path().join("cmp/01-euler.csv")).unwrap();
    assert!(g.rows[10].energy < e.rows[10].energy);
    assert_eq!(summary(&dir.path().join("cmp")).len(), 2);
}

#[test]
fn large_step_euler_settles_above_the_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &[
            "compare",
            "--model",
            "denoise",
            "--sigma",
            "0.1",
            "--seed",
            "1",
            "--max-steps",
            "200",
            "--run",
            "gonzalez:2.5",
            "--run",
            "euler:0.5",
            "--out-dir",
            "cmp",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let rows = summary(&dir.path().join("cmp"));
    let (g, e): (f64, f64) = (rows[0][6].parse().unwrap(), rows[1][6].parse().unwrap());
    assert_eq!(rows[0][4], "GradTol");
    assert!(e > g + 0.1 * g, "euler {e} vs gonzalez {g}");
}

#[test]
fn itoh_abe_and_lagged_diffusivity_agree_on_inpainting() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &["fixture", "--output", "s.pgm", "--mask", "m.pgm"],
    );
    assert_eq!(code(&o), 0);
    let o = dgflow(
        dir.path(),
        &[
            "compare",
            "--model",
            "inpaint",
            "--input",
            "s.pgm",
            "--mask",
            "m.pgm",
            "--alpha",
            "0.05",
            "--beta",
            "0.01",
            "--max-steps",
            "5000",
            "--run",
            "itoh-abe:1:adaptive",
            "--run",
            "lagged:0.1",
            "--out-dir",
            "cmp",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ia = io::read_trace(dir.path().join("cmp/00-itoh-abe.csv")).unwrap();
    let lg = io::read_trace(dir.path().join("cmp/01-lagged.csv")).unwrap();
    assert!(ia.is_monotone(slack(&ia)));
    assert!(lg.is_monotone(slack(&lg)));
    let (a, b) = (ia.last().unwrap().energy, lg.last().unwrap().energy);
    assert!((a - b).abs() <= 1e-3 * a.abs(), "{a} vs {b}");
}

#[test]
fn compare_needs_two_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dgflow(
        dir.path(),
        &[
            "compare",
            "--model",
            "denoise",
            "--run",
            "gonzalez",
            "--out-dir",
            "x",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let mut args = vec![
            "tvp", "--p", "0.8", "--sigma", "0.05", "--seed", "11", "--init", "random",
        ];
        let (img, tr) = (format!("{tag}.pgm"), format!("{tag}.csv"));
        args.extend(["--output", &img, "--trace", &tr, "--maxval", "65535"]);
        let o = dgflow(dir.path(), &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        (
            fs::read(dir.path().join(&img)).unwrap(),
            fs::read(dir.path().join(&tr)).unwrap(),
            o.stdout,
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.cfg"),
        "# denoising run\nsigma = 0.1\nseed = 1\nmax_steps = 4\ntrace = cfg.csv\n",
    )
    .unwrap();
    let o = dgflow(
        dir.path(),
        &["denoise", "--config", "run.cfg", "--max-steps", "2"],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let t = io::read_trace(dir.path().join("cfg.csv")).unwrap();
    assert_eq!(t.rows.len(), 3);
}
