use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::Command;

use vq_lab::bench::standin::{self, TOP500};
use vq_lab::bench::config::digest_text;
use vq_lab::bench::{load_dataset, run_experiment, RawConfig};
use vq_lab::metrics::MetricTrace;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn config(text: &str, out: &Path) -> vq_lab::bench::ExperimentConfig {
    let mut raw = RawConfig::parse(text, &data_dir()).unwrap();
    raw.set("output", &out.to_string_lossy()).unwrap();
    raw.resolve().unwrap()
}

fn traces(dir: &Path) -> Vec<MetricTrace> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("traces")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .iter()
        .map(|p| MetricTrace::read_csv(BufReader::new(fs::File::open(p).unwrap())).unwrap())
        .collect()
}

#[test]
fn bundled_standins_match_the_generator() {
    for spec in [standin::SAVING, TOP500] {
        let on_disk = fs::read_to_string(data_dir().join(spec.file_name)).unwrap();
        assert_eq!(on_disk, standin::generate(&spec), "{}", spec.file_name);
        let ds = load_dataset(&data_dir().join(spec.file_name), false).unwrap();
        assert_eq!((ds.len(), ds.dim), (spec.rows, spec.columns.len()));
    }
}

#[test]
fn standardization_round_trips() {
    for name in ["saving_standin.csv", "top500_standin.csv"] {
        let path = data_dir().join(name);
        let raw = load_dataset(&path, false).unwrap();
        let std = load_dataset(&path, true).unwrap();
        for (a, b) in std.destandardize().iter().zip(&raw.rows) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{name}: {a} vs {b}");
        }
        for (mean, sd) in std.column_moments() {
            assert!(mean.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "{name}: {mean} {sd}");
        }
    }
}

#[test]
fn stochastic_algorithms_share_data_and_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "experiment = artificial_d2\ndensity = exponential\nn = 10\nT = 2000\nseeds = 0..3\n\
         algorithms = scl som:2 som:4 kmeans som_decreasing:0.5:8,1:2 kscl:2:0.5\n",
        dir.path(),
    );
    let report = run_experiment(&cfg).unwrap();
    for seed in 0..3 {
        let cells: Vec<_> = report.cells.iter().filter(|c| c.seed == seed).collect();
        assert_eq!(cells.len(), 6);
        for key in ["stream_digest", "init_digest"] {
            let first = cells[0].trace.metadata.get(key).unwrap();
            assert!(cells.iter().all(|c| c.trace.metadata.get(key) == Some(first)), "seed {seed} {key}");
        }
    }
    assert_ne!(
        report.cells[0].trace.metadata.get("stream_digest"),
        report.cells.iter().find(|c| c.seed == 1).unwrap().trace.metadata.get("stream_digest")
    );
}

#[test]
fn traces_carry_the_digest_of_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("experiment = real_distortion\ndataset = saving_standin.csv\nT = 200\nseeds = 0,1\n", dir.path());
    run_experiment(&cfg).unwrap();
    let resolved = fs::read_to_string(dir.path().join("config.resolved")).unwrap();
    let digest = digest_text(&resolved);
    let all = traces(dir.path());
    assert!(!all.is_empty());
    for t in &all {
        assert_eq!(t.metadata.get("config_digest"), Some(digest.as_str()));
        let its: Vec<u64> = t.series("distortion").iter().map(|p| p.0).collect();
        let mut expected: Vec<u64> = (0..=200).step_by(cfg.stride as usize).collect();
        if *expected.last().unwrap() != 200 {
            expected.push(200);
        }
        assert_eq!(its, expected);
    }
    assert!(dir.path().join("summary.csv").is_file());
    assert!(dir.path().join("plots/distortion.svg").is_file());
}

#[test]
fn single_step_run_has_two_probe_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("experiment = artificial_d2\ndensity = linear2x\nn = 5\nT = 1\nseeds = 0\n", dir.path());
    let report = run_experiment(&cfg).unwrap();
    for c in &report.cells {
        let its: Vec<u64> = c.trace.series("d2").iter().map(|p| p.0).collect();
        assert_eq!(its, vec![0, 1], "{}", c.algorithm);
    }
}

#[test]
fn repeated_row_dataset_reaches_zero_distortion() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("same.csv");
    fs::write(&data, format!("a,b\n{}", "1.5,-2\n".repeat(30))).unwrap();
    let text = format!(
        "experiment = real_distortion\ndataset = {}\nn = 4\ntopology = grid\ngrid_rows = 2\ngrid_cols = 2\n\
         T = 50\nseeds = 0\nalgorithms = scl som:5\ninit = seeded_sorted_uniform\n",
        data.display()
    );
    let cfg = config(&text, &dir.path().join("out"));
    let report = run_experiment(&cfg).unwrap();
    for c in &report.cells {
        let last = c.trace.series("distortion").last().unwrap().1;
        assert_eq!(last, 0.0, "{}", c.algorithm);
    }
}

#[test]
fn experiments_are_byte_reproducible() {
    let text = "experiment = kscl_sweep\ndensity = quadratic3x2\nn = 8\nT = 1000\nseeds = 0,1\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&config(text, a.path())).unwrap();
    run_experiment(&config(text, b.path())).unwrap();
    for name in ["summary.csv", "final.csv", "config.resolved", "oracle.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    assert_eq!(traces(a.path()), traces(b.path()));
}

fn vq_lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vq-lab")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let ok = vq_lab(&["oracle", "--density", "linear2x", "--n", "2"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("0.41"));

    let stuck = vq_lab(&["oracle", "--density", "gaussian", "--n", "8", "--max-iter", "1"]);
    assert_eq!(stuck.status.code(), Some(2));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "experiment = artificial_d2\ndensity = linear2x\nbogus = 1\n").unwrap();
    assert_eq!(vq_lab(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(vq_lab(&["oracle", "--density", "nope", "--n", "2"]).status.code(), Some(1));

    let good = dir.path().join("good.conf");
    fs::write(&good, "experiment = artificial_d2\ndensity = linear2x\nn = 5\nT = 300\nseeds = 0,1\n").unwrap();
    let out = dir.path().join("run");
    let run = vq_lab(&["run", "--config", good.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));

    let svg = dir.path().join("p.svg");
    let plot = vq_lab(&["plot", "--in", out.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(plot.status.code(), Some(0));
    assert!(fs::read_to_string(svg).unwrap().contains("<polyline"));
}
