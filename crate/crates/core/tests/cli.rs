use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mode4-sim"))
}

fn run_cli(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
seed = 3
[scheduler]
selectivity_k = 30
[engine]
warmup_windows = 5
[trace.synthetic]
num_vehicles = 20
road_length_m = 300.0
duration_s = 3.0
[sweep]
k_values = [1, 30, 100]
f_values = [1]
"#;

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    names
}

#[test]
fn sweep_writes_one_report_set_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let out = tmp.path().join("out");
    let o = run_cli(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let files = sorted_files(&out);
    for kind in ["prr", "cdf", "losses"] {
        let n = files.iter().filter(|f| f.starts_with(&format!("{kind}_"))).count();
        assert_eq!(n, 3, "{kind}: {files:?}");
    }
    for k in [1, 30, 100] {
        assert!(files.contains(&format!("prr_{k}_1.csv")));
    }
    let cmp = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    let header = cmp.lines().next().unwrap();
    for k in [1, 30, 100] {
        assert!(header.contains(&format!("prr_service_K{k}_F1")), "{header}");
    }
    let prr = std::fs::read_to_string(out.join("prr_30_1.csv")).unwrap();
    assert_eq!(prr.lines().next().unwrap(), "d_x,prr_raw,prr_service,loss_cci,loss_prop,loss_hd,attempts");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn rerun_is_byte_identical_and_seed_override_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (dir, seed) in dirs.iter().zip(["3", "3", "4"]) {
        let o = run_cli(&["sweep", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", seed, "--quiet"]);
        assert!(o.status.success());
    }
    let read = |d: &Path| sorted_files(d).into_iter().map(|f| std::fs::read(d.join(&f)).unwrap()).collect::<Vec<_>>();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    assert_ne!(read(&dirs[0]), read(&dirs[2]));
}

#[test]
fn run_uses_base_point_and_output_dir_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("from_file");
    let text = SMALL.replace("seed = 3", &format!("seed = 3\noutput_dir = {:?}", out.to_str().unwrap()));
    let cfg = write(tmp.path(), "c.toml", &text);
    let o = run_cli(&["run", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("K=30 F=1"));
    let files = sorted_files(&out);
    assert_eq!(files, vec!["cdf_30_1.csv", "comparison.csv", "losses_30_1.csv", "prr_30_1.csv", "summary.json"]);
}

#[test]
fn validate_reports_key_paths_and_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.toml", SMALL);
    assert!(run_cli(&["validate", "--config", &good]).status.success());

    let cases = [
        ("empty.toml", "", "scheduler.selectivity_k"),
        ("big_k.toml", "[scheduler]\nselectivity_k = 150\n", "scheduler.selectivity_k"),
        ("f4.toml", "[grid]\nnum_sub_bands = 4\n[scheduler]\nselectivity_k = 3\n", "channel.ibe_vector"),
        ("typo.toml", "[scheduler]\nselectivity_k = 3\n[metrics]\nbinz = [1.0]\n", "metrics"),
    ];
    for (name, body, key) in cases {
        let path = write(tmp.path(), name, body);
        let o = run_cli(&["validate", "--config", &path]);
        assert!(!o.status.success(), "{name}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(key), "{name}: {err}");
    }
    let o = run_cli(&["validate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn gen_trace_round_trips_through_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let stdout = run_cli(&["gen-trace", "--config", &cfg]);
    assert!(stdout.status.success());
    let trace_path = tmp.path().join("trace.csv");
    let o = run_cli(&["gen-trace", "--config", &cfg, "--out", trace_path.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success());
    let file = std::fs::read(&trace_path).unwrap();
    assert_eq!(file, stdout.stdout);
    let rows = String::from_utf8(file).unwrap();
    assert_eq!(rows.lines().count(), 20 * 4);

    // a config pointing at the generated file reproduces the synthetic run
    let from_file = SMALL.replace(
        "[trace.synthetic]\nnum_vehicles = 20\nroad_length_m = 300.0\nduration_s = 3.0\n",
        "[trace]\nfile = \"trace.csv\"\n",
    );
    let cfg_file = write(tmp.path(), "file.toml", &from_file);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_cli(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--quiet"]).status.success());
    assert!(run_cli(&["run", "--config", &cfg_file, "--out", b.to_str().unwrap(), "--quiet"]).status.success());
    assert_eq!(std::fs::read(a.join("prr_30_1.csv")).unwrap(), std::fs::read(b.join("prr_30_1.csv")).unwrap());
}

#[test]
fn fcd_trace_file_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let mut xml = String::from("<fcd-export>\n");
    for t in 0..3 {
        xml.push_str(&format!("<timestep time=\"{t}.00\">\n"));
        for v in 0..4 {
            xml.push_str(&format!("<vehicle id=\"car{v}\" x=\"{}\" y=\"0\" speed=\"10\"/>\n", 30 * v + 10 * t));
        }
        xml.push_str("</timestep>\n");
    }
    xml.push_str("</fcd-export>\n");
    write(tmp.path(), "fcd.xml", &xml);
    let cfg = write(tmp.path(), "c.toml", "[scheduler]\nselectivity_k = 5\n[engine]\nwarmup_windows = 2\n[trace]\nfile = \"fcd.xml\"\n");
    let out = tmp.path().join("out");
    let o = run_cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"][0]["metadata"]["mean_fleet_size"], 4.0);
}

#[test]
fn unreadable_trace_fails_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "[scheduler]\nselectivity_k = 5\n[trace]\nfile = \"nope.csv\"\n");
    let o = run_cli(&["run", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn shipped_config_validates_with_stated_defaults() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/sweep.toml");
    let o = run_cli(&["validate", "--config", path, "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = mode4_sim::config::load_config(Path::new(path)).unwrap();
    let mut defaults = mode4_sim::RunConfig::with_k(30);
    defaults.trace.synthetic = Some(Default::default());
    defaults.sweep.k_values = vec![1, 30, 100];
    defaults.sweep.f_values = vec![1, 2, 3];
    assert_eq!(cfg, defaults);
}
