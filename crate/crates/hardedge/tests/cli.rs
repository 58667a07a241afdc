use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardedge")).args(args).output().unwrap()
}

fn stdout_ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("hardedge-cli-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d.join(name)
}

struct Csv {
    meta: HashMap<String, String>,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    fn parse(text: &str) -> Csv {
        let mut meta = HashMap::new();
        let mut header = vec![];
        let mut rows = vec![];
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once(": ").unwrap();
                meta.insert(k.to_string(), v.to_string());
            } else if header.is_empty() {
                header = line.split(',').map(String::from).collect();
            } else {
                rows.push(line.split(',').map(|t| t.parse().unwrap()).collect());
            }
        }
        Csv { meta, header, rows }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let k = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[k]).collect()
    }
}

#[test]
fn kernel_table_lattice_and_symmetry() {
    let t = Csv::parse(&stdout_ok(&["kernel-table", "--s", "0"]));
    assert_eq!(t.header, ["x1", "x2", "k"]);
    assert_eq!(t.rows.len(), 25);
    assert!(t.meta.contains_key("version") && t.meta.contains_key("config"));
    let (x1, x2, k) = (t.col("x1"), t.col("x2"), t.col("k"));
    for i in 0..25 {
        let j = (0..25).find(|&j| x1[j] == x2[i] && x2[j] == x1[i]).unwrap();
        assert!((k[i] - k[j]).abs() < 1e-14 * k[i].abs().max(1.0));
    }
}

#[test]
fn kernel_table_scaling_limit_and_determinism() {
    let a = scratch("kt_a.csv");
    let b = scratch("kt_b.csv");
    let args = ["kernel-table", "--kernel", "rescaled", "--reference", "bessel_modified", "--s", "0", "--n", "100", "--window", "0.5,3"];
    for p in [&a, &b] {
        let mut v: Vec<&str> = args.to_vec();
        v.extend(["--out", p.to_str().unwrap()]);
        stdout_ok(&v);
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // identical apart from the echoed output path
    let strip = |t: &[u8]| String::from_utf8_lossy(t).replace("kt_a.csv", "kt_x.csv").replace("kt_b.csv", "kt_x.csv");
    assert_eq!(strip(&ta), strip(&tb));
    let t = Csv::parse(&String::from_utf8(ta).unwrap());
    let md: f64 = t.meta["max_abs_delta"].parse().unwrap();
    assert!(md < 0.05);
    assert!(t.col("delta").iter().all(|d| d.abs() <= md));
    assert_eq!(stdout_ok(&args), stdout_ok(&args));
}

#[test]
fn converge_errors_decrease() {
    let t = Csv::parse(&stdout_ok(&["converge", "--s", "0", "--n", "25,50,100,200"]));
    let e = t.col("sup_error");
    assert_eq!(e.len(), 4);
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    let t = Csv::parse(&stdout_ok(&["converge", "--s", "-1", "--beta", "1", "--n", "40,80,160"]));
    let e = t.col("trace_distance");
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    let t = Csv::parse(&stdout_ok(&["converge", "--s", "0.5", "--n", "30"]));
    assert_eq!(t.rows.len(), 1);
}

#[test]
fn sample_summary_and_reproducibility() {
    let a = scratch("s_a.txt");
    let b = scratch("s_b.txt");
    let base = ["sample", "--kernel", "jacobi", "--s", "0.5", "--n", "4", "--samples", "300", "--seed", "9"];
    let mut summaries = vec![];
    for p in [&a, &b] {
        let mut v: Vec<&str> = base.to_vec();
        v.extend(["--out", p.to_str().unwrap()]);
        summaries.push(serde_json::from_str::<serde_json::Value>(&stdout_ok(&v)).unwrap());
    }
    assert_eq!(summaries[0]["mean_count"], 4.0);
    assert_eq!(summaries[0]["rank"], 4);
    let body = |p: &PathBuf| {
        let t = std::fs::read_to_string(p).unwrap();
        t.lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(&a), body(&b));
    let lines: Vec<String> = std::fs::read_to_string(&a).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect();
    assert_eq!(lines.len(), 300);
    assert!(lines.iter().all(|l| l.split(',').count() == 4));
}

#[test]
fn damped_sample_has_finite_sum() {
    let p = scratch("damped.txt");
    let s = stdout_ok(&["sample", "--s", "-1", "--beta", "1", "--samples", "200", "--out", p.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    let m = v["mean_sum"].as_f64().unwrap();
    assert!(m.is_finite() && m > 0.0);
    assert_eq!(v["mean_count"], v["rank"].as_f64().unwrap());
    for k in ["xmax_q10", "xmax_q50", "xmax_q90"] {
        assert!(v[k].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn sample_cache_round_trip() {
    let c = scratch("cache.bin");
    let (o1, o2) = (scratch("c1.txt"), scratch("c2.txt"));
    let _ = std::fs::remove_file(&c);
    for o in [&o1, &o2] {
        stdout_ok(&["sample", "--s", "-1", "--R", "4", "--samples", "50", "--cache", c.to_str().unwrap(), "--out", o.to_str().unwrap()]);
    }
    assert!(c.exists());
    let body = |p: &PathBuf| std::fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with("# config")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&o1), body(&o2));
}

#[test]
fn sample_requires_an_output_path() {
    assert_eq!(run(&["sample", "--s", "-1", "--beta", "1", "--samples", "5"]).status.code(), Some(1));
}

#[test]
fn xmax_ratios() {
    let t = Csv::parse(&stdout_ok(&["xmax", "--s", "-1", "--R", "1,2,3,4", "--samples", "3000", "--seed", "5"]));
    let r = t.col("ratio");
    assert_eq!(*r.last().unwrap(), 1.0);
    assert!(r.windows(2).all(|w| w[1] > w[0]));
    assert!(r[0] > 0.0);
    assert!(t.col("z").iter().all(|z| z.abs() < 3.0));
}

#[test]
fn hellinger_table() {
    let o = run(&["hellinger", "--s", "1", "--s2", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let t = Csv::parse(&stdout_ok(&["hellinger", "--s", "0", "--s2", "1", "--n", "800"]));
    let c: f64 = t.meta["fitted_c"].parse().unwrap();
    assert!((c - 0.125).abs() < 0.05 * 0.125);
    let pp = t.col("partial_product");
    assert!(pp.windows(2).all(|w| w[1] < w[0]));
    assert!(t.meta.contains_key("candidate_difference") && t.meta.contains_key("candidate_sum"));
}

#[test]
fn json_output_is_flat() {
    let s = stdout_ok(&["hellinger", "--s", "0", "--s2", "2", "--n", "60", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert_eq!(v["command"], "hellinger");
    assert!(v["version"].is_string() && v["config"].is_string());
    assert_eq!(v["rows"].as_array().unwrap().len(), 59);
}

#[test]
fn selftest_report() {
    let o = run(&["selftest"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["all_passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["name"].is_string() && c["passed"] == true));

    let o = run(&["selftest", "--inject-fault", "asymmetry"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = v["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(failed, ["kernel_symmetry"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel_symmetry"));
}

#[test]
fn config_file_and_precedence() {
    let cfg = scratch("run.toml");
    std::fs::write(&cfg, "s = 0.0\ns2 = 2.0\nn = 40\nformat = \"json\"\n").unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout_ok(&["hellinger", "--config", cfg.to_str().unwrap()])).unwrap();
    let echoed: serde_json::Value = serde_json::from_str(v["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed["s2"], 2.0);
    let v: serde_json::Value =
        serde_json::from_str(&stdout_ok(&["hellinger", "--config", cfg.to_str().unwrap(), "--s2", "1"])).unwrap();
    let echoed: serde_json::Value = serde_json::from_str(v["config"].as_str().unwrap()).unwrap();
    assert_eq!(echoed["s2"], 1.0);
    assert_eq!(echoed["n"], serde_json::json!([40]));

    std::fs::write(&cfg, "s = 0.0\nbogus = 1\n").unwrap();
    assert_eq!(run(&["hellinger", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(run(&["kernel-table", "--bogus", "1"]).status.code(), Some(1));
    assert_eq!(run(&["kernel-table", "--s", "-2"]).status.code(), Some(1));
    assert_eq!(run(&["converge", "--s", "0", "--n", "6000"]).status.code(), Some(1));
    assert_eq!(run(&["kernel-table", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(run(&["xmax", "--s", "0.5", "--R", "2"]).status.code(), Some(1));
    assert_eq!(run(&["hellinger", "--config", "/nonexistent/run.toml"]).status.code(), Some(3));
}
