use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use metricforge::distortion::{sweep_subsets, DistortionCheck, SweepReport, SweepStrategy};
use metricforge::io::{read_map, read_modulus, read_space};
use metricforge::preservation::{minimal_k2, BoundaryGrid, PreservationReport};
use metricforge::quasisym::check_quasisymmetry;
use metricforge::report::CheckReport;
use metricforge::spaces::{relaxation_constant, CoefficientReport};
use metricforge::tolerance::Tolerance;
use serde_json::Value;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self { dir: tempfile::tempdir().unwrap() };
        f.write("relaxed.json", r#"{"labels":["a","b","c"],"matrix":[[0,4,1],[4,0,1],[1,1,0]]}"#);
        f.write("line.json", r#"{"labels":["a","b","c"],"matrix":[[0,1,2],[1,0,1],[2,1,0]]}"#);
        f.write("asym.json", "{\"labels\": [\"a\", \"b\"],\n \"matrix\": [[0, 1],\n [2, 0]]}\n");
        f.write("broken.json", r#"{"labels": ["a"], "matrix": [[0]"#);
        f.write("cycle.json", r#"{"labels":["a","b","c","d"],"matrix":[[0,1,2,1],[1,0,1,2],[2,1,0,1],[1,2,1,0]]}"#);
        // Pendant edges 1, 2, 3, 4 and one internal edge of length 1.
        f.write("tree.json", r#"{"labels":["x","y","z","u"],"matrix":[[0,3,5,6],[3,0,6,7],[5,6,0,7],[6,7,7,0]]}"#);
        f.write(
            "tree_root.json",
            r#"{"labels":["x","y","z","u"],"matrix":[[0,1.7320508075688772,2.23606797749979,2.449489742783178],[1.7320508075688772,0,2.449489742783178,2.6457513110645907],[2.23606797749979,2.449489742783178,0,2.6457513110645907],[2.449489742783178,2.6457513110645907,2.6457513110645907,0]]}"#,
        );
        f.write("tree_snow.json", r#"{"source":"tree.json","target":"tree_root.json","assignment":[0,1,2,3]}"#);
        f.write("tree_id.json", r#"{"source":"tree.json","target":"tree.json","assignment":[0,1,2,3]}"#);
        f.write("id.json", r#"{"source":"line.json","target":"line.json","assignment":[0,1,2]}"#);
        f.write("swap.json", r#"{"source":"line.json","target":"line.json","assignment":[1,0,2]}"#);
        f.write("noninjective.json", r#"{"source":"line.json","target":"line.json","assignment":[0,0,2]}"#);
        f.write(
            "pair.json",
            r#"{"source":{"labels":["a","b"],"matrix":[[0,1],[1,0]]},"target":{"labels":["a","b"],"matrix":[[0,3],[3,0]]},"assignment":[0,1]}"#,
        );
        f.write("identity.json", r#"{"family":"power","C":1,"alpha":1}"#);
        f.write("root.json", r#"{"family":"power","C":1,"alpha":0.5}"#);
        f.write("square.json", r#"{"family":"power","C":1,"alpha":2}"#);
        f.write("tiny.json", r#"{"family":"power","C":0.01,"alpha":1}"#);
        f.write("badmod.json", r#"{"family":"power","C":-1,"alpha":1}"#);
        f
    }

    fn write(&self, name: &str, text: &str) {
        fs::write(self.dir.path().join(name), text).unwrap();
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_metricforge"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("METRICFORGE_THREADS")
            .output()
            .unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        let out = self.run(args);
        out.status.code().expect("exited normally")
    }

    fn report(&self, args: &[&str]) -> Value {
        let target = self.path("report.json");
        let mut all: Vec<&str> = args.to_vec();
        all.extend(["--output", target.to_str().unwrap()]);
        let out = self.run(&all);
        assert!(out.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_str(&fs::read_to_string(target).unwrap()).unwrap()
    }
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn validate_exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.code(&["validate", "line.json"]), 0);
    assert_eq!(f.code(&["validate", "id.json", "--kind", "map"]), 0);
    assert_eq!(f.code(&["validate", "root.json", "--kind", "modulus"]), 0);
    let out = f.run(&["validate", "asym.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("asym.json:2:17: AsymmetricEntry(0,1)"), "{err}");
    assert_eq!(f.code(&["validate", "broken.json"]), 2);
    assert_eq!(f.code(&["validate", "badmod.json", "--kind", "modulus"]), 2);
    assert_eq!(f.code(&["validate", "missing.json"]), 2);
}

#[test]
fn coefficient_exit_codes() {
    let f = Fixture::new();
    let out = f.run(&["coefficient", "relaxed.json"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("raw sup = 2") && text.contains("coefficient = 2") && text.contains("(0, 1, 2)"), "{text}");
    assert_eq!(f.code(&["coefficient", "relaxed.json", "--max-k", "2"]), 0);
    assert_eq!(f.code(&["coefficient", "relaxed.json", "--max-k", "1.5"]), 1);
    assert_eq!(f.code(&["coefficient", "relaxed.json", "--max-k", "0.5"]), 2);
    assert_eq!(f.code(&["coefficient", "asym.json"]), 2);
}

#[test]
fn diameter_exit_codes() {
    let f = Fixture::new();
    let out = f.run(&["diameter", "relaxed.json", "--subset", "0,2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("= 1"));
    assert_eq!(f.code(&["diameter", "relaxed.json", "--subset", "0,7"]), 2);
    assert_eq!(f.code(&["diameter", "relaxed.json", "--subset", "x"]), 2);
}

#[test]
fn classify_exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.code(&["classify", "line.json", "--require", "metric"]), 0);
    assert_eq!(f.code(&["classify", "tree.json", "--require", "additive"]), 0);
    assert_eq!(f.code(&["classify", "relaxed.json", "--require", "metric"]), 1);
    assert_eq!(f.code(&["classify", "cycle.json", "--require", "additive"]), 1);
    assert_eq!(f.code(&["classify", "line.json", "--require", "ultrametric"]), 1);
    assert_eq!(f.code(&["classify", "broken.json"]), 2);
}

#[test]
fn qs_check_exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.code(&["qs-check", "--map", "id.json", "--modulus", "identity.json"]), 0);
    let out = f.run(&["qs-check", "--map", "swap.json", "--modulus", "identity.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("witness: points"));
    assert_eq!(f.code(&["qs-check", "--map", "noninjective.json", "--modulus", "identity.json"]), 2);
    assert_eq!(f.code(&["qs-check", "--map", "id.json", "--modulus", "badmod.json"]), 2);
}

#[test]
fn qs_fit_and_inverse_exit_codes() {
    let f = Fixture::new();
    let out = f.run(&["qs-fit", "--map", "tree_snow.json", "--modulus-out", "fit.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let fitted = read_modulus(&f.path("fit.json")).unwrap();
    let map = read_map(&f.path("tree_snow.json")).unwrap();
    assert!(check_quasisymmetry(&map, &fitted, Tolerance::default()).holds);
    assert_eq!(f.code(&["qs-fit", "--map", "pair.json"]), 2);

    assert_eq!(f.code(&["qs-inverse", "--map", "tree_snow.json", "--modulus", "root.json"]), 0);
    assert_eq!(f.code(&["qs-inverse", "--map", "swap.json", "--modulus", "identity.json"]), 2);
}

#[test]
fn distortion_and_ratio_exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.code(&["distortion-sweep", "--map", "tree_snow.json", "--modulus", "root.json"]), 0);
    assert_eq!(f.code(&["distortion-sweep", "--map", "swap.json", "--modulus", "identity.json"]), 2);
    assert_eq!(
        f.code(&["distortion-sweep", "--map", "id.json", "--modulus", "identity.json", "--k1", "0.5", "--k2", "1"]),
        2
    );

    assert_eq!(f.code(&["ratio-inequality", "--modulus", "root.json", "--k1", "1", "--k2", "1", "--t", "0.5"]), 0);
    assert_eq!(f.code(&["cor23", "--modulus", "tiny.json", "--k1", "1", "--k2", "1", "--t", "0.5"]), 1);
    assert_eq!(f.code(&["ratio-inequality", "--modulus", "root.json", "--k1", "1", "--k2", "1", "--t", "2"]), 2);
}

#[test]
fn preservation_exit_codes() {
    let f = Fixture::new();
    let out = f.run(&["preserve-k2", "--modulus", "root.json", "--k1", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("K2 closed form = 2"));
    assert_eq!(f.code(&["preserve-k2", "--modulus", "root.json", "--map", "tree_snow.json"]), 0);
    assert_eq!(f.code(&["preserve-k2", "--modulus", "root.json", "--map", "tree_snow.json", "--mode", "realizable"]), 0);
    assert_eq!(f.code(&["preserve-k2", "--modulus", "root.json"]), 2);
    assert_eq!(f.code(&["preserve-k2", "--modulus", "root.json", "--k1", "0.5"]), 2);

    assert_eq!(f.code(&["coefficient-conditions", "--modulus", "root.json", "--k1", "4", "--k2", "2"]), 0);
    assert_eq!(f.code(&["cor32", "--modulus", "square.json", "--k1", "2", "--k2", "4"]), 1);
    assert_eq!(f.code(&["cor32", "--modulus", "root.json", "--k1", "2", "--k2", "2", "--grid", "5,1"]), 2);
}

#[test]
fn bilipschitz_exit_codes() {
    let f = Fixture::new();
    let out = f.run(&["bilip", "--map", "pair.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("L = 3"));
    assert_eq!(f.code(&["bilip", "--map", "pair.json", "--max", "2"]), 1);
    assert_eq!(f.code(&["bilip", "--map", "noninjective.json"]), 2);

    assert_eq!(f.code(&["bilipschitz-coefficient", "--map", "tree_snow.json"]), 0);
    assert_eq!(f.code(&["cor37", "--map", "missing.json"]), 2);
}

#[test]
fn additivity_exit_codes() {
    let f = Fixture::new();
    assert_eq!(f.code(&["additive-check", "tree.json"]), 0);
    let out = f.run(&["additive-check", "cycle.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("[2.0, 4.0, 2.0]"), "{}", stdout(&out));
    assert_eq!(f.code(&["additive-check", "asym.json"]), 2);

    assert_eq!(f.code(&["tuple-scan", "--modulus", "identity.json", "--samples", "20000"]), 0);
    assert_eq!(f.code(&["thm41-tuples", "--modulus", "root.json", "--samples", "20000"]), 1);
    assert_eq!(f.code(&["tuple-scan", "--modulus", "identity.json", "--range", "2,1"]), 2);

    assert_eq!(f.code(&["image-additivity", "--map", "tree_id.json", "--modulus", "identity.json"]), 0);
    let out = f.run(&["thm41-empirical", "--map", "tree_snow.json", "--modulus", "root.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!stdout(&out).contains("ALARM"));
    assert_eq!(f.code(&["image-additivity", "--map", "id.json", "--modulus", "identity.json"]), 0);
    let cyc = r#"{"source":"cycle.json","target":"cycle.json","assignment":[0,1,2,3]}"#;
    f.write("cycle_id.json", cyc);
    assert_eq!(f.code(&["image-additivity", "--map", "cycle_id.json", "--modulus", "identity.json"]), 2);
}

#[test]
fn generate_writes_loadable_instances() {
    let f = Fixture::new();
    for kind in ["metric", "tree", "ultrametric"] {
        assert_eq!(f.code(&["generate", "--kind", kind, "--n", "7", "--seed", "4", "--out", "g.json"]), 0);
        assert_eq!(f.code(&["validate", "g.json"]), 0);
    }
    let args = [
        "generate", "--kind", "bilipschitz", "--inner", "tree", "--n", "6", "--seed", "1", "--out", "t.json", "--map-out",
        "tm.json", "--modulus-out", "te.json",
    ];
    assert_eq!(f.code(&args), 0);
    assert_eq!(f.code(&["qs-check", "--map", "tm.json", "--modulus", "te.json"]), 0);
    assert_eq!(read_map(&f.path("tm.json")).unwrap().target(), &read_space(&f.path("t.json")).unwrap());

    let first = fs::read(f.path("t.json")).unwrap();
    assert_eq!(f.code(&args), 0);
    assert_eq!(fs::read(f.path("t.json")).unwrap(), first);

    assert_eq!(f.code(&["generate", "--kind", "snowflake", "--out", "s.json"]), 2);
    assert_eq!(f.code(&["generate", "--kind", "metric", "--n", "1", "--out", "s.json"]), 2);
}

#[test]
fn global_flags() {
    let f = Fixture::new();
    assert_eq!(f.code(&["coefficient", "line.json", "--tol", "0"]), 2);
    assert_eq!(f.code(&["coefficient", "line.json", "--threads", "0"]), 2);
    assert_eq!(f.code(&["coefficient", "line.json", "--threads", "2"]), 0);
    assert_eq!(f.code(&["frobnicate"]), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_metricforge"))
        .args(["coefficient", "line.json", "--format", "json"])
        .current_dir(f.dir.path())
        .env("METRICFORGE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = f.run(&["coefficient", "relaxed.json", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "coefficient");
}

fn reread<T: serde::de::DeserializeOwned + serde::Serialize>(v: &Value) -> T {
    let parsed: T = serde_json::from_value(v.clone()).unwrap();
    assert_eq!(&serde_json::to_value(&parsed).unwrap(), v);
    parsed
}

#[test]
fn reports_round_trip_bit_for_bit() {
    let f = Fixture::new();
    let tol = Tolerance::default();
    let args = ["generate", "--kind", "snowflake", "--alpha", "0.37", "--n", "6", "--seed", "11", "--out", "g.json"];
    let args: Vec<&str> = args.into_iter().chain(["--map-out", "gm.json", "--modulus-out", "ge.json"]).collect();
    assert_eq!(f.code(&args), 0);
    let map = read_map(&f.path("gm.json")).unwrap();
    let eta = read_modulus(&f.path("ge.json")).unwrap();

    let v = f.report(&["coefficient", "g.json"]);
    let got: CoefficientReport = reread(&v["report"]["coefficient"]);
    assert_eq!(got, relaxation_constant(map.target()));

    let v = f.report(&["qs-check", "--map", "gm.json", "--modulus", "ge.json"]);
    let got: CheckReport = reread(&v["report"]);
    assert_eq!(got, check_quasisymmetry(&map, &eta, tol));

    let v = f.report(&["distortion-sweep", "--map", "gm.json", "--modulus", "ge.json"]);
    let got: SweepReport = reread(&v["report"]);
    let check = DistortionCheck::new(&map, &eta, tol).unwrap();
    assert_eq!(got, sweep_subsets(&check, SweepStrategy::Exhaustive).unwrap());

    let v = f.report(&["preserve-k2", "--modulus", "ge.json", "--k1", "3"]);
    let got: PreservationReport = reread(&v["report"]);
    assert_eq!(got, minimal_k2(&eta, 3.0, BoundaryGrid::default()).unwrap());

    for v in [
        f.report(&["additive-check", "cycle.json"]),
        f.report(&["tuple-scan", "--modulus", "root.json", "--samples", "5000"]),
        f.report(&["image-additivity", "--map", "tree_snow.json", "--modulus", "root.json"]),
    ] {
        let text = serde_json::to_string(&v).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }
}

