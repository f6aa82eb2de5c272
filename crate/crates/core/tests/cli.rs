use std::path::Path;
use std::process::{Command, Output};

fn maskepi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskepi")).args(args).output().expect("binary runs")
}

fn run_to(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    maskepi(&all)
}

#[test]
fn lists_all_presets() {
    let out = maskepi(&["presets"]);
    assert!(out.status.success());
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(names.len(), 12);
    for name in ["fig2", "fig3", "fig4-md8", "fig4-md20", "fig5-x40", "fig6-x10"] {
        assert!(names.iter().any(|n| n == name), "{name}");
    }
}

#[test]
fn shown_preset_runs_like_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fig3.toml");
    let shown = maskepi(&["show-preset", "fig3"]);
    assert!(shown.status.success());
    std::fs::write(&cfg, &shown.stdout).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run_to(&["run", "--preset", "fig3", "--analytic-only"], &a).status.success());
    assert!(run_to(&["run", "--config", cfg.to_str().unwrap(), "--analytic-only"], &b).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 10);
    assert!(text.starts_with("parameter,value,r0,pe_random,pe_surgical,pe_cloth,pe_no-mask,es_total,"));
}

#[test]
fn same_seed_gives_identical_csv_and_seed_changes_it() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["run", "--preset", "fig4-md8", "--trials", "20", "--nodes", "1500", "--sim-only"];
    let read = |name: &str, seed: &str, threads: &str| {
        let path = dir.path().join(name);
        let mut args = base.to_vec();
        args.extend(["--seed", seed, "--threads", threads]);
        assert!(run_to(&args, &path).status.success());
        std::fs::read(path).unwrap()
    };
    let a = read("a.csv", "5", "1");
    assert_eq!(a, read("b.csv", "5", "3"));
    assert_ne!(a, read("c.csv", "6", "1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");

    let unknown = run_to(&["run", "--preset", "fig99"], &out);
    assert_eq!(unknown.status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "name = \"bad\"\nbogus = 3\n").unwrap();
    let parse = run_to(&["run", "--config", bad.to_str().unwrap()], &out);
    assert_eq!(parse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("bogus"));

    let slow = dir.path().join("slow.toml");
    let mut text = String::from_utf8(maskepi(&["show-preset", "fig2"]).stdout).unwrap();
    text = text.replace("max_iter = 1000000", "max_iter = 2");
    assert!(text.contains("max_iter = 2"), "{text}");
    std::fs::write(&slow, text).unwrap();
    let solver = run_to(&["run", "--config", slow.to_str().unwrap(), "--analytic-only"], &out);
    assert_eq!(solver.status.code(), Some(2));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("#TRUNCATED"));

    // a type too rare to ever appear on a small fixed network
    let rare = dir.path().join("rare.toml");
    std::fs::write(
        &rare,
        r#"name = "rare"
degree = { kind = "poisson", mean = 3.0 }
masks = { m = [0.999999, 0.000001], t_matrix = [[0.5, 0.5], [0.5, 0.5]] }
[sweep]
parameter = "mean_degree"
values = [3.0]
[simulation]
n_nodes = 50
trials = 5
seed_policies = ["type-2"]
regenerate_network = false
"#,
    )
    .unwrap();
    let sim = run_to(&["run", "--config", rare.to_str().unwrap(), "--sim-only"], &out);
    assert_eq!(sim.status.code(), Some(3), "{}", String::from_utf8_lossy(&sim.stderr));
}

#[test]
fn network_dump_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.txt");
    let out = run_to(&["network", "--preset", "fig2", "--nodes", "300", "--seed", "2"], &path);
    assert!(out.status.success());
    let net = maskepi::ContactNetwork::read_text(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(net.num_nodes(), 300);
    assert_eq!(net.num_types(), 3);
}
