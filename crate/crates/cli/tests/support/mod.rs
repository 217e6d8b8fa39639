// Golden CLI runs shared by the CLI tests and the acceptance target.
// Set AUTHCAP_BLESS=1 to rewrite the stored outputs.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_authcap");

pub struct Golden {
    pub file: &'static str,
    pub args: &'static [&'static str],
}

pub const GOLDENS: &[Golden] = &[
    Golden {
        file: "region_theorem3.json",
        args: &["region", "--theorem", "3", "--lt", "0.1", "--lq", "0.3", "--point", "0.25,0.1,0.25", "--j", "1"],
    },
    Golden { file: "region_theorem1.csv", args: &["region", "--theorem", "1", "--point", "0.3,0.1,0.3", "--format", "csv"] },
    Golden {
        file: "region_gungor.csv",
        args: &["region", "--theorem", "gungor", "--point", "0.25,0.2,0.25", "--format", "csv"],
    },
    Golden {
        file: "sweep_r_vs_alpha.csv",
        args: &["sweep", "--mode", "r-vs-alpha", "--from", "0.6", "--to", "0.8", "--step", "0.05", "--compare", "gungor"],
    },
    Golden {
        file: "sweep_alpha_vs_kappa.csv",
        args: &["sweep", "--mode", "alpha-vs-kappa", "--from", "0", "--to", "0.4", "--step", "0.1", "--r", "0.5"],
    },
    Golden { file: "sweep_empty.csv", args: &["sweep", "--from", "0.75", "--to", "0.8", "--step", "0.05"] },
    Golden { file: "project_both.json", args: &["project", "--lt", "0.1", "--rho", "0.8,0.2;0.3,0.7"] },
    Golden {
        file: "project_single.csv",
        args: &["project", "--mode", "single", "--lt", "0.1", "--target", "0.6,0.4;0.3,0.7", "--format", "csv"],
    },
    Golden { file: "lfunc.csv", args: &["lfunc", "--lt", "0.05", "--lq", "0.25", "--rho-flip", "0", "--format", "csv"] },
    Golden { file: "transform.csv", args: &["transform", "--point", "0.5,0.1,0.2", "--beta", "0.1", "--format", "csv"] },
    Golden { file: "simulate_simmons.csv", args: &["simulate-simmons", "--n", "4", "--keys", "4", "--seed", "3"] },
    Golden {
        file: "simulate_simmons_many.csv",
        args: &["simulate-simmons", "--n", "4", "--keys", "4", "--seed", "100", "--codes", "50"],
    },
    Golden {
        file: "simulate_code_keyed.csv",
        args: &["simulate-code", "--kind", "keyed", "--n", "2", "--codewords", "0,3;1,2", "--t-flip", "1/10", "--q-flip", "1/4"],
    },
    Golden {
        file: "simulate_code_typeclass.csv",
        args: &[
            "simulate-code", "--kind", "typeclass", "--n", "3", "--j", "2", "--message-hat", "2", "--keys", "2",
            "--tau", "2,1", "--sigma", "1,1,0;0,0,1", "--rho", "1,0;0,1;1,0", "--t-flip", "1/8", "--q-flip", "1/5",
            "--seed", "7", "--mc-samples", "20000",
        ],
    },
    Golden {
        file: "simulate_code_remap.json",
        args: &[
            "simulate-code", "--kind", "keyed", "--n", "2", "--keys", "1", "--remap", "2", "--t-flip", "1/5", "--q-flip", "1/3",
            "--seed", "13", "--format", "json",
        ],
    },
];

pub fn golden_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(file)
}

pub fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("AUTHCAP_THREADS", t.to_string()),
        None => cmd.env_remove("AUTHCAP_THREADS"),
    };
    cmd.output().expect("spawn authcap")
}

/// Runs a golden case and returns its stdout, checking the exit status.
pub fn run_ok(g: &Golden, threads: Option<usize>) -> Vec<u8> {
    let out = run(g.args, threads);
    assert!(out.status.success(), "{} failed: {}", g.file, String::from_utf8_lossy(&out.stderr));
    out.stdout
}

pub fn stored(g: &Golden) -> Vec<u8> {
    let path = golden_path(g.file);
    if std::env::var_os("AUTHCAP_BLESS").is_some() {
        std::fs::write(&path, run_ok(g, Some(1))).unwrap();
    }
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Every golden case, run twice at each thread count, against its stored bytes.
/// Returns the names of mismatching cases.
pub fn determinism_failures(thread_counts: &[usize]) -> Vec<String> {
    let mut bad = Vec::new();
    for g in GOLDENS {
        let want = stored(g);
        for &t in thread_counts {
            for pass in 0..2 {
                if run_ok(g, Some(t)) != want {
                    bad.push(format!("{} (threads {t}, run {pass})", g.file));
                }
            }
        }
    }
    bad
}

pub fn csv_rows(bytes: &[u8]) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(bytes);
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

/// `value` column (by `quantity`) of a two- or five-column CSV.
pub fn quantity(rows: &[Vec<String>], name: &str) -> Vec<String> {
    rows.iter().find(|r| r[0] == name).unwrap_or_else(|| panic!("no row {name}")).clone()
}
