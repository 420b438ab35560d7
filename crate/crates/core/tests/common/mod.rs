#![allow(dead_code)]

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

pub fn corpus(name: &str) -> String {
    corpus_dir().join(name).to_string_lossy().into_owned()
}

/// Sorted paths of every `.spec` file in the corpus.
pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "spec"))
        .collect();
    files.sort();
    files
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_str(self.stdout.trim()).unwrap_or_else(|e| panic!("bad json {e}: {}", self.stdout))
    }
}

pub fn cli(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_cayley-measure"))
        .args(args)
        .output()
        .expect("spawn cli");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

use cayley_measure::cylinder::{Configuration, SiteConstraint, Spin};
use cayley_measure::specdsl::EventExpr;
use cayley_measure::tree::Vertex;
use rand::Rng;

/// Random event over sites `x0..x{sites-1}` with spins below `spins`.
pub fn random_event(rng: &mut impl Rng, sites: usize, spins: u64, depth: u32) -> EventExpr {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        if rng.gen_bool(0.05) {
            return if rng.gen() { EventExpr::True } else { EventExpr::False };
        }
        let vertex = Vertex(rng.gen_range(0..sites));
        let set = (0..spins).filter(|_| rng.gen_bool(0.5)).collect();
        let constraint = match rng.gen_range(0..3) {
            0 => SiteConstraint::eq(rng.gen_range(0..spins)),
            1 => SiteConstraint::In(set),
            _ => SiteConstraint::NotIn(set),
        };
        return EventExpr::Site { vertex, constraint };
    }
    match rng.gen_range(0..3) {
        0 => EventExpr::Not(Box::new(random_event(rng, sites, spins, depth - 1))),
        1 => EventExpr::And((0..rng.gen_range(2..4)).map(|_| random_event(rng, sites, spins, depth - 1)).collect()),
        _ => EventExpr::Or((0..rng.gen_range(2..4)).map(|_| random_event(rng, sites, spins, depth - 1)).collect()),
    }
}

/// Every configuration on `sites` sites with spins below `spins`.
pub fn all_configurations(sites: usize, spins: u64) -> impl Iterator<Item = Vec<Spin>> {
    let total = spins.pow(sites as u32);
    (0..total).map(move |mut i| {
        (0..sites)
            .map(|_| {
                let q = i % spins;
                i /= spins;
                q
            })
            .collect()
    })
}

pub fn dense(values: &[Spin]) -> Configuration {
    Configuration::from_dense(values)
}

use cayley_measure::specdsl::{parse_spec, Model};

pub fn model(name: &str) -> Model {
    let text = std::fs::read_to_string(corpus(name)).expect("corpus file");
    parse_spec(&text).expect("parses").build().expect("builds")
}
