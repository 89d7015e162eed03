//! Regenerates `tests/fixtures/` by recording a small run against the mock
//! chat server used by the integration tests.

#[path = "../tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    fs::create_dir_all(&fixtures).unwrap();
    let server = common::MockServer::start();
    let scratch = std::env::temp_dir().join("ebg-fixture-run");
    let input = std::env::temp_dir().join("ebg-fixture-input.json");
    fs::write(&input, common::smoke_config(&server.url).to_string()).unwrap();

    let env = |_: &str| None;
    let args = [
        "ebg",
        "generate",
        "--config",
        input.to_str().unwrap(),
        "--out",
        scratch.to_str().unwrap(),
        "--record",
    ];
    let code = ebg::cli::run(args, &env, &mut std::io::stdout(), &mut std::io::stderr());
    assert_eq!(code, 0);

    let mut config = common::smoke_config("");
    config["backend"].as_object_mut().unwrap().remove("endpoint_url");
    fs::write(
        fixtures.join("config.json"),
        serde_json::to_string_pretty(&config).unwrap() + "\n",
    )
    .unwrap();
    fs::copy(scratch.join("transcript.jsonl"), fixtures.join("transcript.jsonl")).unwrap();
    println!("{} requests recorded", server.requests());
}
