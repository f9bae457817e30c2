use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CONTEXT: &str = "The minister said on Monday that the budget was approved.";

fn lmstego(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmstego"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lmstego(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_key(dir: &Path, name: &str, model: &str, method: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(
        &path,
        format!("context = {CONTEXT:?}\n\n[model]\n{model}\n\n[method]\n{method}\n"),
    )
    .unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn hide_then_reveal_is_exact() {
    let dir = TempDir::new().unwrap();
    let key = write_key(
        dir.path(),
        "k.toml",
        "builtin = true",
        "kind = \"arithmetic\"\ntemperature = 0.9\ntop_k = 300",
    );
    let cover = dir.path().join("cover.txt");
    let message = "Oil prices fell five percent last week.";
    ok(&["hide", "--key", s(&key), "--message", message, "--out", s(&cover)]);
    let revealed = ok(&["reveal", "--key", s(&key), "--cover", s(&cover)]);
    assert_eq!(revealed, format!("{message}\n"));
}

#[test]
fn encode_decode_hex_and_ids() {
    let dir = TempDir::new().unwrap();
    let key = write_key(
        dir.path(),
        "k.toml",
        "builtin = true",
        "kind = \"huffman\"\ntruncation = 8",
    );
    for format in ["text", "ids"] {
        let cover = dir.path().join(format!("cover.{format}"));
        ok(&[
            "encode", "--key", s(&key), "--message-bits", "0xdeadbeef", "--format", format,
            "--out", s(&cover),
        ]);
        let bits = ok(&["decode", "--key", s(&key), "--cover", s(&cover), "--format", format]);
        assert_eq!(bits, "deadbeef\n");
    }
    let file = dir.path().join("bits.txt");
    std::fs::write(&file, "10110\n").unwrap();
    let cover = dir.path().join("cover5.txt");
    ok(&["encode", "--key", s(&key), "--message-bits", s(&file), "--out", s(&cover)]);
    assert_eq!(ok(&["decode", "--key", s(&key), "--cover", s(&cover)]), "10110\n");
}

#[test]
fn eval_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let key = write_key(
        dir.path(),
        "k.toml",
        "builtin = true",
        "kind = \"block\"\nblock_bits = 2\nseed = 5",
    );
    let contexts = dir.path().join("contexts.txt");
    std::fs::write(&contexts, "The minister said on Monday.\nOil prices fell five percent last week.\n").unwrap();
    let run = |out: &Path| {
        ok(&[
            "eval", "--key", s(&key), "--contexts", s(&contexts), "--grid",
            "arithmetic:0.8,1.0;huffman:4;block:1,2", "--samples", "6", "--seed", "11",
            "--message-bits", "32", "--out", s(out),
        ]);
        std::fs::read(out).unwrap()
    };
    let a = run(&dir.path().join("a.csv"));
    let b = run(&dir.path().join("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("method,param,bits_per_word"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn wrong_block_seed_is_a_desync() {
    let dir = TempDir::new().unwrap();
    let good = write_key(dir.path(), "a.toml", "builtin = true", "kind = \"block\"\nblock_bits = 3\nseed = 1");
    let bad = write_key(dir.path(), "b.toml", "builtin = true", "kind = \"block\"\nblock_bits = 3\nseed = 2");
    let cover = dir.path().join("cover.txt");
    ok(&["encode", "--key", s(&good), "--message-bits", "cafe", "--out", s(&cover)]);
    let out = lmstego(&["decode", "--key", s(&bad), "--cover", s(&cover)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("desync"));
}

#[test]
fn trained_model_and_fingerprint() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus.txt");
    ok(&["builtin-corpus", "--documents", "200", "--out", s(&corpus)]);
    let model = dir.path().join("m.nglm");
    ok(&["train-ngram", "--corpus", s(&corpus), "--order", "2", "--alpha", "0.1", "--out", s(&model)]);
    let key = write_key(dir.path(), "k.toml", "path = \"m.nglm\"", "kind = \"huffman\"\ntruncation = 4");
    let fp = ok(&["fingerprint", "--key", s(&key)]);
    assert_eq!(fp.trim().len(), 64);

    let pinned = write_key(
        dir.path(),
        "pinned.toml",
        &format!("path = \"m.nglm\"\nfingerprint = \"{}\"", fp.trim()),
        "kind = \"huffman\"\ntruncation = 4",
    );
    ok(&["fingerprint", "--key", s(&pinned)]);
    let wrong = write_key(
        dir.path(),
        "wrong.toml",
        "path = \"m.nglm\"\nfingerprint = \"00\"",
        "kind = \"huffman\"\ntruncation = 4",
    );
    assert_eq!(lmstego(&["fingerprint", "--key", s(&wrong)]).status.code(), Some(3));
}

#[test]
fn error_exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(lmstego(&["encode"]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        lmstego(&["encode", "--key", s(&missing), "--message-bits", "00"]).status.code(),
        Some(2)
    );

    let key = write_key(dir.path(), "k.toml", "builtin = true", "kind = \"huffman\"\ntruncation = 4");
    let cover = dir.path().join("cover.ids");
    ok(&["encode", "--key", s(&key), "--message-bits", "0123456789", "--format", "ids", "--out", s(&cover)]);
    let ids = std::fs::read_to_string(&cover).unwrap();
    let half: String = ids.lines().take(ids.lines().count() / 2).map(|l| format!("{l}\n")).collect();
    std::fs::write(&cover, half).unwrap();
    let out = lmstego(&["decode", "--key", s(&key), "--cover", s(&cover), "--format", "ids"]);
    assert_eq!(out.status.code(), Some(7));

    let tight = dir.path().join("tight.toml");
    std::fs::write(
        &tight,
        format!("context = {CONTEXT:?}\nmax_tokens = 3\n[model]\nbuiltin = true\n[method]\nkind = \"huffman\"\ntruncation = 2\n"),
    )
    .unwrap();
    assert_eq!(
        lmstego(&["encode", "--key", s(&tight), "--message-bits", "ffff"]).status.code(),
        Some(5)
    );

    let remote = write_key(
        dir.path(),
        "remote.toml",
        "endpoint = \"http://127.0.0.1:9\"\ntimeout_secs = 2",
        "kind = \"huffman\"\ntruncation = 4",
    );
    assert_eq!(
        lmstego(&["encode", "--key", s(&remote), "--message-bits", "00"]).status.code(),
        Some(6)
    );
}
