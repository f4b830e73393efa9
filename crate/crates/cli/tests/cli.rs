use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lrmt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrmt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn lrmt")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lrmt(dir, args);
    assert!(
        out.status.success(),
        "lrmt {args:?} exited {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    lrmt(dir, args).status.code().unwrap()
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).unwrap().to_path_buf()
}

/// Body rows of an extended TSV file, as (source, target) pairs.
fn pairs(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut f = l.split('\t');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect()
}

#[test]
fn score_prints_fixed_format() {
    let fixtures = workspace_root().join("crates/core/tests/fixtures/metrics");
    let hyp = fixtures.join("hyp.txt");
    let reference = fixtures.join("ref.txt");
    let (hyp, reference) = (hyp.to_str().unwrap(), reference.to_str().unwrap());
    let dir = tempfile::tempdir().unwrap();
    let both = ok(dir.path(), &["score", "--hyp", hyp, "--ref", reference]);
    assert_eq!(
        both,
        "BLEU = 56.1214 82.1429/64.7059/47.8261/39.0244 (BP = 1.0000 sys_len = 56 ref_len = 52)\nchrF++ = 77.3639\n"
    );
    let chrf = ok(dir.path(), &["score", "--hyp", hyp, "--ref", reference, "--metric", "chrf++"]);
    assert_eq!(chrf, "chrF++ = 77.3639\n");
    let same = ok(dir.path(), &["score", "--hyp", reference, "--ref", reference, "--metric", "bleu"]);
    assert!(same.starts_with("BLEU = 100.0000 "), "{same}");
}

#[test]
fn score_rejects_unequal_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h"), "a\nb\n").unwrap();
    fs::write(dir.path().join("r"), "a\n").unwrap();
    assert_eq!(code(dir.path(), &["score", "--hyp", "h", "--ref", "r"]), 2);
}

#[test]
fn ratios_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["ratios", "--sizes", "30000,1160000,1920000", "--langs", "arg,arn,ast"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("arg\t30000\t") && rows[1].contains("\t6.8120\t"), "{out}");
    assert!(rows[2].contains("\t1.0955\t"), "{out}");
    let flat = ok(dir.path(), &["ratios", "--sizes", "3,7", "--temperature", "1"]);
    assert!(flat.lines().skip(1).all(|l| l.contains("\t1.0000\t")), "{flat}");
}

#[test]
fn clean_then_filter_then_tag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut rows = String::new();
    for i in 0..40 {
        rows.push_str(&format!("casa {i} perro\tasac {i} orrep\n"));
    }
    rows.push_str("casa 0 perro\tasac 0 orrep\n");
    rows.push_str("no no no\tno no no\n");
    fs::write(d.join("in.tsv"), rows).unwrap();

    let out = lrmt(d, &["clean", "--pair", "es-arg", "-i", "in.tsv", "-o", "clean.tsv"]);
    assert!(out.status.success());
    let report = String::from_utf8(out.stderr).unwrap();
    assert!(report.contains("removed.dedup\t1") && report.contains("removed.repeats\t1"), "{report}");
    assert_eq!(pairs(&d.join("clean.tsv")).len(), 40);

    ok(d, &["align-train", "--pair", "es-arg", "-i", "clean.tsv", "-o", "fwd.align"]);
    ok(d, &["align-train", "--pair", "es-arg", "-i", "clean.tsv", "-o", "rev.align", "--reverse"]);
    assert!(fs::read_to_string(d.join("fwd.align")).unwrap().starts_with("#align-model-v1"));
    ok(
        d,
        &["align-filter", "--pair", "es-arg", "-i", "clean.tsv", "-o", "aligned.tsv", "--fwd", "fwd.align", "--rev", "rev.align", "--percentile", "25"],
    );
    assert_eq!(pairs(&d.join("aligned.tsv")).len(), 30);

    ok(d, &["tag", "--pair", "es-arg", "-i", "aligned.tsv", "-o", "tagged.tsv", "--plain"]);
    let tagged = fs::read_to_string(d.join("tagged.tsv")).unwrap();
    assert!(tagged.lines().all(|l| l.starts_with("<arg> casa ")), "{tagged}");
}

#[test]
fn two_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.es"), "uno\ndos\n").unwrap();
    fs::write(d.join("a.ast"), "un\ndós\n").unwrap();
    ok(d, &["clean", "--pair", "es-ast", "--source-file", "a.es", "--target-file", "a.ast", "-o", "c.tsv", "--plain"]);
    assert_eq!(fs::read_to_string(d.join("c.tsv")).unwrap(), "uno\tun\ndos\tdós\n");
    fs::write(d.join("b.ast"), "un\n").unwrap();
    assert_eq!(
        code(d, &["clean", "--pair", "es-ast", "--source-file", "a.es", "--target-file", "b.ast", "-o", "c.tsv"]),
        2
    );
}

#[test]
fn bpe_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = "la casa grande\nel perro pequeño corre\nlas casas grandes, los perros\n";
    fs::write(d.join("text.es"), text).unwrap();
    ok(d, &["bpe-train", "--text", "text.es", "--vocab-size", "60", "-o", "m.bpe"]);
    assert!(fs::read_to_string(d.join("m.bpe")).unwrap().starts_with("#bpe-v1"));
    ok(d, &["bpe-encode", "-m", "m.bpe", "-i", "text.es", "-o", "enc"]);
    let encoded = fs::read_to_string(d.join("enc")).unwrap();
    assert!(encoded.contains('\u{2581}'));
    let decoded = ok(d, &["bpe-decode", "-m", "m.bpe", "-i", "enc"]);
    assert_eq!(decoded, text);
}

#[test]
fn denoise_with_command_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.tsv"), "a\tb\nc\td\ne\tf\n").unwrap();
    fs::write(d.join("scores.sh"), "#!/bin/sh\nprintf '0.69\\n0.70\\n0.95\\n'\n").unwrap();
    ok(d, &["denoise", "--pair", "es-arg", "-i", "c.tsv", "-o", "kept.tsv", "--scorer", "cmd", "--command", "sh scores.sh"]);
    assert_eq!(pairs(&d.join("kept.tsv")), vec![("c".into(), "d".into()), ("e".into(), "f".into())]);

    fs::write(d.join("src.vec"), "1 0\n1 0\n0 1\n").unwrap();
    fs::write(d.join("tgt.vec"), "1 0\n0 1\n0 1\n").unwrap();
    ok(
        d,
        &["denoise", "--pair", "es-arg", "-i", "c.tsv", "-o", "kept2.tsv", "--scorer", "files", "--source-embeddings", "src.vec", "--target-embeddings", "tgt.vec"],
    );
    assert_eq!(pairs(&d.join("kept2.tsv")), vec![("a".into(), "b".into()), ("e".into(), "f".into())]);

    assert_eq!(code(d, &["denoise", "--pair", "es-arg", "-i", "c.tsv", "-o", "x", "--scorer", "cmd"]), 1);
    assert_eq!(
        code(d, &["denoise", "--pair", "es-arg", "-i", "c.tsv", "-o", "x", "--scorer", "cmd", "--command", "cat", "--threshold", "1.5"]),
        1
    );
    assert_eq!(code(d, &["denoise", "--pair", "es-arg", "-i", "c.tsv", "-o", "x", "--scorer", "cmd", "--command", "false"]), 2);
}

#[test]
fn ft_bt_and_tel() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("mono.es"), "uno\ndos\ntres\n").unwrap();
    ok(d, &["ft", "-i", "mono.es", "--pair", "es-arg", "--teacher-cmd", "tr a-z A-Z", "-o", "ft.tsv"]);
    let ft = fs::read_to_string(d.join("ft.tsv")).unwrap();
    assert!(ft.starts_with("#bitext-v1\n"));
    assert_eq!(pairs(&d.join("ft.tsv"))[0], ("uno".into(), "UNO".into()));
    assert!(ft.contains("\tft\t"));

    ok(d, &["bt", "-i", "mono.es", "--pair", "arg-es", "--teacher-cmd", "cat", "-o", "bt.tsv", "--sample", "2"]);
    assert_eq!(pairs(&d.join("bt.tsv")).len(), 2);
    assert!(fs::read_to_string(d.join("bt.tsv")).unwrap().contains("\tbt\t"));

    assert_eq!(code(d, &["ft", "-i", "mono.es", "--pair", "es-arg", "--teacher-cmd", "head -n 2", "-o", "x.tsv"]), 2);
    assert!(!d.join("x.tsv").exists());

    fs::write(d.join("sys1"), "uno\ndos\ntres\n").unwrap();
    ok(
        d,
        &["tel-assemble", "--dev", "mono.es", "--pair", "es-arg", "--outputs", "sys1", "--system", "cat", "--system", "tr a-z A-Z", "-o", "tel.tsv"],
    );
    let tel = pairs(&d.join("tel.tsv"));
    assert_eq!(tel.len(), 6);
    assert!(fs::read_to_string(d.join("tel.tsv")).unwrap().contains("\ttel\t"));
}

#[test]
fn upsample_and_mix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("small.tsv"), "a\tb\n").unwrap();
    let big: String = (0..9).map(|i| format!("s{i}\tt{i}\n")).collect();
    fs::write(d.join("big.tsv"), big).unwrap();
    let out = lrmt(d, &["upsample", "--input", "es-arg=small.tsv", "--input", "es-ast=big.tsv", "--temperature", "1", "-o", "up.tsv"]);
    assert!(out.status.success());
    assert_eq!(pairs(&d.join("up.tsv")).len(), 10);

    ok(d, &["mix", "--input", "es-arg=small.tsv", "--input", "es-ast=big.tsv", "--seed", "3", "-o", "m1.tsv"]);
    ok(d, &["mix", "--input", "es-arg=small.tsv", "--input", "es-ast=big.tsv", "--seed", "3", "-o", "m2.tsv"]);
    assert_eq!(fs::read(d.join("m1.tsv")).unwrap(), fs::read(d.join("m2.tsv")).unwrap());
    assert_eq!(pairs(&d.join("m1.tsv")).len(), 10);
}

#[test]
fn reference_manifest_validates_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifests = workspace_root().join("manifests");
    fs::copy(manifests.join("reference.toml"), d.join("reference.toml")).unwrap();
    fs::create_dir(d.join("data")).unwrap();
    for entry in fs::read_dir(manifests.join("data")).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), d.join("data").join(entry.file_name())).unwrap();
    }
    let v = ok(d, &["validate", "reference.toml"]);
    assert!(v.contains("ok, 22 stages"), "{v}");
    let report = ok(d, &["run", "reference.toml"]);
    assert!(report.contains("clean-arg") && report.contains("tel-arg"), "{report}");
    assert!(d.join("out/run_report.json").is_file());
    assert_eq!(fs::read_to_string(d.join("out/run_report.txt")).unwrap(), report);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["--help"]), 0);
    assert_eq!(code(d, &["--version"]), 0);
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["clean", "--pair", "ES-arg", "-i", "x", "-o", "y"]), 1);
    assert_eq!(code(d, &["validate", "missing.toml"]), 1);

    fs::write(d.join("bad.toml"), "[global]\noutput_dir = \"out\"\n").unwrap();
    let out = lrmt(d, &["validate", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("global.seed required"));
    assert_eq!(code(d, &["run", "bad.toml"]), 1);

    fs::write(d.join("dev.es"), "uno\ndos\n").unwrap();
    fs::write(
        d.join("fail.toml"),
        "[global]\nseed = 1\noutput_dir = \"out\"\n\n[inputs.dev]\nkind = \"mono\"\npath = \"dev.es\"\nlang = \"es\"\n\n\
         [[stages]]\nname = \"tel\"\nkind = \"tel-assemble\"\ninputs = [\"dev\"]\nparams = { tgt = \"arg\", systems = [\"false\"] }\n",
    )
    .unwrap();
    let out = lrmt(d, &["run", "fail.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage tel failed"));
}
