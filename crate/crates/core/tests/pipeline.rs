mod common;

use std::fs;
use std::path::Path;

use lrmt_core::pipeline::{run_manifest, validate_manifest, PipelineManifest, RunReport, REPORT_JSON, REPORT_TEXT};
use lrmt_core::Error;

use common::*;

fn reference_manifest(dir: &Path) -> PipelineManifest {
    fs::copy(workspace_root().join("manifests/reference.toml"), dir.join("reference.toml")).unwrap();
    write_reference_data(dir);
    PipelineManifest::load(&dir.join("reference.toml")).unwrap()
}

/// The data shipped next to the reference manifest is the generator's output.
/// Set `LRMT_BLESS=1` to regenerate it.
#[test]
fn shipped_reference_data_is_current() {
    let shipped = workspace_root().join("manifests");
    if std::env::var_os("LRMT_BLESS").is_some() {
        write_reference_data(&shipped);
    }
    let fresh = tempfile::tempdir().unwrap();
    write_reference_data(fresh.path());
    for entry in fs::read_dir(fresh.path().join("data")).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name();
        let want = fs::read(entry.path()).unwrap();
        let got = fs::read(shipped.join("data").join(&name))
            .unwrap_or_else(|_| panic!("manifests/data/{} missing; rerun with LRMT_BLESS=1", name.to_string_lossy()));
        assert!(got == want, "manifests/data/{} is stale; rerun with LRMT_BLESS=1", name.to_string_lossy());
    }
}

#[test]
fn reference_run_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = reference_manifest(tmp.path());
    let report = run_manifest(&manifest).unwrap();
    let out = tmp.path().join("out");

    let json: RunReport = serde_json::from_str(&fs::read_to_string(out.join(REPORT_JSON)).unwrap()).unwrap();
    assert_eq!(json.inputs, report.inputs);
    for (a, b) in json.stages.iter().zip(&report.stages) {
        assert_eq!((&a.name, a.output, &a.outputs), (&b.name, b.output, &b.outputs));
    }
    let text = fs::read_to_string(out.join(REPORT_TEXT)).unwrap();
    assert_eq!(text, report.to_text());
    for stage in &report.stages {
        assert!(text.contains(&stage.name));
        for digest in &stage.outputs {
            assert!(out.join(&digest.file).is_file(), "{} missing", digest.file);
            assert!(text.contains(&format!("{}  {}", digest.sha256, digest.file)));
        }
    }

    let tel = report.stage("tel-arg").unwrap();
    assert_eq!(tel.output, 90, "three distinct systems over 30 dev lines");
    let ft = report.stage("ft-arg").unwrap();
    assert_eq!(ft.output, 100);
    let finetune = report.stage("finetune-arg").unwrap();
    assert_eq!(
        finetune.output,
        report.stage("denoise-arg").unwrap().output + ft.output + report.stage("bt-arg").unwrap().output
    );
    assert!(fs::read_to_string(out.join("bpe-finetune-arg.tsv")).unwrap().contains('\u{2581}'));
    let tagged = fs::read_to_string(out.join("tag-arn.tsv")).unwrap();
    assert!(tagged.lines().skip(1).all(|l| l.starts_with("<arn> ")));
}

#[test]
fn seed_changes_sampled_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = reference_manifest(tmp.path());
    let a = run_manifest(&manifest).unwrap();
    let mut reseeded = manifest.clone();
    reseeded.global.seed = Some(7);
    let b = run_manifest(&reseeded).unwrap();
    let digest = |r: &RunReport, s: &str| r.stage(s).unwrap().outputs.clone();
    assert_eq!(digest(&a, "clean-arg"), digest(&b, "clean-arg"));
    assert_ne!(digest(&a, "multilingual"), digest(&b, "multilingual"));
}

#[test]
fn invalid_manifest_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[global]
output_dir = "out"

[inputs.a]
kind = "parallel"
path = "missing.tsv"
src = "es"
tgt = "arg"

[[stages]]
name = "x"
kind = "denoise"
inputs = ["y"]
params = { threshold = 1.5, scorer = "cmd", command = "cat" }

[[stages]]
name = "y"
kind = "clean"
inputs = ["x"]

[[stages]]
name = "z"
kind = "frobnicate"
inputs = ["a"]
"#;
    let manifest = PipelineManifest::parse(text, tmp.path()).unwrap();
    let diags: Vec<String> = validate_manifest(&manifest).iter().map(ToString::to_string).collect();
    let has = |needle: &str| diags.iter().any(|d| d.contains(needle));
    assert!(has("global.seed required"), "{diags:#?}");
    assert!(has("inputs.a.path file not found"), "{diags:#?}");
    assert!(has("stages.x.params.threshold"), "{diags:#?}");
    assert!(has("cycle"), "{diags:#?}");
    assert!(has("stages.z"), "{diags:#?}");
    match run_manifest(&manifest) {
        Err(Error::InvalidManifest(list)) => assert_eq!(list, diags),
        other => panic!("expected InvalidManifest, got {other:?}"),
    }
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn failing_command_names_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    write_lines(&tmp.path().join("dev.es"), &["uno".to_string(), "dos".to_string()]);
    let text = r#"
[global]
seed = 1
output_dir = "out"

[inputs.dev]
kind = "mono"
path = "dev.es"
lang = "es"

[[stages]]
name = "tel"
kind = "tel-assemble"
inputs = ["dev"]
params = { tgt = "arg", systems = ["cat", "head -n 1"] }
"#;
    let manifest = PipelineManifest::parse(text, tmp.path()).unwrap();
    assert!(validate_manifest(&manifest).is_empty());
    match run_manifest(&manifest) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "tel");
            assert!(matches!(*source, Error::LengthMismatch { .. }), "{source}");
        }
        other => panic!("expected a stage failure, got {other:?}"),
    }
}
