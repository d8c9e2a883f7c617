use std::path::Path;
use std::process::{Command, Output};

fn mmsldl(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmsldl"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("MMSLDL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = mmsldl(out, args);
    assert!(
        o.status.success(),
        "{args:?} exited {:?}\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().skip(1).filter(|l| !l.is_empty()).count()
}

fn synth(dir: &Path) -> String {
    let args = ["synth", "--classes", "3", "--per-class", "12", "--dim", "24", "--rank", "2"];
    ok(dir, &args);
    dir.join("dataset").to_string_lossy().into_owned()
}

#[test]
fn synth_train_eval_decompose_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = synth(&root.join("synth"));

    let train_out = root.join("train");
    ok(&train_out, &["--dataset", &data, "train", "--train-per-class", "6"]);
    for f in ["model/manifest", "train_report.json", "residuals.tsv", "config.toml"] {
        assert!(train_out.join(f).is_file(), "missing {f}");
    }

    let eval_out = root.join("eval");
    ok(&eval_out, &["--dataset", &data, "eval", "--train-per-class", "6", "--repeats", "2"]);
    assert_eq!(data_rows(&eval_out.join("metrics.tsv")), 3);
    assert!(eval_out.join("confusion.tsv").is_file());

    let model = train_out.join("model");
    let model = model.to_string_lossy();
    let saved_out = root.join("eval_saved");
    ok(&saved_out, &["--dataset", &data, "eval", "--train-per-class", "6", "--model", &model]);
    assert_eq!(data_rows(&saved_out.join("metrics.tsv")), 2);

    let dec_out = root.join("decompose");
    ok(
        &dec_out,
        &["--dataset", &data, "decompose", "--model", &model, "--samples", "0,1", "--train-per-class", "6"],
    );
    let pngs = std::fs::read_dir(&dec_out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, 3 * 2 * 2);
    assert!(dec_out.join("decompose.json").is_file());
}

#[test]
fn transform_writes_both_planes() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("face.png");
    image::RgbImage::from_fn(12, 10, |x, y| image::Rgb([40 + 10 * x as u8, 60 + 8 * y as u8, 90]))
        .save(&input)
        .unwrap();
    let out = tmp.path().join("out");
    ok(&out, &["transform", &input.to_string_lossy(), "--width", "8", "--height", "6"]);
    for f in ["face_raw.png", "face_invariant.png"] {
        let img = image::open(out.join(f)).unwrap();
        assert_eq!((img.width(), img.height()), (8, 6), "{f}");
    }
    let jsonl = std::fs::read_to_string(out.join("transform.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1);
}

#[test]
fn gridsearch_scores_every_point_and_fold() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(&tmp.path().join("synth"));
    let out = tmp.path().join("grid");
    ok(
        &out,
        &[
            "--dataset",
            &data,
            "gridsearch",
            "--train-per-class",
            "6",
            "--folds",
            "2",
            "--alphas",
            "0,0.01",
            "--betas",
            "0.1",
            "--lambdas",
            "0.3,1",
        ],
    );
    assert_eq!(data_rows(&out.join("scores.tsv")), 4 * 2);
    let best = std::fs::read_to_string(out.join("best.toml")).unwrap();
    assert!(best.contains("alpha"), "{best}");
}

#[test]
fn failures_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"not a number\"\n").unwrap();
    assert_eq!(mmsldl(&out, &["--config", &bad.to_string_lossy(), "train"]).status.code(), Some(2));
    assert_eq!(mmsldl(&out, &["train", "--gamma", "1.5"]).status.code(), Some(2));
    assert_eq!(mmsldl(&out, &["frobnicate"]).status.code(), Some(2));

    let missing = tmp.path().join("no-such-dataset");
    assert_eq!(mmsldl(&out, &["--dataset", &missing.to_string_lossy(), "train"]).status.code(), Some(3));

    let empty_model = tmp.path().join("empty-model");
    std::fs::create_dir(&empty_model).unwrap();
    let code = mmsldl(&out, &["eval", "--model", &empty_model.to_string_lossy()]).status.code();
    assert_eq!(code, Some(3));
}

#[test]
fn corrupted_model_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(&tmp.path().join("synth"));
    let train_out = tmp.path().join("train");
    ok(&train_out, &["--dataset", &data, "train", "--train-per-class", "6"]);
    let model = train_out.join("model");
    let blob = std::fs::read_dir(&model)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "mat64"))
        .unwrap();
    let mut bytes = std::fs::read(&blob).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x55;
    std::fs::write(&blob, bytes).unwrap();
    let o = mmsldl(
        &tmp.path().join("eval"),
        &["--dataset", &data, "eval", "--train-per-class", "6", "--model", &model.to_string_lossy()],
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
