mod common;

use std::fs;

use common::*;
use textvqa::pipeline::RunManifest;
use textvqa::records::read_jsonl;
use textvqa::triplet::{Origin, Triplet};

fn build(fx: &Fixture, extra: &[&str]) -> Vec<Triplet> {
    let mut args = vec!["--config", fx.config_str(), "build"];
    args.extend_from_slice(extra);
    ok(&args);
    read_jsonl::<Triplet>(&fx.out().join("triplets.jsonl"))
        .unwrap()
        .1
}

#[test]
fn build_joins_and_reports_exclusions() {
    let fx = fixture();
    let triplets = build(&fx, &[]);
    assert_eq!(triplets.len(), JOINED);
    assert!(triplets
        .windows(2)
        .all(|w| w[0].question_id < w[1].question_id));
    assert!(triplets.iter().all(|t| t.origin == Origin::Original));

    let (header, _) = read_jsonl::<Triplet>(&fx.out().join("triplets.jsonl")).unwrap();
    let header = header.expect("header record");
    assert_eq!(header.seed, 42);
    assert_eq!(header.tool, "textvqa");

    let m = RunManifest::load(&fx.out().join("build.manifest.json")).unwrap();
    let join = m.join.unwrap();
    assert_eq!(join.missing_annotation, vec![UNANNOTATED]);
    assert_eq!(join.missing_narrative, vec![501]);
    assert_eq!(join.missing_captions, vec![601]);
    // Image 4 has two captions; the whole mode asks for five.
    assert_eq!(m.diagnostics.count("fewer_captions"), 2);
    assert_eq!(m.num_total, JOINED);

    let q101 = &triplets[0];
    assert!(q101
        .description
        .starts_with("In this image we can see a dog on a red couch."));
    assert!(!q101.description.contains("sixth caption"));
    assert_eq!(
        q101.sequence().as_str(),
        format!("<s> {} </s> </s> {} </s>", q101.question, q101.description)
    );
}

#[test]
fn unannotated_question_is_diagnosed_not_joined() {
    let fx = fixture();
    let triplets = build(&fx, &[]);
    assert!(triplets.iter().all(|t| t.question_id != UNANNOTATED));
    let m = RunManifest::load(&fx.out().join("build.manifest.json")).unwrap();
    assert_eq!(m.join.unwrap().missing_annotation, vec![UNANNOTATED]);
}

#[test]
fn mode_none_gives_empty_descriptions() {
    let fx = fixture();
    let triplets = build(&fx, &["--mode", "none"]);
    assert!(triplets.iter().all(|t| t.description.is_empty()));
    assert!(triplets[0].sequence().as_str().ends_with("</s> </s> </s>"));
}

#[test]
fn shard_count_does_not_change_build_output() {
    let fx = fixture();
    let out1 = fx.path("s1");
    let out4 = fx.path("s4");
    ok(&[
        "--config",
        fx.config_str(),
        "--out",
        out1.to_str().unwrap(),
        "--shards",
        "1",
        "build",
        "--mode",
        "captions:2",
    ]);
    ok(&[
        "--config",
        fx.config_str(),
        "--out",
        out4.to_str().unwrap(),
        "--shards",
        "4",
        "--threads",
        "3",
        "build",
        "--mode",
        "captions:2",
    ]);
    assert_eq!(
        fs::read(out1.join("triplets.jsonl")).unwrap(),
        fs::read(out4.join("triplets.jsonl")).unwrap()
    );
}

#[test]
fn seed_flag_overrides_config() {
    let fx = fixture();
    let a = build(&fx, &["--mode", "captions:1"]);
    ok(&[
        "--config",
        fx.config_str(),
        "--seed",
        "7",
        "--out",
        fx.path("o7").to_str().unwrap(),
        "build",
        "--mode",
        "captions:1",
    ]);
    let (h, b) = read_jsonl::<Triplet>(&fx.path("o7").join("triplets.jsonl")).unwrap();
    assert_eq!(h.unwrap().seed, 7);
    assert_eq!(a.len(), b.len());
    assert!(a
        .iter()
        .zip(&b)
        .any(|(x, y)| x.description != y.description));
}

#[test]
fn augment_all_techniques() {
    let fx = fixture();
    build(&fx, &[]);
    let out = ok(&["--config", fx.config_str(), "augment", "-t", "all"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("total"));

    let m = RunManifest::load(&fx.out().join("augment.manifest.json")).unwrap();
    assert!(m.is_consistent());
    assert_eq!(m.num_original, JOINED);
    assert_eq!(m.num_synthetic.len(), 14);

    let dir = fx.out().join("augment");
    for (name, &n) in &m.num_synthetic {
        let (header, recs) = read_jsonl::<Triplet>(&dir.join(format!("{name}.jsonl"))).unwrap();
        assert_eq!(header.unwrap().seed, 42);
        assert_eq!(recs.len(), n, "{name}");
        assert!(recs
            .iter()
            .all(|t| t.origin.as_str() == name && t.parent_question_id != t.question_id));
    }
    let (_, all) = read_jsonl::<Triplet>(&dir.join("augmented.jsonl")).unwrap();
    assert_eq!(all.len(), m.num_total);

    // Spot checks against the fixture.
    let n = |k: &str| m.num_synthetic[k];
    // dog -> animal (103), fruit -> food (202), car -> vehicle (303), umbrella -> canopy (401).
    assert_eq!(n("hypernym"), 4);
    // dog -> puppy collides with the answer "puppy" in 103; fruit -> apple, car -> sedan.
    assert_eq!(n("hyponym"), 2);
    assert_eq!(n("color_inversion"), 2);
    // Every EDA run emits one sample per original.
    assert_eq!(n("eda_q"), JOINED);
    assert_eq!(n("bt_q"), 3);
    assert_eq!(n("bt_d"), 0);
    assert_eq!(n("cwr_q"), JOINED);
}

#[test]
fn adversarial_rules_on_fixture() {
    let fx = fixture();
    build(&fx, &[]);
    ok(&["--config", fx.config_str(), "augment", "-t", "adversarial"]);
    let (_, recs) = read_jsonl::<Triplet>(&fx.out().join("augment/adversarial.jsonl")).unwrap();
    // "Is there a dog?": dog -> cat (canine is a synonym and excluded), answer flips to no.
    let dog: Vec<&Triplet> = recs
        .iter()
        .filter(|t| t.parent_question_id == 102)
        .collect();
    let with_cat = dog
        .iter()
        .find(|t| t.description.contains(" cat "))
        .expect("dog replaced");
    assert_eq!(with_cat.answers, vec!["no".to_string()]);
    assert!(!with_cat.description.split_whitespace().any(|w| w == "dog"));
    // The couch is not mentioned in the question, so answers stay.
    let sofa = dog
        .iter()
        .find(|t| !t.description.contains("couch"))
        .expect("couch replaced");
    assert_eq!(sofa.answers, vec!["yes".to_string(); 10]);
    // "Is it daytime?": pizza -> burger, answers unchanged.
    let day: Vec<&Triplet> = recs
        .iter()
        .filter(|t| t.parent_question_id == 201)
        .collect();
    assert!(day
        .iter()
        .any(|t| t.description.contains("burger") && t.answers.len() == 10));
    // Non yes/no questions yield nothing.
    assert!(recs
        .iter()
        .all(|t| [102, 104, 201, 302, 402].contains(&t.parent_question_id)));
}

#[test]
fn identity_back_translation_yields_nothing() {
    let fx = fixture();
    build(&fx, &[]);
    let cfg = fx.write_config("identity.toml", "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("dictionary:translations.tsv", "identity");
    fs::write(&cfg, text).unwrap();
    ok(&[
        "--config",
        cfg.to_str().unwrap(),
        "augment",
        "-t",
        "bt_q",
        "-t",
        "bt_d",
    ]);
    let m = RunManifest::load(&fx.out().join("augment.manifest.json")).unwrap();
    assert_eq!(m.synthetic_total(), 0);
    assert_eq!(m.num_total, m.num_original);
    assert_eq!(m.diagnostics.count("bt_unchanged"), 2 * JOINED as u64);
}

#[test]
fn truncate_grid() {
    let fx = fixture();
    build(&fx, &[]);
    let input = fx.out().join("triplets.jsonl");
    let out = ok(&["--config", fx.config_str(), "truncate"]);
    let files: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(files.len(), 11);
    assert_eq!(fs::read(files[0]).unwrap(), fs::read(&input).unwrap());

    let (_, base) = read_jsonl::<Triplet>(&input).unwrap();
    for (i, f) in files.iter().enumerate() {
        let rate = i as f64 / 10.0;
        let (_, recs) = read_jsonl::<Triplet>(std::path::Path::new(f)).unwrap();
        for (b, t) in base.iter().zip(&recs) {
            let d = b.description.split_whitespace().count();
            let expected = d - ((rate * d as f64) + 1e-9).floor() as usize;
            assert_eq!(t.description.split_whitespace().count(), expected);
            assert_eq!(t.question, b.question);
        }
    }
}

#[test]
fn truncate_rejects_bad_rate() {
    let fx = fixture();
    build(&fx, &[]);
    let out = run(&[
        "--config",
        fx.config_str(),
        "truncate",
        "--rates",
        "0.5,1.5",
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn stats_layout() {
    let fx = fixture();
    let out = ok(&["--config", fx.config_str(), "stats"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("description"));
    let rows: Vec<serde_json::Value> =
        serde_json::from_slice(&fs::read(fx.out().join("stats.json")).unwrap()).unwrap();
    let get = |m: &str| {
        rows.iter().find(|r| r["mode"] == m).unwrap()["mean_length"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(rows.len(), 8);
    assert_eq!(get("none"), 0.0);
    // Whole = narrative + the first five captions, computed from the fixture.
    let words = |s: &str| s.split_whitespace().count();
    let joined: Vec<u64> = questions()
        .iter()
        .filter(|q| q.1 <= 4)
        .map(|q| q.1)
        .collect();
    assert_eq!(joined.len(), JOINED);
    let total: usize = joined
        .iter()
        .map(|&img| {
            let n = narratives()
                .into_iter()
                .find(|n| {
                    n.0.as_u64()
                        .or_else(|| n.0.as_str().and_then(|s| s.parse().ok()))
                        == Some(img)
                })
                .unwrap()
                .1;
            let caps: usize = captions()
                .iter()
                .filter(|c| c.0 == img)
                .take(5)
                .map(|c| words(c.2))
                .sum();
            words(n) + caps
        })
        .sum();
    assert!((get("whole") - total as f64 / JOINED as f64).abs() < 1e-9);
    // Additivity holds up to the one image with a sixth caption.
    assert!((get("whole") - (get("narrative") + get("captions:5"))).abs() < 1.0);
    assert!(get("captions:1") < get("captions:2"));
}

fn write_predictions(fx: &Fixture, name: &str, pairs: &[(u64, &str)]) -> String {
    let text: String = pairs
        .iter()
        .map(|(q, a)| serde_json::json!({"question_id": q, "answer": a}).to_string() + "\n")
        .collect();
    let p = fx.path(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn eval_and_gap() {
    let fx = fixture();
    let ann = fx.path("annotations.json");
    let base = write_predictions(&fx, "base.jsonl", &[(101, "red"), (102, "no")]);
    let better = write_predictions(
        &fx,
        "better.jsonl",
        &[(101, "Red."), (102, "yes"), (203, "one")],
    );
    let base_report = fx.path("base.json");
    ok(&[
        "eval",
        "--predictions",
        &base,
        "--annotations",
        ann.to_str().unwrap(),
        "--report",
        base_report.to_str().unwrap(),
    ]);
    let out = ok(&[
        "eval",
        "--predictions",
        &better,
        "--annotations",
        ann.to_str().unwrap(),
        "--baseline",
        base_report.to_str().unwrap(),
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0].split_whitespace().collect::<Vec<_>>(),
        ["Yes/No", "Number", "Other", "Overall", "Gap"]
    );
    // Base: 1 of 14 questions fully right -> 7.14. Better: "one" normalizes to
    // "1", which 9 of 10 annotators gave -> 1.0; plus 101 and 102 -> 3/14.
    let cells: Vec<&str> = lines[1].split_whitespace().collect();
    assert_eq!(cells[3], "21.43");
    assert_eq!(cells[4], "+14.29");
}

#[test]
fn eval_unknown_question_is_data_error() {
    let fx = fixture();
    let p = write_predictions(&fx, "p.jsonl", &[(999, "yes")]);
    let out = run(&[
        "eval",
        "--predictions",
        &p,
        "--annotations",
        fx.path("annotations.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("999"));
}

#[test]
fn overlap_command() {
    let fx = fixture();
    let a = write_predictions(
        &fx,
        "a.jsonl",
        &[(101, "red"), (102, "yes"), (202, "apple"), (301, "red")],
    );
    let b = write_predictions(
        &fx,
        "b.jsonl",
        &[
            (101, "red"),
            (102, "no"),
            (202, "fruit"),
            (301, "green"),
            (999, "x"),
        ],
    );
    let report = fx.path("overlap.json");
    ok(&[
        "overlap",
        "--a",
        &a,
        "--b",
        &b,
        "--annotations",
        fx.path("annotations.json").to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    let r: textvqa::eval::OverlapReport =
        serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r.shared, 4);
    assert_eq!(
        [
            r.both_correct.count,
            r.only_a_correct.count,
            r.only_b_correct.count,
            r.both_wrong.count
        ],
        [1, 1, 1, 1]
    );
    let c = write_predictions(&fx, "c.jsonl", &[(402, "yes")]);
    let out = run(&[
        "overlap",
        "--a",
        &a,
        "--b",
        &c,
        "--annotations",
        fx.path("annotations.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn import_lexicon_from_wordnet() {
    let fx = fixture();
    let wn = fx.path("wn");
    fs::create_dir(&wn).unwrap();
    fs::write(
        wn.join("data.noun"),
        "  1 header\n00000100 03 n 01 food 0 001 ~ 00000200 n 0000 | eaten\n00000200 13 n 01 fruit 0 001 @ 00000100 n 0000 | ripened\n",
    )
    .unwrap();
    fs::write(
        wn.join("index.noun"),
        "  1 header\nfood n 1 1 ~ 1 0 00000100\nfruit n 1 1 @ 1 0 00000200\n",
    )
    .unwrap();
    let out_path = fx.path("lex.tsv");
    ok(&[
        "import-lexicon",
        "--wordnet",
        wn.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.lines().any(|l| l == "fruit\thypernym\tfood"));
    assert!(text.lines().any(|l| l == "food\thyponym\tfruit"));
}

#[test]
fn exit_codes() {
    let fx = fixture();
    build(&fx, &[]);
    // Usage: unknown technique, unknown flag, bad mode, unknown config key.
    assert_eq!(
        code(&run(&[
            "--config",
            fx.config_str(),
            "augment",
            "-t",
            "mixup"
        ])),
        1
    );
    assert_eq!(code(&run(&["build", "--frobnicate"])), 1);
    assert_eq!(
        code(&run(&[
            "--config",
            fx.config_str(),
            "build",
            "--mode",
            "captions:9"
        ])),
        1
    );
    let bad = fx.path("bad.toml");
    fs::write(&bad, "sed = 3\n").unwrap();
    assert_eq!(code(&run(&["--config", bad.to_str().unwrap(), "build"])), 1);
    // Help and version succeed.
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    // Data: a missing corpus file, a malformed one.
    fs::remove_file(fx.path("captions.json")).unwrap();
    assert_eq!(code(&run(&["--config", fx.config_str(), "build"])), 2);
    fs::write(
        fx.path("captions.json"),
        "{\"annotations\": [{\"image_id\": 1}]}",
    )
    .unwrap();
    let out = run(&["--config", fx.config_str(), "build"]);
    assert_eq!(code(&out), 2);
    // Backend: translation service unreachable for every sample.
    let cfg = fx.path("down.toml");
    let text = fs::read_to_string(fx.config_str())
        .unwrap()
        .replace("dictionary:translations.tsv", "service:http://127.0.0.1:9");
    fs::write(&cfg, text).unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "augment", "-t", "bt_q"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}
