//! Small on-disk corpus shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_textvqa"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert_eq!(
        code(&out),
        0,
        "{args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn answers(spec: &[(&str, usize)]) -> Value {
    let mut id = 0;
    let mut out = Vec::new();
    for &(a, n) in spec {
        for _ in 0..n {
            id += 1;
            out.push(json!({"answer": a, "answer_confidence": "yes", "answer_id": id}));
        }
    }
    assert_eq!(out.len(), 10);
    Value::Array(out)
}

/// (question_id, image_id, question, question_type, answer_type, answers)
pub type Question = (
    u64,
    u64,
    &'static str,
    &'static str,
    &'static str,
    Vec<(&'static str, usize)>,
);

pub fn questions() -> Vec<Question> {
    vec![
        (
            101,
            1,
            "What color is the couch?",
            "what color is the",
            "other",
            vec![("red", 10)],
        ),
        (
            102,
            1,
            "Is there a dog?",
            "is there a",
            "yes/no",
            vec![("yes", 10)],
        ),
        (
            103,
            1,
            "What animal is this?",
            "what animal is",
            "other",
            vec![("dog", 8), ("puppy", 2)],
        ),
        (
            104,
            1,
            "Is the dog sleeping?",
            "is the",
            "yes/no",
            vec![("no", 7), ("yes", 3)],
        ),
        (
            201,
            2,
            "Is it daytime?",
            "is it",
            "yes/no",
            vec![("yes", 7), ("no", 3)],
        ),
        (
            202,
            2,
            "What is in the bowl?",
            "what is in the",
            "other",
            vec![("fruit", 10)],
        ),
        (
            203,
            2,
            "How many pizzas are there?",
            "how many",
            "number",
            vec![("1", 9), ("one", 1)],
        ),
        (
            301,
            3,
            "What color is the car?",
            "what color is the",
            "other",
            vec![("blue", 9), ("navy", 1)],
        ),
        (
            302,
            3,
            "Is the car parked?",
            "is the",
            "yes/no",
            vec![("yes", 10)],
        ),
        (
            303,
            3,
            "What is the vehicle?",
            "what is the",
            "other",
            vec![("car", 10)],
        ),
        (
            401,
            4,
            "What is the man holding?",
            "what is the",
            "other",
            vec![("umbrella", 6), ("kite", 4)],
        ),
        (
            402,
            4,
            "Is it raining?",
            "is it",
            "yes/no",
            vec![("yes", 10)],
        ),
        // Excluded: image 5 has no narrative, image 6 no captions, 701 no annotation.
        (
            501,
            5,
            "What is on the plate?",
            "what is on the",
            "other",
            vec![("cake", 10)],
        ),
        (
            601,
            6,
            "Is this a kitchen?",
            "is this a",
            "yes/no",
            vec![("yes", 10)],
        ),
    ]
}

pub const UNANNOTATED: u64 = 701;

pub fn captions() -> Vec<(u64, u64, &'static str)> {
    vec![
        (1, 11, "A brown dog sits on a red couch."),
        (1, 12, "A dog rests on the couch."),
        (1, 13, "A small dog near a pillow."),
        (1, 14, "Red couch with a dog on it."),
        (1, 15, "The dog looks at the camera."),
        (1, 16, "A sixth caption about a sleepy dog."),
        (2, 21, "A pizza on a wooden table."),
        (2, 22, "A bowl of fruit next to a pizza."),
        (2, 23, "Lunch with pizza and fruit."),
        (2, 24, "A table with a bowl and a pizza."),
        (2, 25, "Sunlight falls on a pizza."),
        (3, 31, "A blue car parked on the street."),
        (3, 32, "The car is blue and shiny."),
        (3, 33, "A parked car near a truck."),
        (3, 34, "A street with a blue car."),
        (3, 35, "Cars line the quiet street."),
        (4, 41, "A man holds an umbrella in the rain."),
        (4, 42, "A person with an umbrella."),
        (5, 51, "A cake on a plate."),
    ]
}

pub fn narratives() -> Vec<(Value, &'static str)> {
    vec![
        (
            json!(1),
            "In this image we can see a dog on a red couch. There is a pillow.",
        ),
        (
            json!("2"),
            "In this picture we can see a pizza and a bowl of fruit on a table. It is sunny.",
        ),
        (
            json!(3),
            "We can see a blue car on the road. In the background there is a truck.",
        ),
        (
            json!(4),
            "A man is standing in the rain. He holds an umbrella.",
        ),
        (json!(6), "A kitchen with a sink."),
    ]
}

pub const LEXICON: &str = "\
fruit\thypernym\tfood
fruit\thyponym\tapple
dog\thypernym\tanimal
dog\thyponym\tpuppy
dog\tsynonym\tcanine
couch\tsynonym\tsofa
car\thypernym\tvehicle
car\thyponym\tsedan
car\tsynonym\tauto
umbrella\thypernym\tcanopy
pizza\thyponym\tcalzone
sits\tsynonym\trests
street\tsynonym\troad
";

pub const EMBEDDINGS: &str = "\
dog 1.0 0.0 0.0
canine 0.99 0.01 0.0
cat 0.9 0.1 0.0
pizza 0.0 1.0 0.0
burger 0.1 0.9 0.0
car 0.0 0.0 1.0
auto 0.0 0.01 0.99
truck 0.1 0.0 0.9
couch 0.5 0.5 0.0
sofa 0.5 0.49 0.0
chair 0.6 0.4 0.0
bowl 0.2 0.7 0.1
cup 0.25 0.65 0.1
umbrella 0.3 0.3 0.4
kite 0.35 0.3 0.35
";

pub const TRANSLATIONS: &str = "\
What color is the couch?\tWhich color does the couch have?
Is there a dog?\tIs a dog there?
Is it daytime?\tIs it day?
";

pub const INFILL: &str = "\
replace\tdog\tpuppy
replace\tcar\tvehicle
insert\tis\treally
insert\ta\tvery
";

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub config: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn config_str(&self) -> &str {
        self.config.to_str().unwrap()
    }

    pub fn out(&self) -> PathBuf {
        self.path("out")
    }

    /// Writes a config with `extra` appended verbatim (TOML).
    pub fn write_config(&self, name: &str, extra: &str) -> PathBuf {
        let path = self.path(name);
        fs::write(&path, config_text(extra)).unwrap();
        path
    }
}

fn config_text(extra: &str) -> String {
    format!(
        r#"seed = 42
shards = 1
mode = "whole"
out = "out"
{extra}
[paths]
questions = "questions.json"
annotations = "annotations.json"
captions = ["captions.json"]
narratives = ["narratives.jsonl"]
lexicon = "lexicon.tsv"
embeddings = "glove.txt"

[dav]
scorer = "lexical_overlap"
top_d = 3
top_j = 1

[dal]
translator = "dictionary:translations.tsv"
infiller = "dictionary:infill.tsv"
"#
    )
}

pub fn write_corpus(dir: &Path) {
    let qs = questions();
    let mut question_records: Vec<Value> = qs
        .iter()
        .map(|(qid, img, q, ..)| json!({"question_id": qid, "image_id": img, "question": q}))
        .collect();
    question_records
        .push(json!({"question_id": UNANNOTATED, "image_id": 1, "question": "Is the couch soft?"}));
    let annotations: Vec<Value> = qs
        .iter()
        .map(|(qid, img, _, qt, at, a)| {
            json!({
                "question_id": qid,
                "image_id": img,
                "question_type": qt,
                "answer_type": at,
                "multiple_choice_answer": a[0].0,
                "answers": answers(a),
            })
        })
        .collect();
    let caps: Vec<Value> = captions()
        .iter()
        .map(|(img, id, c)| json!({"image_id": img, "id": id, "caption": c}))
        .collect();
    let narr: String = narratives()
        .iter()
        .map(|(img, text)| json!({"image_id": img, "caption": text}).to_string() + "\n")
        .collect();

    fs::write(
        dir.join("questions.json"),
        json!({"questions": question_records}).to_string(),
    )
    .unwrap();
    fs::write(
        dir.join("annotations.json"),
        json!({"annotations": annotations}).to_string(),
    )
    .unwrap();
    fs::write(
        dir.join("captions.json"),
        json!({"annotations": caps}).to_string(),
    )
    .unwrap();
    fs::write(dir.join("narratives.jsonl"), narr).unwrap();
    fs::write(dir.join("lexicon.tsv"), LEXICON).unwrap();
    fs::write(dir.join("glove.txt"), EMBEDDINGS).unwrap();
    fs::write(dir.join("translations.tsv"), TRANSLATIONS).unwrap();
    fs::write(dir.join("infill.tsv"), INFILL).unwrap();
}

pub fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let config = dir.path().join("config.toml");
    fs::write(&config, config_text("")).unwrap();
    Fixture { dir, config }
}

/// Number of questions that survive the join.
pub const JOINED: usize = 12;

pub fn read_lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
