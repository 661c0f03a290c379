//! Task vocabularies and prompt templating.
//!
//! A task file is a JSON document:
//!
//! ```json
//! {"tasks": [{"task_id": "roof_type", "task_kind": "classification",
//!             "prompt_template": "a photo of a building with a {} roof",
//!             "categories": ["gabled", "hipped", "flat"]}]}
//! ```
//!
//! Category order is significant: it defines score and label indices.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "{}";
pub const DEFAULT_TEMPLATE: &str = "a photo of {}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Segmentation,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Classification => "classification",
            TaskKind::Segmentation => "segmentation",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySpec {
    pub name: String,
    pub index: usize,
}

/// A validated task: kind, prompt template and ordered categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    task_id: String,
    task_kind: TaskKind,
    prompt_template: String,
    categories: Vec<CategorySpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRecord {
    task_id: String,
    task_kind: TaskKind,
    #[serde(default = "default_template")]
    prompt_template: String,
    categories: Vec<String>,
}

fn default_template() -> String {
    DEFAULT_TEMPLATE.to_owned()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    tasks: Vec<TaskRecord>,
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        task_kind: TaskKind,
        prompt_template: impl Into<String>,
        categories: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let task_id = task_id.into();
        let prompt_template = prompt_template.into();
        let invalid = |message: String| Error::Validation {
            task_id: task_id.clone(),
            message,
        };

        if task_id.is_empty() {
            return Err(invalid("task_id must be non-empty".into()));
        }
        let placeholders = prompt_template.matches(PLACEHOLDER).count();
        if placeholders != 1 {
            return Err(invalid(format!(
                "prompt_template must contain exactly one \"{{}}\", found {placeholders}"
            )));
        }
        let categories: Vec<CategorySpec> = categories
            .into_iter()
            .enumerate()
            .map(|(index, name)| CategorySpec {
                name: name.into(),
                index,
            })
            .collect();
        let min = match task_kind {
            TaskKind::Classification => 2,
            TaskKind::Segmentation => 1,
        };
        if categories.len() < min {
            return Err(invalid(format!(
                "{task_kind} tasks need at least {min} categories, found {}",
                categories.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if c.name.is_empty() {
                return Err(invalid(format!("category {} has an empty name", c.index)));
            }
            if prompt_template.replacen(PLACEHOLDER, &c.name, 1).contains(PLACEHOLDER) {
                return Err(invalid(format!(
                    "category `{}` leaves a placeholder in the rendered prompt",
                    c.name
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(invalid(format!("duplicate category name `{}`", c.name)));
            }
        }
        Ok(TaskSpec {
            task_id,
            task_kind,
            prompt_template,
            categories,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn prompt_template(&self) -> &str {
        &self.prompt_template
    }

    pub fn categories(&self) -> &[CategorySpec] {
        &self.categories
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn category(&self, index: usize) -> Option<&CategorySpec> {
        self.categories.get(index)
    }

    pub fn category_by_name(&self, name: &str) -> Option<&CategorySpec> {
        self.categories.iter().find(|c| c.name == name)
    }

    /// Substitutes the category name into the template's placeholder.
    pub fn render_prompt(&self, category: &CategorySpec) -> Result<String> {
        if self.categories.get(category.index) != Some(category) {
            return Err(Error::ForeignCategory {
                task_id: self.task_id.clone(),
                category: category.name.clone(),
            });
        }
        Ok(self.prompt_template.replacen(PLACEHOLDER, &category.name, 1))
    }

    /// Rendered prompts for every category, in category order.
    pub fn prompts(&self) -> Vec<String> {
        self.categories
            .iter()
            .map(|c| self.prompt_template.replacen(PLACEHOLDER, &c.name, 1))
            .collect()
    }

    /// Routing is declarative: the task file states the kind.
    pub fn route(&self) -> TaskKind {
        self.task_kind
    }

    pub(crate) fn expect_kind(&self, expected: TaskKind) -> Result<()> {
        if self.task_kind == expected {
            Ok(())
        } else {
            Err(Error::WrongTaskKind {
                task_id: self.task_id.clone(),
                expected: expected.as_str(),
                actual: self.task_kind.as_str(),
            })
        }
    }

    fn to_record(&self) -> TaskRecord {
        TaskRecord {
            task_id: self.task_id.clone(),
            task_kind: self.task_kind,
            prompt_template: self.prompt_template.clone(),
            categories: self.categories.iter().map(|c| c.name.clone()).collect(),
        }
    }
}

/// Parses and validates a task document. `origin` is only used in diagnostics.
pub fn parse_tasks(json: &str, origin: &Path) -> Result<Vec<TaskSpec>> {
    let file: TaskFile = serde_json::from_str(json).map_err(|e| Error::parse(origin, &e))?;
    let mut ids = HashSet::new();
    let mut tasks = Vec::with_capacity(file.tasks.len());
    for rec in file.tasks {
        if !ids.insert(rec.task_id.clone()) {
            return Err(Error::Validation {
                task_id: rec.task_id,
                message: "duplicate task_id".into(),
            });
        }
        tasks.push(TaskSpec::new(
            rec.task_id,
            rec.task_kind,
            rec.prompt_template,
            rec.categories,
        )?);
    }
    Ok(tasks)
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<TaskSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tasks(&text, path)
}

pub fn tasks_to_json(tasks: &[TaskSpec]) -> String {
    let file = TaskFile {
        tasks: tasks.iter().map(TaskSpec::to_record).collect(),
    };
    serde_json::to_string_pretty(&file).expect("task records always serialize")
}

pub fn find_task<'a>(tasks: &'a [TaskSpec], task_id: &str) -> Result<&'a TaskSpec> {
    tasks
        .iter()
        .find(|t| t.task_id == task_id)
        .ok_or_else(|| Error::UnknownTask(task_id.to_owned()))
}

/// Shipped task presets.
pub mod presets {
    use std::path::{Path, PathBuf};

    use super::{parse_tasks, TaskSpec};

    /// Overrides the directory holding `tasks.json`.
    pub const DATA_DIR_ENV: &str = "ZSBA_DATA_DIR";
    pub const TASKS_FILE: &str = "tasks.json";

    pub const ROOF_TYPE: &str = "roof_type";
    pub const YEAR_BUILT: &str = "year_built";
    pub const NUM_FLOORS: &str = "num_floors";
    pub const FACADE: &str = "facade";

    const BUNDLED: &str = include_str!("../data/tasks.json");

    pub fn data_dir() -> PathBuf {
        std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data"))
    }

    pub fn tasks_path() -> PathBuf {
        data_dir().join(TASKS_FILE)
    }

    /// The presets compiled into the library.
    pub fn bundled() -> Vec<TaskSpec> {
        parse_tasks(BUNDLED, Path::new("<bundled tasks.json>")).expect("bundled presets are valid")
    }

    pub fn get(task_id: &str) -> Option<TaskSpec> {
        bundled().into_iter().find(|t| t.task_id() == task_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn presets_match_expected_vocabularies() {
        let roof = presets::get(presets::ROOF_TYPE).unwrap();
        assert_eq!(roof.route(), TaskKind::Classification);
        let names: Vec<_> = roof.categories().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["gabled", "hipped", "flat"]);

        let facade = presets::get(presets::FACADE).unwrap();
        assert_eq!(facade.route(), TaskKind::Segmentation);
        let names: Vec<_> = facade.categories().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["roof", "facade", "window", "door"]);

        let year = presets::get(presets::YEAR_BUILT).unwrap();
        assert_eq!(year.route(), TaskKind::Classification);
        assert_eq!(year.len(), 6);
        assert_eq!(year.category(0).unwrap().name, "built before 1969");
        assert_eq!(year.category(5).unwrap().name, "built after 2010");

        assert_eq!(presets::get(presets::NUM_FLOORS).unwrap().len(), 3);
    }

    #[test]
    fn shipped_file_matches_bundled() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("data")
            .join(presets::TASKS_FILE);
        assert_eq!(load_tasks(path).unwrap(), presets::bundled());
    }

    #[test]
    fn render_examples() {
        let t = TaskSpec::new(
            "r",
            TaskKind::Classification,
            "a photo of a building with a {} roof",
            ["gabled", "flat"],
        )
        .unwrap();
        assert_eq!(
            t.render_prompt(t.category(0).unwrap()).unwrap(),
            "a photo of a building with a gabled roof"
        );
        let t = TaskSpec::new("f", TaskKind::Segmentation, "{}", ["window"]).unwrap();
        assert_eq!(t.render_prompt(t.category(0).unwrap()).unwrap(), "window");
        let t = TaskSpec::new(
            "x",
            TaskKind::Classification,
            "a photo of {}",
            ["flat roof", "gabled roof"],
        )
        .unwrap();
        assert_eq!(t.render_prompt(t.category(0).unwrap()).unwrap(), "a photo of flat roof");

        let foreign = CategorySpec {
            name: "door".into(),
            index: 0,
        };
        assert!(matches!(t.render_prompt(&foreign), Err(Error::ForeignCategory { .. })));
    }

    #[test]
    fn validation_failures() {
        let dup =
            r#"{"tasks":[{"task_id":"t","task_kind":"classification","prompt_template":"{}","categories":["a","a"]}]}"#;
        let err = parse_tasks(dup, Path::new("dup.json")).unwrap_err();
        assert!(err.to_string().contains("duplicate category name"), "{err}");

        assert!(TaskSpec::new("t", TaskKind::Classification, "{}", ["only"]).is_err());
        assert!(TaskSpec::new("t", TaskKind::Segmentation, "{}", ["only"]).is_ok());
        assert!(TaskSpec::new("t", TaskKind::Segmentation, "{} {}", ["a"]).is_err());
        assert!(TaskSpec::new("t", TaskKind::Segmentation, "no placeholder", ["a"]).is_err());
        assert!(TaskSpec::new("t", TaskKind::Segmentation, "{}", [""]).is_err());

        let two = r#"{"tasks":[
            {"task_id":"t","task_kind":"segmentation","categories":["a"]},
            {"task_id":"t","task_kind":"segmentation","categories":["b"]}]}"#;
        assert!(parse_tasks(two, Path::new("x")).is_err());
    }

    #[test]
    fn parse_errors_carry_position() {
        let bad = "{\"tasks\": [\n  {\"task_id\": 3}\n]}";
        match parse_tasks(bad, Path::new("bad.json")).unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, Path::new("bad.json"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let unknown_kind = r#"{"tasks":[{"task_id":"t","task_kind":"detection","categories":["a"]}]}"#;
        assert!(matches!(
            parse_tasks(unknown_kind, Path::new("k")),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_template_uses_default() {
        let doc = r#"{"tasks":[{"task_id":"t","task_kind":"segmentation","categories":["door"]}]}"#;
        let t = &parse_tasks(doc, Path::new("t")).unwrap()[0];
        assert_eq!(t.prompt_template(), DEFAULT_TEMPLATE);
        assert_eq!(t.prompts(), ["a photo of door"]);
    }

    fn arb_task() -> impl Strategy<Value = TaskSpec> {
        (
            "[a-z_]{1,8}",
            prop_oneof![Just(TaskKind::Classification), Just(TaskKind::Segmentation)],
            "[a-z ]{0,6}",
            "[a-z ]{0,6}",
            proptest::collection::hash_set("[a-z0-9 \\-]{1,10}", 2..6),
        )
            .prop_map(|(id, kind, pre, post, cats)| TaskSpec::new(id, kind, format!("{pre}{{}}{post}"), cats).unwrap())
    }

    proptest! {
        #[test]
        fn serialize_round_trip(task in arb_task()) {
            let json = tasks_to_json(std::slice::from_ref(&task));
            let back = parse_tasks(&json, Path::new("rt")).unwrap();
            prop_assert_eq!(back, vec![task]);
        }

        #[test]
        fn rendered_prompt_contains_name(task in arb_task()) {
            for c in task.categories() {
                let p = task.render_prompt(c).unwrap();
                prop_assert!(p.contains(&c.name));
                prop_assert!(!p.contains(PLACEHOLDER));
            }
        }
    }
}
