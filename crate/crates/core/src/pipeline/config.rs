//! Pipeline configuration: parsing, schema checks and typed stage params.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::registry::{find_operator, OperatorKind, OperatorSpec, ParamType};
use crate::cleaners::{Action, CleanRule, MatcherKind, RuleSpec, Scope};
use crate::corpus::InputFormat;
use crate::dedup::DedupParams;
use crate::filters::Script;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub operator: String,
    /// Optional in files; filled in from the registry after validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<OperatorKind>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl StageSpec {
    pub fn new(operator: &str, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        StageSpec { operator: operator.into(), kind: None, params, enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { stages: Vec::new(), strict: false, seed: 0, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    Parse { line: usize, column: usize, message: String },
    Validation { stage: Option<usize>, param: Option<String>, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "config parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Validation { stage, param, message } => {
                f.write_str("invalid config")?;
                if let Some(s) = stage {
                    write!(f, ": stage {s}")?;
                }
                if let Some(p) = param {
                    write!(f, ", param '{p}'")?;
                }
                write!(f, ": {message}")
            }
        }
    }
}

impl ConfigError {
    pub fn invalid(stage: usize, param: Option<&str>, message: impl Into<String>) -> Self {
        ConfigError::Validation { stage: Some(stage), param: param.map(str::to_string), message: message.into() }
    }
}

/// Parse and validate a config. JSON if the first non-space byte is `{`,
/// YAML otherwise.
pub fn load_config(bytes: &[u8]) -> Result<PipelineConfig, ConfigError> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    let mut config: PipelineConfig = if first == Some(&b'{') {
        serde_json::from_slice(bytes).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| ConfigError::Parse {
            line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
            column: 0,
            message: "config is not valid UTF-8".into(),
        })?;
        if text.trim().is_empty() {
            PipelineConfig::default()
        } else {
            serde_yaml::from_str(text).map_err(|e| {
                let (line, column) = e.location().map(|l| (l.line(), l.column())).unwrap_or((0, 0));
                ConfigError::Parse { line, column, message: e.to_string() }
            })?
        }
    };
    validate(&mut config)?;
    Ok(config)
}

/// Check every stage against the registry and fill in kinds.
pub fn validate(config: &mut PipelineConfig) -> Result<(), ConfigError> {
    if config.workers == 0 {
        return Err(ConfigError::Validation { stage: None, param: Some("workers".into()), message: "must be >= 1".into() });
    }
    let enabled: Vec<usize> = (0..config.stages.len()).filter(|&i| config.stages[i].enabled).collect();
    for (i, stage) in config.stages.iter_mut().enumerate() {
        let spec = find_operator(&stage.operator)
            .ok_or_else(|| ConfigError::invalid(i, None, format!("unknown operator '{}'", stage.operator)))?;
        if let Some(k) = stage.kind {
            if k != spec.kind {
                return Err(ConfigError::invalid(i, None, format!("operator '{}' is of kind {:?}, not {:?}", spec.name, spec.kind, k)));
            }
        }
        stage.kind = Some(spec.kind);
        StageOp::parse(i, stage, &spec)?;
        if spec.kind == OperatorKind::Dedup && stage.enabled && enabled.last() != Some(&i) {
            return Err(ConfigError::invalid(i, None, "dedup must be the last enabled stage"));
        }
    }
    Ok(())
}

/// Parameters checked against the schema, with defaults filled in.
pub struct Params<'a> {
    stage: usize,
    values: BTreeMap<&'a str, Value>,
}

impl<'a> Params<'a> {
    pub fn check(stage: usize, spec: &'a OperatorSpec, given: &BTreeMap<String, Value>) -> Result<Self, ConfigError> {
        for name in given.keys() {
            if spec.param(name).is_none() {
                return Err(ConfigError::invalid(stage, Some(name), format!("unknown parameter for '{}'", spec.name)));
            }
        }
        let mut values = BTreeMap::new();
        for p in &spec.params {
            let v = match given.get(&p.name) {
                Some(Value::Null) | None => match (&p.default, p.required) {
                    (_, true) => return Err(ConfigError::invalid(stage, Some(&p.name), "missing required parameter")),
                    (Some(d), _) => d.clone(),
                    (None, _) => continue,
                },
                Some(v) => v.clone(),
            };
            let ok = match p.ty {
                ParamType::Int => v.as_u64().is_some(),
                ParamType::Float => v.as_f64().is_some_and(f64::is_finite),
                ParamType::Bool => v.is_boolean(),
                ParamType::String => v.is_string(),
                ParamType::StringList => v.is_string() || v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
            };
            if !ok {
                let expected = match p.ty {
                    ParamType::Int => "expected non-negative integer",
                    ParamType::Float => "expected number",
                    ParamType::Bool => "expected boolean",
                    ParamType::String => "expected string",
                    ParamType::StringList => "expected list of strings",
                };
                return Err(ConfigError::invalid(stage, Some(&p.name), format!("{expected}, got {v}")));
            }
            values.insert(p.name.as_str(), v);
        }
        Ok(Params { stage, values })
    }

    pub fn err(&self, param: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::invalid(self.stage, Some(param), message)
    }

    pub fn uint(&self, name: &str) -> Option<u64> {
        self.values.get(name).and_then(Value::as_u64)
    }

    pub fn usize(&self, name: &str) -> Option<usize> {
        self.uint(name).map(|v| usize::try_from(v).unwrap_or(usize::MAX))
    }

    pub fn float(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_f64)
    }

    pub fn boolean(&self, name: &str) -> Option<bool> {
        self.values.get(name).and_then(Value::as_bool)
    }

    pub fn string(&self, name: &str) -> Option<&str> {
        self.values.get(name).and_then(Value::as_str)
    }

    pub fn list(&self, name: &str) -> Option<Vec<String>> {
        match self.values.get(name)? {
            Value::String(s) => Some(s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()),
            Value::Array(a) => Some(a.iter().filter_map(Value::as_str).map(String::from).collect()),
            _ => None,
        }
    }

    fn parsed<T: std::str::FromStr<Err = String>>(&self, name: &str) -> Result<T, ConfigError> {
        self.string(name).unwrap_or_default().parse().map_err(|e| self.err(name, e))
    }

    fn fraction(&self, name: &str) -> Result<f64, ConfigError> {
        let v = self.float(name).unwrap_or_default();
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(self.err(name, format!("must be in [0, 1], got {v}")))
        }
    }
}

/// A stage with typed parameters. External resources (model files,
/// lexicons) are referenced by path and loaded when a plan is built.
#[derive(Debug, Clone)]
pub enum StageOp {
    Reformat { format: InputFormat },
    CleanText(CleanRule),
    ExtractHtml,
    Length { min_chars: usize, max_chars: usize },
    AlphaRatio { min_ratio: f64, script: Script },
    ShortLines { short_line_max_chars: usize, max_fraction: f64 },
    DirtyWords { lexicon_path: Option<String>, words: Vec<String>, max_hits: usize },
    Perplexity { fil_ppl: f64, model_path: Option<String>, reference_sample: usize },
    Language { models: Vec<(String, String)>, target: String, min_margin: f64 },
    EntityCount { min_entities: usize, max_entities: usize },
    Dedup(DedupParams),
}

impl StageOp {
    pub fn parse(index: usize, stage: &StageSpec, spec: &OperatorSpec) -> Result<Self, ConfigError> {
        let p = Params::check(index, spec, &stage.params)?;
        Ok(match spec.name.as_str() {
            "reformat" => StageOp::Reformat { format: p.parsed("format")? },
            "clean_text" => {
                let scope = match p.string("scope") {
                    Some("string") => Scope::String,
                    Some("line") => Scope::Line,
                    Some("paragraph") => Scope::Paragraph,
                    other => return Err(p.err("scope", format!("expected string, line or paragraph, got {other:?}"))),
                };
                let matcher = match p.string("matcher") {
                    Some("exact") => MatcherKind::Exact,
                    Some("regex") => MatcherKind::Regex,
                    other => return Err(p.err("matcher", format!("expected exact or regex, got {other:?}"))),
                };
                let action = match p.string("action") {
                    Some("remove") => Action::Remove,
                    Some("replace") => Action::Replace,
                    other => return Err(p.err("action", format!("expected remove or replace, got {other:?}"))),
                };
                let rule = RuleSpec {
                    scope,
                    matcher,
                    pattern: p.string("pattern").unwrap_or_default().to_string(),
                    action,
                    replace_with: p.string("replace_with").map(String::from),
                    fixpoint: p.boolean("fixpoint").unwrap_or(false),
                };
                StageOp::CleanText(CleanRule::compile(rule).map_err(|e| p.err("pattern", e.to_string()))?)
            }
            "extract_html" => StageOp::ExtractHtml,
            "filter_by_length" => {
                let min_chars = p.usize("min_chars").unwrap_or(0);
                let max_chars = p.usize("max_chars").unwrap_or(usize::MAX);
                if max_chars < min_chars {
                    return Err(p.err("max_chars", "must be >= min_chars"));
                }
                StageOp::Length { min_chars, max_chars }
            }
            "filter_by_alpha_ratio" => {
                StageOp::AlphaRatio { min_ratio: p.fraction("min_ratio")?, script: p.parsed("script")? }
            }
            "filter_by_short_lines" => StageOp::ShortLines {
                short_line_max_chars: p.usize("short_line_max_chars").unwrap_or(0),
                max_fraction: p.fraction("max_fraction")?,
            },
            "filter_by_dirty_words" => {
                let lexicon_path = p.string("lexicon_path").map(String::from);
                let words = p.list("words").unwrap_or_default();
                if lexicon_path.is_none() && words.is_empty() {
                    return Err(p.err("lexicon_path", "one of lexicon_path or words is required"));
                }
                StageOp::DirtyWords { lexicon_path, words, max_hits: p.usize("max_hits").unwrap_or(0) }
            }
            "filter_by_perplexity" => {
                let reference_sample = p.usize("reference_sample").unwrap_or(0);
                if reference_sample == 0 {
                    return Err(p.err("reference_sample", "must be >= 1"));
                }
                StageOp::Perplexity {
                    fil_ppl: p.float("fil_ppl").unwrap_or(3.0),
                    model_path: p.string("model_path").map(String::from),
                    reference_sample,
                }
            }
            "filter_by_language" => {
                let mut models = Vec::new();
                for pair in p.list("models").unwrap_or_default() {
                    let Some((tag, path)) = pair.split_once('=') else {
                        return Err(p.err("models", format!("expected tag=path, got '{pair}'")));
                    };
                    models.push((tag.trim().to_string(), path.trim().to_string()));
                }
                if models.len() < 2 {
                    return Err(p.err("models", "at least two language models are required"));
                }
                let target = p.string("target").unwrap_or_default().to_string();
                if !models.iter().any(|(t, _)| *t == target) {
                    return Err(p.err("target", format!("no model for target '{target}'")));
                }
                StageOp::Language { models, target, min_margin: p.float("min_margin").unwrap_or(0.0) }
            }
            "filter_by_entity_count" => {
                let min_entities = p.usize("min_entities").unwrap_or(0);
                let max_entities = p.usize("max_entities").unwrap_or(usize::MAX);
                if max_entities < min_entities {
                    return Err(p.err("max_entities", "must be >= min_entities"));
                }
                StageOp::EntityCount { min_entities, max_entities }
            }
            "dedup_minhash" => {
                let d = DedupParams {
                    ngram: p.usize("ngram").unwrap_or(10),
                    num_perm: p.usize("num_perm").unwrap_or(128),
                    bands: p.usize("bands").unwrap_or(16),
                    threshold: p.float("threshold").unwrap_or(0.7),
                    seed: 0,
                };
                d.validate().map_err(|e| p.err("num_perm", e.to_string()))?;
                StageOp::Dedup(d)
            }
            other => return Err(ConfigError::invalid(index, None, format!("operator '{other}' has no implementation"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::registry::list_operators;

    fn stage_err(yaml: &str) -> ConfigError {
        load_config(yaml.as_bytes()).unwrap_err()
    }

    #[test]
    fn minimal_yaml_and_json() {
        let c = load_config(b"stages:\n  - operator: filter_by_length\n    params: {min_chars: 10}\n").unwrap();
        assert_eq!(c.stages.len(), 1);
        assert_eq!(c.stages[0].kind, Some(OperatorKind::Filter));
        assert_eq!(c.workers, 1);
        let j = load_config(br#" {"stages":[{"operator":"filter_by_length","params":{"min_chars":10}}],"seed":7}"#).unwrap();
        assert_eq!(j.stages, c.stages);
        assert_eq!(j.seed, 7);
    }

    #[test]
    fn unknown_operator_names_stage() {
        let e = stage_err("stages:\n  - operator: filter_by_length\n  - operator: no_such_op\n");
        assert!(matches!(e, ConfigError::Validation { stage: Some(1), .. }), "{e}");
        assert!(e.to_string().contains("no_such_op"));
    }

    #[test]
    fn ill_typed_param() {
        let e = stage_err("stages:\n  - operator: filter_by_perplexity\n    params: {fil_ppl: three}\n");
        assert_eq!(
            e,
            ConfigError::Validation {
                stage: Some(0),
                param: Some("fil_ppl".into()),
                message: "expected number, got \"three\"".into()
            }
        );
        assert!(e.to_string().contains("expected number"));
    }

    #[test]
    fn parse_errors_carry_position() {
        match load_config(b"{\"stages\": [\n  {\"operator\": }\n]}") {
            Err(ConfigError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 16)),
            other => panic!("{other:?}"),
        }
        match load_config(b"stages:\n  - operator: [unclosed\n") {
            Err(ConfigError::Parse { line, .. }) => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_violations() {
        for (yaml, param) in [
            ("stages: [{operator: filter_by_length, params: {min_chars: -1}}]", "min_chars"),
            ("stages: [{operator: filter_by_length, params: {bogus: 1}}]", "bogus"),
            ("stages: [{operator: filter_by_alpha_ratio, params: {min_ratio: 1.5}}]", "min_ratio"),
            ("stages: [{operator: clean_text, params: {scope: line, matcher: regex, pattern: '('}}]", "pattern"),
            ("stages: [{operator: clean_text, params: {pattern: x}}]", "scope"),
            ("stages: [{operator: filter_by_language, params: {models: 'en=a.bin', target: en}}]", "models"),
            ("stages: [{operator: dedup_minhash, params: {bands: 10}}]", "num_perm"),
        ] {
            match stage_err(yaml) {
                ConfigError::Validation { param: Some(p), .. } => assert_eq!(p, param, "{yaml}"),
                other => panic!("{yaml}: {other}"),
            }
        }
    }

    #[test]
    fn dedup_must_be_last() {
        let e = stage_err("stages: [{operator: dedup_minhash}, {operator: filter_by_length}]");
        assert!(e.to_string().contains("last"));
        load_config(b"stages: [{operator: dedup_minhash}, {operator: filter_by_length, enabled: false}]").unwrap();
    }

    #[test]
    fn kind_must_match() {
        assert!(load_config(b"stages: [{operator: filter_by_length, kind: clean}]").is_err());
        load_config(b"stages: [{operator: filter_by_length, kind: filter}]").unwrap();
    }

    #[test]
    fn every_operator_round_trips_with_required_params() {
        for op in list_operators() {
            let mut params = serde_json::Map::new();
            for p in op.params.iter().filter(|p| p.required) {
                let v = match (op.name.as_str(), p.name.as_str()) {
                    (_, "scope") => "line",
                    (_, "pattern") => "x",
                    (_, "models") => "en=en.bin,zh=zh.bin",
                    (_, "target") => "en",
                    _ => "",
                };
                params.insert(p.name.clone(), Value::String(v.into()));
            }
            if op.name == "filter_by_dirty_words" {
                params.insert("words".into(), Value::String("bad".into()));
            }
            let cfg = serde_json::json!({"stages": [{"operator": op.name, "params": params}]});
            let c = load_config(cfg.to_string().as_bytes()).unwrap_or_else(|e| panic!("{}: {e}", op.name));
            let back = load_config(serde_json::to_string(&c).unwrap().as_bytes()).unwrap();
            assert_eq!(back, c);
        }
    }
}
