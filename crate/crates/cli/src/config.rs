//! JSON code configuration and the code it describes.

use pmds_core::code::ConstructionError;
use pmds_core::construction_general::{AlphaMode, GeneralCode, GeneralOptions, DEFAULT_INDEPENDENCE_LIMIT};
use pmds_core::construction_s2::{S2Code, S2Options, S2Variant};
use pmds_core::{ArrayCode, Field, FieldSizeReport, FieldSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const CONFIG_SCHEMA: &str = include_str!("../schemas/config.schema.json");
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstructionKind {
    #[serde(rename = "s2-pmds")]
    S2Pmds,
    #[serde(rename = "s2-sd")]
    S2Sd,
    #[serde(rename = "general-pmds")]
    GeneralPmds,
}

impl ConstructionKind {
    pub fn name(self) -> &'static str {
        match self {
            ConstructionKind::S2Pmds => "s2-pmds",
            ConstructionKind::S2Sd => "s2-sd",
            ConstructionKind::GeneralPmds => "general-pmds",
        }
    }

    pub fn id(self) -> u32 {
        match self {
            ConstructionKind::S2Pmds => 1,
            ConstructionKind::S2Sd => 2,
            ConstructionKind::GeneralPmds => 3,
        }
    }

    pub fn from_id(id: u32) -> Option<ConstructionKind> {
        match id {
            1 => Some(ConstructionKind::S2Pmds),
            2 => Some(ConstructionKind::S2Sd),
            3 => Some(ConstructionKind::GeneralPmds),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sabotage {
    #[serde(rename = "duplicate-locator")]
    DuplicateLocator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub construction: ConstructionKind,
    pub mu: usize,
    pub n: usize,
    pub r: usize,
    pub s: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_mode: Option<AlphaMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence_limit: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sabotage: Option<Sabotage>,
    /// Base field override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
}

fn schema_errors(schema: &str, doc: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(schema).expect("bundled schema is valid JSON");
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("bundled schema compiles");
    compiled.validate(doc).map_err(|errs| {
        errs.map(|e| format!("{}: {}", e.instance_path, e))
            .collect::<Vec<_>>()
            .join("; ")
    })
}

/// Validates `doc` against the bundled report schema.
pub fn validate_report(doc: &Value) -> Result<(), String> {
    schema_errors(REPORT_SCHEMA, doc)
}

impl CodeConfig {
    /// Parses a config document, or the `config` member of a parameter file
    /// written by `gen-params`, after schema validation.
    pub fn from_json(text: &str) -> Result<CodeConfig, CliError> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        if let Some(inner) = doc.get("config") {
            doc = inner.clone();
        }
        schema_errors(CONFIG_SCHEMA, &doc).map_err(|e| CliError::Config(format!("schema: {e}")))?;
        serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<BuiltCode, CliError> {
        let (mu, n, r, s, d) = (self.mu, self.n, self.r, self.s, self.d);
        if r > n || s > (n - r) * mu {
            return Err(CliError::Config(format!(
                "infeasible parameters: need r <= n and s <= (n - r) mu, got n = {n}, r = {r}, s = {s}, mu = {mu}"
            )));
        }
        let field = match &self.field {
            Some(spec) => {
                if spec.ext_degree != 1 {
                    return Err(CliError::Config("field override must be a base field".into()));
                }
                Some(Field::new(spec.clone()).map_err(|e| CliError::Config(e.to_string()))?)
            }
            None => None,
        };
        let sabotage = self.sabotage == Some(Sabotage::DuplicateLocator);
        let built = match self.construction {
            ConstructionKind::S2Pmds | ConstructionKind::S2Sd => {
                if s != 2 {
                    return Err(CliError::Config(format!(
                        "{} has exactly two global parities, got s = {s}",
                        self.construction.name()
                    )));
                }
                if self.alpha_mode.is_some() || self.q.is_some() {
                    return Err(CliError::Config(
                        "alpha_mode and q apply to general-pmds only; use field".into(),
                    ));
                }
                let variant = if self.construction == ConstructionKind::S2Pmds {
                    S2Variant::Pmds
                } else {
                    S2Variant::Sd
                };
                let mut opts = S2Options::new(mu, n, r, d, variant);
                opts.field = field;
                opts.stride = self.stride;
                opts.duplicate_locator = sabotage;
                BuiltCode::S2(Box::new(S2Code::build(opts).map_err(construction_error)?))
            }
            ConstructionKind::GeneralPmds => {
                if self.stride.is_some() {
                    return Err(CliError::Config("N applies to the s2 constructions only".into()));
                }
                let mut opts =
                    GeneralOptions::new(mu, n, r, s, d, self.alpha_mode.unwrap_or(AlphaMode::Bch));
                opts.q = self.q;
                opts.base_field = field;
                opts.independence_limit = self.independence_limit.unwrap_or(DEFAULT_INDEPENDENCE_LIMIT);
                opts.duplicate_locator = sabotage;
                BuiltCode::General(Box::new(GeneralCode::build(opts).map_err(construction_error)?))
            }
        };
        if built.code().field().base_size() >= 1 << 32 {
            return Err(CliError::Config("base fields must have fewer than 2^32 elements".into()));
        }
        Ok(built)
    }

    /// The config with every automatic choice made explicit.
    pub fn resolved(&self, built: &BuiltCode) -> CodeConfig {
        let mut c = self.clone();
        c.field = Some(built.code().field().spec().base_spec());
        c.q = None;
        match built {
            BuiltCode::S2(code) => c.stride = Some(code.params().stride),
            BuiltCode::General(code) => c.alpha_mode = Some(code.params().recipe.mode),
        }
        c
    }
}

fn construction_error(e: ConstructionError) -> CliError {
    match e {
        ConstructionError::DependentAlphas { .. } => CliError::Property(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

#[derive(Debug, Clone)]
pub enum BuiltCode {
    S2(Box<S2Code>),
    General(Box<GeneralCode>),
}

impl BuiltCode {
    pub fn code(&self) -> &dyn ArrayCode {
        match self {
            BuiltCode::S2(c) => c.as_ref(),
            BuiltCode::General(c) => c.as_ref(),
        }
    }

    pub fn report(&self) -> FieldSizeReport {
        match self {
            BuiltCode::S2(c) => c.field_size_report(),
            BuiltCode::General(c) => c.field_size_report(),
        }
    }

    /// Stride N for the s2 constructions, extension degree M otherwise.
    pub fn n_or_m(&self) -> u32 {
        match self {
            BuiltCode::S2(c) => c.params().stride as u32,
            BuiltCode::General(c) => c.params().m as u32,
        }
    }

    pub fn alpha_mode(&self) -> Option<AlphaMode> {
        match self {
            BuiltCode::S2(_) => None,
            BuiltCode::General(c) => Some(c.params().recipe.mode),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds() {
        let cfg = CodeConfig::from_json(
            r#"{"construction": "s2-pmds", "mu": 3, "n": 4, "r": 2, "s": 2, "d": 3}"#,
        )
        .unwrap();
        let built = cfg.build().unwrap();
        assert_eq!(built.code().field().base_size(), 64);
        assert_eq!(built.n_or_m(), 16);
        let resolved = cfg.resolved(&built);
        let again = CodeConfig::from_json(&serde_json::to_string(&resolved).unwrap()).unwrap();
        assert_eq!(again.build().unwrap().code().field(), built.code().field());
    }

    #[test]
    fn schema_rejects_unknown_keys() {
        let err = CodeConfig::from_json(
            r#"{"construction": "s2-pmds", "mu": 3, "n": 4, "r": 2, "s": 2, "d": 3, "x": 1}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(CodeConfig::from_json(r#"{"construction": "rs"}"#).is_err());
    }

    #[test]
    fn infeasible_global_parities() {
        let cfg = CodeConfig::from_json(
            r#"{"construction": "general-pmds", "mu": 1, "n": 4, "r": 2, "s": 5, "d": 3}"#,
        )
        .unwrap();
        assert!(matches!(cfg.build(), Err(CliError::Config(_))));
    }
}
