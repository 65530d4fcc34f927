//! Experiment configuration: TOML on disk, exact rationals as `[num, den]`.

use std::collections::BTreeMap;

use berkline_core::field::{FieldContext, Rational};
use berkline_core::metrics::Metric;
use berkline_core::tree::{PLFunction, TreePoint};
use berkline_core::volumes::Window;
use serde::Deserialize;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Frac(pub i64, pub i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Diff,
    Sandwich,
    Orth,
    Dirac,
    Fekete,
    Rr,
    VolEnergy,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub kind: Kind,
    pub field: FieldSpec,
    #[serde(default)]
    pub metrics: BTreeMap<String, MetricSpec>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub p: u64,
    /// Overrides the ramification index chosen from the data.
    pub ramification: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub center: Frac,
    pub exponent: Frac,
    pub value: Frac,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub degree: u32,
    pub vertices: Vec<VertexSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub vertices: Vec<VertexSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub center: Frac,
    pub exponent: Frac,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    Last(usize),
    Named(WindowName),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowName {
    All,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchSpec {
    #[default]
    Exhaustive,
    Local,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub m_min: Option<u32>,
    pub m_max: Option<u32>,
    pub window: Option<WindowSpec>,
    pub t_grid: Option<Vec<Frac>>,
    pub pool: Option<Vec<Frac>>,
    pub point: Option<PointSpec>,
    pub m: Option<u32>,
    pub search: Option<SearchSpec>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    /// Declared assertion: reported error bounds stay below this.
    pub max_bound: Option<Frac>,
    /// Declared assertion (fekete): optimal valuation.
    pub expect_valuation: Option<Frac>,
    /// Declared assertion (fekete): distance to the target measure.
    pub max_distance: Option<Frac>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// File stem for the report; defaults to the config file stem.
    pub stem: Option<String>,
    /// Write the CSV series (default true for kinds that have one).
    pub csv: Option<bool>,
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    let config: Config = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if config.version != CONFIG_VERSION {
        return Err(CliError::Validation(format!(
            "config version {} is not supported (expected {CONFIG_VERSION})",
            config.version
        )));
    }
    Ok(config)
}

pub fn rational(f: Frac, what: &str) -> Result<Rational, CliError> {
    if f.1 == 0 {
        return Err(CliError::Validation(format!("{what}: zero denominator in [{}, {}]", f.0, f.1)));
    }
    Ok(Rational::new(f.0.into(), f.1.into()))
}

impl Config {
    pub fn field(&self) -> Result<FieldContext, CliError> {
        FieldContext::rationals(self.field.p).map_err(|e| CliError::Validation(format!("field: {e}")))
    }

    pub fn metric(&self, name: &str) -> Result<Metric, CliError> {
        let spec = self
            .metrics
            .get(name)
            .ok_or_else(|| CliError::Validation(format!("missing [metrics.{name}]")))?;
        let potential = self.pl_function(&format!("metrics.{name}"), &spec.vertices)?;
        Ok(Metric::new(spec.degree, potential))
    }

    pub fn function(&self, name: &str) -> Result<PLFunction, CliError> {
        let spec = self
            .functions
            .get(name)
            .ok_or_else(|| CliError::Validation(format!("missing [functions.{name}]")))?;
        self.pl_function(&format!("functions.{name}"), &spec.vertices)
    }

    fn pl_function(&self, what: &str, vertices: &[VertexSpec]) -> Result<PLFunction, CliError> {
        let p = self.field()?.p();
        let pairs = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let at = format!("{what}.vertices[{i}]");
                let point = point(p, v.center, v.exponent, &at)?;
                Ok((point, rational(v.value, &at)?))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        PLFunction::from_pairs(p, pairs).map_err(|e| CliError::Validation(format!("{what}: {e}")))
    }

    pub fn point(&self) -> Result<TreePoint, CliError> {
        let spec = self.params.point.as_ref().ok_or_else(|| CliError::Validation("missing params.point".into()))?;
        point(self.field()?.p(), spec.center, spec.exponent, "params.point")
    }

    /// Levels `m_min..=m_max`, with `m_max` optionally overridden.
    pub fn levels(&self, m_max_override: Option<u32>) -> Result<Vec<u32>, CliError> {
        let lo = self.params.m_min.unwrap_or(1);
        let hi = m_max_override
            .or(self.params.m_max)
            .ok_or_else(|| CliError::Validation("missing params.m_max".into()))?;
        if lo == 0 || lo > hi {
            return Err(CliError::Validation(format!("empty or invalid level range {lo}..={hi}")));
        }
        Ok((lo..=hi).collect())
    }

    pub fn window(&self) -> Result<Window, CliError> {
        match self.params.window {
            None => Ok(Window::default()),
            Some(WindowSpec::Named(WindowName::All)) => Ok(Window::All),
            Some(WindowSpec::Last(n)) if n >= 4 => Ok(Window::Last(n)),
            Some(WindowSpec::Last(n)) => Err(CliError::Validation(format!("window of {n} levels is below the minimum of 4"))),
        }
    }

    pub fn rationals(&self, list: &Option<Vec<Frac>>, what: &str) -> Result<Vec<Rational>, CliError> {
        let list = list.as_ref().ok_or_else(|| CliError::Validation(format!("missing params.{what}")))?;
        list.iter().enumerate().map(|(i, f)| rational(*f, &format!("params.{what}[{i}]"))).collect()
    }

    pub fn optional(&self, value: Option<Frac>, what: &str) -> Result<Option<Rational>, CliError> {
        value.map(|f| rational(f, &format!("params.{what}"))).transpose()
    }
}

fn point(p: u64, center: Frac, exponent: Frac, what: &str) -> Result<TreePoint, CliError> {
    TreePoint::new(p, rational(center, what)?, rational(exponent, what)?).map_err(|e| CliError::Validation(format!("{what}: {e}")))
}
