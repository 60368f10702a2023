//! Law definition files.
//!
//! ```toml
//! [format]
//! beta = 10      # radix
//! x_post = 2     # fractional digits
//! u_pre = 4      # integer digits of the result
//! degree = 3     # optional, defaults to the law's degree
//!
//! [[term]]
//! coefficient = 1.6973
//! exponents = [1, 0]   # x1^1 x2^0
//! ```
//!
//! All terms must have exponent vectors of the same length, which fixes the
//! state dimension.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use polyshare::{FixedPointFormat, PolynomialLaw, Term};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawFile {
    pub format: FormatSection,
    #[serde(rename = "term")]
    pub terms: Vec<TermSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormatSection {
    pub beta: Option<u64>,
    pub x_post: Option<u32>,
    pub u_pre: Option<u32>,
    pub degree: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl LawFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn law(&self) -> Result<PolynomialLaw> {
        let Some(first) = self.terms.first() else { bail!("law file has no terms") };
        let terms = self.terms.iter().map(|t| Term::new(t.coefficient, t.exponents.clone())).collect();
        Ok(PolynomialLaw::new(first.exponents.len(), terms)?)
    }

    /// The file's format with command-line overrides applied.
    pub fn format(&self, overrides: FormatSection, law: &PolynomialLaw) -> Result<FixedPointFormat> {
        let beta = pick(overrides.beta, self.format.beta, "beta")?;
        let x_post = pick(overrides.x_post, self.format.x_post, "x_post")?;
        let u_pre = pick(overrides.u_pre, self.format.u_pre, "u_pre")?;
        let degree = overrides.degree.or(self.format.degree).unwrap_or(law.degree());
        Ok(FixedPointFormat::new(beta, x_post, u_pre, degree)?)
    }
}

fn pick<T>(cli: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    cli.or(file).with_context(|| format!("{name} is set neither in the law file nor on the command line"))
}
