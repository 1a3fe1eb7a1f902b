//! Named importance methods and a scorer that caches attributions.
//!
//! Method syntax:
//!
//! ```text
//! mdi | mdi_oob | mda[:<n_permutations>]
//! pg:<alpha>:<lambda>[:corrected]
//! cfc[:<cover>[:<selection>]]       global contributions
//! shap[:<cover>[:<selection>]]      mean |SHAP|
//! wshap[:<cover>[:<selection>]]     |mean SHAP * y|
//! mdi_cfc:<inbag|oob>[:cov|y1]      label-weighted contribution sums
//! ```
//!
//! `cover` is `inbag` or `oob` (default `inbag`); `selection` is `all`,
//! `inbag` or `oob` (default `all`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::explain::{
    explain_forest, global_cfc, mdi_via_cfc_forest, mean_abs_attribution, weighted_shap,
    AttributionKind, AttributionMatrix, BridgeForm, CoverSource, Selection,
};
use crate::forest::Forest;
use crate::importance::{mda_permutation, mdi, mdi_oob, pg_importance, ImportanceReport, PgConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Mdi,
    MdiOob,
    Mda { n_permutations: usize },
    Pg(PgConfig),
    Cfc { cover: CoverSource, selection: Selection },
    Shap { cover: CoverSource, selection: Selection },
    WeightedShap { cover: CoverSource, selection: Selection },
    MdiCfc { subset: CoverSource, form: BridgeForm },
}

impl Method {
    pub fn pg(alpha: f64, lambda: f64, corrected: bool) -> Method {
        Method::Pg(PgConfig::new(alpha, lambda, corrected).expect("valid penalized Gini parameters"))
    }

    pub fn shap(selection: Selection) -> Method {
        Method::Shap { cover: CoverSource::Inbag, selection }
    }

    pub fn wshap(selection: Selection) -> Method {
        Method::WeightedShap { cover: CoverSource::Inbag, selection }
    }

    fn attribution(&self) -> Option<(AttributionKind, CoverSource)> {
        match *self {
            Method::Cfc { cover, .. } => Some((AttributionKind::Cfc, cover)),
            Method::Shap { cover, .. } | Method::WeightedShap { cover, .. } => {
                Some((AttributionKind::Shap, cover))
            }
            _ => None,
        }
    }
}

fn parse_cover(s: &str) -> Result<CoverSource> {
    match s {
        "inbag" => Ok(CoverSource::Inbag),
        "oob" => Ok(CoverSource::Oob),
        _ => Err(Error::InvalidParameter(format!("unknown cover `{s}`"))),
    }
}

fn parse_selection(s: &str) -> Result<Selection> {
    match s {
        "all" => Ok(Selection::All),
        "inbag" => Ok(Selection::Inbag),
        "oob" => Ok(Selection::Oob),
        _ => Err(Error::InvalidParameter(format!("unknown selection `{s}`"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::InvalidParameter(format!("`{s}` is not a number")))
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("unknown method `{s}`"));
        let cover_sel = |rest: &[&str]| -> Result<(CoverSource, Selection)> {
            if rest.len() > 2 {
                return Err(bad());
            }
            let cover = rest.first().map(|c| parse_cover(c)).transpose()?;
            let sel = rest.get(1).map(|c| parse_selection(c)).transpose()?;
            Ok((cover.unwrap_or(CoverSource::Inbag), sel.unwrap_or(Selection::All)))
        };
        match parts.as_slice() {
            ["mdi"] => Ok(Method::Mdi),
            ["mdi_oob"] => Ok(Method::MdiOob),
            ["mda"] => Ok(Method::Mda { n_permutations: 1 }),
            ["mda", n] => {
                let n: usize = n.parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                Ok(Method::Mda { n_permutations: n })
            }
            ["pg", a, l] => Ok(Method::Pg(PgConfig::new(parse_f64(a)?, parse_f64(l)?, false)?)),
            ["pg", a, l, "corrected"] => {
                Ok(Method::Pg(PgConfig::new(parse_f64(a)?, parse_f64(l)?, true)?))
            }
            ["cfc", rest @ ..] => {
                let (cover, selection) = cover_sel(rest)?;
                Ok(Method::Cfc { cover, selection })
            }
            ["shap", rest @ ..] => {
                let (cover, selection) = cover_sel(rest)?;
                Ok(Method::Shap { cover, selection })
            }
            ["wshap", rest @ ..] => {
                let (cover, selection) = cover_sel(rest)?;
                Ok(Method::WeightedShap { cover, selection })
            }
            ["mdi_cfc", subset] => Ok(Method::MdiCfc {
                subset: parse_cover(subset)?,
                form: BridgeForm::Covariance,
            }),
            ["mdi_cfc", subset, form] => Ok(Method::MdiCfc {
                subset: parse_cover(subset)?,
                form: match *form {
                    "cov" => BridgeForm::Covariance,
                    "y1" => BridgeForm::RestrictedSum,
                    _ => return Err(bad()),
                },
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Mdi => write!(f, "mdi"),
            Method::MdiOob => write!(f, "mdi_oob"),
            Method::Mda { n_permutations: 1 } => write!(f, "mda"),
            Method::Mda { n_permutations } => write!(f, "mda:{n_permutations}"),
            Method::Pg(cfg) => write!(f, "{}", cfg.method_name()),
            Method::Cfc { cover, selection } => write!(f, "cfc:{}:{}", cover.name(), selection.name()),
            Method::Shap { cover, selection } => write!(f, "shap:{}:{}", cover.name(), selection.name()),
            Method::WeightedShap { cover, selection } => {
                write!(f, "wshap:{}:{}", cover.name(), selection.name())
            }
            Method::MdiCfc { subset, form } => write!(
                f,
                "mdi_cfc:{}:{}",
                subset.name(),
                match form {
                    BridgeForm::Covariance => "cov",
                    BridgeForm::RestrictedSum => "y1",
                }
            ),
        }
    }
}

/// Scores one fitted forest with any number of methods, computing each
/// attribution matrix at most once.
pub struct Scorer<'a> {
    forest: &'a Forest,
    data: &'a Dataset,
    attributions: HashMap<(AttributionKind, CoverSource), AttributionMatrix>,
}

impl<'a> Scorer<'a> {
    pub fn new(forest: &'a Forest, data: &'a Dataset) -> Self {
        Scorer {
            forest,
            data,
            attributions: HashMap::new(),
        }
    }

    pub fn attribution(&mut self, kind: AttributionKind, cover: CoverSource) -> Result<&AttributionMatrix> {
        if !self.attributions.contains_key(&(kind, cover)) {
            let m = explain_forest(self.forest, self.data, kind, cover)?;
            self.attributions.insert((kind, cover), m);
        }
        Ok(&self.attributions[&(kind, cover)])
    }

    pub fn score<R: Rng + ?Sized>(&mut self, method: &Method, rng: &mut R) -> Result<ImportanceReport> {
        let mut report = match *method {
            Method::Mdi => mdi(self.forest),
            Method::MdiOob => mdi_oob(self.forest, self.data)?,
            Method::Mda { n_permutations } => mda_permutation(self.forest, self.data, n_permutations, rng)?,
            Method::Pg(cfg) => pg_importance(self.forest, &cfg)?,
            Method::MdiCfc { subset, form } => mdi_via_cfc_forest(self.forest, self.data, subset, form)?,
            Method::Cfc { selection, .. } => {
                let (kind, cover) = method.attribution().expect("attribution method");
                global_cfc(self.attribution(kind, cover)?, selection)?
            }
            Method::Shap { selection, .. } => {
                let (kind, cover) = method.attribution().expect("attribution method");
                mean_abs_attribution(self.attribution(kind, cover)?, selection)?
            }
            Method::WeightedShap { selection, .. } => {
                let y = self.data.binary_labels()?;
                let (kind, cover) = method.attribution().expect("attribution method");
                weighted_shap(self.attribution(kind, cover)?, &y, selection)?
            }
        };
        report.method = method.to_string();
        Ok(report)
    }
}
