//! Loading, validation, and per-site grouping of unit-level experiment data.
//!
//! Input is a delimited text file (comma or tab, sniffed from the header)
//! with one row per randomization unit. A [`LoadSpec`] maps logical fields
//! (site, arm, take-up, outcome, mediators, optional unit weight, optional
//! observed site covariates) onto column names. Rows with missing values in
//! mapped columns are rejected and reported; malformed cells abort the load
//! with the offending row number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tokens treated as a missing value rather than a malformed cell.
const MISSING_TOKENS: &[&str] = &["", "NA", "na", "."];

/// Column mapping from logical fields to header names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub site: String,
    pub arm: String,
    pub d: String,
    pub y: String,
    #[serde(default)]
    pub mediators: Vec<String>,
    /// Observed site-level covariates; must be constant within each site.
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub unit_weight: Option<String>,
}

/// Declared arm labels: one control arm plus named treatment arms.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub control: String,
    pub treatments: Vec<String>,
}

impl ArmSpec {
    pub fn contains(&self, label: &str) -> bool {
        label == self.control || self.treatments.iter().any(|t| t == label)
    }
}

/// Everything `load_dataset` needs besides the file path.
#[derive(Debug, Clone)]
pub struct LoadSpec {
    pub columns: ColumnMap,
    pub arms: ArmSpec,
    pub focal_arm: String,
}

/// One observed randomization unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub site_id: String,
    pub arm: String,
    pub d: f64,
    pub y: f64,
    pub m: Vec<f64>,
    pub unit_weight: Option<f64>,
}

/// Unit-level data grouped by site, with the declared arm structure.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub arms: ArmSpec,
    pub focal_arm: String,
    pub mediator_names: Vec<String>,
    pub covariate_names: Vec<String>,
    /// Records grouped by site, ordered by site id.
    pub sites: BTreeMap<String, Vec<UnitRecord>>,
    /// Observed site covariate values, validated constant within site.
    pub site_covariates: BTreeMap<String, Vec<f64>>,
}

impl Dataset {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_units(&self) -> usize {
        self.sites.values().map(Vec::len).sum()
    }

    /// Units in the two-arm (focal + control) analysis sample.
    pub fn n_analysis_units(&self) -> usize {
        self.sites
            .values()
            .flatten()
            .filter(|r| r.arm == self.focal_arm || r.arm == self.arms.control)
            .count()
    }

    /// Per-site counts (focal, control) in declared site order.
    pub fn arm_counts(&self) -> BTreeMap<String, (usize, usize)> {
        self.sites
            .iter()
            .map(|(id, units)| {
                let n1 = units.iter().filter(|u| u.arm == self.focal_arm).count();
                let n0 = units.iter().filter(|u| u.arm == self.arms.control).count();
                (id.clone(), (n1, n0))
            })
            .collect()
    }

    /// Numeric per-site views used by the estimators.
    pub fn site_data(&self) -> Vec<SiteData> {
        self.sites
            .iter()
            .map(|(id, units)| {
                let mut site = SiteData {
                    site_id: id.clone(),
                    focal: Vec::new(),
                    control: Vec::new(),
                    second: BTreeMap::new(),
                    covariates: self
                        .site_covariates
                        .get(id)
                        .cloned()
                        .unwrap_or_default(),
                };
                for u in units {
                    let obs = UnitObs {
                        y: u.y,
                        d: u.d,
                        m: u.m.clone(),
                    };
                    if u.arm == self.focal_arm {
                        site.focal.push(obs);
                    } else if u.arm == self.arms.control {
                        site.control.push(obs);
                    } else {
                        site.second.entry(u.arm.clone()).or_default().push(obs);
                    }
                }
                site
            })
            .collect()
    }
}

/// One unit reduced to the numeric fields the estimators consume.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitObs {
    pub y: f64,
    pub d: f64,
    pub m: Vec<f64>,
}

/// A site's units split by arm, plus its observed covariates.
#[derive(Debug, Clone)]
pub struct SiteData {
    pub site_id: String,
    pub focal: Vec<UnitObs>,
    pub control: Vec<UnitObs>,
    /// Units of non-focal treatment arms, keyed by arm label.
    pub second: BTreeMap<String, Vec<UnitObs>>,
    pub covariates: Vec<f64>,
}

/// Row-level diagnostics from a load.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadLog {
    /// (1-based data row, reason) for every rejected row.
    pub rejected_rows: Vec<(usize, String)>,
}

/// Outcome of the per-arm count filter.
#[derive(Debug, Clone, Serialize)]
pub struct FilterLog {
    pub dropped: Vec<DroppedSite>,
    pub retained: usize,
    /// Set when unit weights are present but the weight scheme does not use
    /// them; any other use of unit weights is unsupported.
    pub unit_weight_note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DroppedSite {
    pub site_id: String,
    pub n_focal: usize,
    pub n_control: usize,
}

impl fmt::Display for FilterLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.dropped {
            writeln!(
                f,
                "dropped site '{}': {} focal / {} control units",
                d.site_id, d.n_focal, d.n_control
            )?;
        }
        write!(f, "{} sites retained", self.retained)
    }
}

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = cell.trim();
    let value: f64 = trimmed.parse().map_err(|_| Error::NonNumericCell {
        row,
        column: column.to_string(),
        value: trimmed.to_string(),
    })?;
    if !value.is_finite() {
        return Err(Error::NonFiniteCell {
            row,
            column: column.to_string(),
        });
    }
    Ok(value)
}

/// Parses a delimited file into a [`Dataset`] grouped by site.
///
/// The delimiter is a tab if the header contains one, otherwise a comma.
/// Rows with missing values in mapped columns are rejected and listed in the
/// returned [`LoadLog`]; malformed cells (non-numeric, non-finite, take-up
/// outside {0,1}, undeclared arm label) abort with the row number.
pub fn load_dataset<P: AsRef<Path>>(path: P, spec: &LoadSpec) -> Result<(Dataset, LoadLog)> {
    let raw = std::fs::read_to_string(path)?;
    load_dataset_from_str(&raw, spec)
}

/// Same as [`load_dataset`], for in-memory content.
pub fn load_dataset_from_str(raw: &str, spec: &LoadSpec) -> Result<(Dataset, LoadLog)> {
    if !spec.arms.contains(&spec.focal_arm) || spec.focal_arm == spec.arms.control {
        return Err(Error::UnknownFocalArm(spec.focal_arm.clone()));
    }

    let delimiter = match raw.lines().next() {
        Some(header) if header.contains('\t') => b'\t',
        _ => b',',
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(raw.as_bytes());

    let headers = reader.headers()?.clone();
    let index_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let cols = &spec.columns;
    let site_idx = index_of(&cols.site)?;
    let arm_idx = index_of(&cols.arm)?;
    let d_idx = index_of(&cols.d)?;
    let y_idx = index_of(&cols.y)?;
    let m_idx: Vec<usize> = cols
        .mediators
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;
    let x_idx: Vec<usize> = cols
        .covariates
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;
    let w_idx = cols.unit_weight.as_deref().map(index_of).transpose()?;

    let mut sites: BTreeMap<String, Vec<UnitRecord>> = BTreeMap::new();
    let mut site_covariates: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut log = LoadLog::default();
    let mut n_rows = 0usize;

    for (i, record) in reader.records().enumerate() {
        let row = i + 1; // 1-based data row, excluding the header
        let record = record?;
        n_rows += 1;

        let mut mapped = vec![site_idx, arm_idx, d_idx, y_idx];
        mapped.extend(&m_idx);
        mapped.extend(&x_idx);
        mapped.extend(w_idx);
        if let Some(&idx) = mapped
            .iter()
            .find(|&&idx| is_missing(record.get(idx).unwrap_or("")))
        {
            let column = headers.get(idx).unwrap_or("?").to_string();
            log.rejected_rows
                .push((row, format!("missing value in column '{column}'")));
            continue;
        }

        let site_id = record.get(site_idx).unwrap().trim().to_string();
        let arm = record.get(arm_idx).unwrap().trim().to_string();
        if !spec.arms.contains(&arm) {
            return Err(Error::UnknownArm { row, label: arm });
        }

        let d = parse_cell(record.get(d_idx).unwrap(), row, &cols.d)?;
        if d != 0.0 && d != 1.0 {
            return Err(Error::InvalidTakeup {
                row,
                value: record.get(d_idx).unwrap().trim().to_string(),
            });
        }
        let y = parse_cell(record.get(y_idx).unwrap(), row, &cols.y)?;
        let m = m_idx
            .iter()
            .zip(&cols.mediators)
            .map(|(&idx, name)| parse_cell(record.get(idx).unwrap(), row, name))
            .collect::<Result<Vec<f64>>>()?;
        let x = x_idx
            .iter()
            .zip(&cols.covariates)
            .map(|(&idx, name)| parse_cell(record.get(idx).unwrap(), row, name))
            .collect::<Result<Vec<f64>>>()?;
        let unit_weight = w_idx
            .map(|idx| -> Result<f64> {
                let w = parse_cell(record.get(idx).unwrap(), row, cols.unit_weight.as_ref().unwrap())?;
                if w <= 0.0 {
                    return Err(Error::NonFiniteCell {
                        row,
                        column: cols.unit_weight.clone().unwrap(),
                    });
                }
                Ok(w)
            })
            .transpose()?;

        match site_covariates.entry(site_id.clone()) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(x);
            }
            std::collections::btree_map::Entry::Occupied(e) => {
                if let Some(pos) = x.iter().zip(e.get()).position(|(a, b)| a != b) {
                    return Err(Error::NonConstantCovariate {
                        site: site_id,
                        column: cols.covariates[pos].clone(),
                    });
                }
            }
        }

        sites.entry(site_id.clone()).or_default().push(UnitRecord {
            site_id,
            arm,
            d,
            y,
            m,
            unit_weight,
        });
    }

    if n_rows == 0 || sites.is_empty() {
        return Err(Error::EmptyFile);
    }

    Ok((
        Dataset {
            arms: spec.arms.clone(),
            focal_arm: spec.focal_arm.clone(),
            mediator_names: cols.mediators.clone(),
            covariate_names: cols.covariates.clone(),
            sites,
            site_covariates,
        },
        log,
    ))
}

/// Drops sites with fewer than `min_per_arm` focal or control units and
/// re-points the dataset at `focal_arm`.
///
/// Rows of other treatment arms in retained sites are kept; they only feed
/// the second-arm effect predictor.
pub fn restrict_and_filter(
    dataset: &Dataset,
    focal_arm: &str,
    min_per_arm: usize,
) -> Result<(Dataset, FilterLog)> {
    if min_per_arm < 2 {
        return Err(Error::MinPerArmTooSmall(min_per_arm));
    }
    if !dataset.arms.contains(focal_arm) || focal_arm == dataset.arms.control {
        return Err(Error::UnknownFocalArm(focal_arm.to_string()));
    }

    let total = dataset.sites.len();
    let mut retained: BTreeMap<String, Vec<UnitRecord>> = BTreeMap::new();
    let mut dropped = Vec::new();
    for (id, units) in &dataset.sites {
        let n1 = units.iter().filter(|u| u.arm == focal_arm).count();
        let n0 = units.iter().filter(|u| u.arm == dataset.arms.control).count();
        if n1 >= min_per_arm && n0 >= min_per_arm {
            retained.insert(id.clone(), units.clone());
        } else {
            dropped.push(DroppedSite {
                site_id: id.clone(),
                n_focal: n1,
                n_control: n0,
            });
        }
    }
    if retained.is_empty() {
        return Err(Error::AllSitesDropped(total));
    }

    let has_unit_weights = retained
        .values()
        .flatten()
        .any(|u| u.unit_weight.is_some());
    let unit_weight_note = has_unit_weights.then(|| {
        "unit weights enter only the proportional-to-site-size weight scheme; \
         they are not used inside within-site statistics"
            .to_string()
    });

    let site_covariates = dataset
        .site_covariates
        .iter()
        .filter(|(id, _)| retained.contains_key(*id))
        .map(|(id, x)| (id.clone(), x.clone()))
        .collect();

    let filtered = Dataset {
        arms: dataset.arms.clone(),
        focal_arm: focal_arm.to_string(),
        mediator_names: dataset.mediator_names.clone(),
        covariate_names: dataset.covariate_names.clone(),
        sites: retained,
        site_covariates,
    };
    let log = FilterLog {
        dropped,
        retained: filtered.sites.len(),
        unit_weight_note,
    };
    Ok((filtered, log))
}

/// How normalized site weights are formed.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    /// `w_s = 1/S`.
    Equal,
    /// `w_s` proportional to the site's two-arm analysis sample, counting
    /// unit weights when present.
    ProportionalToSiteSize,
    /// User-supplied positive weights, normalized to sum to one.
    Custom(BTreeMap<String, f64>),
}

/// Normalized weights (summing to one) for every site of `dataset`,
/// in site-id order.
pub fn resolve_weights(dataset: &Dataset, scheme: &WeightScheme) -> Result<BTreeMap<String, f64>> {
    let raw: BTreeMap<String, f64> = match scheme {
        WeightScheme::Equal => dataset.sites.keys().map(|id| (id.clone(), 1.0)).collect(),
        WeightScheme::ProportionalToSiteSize => dataset
            .sites
            .iter()
            .map(|(id, units)| {
                let size: f64 = units
                    .iter()
                    .filter(|u| u.arm == dataset.focal_arm || u.arm == dataset.arms.control)
                    .map(|u| u.unit_weight.unwrap_or(1.0))
                    .sum();
                (id.clone(), size)
            })
            .collect(),
        WeightScheme::Custom(custom) => {
            let mut raw = BTreeMap::new();
            for id in dataset.sites.keys() {
                let w = custom
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::MissingCustomWeight(id.clone()))?;
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::NonPositiveCustomWeight(id.clone()));
                }
                raw.insert(id.clone(), w);
            }
            raw
        }
    };

    let total: f64 = raw.values().sum();
    if !(total > 0.0) {
        return Err(Error::Config("site weights sum to zero".to_string()));
    }
    Ok(raw.into_iter().map(|(id, w)| (id, w / total)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> LoadSpec {
        LoadSpec {
            columns: ColumnMap {
                site: "site".into(),
                arm: "arm".into(),
                d: "d".into(),
                y: "y".into(),
                mediators: vec![],
                covariates: vec![],
                unit_weight: None,
            },
            arms: ArmSpec {
                control: "control".into(),
                treatments: vec!["pub".into()],
            },
            focal_arm: "pub".into(),
        }
    }

    #[test]
    fn identity_parse_one_site() {
        let csv = "site,arm,d,y\na,pub,1,1\na,pub,0,0\na,control,0,0\na,control,0,0\n";
        let (ds, log) = load_dataset_from_str(csv, &spec()).unwrap();
        assert_eq!(ds.n_sites(), 1);
        assert_eq!(ds.n_units(), 4);
        assert!(log.rejected_rows.is_empty());
    }

    #[test]
    fn invalid_takeup_names_row() {
        let mut csv = String::from("site,arm,d,y\n");
        for _ in 0..6 {
            csv.push_str("a,control,0,0\n");
        }
        csv.push_str("a,pub,2,1\n"); // data row 7
        let err = load_dataset_from_str(&csv, &spec()).unwrap_err();
        match err {
            Error::InvalidTakeup { row, .. } => assert_eq!(row, 7),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_arm_rejected() {
        let csv = "site,arm,d,y\na,mystery,0,0\n";
        assert!(matches!(
            load_dataset_from_str(csv, &spec()).unwrap_err(),
            Error::UnknownArm { row: 1, .. }
        ));
    }

    #[test]
    fn missing_values_rejected_with_diagnostics() {
        let csv = "site,arm,d,y\na,pub,1,\na,pub,1,1\na,pub,0,0\na,control,0,0\na,control,0,1\n";
        let (ds, log) = load_dataset_from_str(csv, &spec()).unwrap();
        assert_eq!(ds.n_units(), 4);
        assert_eq!(log.rejected_rows.len(), 1);
        assert_eq!(log.rejected_rows[0].0, 1);
        assert!(log.rejected_rows[0].1.contains("'y'"));
    }

    #[test]
    fn non_numeric_cell_is_an_error() {
        let csv = "site,arm,d,y\na,pub,1,abc\n";
        assert!(matches!(
            load_dataset_from_str(csv, &spec()).unwrap_err(),
            Error::NonNumericCell { row: 1, .. }
        ));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(
            load_dataset_from_str("site,arm,d,y\n", &spec()).unwrap_err(),
            Error::EmptyFile
        ));
    }

    #[test]
    fn missing_column_is_an_error() {
        let csv = "site,arm,d\na,pub,1\n";
        assert!(matches!(
            load_dataset_from_str(csv, &spec()).unwrap_err(),
            Error::MissingColumn(c) if c == "y"
        ));
    }

    #[test]
    fn tab_delimited_files_parse() {
        let csv = "site\tarm\td\ty\na\tpub\t1\t1\na\tpub\t0\t0\na\tcontrol\t0\t0\na\tcontrol\t0\t0\n";
        let (ds, _) = load_dataset_from_str(csv, &spec()).unwrap();
        assert_eq!(ds.n_units(), 4);
    }

    fn three_arm_spec() -> LoadSpec {
        LoadSpec {
            columns: ColumnMap {
                site: "site".into(),
                arm: "arm".into(),
                d: "d".into(),
                y: "y".into(),
                mediators: vec![],
                covariates: vec![],
                unit_weight: None,
            },
            arms: ArmSpec {
                control: "control".into(),
                treatments: vec!["public".into(), "private".into()],
            },
            focal_arm: "public".into(),
        }
    }

    #[test]
    fn other_arm_rows_are_retained_but_separated() {
        let csv = "site,arm,d,y\n\
                   a,public,1,1\na,public,0,0\na,control,0,0\na,control,0,1\n\
                   a,private,1,1\na,private,1,0\n";
        let (ds, _) = load_dataset_from_str(csv, &three_arm_spec()).unwrap();
        assert_eq!(ds.n_units(), 6);
        assert_eq!(ds.n_analysis_units(), 4);
        let site = &ds.site_data()[0];
        assert_eq!(site.focal.len(), 2);
        assert_eq!(site.control.len(), 2);
        assert_eq!(site.second["private"].len(), 2);
    }

    fn site_rows(id: &str, n_focal: usize, n_control: usize) -> String {
        let mut s = String::new();
        for i in 0..n_focal {
            s.push_str(&format!("{id},pub,1,{}\n", i % 2));
        }
        for i in 0..n_control {
            s.push_str(&format!("{id},control,0,{}\n", (i + 1) % 2));
        }
        s
    }

    #[test]
    fn filter_drops_undersized_sites_and_names_them() {
        let csv = format!(
            "site,arm,d,y\n{}{}{}",
            site_rows("a", 3, 3),
            site_rows("b", 2, 1),
            site_rows("c", 2, 2)
        );
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let (filtered, log) = restrict_and_filter(&ds, "pub", 2).unwrap();
        assert_eq!(filtered.n_sites(), 2);
        assert_eq!(log.dropped.len(), 1);
        assert_eq!(log.dropped[0].site_id, "b");
        assert_eq!(log.dropped[0].n_control, 1);
    }

    #[test]
    fn filter_is_identity_when_all_sites_pass() {
        let csv = format!("site,arm,d,y\n{}{}", site_rows("a", 2, 2), site_rows("b", 3, 2));
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let (filtered, log) = restrict_and_filter(&ds, "pub", 2).unwrap();
        assert_eq!(filtered.n_sites(), ds.n_sites());
        assert!(log.dropped.is_empty());
    }

    #[test]
    fn filter_is_idempotent() {
        let csv = format!(
            "site,arm,d,y\n{}{}{}",
            site_rows("a", 3, 3),
            site_rows("b", 1, 4),
            site_rows("c", 2, 2)
        );
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let (once, _) = restrict_and_filter(&ds, "pub", 2).unwrap();
        let (twice, log) = restrict_and_filter(&once, "pub", 2).unwrap();
        assert!(log.dropped.is_empty());
        assert_eq!(once.sites.keys().collect::<Vec<_>>(), twice.sites.keys().collect::<Vec<_>>());
    }

    #[test]
    fn paper_shaped_filter_retains_200_of_216() {
        let mut csv = String::from("site,arm,d,y\n");
        for i in 0..216 {
            let id = format!("office{i:03}");
            if i < 16 {
                csv.push_str(&site_rows(&id, 1, 4));
            } else {
                csv.push_str(&site_rows(&id, 4, 4));
            }
        }
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let (filtered, log) = restrict_and_filter(&ds, "pub", 2).unwrap();
        assert_eq!(filtered.n_sites(), 200);
        assert_eq!(log.dropped.len(), 16);
    }

    #[test]
    fn all_sites_dropped_is_an_error() {
        let csv = format!("site,arm,d,y\n{}", site_rows("a", 1, 1));
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        assert!(matches!(
            restrict_and_filter(&ds, "pub", 2).unwrap_err(),
            Error::AllSitesDropped(1)
        ));
    }

    #[test]
    fn equal_weights() {
        let csv = format!(
            "site,arm,d,y\n{}{}{}{}",
            site_rows("a", 2, 2),
            site_rows("b", 2, 2),
            site_rows("c", 2, 2),
            site_rows("d", 2, 2)
        );
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let w = resolve_weights(&ds, &WeightScheme::Equal).unwrap();
        assert!(w.values().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn proportional_weights() {
        let csv = format!("site,arm,d,y\n{}{}", site_rows("a", 5, 5), site_rows("b", 15, 15));
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let w = resolve_weights(&ds, &WeightScheme::ProportionalToSiteSize).unwrap();
        assert!((w["a"] - 0.25).abs() < 1e-15);
        assert!((w["b"] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn custom_weights_normalize_and_scale_invariance() {
        let csv = format!(
            "site,arm,d,y\n{}{}{}",
            site_rows("a", 2, 2),
            site_rows("b", 2, 2),
            site_rows("c", 2, 2)
        );
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let custom: BTreeMap<String, f64> =
            [("a", 2.0), ("b", 2.0), ("c", 4.0)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let w = resolve_weights(&ds, &WeightScheme::Custom(custom.clone())).unwrap();
        assert!((w["a"] - 0.25).abs() < 1e-15);
        assert!((w["b"] - 0.25).abs() < 1e-15);
        assert!((w["c"] - 0.5).abs() < 1e-15);

        let scaled: BTreeMap<String, f64> = custom.iter().map(|(k, v)| (k.clone(), v * 37.5)).collect();
        let w2 = resolve_weights(&ds, &WeightScheme::Custom(scaled)).unwrap();
        assert_eq!(w, w2);
    }

    #[test]
    fn custom_weight_errors() {
        let csv = format!("site,arm,d,y\n{}{}", site_rows("a", 2, 2), site_rows("b", 2, 2));
        let (ds, _) = load_dataset_from_str(&csv, &spec()).unwrap();
        let missing: BTreeMap<String, f64> = [("a".to_string(), 1.0)].into_iter().collect();
        assert!(matches!(
            resolve_weights(&ds, &WeightScheme::Custom(missing)).unwrap_err(),
            Error::MissingCustomWeight(s) if s == "b"
        ));
        let nonpos: BTreeMap<String, f64> =
            [("a".to_string(), 1.0), ("b".to_string(), 0.0)].into_iter().collect();
        assert!(matches!(
            resolve_weights(&ds, &WeightScheme::Custom(nonpos)).unwrap_err(),
            Error::NonPositiveCustomWeight(s) if s == "b"
        ));
    }

    #[test]
    fn covariates_must_be_constant_within_site() {
        let spec = LoadSpec {
            columns: ColumnMap {
                covariates: vec!["x".into()],
                ..spec().columns
            },
            ..spec()
        };
        let good = "site,arm,d,y,x\na,pub,1,1,0.3\na,pub,0,0,0.3\na,control,0,0,0.3\na,control,0,1,0.3\n";
        let (ds, _) = load_dataset_from_str(good, &spec).unwrap();
        assert_eq!(ds.site_covariates["a"], vec![0.3]);

        let bad = "site,arm,d,y,x\na,pub,1,1,0.3\na,control,0,0,0.4\n";
        assert!(matches!(
            load_dataset_from_str(bad, &spec).unwrap_err(),
            Error::NonConstantCovariate { .. }
        ));
    }
}
