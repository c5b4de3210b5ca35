//! Balanced panel data and the covariate geometry every other module
//! conditions on.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::csum;

/// A balanced N×T panel. Matrices are stored row-major, one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    n_units: usize,
    n_periods: usize,
    unit_ids: Vec<String>,
    x: Vec<f64>,
    y: Option<Vec<f64>>,
}

impl PanelData {
    /// Build a panel from row-major `x` (and optional `y`) of length `n_units * n_periods`.
    pub fn from_rows(
        n_units: usize,
        n_periods: usize,
        x: Vec<f64>,
        y: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n_units < 2 || n_periods < 2 {
            return Err(Error::TooSmall { n_units, n_periods });
        }
        let cells = n_units * n_periods;
        if x.len() != cells || y.as_ref().is_some_and(|y| y.len() != cells) {
            return Err(Error::InvalidArgument(format!(
                "matrix length does not match N*T = {cells}"
            )));
        }
        if x.iter().chain(y.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("panel contains non-finite values".into()));
        }
        let unit_ids = (1..=n_units).map(|i| i.to_string()).collect();
        Ok(Self {
            n_units,
            n_periods,
            unit_ids,
            x,
            y,
        })
    }

    /// Build a panel from nested rows, e.g. `vec![vec![0., 1.], vec![1., 3.]]`.
    pub fn from_nested(x: &[Vec<f64>], y: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = x.len();
        let t = x.first().map_or(0, Vec::len);
        if x.iter().any(|row| row.len() != t) || y.is_some_and(|y| y.len() != n || y.iter().any(|r| r.len() != t)) {
            return Err(Error::InvalidArgument("rows have unequal lengths".into()));
        }
        Self::from_rows(
            n,
            t,
            x.concat(),
            y.map(|rows| rows.concat()),
        )
    }

    pub fn with_response(mut self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.x.len() {
            return Err(Error::InvalidArgument("response has the wrong length".into()));
        }
        self.y = Some(y);
        Ok(self)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn x_row(&self, unit: usize) -> &[f64] {
        &self.x[unit * self.n_periods..(unit + 1) * self.n_periods]
    }

    pub fn y_row(&self, unit: usize) -> Option<&[f64]> {
        self.y
            .as_ref()
            .map(|y| &y[unit * self.n_periods..(unit + 1) * self.n_periods])
    }
}

/// Column names of the long-format input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub id: String,
    pub time: String,
    pub x: String,
    pub y: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            x: "x".into(),
            y: Some("y".into()),
        }
    }
}

/// Numeric-aware ordering: labels that parse as numbers sort numerically and
/// before any non-numeric label; the rest sort lexicographically.
fn label_cmp(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

#[derive(Clone, Copy)]
struct Cell {
    x: f64,
    y: Option<f64>,
}

/// Read a long-format CSV (one row per unit-period) into a balanced panel.
///
/// Units are ordered by id and periods ascending; both orders are numeric
/// when the labels parse as numbers. Time values are dropped after the check
/// that every unit shares the same set of periods.
pub fn load_panel<R: io::Read>(source: R, columns: &ColumnMap) -> Result<PanelData> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = position(&columns.id)?;
    let time_col = position(&columns.time)?;
    let x_col = position(&columns.x)?;
    let y_col = columns.y.as_deref().map(position).transpose()?;

    let parse = |row: usize, column: &str, raw: &str| {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::NonNumeric {
                row,
                column: column.to_string(),
                value: raw.to_string(),
            })
    };

    let mut units: HashMap<String, BTreeMap<OrderedLabel, Cell>> = HashMap::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        let row = index + 1;
        let id = record.get(id_col).unwrap_or_default().to_string();
        let time = record.get(time_col).unwrap_or_default().to_string();
        let x = parse(row, &columns.x, record.get(x_col).unwrap_or_default())?;
        let y = match (y_col, columns.y.as_deref()) {
            (Some(col), Some(name)) => Some(parse(row, name, record.get(col).unwrap_or_default())?),
            _ => None,
        };
        let periods = units.entry(id.clone()).or_default();
        if periods.insert(OrderedLabel(time.clone()), Cell { x, y }).is_some() {
            return Err(Error::DuplicateObservation { unit: id, time });
        }
    }

    let mut ids: Vec<String> = units.keys().cloned().collect();
    ids.sort_by(|a, b| label_cmp(a, b));
    let Some(first) = ids.first() else {
        return Err(Error::TooSmall {
            n_units: 0,
            n_periods: 0,
        });
    };
    let reference: Vec<OrderedLabel> = units[first].keys().cloned().collect();
    let n_periods = reference.len();

    let mut x = Vec::with_capacity(ids.len() * n_periods);
    let mut y = y_col.map(|_| Vec::with_capacity(ids.len() * n_periods));
    for id in &ids {
        let periods = &units[id];
        if periods.len() != n_periods {
            return Err(Error::Unbalanced {
                unit: id.clone(),
                found: periods.len(),
                expected: n_periods,
            });
        }
        if !periods.keys().eq(reference.iter()) {
            return Err(Error::TimeMismatch {
                unit: id.clone(),
                reference: first.clone(),
            });
        }
        for cell in periods.values() {
            x.push(cell.x);
            if let (Some(y), Some(v)) = (y.as_mut(), cell.y) {
                y.push(v);
            }
        }
    }

    let mut panel = PanelData::from_rows(ids.len(), n_periods, x, y)?;
    panel.unit_ids = ids;
    Ok(panel)
}

/// [`load_panel`] from a file path.
pub fn load_panel_path<P: AsRef<Path>>(path: P, columns: &ColumnMap) -> Result<PanelData> {
    let file = std::fs::File::open(path)?;
    load_panel(io::BufReader::new(file), columns)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct OrderedLabel(String);

impl PartialOrd for OrderedLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        label_cmp(&self.0, &other.0)
    }
}

/// The conditional geometry of the covariate: unit means, SSB, SSW and
/// `r(x) = SSB / SSW`.
///
/// Also keeps the within-unit deviations `x_it − x̄_i`, which the simulation
/// kernel uses to form the within estimator from standardized draws. A summary
/// restored from moments alone carries a canonical geometry with the same
/// N, T, SSB and SSW; every simulated quantity depends on x only through those.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariateSummary {
    pub n_units: usize,
    pub n_periods: usize,
    pub unit_means: Vec<f64>,
    pub grand_mean: f64,
    pub ssb: f64,
    pub ssw: f64,
    pub ratio_r: f64,
    #[serde(skip)]
    within_deviations: Vec<f64>,
}

/// Compute the covariate summary of a panel.
pub fn summarize(data: &PanelData) -> Result<CovariateSummary> {
    let (n, t) = (data.n_units(), data.n_periods());
    let unit_means: Vec<f64> = (0..n).map(|i| csum(data.x_row(i).iter().copied()) / t as f64).collect();
    let mut within_deviations = Vec::with_capacity(n * t);
    for (i, mean) in unit_means.iter().enumerate() {
        within_deviations.extend(data.x_row(i).iter().map(|v| v - mean));
    }
    CovariateSummary::from_geometry(t, unit_means, within_deviations)
}

impl CovariateSummary {
    fn from_geometry(n_periods: usize, unit_means: Vec<f64>, within_deviations: Vec<f64>) -> Result<Self> {
        let n_units = unit_means.len();
        if n_units < 2 || n_periods < 2 {
            return Err(Error::TooSmall { n_units, n_periods });
        }
        let grand_mean = csum(unit_means.iter().copied()) / n_units as f64;
        let ssb = csum(unit_means.iter().map(|m| (m - grand_mean).powi(2)));
        let ssw = csum(within_deviations.iter().map(|d| d * d));
        if !(ssw > 0.0) {
            return Err(Error::DegenerateCovariate("SSW = 0: x is constant within every unit"));
        }
        if !(ssb > 0.0) {
            return Err(Error::DegenerateCovariate("SSB = 0: all unit means are equal"));
        }
        Ok(Self {
            n_units,
            n_periods,
            unit_means,
            grand_mean,
            ssb,
            ssw,
            ratio_r: ssb / ssw,
            within_deviations,
        })
    }

    /// Summary with prescribed N, T, SSB and SSW and a canonical geometry:
    /// equally spaced unit means and a linear within-unit trend.
    pub fn from_moments(n_units: usize, n_periods: usize, ssb: f64, ssw: f64) -> Result<Self> {
        if n_units < 2 || n_periods < 2 {
            return Err(Error::TooSmall { n_units, n_periods });
        }
        if !(ssb > 0.0 && ssw > 0.0) || !ssb.is_finite() || !ssw.is_finite() {
            return Err(Error::DegenerateCovariate("SSB and SSW must both be positive"));
        }
        let centred = |k: usize, len: usize| k as f64 - (len as f64 - 1.0) / 2.0;
        let (n, t) = (n_units as f64, n_periods as f64);
        let mean_scale = (ssb / (n * (n * n - 1.0) / 12.0)).sqrt();
        let trend_scale = (ssw / (n * t * (t * t - 1.0) / 12.0)).sqrt();
        let unit_means = (0..n_units).map(|i| mean_scale * centred(i, n_units)).collect();
        let row: Vec<f64> = (0..n_periods).map(|k| trend_scale * centred(k, n_periods)).collect();
        let within_deviations = row.repeat(n_units);
        Self::from_geometry(n_periods, unit_means, within_deviations)
    }

    /// Rebuild a summary from its serialized form. Unit means, when present,
    /// are kept; the within geometry is canonical.
    pub fn from_file_form(file: SummaryFile) -> Result<Self> {
        let canonical = Self::from_moments(file.n_units, file.n_periods, file.ssb, file.ssw)?;
        if let Some(r) = file.ratio_r {
            if (r - canonical.ratio_r).abs() > 1e-8 * canonical.ratio_r {
                return Err(Error::InvalidArgument(format!(
                    "ratio_r = {r} disagrees with ssb/ssw = {}",
                    canonical.ratio_r
                )));
            }
        }
        match file.unit_means {
            Some(means) if means.len() == file.n_units => {
                let restored = Self::from_geometry(file.n_periods, means, canonical.within_deviations)?;
                if (restored.ssb - file.ssb).abs() > 1e-8 * file.ssb {
                    return Err(Error::InvalidArgument(
                        "unit_means are inconsistent with ssb".into(),
                    ));
                }
                Ok(restored)
            }
            Some(_) => Err(Error::InvalidArgument("unit_means must have n_units entries".into())),
            None => Ok(canonical),
        }
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: SummaryFile = serde_json::from_str(&text)?;
        Self::from_file_form(file)
    }

    /// `x_it − x̄_i`, row-major.
    pub fn within_deviations(&self) -> &[f64] {
        &self.within_deviations
    }

    /// `x̄_i − x̄`.
    pub fn between_deviations(&self) -> Vec<f64> {
        self.unit_means.iter().map(|m| m - self.grand_mean).collect()
    }

    /// `q(nu, T) = nu + 1/T`.
    pub fn q(&self, nu: f64) -> f64 {
        nu + 1.0 / self.n_periods as f64
    }
}

/// On-disk form of a covariate summary (`--summary summary.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub n_units: usize,
    pub n_periods: usize,
    pub ssb: f64,
    pub ssw: f64,
    #[serde(default)]
    pub ratio_r: Option<f64>,
    #[serde(default)]
    pub unit_means: Option<Vec<f64>>,
}

impl From<&CovariateSummary> for SummaryFile {
    fn from(s: &CovariateSummary) -> Self {
        Self {
            n_units: s.n_units,
            n_periods: s.n_periods,
            ssb: s.ssb,
            ssw: s.ssw,
            ratio_r: Some(s.ratio_r),
            unit_means: Some(s.unit_means.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> PanelData {
        PanelData::from_nested(&[vec![0.0, 1.0], vec![1.0, 3.0]], None).unwrap()
    }

    #[test]
    fn reshapes_long_rows() {
        let csv = "id,time,x\n1,1,0\n1,2,1\n2,1,1\n2,2,3\n";
        let cols = ColumnMap { y: None, ..ColumnMap::default() };
        let p = load_panel(csv.as_bytes(), &cols).unwrap();
        assert_eq!((p.n_units(), p.n_periods()), (2, 2));
        assert_eq!(p.x(), &[0.0, 1.0, 1.0, 3.0]);
        assert!(p.y().is_none());
    }

    #[test]
    fn sorts_units_and_periods_numerically() {
        let csv = "id,time,x,y\n10,2,4,0\n2,2,2,0\n10,1,3,0\n2,1,1,0\n";
        let p = load_panel(csv.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(p.unit_ids(), &["2".to_string(), "10".to_string()]);
        assert_eq!(p.x(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_unbalanced() {
        let csv = "id,time,x\n1,1,0\n1,2,1\n1,3,2\n2,1,1\n2,2,3\n";
        let cols = ColumnMap { y: None, ..ColumnMap::default() };
        match load_panel(csv.as_bytes(), &cols) {
            Err(Error::Unbalanced { unit, found, expected }) => {
                assert_eq!((unit.as_str(), found, expected), ("2", 2, 3));
            }
            other => panic!("expected unbalanced error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_numeric_and_duplicates() {
        let cols = ColumnMap { y: None, ..ColumnMap::default() };
        let bad = "id,time,x\n1,1,0\n1,2,abc\n";
        assert!(matches!(
            load_panel(bad.as_bytes(), &cols),
            Err(Error::NonNumeric { row: 2, .. })
        ));
        let dup = "id,time,x\n1,1,0\n1,1,1\n";
        assert!(matches!(
            load_panel(dup.as_bytes(), &cols),
            Err(Error::DuplicateObservation { .. })
        ));
        let mismatch = "id,time,x\n1,1,0\n1,2,1\n2,1,1\n2,3,3\n";
        assert!(matches!(
            load_panel(mismatch.as_bytes(), &cols),
            Err(Error::TimeMismatch { .. })
        ));
        let missing = "id,year,x\n1,1,0\n";
        assert!(matches!(load_panel(missing.as_bytes(), &cols), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn tiny_summary_values() {
        let s = summarize(&tiny()).unwrap();
        assert_eq!(s.unit_means, vec![0.5, 2.0]);
        assert!((s.grand_mean - 1.25).abs() < 1e-15);
        assert!((s.ssw - 2.5).abs() < 1e-15);
        assert!((s.ssb - 1.125).abs() < 1e-15);
        assert!((s.ratio_r - 0.45).abs() < 1e-15);
    }

    #[test]
    fn shifted_summary_matches() {
        let shifted = PanelData::from_nested(&[vec![7.0, 8.0], vec![8.0, 10.0]], None).unwrap();
        let a = summarize(&tiny()).unwrap();
        let b = summarize(&shifted).unwrap();
        assert!((a.ssb - b.ssb).abs() < 1e-12 && (a.ssw - b.ssw).abs() < 1e-12);
        assert!((a.ratio_r - b.ratio_r).abs() < 1e-12);
    }

    #[test]
    fn constant_covariate_is_degenerate() {
        let flat = PanelData::from_nested(&[vec![5.0, 5.0], vec![5.0, 5.0]], None).unwrap();
        assert!(matches!(summarize(&flat), Err(Error::DegenerateCovariate(_))));
        let equal_means = PanelData::from_nested(&[vec![0.0, 2.0], vec![2.0, 0.0]], None).unwrap();
        assert!(matches!(summarize(&equal_means), Err(Error::DegenerateCovariate(_))));
    }

    #[test]
    fn canonical_geometry_reproduces_moments() {
        let s = CovariateSummary::from_moments(7, 3, 2.5, 11.0).unwrap();
        assert!((s.ssb - 2.5).abs() < 1e-12 && (s.ssw - 11.0).abs() < 1e-12);
        for i in 0..7 {
            let row = &s.within_deviations()[i * 3..(i + 1) * 3];
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn summary_file_round_trip() {
        let s = summarize(&tiny()).unwrap();
        let text = serde_json::to_string(&SummaryFile::from(&s)).unwrap();
        let back = CovariateSummary::from_file_form(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.unit_means, s.unit_means);
        assert!((back.ratio_r - s.ratio_r).abs() < 1e-15);
        let bare: SummaryFile = serde_json::from_str(r#"{"n_units":2,"n_periods":2,"ssb":1.125,"ssw":2.5}"#).unwrap();
        let canon = CovariateSummary::from_file_form(bare).unwrap();
        assert!((canon.ratio_r - 0.45).abs() < 1e-12);
    }

    fn panel_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (2usize..6, 2usize..5).prop_flat_map(|(n, t)| {
            (Just(n), Just(t), prop::collection::vec(-10.0f64..10.0, n * t))
        })
    }

    proptest! {
        #[test]
        fn location_and_scale_invariance((n, t, x) in panel_strategy(), shift in -50.0f64..50.0, scale in 0.1f64..20.0) {
            let base = PanelData::from_rows(n, t, x.clone(), None).unwrap();
            let Ok(s) = summarize(&base) else { return Ok(()); };
            prop_assume!(s.ssb > 1e-6 && s.ssw > 1e-6);
            let moved = PanelData::from_rows(n, t, x.iter().map(|v| v + shift).collect(), None).unwrap();
            let m = summarize(&moved).unwrap();
            prop_assert!((m.ssb - s.ssb).abs() <= 1e-10 * s.ssb.max(1.0) * 10.0);
            prop_assert!((m.ssw - s.ssw).abs() <= 1e-10 * s.ssw.max(1.0) * 10.0);
            let scaled = PanelData::from_rows(n, t, x.iter().map(|v| -scale * v).collect(), None).unwrap();
            let c = summarize(&scaled).unwrap();
            prop_assert!((c.ratio_r - s.ratio_r).abs() <= 1e-10 * s.ratio_r);

            let total = csum(x.iter().map(|v| (v - s.grand_mean).powi(2)));
            let parts = s.ssw + t as f64 * s.ssb;
            prop_assert!((total - parts).abs() <= 1e-10 * total);
        }
    }
}
