//! Parsing and validation of all external inputs: region tables, case
//! counts, the baseline commuter matrix, mobility-reduction time series
//! with hierarchical fallback, and national prevalence estimates.
//!
//! All loaders are pure functions of their input files; the resulting
//! values are immutable and safe to share across threads.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use log::warn;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;

/// Reduction entries keyed by this id apply country-wide.
pub const NATIONAL_ID: &str = "NATIONAL";

#[derive(Debug, Clone)]
pub struct Region {
    pub id: String,
    pub name: String,
    pub population: f64,
    pub parent_id: Option<String>,
}

/// Validated region hierarchy. Leaf regions (those that are not the parent
/// of any other row) define the canonical ordering used by case series,
/// mobility matrices, and compartment vectors throughout the crate.
#[derive(Debug, Clone)]
pub struct RegionTable {
    regions: Vec<Region>,
    index: HashMap<String, usize>,
    leaves: Vec<usize>,
}

impl RegionTable {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, r) in regions.iter().enumerate() {
            if r.population < 1.0 {
                return Err(Error::NonpositivePopulation {
                    id: r.id.clone(),
                    population: r.population as i64,
                });
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateRegion(r.id.clone()));
            }
        }
        // parent chains: acyclic and at most two levels deep
        for r in &regions {
            let mut seen = vec![&r.id];
            let mut cur = r.parent_id.as_ref();
            while let Some(pid) = cur {
                if seen.contains(&pid) || seen.len() > 2 {
                    return Err(Error::BadParentChain(r.id.clone()));
                }
                seen.push(pid);
                cur = index
                    .get(pid)
                    .and_then(|&i| regions[i].parent_id.as_ref());
            }
        }
        let is_parent: Vec<bool> = regions
            .iter()
            .map(|r| {
                regions
                    .iter()
                    .any(|o| o.parent_id.as_deref() == Some(r.id.as_str()))
            })
            .collect();
        let leaves = (0..regions.len()).filter(|&i| !is_parent[i]).collect();
        Ok(Self {
            regions,
            index,
            leaves,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Region> {
        self.index.get(id).map(|&i| &self.regions[i])
    }

    /// Number of leaf regions.
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_ids(&self) -> Vec<&str> {
        self.leaves
            .iter()
            .map(|&i| self.regions[i].id.as_str())
            .collect()
    }

    /// Index of a leaf region in the canonical ordering.
    pub fn leaf_index(&self, id: &str) -> Option<usize> {
        let ri = *self.index.get(id)?;
        self.leaves.iter().position(|&i| i == ri)
    }

    pub fn leaf_populations(&self) -> Vec<f64> {
        self.leaves
            .iter()
            .map(|&i| self.regions[i].population)
            .collect()
    }

    pub fn total_population(&self) -> f64 {
        self.leaf_populations().iter().sum()
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.get(id)?.parent_id.as_deref()
    }
}

/// Per-region daily reported positive tests over a contiguous window.
///
/// Dates before the window start are treated as zero (pre-epidemic);
/// dates after the window end are unknown.
#[derive(Debug, Clone)]
pub struct CaseSeries {
    start: NaiveDate,
    end: NaiveDate,
    /// counts[region][day], aligned with the leaf ordering of the table
    counts: Vec<Vec<u64>>,
    cumulative: Vec<Vec<u64>>,
}

impl CaseSeries {
    pub fn new(start: NaiveDate, counts: Vec<Vec<u64>>) -> Self {
        assert!(!counts.is_empty(), "need at least one region");
        let days = counts[0].len();
        assert!(days >= 1, "need at least one day");
        assert!(counts.iter().all(|c| c.len() == days));
        let cumulative = counts
            .iter()
            .map(|c| {
                c.iter()
                    .scan(0u64, |acc, &v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self {
            start,
            end: start + chrono::Days::new(days as u64 - 1),
            counts,
            cumulative,
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn region_count(&self) -> usize {
        self.counts.len()
    }

    /// Reported cases for `region` on `date`; zero before the window start,
    /// `None` past the window end.
    pub fn count(&self, region: usize, date: NaiveDate) -> Option<u64> {
        if date > self.end {
            return None;
        }
        if date < self.start {
            return Some(0);
        }
        let day = (date - self.start).num_days() as usize;
        Some(self.counts[region][day])
    }

    /// Cumulative reported cases for `region` through `date`.
    pub fn cumulative(&self, region: usize, date: NaiveDate) -> Option<u64> {
        if date > self.end {
            return None;
        }
        if date < self.start {
            return Some(0);
        }
        let day = (date - self.start).num_days() as usize;
        Some(self.cumulative[region][day])
    }
}

/// Directed commuter volumes between leaf regions; zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityMatrix {
    m: SquareMatrix,
}

impl MobilityMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            m: SquareMatrix::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    /// Sets an off-diagonal entry. Diagonal writes are ignored, preserving
    /// the zero-diagonal invariant.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if i != j {
            self.m.set(i, j, v);
        }
    }

    /// M_ij + M_ji
    #[inline]
    pub fn symmetric(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j) + self.m.get(j, i)
    }

    /// Total travel volume Σ_ij M_ij.
    pub fn total(&self) -> f64 {
        self.m.sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: self.m.scale(s) }
    }
}

/// Workplace-mobility change relative to baseline, per date, at leaf,
/// parent, or national granularity.
#[derive(Debug, Clone, Default)]
pub struct MobilityReductionSeries {
    entries: BTreeMap<NaiveDate, HashMap<String, f64>>,
    /// child -> parent links copied from the region table at load time
    parents: HashMap<String, String>,
}

impl MobilityReductionSeries {
    pub fn new(
        entries: BTreeMap<NaiveDate, HashMap<String, f64>>,
        parents: HashMap<String, String>,
    ) -> Self {
        Self { entries, parents }
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.entries.keys().next_back().copied()
    }

    pub fn covers(&self, date: NaiveDate) -> bool {
        self.entries
            .get(&date)
            .is_some_and(|m| m.contains_key(NATIONAL_ID))
    }

    /// Resolves the change factor for a region on a date, falling back
    /// leaf -> parent -> grandparent -> national.
    pub fn resolve(&self, date: NaiveDate, region_id: &str) -> Result<f64> {
        let day = self
            .entries
            .get(&date)
            .ok_or(Error::DateNotCovered(date))?;
        let mut key = region_id;
        for _ in 0..3 {
            if let Some(&v) = day.get(key) {
                return Ok(v);
            }
            match self.parents.get(key) {
                Some(p) => key = p,
                None => break,
            }
        }
        day.get(NATIONAL_ID)
            .copied()
            .ok_or(Error::DateNotCovered(date))
    }
}

/// National estimated total infectious persons per date.
#[derive(Debug, Clone, Default)]
pub struct PrevalenceSeries {
    values: BTreeMap<NaiveDate, f64>,
}

impl PrevalenceSeries {
    pub fn new(values: BTreeMap<NaiveDate, f64>) -> Result<Self> {
        for (&date, &value) in &values {
            if value <= 0.0 {
                return Err(Error::NonpositivePrevalence { date, value });
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.values.get(&date).copied()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.display().to_string(),
                source,
            },
            other => Error::Parse {
                path: path.display().to_string(),
                msg: format!("{other:?}"),
            },
        })
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn parse_date(path: &Path, s: &str) -> Result<NaiveDate> {
    NaiveDate::from_str(s).map_err(|e| parse_err(path, format!("bad date {s:?}: {e}")))
}

/// Loads `regions.csv` with header `region_id,name,population,parent_id`.
pub fn load_regions(path: &Path) -> Result<RegionTable> {
    #[derive(Deserialize)]
    struct Row {
        region_id: String,
        name: String,
        population: i64,
        parent_id: Option<String>,
    }
    let mut regions = Vec::new();
    for rec in open_reader(path)?.deserialize::<Row>() {
        let row = rec.map_err(|e| parse_err(path, e))?;
        if row.population < 1 {
            return Err(Error::NonpositivePopulation {
                id: row.region_id,
                population: row.population,
            });
        }
        regions.push(Region {
            id: row.region_id,
            name: row.name,
            population: row.population as f64,
            parent_id: row.parent_id.filter(|p| !p.is_empty()),
        });
    }
    RegionTable::new(regions)
}

/// Loads `mobility.csv` with header `origin,destination,volume`.
///
/// Diagonal entries in the input are dropped with a warning; the returned
/// matrix always has a zero diagonal.
pub fn load_mobility_baseline(path: &Path, regions: &RegionTable) -> Result<MobilityMatrix> {
    #[derive(Deserialize)]
    struct Row {
        origin: String,
        destination: String,
        volume: f64,
    }
    let mut m = MobilityMatrix::zeros(regions.leaf_count());
    for rec in open_reader(path)?.deserialize::<Row>() {
        let row = rec.map_err(|e| parse_err(path, e))?;
        if row.volume < 0.0 {
            return Err(Error::NegativeVolume {
                origin: row.origin,
                destination: row.destination,
                volume: row.volume,
            });
        }
        let i = regions
            .leaf_index(&row.origin)
            .ok_or_else(|| Error::UnknownRegion(row.origin.clone()))?;
        let j = regions
            .leaf_index(&row.destination)
            .ok_or_else(|| Error::UnknownRegion(row.destination.clone()))?;
        if i == j {
            warn!(
                "dropping diagonal mobility entry {} -> {} ({})",
                row.origin, row.destination, row.volume
            );
            continue;
        }
        m.set(i, j, row.volume);
    }
    Ok(m)
}

/// Loads `cases.csv` with header `date,region_id,new_cases`.
///
/// Missing days inside the window are filled with zeros and flagged.
pub fn load_cases(path: &Path, regions: &RegionTable) -> Result<CaseSeries> {
    #[derive(Deserialize)]
    struct Row {
        date: String,
        region_id: String,
        new_cases: i64,
    }
    let n = regions.leaf_count();
    let mut records: Vec<(NaiveDate, usize, u64)> = Vec::new();
    for rec in open_reader(path)?.deserialize::<Row>() {
        let row = rec.map_err(|e| parse_err(path, e))?;
        let date = parse_date(path, &row.date)?;
        let region = regions
            .leaf_index(&row.region_id)
            .ok_or_else(|| Error::UnknownRegion(row.region_id.clone()))?;
        if row.new_cases < 0 {
            return Err(Error::NegativeCount {
                region: row.region_id,
                date,
                count: row.new_cases,
            });
        }
        records.push((date, region, row.new_cases as u64));
    }
    let start = records
        .iter()
        .map(|r| r.0)
        .min()
        .ok_or_else(|| parse_err(path, "no case records"))?;
    let end = records.iter().map(|r| r.0).max().unwrap();
    let days = (end - start).num_days() as usize + 1;
    let mut counts = vec![vec![0u64; days]; n];
    let mut present = vec![vec![false; days]; n];
    for (date, region, c) in records {
        let day = (date - start).num_days() as usize;
        counts[region][day] += c;
        present[region][day] = true;
    }
    for (region, flags) in present.iter().enumerate() {
        let missing = flags.iter().filter(|f| !**f).count();
        if missing > 0 {
            warn!(
                "cases for region {} have {missing} missing day(s) in {start}..{end}; filled with zeros",
                regions.leaf_ids()[region]
            );
        }
    }
    Ok(CaseSeries::new(start, counts))
}

/// Loads `reductions.csv` with header `date,region_id,workplace_change`.
/// The `region_id` column may name a leaf, a parent, or the literal
/// `NATIONAL`.
pub fn load_reductions(path: &Path, regions: &RegionTable) -> Result<MobilityReductionSeries> {
    #[derive(Deserialize)]
    struct Row {
        date: String,
        region_id: String,
        workplace_change: f64,
    }
    let mut entries: BTreeMap<NaiveDate, HashMap<String, f64>> = BTreeMap::new();
    for rec in open_reader(path)?.deserialize::<Row>() {
        let row = rec.map_err(|e| parse_err(path, e))?;
        let date = parse_date(path, &row.date)?;
        if row.workplace_change <= -1.0 {
            return Err(parse_err(
                path,
                format!(
                    "workplace_change {} for {} on {date} must exceed -1",
                    row.workplace_change, row.region_id
                ),
            ));
        }
        if row.region_id != NATIONAL_ID && regions.get(&row.region_id).is_none() {
            return Err(Error::UnknownRegion(row.region_id));
        }
        entries
            .entry(date)
            .or_default()
            .insert(row.region_id, row.workplace_change);
    }
    let mut parents = HashMap::new();
    for id in regions.leaf_ids() {
        let mut cur = id;
        while let Some(p) = regions.parent_of(cur) {
            parents.insert(cur.to_string(), p.to_string());
            cur = p;
        }
    }
    Ok(MobilityReductionSeries::new(entries, parents))
}

/// Loads `prevalence.csv` with header `date,total_infectious`.
pub fn load_prevalence(path: &Path) -> Result<PrevalenceSeries> {
    #[derive(Deserialize)]
    struct Row {
        date: String,
        total_infectious: f64,
    }
    let mut values = BTreeMap::new();
    for rec in open_reader(path)?.deserialize::<Row>() {
        let row = rec.map_err(|e| parse_err(path, e))?;
        values.insert(parse_date(path, &row.date)?, row.total_infectious);
    }
    PrevalenceSeries::new(values)
}

/// Scales the baseline commuter matrix by the mobility reduction of each
/// origin region on `date`, resolved leaf -> parent -> national.
pub fn effective_mobility(
    baseline: &MobilityMatrix,
    reductions: &MobilityReductionSeries,
    regions: &RegionTable,
    date: NaiveDate,
) -> Result<MobilityMatrix> {
    let ids = regions.leaf_ids();
    let n = baseline.dim();
    debug_assert_eq!(n, ids.len());
    let factors: Vec<f64> = ids
        .iter()
        .map(|id| reductions.resolve(date, id).map(|c| 1.0 + c))
        .collect::<Result<_>>()?;
    let mut out = MobilityMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.set(i, j, baseline.get(i, j) * factors[i]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::from_str(s).unwrap()
    }

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        p
    }

    fn simple_regions(dir: &Path) -> RegionTable {
        let p = write_file(
            dir,
            "regions.csv",
            "region_id,name,population,parent_id\nA,Alpha,100,\nB,Beta,200,\nC,Gamma,300,\n",
        );
        load_regions(&p).unwrap()
    }

    #[test]
    fn loads_region_table() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        assert_eq!(t.leaf_count(), 3);
        assert_eq!(t.total_population(), 600.0);
        assert_eq!(t.leaf_ids(), vec!["A", "B", "C"]);
    }

    #[test]
    fn rejects_duplicate_region() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "regions.csv",
            "region_id,name,population,parent_id\nA,Alpha,100,\nA,Again,50,\n",
        );
        assert!(matches!(
            load_regions(&p),
            Err(Error::DuplicateRegion(id)) if id == "A"
        ));
    }

    #[test]
    fn rejects_nonpositive_population() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "regions.csv",
            "region_id,name,population,parent_id\nA,Alpha,0,\n",
        );
        assert!(matches!(
            load_regions(&p),
            Err(Error::NonpositivePopulation { .. })
        ));
    }

    #[test]
    fn parents_are_not_leaves() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "regions.csv",
            "region_id,name,population,parent_id\n\
             A,Alpha,100,P1\nB,Beta,200,P1\nP1,Prov,300,\n",
        );
        let t = load_regions(&p).unwrap();
        assert_eq!(t.leaf_ids(), vec!["A", "B"]);
        assert_eq!(t.parent_of("A"), Some("P1"));
    }

    #[test]
    fn rejects_cyclic_parents() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "regions.csv",
            "region_id,name,population,parent_id\nA,Alpha,100,B\nB,Beta,200,A\n",
        );
        assert!(matches!(load_regions(&p), Err(Error::BadParentChain(_))));
    }

    #[test]
    fn loads_mobility_and_forces_zero_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let p = write_file(
            dir.path(),
            "mobility.csv",
            "origin,destination,volume\nA,B,10\nB,A,5\nA,A,7\n",
        );
        let m = load_mobility_baseline(&p, &t).unwrap();
        assert_eq!(m.get(0, 1), 10.0);
        assert_eq!(m.get(1, 0), 5.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.trace(), 0.0);
    }

    #[test]
    fn empty_mobility_file_gives_zero_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let p = write_file(dir.path(), "mobility.csv", "origin,destination,volume\n");
        let m = load_mobility_baseline(&p, &t).unwrap();
        assert_eq!(m.total(), 0.0);
    }

    #[test]
    fn rejects_negative_volume_and_unknown_region() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let p = write_file(
            dir.path(),
            "mobility.csv",
            "origin,destination,volume\nA,B,-1\n",
        );
        assert!(matches!(
            load_mobility_baseline(&p, &t),
            Err(Error::NegativeVolume { .. })
        ));
        let p = write_file(
            dir.path(),
            "mobility.csv",
            "origin,destination,volume\nA,Z,1\n",
        );
        assert!(matches!(
            load_mobility_baseline(&p, &t),
            Err(Error::UnknownRegion(id)) if id == "Z"
        ));
    }

    #[test]
    fn loads_cases_and_fills_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let p = write_file(
            dir.path(),
            "cases.csv",
            "date,region_id,new_cases\n\
             2020-07-01,A,3\n2020-07-03,A,5\n2020-07-01,B,1\n",
        );
        let c = load_cases(&p, &t).unwrap();
        assert_eq!(c.count(0, date("2020-07-01")), Some(3));
        assert_eq!(c.count(0, date("2020-07-02")), Some(0)); // gap filled
        assert_eq!(c.count(0, date("2020-07-03")), Some(5));
        assert_eq!(c.count(1, date("2020-07-01")), Some(1));
        assert_eq!(c.count(2, date("2020-07-01")), Some(0));
        assert_eq!(c.count(0, date("2020-06-01")), Some(0)); // pre-epidemic
        assert_eq!(c.count(0, date("2020-07-04")), None);
        assert_eq!(c.cumulative(0, date("2020-07-03")), Some(8));
    }

    #[test]
    fn rejects_negative_case_count() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let p = write_file(
            dir.path(),
            "cases.csv",
            "date,region_id,new_cases\n2020-07-01,A,-2\n",
        );
        assert!(matches!(
            load_cases(&p, &t),
            Err(Error::NegativeCount { .. })
        ));
    }

    #[test]
    fn effective_mobility_scales_by_origin_factor() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let mut base = MobilityMatrix::zeros(3);
        base.set(0, 1, 10.0);
        base.set(1, 0, 4.0);
        let mut day = HashMap::new();
        day.insert("A".to_string(), -0.4);
        day.insert(NATIONAL_ID.to_string(), 0.0);
        let mut entries = BTreeMap::new();
        entries.insert(date("2020-07-01"), day);
        let red = MobilityReductionSeries::new(entries, HashMap::new());
        let m = effective_mobility(&base, &red, &t, date("2020-07-01")).unwrap();
        assert!((m.get(0, 1) - 6.0).abs() < 1e-12);
        assert_eq!(m.get(1, 0), 4.0); // national factor 0 for origin B
        assert_eq!(m.trace(), 0.0);
    }

    #[test]
    fn effective_mobility_falls_back_to_province() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "regions.csv",
            "region_id,name,population,parent_id\nA,Alpha,100,P1\nB,Beta,200,P1\nP1,Prov,300,\n",
        );
        let t = load_regions(&p).unwrap();
        let r = write_file(
            dir.path(),
            "reductions.csv",
            "date,region_id,workplace_change\n\
             2020-07-01,P1,-0.5\n2020-07-01,NATIONAL,-0.1\n",
        );
        let red = load_reductions(&r, &t).unwrap();
        let mut base = MobilityMatrix::zeros(2);
        base.set(0, 1, 10.0);
        let m = effective_mobility(&base, &red, &t, date("2020-07-01")).unwrap();
        // leaf entry missing for A, province entry -0.5 applies
        assert!((m.get(0, 1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn effective_mobility_with_zero_reductions_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let mut base = MobilityMatrix::zeros(3);
        base.set(0, 1, 10.0);
        base.set(2, 1, 3.0);
        let mut day = HashMap::new();
        day.insert(NATIONAL_ID.to_string(), 0.0);
        let mut entries = BTreeMap::new();
        entries.insert(date("2020-07-01"), day);
        let red = MobilityReductionSeries::new(entries, HashMap::new());
        let m = effective_mobility(&base, &red, &t, date("2020-07-01")).unwrap();
        assert_eq!(m, base);
    }

    #[test]
    fn effective_mobility_errors_outside_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let base = MobilityMatrix::zeros(3);
        let red = MobilityReductionSeries::default();
        assert!(matches!(
            effective_mobility(&base, &red, &t, date("2020-07-01")),
            Err(Error::DateNotCovered(_))
        ));
    }

    #[test]
    fn fallback_resolution_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let t = simple_regions(dir.path());
        let mut base = MobilityMatrix::zeros(3);
        base.set(0, 1, 7.5);
        base.set(1, 2, 2.25);
        let mut day = HashMap::new();
        day.insert(NATIONAL_ID.to_string(), -0.37);
        day.insert("B".to_string(), -0.21);
        let mut entries = BTreeMap::new();
        entries.insert(date("2020-07-01"), day);
        let red = MobilityReductionSeries::new(entries, HashMap::new());
        let a = effective_mobility(&base, &red, &t, date("2020-07-01")).unwrap();
        let b = effective_mobility(&base, &red, &t, date("2020-07-01")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prevalence_rejects_nonpositive_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            dir.path(),
            "prevalence.csv",
            "date,total_infectious\n2020-07-01,0\n",
        );
        assert!(matches!(
            load_prevalence(&p),
            Err(Error::NonpositivePrevalence { .. })
        ));
    }
}
