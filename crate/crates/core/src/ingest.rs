//! Rating-dataset pipeline: parse, map items to arms, split users into a
//! training and a test half, estimate a pseudo-reward table on the training
//! half and replay the test half as an environment.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::DatasetEnv;
use crate::error::{Error, Result};
use crate::pseudoreward::{PseudoRewardTable, RewardSupport};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord<T> {
    pub user_id: String,
    pub item_id: String,
    pub rating: T,
    pub arm_label: Option<String>,
}

/// Column names of the ratings file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingSchema {
    pub user: String,
    pub item: String,
    pub rating: String,
}

impl Default for RatingSchema {
    fn default() -> Self {
        Self { user: "user".into(), item: "item".into(), rating: "rating".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRatings<T> {
    pub records: Vec<RatingRecord<T>>,
    /// Rows whose rating is not a number in the support.
    pub rejected: usize,
}

/// Reads a ratings CSV in file order, rejecting rows off the support.
pub fn parse_ratings<T: Scalar>(
    path: impl AsRef<Path>,
    schema: &RatingSchema,
    support: &RewardSupport<T>,
) -> Result<ParsedRatings<T>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv_open(path, e))?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        log::warn!("{} is empty", path.display());
        return Ok(ParsedRatings { records: Vec::new(), rejected: 0 });
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column {name:?}", path.display())))
    };
    let (cu, ci, cr) = (column(&schema.user)?, column(&schema.item)?, column(&schema.rating)?);
    let mut records = Vec::new();
    let mut rejected = 0;
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let rating = field(cr).parse::<f64>().ok().and_then(T::from_f64).and_then(|r| {
            support.index_of(r).map(|i| support.value(i))
        });
        match rating {
            Some(rating) => records.push(RatingRecord {
                user_id: field(cu).to_string(),
                item_id: field(ci).to_string(),
                rating,
                arm_label: None,
            }),
            None => rejected += 1,
        }
    }
    if records.is_empty() {
        log::warn!("{} contains no usable ratings", path.display());
    }
    if rejected > 0 {
        log::warn!("{}: rejected {rejected} rows with ratings off the support", path.display());
    }
    Ok(ParsedRatings { records, rejected })
}

/// Reads `item,label` rows into item -> label set.
pub fn read_item_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv_open(path, e))?;
    if reader.headers()?.iter().map(str::trim).ne(["item", "label"]) {
        return Err(Error::Schema(format!("{}: label header must be item,label", path.display())));
    }
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        if row.len() != 2 {
            return Err(Error::Schema(format!("{}: malformed label row {row:?}", path.display())));
        }
        out.entry(row[0].trim().to_string()).or_default().insert(row[1].trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmAssignment<T> {
    /// Records of labelled items, each carrying its arm label.
    pub records: Vec<RatingRecord<T>>,
    /// Arm `k` is `arm_labels[k]`; sorted.
    pub arm_labels: Vec<String>,
    /// Items without any label, sorted; their records are dropped.
    pub excluded_items: Vec<String>,
    pub excluded_records: usize,
}

/// Picks one label per item uniformly at random (seeded, items visited in
/// sorted order) and applies it to all of that item's records.
pub fn assign_arms<T: Scalar>(
    records: &[RatingRecord<T>],
    labels: &BTreeMap<String, BTreeSet<String>>,
    seed: u64,
) -> ArmAssignment<T> {
    let items: BTreeSet<&str> = records.iter().map(|r| r.item_id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: HashMap<&str, &str> = HashMap::new();
    let mut excluded_items = Vec::new();
    for item in items {
        match labels.get(item).filter(|set| !set.is_empty()) {
            Some(set) => {
                let pick = rng.gen_range(0..set.len());
                chosen.insert(item, set.iter().nth(pick).expect("index in range"));
            }
            None => excluded_items.push(item.to_string()),
        }
    }
    let arm_labels: Vec<String> =
        chosen.values().copied().collect::<BTreeSet<_>>().into_iter().map(String::from).collect();
    let mut out = Vec::new();
    let mut excluded_records = 0;
    for r in records {
        match chosen.get(r.item_id.as_str()) {
            Some(label) => out.push(RatingRecord { arm_label: Some(label.to_string()), ..r.clone() }),
            None => excluded_records += 1,
        }
    }
    if !excluded_items.is_empty() {
        log::warn!("{} items have no label and were excluded", excluded_items.len());
    }
    ArmAssignment { records: out, arm_labels, excluded_items, excluded_records }
}

/// Keeps the `n` most rated items (ties by item id) and makes each its own arm.
pub fn top_items<T: Scalar>(records: &[RatingRecord<T>], n: usize) -> Result<ArmAssignment<T>> {
    if n < 2 {
        return Err(Error::Parameter("top_items needs at least 2 items".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.item_id.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let keep: BTreeSet<&str> = ranked.iter().take(n).map(|(i, _)| *i).collect();
    let arm_labels: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    let mut excluded_records = 0;
    for r in records {
        if keep.contains(r.item_id.as_str()) {
            out.push(RatingRecord { arm_label: Some(r.item_id.clone()), ..r.clone() });
        } else {
            excluded_records += 1;
        }
    }
    Ok(ArmAssignment { records: out, arm_labels, excluded_items: Vec::new(), excluded_records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// The most active users form the training half.
    #[default]
    MostActiveUsersTrain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub mode: SplitMode,
    pub train_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { mode: SplitMode::MostActiveUsersTrain, train_fraction: 0.5 }
    }
}

/// `(train, test)` records.
pub type TrainTest<T> = (Vec<RatingRecord<T>>, Vec<RatingRecord<T>>);

/// Ranks users by rating count (descending, ties by user id) and moves whole
/// users into the training side until it holds at least `train_fraction` of
/// all ratings. Both sides keep file order.
pub fn split<T: Scalar>(
    records: &[RatingRecord<T>],
    spec: &SplitSpec,
) -> Result<TrainTest<T>> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Parameter(format!("train fraction must lie in (0, 1), got {}", spec.train_fraction)));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.user_id.as_str()).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::Validation("cannot split: fewer than two users".into()));
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let total = records.len() as f64;
    let mut train_users = BTreeSet::new();
    let mut held = 0usize;
    for (user, n) in &ranked {
        if held as f64 >= spec.train_fraction * total {
            break;
        }
        train_users.insert(*user);
        held += n;
    }
    if train_users.len() == ranked.len() {
        return Err(Error::Validation("cannot split: every user lands in the training half".into()));
    }
    let (train, test): (Vec<_>, Vec<_>) =
        records.iter().cloned().partition(|r| train_users.contains(r.user_id.as_str()));
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMode {
    #[default]
    #[serde(rename = "mean")]
    MeanOnly,
    #[serde(rename = "mean-std")]
    MeanPlusStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEstimate<T> {
    pub table: PseudoRewardTable<T>,
    /// `(target, source, reward)` cells estimated from a single event, whose
    /// standard deviation is taken as 0.
    pub single_event_cells: Vec<(usize, usize, T)>,
    /// Arms without any training rating; their rows and columns are unknown.
    pub empty_arms: Vec<usize>,
}

fn arm_index(labels: &[String]) -> HashMap<&str, usize> {
    labels.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect()
}

/// Estimates `s(l, k)(r)` from training ratings.
///
/// The conditioning population of `(k, r)` is every rating event in which
/// a user rated an arm-`k` item with `r`; the statistic of an event is that
/// user's mean rating on arm `l` (events of users who never rated `l` are
/// skipped). The entry is the mean of the statistics, plus their sample
/// standard deviation under [`EstimateMode::MeanPlusStd`]. Empty cells get
/// `b` and are marked unknown.
pub fn estimate_table<T: Scalar>(
    train: &[RatingRecord<T>],
    arm_labels: &[String],
    support: &RewardSupport<T>,
    mode: EstimateMode,
) -> Result<TableEstimate<T>> {
    if train.is_empty() {
        return Err(Error::Precondition("training split is empty".into()));
    }
    let k = arm_labels.len();
    let s = support.len();
    let index = arm_index(arm_labels);
    let mut users: BTreeMap<&str, Vec<(f64, u64)>> = BTreeMap::new();
    let mut events: Vec<(&str, usize, usize)> = Vec::with_capacity(train.len());
    for r in train {
        let label = r.arm_label.as_deref().ok_or_else(|| Error::Precondition("record without arm label".into()))?;
        let arm = *index.get(label).ok_or_else(|| Error::Precondition(format!("unknown arm label {label:?}")))?;
        let i = support.require_index(r.rating)?;
        let per_arm = users.entry(r.user_id.as_str()).or_insert_with(|| vec![(0.0, 0); k]);
        per_arm[arm].0 += support.value(i).as_f64();
        per_arm[arm].1 += 1;
        events.push((r.user_id.as_str(), arm, i));
    }
    // (count, sum, sum of squares) per (target, source, reward index).
    let mut acc = vec![(0u64, 0.0f64, 0.0f64); k * k * s];
    for (user, src, i) in events {
        let per_arm = &users[user];
        for (l, &(sum, n)) in per_arm.iter().enumerate() {
            if l == src || n == 0 {
                continue;
            }
            let stat = sum / n as f64;
            let cell = &mut acc[(l * k + src) * s + i];
            cell.0 += 1;
            cell.1 += stat;
            cell.2 += stat * stat;
        }
    }
    let b = support.max_reward();
    let mut single = Vec::new();
    let table = PseudoRewardTable::from_fn(k, support.clone(), |l, src, i| {
        let (n, sum, sq) = acc[(l * k + src) * s + i];
        if n == 0 {
            return (b, false);
        }
        let mean = sum / n as f64;
        let value = match mode {
            EstimateMode::MeanOnly => mean,
            EstimateMode::MeanPlusStd if n == 1 => {
                single.push((l, src, support.value(i)));
                mean
            }
            EstimateMode::MeanPlusStd => mean + ((sq - sum * sum / n as f64) / (n - 1) as f64).max(0.0).sqrt(),
        };
        (T::lit(value), true)
    })?;
    let mut seen = vec![false; k];
    for per_arm in users.values() {
        for (a, &(_, n)) in per_arm.iter().enumerate() {
            seen[a] |= n > 0;
        }
    }
    let empty_arms: Vec<usize> = (0..k).filter(|&a| !seen[a]).collect();
    for &a in &empty_arms {
        log::warn!("arm {a} ({}) has no training ratings", arm_labels[a]);
    }
    Ok(TableEstimate { table, single_event_cells: single, empty_arms })
}

/// Replay environment over the test ratings, one pool per arm.
pub fn build_dataset_env<T: Scalar>(
    test: &[RatingRecord<T>],
    arm_labels: &[String],
    support: &RewardSupport<T>,
) -> Result<DatasetEnv<T>> {
    let index = arm_index(arm_labels);
    let mut counts = vec![vec![0u64; support.len()]; arm_labels.len()];
    for r in test {
        let label = r.arm_label.as_deref().ok_or_else(|| Error::Precondition("record without arm label".into()))?;
        let arm = *index.get(label).ok_or_else(|| Error::Precondition(format!("unknown arm label {label:?}")))?;
        counts[arm][support.require_index(r.rating)?] += 1;
    }
    if let Some(a) = counts.iter().position(|c| c.iter().all(|&n| n == 0)) {
        return Err(Error::Validation(format!("arm {a} ({}) has no test ratings", arm_labels[a])));
    }
    DatasetEnv::from_counts(support.clone(), counts, Some(arm_labels.to_vec()))
}

/// Arm mapping applied by [`build_from_files`].
#[derive(Debug, Clone, PartialEq)]
pub enum ArmSource {
    /// Item-label file; one label per item drawn with the seed.
    Labels(std::path::PathBuf),
    /// The `n` most rated items, each its own arm.
    TopItems(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub schema: RatingSchema,
    pub arms: ArmSource,
    pub split: SplitSpec,
    pub mode: EstimateMode,
    pub padding: f64,
    pub safety_buffer: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BuildOutput<T> {
    pub table: PseudoRewardTable<T>,
    pub env: DatasetEnv<T>,
    pub arm_labels: Vec<String>,
    pub rejected: usize,
    pub excluded_items: Vec<String>,
    pub single_event_cells: usize,
}

/// The full pipeline: parse, assign arms, split, estimate, pad, buffer.
/// Padding uses `seed` as well.
pub fn build_from_files<T: Scalar>(
    ratings: impl AsRef<Path>,
    support: &RewardSupport<T>,
    opts: &BuildOptions,
) -> Result<BuildOutput<T>> {
    let parsed = parse_ratings(ratings, &opts.schema, support)?;
    let assignment = match &opts.arms {
        ArmSource::Labels(path) => assign_arms(&parsed.records, &read_item_labels(path)?, opts.seed),
        ArmSource::TopItems(n) => top_items(&parsed.records, *n)?,
    };
    if assignment.arm_labels.len() < 2 {
        return Err(Error::Validation("fewer than two arms after arm assignment".into()));
    }
    let (train, test) = split(&assignment.records, &opts.split)?;
    let estimate = estimate_table(&train, &assignment.arm_labels, support, opts.mode)?;
    let table = estimate
        .table
        .pad_unknown(T::lit(opts.padding), opts.seed)?
        .apply_safety_buffer(T::lit(opts.safety_buffer))?;
    let env = build_dataset_env(&test, &assignment.arm_labels, support)?;
    Ok(BuildOutput {
        table,
        env,
        arm_labels: assignment.arm_labels,
        rejected: parsed.rejected,
        excluded_items: assignment.excluded_items,
        single_event_cells: estimate.single_event_cells.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;

    fn rec(user: &str, item: &str, rating: f64, label: Option<&str>) -> RatingRecord<f64> {
        RatingRecord { user_id: user.into(), item_id: item.into(), rating, arm_label: label.map(String::from) }
    }

    fn five() -> RewardSupport<f64> {
        RewardSupport::integers(5).unwrap()
    }

    #[test]
    fn parse_counts_rejections_and_checks_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "user,item,rating\nu1,i1,3\nu2,i1,7\nu2,i2,5\n").unwrap();
        let parsed = parse_ratings(&p, &RatingSchema::default(), &five()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.rejected, 1);

        std::fs::write(&p, "user,item,rating\nu1,i1,3\nu2,i1,4\nu2,i2,5\n").unwrap();
        assert_eq!(parse_ratings(&p, &RatingSchema::default(), &five()).unwrap().records.len(), 3);

        std::fs::write(&p, "uid,item,rating\nu1,i1,3\n").unwrap();
        assert!(matches!(parse_ratings(&p, &RatingSchema::default(), &five()), Err(Error::Schema(_))));
        let schema = RatingSchema { user: "uid".into(), ..RatingSchema::default() };
        assert_eq!(parse_ratings(&p, &schema, &five()).unwrap().records.len(), 1);

        std::fs::write(&p, "").unwrap();
        let parsed = parse_ratings(&p, &RatingSchema::default(), &five()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parse_ratings(dir.path().join("missing.csv"), &RatingSchema::default(), &five()).unwrap_err().is_io());
    }

    #[test]
    fn assignment_is_seeded_and_consistent() {
        let records = vec![rec("u1", "a", 3.0, None), rec("u2", "a", 4.0, None), rec("u1", "b", 2.0, None), rec("u1", "z", 2.0, None)];
        let mut labels: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        labels.entry("a".into()).or_default().extend(["Drama".to_string(), "Comedy".to_string()]);
        labels.entry("b".into()).or_default().insert("Action".into());
        let one = assign_arms(&records, &labels, 1);
        assert_eq!(one, assign_arms(&records, &labels, 1));
        assert_eq!(one.excluded_items, vec!["z".to_string()]);
        assert_eq!(one.excluded_records, 1);
        assert_eq!(one.records[0].arm_label, one.records[1].arm_label);
        assert_eq!(one.records[2].arm_label.as_deref(), Some("Action"));
        let mut sorted = one.arm_labels.clone();
        sorted.sort();
        assert_eq!(sorted, one.arm_labels);
    }

    #[test]
    fn eighteen_labels_make_eighteen_sorted_arms() {
        let names: Vec<String> = (0..18).map(|i| format!("g{i:02}")).collect();
        let records: Vec<_> = names.iter().map(|g| rec("u", g, 3.0, None)).collect();
        let labels = names.iter().map(|g| (g.clone(), BTreeSet::from([g.clone()]))).collect();
        let a = assign_arms(&records, &labels, 0);
        assert_eq!(a.arm_labels, names);
    }

    #[test]
    fn split_by_activity() {
        let mut records = Vec::new();
        for (user, n) in [("c", 5), ("a", 10), ("b", 5)] {
            for i in 0..n {
                records.push(rec(user, &format!("i{i}"), 3.0, Some("x")));
            }
        }
        let (train, test) = split(&records, &SplitSpec::default()).unwrap();
        assert!(train.iter().all(|r| r.user_id == "a"));
        assert_eq!(train.len(), 10);
        assert_eq!(test.len(), 10);
        let one_user: Vec<_> = records.iter().filter(|r| r.user_id == "a").cloned().collect();
        assert!(split(&one_user, &SplitSpec::default()).is_err());
    }

    #[test]
    fn estimate_single_event_and_empty_cells() {
        let labels = vec!["0".to_string(), "1".to_string()];
        let train = vec![rec("u", "x", 3.0, Some("0")), rec("u", "y", 4.0, Some("1"))];
        let est = estimate_table(&train, &labels, &five(), EstimateMode::MeanOnly).unwrap();
        assert_eq!(est.table.value(1, 0, 3.0).unwrap(), 4.0);
        assert_eq!(est.table.value(1, 0, 5.0).unwrap(), 5.0);
        assert!(!est.table.is_known(1, 0, 4));
        let std = estimate_table(&train, &labels, &five(), EstimateMode::MeanPlusStd).unwrap();
        assert_eq!(std.table.value(1, 0, 3.0).unwrap(), 4.0);
        assert_eq!(std.single_event_cells.len(), 2);
    }

    #[test]
    fn estimate_uses_user_means_and_sample_std() {
        let labels = vec!["0".to_string(), "1".to_string()];
        let train = vec![
            rec("u", "x", 2.0, Some("0")),
            rec("u", "y", 4.0, Some("1")),
            rec("u", "z", 2.0, Some("1")),
            rec("v", "x", 2.0, Some("0")),
            rec("v", "y", 5.0, Some("1")),
        ];
        let mean = estimate_table(&train, &labels, &five(), EstimateMode::MeanOnly).unwrap();
        // Statistics 3 (user u) and 5 (user v).
        assert!((mean.table.value(1, 0, 2.0).unwrap() - 4.0).abs() < 1e-12);
        let std = estimate_table(&train, &labels, &five(), EstimateMode::MeanPlusStd).unwrap();
        assert!((std.table.value(1, 0, 2.0).unwrap() - (4.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn dataset_env_names_missing_arm() {
        let labels = vec!["drama".to_string(), "horror".to_string()];
        let test = vec![rec("u", "x", 3.0, Some("drama"))];
        let err = build_dataset_env(&test, &labels, &five()).unwrap_err();
        assert!(err.to_string().contains("horror"));
        let test = vec![rec("u", "x", 1.0, Some("drama")), rec("u", "y", 5.0, Some("drama")), rec("v", "z", 3.0, Some("horror"))];
        let env = build_dataset_env(&test, &labels, &five()).unwrap();
        assert_eq!(env.true_means(), vec![3.0, 3.0]);
    }
}
