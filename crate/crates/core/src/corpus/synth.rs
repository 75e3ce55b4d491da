//! Deterministic synthetic datasets in the ratings/meta file format.
//!
//! Items are grouped into clusters; every cluster owns a keyword pool with one
//! keyword per item.
//!
//! * `Relatedness`: every cluster is cut into fixed blocks of consecutive
//!   items and a document takes one whole block, so co-occurring items are
//!   similar. The title samples keywords from the whole pool of that cluster
//!   and therefore only reveals the cluster.
//! * `Diversity`: a document draws at most one item from each of several
//!   clusters, so items of one cluster never co-occur. The title names the
//!   keyword of every drawn item.
//!
//! Years are assigned so that a split at [`SYNTH_SPLIT_YEAR`] yields a 90:10
//! train/test ratio.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Test documents carry this year, training documents are older.
pub const SYNTH_SPLIT_YEAR: i32 = 2010;

const FILLER: &[&str] = &[
    "study", "analysis", "effects", "model", "approach", "evidence", "role", "review",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthMode {
    Relatedness,
    Diversity,
}

impl FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relatedness" => Ok(SynthMode::Relatedness),
            "diversity" => Ok(SynthMode::Diversity),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic mode `{other}` (expected relatedness|diversity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub mode: SynthMode,
    pub n_clusters: usize,
    pub docs_per_cluster: usize,
    pub items_per_cluster: usize,
    pub items_per_doc: usize,
    pub seed: u64,
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.n_clusters == 0
            || self.docs_per_cluster == 0
            || self.items_per_cluster == 0
            || self.items_per_doc == 0
        {
            return fail("all synthetic sizes must be positive".into());
        }
        match self.mode {
            SynthMode::Relatedness if self.items_per_doc > self.items_per_cluster => fail(format!(
                "items_per_doc ({}) exceeds items_per_cluster ({})",
                self.items_per_doc, self.items_per_cluster
            )),
            SynthMode::Diversity if self.items_per_doc > self.n_clusters => fail(format!(
                "items_per_doc ({}) exceeds n_clusters ({}) in diversity mode",
                self.items_per_doc, self.n_clusters
            )),
            _ => Ok(()),
        }
    }
}

/// Generated file contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticFiles {
    pub ratings: String,
    pub meta: String,
}

impl SyntheticFiles {
    /// Writes `ratings.tsv` and `meta.tsv` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ratings = dir.join("ratings.tsv");
        let meta = dir.join("meta.tsv");
        fs::write(&ratings, &self.ratings).map_err(|e| Error::io(&ratings, e))?;
        fs::write(&meta, &self.meta).map_err(|e| Error::io(&meta, e))?;
        Ok((ratings, meta))
    }

    /// Parses the generated contents without touching the filesystem.
    pub fn to_corpus(&self) -> Result<super::Corpus> {
        super::parse_corpus(
            &self.ratings,
            Path::new("<synthetic ratings>"),
            &self.meta,
            Path::new("<synthetic meta>"),
        )
    }
}

pub fn item_id(cluster: usize, item: usize) -> String {
    format!("c{cluster:02}i{item:03}")
}

fn keyword(cluster: usize, item: usize) -> String {
    // letters only so the tokenizer keeps each keyword whole
    let mut s = String::from("kw");
    for v in [cluster, item] {
        let mut v = v;
        loop {
            s.push((b'a' + (v % 26) as u8) as char);
            v /= 26;
            if v == 0 {
                break;
            }
        }
        s.push('q');
    }
    s
}

struct SynthDoc {
    items: Vec<(usize, usize)>,
    title: Vec<String>,
}

fn relatedness_doc(p: &SynthParams, cluster: usize, rng: &mut ChaCha8Rng) -> SynthDoc {
    // one of the cluster's fixed blocks of `items_per_doc` consecutive items
    let n_blocks = p.items_per_cluster.div_ceil(p.items_per_doc);
    let start = rng.random_range(0..n_blocks) * p.items_per_doc;
    let mut local: Vec<usize> = (0..p.items_per_doc)
        .map(|o| (start + o) % p.items_per_cluster)
        .collect();
    local.sort_unstable();

    let n_words = 3.min(p.items_per_cluster);
    let pool: Vec<usize> = (0..p.items_per_cluster).collect();
    let mut title: Vec<String> = pool
        .choose_multiple(rng, n_words)
        .map(|&j| keyword(cluster, j))
        .collect();
    title.push(FILLER.choose(rng).unwrap().to_string());
    title.shuffle(rng);
    SynthDoc {
        items: local.into_iter().map(|j| (cluster, j)).collect(),
        title,
    }
}

fn diversity_doc(p: &SynthParams, rng: &mut ChaCha8Rng) -> SynthDoc {
    let clusters: Vec<usize> = (0..p.n_clusters).collect();
    let mut chosen: Vec<usize> = clusters
        .choose_multiple(rng, p.items_per_doc)
        .copied()
        .collect();
    chosen.sort_unstable();
    let items: Vec<(usize, usize)> = chosen
        .iter()
        .map(|&c| (c, rng.random_range(0..p.items_per_cluster)))
        .collect();
    let mut title: Vec<String> = items.iter().map(|&(c, j)| keyword(c, j)).collect();
    title.push(FILLER.choose(rng).unwrap().to_string());
    title.shuffle(rng);
    SynthDoc { items, title }
}

/// Generates a synthetic dataset. Output is a pure function of `params`.
pub fn generate_synthetic(params: &SynthParams) -> Result<SyntheticFiles> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_docs = params.n_clusters * params.docs_per_cluster;

    let mut docs: Vec<SynthDoc> = (0..n_docs)
        .map(|i| match params.mode {
            SynthMode::Relatedness => {
                relatedness_doc(params, i / params.docs_per_cluster, &mut rng)
            }
            SynthMode::Diversity => diversity_doc(params, &mut rng),
        })
        .collect();
    docs.shuffle(&mut rng);

    let n_test = ((n_docs as f64) * 0.1).round().max(1.0) as usize;
    let n_train = n_docs.saturating_sub(n_test);

    let mut ratings = String::new();
    let mut meta = String::new();
    for (i, d) in docs.iter().enumerate() {
        let doc_id = format!("d{i:05}");
        let year = if i < n_train {
            SYNTH_SPLIT_YEAR - 9 + (i % 9) as i32
        } else {
            SYNTH_SPLIT_YEAR
        };
        writeln!(meta, "{doc_id}\t{year}\t{}", d.title.join(" ")).unwrap();
        for &(c, j) in &d.items {
            writeln!(ratings, "{doc_id}\t{}", item_id(c, j)).unwrap();
        }
    }
    Ok(SyntheticFiles { ratings, meta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn params(mode: SynthMode) -> SynthParams {
        SynthParams {
            mode,
            n_clusters: 5,
            docs_per_cluster: 40,
            items_per_cluster: 10,
            items_per_doc: 4,
            seed: 42,
        }
    }

    /// (within-cluster, cross-cluster) pair co-occurrence totals, counted
    /// straight from the ratings text.
    fn pair_counts(files: &SyntheticFiles) -> (usize, usize) {
        let mut by_doc: HashMap<&str, Vec<&str>> = HashMap::new();
        for line in files.ratings.lines() {
            let (d, i) = line.split_once('\t').unwrap();
            by_doc.entry(d).or_default().push(i);
        }
        let (mut within, mut cross) = (0, 0);
        for items in by_doc.values() {
            for a in 0..items.len() {
                for b in a + 1..items.len() {
                    if items[a][..3] == items[b][..3] {
                        within += 1;
                    } else {
                        cross += 1;
                    }
                }
            }
        }
        (within, cross)
    }

    #[test]
    fn relatedness_cooccurs_within_clusters() {
        let f = generate_synthetic(&params(SynthMode::Relatedness)).unwrap();
        let (within, cross) = pair_counts(&f);
        assert!(within > cross, "{within} vs {cross}");
    }

    #[test]
    fn diversity_never_cooccurs_within_clusters() {
        let f = generate_synthetic(&params(SynthMode::Diversity)).unwrap();
        let (within, cross) = pair_counts(&f);
        assert_eq!(within, 0);
        assert!(cross > 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = params(SynthMode::Relatedness);
        assert_eq!(generate_synthetic(&p).unwrap(), generate_synthetic(&p).unwrap());
        let other = SynthParams { seed: 43, ..p };
        assert_ne!(generate_synthetic(&p).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn years_give_ninety_ten_split() {
        let f = generate_synthetic(&params(SynthMode::Diversity)).unwrap();
        let test = f
            .meta
            .lines()
            .filter(|l| l.split('\t').nth(1) == Some("2010"))
            .count();
        assert_eq!(test, 20);
        assert_eq!(f.meta.lines().count(), 200);
    }

    #[test]
    fn infeasible_parameters_rejected() {
        let mut p = params(SynthMode::Relatedness);
        p.items_per_doc = 11;
        assert!(generate_synthetic(&p).is_err());
        let mut p = params(SynthMode::Diversity);
        p.items_per_doc = 6;
        assert!(generate_synthetic(&p).is_err());
        let mut p = params(SynthMode::Diversity);
        p.n_clusters = 0;
        assert!(generate_synthetic(&p).is_err());
    }

    #[test]
    fn keywords_are_single_tokens() {
        assert_eq!(keyword(0, 0), "kwaqaq");
        assert_eq!(keyword(27, 3), "kwbbqdq");
    }
}
