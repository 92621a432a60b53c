use super::DatasetError;
use crate::seed;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// A synthetic citation network written in the Cora file layout: a
/// degree-corrected stochastic block model with class-topical bag-of-words
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSpec {
    /// `(class name, node count)`.
    pub classes: Vec<(String, usize)>,
    pub n_features: usize,
    /// Citation rows to draw (self and repeated pairs included).
    pub citations: usize,
    /// Probability that a citation stays inside the citing node's class.
    pub homophily: f64,
    /// Tail index of the Pareto degree propensities.
    pub degree_tail: f64,
    /// Words drawn per node, uniform on this inclusive range.
    pub words: (usize, usize),
    /// Vocabulary slice of each class topic.
    pub topic_words: usize,
    /// Probability that a word comes from the node's class topic.
    pub topic_weight: f64,
    pub seed: u64,
}

impl Default for SurrogateSpec {
    fn default() -> Self {
        let classes = [
            ("Case_Based", 298),
            ("Genetic_Algorithms", 418),
            ("Neural_Networks", 818),
            ("Probabilistic_Methods", 426),
            ("Reinforcement_Learning", 217),
            ("Rule_Learning", 180),
            ("Theory", 351),
        ];
        SurrogateSpec {
            classes: classes.iter().map(|&(c, n)| (c.to_string(), n)).collect(),
            n_features: 1433,
            citations: 5429,
            homophily: 0.8,
            degree_tail: 2.5,
            words: (9, 30),
            topic_words: 120,
            topic_weight: 0.25,
            seed: 2708,
        }
    }
}

impl SurrogateSpec {
    pub fn n_nodes(&self) -> usize {
        self.classes.iter().map(|c| c.1).sum()
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Config(m.to_string()));
        if self.classes.len() < 2 || self.classes.iter().any(|c| c.1 == 0) {
            return bad("need at least two nonempty classes");
        }
        if self.n_features == 0 || self.topic_words == 0 || self.topic_words > self.n_features {
            return bad("topic_words must lie in 1..=n_features");
        }
        if !(0.0..=1.0).contains(&self.homophily) || !(0.0..=1.0).contains(&self.topic_weight) {
            return bad("homophily and topic_weight are probabilities");
        }
        if self.degree_tail.is_nan() || self.degree_tail <= 1.0 {
            return bad("degree_tail must exceed 1");
        }
        if self.words.0 == 0 || self.words.0 > self.words.1 {
            return bad("words must be a nonempty range starting at 1 or more");
        }
        Ok(())
    }
}

/// Writes `cora.content` and `cora.cites` for `spec` into `dir`.
pub fn write_cora_surrogate(dir: &Path, spec: &SurrogateSpec) -> Result<(), DatasetError> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let n = spec.n_nodes();
    let mut labels: Vec<usize> = spec
        .classes
        .iter()
        .enumerate()
        .flat_map(|(c, &(_, size))| std::iter::repeat_n(c, size))
        .collect();
    labels.shuffle(&mut rng);
    let mut ids: Vec<u64> = (0..n as u64).map(|i| 31 + 397 * i).collect();
    ids.shuffle(&mut rng);

    let propensity: Vec<f64> = (0..n)
        .map(|_| {
            (1.0 - rng.random::<f64>())
                .powf(-1.0 / (spec.degree_tail - 1.0))
                .min(100.0)
        })
        .collect();
    let pick = |members: &[usize]| -> Result<WeightedIndex<f64>, DatasetError> {
        WeightedIndex::new(members.iter().map(|&i| propensity[i]))
            .map_err(|e| DatasetError::Config(e.to_string()))
    };
    let members: Vec<Vec<usize>> = (0..spec.classes.len())
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();
    let outsiders: Vec<Vec<usize>> = (0..spec.classes.len())
        .map(|c| (0..n).filter(|&i| labels[i] != c).collect())
        .collect();
    let all: Vec<usize> = (0..n).collect();
    let any = pick(&all)?;
    let within = members
        .iter()
        .map(|m| pick(m))
        .collect::<Result<Vec<_>, _>>()?;
    let across = outsiders
        .iter()
        .map(|m| pick(m))
        .collect::<Result<Vec<_>, _>>()?;

    // Every node cites at least once while rows last, so few nodes are isolated.
    let mut first: Vec<usize> = (0..n).collect();
    first.shuffle(&mut rng);
    let mut cites = Vec::with_capacity(spec.citations);
    for r in 0..spec.citations {
        let citing = if r < n {
            first[r]
        } else {
            any.sample(&mut rng)
        };
        let c = labels[citing];
        let cited = if rng.random::<f64>() < spec.homophily {
            members[c][within[c].sample(&mut rng)]
        } else {
            outsiders[c][across[c].sample(&mut rng)]
        };
        cites.push((cited, citing));
    }

    let mut vocab: Vec<usize> = (0..spec.n_features).collect();
    let topics: Vec<Vec<usize>> = (0..spec.classes.len())
        .map(|_| {
            vocab.shuffle(&mut rng);
            vocab[..spec.topic_words].to_vec()
        })
        .collect();
    let mut content = Vec::new();
    for i in 0..n {
        let mut words = vec![false; spec.n_features];
        for _ in 0..rng.random_range(spec.words.0..=spec.words.1) {
            let w = if rng.random::<f64>() < spec.topic_weight {
                topics[labels[i]][rng.random_range(0..spec.topic_words)]
            } else {
                rng.random_range(0..spec.n_features)
            };
            words[w] = true;
        }
        write!(content, "{}", ids[i]).expect("write to memory");
        for w in words {
            write!(content, "\t{}", u8::from(w)).expect("write to memory");
        }
        writeln!(content, "\t{}", spec.classes[labels[i]].0).expect("write to memory");
    }
    let mut cites_text = Vec::new();
    for (a, b) in cites {
        writeln!(cites_text, "{}\t{}", ids[a], ids[b]).expect("write to memory");
    }
    let io = |path: &Path, e: std::io::Error| DatasetError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (name, bytes) in [("cora.content", &content), ("cora.cites", &cites_text)] {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
