use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use crate::estimates::LocalData;
use crate::forms::PRESETS;
use crate::mesh::{build_mesh, Rect, SubdomainSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    Convergence,
    Inverse,
    Superapprox,
    Technique,
    Identity,
    LocalEstimate,
    NaiveSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Convergence,
        Experiment::Inverse,
        Experiment::Superapprox,
        Experiment::Technique,
        Experiment::Identity,
        Experiment::LocalEstimate,
        Experiment::NaiveSweep,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::Inverse => "inverse",
            Experiment::Superapprox => "superapprox",
            Experiment::Technique => "technique",
            Experiment::Identity => "identity",
            Experiment::LocalEstimate => "local-estimate",
            Experiment::NaiveSweep => "naive-sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }

    fn default_n(&self) -> Vec<usize> {
        match self {
            Experiment::Technique => vec![8, 16, 32],
            Experiment::Identity => vec![8],
            Experiment::LocalEstimate => vec![16, 32, 64],
            Experiment::NaiveSweep => vec![64],
            _ => vec![8, 16, 32, 64],
        }
    }

    fn default_d(&self) -> Vec<f64> {
        match self {
            Experiment::NaiveSweep => vec![1.0, 0.5, 0.25],
            _ => vec![1.0],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Validated sweep description.
///
/// `d` lists side lengths of squares centred in the unit square; records
/// carry the diameter of the square instead.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub preset: String,
    pub r: Vec<usize>,
    pub n: Vec<usize>,
    pub d: Vec<f64>,
    pub p: Vec<usize>,
    pub seeds: usize,
    /// Base seed of every random stream.
    pub seed: u64,
    pub data: LocalData,
    /// Quadrature refinement levels of the identity experiment.
    pub levels: usize,
    pub out: Option<PathBuf>,
}

pub const KEYS: [&str; 11] = ["experiment", "preset", "r", "n", "d", "p", "seeds", "seed", "data", "levels", "out"];

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            preset: "laplace".into(),
            r: vec![1],
            n: experiment.default_n(),
            d: experiment.default_d(),
            p: vec![1],
            seeds: 20,
            seed: 0,
            data: LocalData::Harmonic,
            levels: 6,
            out: None,
        }
    }

    /// Checks ranges and that every `(d, n)` pair gives an aligned square.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parse { line: 0, msg });
        if self.r.is_empty() || self.n.is_empty() || self.d.is_empty() || self.p.is_empty() {
            return bad("lists must be nonempty".into());
        }
        if !PRESETS.contains(&self.preset.as_str()) {
            return bad(format!("unknown preset \"{}\"", self.preset));
        }
        if let Some(r) = self.r.iter().find(|&&r| r != 1 && r != 2) {
            return bad(format!("r = {r} not in {{1, 2}}"));
        }
        if self.n.contains(&0) {
            return bad("n must be positive".into());
        }
        if let Some(d) = self.d.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
            return bad(format!("d = {d} not in (0, 1]"));
        }
        if self.seeds == 0 {
            return bad("seeds must be positive".into());
        }
        if self.levels < 3 {
            return bad("levels must be at least 3".into());
        }
        if self.experiment == Experiment::NaiveSweep && distinct(&self.d) < 3 {
            return bad("naive-sweep needs at least three d values".into());
        }
        for &n in &self.n {
            let mesh = build_mesh(Rect::unit(), n)?;
            for &d in &self.d {
                let sub = SubdomainSpec::new(Rect::centered_square([0.5, 0.5], d)?);
                if let Err(e) = mesh.grid_box(&sub) {
                    return Err(Error::Alignment(format!("d = {d} with n = {n}: {e}")));
                }
            }
        }
        Ok(())
    }

    /// Canonical `key=value` text; parsing it gives back this config.
    pub fn to_text(&self) -> String {
        let list = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        s += &format!("experiment={}\n", self.experiment);
        s += &format!("preset={}\n", self.preset);
        s += &format!("r={}\n", list(self.r.iter().map(|v| v.to_string()).collect()));
        s += &format!("n={}\n", list(self.n.iter().map(|v| v.to_string()).collect()));
        s += &format!("d={}\n", list(self.d.iter().map(|v| v.to_string()).collect()));
        s += &format!("p={}\n", list(self.p.iter().map(|v| v.to_string()).collect()));
        s += &format!("seeds={}\n", self.seeds);
        s += &format!("seed={}\n", self.seed);
        s += &format!("data={}\n", self.data.name());
        s += &format!("levels={}\n", self.levels);
        s
    }
}

fn distinct(v: &[f64]) -> usize {
    v.iter().map(|x| x.to_bits()).collect::<BTreeSet<_>>().len()
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<T>().map_err(|_| Error::Parse { line, msg: format!("bad value \"{item}\" for {key}") })
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Parse { line, msg: format!("bad value \"{value}\" for {key}") })
}

/// Parses line-oriented `key=value` text with comma-separated lists and
/// `#` comments, applies defaults and validates.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected key=value, got \"{content}\"") })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Parse { line, msg: format!("unknown key \"{key}\"") });
        }
        if value.is_empty() {
            return Err(Error::Parse { line, msg: format!("empty value for {key}") });
        }
        if entries.iter().any(|(_, k, _)| k == key) {
            return Err(Error::Parse { line, msg: format!("duplicate key \"{key}\"") });
        }
        entries.push((line, key.to_string(), value.to_string()));
    }
    let (line, _, name) = entries
        .iter()
        .find(|(_, k, _)| k == "experiment")
        .ok_or_else(|| Error::Parse { line: 0, msg: "missing key \"experiment\"".into() })?;
    let experiment =
        Experiment::parse(name).ok_or_else(|| Error::Parse { line: *line, msg: format!("unknown experiment \"{name}\"") })?;
    let mut cfg = ExperimentConfig::new(experiment);
    for (line, key, value) in &entries {
        let line = *line;
        match key.as_str() {
            "experiment" => {}
            "preset" => cfg.preset = value.clone(),
            "r" => cfg.r = parse_list(line, key, value)?,
            "n" => cfg.n = parse_list(line, key, value)?,
            "d" => cfg.d = parse_list(line, key, value)?,
            "p" => cfg.p = parse_list(line, key, value)?,
            "seeds" => cfg.seeds = parse_one(line, key, value)?,
            "seed" => cfg.seed = parse_one(line, key, value)?,
            "levels" => cfg.levels = parse_one(line, key, value)?,
            "data" => {
                cfg.data = LocalData::parse(value)
                    .ok_or_else(|| Error::Parse { line, msg: format!("unknown data kind \"{value}\"") })?
            }
            "out" => cfg.out = Some(PathBuf::from(value)),
            _ => unreachable!("keys are checked above"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse_config("experiment=identity\nr=1\nn=8").unwrap();
        assert_eq!(c.experiment, Experiment::Identity);
        assert_eq!(c.preset, "laplace");
        assert_eq!(c.r, vec![1]);
        assert_eq!(c.n, vec![8]);
        assert_eq!(c.seeds, 20);
    }

    #[test]
    fn unknown_experiment_is_named() {
        match parse_config("experiment=bogus") {
            Err(Error::Parse { line: 1, msg }) => assert!(msg.contains("bogus")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("# header\nexperiment=inverse\n\ncolour=blue\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e:?}");
    }

    #[test]
    fn misaligned_pair_is_listed() {
        match parse_config("experiment=local-estimate\nn=16\nd=0.3") {
            Err(Error::Alignment(msg)) => assert!(msg.contains("d = 0.3") && msg.contains("n = 16"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lists_comments_and_echo() {
        let text = "experiment=local-estimate # sweep\nn=16, 32\nd=1,0.5\np=1,2\nseeds=3\ndata=source\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.n, vec![16, 32]);
        assert_eq!(c.d, vec![1.0, 0.5]);
        assert_eq!(c.data, LocalData::Source);
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse_config("experiment=inverse\nr=3").is_err());
        assert!(parse_config("experiment=inverse\npreset=other").is_err());
        assert!(parse_config("experiment=inverse\nn=").is_err());
        assert!(parse_config("experiment=inverse\nn=8\nn=16").is_err());
        assert!(parse_config("experiment=naive-sweep\nd=1,0.5").is_err());
        assert!(parse_config("n=8").is_err());
        assert!(parse_config("experiment").is_err());
    }
}
