//! Individual noise sequence generators and the `MODZ` noise file format.
//!
//! The generators are a harness convenience: the scheme itself never assumes
//! anything about how `z` came about.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Alphabet, Symbol, SymbolSeq};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MODZ";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 16;
const DIST_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Symbols read from a `MODZ` file; the first `n` are used.
    File {
        path: PathBuf,
    },
    Constant {
        symbol: Symbol,
    },
    /// i.i.d. draws from `dist` (one probability per symbol).
    Iid {
        dist: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Periodic {
        pattern: Vec<Symbol>,
    },
    /// First-order Markov chain started from state 0; `transitions[a][b] = P(b | a)`.
    Markov {
        transitions: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Blocks of length `k` with a uniform `(k-d)`-prefix; the `d`-suffix is
    /// reused when the prefix was seen before and drawn uniformly otherwise.
    TestChannel {
        k: usize,
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl NoiseSpec {
    /// Binary-style Bernoulli noise: symbol 0 with probability `1-p`, the
    /// remaining mass spread evenly over the nonzero symbols.
    pub fn bernoulli(alphabet: Alphabet, p: f64) -> Self {
        let q = alphabet.size() as usize;
        let mut dist = vec![p / (q - 1) as f64; q];
        dist[0] = 1.0 - p;
        NoiseSpec::Iid { dist, seed: None }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            NoiseSpec::Iid { seed, .. }
            | NoiseSpec::Markov { seed, .. }
            | NoiseSpec::TestChannel { seed, .. } => *seed,
            _ => None,
        }
    }

    pub fn validate(&self, alphabet: Alphabet) -> Result<()> {
        let q = alphabet.size() as usize;
        let bad = |m: String| Err(Error::InvalidNoiseSpec(m));
        match self {
            NoiseSpec::File { .. } => Ok(()),
            NoiseSpec::Constant { symbol } => {
                if alphabet.contains(*symbol) {
                    Ok(())
                } else {
                    bad(format!("constant symbol {symbol} not below q={q}"))
                }
            }
            NoiseSpec::Iid { dist, .. } => check_dist(dist, q),
            NoiseSpec::Periodic { pattern } => {
                if pattern.is_empty() {
                    bad("empty periodic pattern".into())
                } else if pattern.iter().any(|&s| !alphabet.contains(s)) {
                    bad(format!("periodic pattern has a symbol not below q={q}"))
                } else {
                    Ok(())
                }
            }
            NoiseSpec::Markov { transitions, .. } => {
                if transitions.len() != q {
                    return bad(format!(
                        "markov table has {} rows, need {q}",
                        transitions.len()
                    ));
                }
                transitions.iter().try_for_each(|row| check_dist(row, q))
            }
            NoiseSpec::TestChannel { k, d, .. } => {
                if *d >= 1 && d < k {
                    Ok(())
                } else {
                    bad(format!("test channel needs 1 <= d < k, got k={k}, d={d}"))
                }
            }
        }
    }

    /// Parses a compact spec string such as `bern:p=0.11,seed=42`,
    /// `periodic:pattern=0/1`, `test:k=3,d=1` or a path to a `MODZ` file.
    pub fn parse(s: &str, alphabet: Alphabet) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, r),
            None => (s, ""),
        };
        let kv = |key: &str| -> Option<&str> {
            rest.split(',')
                .filter_map(|p| p.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim())
        };
        let num = |key: &str| -> Result<Option<f64>> {
            kv(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::InvalidNoiseSpec(format!("{key}={v} is not a number")))
                })
                .transpose()
        };
        let int = |key: &str| -> Result<Option<u64>> {
            kv(key)
                .map(|v| {
                    v.parse::<u64>().map_err(|_| {
                        Error::InvalidNoiseSpec(format!("{key}={v} is not an integer"))
                    })
                })
                .transpose()
        };
        let required = |key: &str, v: Option<u64>| -> Result<u64> {
            v.ok_or_else(|| Error::InvalidNoiseSpec(format!("{kind} needs {key}=")))
        };
        let seed = int("seed")?;
        let spec = match kind {
            "zero" | "zeros" => NoiseSpec::Constant { symbol: 0 },
            "const" => NoiseSpec::Constant {
                symbol: alphabet.check(required("s", int("s")?)? as u32)?,
            },
            "bern" => {
                let p = num("p")?.ok_or_else(|| Error::InvalidNoiseSpec("bern needs p=".into()))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidNoiseSpec(format!("p={p} outside [0,1]")));
                }
                let mut spec = NoiseSpec::bernoulli(alphabet, p);
                if let NoiseSpec::Iid { seed: sd, .. } = &mut spec {
                    *sd = seed;
                }
                spec
            }
            "iid" => NoiseSpec::Iid {
                dist: parse_floats(kv("dist").unwrap_or(""), '/')?,
                seed,
            },
            "periodic" => {
                let pat = kv("pattern").unwrap_or("");
                let pattern = if pat.contains('/') {
                    pat.split('/')
                        .map(|t| {
                            t.trim().parse::<u8>().map_err(|_| {
                                Error::InvalidNoiseSpec(format!("bad pattern symbol {t:?}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?
                } else {
                    pat.chars()
                        .map(|c| {
                            c.to_digit(10).map(|d| d as u8).ok_or_else(|| {
                                Error::InvalidNoiseSpec(format!("bad pattern symbol {c:?}"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                NoiseSpec::Periodic { pattern }
            }
            "markov" => NoiseSpec::Markov {
                transitions: kv("rows")
                    .unwrap_or("")
                    .split(';')
                    .map(|row| parse_floats(row, '/'))
                    .collect::<Result<_>>()?,
                seed,
            },
            "test" => NoiseSpec::TestChannel {
                k: required("k", int("k")?)? as usize,
                d: required("d", int("d")?)? as usize,
                seed,
            },
            "file" => NoiseSpec::File {
                path: PathBuf::from(rest),
            },
            _ if Path::new(s).exists() => NoiseSpec::File {
                path: PathBuf::from(s),
            },
            _ => {
                return Err(Error::InvalidNoiseSpec(format!(
                    "unrecognized noise spec {s:?}"
                )))
            }
        };
        spec.validate(alphabet)?;
        Ok(spec)
    }

    /// Generates `n` noise symbols. Randomized variants use their own seed if
    /// they carry one, otherwise `seed`.
    pub fn generate(&self, alphabet: Alphabet, n: usize, seed: u64) -> Result<SymbolSeq> {
        noise_generate(self, alphabet, n, seed)
    }
}

fn check_dist(dist: &[f64], q: usize) -> Result<()> {
    if dist.len() != q {
        return Err(Error::InvalidNoiseSpec(format!(
            "distribution has {} entries, need {q}",
            dist.len()
        )));
    }
    if dist.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidNoiseSpec(
            "negative or non-finite probability".into(),
        ));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > DIST_TOLERANCE {
        return Err(Error::InvalidNoiseSpec(format!(
            "distribution sums to {total}"
        )));
    }
    Ok(())
}

fn parse_floats(s: &str, sep: char) -> Result<Vec<f64>> {
    s.split(sep)
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidNoiseSpec(format!("bad probability {t:?}")))
        })
        .collect()
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| {
            v.iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("/")
        };
        let seed = |s: &Option<u64>| s.map(|s| format!(",seed={s}")).unwrap_or_default();
        match self {
            NoiseSpec::File { path } => write!(f, "file:{}", path.display()),
            NoiseSpec::Constant { symbol } => write!(f, "const:s={symbol}"),
            NoiseSpec::Iid { dist, seed: s } => write!(f, "iid:dist={}{}", join(dist), seed(s)),
            NoiseSpec::Periodic { pattern } => {
                let p: Vec<String> = pattern.iter().map(|s| s.to_string()).collect();
                write!(f, "periodic:pattern={}", p.join("/"))
            }
            NoiseSpec::Markov {
                transitions,
                seed: s,
            } => {
                let rows: Vec<String> = transitions.iter().map(|r| join(r)).collect();
                write!(f, "markov:rows={}{}", rows.join(";"), seed(s))
            }
            NoiseSpec::TestChannel { k, d, seed: s } => write!(f, "test:k={k},d={d}{}", seed(s)),
        }
    }
}

fn sample_categorical(rng: &mut ChaCha8Rng, cdf: &[f64]) -> Symbol {
    let u: f64 = rng.gen();
    // cdf[last] may fall a hair short of 1.0; clamp to the last symbol.
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as Symbol
}

fn cumulative(dist: &[f64]) -> Vec<f64> {
    dist.iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// Deterministic in `(spec, alphabet, n, seed)`.
pub fn noise_generate(
    spec: &NoiseSpec,
    alphabet: Alphabet,
    n: usize,
    seed: u64,
) -> Result<SymbolSeq> {
    if n == 0 {
        return Err(Error::param("noise length must be at least 1"));
    }
    spec.validate(alphabet)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed().unwrap_or(seed));
    let q = alphabet.size();
    let data: Vec<Symbol> = match spec {
        NoiseSpec::File { path } => {
            let seq = read_noise_file(path)?;
            if seq.alphabet() != alphabet {
                return Err(Error::AlphabetMismatch {
                    left: seq.alphabet().size(),
                    right: q,
                });
            }
            if seq.len() < n {
                return Err(Error::NoiseFormat {
                    path: path.clone(),
                    reason: format!("holds {} symbols, {n} requested", seq.len()),
                });
            }
            return Ok(seq.prefix(n));
        }
        NoiseSpec::Constant { symbol } => vec![*symbol; n],
        NoiseSpec::Periodic { pattern } => pattern.iter().copied().cycle().take(n).collect(),
        NoiseSpec::Iid { dist, .. } => {
            let cdf = cumulative(dist);
            (0..n).map(|_| sample_categorical(&mut rng, &cdf)).collect()
        }
        NoiseSpec::Markov { transitions, .. } => {
            let cdfs: Vec<Vec<f64>> = transitions.iter().map(|r| cumulative(r)).collect();
            let mut state = 0usize;
            (0..n)
                .map(|_| {
                    let s = sample_categorical(&mut rng, &cdfs[state]);
                    state = s as usize;
                    s
                })
                .collect()
        }
        NoiseSpec::TestChannel { k, d, .. } => {
            let (k, d) = (*k, *d);
            let mut registry: HashMap<Vec<Symbol>, Vec<Symbol>> = HashMap::new();
            let mut out = Vec::with_capacity(n.div_ceil(k) * k);
            while out.len() < n {
                let prefix: Vec<Symbol> =
                    (0..k - d).map(|_| rng.gen_range(0..q) as Symbol).collect();
                let suffix = registry
                    .entry(prefix.clone())
                    .or_insert_with(|| (0..d).map(|_| rng.gen_range(0..q) as Symbol).collect());
                out.extend_from_slice(&prefix);
                out.extend_from_slice(suffix);
            }
            out.truncate(n);
            out
        }
    };
    SymbolSeq::new(alphabet, data)
}

/// Checks that every complete `k`-block's `(k-d)`-prefix determines its suffix.
/// Returns the index of the first offending block, if any.
pub fn unique_prefix_violation(z: &SymbolSeq, k: usize, d: usize) -> Option<usize> {
    let mut seen: HashMap<&[Symbol], &[Symbol]> = HashMap::new();
    for (i, block) in z.as_slice().chunks_exact(k).enumerate() {
        let (p, s) = block.split_at(k - d);
        if let Some(prev) = seen.insert(p, s) {
            if prev != s {
                return Some(i);
            }
        }
    }
    None
}

pub fn encode_noise(seq: &SymbolSeq) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + seq.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&seq.alphabet().size().to_le_bytes());
    out.extend_from_slice(&(seq.len() as u64).to_le_bytes());
    out.extend_from_slice(seq.as_slice());
    out
}

pub fn decode_noise(bytes: &[u8]) -> std::result::Result<SymbolSeq, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("truncated header ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic".into());
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let q = u16::from_le_bytes([bytes[6], bytes[7]]);
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if body.len() as u64 != n {
        return Err(format!("header says {n} symbols, body has {}", body.len()));
    }
    let alphabet = Alphabet::new(q as u32).map_err(|e| e.to_string())?;
    SymbolSeq::new(alphabet, body.to_vec()).map_err(|e| e.to_string())
}

pub fn read_noise_file(path: &Path) -> Result<SymbolSeq> {
    let bytes = fs::read(path)?;
    decode_noise(&bytes).map_err(|reason| Error::NoiseFormat {
        path: path.to_path_buf(),
        reason,
    })
}

/// Writes atomically: a temporary sibling file is renamed over `path`.
pub fn write_noise_file(path: &Path, seq: &SymbolSeq) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&encode_noise(seq))?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
