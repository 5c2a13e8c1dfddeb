//! System specification files.
//!
//! Specs are TOML: dimension, polynomial degree, coordinate mode, noise
//! symbols with distributions, coefficient entries as polynomial strings
//! over the symbol names, and an initial-state model. Coefficient
//! columns are addressed either by raw index (`col`) or, in reduced
//! mode, by the monomial exponent tuple (`monomial`), which is the
//! readable option for wide degree blocks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{
    CoeffMatrix, InitialStateModel, Mode, NoiseDistribution, NoisePolynomial, NoiseSymbol,
    StateMap, SystemSpec,
};
use crate::error::{Error, Result};
use crate::kron::{index_set_len, rank_descending};
use crate::scalar::Scalar;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    name: String,
    n: usize,
    degree: u32,
    mode: String,
    #[serde(default)]
    noise: Vec<RawNoise>,
    initial: RawInitial,
    #[serde(default)]
    coeff: Vec<RawCoeff>,
}

#[derive(Deserialize)]
struct RawNoise {
    symbol: String,
    #[serde(flatten)]
    dist: RawDist,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum RawDist {
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        mean: f64,
        std: f64,
    },
    TruncatedGaussian {
        mean: f64,
        std: f64,
        lo: f64,
        hi: f64,
    },
    ExplicitMoments {
        moments: Vec<f64>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoeff {
    degree: u32,
    #[serde(default)]
    entry: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    row: usize,
    #[serde(default)]
    col: Option<usize>,
    #[serde(default)]
    monomial: Option<Vec<u16>>,
    poly: String,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawInitial {
    Independent {
        dim: Vec<RawDist>,
    },
    Functional {
        base: Vec<RawBase>,
        map: Vec<RawMap>,
    },
    Explicit {
        moments: Vec<Vec<f64>>,
    },
}

#[derive(Deserialize)]
struct RawBase {
    name: String,
    #[serde(flatten)]
    dist: RawDist,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawMap {
    Poly { terms: Vec<RawTerm> },
    Cos { shift: f64, weights: Vec<f64> },
    Sin { shift: f64, weights: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: f64,
    powers: Vec<u16>,
}

fn convert_dist<T: Scalar>(d: &RawDist) -> NoiseDistribution<T> {
    match d {
        RawDist::Uniform { a, b } => NoiseDistribution::Uniform {
            a: T::from_f64_lit(*a),
            b: T::from_f64_lit(*b),
        },
        RawDist::Gaussian { mean, std } => NoiseDistribution::Gaussian {
            mean: T::from_f64_lit(*mean),
            std: T::from_f64_lit(*std),
        },
        RawDist::TruncatedGaussian { mean, std, lo, hi } => NoiseDistribution::TruncatedGaussian {
            mean: T::from_f64_lit(*mean),
            std: T::from_f64_lit(*std),
            lo: T::from_f64_lit(*lo),
            hi: T::from_f64_lit(*hi),
        },
        RawDist::ExplicitMoments { moments } => NoiseDistribution::ExplicitMoments(
            moments.iter().map(|&m| T::from_f64_lit(m)).collect(),
        ),
    }
}

/// Parse a system specification from a file.
pub fn parse_spec_file<T: Scalar>(path: &Path) -> Result<SystemSpec<T>> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Parse("spec file is not UTF-8".into()))?;
    let hash = hex_digest(&bytes);
    parse_spec_str(&text, hash)
}

/// SHA-256 of raw bytes as lowercase hex.
pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Parse a system specification from a string; `content_hash` is stored
/// verbatim (callers hash the raw source).
pub fn parse_spec_str<T: Scalar>(text: &str, content_hash: String) -> Result<SystemSpec<T>> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mode = match raw.mode.as_str() {
        "full" => Mode::Full,
        "reduced" => Mode::Reduced,
        other => return Err(Error::Parse(format!("unknown mode {other:?}"))),
    };
    let mut sym_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in raw.noise.iter().enumerate() {
        if sym_index.insert(s.symbol.as_str(), i).is_some() {
            return Err(Error::Parse(format!(
                "duplicate noise symbol {:?}",
                s.symbol
            )));
        }
    }
    let nsyms = raw.noise.len();
    let noise: Vec<NoiseSymbol<T>> = raw
        .noise
        .iter()
        .map(|s| NoiseSymbol {
            name: s.symbol.clone(),
            distribution: convert_dist(&s.dist),
        })
        .collect();

    let mut coeffs: Vec<CoeffMatrix<T>> = (0..=raw.degree)
        .map(|d| CoeffMatrix {
            degree: d,
            cols: mode.block_len(raw.n, d),
            entries: BTreeMap::new(),
        })
        .collect();
    for rc in &raw.coeff {
        if rc.degree > raw.degree {
            return Err(Error::Parse(format!(
                "coefficient block of degree {} exceeds system degree {}",
                rc.degree, raw.degree
            )));
        }
        let target = &mut coeffs[rc.degree as usize];
        for e in &rc.entry {
            let col = resolve_column(e, rc.degree, raw.n, mode, target.cols)?;
            if e.row >= raw.n {
                return Err(Error::Parse(format!("entry row {} out of range", e.row)));
            }
            let poly = parse_polynomial::<T>(&e.poly, &sym_index, nsyms)?;
            match target.entries.entry((e.row, col)) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(poly);
                }
                std::collections::btree_map::Entry::Occupied(mut o) => o.get_mut().add(&poly),
            }
        }
    }

    let initial = match &raw.initial {
        RawInitial::Independent { dim } => {
            InitialStateModel::IndependentProduct(dim.iter().map(convert_dist).collect())
        }
        RawInitial::Functional { base, map } => {
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            for (i, b) in base.iter().enumerate() {
                if seen.insert(b.name.as_str(), i).is_some() {
                    return Err(Error::Parse(format!(
                        "duplicate base variable {:?}",
                        b.name
                    )));
                }
            }
            let dists = base.iter().map(|b| convert_dist(&b.dist)).collect();
            let maps = map
                .iter()
                .map(|m| -> Result<StateMap<T>> {
                    Ok(match m {
                        RawMap::Poly { terms } => StateMap::Polynomial(
                            terms
                                .iter()
                                .map(|t| (t.powers.clone(), T::from_f64_lit(t.coeff)))
                                .collect(),
                        ),
                        RawMap::Cos { shift, weights } => StateMap::CosAffine {
                            shift: T::from_f64_lit(*shift),
                            weights: weights.iter().map(|&w| T::from_f64_lit(w)).collect(),
                        },
                        RawMap::Sin { shift, weights } => StateMap::SinAffine {
                            shift: T::from_f64_lit(*shift),
                            weights: weights.iter().map(|&w| T::from_f64_lit(w)).collect(),
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            InitialStateModel::Functional { base: dists, maps }
        }
        RawInitial::Explicit { moments } => InitialStateModel::ExplicitMoments(
            moments
                .iter()
                .map(|v| v.iter().map(|&x| T::from_f64_lit(x)).collect())
                .collect(),
        ),
    };

    let spec = SystemSpec {
        name: raw.name,
        n: raw.n,
        degree: raw.degree,
        mode,
        noise,
        coeffs,
        initial,
        content_hash,
    };
    spec.validate()?;
    Ok(spec)
}

fn resolve_column(e: &RawEntry, degree: u32, n: usize, mode: Mode, cols: usize) -> Result<usize> {
    match (&e.col, &e.monomial) {
        (Some(c), None) => {
            if *c >= cols {
                return Err(Error::Parse(format!("entry column {c} out of range")));
            }
            Ok(*c)
        }
        (None, Some(m)) => {
            if mode != Mode::Reduced {
                return Err(Error::Parse(
                    "monomial column addressing requires reduced mode".into(),
                ));
            }
            if m.len() != n {
                return Err(Error::Parse("monomial tuple has wrong length".into()));
            }
            let d: u32 = m.iter().map(|&x| x as u32).sum();
            if d != degree {
                return Err(Error::Parse(format!(
                    "monomial degree {d} does not match block degree {degree}"
                )));
            }
            let rank = rank_descending(m);
            debug_assert!(rank < index_set_len(n, degree));
            Ok(rank)
        }
        _ => Err(Error::Parse(
            "entry needs exactly one of `col` or `monomial`".into(),
        )),
    }
}

/// Parse `"-1*a + 0.5*b^2 - 3"` style polynomial strings over declared
/// symbol names; referencing an undeclared symbol is an error.
pub fn parse_polynomial<T: Scalar>(
    text: &str,
    symbols: &BTreeMap<&str, usize>,
    nsyms: usize,
) -> Result<NoisePolynomial<T>> {
    let mut poly = NoisePolynomial::zero(nsyms);
    let mut chars = text.chars().peekable();
    let mut sign = T::one();
    let mut started = false;
    loop {
        skip_ws(&mut chars);
        match chars.peek() {
            None => {
                if !started {
                    return Err(Error::Parse("empty polynomial".into()));
                }
                break;
            }
            Some('+') => {
                chars.next();
                sign = T::one();
            }
            Some('-') => {
                chars.next();
                sign = -T::one();
            }
            Some(_) if started => {
                return Err(Error::Parse(format!("expected '+' or '-' in {text:?}")));
            }
            _ => {}
        }
        skip_ws(&mut chars);
        let (coeff, exps) = parse_term::<T>(&mut chars, symbols, nsyms, text)?;
        poly.add_term(exps, sign * coeff);
        started = true;
        skip_ws(&mut chars);
        if chars.peek().is_none() {
            break;
        }
    }
    Ok(poly)
}

fn parse_term<T: Scalar>(
    chars: &mut std::iter::Peekable<std::str::Chars>,
    symbols: &BTreeMap<&str, usize>,
    nsyms: usize,
    text: &str,
) -> Result<(T, Vec<u16>)> {
    let mut coeff = T::one();
    let mut exps = vec![0u16; nsyms];
    loop {
        skip_ws(chars);
        match chars.peek() {
            Some(c) if c.is_ascii_digit() || *c == '.' => {
                let num = take_while(chars, |c| {
                    c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E')
                    // exponent signs directly after e/E
                });
                let num = extend_exponent(num, chars);
                let v: f64 = num
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number {num:?} in {text:?}")))?;
                coeff *= T::from_f64_lit(v);
            }
            Some(c) if c.is_ascii_alphabetic() || *c == '_' => {
                let name = take_while(chars, |c| c.is_ascii_alphanumeric() || c == '_');
                let idx = *symbols.get(name.as_str()).ok_or_else(|| {
                    Error::Parse(format!("undeclared symbol {name:?} in {text:?}"))
                })?;
                let mut power = 1u16;
                skip_ws(chars);
                if let Some('^') = chars.peek() {
                    chars.next();
                    skip_ws(chars);
                    let p = take_while(chars, |c| c.is_ascii_digit());
                    power = p
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad exponent in {text:?}")))?;
                }
                exps[idx] += power;
            }
            _ => {
                return Err(Error::Parse(format!("expected factor in {text:?}")));
            }
        }
        skip_ws(chars);
        if let Some('*') = chars.peek() {
            chars.next();
            continue;
        }
        break;
    }
    Ok((coeff, exps))
}

fn extend_exponent(mut num: String, chars: &mut std::iter::Peekable<std::str::Chars>) -> String {
    // `take_while` stops before a sign that follows `e`; splice it in
    if num.ends_with(['e', 'E']) {
        if let Some(&c) = chars.peek() {
            if c == '+' || c == '-' {
                chars.next();
                num.push(c);
                num.push_str(&take_while(chars, |c| c.is_ascii_digit()));
            }
        }
    }
    num
}

fn skip_ws(chars: &mut std::iter::Peekable<std::str::Chars>) {
    while matches!(chars.peek(), Some(c) if c.is_whitespace()) {
        chars.next();
    }
}

fn take_while(
    chars: &mut std::iter::Peekable<std::str::Chars>,
    pred: impl Fn(char) -> bool,
) -> String {
    let mut s = String::new();
    while let Some(&c) = chars.peek() {
        if pred(c) {
            s.push(c);
            chars.next();
        } else {
            break;
        }
    }
    s
}
