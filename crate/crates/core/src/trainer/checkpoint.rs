//! Versioned text checkpoints.
//!
//! ```text
//! eqc-checkpoint 1
//! ansatz eqc
//! n 5
//! depth 1
//! episode 5000
//! adam_t 14000
//! params 2
//! -3.0517578125e-5 -0x1.0000000000000p-15
//! 0.7853981633974483 0x1.921fb54442d18p-1
//! adam_m 2
//! ...
//! adam_v 2
//! ...
//! ```
//!
//! Every float line carries a decimal for reading and a hex float
//! (`±0x1.<52 bits>p<exp>`, or `0x0.<bits>p-1022` when subnormal) that is
//! decoded bit-exactly.

use std::path::Path;

use crate::ansatz::AnsatzKind;
use crate::error::{Error, Result};
use crate::trainer::optimizer::AdamState;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "eqc-checkpoint";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: AnsatzKind,
    pub n: usize,
    pub depth: usize,
    pub episode: usize,
    pub params: Vec<f64>,
    pub adam: AdamState,
}

/// Hex-float rendering of `x`; inverse of [`parse_hex_f64`].
pub fn format_hex_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        format!("{sign}0x0.{frac:013x}p-1022")
    } else {
        format!("{sign}0x1.{frac:013x}p{}", exp - 1023)
    }
}

pub fn parse_hex_f64(s: &str) -> Option<f64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let value = match body {
        "nan" => return Some(f64::NAN),
        "inf" => f64::INFINITY,
        _ => {
            let body = body.strip_prefix("0x")?;
            let (mant, exp) = body.split_once('p')?;
            let (lead, frac) = mant.split_once('.')?;
            if frac.len() != 13 {
                return None;
            }
            let frac = u64::from_str_radix(frac, 16).ok()?;
            let exp: i64 = exp.parse().ok()?;
            match lead {
                "1" if (-1022..=1023).contains(&exp) => {
                    f64::from_bits((((exp + 1023) as u64) << 52) | frac)
                }
                "0" if exp == -1022 => f64::from_bits(frac),
                _ => return None,
            }
        }
    };
    Some(if neg { -value } else { value })
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MAGIC} {FORMAT_VERSION}\nansatz {}\nn {}\ndepth {}\nepisode {}\nadam_t {}\n",
            self.kind, self.n, self.depth, self.episode, self.adam.t
        );
        for (name, values) in [
            ("params", &self.params),
            ("adam_m", &self.adam.m),
            ("adam_v", &self.adam.v),
        ] {
            out.push_str(&format!("{name} {}\n", values.len()));
            for &v in values.iter() {
                out.push_str(&format!("{v:e} {}\n", format_hex_f64(v)));
            }
        }
        out
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let mut r = Reader {
            lines: text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).collect(),
            pos: 0,
            source,
        };
        let version: u32 = r.number(MAGIC)?;
        if version != FORMAT_VERSION {
            return Err(Error::parse(source, 1, format!("unsupported checkpoint version {version}")));
        }
        let (kno, kind) = r.entry("ansatz")?;
        let kind: AnsatzKind = kind.parse().map_err(|e: Error| Error::parse(source, kno, e.to_string()))?;
        let n = r.number("n")?;
        let depth = r.number("depth")?;
        let episode = r.number("episode")?;
        let adam_t = r.number("adam_t")?;
        let params = r.block("params")?;
        let m = r.block("adam_m")?;
        let v = r.block("adam_v")?;
        let want = kind.n_trainable(n, depth);
        if params.len() != want || m.len() != want || v.len() != want {
            return Err(Error::parse(
                source,
                0,
                format!(
                    "{kind} n={n} depth={depth} needs {want} parameters, file has {}/{}/{}",
                    params.len(),
                    m.len(),
                    v.len()
                ),
            ));
        }
        Ok(Checkpoint {
            kind,
            n,
            depth,
            episode,
            params,
            adam: AdamState { t: adam_t, m, v },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    source: &'a Path,
}

impl<'a> Reader<'a> {
    fn line(&mut self, wanted: &str) -> Result<(usize, &'a str)> {
        let l = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::parse(self.source, 0, format!("unexpected end of file, wanted {wanted}")))?;
        self.pos += 1;
        Ok(l)
    }

    fn entry(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (no, line) = self.line(key)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((no, v.trim())),
            _ => Err(Error::parse(self.source, no, format!("expected `{key} <value>`"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (no, v) = self.entry(key)?;
        v.parse()
            .map_err(|_| Error::parse(self.source, no, format!("bad number {v:?}")))
    }

    fn block(&mut self, key: &str) -> Result<Vec<f64>> {
        let count: usize = self.number(key)?;
        (0..count)
            .map(|_| {
                let (no, line) = self.line(key)?;
                let err = |msg: String| Error::parse(self.source, no, msg);
                let mut fields = line.split_whitespace();
                let (Some(dec), Some(hex), None) = (fields.next(), fields.next(), fields.next()) else {
                    return Err(err("expected `<decimal> <hex>`".into()));
                };
                let exact = parse_hex_f64(hex).ok_or_else(|| err(format!("bad hex float {hex:?}")))?;
                let approx: f64 = dec.parse().map_err(|_| err(format!("bad decimal {dec:?}")))?;
                let agrees = (approx.is_nan() && exact.is_nan())
                    || approx == exact
                    || (approx - exact).abs() <= 1e-12 * exact.abs();
                if !agrees {
                    return Err(err(format!("decimal {dec} disagrees with {hex}")));
                }
                Ok(exact)
            })
            .collect()
    }
}
