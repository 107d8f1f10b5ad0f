//! Finite-dimensional (quasi-)normed spaces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{sum_with_threshold, Scalar};

/// Dimension above which norms use compensated summation.
pub const KAHAN_THRESHOLD: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    /// `(Σ|x_i|^q)^{1/q}` on `d` coordinates, `0 < q < ∞`.
    SeqLp {
        q: f64,
        dim: usize,
    },
    SupNorm {
        dim: usize,
    },
    Euclid {
        dim: usize,
    },
    /// Iterated `L^{q_1}(L^{q_2}(…))` over grids of sizes `d_i`, uniform weights.
    Nested {
        levels: Vec<(f64, usize)>,
    },
}

/// A finite-dimensional space together with its r-normability exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDescriptor {
    kind: SpaceKind,
    r: f64,
}

fn check_exponent(q: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("exponent must be finite and positive, got {q}")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::InvalidParameter("dimension must be positive".into()))
    } else {
        Ok(())
    }
}

impl SpaceDescriptor {
    pub fn new(kind: SpaceKind) -> Result<Self> {
        let r = match &kind {
            SpaceKind::SeqLp { q, dim } => {
                check_exponent(*q)?;
                check_dim(*dim)?;
                q.min(1.0)
            }
            SpaceKind::SupNorm { dim } | SpaceKind::Euclid { dim } => {
                check_dim(*dim)?;
                1.0
            }
            SpaceKind::Nested { levels } => {
                if levels.is_empty() {
                    return Err(Error::InvalidParameter("nested space needs at least one level".into()));
                }
                let mut r = 1.0f64;
                for &(q, d) in levels {
                    check_exponent(q)?;
                    check_dim(d)?;
                    r = r.min(q);
                }
                r
            }
        };
        Ok(Self { kind, r })
    }

    pub fn seq_lp(q: f64, dim: usize) -> Result<Self> {
        Self::new(SpaceKind::SeqLp { q, dim })
    }

    pub fn sup_norm(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::SupNorm { dim })
    }

    pub fn euclid(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclid { dim })
    }

    pub fn nested(levels: Vec<(f64, usize)>) -> Result<Self> {
        Self::new(SpaceKind::Nested { levels })
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn r_exponent(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SpaceKind::SeqLp { dim, .. } | SpaceKind::SupNorm { dim } | SpaceKind::Euclid { dim } => *dim,
            SpaceKind::Nested { levels } => levels.iter().map(|l| l.1).product(),
        }
    }

    /// Whether the norm comes from an inner product.
    pub fn is_hilbert(&self) -> bool {
        match &self.kind {
            SpaceKind::Euclid { .. } => true,
            SpaceKind::SeqLp { q, .. } => *q == 2.0,
            SpaceKind::Nested { levels } => levels.iter().all(|l| l.0 == 2.0),
            SpaceKind::SupNorm { dim } => *dim == 1,
        }
    }

    /// Spaces carrying the type-2 flag.
    pub fn is_type2(&self) -> bool {
        match &self.kind {
            SpaceKind::Euclid { .. } => true,
            SpaceKind::SeqLp { q, .. } => *q >= 2.0,
            _ => false,
        }
    }

    pub fn norm<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let expected = self.dim();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(self.norm_unchecked(x))
    }

    /// Norm without the dimension check; callers guarantee `x.len() == dim`.
    pub fn norm_unchecked<S: Scalar>(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.dim());
        match &self.kind {
            SpaceKind::Euclid { .. } => lp_norm(x, S::of(2.0), S::one()),
            SpaceKind::SeqLp { q, .. } => lp_norm(x, S::of(*q), S::one()),
            SpaceKind::SupNorm { .. } => x.iter().fold(S::zero(), |m, v| m.max(v.abs())),
            SpaceKind::Nested { levels } => nested_norm(x, levels),
        }
    }
}

fn lp_norm<S: Scalar>(x: &[S], q: S, weight: S) -> S {
    let two = S::of(2.0);
    let total = if q == two {
        sum_with_threshold(x.iter().map(|v| *v * *v), KAHAN_THRESHOLD)
    } else if q == S::one() {
        sum_with_threshold(x.iter().map(|v| v.abs()), KAHAN_THRESHOLD)
    } else {
        sum_with_threshold(x.iter().map(|v| v.abs().powf(q)), KAHAN_THRESHOLD)
    };
    let total = total * weight;
    if q == two {
        total.sqrt()
    } else if q == S::one() {
        total
    } else {
        total.powf(q.recip())
    }
}

fn nested_norm<S: Scalar>(x: &[S], levels: &[(f64, usize)]) -> S {
    let (q, d) = levels[0];
    let weight = S::of(1.0 / d as f64);
    if levels.len() == 1 {
        return lp_norm(x, S::of(q), weight);
    }
    let block = x.len() / d;
    let inner: Vec<S> = x.chunks(block).map(|c| nested_norm(c, &levels[1..])).collect();
    lp_norm(&inner, S::of(q), weight)
}

/// `(l_p, u_p) = (max(2^{1-p}, 1), max(2^{p-1}, 1))`.
pub fn lu_constants<S: Scalar>(p: S) -> Result<(S, S)> {
    if !(p > S::zero()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let one = S::one();
    let two = S::of(2.0);
    Ok((two.powf(one - p).max(one), two.powf(p - one).max(one)))
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SpaceKind::Euclid { dim } => write!(f, "l2:{dim}"),
            SpaceKind::SeqLp { q, dim } => write!(f, "lp:{q}:{dim}"),
            SpaceKind::SupNorm { dim } => write!(f, "linf:{dim}"),
            SpaceKind::Nested { levels } => {
                let parts: Vec<String> = levels.iter().map(|(q, d)| format!("{q}x{d}")).collect();
                write!(f, "nested:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for SpaceDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| Error::SpaceParse { input: s.to_string(), reason: reason.to_string() };
        let parse_dim = |t: &str| t.trim().parse::<usize>().map_err(|_| fail("bad dimension"));
        let parse_q = |t: &str| t.trim().parse::<f64>().map_err(|_| fail("bad exponent"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let built = match parts.as_slice() {
            ["l2", d] => Self::euclid(parse_dim(d)?),
            ["linf", d] => Self::sup_norm(parse_dim(d)?),
            ["lp", q, d] => {
                let q = parse_q(q)?;
                if q.is_infinite() {
                    return Err(fail("use linf:<d> for the sup norm"));
                }
                Self::seq_lp(q, parse_dim(d)?)
            }
            ["nested", spec] => {
                let mut levels = Vec::new();
                for item in spec.split(',') {
                    let (q, d) = item.split_once('x').ok_or_else(|| fail("levels look like <q>x<d>"))?;
                    levels.push((parse_q(q)?, parse_dim(d)?));
                }
                Self::nested(levels)
            }
            _ => return Err(fail("expected l2:<d>, lp:<q>:<d>, linf:<d> or nested:<q>x<d>,...")),
        };
        built.map_err(|e| fail(&e.to_string()))
    }
}

impl Serialize for SpaceDescriptor {
    fn serialize<Se: Serializer>(&self, serializer: Se) -> std::result::Result<Se::Ok, Se::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SpaceDescriptor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
