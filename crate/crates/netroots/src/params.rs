//! Model parameters and variant selection.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Which growth model generated (or is assumed to have generated) the graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// One APA tree plus uniform noise edges.
    SingleRoot,
    /// K APA trees grown together, root self-loops counted in the degree.
    FixedK,
    /// Roots created on the fly with weight `alpha0`.
    RandomK,
    /// Noise edges added sequentially with degree-dependent probabilities.
    SeqPaper,
    /// `SeqPaper` followed by independent deletion of tree edges.
    SeqPaperStar,
}

impl Variant {
    pub fn is_seq(self) -> bool {
        matches!(self, Variant::SeqPaper | Variant::SeqPaperStar)
    }

    pub fn is_multi_root(self) -> bool {
        matches!(self, Variant::FixedK | Variant::RandomK)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::SingleRoot => "single-root",
            Variant::FixedK => "fixed-k",
            Variant::RandomK => "random-k",
            Variant::SeqPaper => "seq",
            Variant::SeqPaperStar => "seq-star",
        }
    }
}

/// Parameters of one model variant.
///
/// `alpha = f64::INFINITY` is the uniform-attachment sentinel: attachment
/// weights become uniform regardless of `beta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub variant: Variant,
    #[serde(serialize_with = "ser_alpha", deserialize_with = "de_alpha")]
    pub alpha: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

fn ser_alpha<S: Serializer>(a: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if a.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*a)
    }
}

fn de_alpha<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum A {
        Num(f64),
        Str(String),
    }
    match A::deserialize(d)? {
        A::Num(x) => Ok(x),
        A::Str(s) if s == "inf" => Ok(f64::INFINITY),
        A::Str(s) => Err(serde::de::Error::custom(format!("bad alpha {s:?}"))),
    }
}

impl ModelParams {
    fn base(variant: Variant, alpha: f64, beta: f64) -> Self {
        ModelParams {
            variant,
            alpha,
            beta,
            k: None,
            alpha0: None,
            theta: None,
            alpha_tilde: None,
            beta_tilde: None,
            eta: None,
        }
    }

    pub fn single_root(alpha: f64, beta: f64) -> Self {
        Self::base(Variant::SingleRoot, alpha, beta)
    }

    /// Uniform attachment, single root.
    pub fn uniform() -> Self {
        Self::single_root(1.0, 0.0)
    }

    /// Linear preferential attachment, single root.
    pub fn lpa() -> Self {
        Self::single_root(0.0, 1.0)
    }

    pub fn fixed_k(alpha: f64, beta: f64, k: usize) -> Self {
        ModelParams {
            k: Some(k),
            ..Self::base(Variant::FixedK, alpha, beta)
        }
    }

    pub fn random_k(alpha: f64, beta: f64, alpha0: f64) -> Self {
        ModelParams {
            alpha0: Some(alpha0),
            ..Self::base(Variant::RandomK, alpha, beta)
        }
    }

    pub fn seq(alpha: f64, beta: f64, theta: f64, alpha_tilde: f64, beta_tilde: f64) -> Self {
        ModelParams {
            theta: Some(theta),
            alpha_tilde: Some(alpha_tilde),
            beta_tilde: Some(beta_tilde),
            ..Self::base(Variant::SeqPaper, alpha, beta)
        }
    }

    pub fn seq_star(
        alpha: f64,
        beta: f64,
        theta: f64,
        alpha_tilde: f64,
        beta_tilde: f64,
        eta: f64,
    ) -> Self {
        ModelParams {
            variant: Variant::SeqPaperStar,
            eta: Some(eta),
            ..Self::seq(alpha, beta, theta, alpha_tilde, beta_tilde)
        }
    }

    /// Same variant-specific fields with a different attachment pair.
    pub fn with_attachment(&self, alpha: f64, beta: f64) -> Self {
        ModelParams {
            alpha,
            beta,
            ..self.clone()
        }
    }

    pub fn is_uniform_sentinel(&self) -> bool {
        self.alpha.is_infinite()
    }

    /// Effective `(alpha, beta)` used in weights; the sentinel maps to `(1, 0)`.
    pub fn attach(&self) -> (f64, f64) {
        if self.alpha.is_infinite() {
            (1.0, 0.0)
        } else {
            (self.alpha, self.beta)
        }
    }

    /// Number of roots for fixed-K (1 for single-root and seq variants).
    pub fn k_fixed(&self) -> usize {
        match self.variant {
            Variant::FixedK => self.k.unwrap_or(1),
            _ => 1,
        }
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0.unwrap_or(1.0)
    }

    /// Seq noise parameters `(theta, alpha_tilde, beta_tilde)`.
    pub fn noise(&self) -> (f64, f64, f64) {
        (
            self.theta.unwrap_or(0.0),
            self.alpha_tilde.unwrap_or(1.0),
            self.beta_tilde.unwrap_or(0.0),
        )
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(0.0)
    }

    /// Checks ranges and that variant-specific fields appear exactly for their variant.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.beta < 0.0 || !self.beta.is_finite() {
            return bad(format!("beta must be finite and >= 0, got {}", self.beta));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if self.alpha == 0.0 && self.beta == 0.0 {
            return bad("alpha and beta cannot both be 0".into());
        }
        let v = self.variant;
        let expect = |present: bool, wanted: bool, name: &str| -> Result<()> {
            if present != wanted {
                let what = if wanted { "required" } else { "not allowed" };
                return Err(Error::InvalidParams(format!("{name} is {what} for the {} variant", v.name())));
            }
            Ok(())
        };
        expect(self.k.is_some(), v == Variant::FixedK, "k")?;
        expect(self.alpha0.is_some(), v == Variant::RandomK, "alpha0")?;
        expect(self.theta.is_some(), v.is_seq(), "theta")?;
        expect(self.alpha_tilde.is_some(), v.is_seq(), "alpha_tilde")?;
        expect(self.beta_tilde.is_some(), v.is_seq(), "beta_tilde")?;
        expect(self.eta.is_some(), v == Variant::SeqPaperStar, "eta")?;
        if let Some(k) = self.k {
            if k == 0 {
                return bad("k must be >= 1".into());
            }
        }
        if let Some(a0) = self.alpha0 {
            if !(a0 > 0.0) || !a0.is_finite() {
                return bad(format!("alpha0 must be > 0, got {a0}"));
            }
        }
        if v.is_seq() {
            let (theta, at, bt) = self.noise();
            if !(theta >= 0.0) || !theta.is_finite() {
                return bad(format!("theta must be >= 0, got {theta}"));
            }
            if !(at >= 0.0 && bt >= 0.0) || !(at + bt > 0.0) || !(at + bt).is_finite() {
                return bad("alpha_tilde and beta_tilde must be >= 0 and not both 0".into());
            }
        }
        if let Some(eta) = self.eta {
            if !(0.0..1.0).contains(&eta) {
                return bad(format!("eta must lie in [0, 1), got {eta}"));
            }
        }
        Ok(())
    }
}
