use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use torus_lab::random::{random_field, DecayProfile};
use torus_lab::{LabError, Result, SpectralField, Torus, WeightModel};

pub const SCHEMA_VERSION: u32 = 1;

/// One experiment run. Every key is checked; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must equal 1.
    pub schema_version: u32,
    pub weights: WeightSpec,
    /// Torus dimension `d`.
    pub dim: usize,
    /// Per-axis bandwidths; when absent the default rule is applied to
    /// `first_bandwidth`.
    #[serde(default)]
    pub bandwidths: Option<Vec<usize>>,
    #[serde(default)]
    pub first_bandwidth: Option<usize>,
    /// Falls back to `$TORUS_LAB_OUT`, then `torus-lab-out`.
    #[serde(default)]
    pub output_dir: Option<String>,
    pub experiment: Experiment,
}

/// `"power:<λ>"`, `"geometric:<σ>"`, `"explicit:<a_1,...,a_d>"`, or a
/// symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Matrix { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Classify(ClassifyParams),
    KernelBounds(KernelBoundsParams),
    RieszBounds(RieszBoundsParams),
    GradientBounds(GradientBoundsParams),
    Seminorm(SeminormParams),
    SeminormCompare(CompareParams),
    PoissonRegularity(PoissonParams),
    McRiesz(McRieszParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Classify(_) => "classify",
            Experiment::KernelBounds(_) => "kernel-bounds",
            Experiment::RieszBounds(_) => "riesz-bounds",
            Experiment::GradientBounds(_) => "gradient-bounds",
            Experiment::Seminorm(_) => "seminorm",
            Experiment::SeminormCompare(_) => "seminorm-compare",
            Experiment::PoissonRegularity(_) => "poisson-regularity",
            Experiment::McRiesz(_) => "mc-riesz",
        }
    }
}

/// Exponents are numbers, or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    pub lambdas: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { lambdas: (1..=9).map(|k| k as f64 / 10.0).collect(), t_min: 1e-6, t_max: 1.0, t_points: 120 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct KernelBoundsParams {
    /// Exponents for the analyticity check, each in `(1, ∞)`.
    pub p: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub trials_per_kind: usize,
    pub seed: u64,
}

impl Default for KernelBoundsParams {
    fn default() -> Self {
        KernelBoundsParams { p: vec![1.25, 2.0, 4.0], t_min: 1e-2, t_max: 10.0, t_points: 30, trials_per_kind: 4, seed: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct RieszBoundsParams {
    pub p: Vec<f64>,
    /// Operator labels: `R_<i>`, `R_<i>R_<j>` (one-based) or `R^G`.
    pub ops: Vec<String>,
    pub trials_per_kind: usize,
    pub seed: u64,
}

impl Default for RieszBoundsParams {
    fn default() -> Self {
        RieszBoundsParams {
            p: vec![1.25, 1.5, 2.0, 3.0, 4.0],
            ops: vec!["R_1".into(), "R^G".into(), "R_1R_2".into()],
            trials_per_kind: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GradientBoundsParams {
    pub p: Vec<Exponent>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub trials_per_kind: usize,
    pub seed: u64,
}

impl Default for GradientBoundsParams {
    fn default() -> Self {
        GradientBoundsParams {
            p: vec![Exponent::Finite(2.0), Exponent::Finite(4.0)],
            t_min: 1e-2,
            t_max: 10.0,
            t_points: 20,
            trials_per_kind: 4,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum SeminormScale {
    Semigroup,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SeminormParams {
    /// `cos:<n_1,...>`, `sin:<n_1,...>`, `random:<seed>` or
    /// `random:<seed>:<α>`.
    pub field: String,
    pub scale: SeminormScale,
    pub theta: f64,
    /// Time order `n` or difference order `k`; canonical when absent.
    pub order: Option<u32>,
    pub p: Exponent,
}

impl Default for SeminormParams {
    fn default() -> Self {
        SeminormParams {
            field: "cos:1".into(),
            scale: SeminormScale::Semigroup,
            theta: 1.0,
            order: None,
            p: Exponent::Named("inf".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// `Λ_β / L_θ`, `β = (1−λ)θ − 2λ`.
    Forward,
    /// `L_θ / Λ_θ`.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CompareParams {
    pub direction: Direction,
    pub theta: f64,
    pub lambda: Option<f64>,
    pub p: Exponent,
    pub lacunary: usize,
    pub random: usize,
    pub seed: u64,
    /// Rerun on a doubled grid and report per-member ratio changes.
    pub doubling: bool,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams {
            direction: Direction::Backward,
            theta: 0.5,
            lambda: None,
            p: Exponent::Finite(2.0),
            lacunary: 25,
            random: 25,
            seed: 99,
            doubling: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonParams {
    pub theta: f64,
    pub p: Exponent,
    pub lambda: Option<f64>,
    /// Fields `random:<seed + j>` for `j < fields`.
    pub seed: u64,
    pub fields: usize,
    /// Polynomial decay exponent of the random fields.
    pub alpha: f64,
}

impl Default for PoissonParams {
    fn default() -> Self {
        PoissonParams { theta: 0.5, p: Exponent::Finite(2.0), lambda: None, seed: 606, fields: 1, alpha: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct McRieszParams {
    pub f: String,
    pub h: String,
    /// One-based axis of the Riesz transform.
    pub axis: usize,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub y0: f64,
    pub y_cap: Option<f64>,
    /// Number of consecutive seeds in the panel.
    pub panel: usize,
    /// Writes one TSV row per path of the first panel member.
    pub dump_paths: bool,
}

impl Default for McRieszParams {
    fn default() -> Self {
        McRieszParams {
            f: "cos:1".into(),
            h: "sin:1".into(),
            axis: 1,
            paths: 100_000,
            seed: 11,
            dt: 1e-3,
            y0: 3.0,
            y_cap: None,
            panel: 1,
            dump_paths: false,
        }
    }
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::InvalidParameter(msg.into())
}

impl Exponent {
    pub fn value(&self) -> Result<f64> {
        match self {
            Exponent::Finite(p) if *p >= 1.0 => Ok(*p),
            Exponent::Named(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(f64::INFINITY),
            other => Err(bad(format!("exponent must be ≥ 1 or \"inf\", got {other:?}"))),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let e = match s.trim() {
            t @ ("inf" | "infinity" | "∞") => Exponent::Named(t.into()),
            t => Exponent::Finite(t.parse().map_err(|_| bad(format!("not an exponent: {t:?}")))?),
        };
        e.value()?;
        Ok(e)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        self.torus()?;
        Ok(())
    }

    pub fn weight_model(&self) -> Result<WeightModel> {
        match &self.weights {
            WeightSpec::Named(s) => WeightModel::from_spec(s, self.dim),
            WeightSpec::Matrix { matrix } => WeightModel::from_rows(matrix),
        }
    }

    pub fn torus(&self) -> Result<Torus> {
        let w = self.weight_model()?;
        if w.dim() != self.dim {
            return Err(bad(format!("weights have dimension {} but dim is {}", w.dim(), self.dim)));
        }
        let bands = match &self.bandwidths {
            Some(b) => b.clone(),
            None => w.default_bandwidths(self.first_bandwidth.unwrap_or(4)),
        };
        Torus::new(w, bands)
    }

    /// Copy with every default filled in, as embedded in the outputs.
    pub fn resolved(&self) -> Result<Self> {
        let torus = self.torus()?;
        let mut c = self.clone();
        c.bandwidths = Some(torus.lattice().bandwidths().to_vec());
        c.first_bandwidth = None;
        Ok(c)
    }
}

/// Parses the field mini-language against a torus.
pub fn parse_field(torus: &Torus, spec: &str) -> Result<SpectralField> {
    let (head, tail) = spec.split_once(':').ok_or_else(|| bad(format!("field spec {spec:?} has no ':'")))?;
    match head {
        "cos" | "sin" => {
            let mut n: Vec<i64> = tail
                .split(',')
                .map(|v| v.trim().parse::<i64>().map_err(|_| bad(format!("bad mode in {spec:?}"))))
                .collect::<Result<_>>()?;
            if n.len() > torus.dim() {
                return Err(bad(format!("mode {n:?} longer than the dimension {}", torus.dim())));
            }
            n.resize(torus.dim(), 0);
            if head == "cos" {
                torus.cosine(&n, 1.0)
            } else {
                torus.sine(&n, 1.0)
            }
        }
        "random" => {
            let mut parts = tail.split(':');
            let seed = parts
                .next()
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| bad(format!("bad seed in {spec:?}")))?;
            let alpha = match parts.next() {
                Some(a) => a.trim().parse::<f64>().map_err(|_| bad(format!("bad decay in {spec:?}")))?,
                None => 2.0,
            };
            Ok(random_field(torus.lattice(), seed, DecayProfile::Polynomial(alpha), true))
        }
        other => Err(bad(format!("unknown field kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "weights": "power:0.5", "dim": 2,
        "experiment": {"kind": "riesz-bounds", "p": [2.0]}}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        match &c.experiment {
            Experiment::RieszBounds(r) => {
                assert_eq!(r.p, vec![2.0]);
                assert_eq!(r.trials_per_kind, 8);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(c.resolved().unwrap().bandwidths, Some(vec![4, 2]));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let top = MINIMAL.replace("\"dim\": 2", "\"dim\": 2, \"colour\": 1");
        assert!(ExperimentConfig::parse(&top).is_err());
        let inner = MINIMAL.replace("\"p\": [2.0]", "\"p\": [2.0], \"q\": 1");
        assert!(ExperimentConfig::parse(&inner).is_err());
        let kind = MINIMAL.replace("riesz-bounds", "riesz-everything");
        assert!(ExperimentConfig::parse(&kind).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2"))
            .is_err());
    }

    #[test]
    fn field_language() {
        let t = Torus::new(WeightModel::explicit(vec![1.0, 2.0]).unwrap(), vec![3, 3]).unwrap();
        let f = parse_field(&t, "cos:1").unwrap();
        assert!((f.evaluate(&[0.0, 0.7]).re - 1.0).abs() < 1e-14);
        assert!(parse_field(&t, "random:4:1.5").unwrap().is_mean_zero());
        assert!(parse_field(&t, "cos:1,1,1").is_err());
        assert!(parse_field(&t, "tan:1").is_err());
    }

    #[test]
    fn exponents() {
        assert_eq!(Exponent::parse("inf").unwrap().value().unwrap(), f64::INFINITY);
        assert_eq!(Exponent::parse("1.5").unwrap().value().unwrap(), 1.5);
        assert!(Exponent::parse("0.5").is_err());
    }
}
