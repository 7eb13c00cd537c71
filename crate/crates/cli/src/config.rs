//! JSON run configurations.
//!
//! Every config carries `schema_version` (currently 1) and rejects unknown
//! keys. Parsing and structural validation happen before any output is
//! written.

use std::fs;
use std::path::{Path, PathBuf};

use pauligeo::linalg::{c, CMatrix};
use pauligeo::HermitianCoeffs;
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Failure before or during a run, mapped to the process exit code.
#[derive(Debug)]
pub enum ConfigError {
    Config(String),
    Core(pauligeo::Error),
}

impl ConfigError {
    /// 2 for configuration errors, 3 for size guards, 4 for numerical
    /// preconditions.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Config(_) => 2,
            ConfigError::Core(e) if e.is_input() => 2,
            ConfigError::Core(e) if e.is_guard() => 3,
            ConfigError::Core(_) => 4,
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Config(m) => f.write_str(m),
            ConfigError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<pauligeo::Error> for ConfigError {
    fn from(e: pauligeo::Error) -> Self {
        ConfigError::Core(e)
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> ConfigResult<T> {
    Err(ConfigError::Config(msg.into()))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub pauli: String,
    pub coeff: f64,
}

/// A bare Pauli string (coefficient 1) or an explicit sum of terms.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    String(String),
    Sum(Vec<Term>),
}

impl OperatorSpec {
    pub fn build(&self, n: usize) -> ConfigResult<HermitianCoeffs> {
        let terms: Vec<(&str, f64)> = match self {
            OperatorSpec::String(s) => vec![(s.as_str(), 1.0)],
            OperatorSpec::Sum(ts) => ts.iter().map(|t| (t.pauli.as_str(), t.coeff)).collect(),
        };
        if terms.is_empty() {
            return HermitianCoeffs::zero(n).map_err(Into::into);
        }
        if let Some((bad, _)) = terms.iter().find(|(p, _)| p.chars().count() != n) {
            return err(format!("Pauli string {bad:?} does not act on {n} qubits"));
        }
        if let Some((p, _)) = terms.iter().find(|(_, c)| !c.is_finite()) {
            return err(format!("non-finite coefficient for {p:?}"));
        }
        Ok(HermitianCoeffs::from_text_terms(&terms)?)
    }
}

fn check_version(v: u32) -> ConfigResult<()> {
    if v != SCHEMA_VERSION {
        return err(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"));
    }
    Ok(())
}

fn check_n(n: usize) -> ConfigResult<()> {
    if n == 0 || n > pauligeo::pauli::DEFAULT_DENSE_QUBITS {
        return err(format!("n = {n} outside 1..={}", pauligeo::pauli::DEFAULT_DENSE_QUBITS));
    }
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> ConfigResult<T> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Config(format!("{}: {e}", path.display())))
}

fn default_seed() -> u64 {
    0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlaConfig {
    pub schema_version: u32,
    pub n: usize,
    pub generators: Vec<OperatorSpec>,
    pub max_dim: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl DlaConfig {
    pub fn validate(&self) -> ConfigResult<Vec<HermitianCoeffs>> {
        check_version(self.schema_version)?;
        check_n(self.n)?;
        if self.generators.is_empty() {
            return err("generators must not be empty");
        }
        self.generators.iter().map(|g| g.build(self.n)).collect()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim.unwrap_or((1usize << (2 * self.n)) - 1)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub pauli: String,
    pub weight: f64,
}

fn default_grid() -> usize {
    pauligeo::geometry::DEFAULT_GRID
}

fn default_paths() -> usize {
    50
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    pub schema_version: u32,
    pub n: usize,
    pub target: OperatorSpec,
    #[serde(default = "standard")]
    pub scheme: String,
    #[serde(default)]
    pub weights: Vec<WeightEntry>,
    pub default_weight: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_paths")]
    pub perturbed_paths: usize,
    #[serde(default)]
    pub write_curve: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn standard() -> String {
    "standard".into()
}

impl GeodesicConfig {
    pub fn validate(&self) -> ConfigResult<(pauligeo::geometry::PenaltyMetric, HermitianCoeffs)> {
        check_version(self.schema_version)?;
        check_n(self.n)?;
        if self.grid < 2 {
            return err("grid must be at least 2");
        }
        let metric = match self.scheme.as_str() {
            "custom" => {
                let mut map = std::collections::BTreeMap::new();
                for w in &self.weights {
                    if w.pauli.chars().count() != self.n {
                        return err(format!("weight key {:?} does not act on {} qubits", w.pauli, self.n));
                    }
                    map.insert(w.pauli.parse().map_err(ConfigError::from)?, w.weight);
                }
                pauligeo::geometry::PenaltyMetric::custom(self.n, map, self.default_weight.unwrap_or(1.0))?
            }
            other => {
                if !self.weights.is_empty() || self.default_weight.is_some() {
                    return err("weights are only accepted with scheme \"custom\"");
                }
                pauligeo::geometry::penalty_weights(self.n, other)?
            }
        };
        Ok((metric, self.target.build(self.n)?))
    }
}

/// Explicit generator list or a named family defined for every `n`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GeneratorsSpec {
    Family(String),
    List(Vec<OperatorSpec>),
}

impl GeneratorsSpec {
    pub fn build(&self, n: usize) -> ConfigResult<Vec<HermitianCoeffs>> {
        match self {
            GeneratorsSpec::List(list) => list.iter().map(|g| g.build(n)).collect(),
            GeneratorsSpec::Family(name) => family(name, n),
        }
    }
}

fn site_string(n: usize, sites: &[(usize, char)]) -> String {
    let mut s = vec!['I'; n];
    for &(i, p) in sites {
        s[i] = p;
    }
    s.into_iter().collect()
}

/// `xz-chain`: `X_i`, `Z_i` on every site and `Z_i Z_{i+1}` on neighbours.
fn family(name: &str, n: usize) -> ConfigResult<Vec<HermitianCoeffs>> {
    match name {
        "xz-chain" => {
            let mut out = Vec::new();
            for i in 0..n {
                out.push(site_string(n, &[(i, 'X')]));
            }
            for i in 0..n {
                out.push(site_string(n, &[(i, 'Z')]));
            }
            for i in 0..n.saturating_sub(1) {
                out.push(site_string(n, &[(i, 'Z'), (i + 1, 'Z')]));
            }
            out.iter()
                .map(|s| Ok(HermitianCoeffs::from_text_terms(&[(s.as_str(), 1.0)])?))
                .collect()
        }
        other => err(format!("unknown generator family {other:?}")),
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Named(String),
    Operator(OperatorSpec),
}

impl ObservableSpec {
    /// `"z1"` is `Z` on the first site; other strings are read as a single
    /// Pauli string.
    pub fn build(&self, n: usize) -> ConfigResult<HermitianCoeffs> {
        match self {
            ObservableSpec::Named(s) if s == "z1" => {
                Ok(HermitianCoeffs::from_text_terms(&[(site_string(n, &[(0, 'Z')]).as_str(), 1.0)])?)
            }
            ObservableSpec::Named(s) => OperatorSpec::String(s.clone()).build(n),
            ObservableSpec::Operator(o) => o.build(n),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PeriodEntry {
    Value(f64),
    Tag(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PeriodsSpec {
    Tag(String),
    List(Vec<PeriodEntry>),
}

impl PeriodsSpec {
    pub fn build(&self, m: usize) -> ConfigResult<Vec<pauligeo::plateau::Period>> {
        use pauligeo::plateau::Period;
        let tag = |s: &str| {
            if s == "auto" {
                Ok(Period::Auto)
            } else {
                err(format!("unknown period tag {s:?}"))
            }
        };
        match self {
            PeriodsSpec::Tag(s) => Ok(vec![tag(s)?; m]),
            PeriodsSpec::List(list) => {
                if list.len() != m {
                    return err(format!("{} periods given for {m} generators", list.len()));
                }
                list.iter()
                    .map(|p| match p {
                        PeriodEntry::Value(v) if *v > 0.0 && v.is_finite() => Ok(Period::Fixed(*v)),
                        PeriodEntry::Value(v) => err(format!("invalid period {v}")),
                        PeriodEntry::Tag(s) => tag(s),
                    })
                    .collect()
            }
        }
    }
}

fn auto_periods() -> PeriodsSpec {
    PeriodsSpec::Tag("auto".into())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseFile {
    pub file: PathBuf,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Named(String),
    File(DenseFile),
}

/// Dense matrix on disk: `{"real": [[...]], "imag": [[...]]}`, `imag`
/// optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseMatrixFile {
    real: Vec<Vec<f64>>,
    #[serde(default)]
    imag: Option<Vec<Vec<f64>>>,
}

pub fn read_dense(path: &Path) -> ConfigResult<CMatrix> {
    let m: DenseMatrixFile = read_json(path)?;
    let d = m.real.len();
    let square = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
    if d == 0 || !square(&m.real) || !m.imag.as_ref().is_none_or(square) {
        return err(format!("{}: matrix must be square with matching parts", path.display()));
    }
    Ok(CMatrix::from_fn(d, d, |r, col| {
        c(m.real[r][col], m.imag.as_ref().map_or(0.0, |im| im[r][col]))
    }))
}

impl RhoSpec {
    pub fn build(&self, n: usize, base: &Path) -> ConfigResult<CMatrix> {
        match self {
            RhoSpec::Named(s) if s == "computational_zero" => {
                let d = 1usize << n;
                let mut rho = CMatrix::zeros(d, d);
                rho[(0, 0)] = c(1.0, 0.0);
                Ok(rho)
            }
            RhoSpec::Named(s) => err(format!("unknown rho {s:?}")),
            RhoSpec::File(f) => {
                let m = read_dense(&base.join(&f.file))?;
                if m.nrows() != 1usize << n {
                    return err(format!("rho file has dimension {}, expected {}", m.nrows(), 1usize << n));
                }
                Ok(m)
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoDesignConfig {
    pub samples: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceConfig {
    pub schema_version: u32,
    pub n: OneOrMany,
    pub generators: GeneratorsSpec,
    pub layers: OneOrMany,
    #[serde(default = "auto_periods")]
    pub periods: PeriodsSpec,
    pub rho: RhoSpec,
    pub observable: ObservableSpec,
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub max_dim: Option<usize>,
    pub two_design: Option<TwoDesignConfig>,
}

/// One validated sweep point.
#[derive(Clone, Debug)]
pub struct VariancePoint {
    pub n: usize,
    pub layers: usize,
    pub generators: Vec<HermitianCoeffs>,
    pub periods: Vec<pauligeo::plateau::Period>,
    pub rho: CMatrix,
    pub observable: HermitianCoeffs,
}

impl VarianceConfig {
    pub fn validate(&self, base: &Path) -> ConfigResult<Vec<VariancePoint>> {
        check_version(self.schema_version)?;
        if self.samples < pauligeo::plateau::MIN_SAMPLES {
            return err(format!("samples must be at least {}", pauligeo::plateau::MIN_SAMPLES));
        }
        if let Some(t) = &self.two_design {
            if t.samples < pauligeo::plateau::MIN_SAMPLES {
                return err(format!("two_design.samples must be at least {}", pauligeo::plateau::MIN_SAMPLES));
            }
        }
        let (ns, ls) = (self.n.values(), self.layers.values());
        if ns.is_empty() || ls.is_empty() {
            return err("n and layers must not be empty");
        }
        let mut points = Vec::new();
        for &n in &ns {
            check_n(n)?;
            let generators = self.generators.build(n)?;
            if generators.is_empty() {
                return err("generators must not be empty");
            }
            let periods = self.periods.build(generators.len())?;
            let rho = self.rho.build(n, base)?;
            let observable = self.observable.build(n)?;
            for &layers in &ls {
                if layers == 0 {
                    return err("layers must be positive");
                }
                points.push(VariancePoint {
                    n,
                    layers,
                    generators: generators.clone(),
                    periods: periods.clone(),
                    rho: rho.clone(),
                    observable: observable.clone(),
                });
            }
        }
        Ok(points)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub generators: Vec<OperatorSpec>,
    pub layers: usize,
    #[serde(default = "auto_periods")]
    pub periods: PeriodsSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Haar,
    HaarSpecial,
    Ensemble(EnsembleConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Operator(OperatorSpec),
    File(DenseFile),
}

#[derive(Clone, Copy, Debug, Deserialize, serde::Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    Constant,
    ReTrace,
    AbsU11,
    ReTraceRandom,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceConfig {
    pub probes: Vec<Probe>,
    pub samples: usize,
    #[serde(default)]
    pub special: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwirlConfig {
    pub schema_version: u32,
    pub n: usize,
    pub k: usize,
    pub source: SourceSpec,
    pub matrix: MatrixSpec,
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub invariance: Option<InvarianceConfig>,
}

impl TwirlConfig {
    pub fn validate(&self, base: &Path) -> ConfigResult<(Option<pauligeo::plateau::AnsatzSpec>, CMatrix)> {
        check_version(self.schema_version)?;
        check_n(self.n)?;
        if self.k == 0 {
            return err("k must be positive");
        }
        if self.samples < pauligeo::plateau::MIN_SAMPLES {
            return err(format!("samples must be at least {}", pauligeo::plateau::MIN_SAMPLES));
        }
        if let Some(inv) = &self.invariance {
            if inv.samples < 2 || inv.probes.is_empty() {
                return err("invariance needs at least one probe and two samples");
            }
        }
        let qubits = self.n * self.k;
        let dim = 1usize.checked_shl(qubits as u32).unwrap_or(usize::MAX);
        let matrix = match &self.matrix {
            MatrixSpec::Named(s) if s == "identity" => {
                if dim > pauligeo::plateau::MOMENT_DIM_LIMIT {
                    CMatrix::zeros(0, 0)
                } else {
                    CMatrix::identity(dim, dim)
                }
            }
            MatrixSpec::Named(s) => OperatorSpec::String(s.clone()).build(qubits)?.to_dense()?,
            MatrixSpec::Operator(o) => o.build(qubits)?.to_dense()?,
            MatrixSpec::File(f) => read_dense(&base.join(&f.file))?,
        };
        let ansatz = match &self.source {
            SourceSpec::Ensemble(e) => {
                let gens = e.generators.iter().map(|g| g.build(self.n)).collect::<ConfigResult<Vec<_>>>()?;
                if gens.is_empty() {
                    return err("ensemble generators must not be empty");
                }
                let periods = e.periods.build(gens.len())?;
                Some(pauligeo::plateau::AnsatzSpec::new(gens, e.layers, &periods)?)
            }
            _ => None,
        };
        Ok((ansatz, matrix))
    }
}
