//! Scenario files: a TOML description of the system, its generator, the
//! output map, the measurement plan and the reconstruction settings.

use std::collections::BTreeMap;
use std::path::Path;

use locobs_core::dynamics::{DiscretizedSystem, Monomial};
use locobs_core::linalg::{CMat, C64};
use locobs_core::observability::RankPolicy;
use locobs_core::reconstruction::MaxEntOptions;
use locobs_core::{build_output_map, Coefficient, LindbladSpec, MeasurementPlan, NeighborhoodStructure, Operator, OutputMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{CliError, Result};
use crate::expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analyze,
    Simulate,
    Reconstruct,
    Casestudy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Gramian,
    Maxent,
    Relent,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    mode: Option<Mode>,
    #[serde(default)]
    seeds: Vec<u64>,
    system: RawSystem,
    #[serde(default)]
    parameters: BTreeMap<String, ParamDecl>,
    #[serde(default)]
    hamiltonian: Vec<RawTerm>,
    #[serde(default)]
    noise: Vec<RawTerm>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    analysis: AnalysisSettings,
    #[serde(default)]
    plan: PlanSettings,
    #[serde(default)]
    state: StateDecl,
    #[serde(default)]
    reconstruct: ReconstructSettings,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    dims: Vec<usize>,
    neighborhoods: Vec<Vec<usize>>,
    #[serde(default = "one")]
    dt: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ParamDecl {
    Value(f64),
    Normal { normal: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
enum CoeffDecl {
    Number(f64),
    Name(String),
}

impl Default for CoeffDecl {
    fn default() -> Self {
        CoeffDecl::Number(1.0)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    op: Spanned<String>,
    #[serde(default)]
    coefficient: CoeffDecl,
    #[serde(default = "one")]
    scale: f64,
    #[serde(default)]
    neighborhood: Option<usize>,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default)]
    neighborhoods: Option<Vec<usize>>,
    #[serde(default)]
    allow_partial: bool,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Krylov acceptance threshold
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_instants: Option<usize>,
    /// number of parameter draws when some parameter is random
    #[serde(default)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSettings {
    /// last sampling index; defaults to the k* of the analysis
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// 0-based indices into the output map
    #[serde(default)]
    pub observable_subset: Option<Vec<usize>>,
    /// exact expectations instead of sampled means
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub keep_raw: bool,
}

fn default_shots() -> u64 {
    1000
}

impl Default for PlanSettings {
    fn default() -> Self {
        PlanSettings { k_max: None, shots: default_shots(), observable_subset: None, exact: false, keep_raw: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateDecl {
    #[default]
    Mixed,
    /// |d₁…d_N⟩⟨d₁…d_N| with 0-based digits
    Basis { digits: Vec<usize> },
    /// Ginibre state of the given rank drawn from the run seed
    Random { rank: usize },
    Matrix {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSettings {
    #[serde(default)]
    pub method: Option<MethodName>,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub prior: Option<StateDecl>,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for ReconstructSettings {
    fn default() -> Self {
        ReconstructSettings { method: None, tolerance: default_tol(), schedule: None, prior: None }
    }
}

/// A parameter with a distribution; its standard-normal draw is entry
/// `index` of α and enters every coefficient as mean + std·α.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomParam {
    pub name: String,
    pub index: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub mode: Option<Mode>,
    pub seeds: Vec<u64>,
    pub dims: Vec<usize>,
    pub structure: NeighborhoodStructure,
    pub dt: f64,
    pub spec: LindbladSpec,
    pub random: Vec<RandomParam>,
    pub output_neighborhoods: Vec<usize>,
    pub allow_partial: bool,
    pub analysis: AnalysisSettings,
    pub plan: PlanSettings,
    pub state: StateDecl,
    pub reconstruct: ReconstructSettings,
    /// sha256 of the canonical system description
    pub hash: String,
}

fn config(origin: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{origin}: {msg}"))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `origin` prefixes every diagnostic.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let at = e.span().map(|s| format!(":{}", line_of(text, s.start))).unwrap_or_default();
            CliError::Config(format!("{origin}{at}: {}", e.message()))
        })?;
        build(raw, text, origin)
    }

    pub fn has_distributions(&self) -> bool {
        !self.random.is_empty()
    }

    /// α for one run: a fresh N(0, 1) draw per random parameter, using the
    /// same stream as trial 0 of a randomization with this seed.
    pub fn alpha_for(&self, seed: u64) -> Vec<f64> {
        if self.random.is_empty() {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        self.random.iter().map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    pub fn output_map(&self, force_partial: bool) -> Result<OutputMap> {
        let ns = self.structure.select(&self.output_neighborhoods).map_err(|e| config("output.neighborhoods", e))?;
        build_output_map(&ns, &self.dims, self.allow_partial || force_partial).map_err(|e| match e {
            locobs_core::Error::LocalityViolation(m) | locobs_core::Error::InvalidStructure(m) => {
                CliError::Config(format!("output: {m}; pass --allow-partial-output to accept it"))
            }
            other => other.into(),
        })
    }

    pub fn system(&self, alpha: &[f64], om: OutputMap) -> Result<DiscretizedSystem> {
        Ok(DiscretizedSystem::from_spec(&self.spec, Some(alpha), om, self.dt)?)
    }

    pub fn policy(&self, tolerance: Option<f64>) -> RankPolicy {
        let mut p = RankPolicy::default();
        if let Some(t) = tolerance.or(self.analysis.tolerance) {
            p.krylov_tol = t;
        }
        p.max_instants = self.analysis.max_instants;
        p
    }

    pub fn initial_state(&self, seed: u64) -> Result<Operator> {
        state_from(&self.state, &self.dims, seed, "state")
    }

    pub fn prior(&self, seed: u64) -> Result<Option<Operator>> {
        self.reconstruct.prior.as_ref().map(|p| state_from(p, &self.dims, seed, "reconstruct.prior")).transpose()
    }

    pub fn maxent_options(&self, tolerance: Option<f64>) -> MaxEntOptions {
        let mut o = MaxEntOptions { tol: tolerance.unwrap_or(self.reconstruct.tolerance), ..MaxEntOptions::default() };
        if let Some(s) = &self.reconstruct.schedule {
            o.schedule = s.clone();
        }
        o
    }

    pub fn measurement_plan(&self, k_max: usize, shots: u64) -> MeasurementPlan {
        MeasurementPlan {
            observable_subset: self.plan.observable_subset.clone(),
            keep_raw: self.plan.keep_raw,
            ..MeasurementPlan::new(k_max, shots, self.dt)
        }
    }
}

pub fn state_from(decl: &StateDecl, dims: &[usize], seed: u64, field: &str) -> Result<Operator> {
    let d: usize = dims.iter().product();
    let rho = match decl {
        StateDecl::Mixed => Operator::maximally_mixed(dims),
        StateDecl::Basis { digits } => {
            Operator::basis_state(dims, digits).map_err(|e| config(&format!("{field}.digits"), e))?
        }
        StateDecl::Random { rank } => {
            if *rank == 0 || *rank > d {
                return Err(config(&format!("{field}.rank"), format!("must be in 1..={d}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            let g = CMat::from_fn(d, *rank, |_, _| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
            let mut m = &g * g.adjoint();
            let tr = m.trace();
            m /= tr;
            let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
            Operator::new(dims.to_vec(), m)?
        }
        StateDecl::Matrix { re, im } => {
            let rows_ok = |a: &Vec<Vec<f64>>| a.len() == d && a.iter().all(|r| r.len() == d);
            if !rows_ok(re) || !im.as_ref().is_none_or(rows_ok) {
                return Err(config(field, format!("matrix must be {d}×{d}")));
            }
            let m = CMat::from_fn(d, d, |i, j| C64::new(re[i][j], im.as_ref().map_or(0.0, |a| a[i][j])));
            Operator::new(dims.to_vec(), m)?
        }
    };
    rho.with_role(locobs_core::Role::Density)
        .map_err(|e| CliError::Config(format!("{field}: {e}")))
}

fn build(raw: RawScenario, text: &str, origin: &str) -> Result<Scenario> {
    let at = |field: &str| format!("{origin}: {field}");
    let sys = &raw.system;
    if sys.dims.is_empty() || sys.dims.contains(&0) {
        return Err(CliError::Config(format!("{}: every subsystem needs dimension ≥ 1", at("system.dims"))));
    }
    if !(sys.dt.is_finite() && sys.dt > 0.0) {
        return Err(CliError::Config(format!("{}: must be positive", at("system.dt"))));
    }
    let structure = NeighborhoodStructure::new(sys.dims.len(), sys.neighborhoods.clone())
        .map_err(|e| CliError::Config(format!("{}: {e}", at("system.neighborhoods"))))?;

    let mut random = Vec::new();
    for (name, decl) in &raw.parameters {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(CliError::Config(format!("{}: invalid parameter name {name:?}", at("parameters"))));
        }
        if let ParamDecl::Normal { normal: [mean, std] } = decl {
            if !(std.is_finite() && *std >= 0.0 && mean.is_finite()) {
                return Err(CliError::Config(format!("{}: need finite mean and std ≥ 0", at(&format!("parameters.{name}")))));
            }
            random.push(RandomParam { name: name.clone(), index: random.len(), mean: *mean, std: *std });
        }
    }
    if !random.is_empty() && raw.seeds.is_empty() {
        return Err(CliError::Config(format!(
            "{}: required because parameter `{}` has a distribution",
            at("seeds"),
            random[0].name
        )));
    }

    let mut spec = LindbladSpec::new(sys.dims.clone(), structure.clone())?;
    let mut canonical_terms = Vec::new();
    for (section, terms) in [("hamiltonian", &raw.hamiltonian), ("noise", &raw.noise)] {
        for (t, term) in terms.iter().enumerate() {
            let field = format!("{section}[{t}]");
            let src = term.op.get_ref();
            let line = line_of(text, term.op.span().start);
            let parsed = expr::parse(src, &sys.dims)
                .map_err(|e| CliError::Config(format!("{origin}:{line}: {field}.op: {e} in {src:?}")))?;
            let k = match term.neighborhood {
                Some(k) => k,
                None => {
                    let found = structure.neighborhoods().iter().position(|nb| parsed.sites.iter().all(|q| nb.contains(q)));
                    match found {
                        Some(i) => i + 1,
                        None => {
                            return Err(CliError::Config(format!(
                                "{origin}:{line}: {field}.op: sites {:?} lie in no single neighborhood",
                                parsed.sites
                            )))
                        }
                    }
                }
            };
            let coefficient = coefficient_for(&term.coefficient, term.scale, &raw.parameters, &random)
                .map_err(|m| CliError::Config(format!("{}: {m}", at(&format!("{field}.coefficient")))))?;
            let label = term.label.clone().unwrap_or_else(|| src.clone());
            let added = if section == "hamiltonian" {
                spec.add_hamiltonian_global(k, &parsed.operator, coefficient, &label)
            } else {
                spec.add_noise_global(k, &parsed.operator, coefficient, &label)
            };
            added.map_err(|e| CliError::Config(format!("{origin}:{line}: {field}: {e}")))?;
            canonical_terms.push(serde_json::json!({
                "section": section,
                "op": src,
                "coefficient": term.coefficient,
                "scale": term.scale,
                "neighborhood": k,
            }));
        }
    }
    spec.set_n_params(random.len())?;

    let output_neighborhoods = raw.output.neighborhoods.clone().unwrap_or_else(|| (1..=structure.len()).collect());
    if let Some(&bad) = output_neighborhoods.iter().find(|&&k| k == 0 || k > structure.len()) {
        return Err(CliError::Config(format!(
            "{}: neighborhood {bad} not in 1..={}",
            at("output.neighborhoods"),
            structure.len()
        )));
    }
    if raw.seeds.iter().collect::<std::collections::BTreeSet<_>>().len() != raw.seeds.len() {
        return Err(CliError::Config(format!("{}: duplicate seed", at("seeds"))));
    }

    let canonical = serde_json::json!({
        "dims": sys.dims,
        "neighborhoods": sys.neighborhoods,
        "dt": sys.dt,
        "parameters": raw.parameters,
        "terms": canonical_terms,
        "output": output_neighborhoods,
    });
    let hash = Sha256::digest(canonical.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect();

    Ok(Scenario {
        name: raw.name,
        description: raw.description,
        mode: raw.mode,
        seeds: raw.seeds,
        dims: sys.dims.clone(),
        structure,
        dt: sys.dt,
        spec,
        random,
        output_neighborhoods,
        allow_partial: raw.output.allow_partial,
        analysis: raw.analysis,
        plan: raw.plan,
        state: raw.state,
        reconstruct: raw.reconstruct,
        hash,
    })
}

fn coefficient_for(
    decl: &CoeffDecl,
    scale: f64,
    params: &BTreeMap<String, ParamDecl>,
    random: &[RandomParam],
) -> std::result::Result<Coefficient, String> {
    match decl {
        CoeffDecl::Number(v) => Ok(Coefficient::constant(v * scale)),
        CoeffDecl::Name(name) => match params.get(name) {
            None => Err(format!("unknown parameter `{name}`")),
            Some(ParamDecl::Value(v)) => Ok(Coefficient::constant(v * scale)),
            Some(ParamDecl::Normal { .. }) => {
                let p = random.iter().find(|p| &p.name == name).expect("random parameter registered");
                Ok(Coefficient {
                    terms: vec![
                        Monomial { coeff: p.mean * scale, powers: vec![] },
                        Monomial { coeff: p.std * scale, powers: vec![(p.index, 1)] },
                    ],
                })
            }
        },
    }
}
