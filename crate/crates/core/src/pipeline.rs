//! Config-driven experiment runs: stages, content-addressed cache, CSV tables
//! and the run manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::correlations::{build_eta, eta_norms, CorrelationProfile};
use crate::eig::{depletion, lowest_spectrum, EigenResult, Method, SolverOptions};
use crate::error::{Error, NumericalError, Result};
use crate::fit::{fit_power_law, PowerFit};
use crate::fock::{
    build_basis_with_limit, build_excitation_hamiltonian, build_hamiltonian_full, build_observables, Interaction,
    Truncation, DEFAULT_DIMENSION_LIMIT,
};
use crate::model::{build_mode_set, Cutoff, LatticeVector, ModeSet, PotentialSpec, RadialPotential};
use crate::predictor::{
    diagonalize_quadratic, enumerate_levels, gp_dispersion, ground_energy_prediction, quadratic_coefficients,
    GroundEnergyOptions, Level, SpectrumPrediction, Stage, SumDomain,
};
use crate::scattering::{
    born_series_a0, box_scattering_series_an, scattering_length_ode, soft_sphere_scattering_length,
    solve_neumann_beta, BoxSeriesOptions, RadialGrid, SeriesQuadrature,
};
use crate::transforms::{
    measure_decomposition_residual, measure_remainders_dp, predicted_operator, renormalize, stage_g_constant,
    Conjugations, RenormStage,
};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default guards, lifted by the `unsafe` override.
pub const KAPPA_GUARD: f64 = 0.2;
pub const N_MAX_GUARD: u32 = 10;

/// Largest number of predicted levels a run will enumerate.
pub const LEVEL_LIMIT: usize = 100_000;

/// Solver settings as they appear in a config.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub m: usize,
    pub tol: f64,
    pub method: Method,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { m: d.m, tol: d.tol, method: d.method, parallel: d.parallel }
    }
}

impl SolverConfig {
    fn options(&self, sequential: bool) -> SolverOptions {
        SolverOptions { m: self.m, tol: self.tol, method: self.method, parallel: self.parallel && !sequential, ..Default::default() }
    }
}

fn default_k_max() -> usize {
    3
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bogoscope-out")
}

/// One experiment, read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: RadialPotential,
    pub kappa: f64,
    pub n_list: Vec<u64>,
    pub beta: f64,
    pub ell: f64,
    pub cutoff: Cutoff,
    pub n_max: u32,
    #[serde(default)]
    pub sector: Option<LatticeVector>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub zeta: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "unsafe")]
    pub unsafe_override: bool,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

impl RunConfig {
    /// Parses a config; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Schema-level checks, then the guards unless overridden.
    pub fn validate(&self, unsafe_override: bool) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(schema("n_list", "at least one particle number is required"));
        }
        if let Some(i) = self.n_list.iter().position(|&n| n == 0) {
            return Err(schema(&format!("n_list[{i}]"), "particle numbers must be positive"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(schema("kappa", format!("must be finite and >= 0, got {}", self.kappa)));
        }
        if !(self.beta.is_finite() && (0.0..=1.0).contains(&self.beta)) {
            return Err(schema("beta", format!("must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.ell > 0.0 && self.ell < 0.5) {
            return Err(schema("ell", format!("must lie in (0, 1/2), got {}", self.ell)));
        }
        if !self.zeta.is_finite() {
            return Err(schema("zeta", "must be finite"));
        }
        if !(1..=3).contains(&self.k_max) {
            return Err(schema("k_max", format!("must lie in 1..=3, got {}", self.k_max)));
        }
        if self.solver.m == 0 || !(self.solver.tol > 0.0) {
            return Err(schema("solver", "m must be positive and tol > 0"));
        }
        if matches!(self.cutoff, Cutoff::Explicit) {
            return Err(schema("cutoff", "explicit mode lists are not supported in configs"));
        }
        if unsafe_override || self.unsafe_override {
            return Ok(());
        }
        if self.kappa > KAPPA_GUARD {
            return Err(Error::Guard { guard: "kappa", detail: format!("κ = {} exceeds {KAPPA_GUARD}", self.kappa) });
        }
        if self.n_max > N_MAX_GUARD {
            return Err(Error::Guard { guard: "n_max", detail: format!("n_max = {} exceeds {N_MAX_GUARD}", self.n_max) });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Scatter,
    Correlations,
    Predict,
    Ed,
    Renorm,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scatter => "scatter",
            Command::Correlations => "correlations",
            Command::Predict => "predict",
            Command::Ed => "ed",
            Command::Renorm => "renorm",
            Command::Report => "report",
        }
    }

    /// Stages run for this command, in dependency order.
    pub fn stages(self) -> Vec<Command> {
        match self {
            Command::Report => vec![Command::Predict, Command::Ed, Command::Report],
            c => vec![c],
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    /// Defaults to `<out>/.cache`.
    pub cache_dir: Option<PathBuf>,
    pub sequential: bool,
    pub unsafe_override: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Command,
    /// Cache key: SHA-256 of the inputs that affect the stage.
    pub digest: String,
    pub cache_hit: bool,
    pub files: Vec<FileRecord>,
    pub fits: BTreeMap<String, PowerFit>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: Command,
    pub library_version: String,
    pub config: RunConfig,
    pub config_digest: String,
    pub output_dir: PathBuf,
    pub stages: Vec<StageRecord>,
}

impl RunReport {
    /// The report without cache flags and wall-clock times, identical across reruns.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("output_dir");
        for s in v["stages"].as_array_mut().unwrap() {
            let o = s.as_object_mut().unwrap();
            o.remove("cache_hit");
            o.remove("seconds");
        }
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }
}

/// Files and fits a stage produces; this is what the cache stores.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct StageOutput {
    files: Vec<(String, String)>,
    fits: BTreeMap<String, PowerFit>,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    /// SHA-256 of the serialized output.
    digest: String,
    output: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// 17 significant digits, locale independent.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs `command` and writes tables, `report.json` and `manifest.json`.
pub fn run_pipeline(config: &RunConfig, command: Command, opts: &RunOptions) -> Result<RunReport> {
    config.validate(opts.unsafe_override)?;
    let out = opts.out.clone().unwrap_or_else(|| config.output_dir.clone());
    let cache = opts.cache_dir.clone().unwrap_or_else(|| out.join(".cache"));
    fs::create_dir_all(&out)?;
    fs::create_dir_all(&cache)?;
    let ctx = Context::new(config, opts)?;
    let mut stages = Vec::new();
    for stage in command.stages() {
        let start = Instant::now();
        let key = stage_key(config, stage);
        let path = cache.join(format!("{}-{key}.json", stage.name()));
        let (output, hit) = match load_cached(&path, &key)? {
            Some(o) => (o, true),
            None => {
                let o = ctx.run_stage(stage)?;
                store_cached(&path, &key, &o)?;
                (o, false)
            }
        };
        let mut files = Vec::with_capacity(output.files.len());
        for (name, content) in &output.files {
            write_atomic(&out.join(name), content.as_bytes())?;
            files.push(FileRecord { name: name.clone(), sha256: sha256_hex(content.as_bytes()) });
        }
        stages.push(StageRecord {
            stage,
            digest: key,
            cache_hit: hit,
            files,
            fits: output.fits,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let report = RunReport {
        command,
        library_version: LIBRARY_VERSION.to_string(),
        config: config.clone(),
        config_digest: sha256_hex(serde_json::to_string(config)?.as_bytes()),
        output_dir: out.clone(),
        stages,
    };
    write_atomic(&out.join("report.json"), report.deterministic_json().as_bytes())?;
    write_atomic(&out.join("manifest.json"), (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    Ok(report)
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn load_cached(path: &Path, key: &str) -> Result<Option<StageOutput>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let entry: CacheEntry =
        serde_json::from_str(&text).map_err(|e| Error::Cache(format!("{}: unreadable entry ({e})", path.display())))?;
    if entry.key != key {
        return Err(Error::Cache(format!("{}: key {} does not match {key}", path.display(), entry.key)));
    }
    if sha256_hex(entry.output.as_bytes()) != entry.digest {
        return Err(Error::Cache(format!("{}: digest mismatch", path.display())));
    }
    let output = serde_json::from_str(&entry.output)
        .map_err(|e| Error::Cache(format!("{}: malformed output ({e})", path.display())))?;
    Ok(Some(output))
}

fn store_cached(path: &Path, key: &str, output: &StageOutput) -> Result<()> {
    let text = serde_json::to_string(output)?;
    let entry = CacheEntry { key: key.to_string(), digest: sha256_hex(text.as_bytes()), output: text };
    write_atomic(path, serde_json::to_string(&entry)?.as_bytes())
}

/// Digest of exactly the config fields a stage reads.
pub fn stage_key(cfg: &RunConfig, stage: Command) -> String {
    let s = &cfg.solver;
    let solver = json!({"m": s.m, "tol": s.tol, "method": s.method});
    let fields = match stage {
        Command::Scatter => json!({"potential": cfg.potential, "kappa": cfg.kappa, "n_list": cfg.n_list, "k_max": cfg.k_max}),
        Command::Correlations => json!({
            "potential": cfg.potential, "kappa": cfg.kappa, "n_list": cfg.n_list,
            "beta": cfg.beta, "ell": cfg.ell, "cutoff": cfg.cutoff,
        }),
        Command::Predict => json!({
            "potential": cfg.potential, "kappa": cfg.kappa, "n_list": cfg.n_list, "beta": cfg.beta,
            "ell": cfg.ell, "cutoff": cfg.cutoff, "k_max": cfg.k_max, "zeta": cfg.zeta, "sector": cfg.sector,
        }),
        Command::Ed => json!({
            "potential": cfg.potential, "kappa": cfg.kappa, "n_list": cfg.n_list, "beta": cfg.beta,
            "cutoff": cfg.cutoff, "n_max": cfg.n_max, "sector": cfg.sector, "solver": solver,
        }),
        Command::Renorm => json!({
            "potential": cfg.potential, "kappa": cfg.kappa, "n_list": cfg.n_list, "beta": cfg.beta,
            "ell": cfg.ell, "cutoff": cfg.cutoff, "n_max": cfg.n_max, "sector": cfg.sector, "seed": cfg.seed,
        }),
        Command::Report => json!({
            "potential": cfg.potential, "kappa": cfg.kappa, "n_list": cfg.n_list, "beta": cfg.beta,
            "ell": cfg.ell, "cutoff": cfg.cutoff, "n_max": cfg.n_max, "sector": cfg.sector,
            "solver": solver, "k_max": cfg.k_max, "zeta": cfg.zeta,
        }),
    };
    let doc = json!({"stage": stage.name(), "version": LIBRARY_VERSION, "inputs": fields});
    sha256_hex(serde_json::to_string(&doc).expect("json").as_bytes())
}

struct Context<'a> {
    cfg: &'a RunConfig,
    sequential: bool,
    dim_limit: usize,
    modes: ModeSet,
}

/// Fit of y against N when there are at least two usable points.
fn try_fit(fits: &mut BTreeMap<String, PowerFit>, name: &str, ns: &[u64], y: &[f64]) {
    if ns.len() < 2 || y.iter().any(|v| !(v.is_finite() && *v != 0.0)) {
        return;
    }
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    if let Ok(f) = fit_power_law(&x, y) {
        fits.insert(name.to_string(), f);
    }
}

impl<'a> Context<'a> {
    fn new(cfg: &'a RunConfig, opts: &RunOptions) -> Result<Self> {
        let unsafe_run = opts.unsafe_override || cfg.unsafe_override;
        Ok(Self {
            cfg,
            sequential: opts.sequential,
            dim_limit: if unsafe_run { usize::MAX } else { DEFAULT_DIMENSION_LIMIT },
            modes: build_mode_set(cfg.cutoff, true)?,
        })
    }

    /// Sweep points in order; in parallel unless sequential.
    fn sweep<T: Send, F: Fn(u64) -> Result<T> + Sync>(&self, f: F) -> Result<Vec<T>> {
        if self.sequential {
            self.cfg.n_list.iter().map(|&n| f(n)).collect()
        } else {
            self.cfg.n_list.par_iter().map(|&n| f(n)).collect()
        }
    }

    fn run_stage(&self, stage: Command) -> Result<StageOutput> {
        match stage {
            Command::Scatter => self.scatter(),
            Command::Correlations => self.correlations(),
            Command::Predict => self.predict(),
            Command::Ed => self.ed(),
            Command::Renorm => self.renorm(),
            Command::Report => self.report(),
        }
    }

    fn scatter(&self) -> Result<StageOutput> {
        let cfg = self.cfg;
        let v = &cfg.potential;
        let sl = scattering_length_ode(v, cfg.kappa)?;
        let mut summary = String::from("quantity,value\n");
        let mut row = |k: &str, x: f64| writeln!(summary, "{k},{}", fmt_num(x)).unwrap();
        row("a0", sl.a0);
        row("a0_identity", sl.identity);
        if let PotentialSpec::SoftSphere { v0, r } = v.spec() {
            row("a0_closed_form", soft_sphere_scattering_length(*v0, *r, cfg.kappa));
        }
        for k in 1..=cfg.k_max {
            row(&format!("born_k{k}"), born_series_a0(v, cfg.kappa, k, SeriesQuadrature::default())?.a);
        }
        let rows = self.sweep(|n| box_scattering_series_an(v, cfg.kappa, n, cfg.k_max, BoxSeriesOptions::default()))?;
        let mut table = String::from("n,a_n,scaled_shift,neglected\n");
        let mut shifts = Vec::new();
        for (&n, r) in cfg.n_list.iter().zip(&rows) {
            let shift = 4.0 * PI * (r.a - sl.a0) * n as f64;
            shifts.push(shift);
            writeln!(table, "{n},{},{},{}", fmt_num(r.a), fmt_num(shift), fmt_num(r.neglected)).unwrap();
        }
        let mut fits = BTreeMap::new();
        try_fit(&mut fits, "scaled_shift_vs_n", &cfg.n_list, &shifts);
        Ok(StageOutput { files: vec![("scatter_summary.csv".into(), summary), ("scatter.csv".into(), table)], fits })
    }

    fn profile(&self, n: u64) -> Result<CorrelationProfile> {
        let cfg = self.cfg;
        if cfg.beta == 0.0 || cfg.kappa == 0.0 || cfg.potential.is_zero() {
            return Ok(CorrelationProfile::zero(&self.modes, n));
        }
        let sol = solve_neumann_beta(&cfg.potential, cfg.kappa, n, cfg.ell, cfg.beta, RadialGrid::default())?;
        build_eta(Arc::new(sol), &self.modes, n)
    }

    fn correlations(&self) -> Result<StageOutput> {
        let cfg = self.cfg;
        let points = self.sweep(|n| {
            let sol = solve_neumann_beta(&cfg.potential, cfg.kappa, n, cfg.ell, cfg.beta, RadialGrid::default())?;
            let profile = build_eta(Arc::new(sol), &self.modes, n)?;
            let norms = eta_norms(&profile)?;
            Ok((profile, norms))
        })?;
        let mut table = String::from("n,l2,h1_sq,l2_sq_tail,h1_sq_tail,lambda_ratio\n");
        let mut files = Vec::new();
        let mut h1 = Vec::new();
        for (&n, (profile, norms)) in cfg.n_list.iter().zip(&points) {
            let lam = profile.solution().map_or(0.0, |s| s.lambda_ratio());
            writeln!(
                table,
                "{n},{},{},{},{},{}",
                fmt_num(norms.l2),
                fmt_num(norms.h1_sq),
                fmt_num(norms.l2_sq_tail),
                fmt_num(norms.h1_sq_tail),
                fmt_num(lam)
            )
            .unwrap();
            h1.push(norms.h1_sq);
            let mut eta = String::from("nx,ny,nz,p2,eta,sigma,gamma\n");
            for p in profile.modes().expect("built on modes").modes() {
                let [x, y, z] = p.n();
                let row = [p.p2(), profile.eta(*p), profile.sigma(*p), profile.gamma(*p)].map(fmt_num);
                writeln!(eta, "{x},{y},{z},{}", row.join(",")).unwrap();
            }
            files.push((format!("eta_n{n}.csv"), eta));
        }
        files.insert(0, ("correlations.csv".into(), table));
        let mut fits = BTreeMap::new();
        try_fit(&mut fits, "h1_sq_vs_n", &cfg.n_list, &h1);
        Ok(StageOutput { files, fits })
    }

    /// Stage-J Bogoliubov prediction on the configured modes.
    fn predict_point(&self, n: u64) -> Result<(SpectrumPrediction, Vec<(f64, f64)>)> {
        let cfg = self.cfg;
        let profile = self.profile(n)?;
        let inter = Interaction::new(&cfg.potential, cfg.kappa, n, cfg.beta, &self.modes.without_zero())?;
        let form = quadratic_coefficients(Stage::J, &profile, &inter, SumDomain::Modes, &self.modes, f64::INFINITY)?;
        let diag = diagonalize_quadratic(&form)?;
        let dispersion: Vec<(LatticeVector, f64)> = form.modes.iter().copied().zip(diag.eps.iter().copied()).collect();
        let mut levels = enumerate_levels(&dispersion, cfg.zeta, LEVEL_LIMIT)?;
        if let Some(sector) = cfg.sector {
            levels.retain(|l| level_momentum(l, &dispersion) == sector);
        }
        let fg = form.diagonal.iter().copied().zip(form.pairing.iter().copied()).collect();
        let prediction = SpectrumPrediction { ground_energy: form.constant + diag.shift, dispersion, levels, zeta: cfg.zeta };
        Ok((prediction, fg))
    }

    fn predict(&self) -> Result<StageOutput> {
        let cfg = self.cfg;
        let points = self.sweep(|n| {
            let ge = ground_energy_prediction(
                &cfg.potential,
                cfg.kappa,
                n,
                GroundEnergyOptions { k_max: cfg.k_max, ..Default::default() },
            )?;
            Ok((ge, self.predict_point(n)?))
        })?;
        let a0 = points.first().map_or(0.0, |p| p.0.a0);
        let mut energy = String::from("n,energy,leading,correction,box_shift,quadratic_ground\n");
        let mut files = Vec::new();
        for (&n, (ge, (pred, fg))) in cfg.n_list.iter().zip(&points) {
            let row = [ge.energy, ge.leading, ge.correction, ge.box_shift, pred.ground_energy].map(fmt_num);
            writeln!(energy, "{n},{}", row.join(",")).unwrap();
            let mut disp = String::from("nx,ny,nz,p2,f,g,epsilon,epsilon_gp\n");
            for ((p, e), (f, g)) in pred.dispersion.iter().zip(fg) {
                let [x, y, z] = p.n();
                let row = [p.p2(), *f, *g, *e, gp_dispersion(a0, *p)].map(fmt_num);
                writeln!(disp, "{x},{y},{z},{}", row.join(",")).unwrap();
            }
            files.push((format!("dispersion_n{n}.csv"), disp));
            files.push((format!("levels_n{n}.csv"), pred.levels_csv()));
        }
        files.insert(0, ("prediction.csv".into(), energy));
        Ok(StageOutput { files, fits: BTreeMap::new() })
    }

    fn ed_point(&self, n: u64) -> Result<(usize, EigenResult, f64)> {
        let cfg = self.cfg;
        let n32 = u32::try_from(n).map_err(|_| schema("n_list", format!("N = {n} is too large for exact diagonalization")))?;
        let basis = build_basis_with_limit(
            &self.modes,
            Truncation::Total { n: n32, max_excited: cfg.n_max },
            cfg.sector,
            self.dim_limit,
        )?;
        let inter = Interaction::new(&cfg.potential, cfg.kappa, n, cfg.beta, &self.modes)?;
        let h = build_hamiltonian_full(&basis, &inter)?;
        let opts = cfg.solver.options(self.sequential);
        let r = lowest_spectrum(&h, &SolverOptions { m: opts.m.min(basis.dim()), ..opts })?;
        let dep = depletion(&r.vectors[0], &basis)?;
        Ok((basis.dim(), r, dep))
    }

    fn ed(&self) -> Result<StageOutput> {
        let cfg = self.cfg;
        let points = self.sweep(|n| self.ed_point(n))?;
        let mut table = String::from("n,dim,e0,gap1,depletion\n");
        let mut files = Vec::new();
        let mut deps = Vec::new();
        for (&n, (dim, r, dep)) in cfg.n_list.iter().zip(&points) {
            let gap = r.values.get(1).map_or(f64::NAN, |e| e - r.values[0]);
            writeln!(table, "{n},{dim},{},{},{}", fmt_num(r.values[0]), fmt_num(gap), fmt_num(*dep)).unwrap();
            deps.push(*dep);
            files.push((format!("eigen_n{n}.csv"), r.to_csv()));
        }
        files.insert(0, ("ed.csv".into(), table));
        let mut fits = BTreeMap::new();
        try_fit(&mut fits, "depletion_vs_n", &cfg.n_list, &deps);
        Ok(StageOutput { files, fits })
    }

    fn renorm(&self) -> Result<StageOutput> {
        let cfg = self.cfg;
        let exc_modes = self.modes.without_zero();
        let points = self.sweep(|n| {
            let basis = build_basis_with_limit(&exc_modes, Truncation::Excitations { max: cfg.n_max }, cfg.sector, self.dim_limit)?;
            let profile = self.profile(n)?;
            let inter = Interaction::new(&cfg.potential, cfg.kappa, n, cfg.beta, &exc_modes)?;
            let l = build_excitation_hamiltonian(&basis, &inter)?;
            let obs = build_observables(&basis, &profile, &inter)?;
            let form_g = quadratic_coefficients(Stage::G, &profile, &inter, SumDomain::Modes, &exc_modes, f64::INFINITY)?;
            let form_j = quadratic_coefficients(Stage::J, &profile, &inter, SumDomain::Modes, &exc_modes, f64::INFINITY)?;
            let diag = diagonalize_quadratic(&form_j)?;
            let conj = Conjugations::build(&basis, &profile, Some(&diag))?;
            let mut ratios = Vec::new();
            let mut g_mat = None;
            for (stage, form) in [(RenormStage::G, &form_g), (RenormStage::J, &form_j), (RenormStage::M, &form_j)] {
                let renorm = renormalize(stage, &l.total, &conj)?;
                let pred = predicted_operator(stage, &basis, n, form, Some(&diag), &obs)?;
                ratios.push(measure_decomposition_residual(stage, &renorm, &pred, &obs, cfg.kappa, cfg.beta, n)?.ratio);
                if stage == RenormStage::G {
                    g_mat = Some(renorm);
                }
            }
            let g = g_mat.expect("stage G computed");
            let a0 = scattering_length_ode(&cfg.potential, cfg.kappa)?.a0;
            let c = stage_g_constant(&g, &obs, a0, n, cfg.kappa, 0.5)?;
            let vac = basis.condensate_index().ok_or_else(|| NumericalError::Other("basis has no vacuum".into()))?;
            let vac_l = l.total.get(vac, vac);
            let vac_g = g[(vac, vac)];
            let dp = measure_remainders_dp(&basis, &profile, 4, 32, cfg.seed)?;
            Ok((basis.dim(), vac_l, vac_g, c, ratios, dp.max_ratio))
        })?;
        let mut table = String::from("n,dim,vacuum_l,vacuum_g,pencil_constant_g,residual_g,residual_j,residual_m,dp_max_ratio\n");
        let mut cs = Vec::new();
        let mut dps = Vec::new();
        for (&n, (dim, vl, vg, c, r, dp)) in cfg.n_list.iter().zip(&points) {
            let row = [*vl, *vg, *c, r[0], r[1], r[2], *dp].map(fmt_num);
            writeln!(table, "{n},{dim},{}", row.join(",")).unwrap();
            cs.push(*c);
            dps.push(*dp);
        }
        let mut fits = BTreeMap::new();
        try_fit(&mut fits, "pencil_constant_vs_n", &cfg.n_list, &cs);
        try_fit(&mut fits, "dp_max_ratio_vs_n", &cfg.n_list, &dps);
        Ok(StageOutput { files: vec![("renorm.csv".into(), table)], fits })
    }

    fn report(&self) -> Result<StageOutput> {
        let cfg = self.cfg;
        let points = self.sweep(|n| {
            let (mut pred, _) = self.predict_point(n)?;
            pred.levels.retain(|l| l.occupations.iter().sum::<u32>() <= cfg.n_max);
            let (_, ed, _) = self.ed_point(n)?;
            Ok((n, ed, pred))
        })?;
        let cmp = compare_spectra(&points)?;
        let mut fits = BTreeMap::new();
        if let Some(f) = cmp.fit {
            fits.insert("max_gap_vs_n".to_string(), f);
        }
        Ok(StageOutput { files: vec![("comparison.csv".into(), cmp.to_csv()), ("comparison_summary.csv".into(), cmp.summary_csv())], fits })
    }
}

/// Σ n_p p over a configuration.
pub fn level_momentum(level: &Level, dispersion: &[(LatticeVector, f64)]) -> LatticeVector {
    let mut k = [0i32; 3];
    for (&occ, (p, _)) in level.occupations.iter().zip(dispersion) {
        for (ki, pi) in k.iter_mut().zip(p.n()) {
            *ki += occ as i32 * pi;
        }
    }
    LatticeVector(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: u64,
    pub k: usize,
    pub ed: f64,
    pub predicted: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMismatch {
    pub n: u64,
    pub ed: usize,
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub rows: Vec<ComparisonRow>,
    /// (N, largest per-level gap).
    pub max_gaps: Vec<(u64, f64)>,
    pub mismatches: Vec<CountMismatch>,
    /// Largest gap against N, when every gap is nonzero.
    pub fit: Option<PowerFit>,
}

impl SpectrumComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,k,ed,predicted,abs_gap,rel_gap\n");
        for r in &self.rows {
            let row = [r.ed, r.predicted, r.abs_gap, r.rel_gap].map(fmt_num);
            writeln!(s, "{},{},{}", r.n, r.k, row.join(",")).unwrap();
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("n,max_gap,ed_count,predicted_count\n");
        for &(n, g) in &self.max_gaps {
            let m = self.mismatches.iter().find(|m| m.n == n);
            let (e, p) = m.map_or((String::new(), String::new()), |m| (m.ed.to_string(), m.predicted.to_string()));
            writeln!(s, "{n},{},{e},{p}", fmt_num(g)).unwrap();
        }
        if let Some(f) = &self.fit {
            writeln!(s, "# slope {} +- {}", fmt_num(f.slope), fmt_num(f.slope_se)).unwrap();
        }
        s
    }
}

/// Pairs the k-th ED excitation energy E_k - E_0 with the k-th predicted
/// excited level inside the window ζ. A count mismatch is recorded only when
/// the computed ED spectrum reaches past ζ, so the window is fully resolved.
pub fn compare_spectra(points: &[(u64, EigenResult, SpectrumPrediction)]) -> Result<SpectrumComparison> {
    let mut rows = Vec::new();
    let mut max_gaps = Vec::new();
    let mut mismatches = Vec::new();
    for (n, ed, pred) in points {
        if ed.values.is_empty() {
            return Err(crate::error::invalid("ED result without eigenvalues"));
        }
        let e0 = ed.values[0];
        let ed_exc: Vec<f64> = ed.values[1..].iter().map(|e| e - e0).collect();
        let inside: Vec<f64> = ed_exc.iter().copied().filter(|&x| x <= pred.zeta).collect();
        let predicted: Vec<f64> = pred.levels.iter().map(|l| l.energy).filter(|&e| e > 0.0).collect();
        let resolved = inside.len() < ed_exc.len();
        if resolved && inside.len() != predicted.len() {
            mismatches.push(CountMismatch { n: *n, ed: inside.len(), predicted: predicted.len() });
        }
        let mut worst = 0.0f64;
        for (k, (&a, &b)) in inside.iter().zip(&predicted).enumerate() {
            let gap = (a - b).abs();
            worst = worst.max(gap);
            rows.push(ComparisonRow { n: *n, k: k + 1, ed: a, predicted: b, abs_gap: gap, rel_gap: gap / b.abs() });
        }
        max_gaps.push((*n, worst));
    }
    let ns: Vec<u64> = max_gaps.iter().map(|g| g.0).collect();
    let gaps: Vec<f64> = max_gaps.iter().map(|g| g.1).collect();
    let mut fits = BTreeMap::new();
    try_fit(&mut fits, "gap", &ns, &gaps);
    Ok(SpectrumComparison { rows, max_gaps, mismatches, fit: fits.remove("gap") })
}

/// Exit status for a failed run: 2 schema, 3 guard, 4 numerical or I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema { .. } | Error::Json(_) | Error::InvalidInput(_) => 2,
        Error::Guard { .. } | Error::DimensionLimit { .. } => 3,
        Error::Numerical(_) | Error::Cache(_) | Error::Io(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn base() -> Value {
        json!({
            "potential": {"kind": "soft_sphere", "v0": 1.0, "r": 0.5},
            "kappa": 0.1,
            "n_list": [20, 40],
            "beta": 1.0,
            "ell": 0.25,
            "cutoff": {"kind": "euclidean", "radius": 6.3},
            "n_max": 2,
            "zeta": 100.0
        })
    }

    #[test]
    fn unknown_fields_name_their_path() {
        let mut v = base();
        v["solver"] = json!({"m": 4, "tolerance": 1e-9});
        let e = RunConfig::from_json(&v.to_string()).unwrap_err();
        match e {
            Error::Schema { path, message } => {
                assert_eq!(path, "solver.tolerance");
                assert!(message.contains("tolerance"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(exit_code(&RunConfig::from_json("{").unwrap_err()), 2);
    }

    #[test]
    fn guards_and_override() {
        let mut v = base();
        v["kappa"] = json!(0.3);
        let cfg = RunConfig::from_json(&v.to_string()).unwrap();
        let e = cfg.validate(false).unwrap_err();
        assert!(matches!(e, Error::Guard { guard: "kappa", .. }));
        assert_eq!(exit_code(&e), 3);
        cfg.validate(true).unwrap();
        v["ell"] = json!(0.5);
        let e = RunConfig::from_json(&v.to_string()).unwrap().validate(true).unwrap_err();
        assert!(matches!(e, Error::Schema { ref path, .. } if path == "ell"));
    }

    #[test]
    fn stage_keys_track_only_relevant_fields() {
        let cfg = RunConfig::from_json(&base().to_string()).unwrap();
        let mut other = cfg.clone();
        other.n_max = 3;
        assert_eq!(stage_key(&cfg, Command::Scatter), stage_key(&other, Command::Scatter));
        assert_ne!(stage_key(&cfg, Command::Ed), stage_key(&other, Command::Ed));
        other = cfg.clone();
        other.output_dir = "elsewhere".into();
        other.solver.parallel = false;
        for c in [Command::Scatter, Command::Correlations, Command::Predict, Command::Ed, Command::Renorm, Command::Report] {
            assert_eq!(stage_key(&cfg, c), stage_key(&other, c));
        }
    }

    #[test]
    fn corrupted_cache_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        let out = StageOutput { files: vec![("a.csv".into(), "1\n".into())], fits: BTreeMap::new() };
        store_cached(&path, "k", &out).unwrap();
        assert_eq!(load_cached(&path, "k").unwrap(), Some(out));
        let text = fs::read_to_string(&path).unwrap().replace("1\\\\n", "2\\\\n");
        fs::write(&path, text).unwrap();
        let e = load_cached(&path, "k").unwrap_err();
        assert!(matches!(e, Error::Cache(_)), "{e:?}");
    }
}
