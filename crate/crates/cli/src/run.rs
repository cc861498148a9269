use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use largesol::disk::{
    barriers_on_rings, build_barriers, continuation_to_blowup, sandwich_check, u_r_on_rings, DiskLadder, PolarField, PolarGrid,
    SandwichReport,
};
use largesol::nonlinearity::{decompose_with, first_positive, keller_osserman_with, DecomposeOptions, Decomposition, KoOptions, KoReport};
use largesol::numerics::NewtonOptions;
use largesol::radial::{large_solution_radial, reference_u_r, solve_annulus_large, LadderOptions, LargeRadialProfile, RadialGrid};
use largesol::symmetry::{lie_derivative_bound, symmetry_report, LieReport, SymmetryReport};
use serde::Serialize;

use crate::config::{Expect, Kind, ScenarioConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub name: &'static str,
    pub status: StageStatus,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    /// Informational values that do not enter the verdict.
    pub notes: Vec<String>,
}

impl StageReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            status: StageStatus::Ok,
            error: None,
            files: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, name: &'static str, pass: bool, detail: String) {
        self.checks.push(Check { name, pass, detail });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Error => 2,
        }
    }
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub kind: Kind,
    pub config: BTreeMap<String, String>,
    pub stages: Vec<StageReport>,
    pub verdict: Verdict,
    /// `stage` for errors, `stage/check` for failed checks.
    pub first_failure: Option<String>,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.stages.iter().flat_map(|s| &s.checks).find(|c| c.name == name)
    }
}

type StageResult<T> = std::result::Result<T, String>;

fn write_file(rep: &mut StageReport, out: &Path, name: &str, contents: &str) -> StageResult<()> {
    fs::write(out.join(name), contents).map_err(|e| format!("cannot write {name}: {e}"))?;
    rep.files.push(name.to_string());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> StageResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| e.to_string())
}

pub fn ladder_options(cfg: &ScenarioConfig) -> LadderOptions {
    LadderOptions {
        k0: cfg.k0,
        ratio: cfg.ratio,
        levels: cfg.levels,
        interior_margin: cfg.interior_margin,
        tol: cfg.continuation_tol,
        newton: NewtonOptions {
            tol: cfg.newton_tol,
            max_iter: cfg.newton_max_iter,
            ..NewtonOptions::default()
        },
        ko_lower: cfg.a,
    }
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    out: &'a Path,
    stages: Vec<StageReport>,
}

impl Runner<'_> {
    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&ScenarioConfig, &Path, &mut StageReport) -> StageResult<T>) -> Option<T> {
        let mut rep = StageReport::new(name);
        let result = f(self.cfg, self.out, &mut rep);
        if let Err(e) = &result {
            rep.status = StageStatus::Error;
            rep.error = Some(e.clone());
        }
        self.stages.push(rep);
        result.ok()
    }
}

fn ko_stage(cfg: &ScenarioConfig, out: &Path, rep: &mut StageReport) -> StageResult<KoReport> {
    let a = cfg
        .a
        .or_else(|| first_positive(&cfg.g))
        .ok_or("g is not positive on [0, 100]; set `a`")?;
    let opts = KoOptions {
        fit_margin: cfg.fit_margin,
        ..KoOptions::default()
    };
    let report = keller_osserman_with(&cfg.g, a, &opts).map_err(|e| e.to_string())?;
    write_file(rep, out, "ko.csv", &format!("{}\n{}\n", KoReport::csv_header(), report.csv_row()))?;
    let detail = format!("a = {a}, tail exponent {}, integral {}", report.tail_exponent, report.total());
    match cfg.expect {
        Expect::Converge => rep.check("ko_converges", report.converges, detail),
        Expect::Diverge => rep.check("ko_diverges_as_expected", !report.converges, detail),
    }
    Ok(report)
}

fn write_profile(rep: &mut StageReport, out: &Path, profile: &LargeRadialProfile) -> StageResult<()> {
    write_file(rep, out, "radial.csv", &profile.profile_csv())?;
    write_file(rep, out, "asymptote.csv", &profile.asymptote_csv())
}

fn nondecreasing_check(rep: &mut StageReport, profile: &LargeRadialProfile) {
    let top = profile.top();
    let drops = top.values.windows(2).filter(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0)).count();
    rep.check(
        "radial_profile_nondecreasing",
        drops == 0,
        format!("{drops} decreasing steps at the top level"),
    );
    rep.notes.push(format!(
        "interior relative change {} between the last two levels (converged: {})",
        profile.interior_change, profile.interior_converged
    ));
    rep.notes.push(match profile.match_radius {
        Some(r) => format!("asymptote match radius {r}"),
        None => "no asymptote match radius".into(),
    });
}

fn radial_stage(cfg: &ScenarioConfig, out: &Path, rep: &mut StageReport) -> StageResult<LargeRadialProfile> {
    let opts = ladder_options(cfg);
    let profile = match cfg.inner_radius {
        Some(r_in) => {
            let grid = RadialGrid::new(cfg.dimension, r_in, cfg.radius, cfg.n).map_err(|e| e.to_string())?;
            let profile = solve_annulus_large(&cfg.g, &grid, cfg.inner_value, &opts).map_err(|e| e.to_string())?;
            let half = 0.5 * (r_in + cfg.radius);
            let bad: usize = profile
                .ladder
                .iter()
                .map(|sol| {
                    sol.grid
                        .nodes()
                        .iter()
                        .zip(&sol.derivative)
                        .filter(|(&r, &d)| r >= half && !(d > 0.0))
                        .count()
                })
                .sum();
            rep.check(
                "annulus_outer_half_increasing",
                bad == 0,
                format!("{bad} nodes with du/dr <= 0 for r >= {half}"),
            );
            profile
        }
        None => {
            let grid = RadialGrid::ball(cfg.dimension, cfg.radius, radial_nodes(cfg)).map_err(|e| e.to_string())?;
            let profile = large_solution_radial(&cfg.g, &grid, &opts).map_err(|e| e.to_string())?;
            nondecreasing_check(rep, &profile);
            profile
        }
    };
    write_profile(rep, out, &profile)?;
    Ok(profile)
}

/// Scenarios that also run the disk share its rings with the radial grid.
fn radial_nodes(cfg: &ScenarioConfig) -> usize {
    match cfg.kind {
        Kind::Symmetry | Kind::FullVerify => 2 * cfg.nr + 1,
        _ => cfg.n,
    }
}

fn top_level(cfg: &ScenarioConfig) -> f64 {
    *ladder_options(cfg).schedule().last().expect("levels >= 1")
}

fn decomposition_stage(cfg: &ScenarioConfig, out: &Path, rep: &mut StageReport) -> StageResult<Decomposition> {
    let opts = DecomposeOptions {
        working_range: (cfg.working_lo, cfg.working_hi.unwrap_or_else(|| top_level(cfg))),
        ..DecomposeOptions::for_lower_bound(cfg.splice_from)
    };
    let decomp = decompose_with(&cfg.g, cfg.splice_from, &opts).map_err(|e| e.to_string())?;
    write_file(
        rep,
        out,
        "decomposition.csv",
        &format!("{}\n{}\n", Decomposition::csv_header(), decomp.csv_row()),
    )?;
    Ok(decomp)
}

fn reference_stage(cfg: &ScenarioConfig, decomp: &Decomposition, out: &Path, rep: &mut StageReport) -> StageResult<LargeRadialProfile> {
    let grid = RadialGrid::ball(2, cfg.radius, radial_nodes(cfg)).map_err(|e| e.to_string())?;
    let profile = reference_u_r(decomp, &grid, &ladder_options(cfg)).map_err(|e| e.to_string())?;
    nondecreasing_check(rep, &profile);
    write_profile(rep, out, &profile)?;
    Ok(profile)
}

fn polar_grid(cfg: &ScenarioConfig, nr: usize) -> StageResult<PolarGrid> {
    PolarGrid::new(cfg.radius, nr, cfg.ntheta).map_err(|e| e.to_string())
}

fn ladder(cfg: &ScenarioConfig, nr: usize, epsilon: f64) -> StageResult<DiskLadder> {
    continuation_to_blowup(&cfg.g, &polar_grid(cfg, nr)?, cfg.shape, epsilon, &ladder_options(cfg)).map_err(|e| e.to_string())
}

fn disk_stage(cfg: &ScenarioConfig, out: &Path, rep: &mut StageReport) -> StageResult<DiskLadder> {
    let ladder = ladder(cfg, cfg.nr, cfg.epsilon)?;
    write_file(rep, out, "ladder.csv", &ladder.csv())?;
    write_file(rep, out, "field.csv", &ladder.top().field.csv())?;
    if cfg.epsilon > 0.0 {
        let half = 0.5 * cfg.radius;
        let osc = ladder.oscillation_at(half);
        let rises = osc.windows(2).filter(|w| !(w[1] < w[0])).count();
        rep.check("osc_half_radius_decreasing", rises == 0, format!("osc(R/2) per level {osc:?}"));
        let top = &ladder.top().field;
        let ratio = top.oscillation_at(half) / top.mean_at(half);
        rep.check(
            "osc_ratio_top",
            ratio <= cfg.osc_ratio_tol,
            format!("osc(R/2)/u(R/2) = {ratio} against {}", cfg.osc_ratio_tol),
        );
    }
    Ok(ladder)
}

/// `max |coarse − R(fine)|` with `R` the two-ring average.
pub fn self_convergence(coarse: &PolarField, fine: &PolarField) -> largesol::Result<f64> {
    let restricted = PolarField::restrict_from(fine, &coarse.grid)?;
    Ok(coarse
        .values
        .iter()
        .zip(&restricted.values)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

#[derive(Serialize)]
struct SandwichArtifact<'a> {
    #[serde(flatten)]
    report: &'a SandwichReport,
    epsilon: f64,
    u_r_level: f64,
    self_convergence: Option<f64>,
}

fn sandwich_stage(
    cfg: &ScenarioConfig,
    decomp: &Decomposition,
    u_r: &LargeRadialProfile,
    out: &Path,
    rep: &mut StageReport,
) -> StageResult<SandwichReport> {
    // Barriers compare truncated solutions with the same boundary data.
    let coarse = ladder(cfg, cfg.nr, 0.0)?;
    let top = coarse.top();
    let self_conv = if cfg.refine {
        let fine = ladder(cfg, 2 * cfg.nr, 0.0)?;
        Some(self_convergence(&top.field, &fine.top().field).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let slack = 2.0 * self_conv.unwrap_or(0.0);
    let levels = u_r_on_rings(decomp, top.grid(), &ladder_options(cfg)).map_err(|e| e.to_string())?;
    let (level, rings) = levels
        .into_iter()
        .min_by(|a, b| (a.0 - top.boundary_level()).abs().total_cmp(&(b.0 - top.boundary_level()).abs()))
        .expect("ladders are nonempty");
    let barriers = barriers_on_rings(decomp, top.grid(), cfg.r0(), rings, level).map_err(|e| e.to_string())?;
    let report = sandwich_check(top, &barriers, slack).map_err(|e| e.to_string())?;
    let nodal = build_barriers(decomp, u_r, top.grid(), cfg.r0(), top.boundary_level())
        .and_then(|b| sandwich_check(top, &b, slack))
        .map_err(|e| e.to_string())?;
    rep.notes.push(format!(
        "nodal U_R from the radial solver: margins {} / {}",
        nodal.lower_margin, nodal.upper_margin
    ));
    let artifact = SandwichArtifact {
        report: &report,
        epsilon: 0.0,
        u_r_level: barriers.u_r_level,
        self_convergence: self_conv,
    };
    write_file(rep, out, "sandwich.json", &to_json(&artifact)?)?;
    rep.check(
        "sandwich",
        report.pass,
        format!(
            "margins {} / {} with slack {slack}, K0 = {}",
            report.lower_margin, report.upper_margin, report.k0
        ),
    );
    Ok(report)
}

#[derive(Serialize)]
struct SymmetryArtifact<'a> {
    #[serde(flatten)]
    report: &'a SymmetryReport,
    lie_refined: Option<LieReport>,
}

/// `array,index,value` rows mirroring the JSON arrays.
pub fn symmetry_csv(report: &SymmetryReport) -> String {
    let mut out = String::from("array,index,value\n");
    let mut rows = |name: &str, values: &[f64]| {
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(out, "{name},{i},{v}");
        }
    };
    rows("r", &report.radii);
    rows("osc", &report.osc);
    rows("ratio", &report.ratio);
    rows("laplace_beltrami", &report.laplace_beltrami);
    rows("osc_half_radius", &report.osc_half_radius);
    rows("lie_fit", &[report.lie_fit.l]);
    if let Some(fit) = report.lemma1.fit {
        rows("tangential_fit", &[fit.c, fit.exponent]);
    }
    rows("mp_violations", &report.mp_violations);
    rows("mu_hat_per_direction", &report.mu_hat_per_direction);
    rows("mu_hat", &[report.mu_hat]);
    out
}

/// Largest radius the diagnostics trust: the asymptote match radius when
/// there is one, else the interior convergence region.
pub fn resolved_radius(cfg: &ScenarioConfig, profile: Option<&LargeRadialProfile>) -> f64 {
    profile.and_then(|p| p.match_radius).unwrap_or(cfg.radius - cfg.interior_margin)
}

fn symmetry_stage(
    cfg: &ScenarioConfig,
    ladder_top: &DiskLadder,
    profile: Option<&LargeRadialProfile>,
    out: &Path,
    rep: &mut StageReport,
) -> StageResult<SymmetryReport> {
    let resolved = resolved_radius(cfg, profile);
    let report = symmetry_report(&ladder_top.levels, resolved, cfg.r0(), cfg.directions, cfg.threshold).map_err(|e| e.to_string())?;
    let lie_refined = if cfg.refine {
        let fine = ladder(cfg, 2 * cfg.nr, cfg.epsilon)?;
        Some(lie_derivative_bound(&fine.top().field, cfg.r0(), resolved))
    } else {
        None
    };
    write_file(
        rep,
        out,
        "symmetry.json",
        &to_json(&SymmetryArtifact {
            report: &report,
            lie_refined,
        })?,
    )?;
    write_file(rep, out, "symmetry.csv", &symmetry_csv(&report))?;

    let l1 = &report.lemma1;
    rep.check(
        "ratio_decay",
        l1.ratio_decay() >= 2.0,
        format!("rho at r = {} per level {:?}", l1.outer_radius, l1.ratio_outer),
    );
    rep.check(
        "tangential_limit",
        l1.limit_i(),
        format!("fit {:?}, decreasing {}", l1.fit, l1.tangential_decreasing),
    );
    rep.check(
        "radial_growth",
        l1.limit_ii() && l1.growth_factor >= 10.0,
        format!("growth {} against threshold {}", l1.growth_factor, l1.divergence_threshold),
    );
    rep.check(
        "lie_bound_finite",
        report.lie_fit.l.is_finite(),
        format!("L = {}", report.lie_fit.l),
    );
    if let Some(fine) = lie_refined {
        let stable = report.lie_fit.l.is_finite()
            && fine.l.is_finite()
            && (report.lie_fit.l - fine.l).abs() <= cfg.lie_stability * report.lie_fit.l.max(fine.l);
        rep.check(
            "lie_bound_stable",
            stable,
            format!("L = {} at Nr, {} at 2 Nr", report.lie_fit.l, fine.l),
        );
    }
    let sd = &report.second_difference;
    rep.check(
        "second_difference",
        sd.pass,
        format!("L~ = {}, worst excess {} at r = {}", sd.l_tilde, sd.worst_excess, sd.worst_radius),
    );
    let lb: Vec<f64> = report
        .radii
        .iter()
        .zip(&report.laplace_beltrami)
        .filter(|(&r, _)| r >= report.r0 && r <= report.resolved_radius)
        .map(|(_, &v)| v)
        .collect();
    rep.check(
        "laplace_beltrami_decreasing",
        report.laplace_beltrami_decreasing,
        format!(
            "max (u_θθ)+ from {} at r0 to {} at the resolved radius",
            lb.first().copied().unwrap_or(0.0),
            lb.last().copied().unwrap_or(0.0)
        ),
    );
    let grid = ladder_top.top().grid();
    rep.check(
        "moving_plane",
        report.moving_plane_consistent(grid),
        format!("mu_hat = {} against spacing {}", report.mu_hat, grid.dr()),
    );
    Ok(report)
}

/// Runs the stages of `cfg.kind` in order, writing artifacts into `out`
/// and `manifest.json` last. A stage error stops the pipeline.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> RunReport {
    let mut run = Runner {
        cfg,
        out,
        stages: Vec::new(),
    };
    if let Err(e) = fs::create_dir_all(out) {
        let mut rep = StageReport::new("setup");
        rep.status = StageStatus::Error;
        rep.error = Some(format!("cannot create {}: {e}", out.display()));
        run.stages.push(rep);
        return finish(cfg, run.stages, out);
    }
    pipeline(&mut run);
    finish(cfg, run.stages, out)
}

fn pipeline(run: &mut Runner<'_>) -> Option<()> {
    let kind = run.cfg.kind;
    run.stage("ko", ko_stage)?;
    match kind {
        Kind::KoCheck => {}
        Kind::Radial => {
            run.stage("radial", radial_stage)?;
        }
        Kind::Disk => {
            run.stage("disk", disk_stage)?;
        }
        Kind::Symmetry => {
            let profile = run.stage("radial", radial_stage)?;
            let ladder = run.stage("disk", disk_stage)?;
            run.stage("symmetry", |c, o, r| symmetry_stage(c, &ladder, Some(&profile), o, r))?;
        }
        Kind::FullVerify => {
            let decomp = run.stage("decomposition", decomposition_stage)?;
            let u_r = run.stage("radial", |c, o, r| reference_stage(c, &decomp, o, r))?;
            let ladder = run.stage("disk", disk_stage)?;
            run.stage("sandwich", |c, o, r| sandwich_stage(c, &decomp, &u_r, o, r))?;
            run.stage("symmetry", |c, o, r| symmetry_stage(c, &ladder, Some(&u_r), o, r))?;
        }
    }
    Some(())
}

fn finish(cfg: &ScenarioConfig, stages: Vec<StageReport>, out: &Path) -> RunReport {
    let error = stages.iter().find(|s| s.status == StageStatus::Error);
    let failed = stages
        .iter()
        .flat_map(|s| s.checks.iter().map(move |c| (s.name, c)))
        .find(|(_, c)| !c.pass);
    let (verdict, first_failure) = match (error, failed) {
        (Some(s), _) => (Verdict::Error, Some(s.name.to_string())),
        (None, Some((stage, c))) => (Verdict::Fail, Some(format!("{stage}/{}", c.name))),
        (None, None) => (Verdict::Pass, None),
    };
    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        kind: cfg.kind,
        config: cfg.echo.clone(),
        stages,
        verdict,
        first_failure,
    };
    let manifest = to_json(&report).and_then(|json| fs::write(out.join("manifest.json"), json).map_err(|e| e.to_string()));
    if let Err(e) = manifest {
        let mut rep = StageReport::new("manifest");
        rep.status = StageStatus::Error;
        rep.error = Some(e);
        report.stages.push(rep);
        report.verdict = Verdict::Error;
        report.first_failure.get_or_insert_with(|| "manifest".into());
    }
    report
}
