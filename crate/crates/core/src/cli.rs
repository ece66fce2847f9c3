//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 on a physics or solver failure, 2 on a usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::dispersion::{self, dispersion_curve, Domain};
use crate::fit::{compare_variants, deviation_vs_coupling, fit_rabi, FitResult, DEVIATION_LABELS};
use crate::fock::{oracle_check, CHECK_DETUNINGS, CHECK_RATIOS, CHECK_THRESHOLD};
use crate::io::config::{parse_config, RunConfig};
use crate::io::csv::{load_dispersion_csv, require_both_branches, save_dispersion_csv, save_labeled_table, save_table};
use crate::io::report::{result_document, write_document};
use crate::model::{diagonalize_with, ground_state_populations, Branch, HamiltonianVariant, ModeInputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PHYSICS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "polariton", version, about = "Intersubband cavity-polariton dispersions, fits and oracle checks")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `output.threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write a matplotlib script next to the CSV files.
    #[arg(long, global = true)]
    pub plot_script: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Polariton branches over an angle or wavevector grid.
    Dispersion(DispersionArgs),
    /// Fit the vacuum Rabi energy of one Hamiltonian variant to measured data.
    Fit(FitArgs),
    /// Fit all three Hamiltonian variants and rank them by RMS error.
    Compare(FitArgs),
    /// Relative deviation of the reduced Hamiltonians versus coupling.
    DeviationMap(DeviationArgs),
    /// Virtual photon and matter populations of the ground state versus coupling.
    GroundState(GroundStateArgs),
    /// Compare the Bogoliubov solution with a truncated Fock-space diagonalization.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[arg(long)]
    pub variant: Option<HamiltonianVariant>,
    /// `angle` or `wavevector`.
    #[arg(long, value_parser = parse_domain, default_value = "angle")]
    pub domain: Domain,
    /// `lo:hi:step` or a comma list; degrees or nm⁻¹. Defaults to the geometry grid.
    #[arg(long, value_parser = parse_values)]
    pub grid: Option<Values>,
    /// Overrides `coupling.omega_r`, meV.
    #[arg(long)]
    pub omega_r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with `theta_deg,energy_mev,branch`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub variant: Option<HamiltonianVariant>,
    #[arg(long, value_parser = parse_domain)]
    pub domain: Option<Domain>,
}

#[derive(Debug, Args)]
pub struct DeviationArgs {
    /// Ω_R/e_12 values, `lo:hi:step` or a comma list.
    #[arg(long, value_parser = parse_values, default_value = "0:0.3:0.01")]
    pub ratios: Values,
    /// Defaults to `cavity.theta_res`.
    #[arg(long)]
    pub theta_res: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GroundStateArgs {
    #[arg(long, value_parser = parse_values, default_value = "0:0.3:0.01")]
    pub ratios: Values,
    /// e_cav - e_12, meV.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub detuning: f64,
    #[arg(long, default_value = "FULL")]
    pub variant: HamiltonianVariant,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_parser = parse_values)]
    pub ratios: Option<Values>,
    #[arg(long, value_parser = parse_values, allow_hyphen_values = true)]
    pub detunings: Option<Values>,
    #[arg(long, default_value = "FULL")]
    pub variant: HamiltonianVariant,
    #[arg(long, default_value_t = CHECK_THRESHOLD)]
    pub threshold: f64,
}

/// Parsed numeric list.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

/// `lo:hi:step` (inclusive, the count is rounded) or `a,b,c`.
pub fn parse_values(text: &str) -> Result<Values, String> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
                return Err(format!("invalid range {text:?}"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            Ok(Values((0..n).map(|i| lo + step * i as f64).collect()))
        }
        [single] => {
            let values = single.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
            if values.is_empty() {
                return Err("empty list".into());
            }
            Ok(Values(values))
        }
        _ => Err(format!("expected lo:hi:step or a comma list, got {text:?}")),
    }
}

fn parse_domain(text: &str) -> Result<Domain, String> {
    match text.to_ascii_lowercase().as_str() {
        "angle" | "theta" => Ok(Domain::Angle),
        "wavevector" | "k" => Ok(Domain::Wavevector),
        _ => Err(format!("unknown domain {text:?} (angle | wavevector)")),
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Physics(String),
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn physics(e: impl ToString) -> Failure {
    Failure::Physics(e.to_string())
}

/// Parse `args` (including the program name) and execute.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Physics(msg)) => {
            eprintln!("error: {msg}");
            EXIT_PHYSICS
        }
    }
}

struct Context {
    config: RunConfig,
    out_dir: PathBuf,
    plot: bool,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn document<T: Serialize>(&self, command: &str, results: &T) -> Result<(), Failure> {
        let doc = result_document(command, &self.config, results).map_err(physics)?;
        let name = format!("{}.json", command.replace('-', "_"));
        write_document(&self.path(&name), &doc).map_err(|e| physics(format!("writing {name}: {e}")))
    }

    fn plot_script(&self, name: &str, body: &str) -> Result<(), Failure> {
        if !self.plot {
            return Ok(());
        }
        let script = format!(
            "import csv\nimport os\nimport matplotlib.pyplot as plt\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\n\ndef load(name):\n    with open(os.path.join(HERE, name)) as f:\n        return list(csv.DictReader(f))\n\n\n{body}\nplt.tight_layout()\nplt.show()\n"
        );
        std::fs::write(self.path(name), script).map_err(|e| physics(format!("writing {name}: {e}")))
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut config = match &cli.config {
        Some(path) => parse_config(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.output_dir {
        config.output.dir = dir;
    }
    if let Some(threads) = cli.threads {
        config.output.threads = threads;
    }
    config.output.plot_script |= cli.plot_script;
    config.validate().map_err(usage)?;

    let out_dir = config.output.dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.output.threads).build().map_err(physics)?;
    let plot = config.output.plot_script;
    let mut ctx = Context { config, out_dir, plot };
    pool.install(|| match cli.command {
        Command::Dispersion(args) => dispersion_cmd(&mut ctx, args),
        Command::Fit(args) => fit_cmd(&mut ctx, args),
        Command::Compare(args) => compare_cmd(&mut ctx, args),
        Command::DeviationMap(args) => deviation_cmd(&mut ctx, args),
        Command::GroundState(args) => ground_state_cmd(&mut ctx, args),
        Command::OracleCheck(args) => oracle_cmd(&mut ctx, args),
    })
}

fn dispersion_cmd(ctx: &mut Context, args: DispersionArgs) -> Result<(), Failure> {
    if let Some(omega) = args.omega_r {
        ctx.config.coupling.omega_r = omega;
    }
    let variant = args.variant.unwrap_or(ctx.config.fit.variant);
    let params = ctx.config.system_params().map_err(usage)?;
    let grid = match args.grid {
        Some(Values(v)) => v,
        None if args.domain == Domain::Angle => ctx.config.geometry.angle_grid(),
        None => {
            let k_res = dispersion::resonant_k(&params.cavity, params.e_12).map_err(physics)?;
            (0..=100).map(|i| 2.0 * k_res * i as f64 / 100.0).collect()
        }
    };
    let curve = dispersion_curve(&params, variant, args.domain, &grid).map_err(usage)?;
    save_dispersion_csv(&ctx.path("dispersion.csv"), &curve.points).map_err(physics)?;

    let lp: Vec<_> = curve.branch(Branch::Lower).collect();
    let min_splitting = lp
        .iter()
        .filter_map(|l| {
            let x = if args.domain == Domain::Angle { l.theta_int } else { l.k };
            curve
                .branch(Branch::Upper)
                .find(|u| (if args.domain == Domain::Angle { u.theta_int } else { u.k }) == x)
                .map(|u| (x.unwrap_or(f64::NAN), u.energy - l.energy))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1));

    let prism = params.geometry(ctx.config.geometry.prism_angle).map_err(usage)?;
    let at_prism: Option<(f64, f64)> = (|| {
        let lp = dispersion::branch_energy_at_angle(&params, variant, &prism, Branch::Lower).ok()?;
        let up = dispersion::branch_energy_at_angle(&params, variant, &prism, Branch::Upper).ok()?;
        Some((lp, up))
    })();

    println!("{} points ({variant}), {} failed", curve.points.len(), curve.failures.len());
    if let Some((x, s)) = min_splitting {
        println!("minimum splitting on grid: {s:.4} meV at {x}");
    }
    ctx.document(
        "dispersion",
        &json!({
            "curve": curve,
            "minimum_splitting": min_splitting.map(|(x, s)| json!({"abscissa": x, "splitting": s})),
            "prism_angle": prism.theta_int,
            "energies_at_prism_angle": at_prism.map(|(lp, up)| json!({"lp": lp, "up": up, "splitting": up - lp})),
        }),
    )?;
    ctx.plot_script(
        "plot_dispersion.py",
        "rows = load(\"dispersion.csv\")\nfor branch in (\"LP\", \"UP\"):\n    pts = [r for r in rows if r[\"branch\"] == branch]\n    x = [float(r[\"theta_deg\"] or r[\"k_per_nm\"]) for r in pts]\n    plt.plot(x, [float(r[\"energy_mev\"]) for r in pts], label=branch)\nplt.xlabel(\"angle (deg) / k (1/nm)\")\nplt.ylabel(\"energy (meV)\")\nplt.legend()\n",
    )?;
    if curve.partial {
        return Err(physics(format!("{} point(s) failed; see dispersion.json", curve.failures.len())));
    }
    Ok(())
}

fn load_fit_inputs(data: &Path) -> Result<Vec<dispersion::DispersionPoint>, Failure> {
    let points = load_dispersion_csv(data).map_err(|e| usage(format!("{}: {e}", data.display())))?;
    require_both_branches(&points).map_err(|e| usage(format!("{}: {e}", data.display())))?;
    Ok(points)
}

fn fit_rows(r: &FitResult) -> Vec<Vec<f64>> {
    r.rms_curve.iter().map(|s| vec![s.omega_r, s.rms]).collect()
}

fn apply_fit_overrides(ctx: &mut Context, args: &FitArgs) {
    if let Some(v) = args.variant {
        ctx.config.fit.variant = v;
    }
    if let Some(d) = args.domain {
        ctx.config.fit.domain = d;
    }
}

fn fit_cmd(ctx: &mut Context, args: FitArgs) -> Result<(), Failure> {
    apply_fit_overrides(ctx, &args);
    let data = load_fit_inputs(&args.data)?;
    let params = ctx.config.system_params().map_err(usage)?;
    let result = fit_rabi(&data, &params, &ctx.config.fit).map_err(physics)?;
    save_table(&ctx.path("fit_rms_curve.csv"), &["omega_r_mev", "rms_mev"], &fit_rows(&result)).map_err(physics)?;
    save_dispersion_csv(&ctx.path("fit_curve.csv"), &result.fitted_curve.points).map_err(physics)?;
    println!("{}: Ω_R* = {:.6} meV, rms = {:.6} meV", result.variant, result.omega_r_star, result.rms_star);
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    ctx.document("fit", &result)?;
    ctx.plot_script(
        "plot_fit.py",
        "rows = load(\"fit_rms_curve.csv\")\nplt.plot([float(r[\"omega_r_mev\"]) for r in rows], [float(r[\"rms_mev\"]) for r in rows], \".-\")\nplt.xlabel(\"vacuum Rabi energy (meV)\")\nplt.ylabel(\"RMS deviation (meV)\")\n",
    )
}

fn compare_cmd(ctx: &mut Context, args: FitArgs) -> Result<(), Failure> {
    apply_fit_overrides(ctx, &args);
    let data = load_fit_inputs(&args.data)?;
    let params = ctx.config.system_params().map_err(usage)?;
    let cmp = compare_variants(&data, &params, &ctx.config.fit).map_err(physics)?;
    let rows: Vec<(String, Vec<f64>)> =
        cmp.results.iter().map(|r| (r.variant.to_string(), vec![r.omega_r_star, r.rms_star])).collect();
    save_labeled_table(&ctx.path("compare.csv"), &["variant", "omega_r_star_mev", "rms_star_mev"], &rows)
        .map_err(physics)?;
    for r in &cmp.results {
        let name = format!("compare_rms_{}.csv", r.variant.to_string().to_ascii_lowercase());
        save_table(&ctx.path(&name), &["omega_r_mev", "rms_mev"], &fit_rows(r)).map_err(physics)?;
        println!("{:<18} Ω_R* = {:>10.6} meV  rms = {:>10.6} meV", r.variant.to_string(), r.omega_r_star, r.rms_star);
    }
    for f in &cmp.failures {
        eprintln!("warning: {} failed: {}", f.variant, f.message);
    }
    ctx.document("compare", &cmp)?;
    ctx.plot_script(
        "plot_compare.py",
        "for name in (\"full\", \"no_antires\", \"no_antires_no_dia\"):\n    path = os.path.join(HERE, \"compare_rms_%s.csv\" % name)\n    if os.path.exists(path):\n        rows = load(os.path.basename(path))\n        plt.plot([float(r[\"omega_r_mev\"]) for r in rows], [float(r[\"rms_mev\"]) for r in rows], label=name)\nplt.xlabel(\"vacuum Rabi energy (meV)\")\nplt.ylabel(\"RMS deviation (meV)\")\nplt.legend()\n",
    )?;
    if cmp.results.is_empty() {
        return Err(physics("every variant failed"));
    }
    Ok(())
}

fn deviation_cmd(ctx: &mut Context, args: DeviationArgs) -> Result<(), Failure> {
    let theta_res = args.theta_res.unwrap_or(ctx.config.cavity.theta_res);
    ctx.config.cavity.theta_res = theta_res;
    let params = ctx.config.system_params().map_err(usage)?;
    let table = deviation_vs_coupling(&params, &args.ratios.0, theta_res).map_err(|e| match e {
        crate::fit::FitError::Config { .. } => usage(e),
        other => physics(other),
    })?;
    let rows: Vec<Vec<f64>> =
        table.rows.iter().map(|r| std::iter::once(r.ratio).chain(r.deviations()).collect()).collect();
    let mut header = vec!["ratio"];
    header.extend(DEVIATION_LABELS);
    save_table(&ctx.path("deviation_map.csv"), &header, &rows).map_err(physics)?;
    for f in &table.flags {
        eprintln!("flag: {f}");
    }
    if let Some(max) = table.rows.iter().map(|r| r.max_abs_deviation()).reduce(f64::max) {
        println!("{} ratios, max |deviation| = {max:.4}%", table.rows.len());
    }
    ctx.document("deviation-map", &table)?;
    ctx.plot_script(
        "plot_deviation_map.py",
        "rows = load(\"deviation_map.csv\")\nr = [float(x[\"ratio\"]) for x in rows]\nfor name, style in ((\"no_antires_lp\", \"r-\"), (\"no_antires_up\", \"r--\"), (\"no_antires_no_dia_lp\", \"b-\"), (\"no_antires_no_dia_up\", \"b--\")):\n    plt.plot(r, [float(x[name]) for x in rows], style, label=name)\nplt.xlabel(\"coupling ratio\")\nplt.ylabel(\"deviation from full Hamiltonian (%)\")\nplt.legend()\n",
    )?;
    if !table.failures.is_empty() {
        return Err(physics(format!("{} ratio(s) failed; see deviation_map.json", table.failures.len())));
    }
    Ok(())
}

#[derive(Serialize)]
struct GroundStateRow {
    ratio: f64,
    omega_r: f64,
    e_lp: f64,
    e_up: f64,
    n_photon: f64,
    n_matter: f64,
}

fn ground_state_cmd(ctx: &mut Context, args: GroundStateArgs) -> Result<(), Failure> {
    let params = ctx.config.system_params().map_err(usage)?;
    let e_12 = params.e_12;
    let e_cav = e_12 + args.detuning;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &ratio in &args.ratios.0 {
        let omega_r = ratio * e_12;
        let d_dia = params.diamagnetic.energy(omega_r, e_12);
        let outcome = ModeInputs::new(e_cav, e_12, omega_r, d_dia)
            .and_then(|inputs| diagonalize_with(&inputs, args.variant, &params.tolerances));
        match outcome {
            Ok(modes) => {
                let pop = ground_state_populations(&modes);
                rows.push(GroundStateRow {
                    ratio,
                    omega_r,
                    e_lp: modes.e_lp,
                    e_up: modes.e_up,
                    n_photon: pop.n_photon,
                    n_matter: pop.n_matter,
                });
            }
            Err(e) => failures.push(json!({"ratio": ratio, "message": e.to_string()})),
        }
    }
    let table: Vec<Vec<f64>> =
        rows.iter().map(|r| vec![r.ratio, r.omega_r, r.e_lp, r.e_up, r.n_photon, r.n_matter]).collect();
    save_table(
        &ctx.path("ground_state.csv"),
        &["ratio", "omega_r_mev", "e_lp_mev", "e_up_mev", "n_photon", "n_matter"],
        &table,
    )
    .map_err(physics)?;
    if let Some(last) = rows.last() {
        println!("ratio {}: n_photon = {:.6e}, n_matter = {:.6e}", last.ratio, last.n_photon, last.n_matter);
    }
    ctx.document(
        "ground-state",
        &json!({"variant": args.variant, "detuning": args.detuning, "rows": rows, "failures": failures}),
    )?;
    ctx.plot_script(
        "plot_ground_state.py",
        "rows = load(\"ground_state.csv\")\nr = [float(x[\"ratio\"]) for x in rows]\nplt.semilogy(r, [max(float(x[\"n_photon\"]), 1e-16) for x in rows], label=\"photons\")\nplt.semilogy(r, [max(float(x[\"n_matter\"]), 1e-16) for x in rows], label=\"matter excitations\")\nplt.xlabel(\"coupling ratio\")\nplt.ylabel(\"ground-state population\")\nplt.legend()\n",
    )?;
    if !failures.is_empty() {
        return Err(physics(format!("{} ratio(s) failed; see ground_state.json", failures.len())));
    }
    Ok(())
}

fn oracle_cmd(ctx: &mut Context, args: OracleArgs) -> Result<(), Failure> {
    let ratios = args.ratios.map_or(CHECK_RATIOS.to_vec(), |v| v.0);
    let detunings = args.detunings.map_or(CHECK_DETUNINGS.to_vec(), |v| v.0);
    if args.threshold.is_nan() || args.threshold <= 0.0 {
        return Err(usage("threshold must be > 0"));
    }
    let report = oracle_check(
        ctx.config.system.e_12,
        &ratios,
        &detunings,
        args.variant,
        &ctx.config.oracle,
        &ctx.config.tolerances,
        args.threshold,
    )
    .map_err(usage)?;
    let rows: Vec<Vec<f64>> = report
        .cases
        .iter()
        .map(|c| {
            let o = c.oracle.as_ref();
            vec![
                c.ratio,
                c.detuning,
                c.e_lp,
                o.map_or(f64::NAN, |o| o.e_lp),
                c.e_up,
                o.map_or(f64::NAN, |o| o.e_up),
                c.n_photon,
                o.map_or(f64::NAN, |o| o.n_photon_gs),
                c.discrepancy,
            ]
        })
        .collect();
    save_table(
        &ctx.path("oracle_check.csv"),
        &[
            "ratio",
            "detuning_mev",
            "e_lp",
            "oracle_e_lp",
            "e_up",
            "oracle_e_up",
            "n_photon",
            "oracle_n_photon",
            "discrepancy",
        ],
        &rows,
    )
    .map_err(physics)?;
    println!(
        "{}: {} cases, max discrepancy {:.3e} (threshold {:.1e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.cases.len(),
        report.max_discrepancy,
        report.threshold
    );
    ctx.document("oracle-check", &report)?;
    if !report.passed {
        return Err(physics("oracle disagreement above threshold"));
    }
    Ok(())
}
