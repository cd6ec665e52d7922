//! Single solves, parameter sweeps, CSV records and SVG charts.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{CoarseVariant, JhatSign, PrecondKind, ProblemConfig, TwoLevelForm};
use crate::error::{Error, Result};
use crate::gmres::gmres_solve;
use crate::grid::TimePartition;
use crate::heat::HeatOperators;
use crate::kkt::{self, RhsBundle};
use crate::schur::SchurSolver;

/// Largest adjoint block the dense preconditioners accept.
pub const DENSE_LIMIT: usize = 4096;

/// One solve: the configuration plus what came out of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub config: ProblemConfig,
    pub iterations: usize,
    pub converged: bool,
    pub true_final_relres: f64,
    pub objective: f64,
    pub zero_control_objective: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    /// Set when the run failed before or during GMRES.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// `[u, z, w]` stacked.
    pub solution: Vec<f64>,
    pub residual_history: Vec<f64>,
}

fn build_schur<'a>(ops: &'a HeatOperators, partition: &'a TimePartition, c: &ProblemConfig) -> Result<Option<SchurSolver<'a>>> {
    let dense_ok = || {
        if ops.len() > DENSE_LIMIT {
            Err(Error::Config(format!(
                "{} needs a dense {}x{} matrix; limit is {}",
                c.precond,
                ops.len(),
                ops.len(),
                DENSE_LIMIT
            )))
        } else {
            Ok(())
        }
    };
    Ok(Some(match c.precond {
        PrecondKind::None => return Ok(None),
        PrecondKind::OneLevel => SchurSolver::one_level(ops, partition),
        PrecondKind::TwoLevel => SchurSolver::two_level(ops, partition, c.coarse_variant, c.two_level_form, c.coarse_order)?,
        PrecondKind::DenseSchur => {
            dense_ok()?;
            SchurSolver::dense_schur_approx(ops, partition)?
        }
        PrecondKind::TrueSchur => {
            dense_ok()?;
            SchurSolver::dense_true_schur(ops, partition)?
        }
    }))
}

/// Builds operators and preconditioner for `config`, solves the KKT system
/// with the default data and reports the result.
pub fn run_solve(config: &ProblemConfig) -> Result<RunOutcome> {
    config.validate()?;
    let setup = Instant::now();
    let ops = HeatOperators::new(config)?;
    let partition = TimePartition::with_tie_break(config.nt, config.nd, ops.n_sp(), config.tie_break)?;
    let schur = build_schur(&ops, &partition, config)?;
    let rhs = kkt::assemble_rhs(&ops, kkt::default_initial_condition, kkt::default_target);
    let target = RhsBundle::target_samples(&ops, kkt::default_target);
    let b = rhs.to_kkt().into_vec();
    let setup_seconds = setup.elapsed().as_secs_f64();

    let solve = Instant::now();
    let op = |x: &[f64], y: &mut [f64]| kkt::apply_k(&ops, x, y);
    let res = match &schur {
        Some(s) => gmres_solve(op, |x: &[f64], y: &mut [f64]| kkt::apply_p_inv(&ops, s, x, y), &b, &config.gmres)?,
        None => gmres_solve(
            op,
            |x: &[f64], y: &mut [f64]| {
                y.copy_from_slice(x);
                Ok(())
            },
            &b,
            &config.gmres,
        )?,
    };
    let solve_seconds = solve.elapsed().as_secs_f64();

    let n = ops.len();
    let objective = kkt::evaluate_objective(&ops, &res.solution[..n], &res.solution[n..2 * n], &target)?;
    let zero_control_objective = kkt::zero_control_objective(&ops, &rhs, &target)?;
    Ok(RunOutcome {
        record: RunRecord {
            config: config.clone(),
            iterations: res.iterations,
            converged: res.converged,
            true_final_relres: res.true_final_relres,
            objective,
            zero_control_objective,
            setup_seconds,
            solve_seconds,
            error: None,
        },
        solution: res.solution,
        residual_history: res.residual_history,
    })
}

/// Like [`run_solve`] but never fails: errors become a non-converged record.
pub fn run_record(config: &ProblemConfig) -> RunRecord {
    match run_solve(config) {
        Ok(out) => out.record,
        Err(e) => RunRecord {
            config: config.clone(),
            iterations: match e {
                Error::Divergence { iteration } => iteration,
                _ => 0,
            },
            converged: false,
            true_final_relres: f64::NAN,
            objective: f64::NAN,
            zero_control_objective: f64::NAN,
            setup_seconds: 0.0,
            solve_seconds: 0.0,
            error: Some(e.to_string()),
        },
    }
}

/// A sweep point that was not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub nt: usize,
    pub omega: f64,
    pub precond: PrecondKind,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    pub skipped: Vec<Skipped>,
}

impl SweepOutput {
    pub fn rows(&self) -> Vec<CsvRow> {
        self.records.iter().map(CsvRow::from).collect()
    }
}

pub const DEFAULT_NT_LIST: [usize; 6] = [100, 200, 400, 800, 1600, 3200];
pub const DEFAULT_WEAK_OMEGAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const DEFAULT_SWEEP_OMEGAS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Runs every `(precond, omega, nt)` with `nd = nt / steps_per_subdomain`.
/// Records come out ordered by precond, then omega, then nt, in list order.
pub fn weak_scaling(
    base: &ProblemConfig,
    steps_per_subdomain: usize,
    nt_list: &[usize],
    omega_list: &[f64],
    precond_list: &[PrecondKind],
    mut on_record: impl FnMut(&RunRecord),
) -> Result<SweepOutput> {
    if steps_per_subdomain == 0 {
        return Err(Error::Config("steps per subdomain must be at least 1".into()));
    }
    let mut out = SweepOutput::default();
    for &precond in precond_list {
        for &omega in omega_list {
            for &nt in nt_list {
                if nt < steps_per_subdomain || nt % steps_per_subdomain != 0 {
                    out.skipped.push(Skipped {
                        nt,
                        omega,
                        precond,
                        reason: format!("nt={nt} is not a positive multiple of {steps_per_subdomain} steps per subdomain"),
                    });
                    continue;
                }
                let config = ProblemConfig {
                    nt,
                    nd: nt / steps_per_subdomain,
                    omega,
                    precond,
                    ..base.clone()
                };
                let rec = run_record(&config);
                on_record(&rec);
                out.records.push(rec);
            }
        }
    }
    Ok(out)
}

/// Runs every `(precond, omega)` at the fixed `nt`, `nd` of `base`.
pub fn omega_sweep(
    base: &ProblemConfig,
    omega_list: &[f64],
    precond_list: &[PrecondKind],
    mut on_record: impl FnMut(&RunRecord),
) -> Result<SweepOutput> {
    base.validate()?;
    let mut out = SweepOutput::default();
    for &precond in precond_list {
        for &omega in omega_list {
            let config = ProblemConfig {
                omega,
                precond,
                ..base.clone()
            };
            let rec = run_record(&config);
            on_record(&rec);
            out.records.push(rec);
        }
    }
    Ok(out)
}

pub const CSV_HEADER: [&str; 14] = [
    "nt",
    "nd",
    "steps_per_subdomain",
    "omega",
    "precond",
    "coarse_variant",
    "two_level_form",
    "jhat_sign",
    "iters",
    "converged",
    "final_relres",
    "objective",
    "setup_s",
    "solve_s",
];

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub nt: usize,
    pub nd: usize,
    pub steps_per_subdomain: usize,
    pub omega: f64,
    pub precond: PrecondKind,
    pub coarse_variant: CoarseVariant,
    pub two_level_form: TwoLevelForm,
    pub jhat_sign: JhatSign,
    pub iters: usize,
    pub converged: bool,
    pub final_relres: f64,
    pub objective: f64,
    pub setup_s: f64,
    pub solve_s: f64,
}

impl From<&RunRecord> for CsvRow {
    fn from(r: &RunRecord) -> Self {
        let c = &r.config;
        Self {
            nt: c.nt,
            nd: c.nd,
            steps_per_subdomain: if c.nd > 0 { c.nt / c.nd } else { 0 },
            omega: c.omega,
            precond: c.precond,
            coarse_variant: c.coarse_variant,
            two_level_form: c.two_level_form,
            jhat_sign: c.jhat_sign,
            iters: r.iterations,
            converged: r.converged,
            final_relres: r.true_final_relres,
            objective: r.objective,
            setup_s: r.setup_seconds,
            solve_s: r.solve_seconds,
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        line,
        message: e.to_string(),
    }
}

/// Writes rows with plain decimal numbers (no exponent notation).
pub fn write_csv<W: Write>(rows: &[CsvRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.nt.to_string(),
            r.nd.to_string(),
            r.steps_per_subdomain.to_string(),
            r.omega.to_string(),
            r.precond.to_string(),
            r.coarse_variant.to_string(),
            r.two_level_form.to_string(),
            r.jhat_sign.to_string(),
            r.iters.to_string(),
            r.converged.to_string(),
            r.final_relres.to_string(),
            r.objective.to_string(),
            r.setup_s.to_string(),
            r.solve_s.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Csv {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

/// Horizontal axis of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartAxis {
    Nt,
    InverseOmega,
}

impl ChartAxis {
    /// Uses `1/omega` when every row shares one `nt` but omega varies.
    pub fn infer(rows: &[CsvRow]) -> Self {
        let same_nt = rows.windows(2).all(|w| w[0].nt == w[1].nt);
        let varied_omega = rows.windows(2).any(|w| w[0].omega != w[1].omega);
        if !rows.is_empty() && same_nt && varied_omega {
            ChartAxis::InverseOmega
        } else {
            ChartAxis::Nt
        }
    }
}

struct Series {
    precond: PrecondKind,
    omega: f64,
    label: String,
    points: Vec<(f64, f64)>,
}

fn dash_for(omega: f64) -> &'static str {
    let e = -omega.log10();
    match e.round() as i64 {
        2 => "",
        3 => "8,4",
        4 => "2,3",
        5 => "12,3,2,3",
        6 => "4,2,1,2",
        _ => "1,1",
    }
}

fn color_for(k: usize) -> &'static str {
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    COLORS[k % COLORS.len()]
}

fn marker(out: &mut String, precond: PrecondKind, x: f64, y: f64, color: &str) {
    match precond {
        PrecondKind::OneLevel => {
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="{color}"/>"#);
        }
        PrecondKind::TwoLevel => {
            let _ = writeln!(
                out,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="{color}"/>"#,
                x,
                y - 5.0,
                x - 4.5,
                y + 3.5,
                x + 4.5,
                y + 3.5
            );
        }
        _ => {
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="none" stroke="{color}"/>"#,
                x - 3.5,
                y - 3.5
            );
        }
    }
}

/// Deterministic SVG line chart of iterations against `nt` or `1/omega`
/// (log scale). Non-converged runs are left out.
pub fn render_chart(rows: &[CsvRow], axis: ChartAxis) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 170.0;
    const T: f64 = 30.0;
    const B: f64 = 60.0;

    let mut series: Vec<Series> = Vec::new();
    for r in rows.iter().filter(|r| r.converged) {
        let x = match axis {
            ChartAxis::Nt => r.nt as f64,
            ChartAxis::InverseOmega => 1.0 / r.omega,
        };
        let (key_omega, label) = match axis {
            ChartAxis::Nt => (r.omega, format!("{} w={}", r.precond, r.omega)),
            ChartAxis::InverseOmega => (f64::NAN, format!("{} nt={} nd={}", r.precond, r.nt, r.nd)),
        };
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((x, r.iters as f64)),
            None => series.push(Series {
                precond: r.precond,
                omega: key_omega,
                label,
                points: vec![(x, r.iters as f64)],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (mut lo, mut hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (lo, hi) = (1.0, 10.0);
    }
    let (mut dlo, mut dhi) = (lo.log10().floor(), hi.log10().ceil());
    if dhi <= dlo {
        dhi = dlo + 1.0;
    }
    if dlo == dhi {
        dlo -= 1.0;
    }
    let ymax_data = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).fold(0.0, f64::max);
    let ymax = if ymax_data > 0.0 { (ymax_data * 1.1 / 10.0).ceil() * 10.0 } else { 10.0 };

    let px = |x: f64| L + (x.log10() - dlo) / (dhi - dlo) * (W - L - R);
    let py = |y: f64| H - B - y / ymax * (H - T - B);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{L},{T} L{L},{:.2} L{:.2},{:.2}" fill="none" stroke="black"/>"#,
        H - B,
        W - R,
        H - B
    );
    let mut d = dlo;
    while d <= dhi + 0.5 {
        let x = L + (d - dlo) / (dhi - dlo) * (W - L - R);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, H - B, H - B + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{}</text>"#, H - B + 20.0, d as i64);
        d += 1.0;
    }
    for k in 0..=5 {
        let v = ymax * k as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{y:.2}" x2="{L}" y2="{y:.2}" stroke="black"/>"#, L - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, L - 8.0, y + 4.0, v);
    }
    let xlabel = match axis {
        ChartAxis::Nt => "time steps",
        ChartAxis::InverseOmega => "1/omega",
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text>"#,
        L + (W - L - R) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">iterations</text>"#,
        T + (H - T - B) / 2.0,
        T + (H - T - B) / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = color_for(k);
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let dash = if s.omega.is_nan() { "" } else { dash_for(s.omega) };
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}"{dash_attr}/>"#,
            pts.join(" ")
        );
        for &(x, y) in &s.points {
            marker(&mut out, s.precond, px(x), py(y), color);
        }
        let ly = T + 10.0 + 18.0 * k as f64;
        let lx = W - R + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}"{dash_attr}/>"#,
            lx + 25.0
        );
        marker(&mut out, s.precond, lx + 12.5, ly, color);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 30.0, ly + 4.0, s.label);
    }
    out.push_str("</svg>\n");
    out
}
