//! Artifact emission: JSON, markdown tables, long-format draw CSVs, and
//! self-contained SVG plots.

use crate::pipeline::{Bundle, ModelArtifacts};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct IoError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Json,
    MarkdownTables,
    CsvDraws,
    SvgPlots,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "markdown-tables" => Ok(Format::MarkdownTables),
            "csv-draws" => Ok(Format::CsvDraws),
            "svg-plots" => Ok(Format::SvgPlots),
            other => Err(format!(
                "unknown format `{other}` (expected json, markdown-tables, csv-draws, svg-plots)"
            )),
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), IoError> {
    std::fs::write(path, content).map_err(|source| IoError {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact types serialize");
    text.push('\n');
    write_file(path, &text)
}

fn safe_name(parameter: &str) -> String {
    parameter
        .replace(['[', ']'], "_")
        .trim_end_matches('_')
        .to_string()
}

/// Emit the requested formats for a complete bundle into `out_dir`. Always
/// writes `manifest.json` and `bundle.json`; everything else is
/// format-gated. Files are written in a fixed order.
pub fn emit_report(
    bundle: &Bundle,
    out_dir: &Path,
    formats: &BTreeSet<Format>,
) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(out_dir).map_err(|source| IoError {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    let emit = |path: PathBuf, content: String, written: &mut Vec<PathBuf>| {
        write_file(&path, &content)?;
        written.push(path);
        Ok::<(), IoError>(())
    };

    for model in &bundle.models {
        let label = model.kind.label();
        if formats.contains(&Format::Json) {
            let path = out_dir.join(format!("summary_{label}.json"));
            write_json(&path, &SummaryDoc::from(model))?;
            written.push(path);
            let path = out_dir.join(format!("diagnostics_{label}.json"));
            write_json(&path, &DiagnosticsDoc::from(model))?;
            written.push(path);
            let path = out_dir.join(format!("ppc_{label}.json"));
            write_json(&path, &model.ppc)?;
            written.push(path);
        }
        if formats.contains(&Format::MarkdownTables) {
            emit(
                out_dir.join(format!("summary_{label}.md")),
                summary_md(model),
                &mut written,
            )?;
            emit(
                out_dir.join(format!("diagnostics_{label}.md")),
                diagnostics_md(model),
                &mut written,
            )?;
            emit(
                out_dir.join(format!("ppc_{label}.md")),
                ppc_md(model),
                &mut written,
            )?;
        }
        if formats.contains(&Format::CsvDraws) {
            emit(
                out_dir.join(format!("draws_{label}.csv")),
                draws_csv(model),
                &mut written,
            )?;
        }
        if formats.contains(&Format::SvgPlots) {
            let plot_dir = out_dir.join("plots").join(label);
            std::fs::create_dir_all(&plot_dir).map_err(|source| IoError {
                path: plot_dir.display().to_string(),
                source,
            })?;
            for (idx, name) in model.draws.param_names.iter().enumerate() {
                let stem = safe_name(name);
                emit(
                    plot_dir.join(format!("{stem}_trace.svg")),
                    trace_svg(model, idx),
                    &mut written,
                )?;
                emit(
                    plot_dir.join(format!("{stem}_density.svg")),
                    density_svg(model, idx),
                    &mut written,
                )?;
            }
            emit(plot_dir.join("ppc.svg"), ppc_svg(model), &mut written)?;
        }
    }

    if let Some(comparison) = &bundle.comparison {
        if formats.contains(&Format::Json) {
            let path = out_dir.join("comparison.json");
            write_json(&path, comparison)?;
            written.push(path);
        }
        if formats.contains(&Format::MarkdownTables) {
            emit(
                out_dir.join("comparison.md"),
                comparison_md(comparison),
                &mut written,
            )?;
        }
        if formats.contains(&Format::SvgPlots) {
            let plot_dir = out_dir.join("plots");
            std::fs::create_dir_all(&plot_dir).map_err(|source| IoError {
                path: plot_dir.display().to_string(),
                source,
            })?;
            emit(
                plot_dir.join("comparison.svg"),
                comparison_svg(comparison),
                &mut written,
            )?;
        }
    }

    let path = out_dir.join("bundle.json");
    write_json(&path, bundle)?;
    written.push(path);
    let path = out_dir.join("manifest.json");
    write_json(&path, &bundle.manifest)?;
    written.push(path);
    Ok(written)
}

// ---- JSON documents ----

#[derive(Serialize)]
struct SummaryDoc<'a> {
    model: &'a str,
    summary: &'a [hierglm_core::SummaryRow],
    odds_ratios: &'a [crate::pipeline::OddsRatioRow],
    tail_probabilities: &'a [crate::pipeline::TailProbRow],
}

impl<'a> From<&'a ModelArtifacts> for SummaryDoc<'a> {
    fn from(m: &'a ModelArtifacts) -> Self {
        SummaryDoc {
            model: m.kind.label(),
            summary: &m.summary,
            odds_ratios: &m.odds_ratios,
            tail_probabilities: &m.tail_probs,
        }
    }
}

#[derive(Serialize)]
struct DiagnosticsDoc<'a> {
    model: &'a str,
    divergences: usize,
    parameters: Vec<DiagnosticsRow<'a>>,
}

#[derive(Serialize)]
struct DiagnosticsRow<'a> {
    parameter: &'a str,
    rhat: f64,
    ess_bulk: f64,
    ess_tail: f64,
}

impl<'a> From<&'a ModelArtifacts> for DiagnosticsDoc<'a> {
    fn from(m: &'a ModelArtifacts) -> Self {
        DiagnosticsDoc {
            model: m.kind.label(),
            divergences: m.divergences,
            parameters: m
                .summary
                .iter()
                .map(|row| DiagnosticsRow {
                    parameter: &row.parameter,
                    rhat: row.rhat,
                    ess_bulk: row.ess_bulk,
                    ess_tail: row.ess_tail,
                })
                .collect(),
        }
    }
}

// ---- markdown ----

fn summary_md(model: &ModelArtifacts) -> String {
    let mut out = format!("# Posterior summary: {} model\n\n", model.kind.label());
    out.push_str("| parameter | mean | sd | 95% HDI low | 95% HDI high |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &model.summary {
        writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:.3} | {:.3} |",
            row.parameter, row.mean, row.sd, row.hdi_low, row.hdi_high
        )
        .unwrap();
    }
    out.push_str(
        "\n## Odds ratios\n\n| parameter | e^mean | HDI low | HDI high |\n|---|---|---|---|\n",
    );
    for row in &model.odds_ratios {
        writeln!(
            out,
            "| {} | {:.3} | {:.3} | {:.3} |",
            row.parameter, row.odds_ratio, row.hdi_low, row.hdi_high
        )
        .unwrap();
    }
    out.push_str("\n## Tail probabilities\n\n| parameter | P(>0) | P(<0) |\n|---|---|---|\n");
    for row in &model.tail_probs {
        writeln!(
            out,
            "| {} | {:.4} | {:.4} |",
            row.parameter, row.prob_positive, row.prob_negative
        )
        .unwrap();
    }
    out
}

fn diagnostics_md(model: &ModelArtifacts) -> String {
    let mut out = format!(
        "# Convergence diagnostics: {} model\n\nDivergent transitions: {}\n\n",
        model.kind.label(),
        model.divergences
    );
    out.push_str("| parameter | r-hat | ESS bulk | ESS tail |\n|---|---|---|---|\n");
    for row in &model.summary {
        writeln!(
            out,
            "| {} | {:.4} | {:.0} | {:.0} |",
            row.parameter, row.rhat, row.ess_bulk, row.ess_tail
        )
        .unwrap();
    }
    out
}

fn ppc_md(model: &ModelArtifacts) -> String {
    let ppc = &model.ppc;
    let mut out = format!(
        "# Posterior predictive check: {} model\n\n",
        model.kind.label()
    );
    writeln!(
        out,
        "- Observed cancellation rate: {:.4}",
        ppc.observed_rate
    )
    .unwrap();
    writeln!(out, "- Mean replicate rate: {:.4}", ppc.rate_mean).unwrap();
    writeln!(
        out,
        "- 95% HDI of replicate rates: [{:.4}, {:.4}]",
        ppc.rate_hdi.0, ppc.rate_hdi.1
    )
    .unwrap();
    writeln!(
        out,
        "- Group rates (resort, city): replicated ({:.4}, {:.4}) vs observed ({:.4}, {:.4})",
        ppc.group_rate_means[0],
        ppc.group_rate_means[1],
        ppc.observed_group_rates[0],
        ppc.observed_group_rates[1]
    )
    .unwrap();
    out
}

fn comparison_md(rows: &[hierglm_core::ComparisonRow]) -> String {
    let mut out = String::from("# Model comparison (WAIC)\n\n");
    out.push_str("| rank | model | elpd_waic | p_waic | se | elpd_diff | d_se |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for row in rows {
        writeln!(
            out,
            "| {} | {} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} |",
            row.rank, row.model, row.elpd_waic, row.p_waic, row.se, row.elpd_diff, row.d_se
        )
        .unwrap();
    }
    out
}

// ---- CSV ----

fn draws_csv(model: &ModelArtifacts) -> String {
    let draws = &model.draws;
    let mut out = String::from("chain,draw,parameter,value\n");
    for (chain_idx, chain) in draws.draws.iter().enumerate() {
        for (draw_idx, values) in chain.iter().enumerate() {
            for (param_idx, value) in values.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    chain_idx, draw_idx, draws.param_names[param_idx], value
                )
                .unwrap();
            }
        }
    }
    out
}

// ---- SVG ----

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;
const CHAIN_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
    )
}

struct Scale {
    min: f64,
    span: f64,
    lo_px: f64,
    span_px: f64,
}

impl Scale {
    fn new(min: f64, max: f64, lo_px: f64, hi_px: f64) -> Self {
        let span = if max > min { max - min } else { 1.0 };
        Scale {
            min,
            span,
            lo_px,
            span_px: hi_px - lo_px,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.lo_px + (v - self.min) / self.span * self.span_px
    }
}

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Per-chain draw traces; exactly one polyline per chain.
fn trace_svg(model: &ModelArtifacts, param: usize) -> String {
    let name = &model.draws.param_names[param];
    let chains = model.draws.param_matrix(param);
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let min = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x = Scale::new(
        0.0,
        (chains[0].len() - 1).max(1) as f64,
        MARGIN,
        WIDTH - MARGIN,
    );
    // SVG y grows downward, so the value axis maps high values to small y.
    let y = Scale::new(min, max, HEIGHT - MARGIN, MARGIN);

    let mut out = svg_open(&format!("Trace: {} ({})", name, model.kind.label()));
    for (chain_idx, chain) in chains.iter().enumerate() {
        let points: Vec<(f64, f64)> = chain
            .iter()
            .enumerate()
            .map(|(i, &v)| (x.map(i as f64), y.map(v)))
            .collect();
        out.push_str(&polyline(
            &points,
            CHAIN_COLORS[chain_idx % CHAIN_COLORS.len()],
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn gaussian_kde(samples: &[f64], grid: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let bw = (1.06 * sd * n.powf(-0.2)).max(1e-12);
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    let xs: Vec<f64> = (0..grid)
        .map(|i| min + (max - min) * i as f64 / (grid - 1) as f64)
        .collect();
    let norm = 1.0 / (n * bw * (2.0 * std::f64::consts::PI).sqrt());
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| (-0.5 * ((x - s) / bw).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    (xs, ys)
}

/// Pooled posterior density with the 95% HDI shaded.
fn density_svg(model: &ModelArtifacts, param: usize) -> String {
    let name = &model.draws.param_names[param];
    let flat = model.draws.param_flat(param);
    let (xs, ys) = gaussian_kde(&flat, 200);
    let y_max = ys.iter().cloned().fold(0.0f64, f64::max);
    let x = Scale::new(xs[0], xs[xs.len() - 1], MARGIN, WIDTH - MARGIN);
    let y = Scale::new(0.0, y_max, HEIGHT - MARGIN, MARGIN);
    let row = &model.summary[param];

    let mut out = svg_open(&format!("Density: {} ({})", name, model.kind.label()));
    // HDI shading under the curve.
    let mut shade: Vec<(f64, f64)> = vec![(x.map(row.hdi_low), y.map(0.0))];
    for (&xv, &yv) in xs.iter().zip(&ys) {
        if xv >= row.hdi_low && xv <= row.hdi_high {
            shade.push((x.map(xv), y.map(yv)));
        }
    }
    shade.push((x.map(row.hdi_high), y.map(0.0)));
    let coords: Vec<String> = shade
        .iter()
        .map(|(px, py)| format!("{px:.2},{py:.2}"))
        .collect();
    writeln!(
        out,
        "<polygon fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\" points=\"{}\"/>",
        coords.join(" ")
    )
    .unwrap();
    let curve: Vec<(f64, f64)> = xs
        .iter()
        .zip(&ys)
        .map(|(&xv, &yv)| (x.map(xv), y.map(yv)))
        .collect();
    out.push_str(&polyline(&curve, "#1f77b4"));
    out.push_str("</svg>\n");
    out
}

/// Forest-style WAIC comparison: elpd point with +-1 SE whisker per model.
fn comparison_svg(rows: &[hierglm_core::ComparisonRow]) -> String {
    let lo = rows
        .iter()
        .map(|r| r.elpd_waic - r.se)
        .fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|r| r.elpd_waic + r.se)
        .fold(f64::NEG_INFINITY, f64::max);
    let x = Scale::new(lo, hi, 160.0, WIDTH - MARGIN);
    let mut out = svg_open("Model comparison (elpd_waic, +-1 SE)");
    for (i, row) in rows.iter().enumerate() {
        let cy = 70.0 + i as f64 * 60.0;
        writeln!(
            out,
            "<text x=\"{MARGIN}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            cy + 4.0,
            row.model
        )
        .unwrap();
        writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{cy:.2}\" x2=\"{:.2}\" y2=\"{cy:.2}\" stroke=\"#333\" stroke-width=\"2\"/>",
            x.map(row.elpd_waic - row.se),
            x.map(row.elpd_waic + row.se)
        )
        .unwrap();
        writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"#1f77b4\"/>",
            x.map(row.elpd_waic)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram of replicate rates with the observed rate marked.
fn ppc_svg(model: &ModelArtifacts) -> String {
    let ppc = &model.ppc;
    let rates = &ppc.replicate_rates;
    let min = rates
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(ppc.observed_rate);
    let max = rates
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(ppc.observed_rate);
    let bins = 40usize;
    let span = if max > min { max - min } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &r in rates {
        let b = (((r - min) / span * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(1) as f64;
    let x = Scale::new(min, max, MARGIN, WIDTH - MARGIN);
    let y = Scale::new(0.0, peak, HEIGHT - MARGIN, MARGIN);

    let mut out = svg_open(&format!("PPC replicate rates ({})", model.kind.label()));
    let bin_w = (WIDTH - 2.0 * MARGIN) / bins as f64;
    for (i, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let px = x.map(min + span * i as f64 / bins as f64);
        let py = y.map(count as f64);
        writeln!(
            out,
            "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>",
            bin_w - 1.0,
            (HEIGHT - MARGIN) - py
        )
        .unwrap();
    }
    let ox = x.map(ppc.observed_rate);
    writeln!(
        out,
        "<line x1=\"{ox:.2}\" y1=\"{MARGIN}\" x2=\"{ox:.2}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>",
        HEIGHT - MARGIN
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}
