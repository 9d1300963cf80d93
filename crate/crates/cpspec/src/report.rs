//! File outputs: sample/truth/result CSVs, batch summaries, and gnuplot
//! companion scripts.
//!
//! All floats go through Rust's shortest-roundtrip formatting and rows are
//! emitted in deterministic order, so a rerun with the same inputs produces
//! byte-identical files. Complex cells use the compact `re+imj` form;
//! samples and ground truth keep real and imaginary parts in separate
//! columns for easy ingestion.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cpspec_core::signal::{SampleSet, Sinusoid};
use cpspec_core::Complex64;

use crate::harness::{PointSummary, TrialRecord};

/// `re+imj`, e.g. `1.5+0.25j` or `-2-3j`.
pub fn format_complex(z: Complex64) -> String {
    if z.im < 0.0 {
        format!("{}{}j", z.re, z.im)
    } else {
        format!("{}+{}j", z.re, z.im)
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating directory {}", dir.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Ground-truth sidecar location for a samples file: `x.csv` maps to
/// `x.truth.csv`.
pub fn sidecar_path(samples: &Path) -> PathBuf {
    match samples.extension().and_then(|e| e.to_str()) {
        Some(ext) => samples.with_extension(format!("truth.{ext}")),
        None => samples.with_extension("truth"),
    }
}

/// Renders observed samples as `index,re,im` rows under a `# n_total`
/// comment.
pub fn render_samples(samples: &SampleSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# n_total = {}", samples.n_total());
    let _ = writeln!(s, "index,re,im");
    for &(n, v) in samples.observations() {
        let _ = writeln!(s, "{n},{},{}", v.re, v.im);
    }
    s
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    write_file(path, &render_samples(samples))
}

/// Contents of a samples CSV: the observations plus the `n_total` comment
/// when present.
pub struct SamplesFile {
    pub observations: Vec<(usize, Complex64)>,
    pub n_total: Option<usize>,
}

/// Reads a samples CSV back.
pub fn read_samples(path: &Path) -> Result<SamplesFile> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut n_total = None;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "n_total" {
                    n_total = Some(value.trim().parse().with_context(|| {
                        format!("line {}: bad n_total `{}`", idx + 1, value.trim())
                    })?);
                }
            }
            continue;
        }
        if !header_seen {
            if line != "index,re,im" {
                bail!("line {}: expected header `index,re,im`, got `{line}`", idx + 1);
            }
            header_seen = true;
            continue;
        }
        let mut parts = line.split(',');
        let (Some(n), Some(re), Some(im), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            bail!("line {}: expected `index,re,im`, got `{line}`", idx + 1);
        };
        rows.push((
            n.trim()
                .parse()
                .with_context(|| format!("line {}: bad index `{n}`", idx + 1))?,
            Complex64::new(
                re.trim()
                    .parse()
                    .with_context(|| format!("line {}: bad re `{re}`", idx + 1))?,
                im.trim()
                    .parse()
                    .with_context(|| format!("line {}: bad im `{im}`", idx + 1))?,
            ),
        ));
    }
    if !header_seen {
        bail!("{}: no `index,re,im` header found", path.display());
    }
    Ok(SamplesFile {
        observations: rows,
        n_total,
    })
}

/// Renders the generating model: `omega,amp_re,amp_im` rows under
/// `# n_total` and `# noise_sigma` comments (sigma 0 for noiseless data).
pub fn render_truth(components: &[Sinusoid], n_total: usize, noise_sigma: Option<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# n_total = {n_total}");
    let _ = writeln!(s, "# noise_sigma = {}", noise_sigma.unwrap_or(0.0));
    let _ = writeln!(s, "omega,amp_re,amp_im");
    for c in components {
        let _ = writeln!(s, "{},{},{}", c.omega, c.amplitude.re, c.amplitude.im);
    }
    s
}

pub fn write_truth(
    path: &Path,
    components: &[Sinusoid],
    n_total: usize,
    noise_sigma: Option<f64>,
) -> Result<()> {
    write_file(path, &render_truth(components, n_total, noise_sigma))
}

/// Reads a ground-truth sidecar: components, `n_total`, and `noise_sigma`.
pub fn read_truth(path: &Path) -> Result<(Vec<Sinusoid>, Option<usize>, Option<f64>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut n_total = None;
    let mut noise_sigma = None;
    let mut components = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "n_total" => n_total = Some(value.trim().parse()?),
                    "noise_sigma" => noise_sigma = Some(value.trim().parse()?),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line != "omega,amp_re,amp_im" {
                bail!(
                    "line {}: expected header `omega,amp_re,amp_im`, got `{line}`",
                    idx + 1
                );
            }
            header_seen = true;
            continue;
        }
        let mut parts = line.split(',');
        let (Some(omega), Some(re), Some(im), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            bail!("line {}: expected `omega,amp_re,amp_im`, got `{line}`", idx + 1);
        };
        components.push(Sinusoid {
            omega: omega.trim().parse()?,
            amplitude: Complex64::new(re.trim().parse()?, im.trim().parse()?),
        });
    }
    if !header_seen {
        bail!("{}: no `omega,amp_re,amp_im` header found", path.display());
    }
    Ok((components, n_total, noise_sigma))
}

/// Renders the per-index reconstruction table. The `observed` column is
/// blank at unobserved indices; the resynthesis column is blank throughout
/// when that route failed.
pub fn render_result(
    samples: &SampleSet,
    average: &[Complex64],
    resynthesis: Option<&[Complex64]>,
) -> String {
    let mut observed = vec![None; samples.n_total() + 1];
    for &(n, v) in samples.observations() {
        observed[n] = Some(v);
    }
    let mut s = String::new();
    let _ = writeln!(s, "index,observed,tensor_average,model_resynthesis");
    for n in 1..=samples.n_total() {
        let obs = observed[n].map(format_complex).unwrap_or_default();
        let rs = resynthesis
            .map(|r| format_complex(r[n - 1]))
            .unwrap_or_default();
        let _ = writeln!(s, "{n},{obs},{},{rs}", format_complex(average[n - 1]));
    }
    s
}

pub fn write_result(
    path: &Path,
    samples: &SampleSet,
    average: &[Complex64],
    resynthesis: Option<&[Complex64]>,
) -> Result<()> {
    write_file(path, &render_result(samples, average, resynthesis))
}

/// Phase-transition summary: one row per grid point.
pub fn render_phase_csv(points: &[PointSummary]) -> String {
    let mut s = String::from("k,m,trials,successes,success_rate,mean_rsnr_db,feasible\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.k, p.m, p.trials, p.successes, p.success_rate, p.mean_rsnr_db, p.feasible
        );
    }
    s
}

pub fn write_phase_csv(path: &Path, points: &[PointSummary]) -> Result<()> {
    write_file(path, &render_phase_csv(points))
}

/// Sweep summary: one row per axis point with RSNR statistics.
pub fn render_sweep_csv(points: &[PointSummary]) -> String {
    let mut s =
        String::from("k,m,snr_db,trials,success_rate,mean_rsnr_db,median_rsnr_db,std_rsnr_db\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.k,
            p.m,
            opt_f64(p.snr_db),
            p.trials,
            p.success_rate,
            p.mean_rsnr_db,
            p.median_rsnr_db,
            p.std_rsnr_db
        );
    }
    s
}

pub fn write_sweep_csv(path: &Path, points: &[PointSummary]) -> Result<()> {
    write_file(path, &render_sweep_csv(points))
}

/// Per-trial records. Wall time is intentionally omitted so the file is
/// byte-identical across reruns and machines.
pub fn render_trials_csv(records: &[TrialRecord]) -> String {
    let mut s = String::from(
        "k,m,snr_db,seed,success,normalized_error,rsnr_db,rank_estimate,iterations\n",
    );
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.k,
            r.m,
            opt_f64(r.snr_db),
            r.seed,
            r.success,
            r.normalized_error,
            r.rsnr_db,
            r.rank_estimate,
            r.iterations
        );
    }
    s
}

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_file(path, &render_trials_csv(records))
}

/// Gnuplot script plotting the success-rate map from a phase CSV.
pub fn render_phase_plot(csv_name: &str) -> String {
    format!(
        "# Success-rate map; run `gnuplot {csv_name}.gp` next to the CSV.\n\
         set datafile separator ','\n\
         set key off\n\
         set xlabel 'measurements M'\n\
         set ylabel 'components K'\n\
         set cblabel 'success rate'\n\
         set cbrange [0:1]\n\
         set palette defined (0 'black', 1 'white')\n\
         set view map\n\
         splot '{csv_name}' skip 1 using 2:1:5 with points pt 5 ps 2 palette\n\
         pause -1\n"
    )
}

/// Gnuplot script plotting mean/median RSNR against the sweep axis
/// (column 3 = SNR, column 2 = M).
pub fn render_sweep_plot(csv_name: &str, axis_column: usize, axis_label: &str) -> String {
    format!(
        "# RSNR sweep; run `gnuplot {csv_name}.gp` next to the CSV.\n\
         set datafile separator ','\n\
         set xlabel '{axis_label}'\n\
         set ylabel 'RSNR (dB)'\n\
         set key left top\n\
         plot '{csv_name}' skip 1 using {axis_column}:6 with linespoints title 'mean', \\\n\
              '{csv_name}' skip 1 using {axis_column}:7 with linespoints title 'median'\n\
         pause -1\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn samples() -> SampleSet {
        SampleSet::new(
            5,
            vec![
                (2, Complex64::new(0.5, -1.25)),
                (4, Complex64::new(-2.0, 0.0)),
            ],
            Some(0.01),
        )
        .unwrap()
    }

    #[test]
    fn complex_formatting() {
        assert_eq!(format_complex(Complex64::new(1.5, 0.25)), "1.5+0.25j");
        assert_eq!(format_complex(Complex64::new(-2.0, -3.0)), "-2-3j");
        assert_eq!(format_complex(Complex64::new(0.0, 0.0)), "0+0j");
        assert_eq!(format_complex(Complex64::new(-1.0, 2.0)), "-1+2j");
    }

    #[test]
    fn samples_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let set = samples();
        write_samples(&path, &set).unwrap();
        let file = read_samples(&path).unwrap();
        assert_eq!(file.n_total, Some(5));
        assert_eq!(file.observations, set.observations().to_vec());
    }

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.truth.csv");
        let comps = vec![
            Sinusoid {
                omega: 0.7,
                amplitude: Complex64::new(1.0, -0.5),
            },
            Sinusoid {
                omega: 2.1,
                amplitude: Complex64::new(0.0, 2.0),
            },
        ];
        write_truth(&path, &comps, 127, Some(0.003)).unwrap();
        let (got, n, sigma) = read_truth(&path).unwrap();
        assert_eq!(n, Some(127));
        assert_eq!(sigma, Some(0.003));
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].omega, 0.7);
        assert_eq!(got[1].amplitude, Complex64::new(0.0, 2.0));
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(
            sidecar_path(Path::new("out/samples.csv")),
            Path::new("out/samples.truth.csv")
        );
        assert_eq!(sidecar_path(Path::new("samples")), Path::new("samples.truth"));
    }

    #[test]
    fn result_table_layout() {
        let set = samples();
        let avg: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let text = render_result(&set, &avg, None);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,observed,tensor_average,model_resynthesis");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "1,,0+0j,");
        assert_eq!(lines[2], "2,0.5-1.25j,1+0j,");
        assert_eq!(lines[4], "4,-2+0j,3+0j,");
        let with_resynth = render_result(&set, &avg, Some(&avg));
        assert!(with_resynth.lines().nth(1).unwrap().ends_with(",0+0j"));
    }

    #[test]
    fn csv_headers_and_recomputable_success() {
        let record = TrialRecord {
            k: 3,
            m: 20,
            snr_db: None,
            seed: 42,
            success: true,
            normalized_error: 5e-4,
            rsnr_db: 66.0,
            rank_estimate: 3,
            iterations: 120,
            wall_time: Duration::from_millis(5),
        };
        let text = render_trials_csv(&[record]);
        assert_eq!(
            text.lines().next().unwrap(),
            "k,m,snr_db,seed,success,normalized_error,rsnr_db,rank_estimate,iterations"
        );
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row, "3,20,,42,true,0.0005,66,3,120");
        // The stored flag matches the stored error against the threshold.
        let fields: Vec<&str> = row.split(',').collect();
        let err: f64 = fields[5].parse().unwrap();
        let flag: bool = fields[4].parse().unwrap();
        assert_eq!(flag, err < 1e-3);
        // No wall-time column anywhere.
        assert!(!text.contains("wall"));
    }

    #[test]
    fn summary_csv_shapes() {
        let point = PointSummary {
            k: 3,
            m: 25,
            snr_db: Some(40.0),
            trials: 20,
            successes: 19,
            success_rate: 0.95,
            mean_rsnr_db: 41.5,
            median_rsnr_db: 42.0,
            std_rsnr_db: 1.25,
            feasible: true,
        };
        let phase = render_phase_csv(std::slice::from_ref(&point));
        assert_eq!(
            phase.lines().next().unwrap(),
            "k,m,trials,successes,success_rate,mean_rsnr_db,feasible"
        );
        assert_eq!(phase.lines().nth(1).unwrap(), "3,25,20,19,0.95,41.5,true");
        let sweep = render_sweep_csv(&[point]);
        assert_eq!(
            sweep.lines().nth(1).unwrap(),
            "3,25,40,20,0.95,41.5,42,1.25"
        );
    }
}
