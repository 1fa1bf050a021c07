//! Subcommand implementations. Every command writes machine-readable
//! artifacts to the requested paths and keeps human chatter on stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use photonstat::blinking::{fit_off_cdf, intensity_histogram, off_cdf, segment, BlinkState};
use photonstat::corr::{clean_background, correlate, g2_zero, normalize_peaks, G2Result};
use photonstat::flid::flid;
use photonstat::kde::GridSpec;
use photonstat::lifetime::{
    average_lifetime, decay_histogram, fit_saturation, fit_triexp, LifetimeAverage, Weighting,
};
use photonstat::sim::{simulate, EmitterModel};
use photonstat::spectra::{cohort_stats, peak_metrics, PeakMethod, PeakMetrics, Spectrum};
use photonstat::stream::{read_stream, write_stream, PhotonStream, StreamFormat};

use crate::args::*;
use crate::profiles;
use crate::timeparse::parse_ps;

/// Whether all numerical stages converged; non-convergence still writes
/// artifacts but exits with code 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdStatus {
    Ok,
    NonConverged,
}

pub struct Ctx {
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, text: &str) {
        if !self.quiet {
            println!("{text}");
        }
    }
}

fn stream_format(path: &Path) -> Result<StreamFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("psph") => Ok(StreamFormat::Binary),
        Some("tsv") => Ok(StreamFormat::Tsv),
        other => bail!(
            "cannot infer stream format of `{}` (extension {:?}); use .psph or .tsv",
            path.display(),
            other
        ),
    }
}

fn load_stream(path: &Path) -> Result<PhotonStream> {
    read_stream(path, stream_format(path)?)
        .with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn simulate_cmd(ctx: &Ctx, args: &SimulateArgs) -> Result<CmdStatus> {
    let text = fs::read_to_string(&args.model)
        .with_context(|| format!("reading {}", args.model.display()))?;
    let model = EmitterModel::from_json(&text)?;
    let duration = parse_ps(&args.duration)?;
    let seed = ctx.seed.unwrap_or(model.seed);
    let stream = simulate(&model, duration, seed)?;
    write_stream(&stream, &args.out, stream_format(&args.out)?)?;
    ctx.say(&format!(
        "simulated {} photons over {:.1} s (seed {seed}) -> {}",
        stream.len(),
        duration as f64 / 1e12,
        args.out.display()
    ));
    Ok(CmdStatus::Ok)
}

#[derive(Serialize)]
struct G2Document {
    bin_width_ps: u64,
    max_delay_ps: u64,
    rep_period_ps: u64,
    stage: photonstat::corr::Stage,
    background_cleaned: bool,
    reference_delay_ps: Option<u64>,
    /// Delay of the first bin edge; bin k spans
    /// `[tau_start + k·bin, tau_start + (k+1)·bin)`.
    tau_start_ps: i64,
    values: Vec<f64>,
    g2: G2Result,
}

pub fn g2_cmd(ctx: &Ctx, args: &G2Args) -> Result<CmdStatus> {
    let stream = load_stream(&args.input)?;
    if !stream.is_pulsed() {
        bail!("g2 normalization needs pulsed data (rep_period_ps > 0)");
    }
    let period = stream.rep_period_ps;
    let bin = parse_ps(&args.bin)?;
    let max_delay = match &args.max_delay {
        Some(text) => parse_ps(text)?,
        None => 25 * period,
    };
    let reference_delay = match &args.reference_delay {
        Some(text) => parse_ps(text)?,
        None => 10 * period,
    };
    let mut hist = correlate(&stream, bin, max_delay)?;
    if args.clean {
        hist = clean_background(&hist, None)?;
    }
    let norm = normalize_peaks(&hist, period, reference_delay)?;
    let g2 = g2_zero(&norm, args.side_peaks)?;
    ctx.say(&format!(
        "g2(0) = {:.4} (center {:.4} / side {:.4}, {} side peaks{})",
        g2.g2_zero,
        g2.center_area,
        g2.mean_side_area,
        g2.n_side_peaks_used,
        if g2.background_cleaned {
            ", background-cleaned"
        } else {
            ""
        }
    ));
    let doc = G2Document {
        bin_width_ps: norm.bin_width_ps,
        max_delay_ps: norm.max_delay_ps,
        rep_period_ps: norm.rep_period_ps,
        stage: norm.stage,
        background_cleaned: norm.background_cleaned,
        reference_delay_ps: norm.reference_delay_ps,
        tau_start_ps: -(norm.max_delay_ps as i64),
        values: norm.counts.clone(),
        g2,
    };
    write_json(&args.json, &doc)?;
    Ok(CmdStatus::Ok)
}

#[derive(Serialize)]
struct DecayDocument {
    bin_width_ps: u64,
    n_bins: usize,
    total_counts: f64,
    fit: photonstat::lifetime::TriExpFit,
    tau_avg_amplitude_ns: Option<f64>,
    tau_avg_intensity_ns: Option<f64>,
}

pub fn decay_cmd(ctx: &Ctx, args: &DecayArgs) -> Result<CmdStatus> {
    let stream = load_stream(&args.input)?;
    let bin = parse_ps(&args.bin)?;
    let hist = decay_histogram(&stream, bin)?;
    let weighting = if args.unweighted {
        Weighting::Uniform
    } else {
        Weighting::Poisson
    };
    let fit = fit_triexp(&hist, None, weighting)?;
    let doc = DecayDocument {
        bin_width_ps: hist.bin_width_ps,
        n_bins: hist.n_bins(),
        total_counts: hist.total_counts(),
        tau_avg_amplitude_ns: average_lifetime(&fit, LifetimeAverage::AmplitudeWeighted).ok(),
        tau_avg_intensity_ns: average_lifetime(&fit, LifetimeAverage::IntensityWeighted).ok(),
        fit,
    };
    ctx.say(&format!(
        "lifetimes {:.2}/{:.2}/{:.2} ns, amplitudes {:.3}/{:.3}/{:.3}, avg {} ns{}",
        doc.fit.lifetimes_ns[0],
        doc.fit.lifetimes_ns[1],
        doc.fit.lifetimes_ns[2],
        doc.fit.amplitudes[0],
        doc.fit.amplitudes[1],
        doc.fit.amplitudes[2],
        doc.tau_avg_amplitude_ns
            .map_or("n/a".into(), |v| format!("{v:.2}")),
        if doc.fit.converged {
            ""
        } else {
            " [NOT CONVERGED]"
        }
    ));
    let converged = doc.fit.converged;
    write_json(&args.json, &doc)?;
    Ok(if converged {
        CmdStatus::Ok
    } else {
        CmdStatus::NonConverged
    })
}

pub fn satfit_cmd(ctx: &Ctx, args: &SatfitArgs) -> Result<CmdStatus> {
    let text = fs::read_to_string(&args.csv)
        .with_context(|| format!("reading {}", args.csv.display()))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || (i == 0 && t.starts_with("power")) {
            continue;
        }
        let (p, v) = t
            .split_once(',')
            .with_context(|| format!("line {}: expected `power,intensity`", i + 1))?;
        points.push((p.trim().parse::<f64>()?, v.trim().parse::<f64>()?));
    }
    let fit = fit_saturation(&points)?;
    ctx.say(&format!(
        "A = {:.4}, B = {:.4}, P_sat = {:.4}{}",
        fit.a,
        fit.b,
        fit.p_sat,
        if fit.converged { "" } else { " [NOT CONVERGED]" }
    ));
    let converged = fit.converged;
    write_json(&args.json, &fit)?;
    Ok(if converged {
        CmdStatus::Ok
    } else {
        CmdStatus::NonConverged
    })
}

#[derive(Serialize)]
struct BlinkDocument {
    bin_width_ps: u64,
    threshold_counts_per_bin: u32,
    n_bins: usize,
    n_on_bins: usize,
    n_off_bins: usize,
    n_off_events: usize,
    fit: photonstat::blinking::PowerLawFit,
    off_durations_s: Vec<f64>,
    off_survival: Vec<f64>,
    /// `[counts_per_bin, occurrences]` rows of the intensity histogram.
    intensity_histogram: Vec<(u32, u64)>,
}

pub fn blink_cmd(ctx: &Ctx, args: &BlinkArgs) -> Result<CmdStatus> {
    let stream = load_stream(&args.input)?;
    let bin = parse_ps(&args.bin)?;
    let trace = photonstat::stream::bin_intensity(&stream, bin, None)?;
    let seg = segment(&trace, args.threshold);
    let cdf = off_cdf(&seg)?;
    let fit = fit_off_cdf(&cdf)?;
    let histogram: Vec<(u32, u64)> = intensity_histogram(&trace).into_iter().collect();
    let bins_of = |state: BlinkState| {
        seg.segments
            .iter()
            .filter(|s| s.state == state)
            .map(|s| s.len_bins)
            .sum::<usize>()
    };
    ctx.say(&format!(
        "m_off = {:.3}, tau_c = {:.3} s over {} OFF events{}{}",
        fit.m_off,
        fit.tau_c_s,
        cdf.n_events,
        if fit.levy_like { " [Levy-like]" } else { "" },
        if fit.converged { "" } else { " [NOT CONVERGED]" }
    ));
    let converged = fit.converged;
    let doc = BlinkDocument {
        bin_width_ps: bin,
        threshold_counts_per_bin: args.threshold,
        n_bins: seg.n_bins,
        n_on_bins: bins_of(BlinkState::On),
        n_off_bins: bins_of(BlinkState::Off),
        n_off_events: cdf.n_events,
        fit,
        off_durations_s: cdf.durations_s,
        off_survival: cdf.probabilities,
        intensity_histogram: histogram,
    };
    write_json(&args.json, &doc)?;
    Ok(if converged {
        CmdStatus::Ok
    } else {
        CmdStatus::NonConverged
    })
}

fn parse_grid(text: &str) -> Result<GridSpec<f64>> {
    let (nx, ny) = text
        .split_once(['x', 'X'])
        .with_context(|| format!("grid `{text}` should look like 128x128"))?;
    let nx: usize = nx.trim().parse()?;
    let ny: usize = ny.trim().parse()?;
    if nx < 8 || ny < 8 {
        bail!("grid {nx}x{ny} too small");
    }
    Ok(GridSpec {
        nx,
        ny,
        x_range: None,
        y_range: None,
    })
}

pub fn flid_cmd(ctx: &Ctx, args: &FlidArgs) -> Result<CmdStatus> {
    let stream = load_stream(&args.input)?;
    let bin = parse_ps(&args.bin)?;
    let spec = parse_grid(&args.grid)?;
    let map = flid(&stream, bin, &spec)?;
    if let Some(dir) = args.csv.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut out = fs::File::create(&args.csv)
        .with_context(|| format!("writing {}", args.csv.display()))?;
    writeln!(out, "intensity,lifetime_ns,density")?;
    for iy in 0..map.grid.ny {
        for ix in 0..map.grid.nx {
            writeln!(
                out,
                "{},{},{}",
                map.grid.x_center(ix),
                map.grid.y_center(iy),
                map.grid.value(ix, iy)
            )?;
        }
    }
    ctx.say(&format!(
        "{} FLID points, bandwidths ({:.2} counts, {:.3} ns) -> {}",
        map.points.len(),
        map.bandwidth_intensity,
        map.bandwidth_lifetime_ns,
        args.csv.display()
    ));
    Ok(CmdStatus::Ok)
}

pub fn spectrum_cmd(ctx: &Ctx, args: &SpectrumArgs) -> Result<CmdStatus> {
    let spectrum = Spectrum::from_csv_file(&args.csv)?;
    let method = match args.method {
        Method::Gaussian => PeakMethod::GaussianFit,
        Method::Halfmax => PeakMethod::HalfMaxInterpolation,
    };
    let metrics = peak_metrics(&spectrum, method)?;
    ctx.say(&format!(
        "CEW {:.2} nm, FWHM {:.2} nm",
        metrics.cew_nm, metrics.fwhm_nm
    ));
    write_json(&args.json, &metrics)?;
    Ok(CmdStatus::Ok)
}

/// Minimal glob: literal path, or `*` wildcards inside the file name.
fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>> {
    let path = Path::new(pattern);
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .context("empty glob pattern")?;
    if !name.contains('*') {
        return Ok(vec![path.to_path_buf()]);
    }
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let pieces: Vec<&str> = name.split('*').collect();
    let matches_pattern = |candidate: &str| -> bool {
        let mut rest = candidate;
        if !rest.starts_with(pieces[0]) {
            return false;
        }
        rest = &rest[pieces[0].len()..];
        for piece in &pieces[1..pieces.len() - 1] {
            match rest.find(piece) {
                Some(at) => rest = &rest[at + piece.len()..],
                None => return false,
            }
        }
        rest.ends_with(pieces[pieces.len() - 1])
    };
    let mut found = Vec::new();
    for entry in fs::read_dir(&dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        if let Some(n) = entry.file_name().to_str() {
            if matches_pattern(n) {
                found.push(entry.path());
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn cohort_cmd(ctx: &Ctx, args: &CohortArgs) -> Result<CmdStatus> {
    let paths = expand_glob(&args.glob)?;
    if paths.is_empty() {
        bail!("glob `{}` matched no files", args.glob);
    }
    #[derive(serde::Deserialize)]
    struct MetricsIn {
        cew_nm: f64,
        fwhm_nm: f64,
    }
    let mut metrics = Vec::new();
    for path in &paths {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let m: MetricsIn = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        metrics.push(PeakMetrics {
            cew_nm: m.cew_nm,
            fwhm_nm: m.fwhm_nm,
            method: PeakMethod::GaussianFit,
        });
    }
    let stats = cohort_stats(&metrics)?;
    ctx.say(&format!(
        "{} emitters: CEW {:.1} ± {:.1} nm, FWHM {:.1} ± {:.1} nm",
        stats.n, stats.mean_cew_nm, stats.std_cew_nm, stats.mean_fwhm_nm, stats.std_fwhm_nm
    ));
    write_json(&args.json, &stats)?;
    Ok(CmdStatus::Ok)
}

pub fn convert_cmd(ctx: &Ctx, args: &ConvertArgs) -> Result<CmdStatus> {
    let stream = load_stream(&args.input)?;
    write_stream(&stream, &args.out, stream_format(&args.out)?)?;
    ctx.say(&format!(
        "converted {} records -> {}",
        stream.len(),
        args.out.display()
    ));
    Ok(CmdStatus::Ok)
}

#[derive(Serialize)]
struct ReproCheck {
    observable: String,
    target: f64,
    tolerance: f64,
    measured: f64,
    pass: bool,
}

#[derive(Serialize)]
struct ReproSummary {
    profile: String,
    seed: u64,
    duration_ps: u64,
    photons: usize,
    g2_zero: f64,
    tau_avg_amplitude_ns: Option<f64>,
    m_off: f64,
    tau_c_s: f64,
    levy_like: bool,
    n_off_events: usize,
    flid_points: usize,
    checks: Vec<ReproCheck>,
}

pub fn repro_cmd(ctx: &Ctx, args: &ReproArgs) -> Result<CmdStatus> {
    let profile = profiles::bundled(args.profile);
    let model = EmitterModel::from_json(profile.model_json)?;
    let duration = parse_ps(&args.duration)?;
    let seed = ctx.seed.unwrap_or(model.seed);
    fs::create_dir_all(&args.out_dir)?;
    let path = |name: &str| args.out_dir.join(name);

    ctx.say(&format!(
        "profile {}: simulating {:.0} s at seed {seed}",
        profile.name,
        duration as f64 / 1e12
    ));
    let stream = simulate(&model, duration, seed)?;
    write_stream(&stream, &path("run.psph"), StreamFormat::Binary)?;

    // g2 stage
    let period = model.rep_period_ps;
    let hist = correlate(&stream, profile.g2_bin_ps, 25 * period)?;
    let cleaned = clean_background(&hist, None)?;
    let norm = normalize_peaks(&cleaned, period, 10 * period)?;
    let g2 = g2_zero(&norm, 20)?;
    write_json(
        &path("g2.json"),
        &G2Document {
            bin_width_ps: norm.bin_width_ps,
            max_delay_ps: norm.max_delay_ps,
            rep_period_ps: norm.rep_period_ps,
            stage: norm.stage,
            background_cleaned: norm.background_cleaned,
            reference_delay_ps: norm.reference_delay_ps,
            tau_start_ps: -(norm.max_delay_ps as i64),
            values: norm.counts.clone(),
            g2: g2.clone(),
        },
    )?;

    // decay stage
    let decay = decay_histogram(&stream, 100)?;
    let fit = fit_triexp(&decay, None, Weighting::Poisson)?;
    let tau_avg = average_lifetime(&fit, LifetimeAverage::AmplitudeWeighted).ok();
    let mut all_converged = fit.converged;
    write_json(
        &path("decay.json"),
        &DecayDocument {
            bin_width_ps: decay.bin_width_ps,
            n_bins: decay.n_bins(),
            total_counts: decay.total_counts(),
            tau_avg_amplitude_ns: tau_avg,
            tau_avg_intensity_ns: average_lifetime(&fit, LifetimeAverage::IntensityWeighted)
                .ok(),
            fit: fit.clone(),
        },
    )?;

    // blinking stage
    let trace = photonstat::stream::bin_intensity(&stream, profile.blink_bin_ps, None)?;
    let seg = segment(&trace, profile.blink_threshold);
    let cdf = off_cdf(&seg)?;
    let blink_fit = fit_off_cdf(&cdf)?;
    all_converged &= blink_fit.converged;
    let histogram: Vec<(u32, u64)> = intensity_histogram(&trace).into_iter().collect();
    write_json(
        &path("blink.json"),
        &BlinkDocument {
            bin_width_ps: profile.blink_bin_ps,
            threshold_counts_per_bin: profile.blink_threshold,
            n_bins: seg.n_bins,
            n_on_bins: seg
                .segments
                .iter()
                .filter(|s| s.state == BlinkState::On)
                .map(|s| s.len_bins)
                .sum(),
            n_off_bins: seg
                .segments
                .iter()
                .filter(|s| s.state == BlinkState::Off)
                .map(|s| s.len_bins)
                .sum(),
            n_off_events: cdf.n_events,
            fit: blink_fit.clone(),
            off_durations_s: cdf.durations_s.clone(),
            off_survival: cdf.probabilities.clone(),
            intensity_histogram: histogram,
        },
    )?;

    // FLID stage
    let map = flid(&stream, 10_000_000_000, &GridSpec::square(128))?;
    {
        let mut out = fs::File::create(path("flid.csv"))?;
        writeln!(out, "intensity,lifetime_ns,density")?;
        for iy in 0..map.grid.ny {
            for ix in 0..map.grid.nx {
                writeln!(
                    out,
                    "{},{},{}",
                    map.grid.x_center(ix),
                    map.grid.y_center(iy),
                    map.grid.value(ix, iy)
                )?;
            }
        }
    }

    // target comparisons
    let mut checks = vec![ReproCheck {
        observable: "g2_zero".into(),
        target: profile.g2_target,
        tolerance: profile.g2_tolerance,
        measured: g2.g2_zero,
        pass: (g2.g2_zero - profile.g2_target).abs() <= profile.g2_tolerance,
    }];
    if let Some((m_target, tau_target)) = profile.blink_target {
        checks.push(ReproCheck {
            observable: "m_off".into(),
            target: m_target,
            tolerance: 0.10,
            measured: blink_fit.m_off,
            pass: (blink_fit.m_off - m_target).abs() <= 0.10,
        });
        checks.push(ReproCheck {
            observable: "tau_c_s".into(),
            target: tau_target,
            tolerance: 0.30 * tau_target,
            measured: blink_fit.tau_c_s,
            pass: (blink_fit.tau_c_s - tau_target).abs() <= 0.30 * tau_target,
        });
    }
    if profile.blink_target.is_some() {
        checks.push(ReproCheck {
            observable: "levy_like".into(),
            target: f64::from(u8::from(profile.levy_expected)),
            tolerance: 0.0,
            measured: f64::from(u8::from(blink_fit.levy_like)),
            pass: blink_fit.levy_like == profile.levy_expected,
        });
    }
    if let Some(tau) = tau_avg {
        let target = profile.lifetime_target_ns;
        checks.push(ReproCheck {
            observable: "tau_avg_ns".into(),
            target,
            tolerance: 0.15 * target,
            measured: tau,
            pass: (tau - target).abs() <= 0.15 * target,
        });
    }

    if !ctx.quiet {
        println!("observable      target      measured    verdict");
        for c in &checks {
            println!(
                "{:<15} {:<11.4} {:<11.4} {}",
                c.observable,
                c.target,
                c.measured,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
    }

    let summary = ReproSummary {
        profile: profile.name.into(),
        seed,
        duration_ps: duration,
        photons: stream.len(),
        g2_zero: g2.g2_zero,
        tau_avg_amplitude_ns: tau_avg,
        m_off: blink_fit.m_off,
        tau_c_s: blink_fit.tau_c_s,
        levy_like: blink_fit.levy_like,
        n_off_events: cdf.n_events,
        flid_points: map.points.len(),
        checks,
    };
    write_json(&path("summary.json"), &summary)?;
    ctx.say(&format!("artifacts in {}", args.out_dir.display()));
    Ok(if all_converged {
        CmdStatus::Ok
    } else {
        CmdStatus::NonConverged
    })
}
