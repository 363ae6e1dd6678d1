//! Per-frame timing rows, per-combination aggregates and their CSV/JSON
//! emission.

use std::path::Path;
use std::time::Duration;

use lodsplat::metrics::KpcHistogram;
use lodsplat::raster::RenderStats;
use serde::{Serialize, Serializer};

/// Milliseconds rounded to three decimals.
pub fn ms(d: Duration) -> f64 {
    round3(d.as_nanos() as f64 / 1e6)
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// One rendered frame. Column names are the report's public interface.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FrameRow {
    pub frame: usize,
    pub filter_mode: String,
    pub shrink_mode: String,
    pub T_calcu: f64,
    pub T_synch: f64,
    pub T_prepr: f64,
    pub T_sort: f64,
    pub T_alpha: f64,
    pub T_total: f64,
    pub N_P: usize,
    pub N_low: u64,
    pub barriers: u32,
}

impl FrameRow {
    pub fn new(frame: usize, filter_mode: &str, shrink_mode: &str, stats: &RenderStats, n_low: u64) -> Self {
        let stages = [stats.t_calc, stats.t_sync, stats.t_prepr, stats.t_sort, stats.t_alpha].map(ms);
        Self {
            frame,
            filter_mode: filter_mode.to_owned(),
            shrink_mode: shrink_mode.to_owned(),
            T_calcu: stages[0],
            T_synch: stages[1],
            T_prepr: stages[2],
            T_sort: stages[3],
            T_alpha: stages[4],
            T_total: round3(stages.iter().sum()),
            N_P: stats.n_pairs,
            N_low: n_low,
            barriers: stats.barriers,
        }
    }
}

fn inf_as_text<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

/// Formats a PSNR value, spelling infinity as `inf`.
pub fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub filter_mode: String,
    pub shrink_mode: String,
    pub tau: Option<f64>,
    pub frames: usize,
    /// Frame count over cumulative `T_total`.
    pub fps: f64,
    pub mean_n_p: f64,
    pub mean_n_low: f64,
    pub mean_barriers: f64,
    /// Mean PSNR against the reference render; `inf` if every frame matched.
    #[serde(serialize_with = "inf_as_text")]
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub kpc_histogram: KpcHistogram,
}

impl Aggregate {
    pub fn from_rows(rows: &[FrameRow], tau: Option<f64>, quality: Option<(f64, f64)>, kpc_histogram: KpcHistogram) -> Self {
        let n = rows.len().max(1) as f64;
        let total_ms: f64 = rows.iter().map(|r| r.T_total).sum();
        let fps = if total_ms > 0.0 { rows.len() as f64 / (total_ms / 1000.0) } else { f64::INFINITY };
        Self {
            filter_mode: rows.first().map(|r| r.filter_mode.clone()).unwrap_or_default(),
            shrink_mode: rows.first().map(|r| r.shrink_mode.clone()).unwrap_or_default(),
            tau,
            frames: rows.len(),
            fps,
            mean_n_p: rows.iter().map(|r| r.N_P as f64).sum::<f64>() / n,
            mean_n_low: rows.iter().map(|r| r.N_low as f64).sum::<f64>() / n,
            mean_barriers: rows.iter().map(|r| r.barriers as f64).sum::<f64>() / n,
            psnr: quality.map(|q| q.0),
            ssim: quality.map(|q| q.1),
            kpc_histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<FrameRow>,
    pub aggregates: Vec<Aggregate>,
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(CsvRow(r))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["filter_mode", "shrink_mode", "tau", "frames", "fps", "mean_N_P", "mean_N_low", "mean_barriers", "psnr", "ssim"])?;
        for a in &self.aggregates {
            let opt = |v: Option<f64>, f: fn(f64) -> String| v.map(f).unwrap_or_default();
            w.write_record([
                a.filter_mode.clone(),
                a.shrink_mode.clone(),
                opt(a.tau, |t| format!("{t:.6}")),
                a.frames.to_string(),
                format!("{:.3}", a.fps),
                format!("{:.3}", a.mean_n_p),
                format!("{:.3}", a.mean_n_low),
                format!("{:.3}", a.mean_barriers),
                opt(a.psnr, fmt_db),
                opt(a.ssim, |s| format!("{s:.6}")),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// CSV view of a row with times fixed at three decimals.
struct CsvRow<'a>(&'a FrameRow);

impl Serialize for CsvRow<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let r = self.0;
        let mut st = s.serialize_struct("FrameRow", 12)?;
        st.serialize_field("frame", &r.frame)?;
        st.serialize_field("filter_mode", &r.filter_mode)?;
        st.serialize_field("shrink_mode", &r.shrink_mode)?;
        st.serialize_field("T_calcu", &format!("{:.3}", r.T_calcu))?;
        st.serialize_field("T_synch", &format!("{:.3}", r.T_synch))?;
        st.serialize_field("T_prepr", &format!("{:.3}", r.T_prepr))?;
        st.serialize_field("T_sort", &format!("{:.3}", r.T_sort))?;
        st.serialize_field("T_alpha", &format!("{:.3}", r.T_alpha))?;
        st.serialize_field("T_total", &format!("{:.3}", r.T_total))?;
        st.serialize_field("N_P", &r.N_P)?;
        st.serialize_field("N_low", &r.N_low)?;
        st.serialize_field("barriers", &r.barriers)?;
        st.end()
    }
}
