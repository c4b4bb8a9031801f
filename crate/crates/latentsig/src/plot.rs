//! Long-format plot data: header `series,x,y`, one row per point.

use anyhow::{bail, Result};

use latentsig_core::trainkit::TrainHistory;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotData {
    rows: Vec<(String, f64, f64)>,
}

impl PlotData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn series(&mut self, name: &str, points: impl IntoIterator<Item = (f64, f64)>) {
        self.rows.extend(points.into_iter().map(|(x, y)| (name.to_string(), x, y)));
    }

    pub fn series_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for (n, _, _) in &self.rows {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
        names
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        if self.rows.is_empty() {
            bail!("no plot data");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "x", "y"])?;
        for (s, x, y) in &self.rows {
            w.write_record([s.clone(), format!("{x:?}"), format!("{y:?}")])?;
        }
        Ok(w.into_inner()?)
    }
}

/// `train_elbo`, `val_elbo` (when present) and `beta` against epoch.
pub fn history_plot(h: &TrainHistory) -> Result<PlotData> {
    if h.is_empty() {
        bail!("empty training history");
    }
    let mut p = PlotData::new();
    let r = h.records();
    p.series("train_elbo", r.iter().map(|e| (e.epoch as f64, e.train_elbo)));
    if r.iter().all(|e| e.val_elbo.is_some()) {
        p.series("val_elbo", r.iter().map(|e| (e.epoch as f64, e.val_elbo.unwrap_or(f64::NAN))));
    }
    p.series("beta", r.iter().map(|e| (e.epoch as f64, e.beta)));
    Ok(p)
}

/// Reference, translated mean and translated spread over sample index.
pub fn overlay_plot(reference: &[f64], mean: &[f64], spread: &[f64]) -> Result<PlotData> {
    if reference.is_empty() || reference.len() != mean.len() || mean.len() != spread.len() {
        bail!("overlay series must be non-empty and equally long");
    }
    let mut p = PlotData::new();
    let idx = |v: &[f64]| v.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect::<Vec<_>>();
    p.series("reference", idx(reference));
    p.series("translated_mean", idx(mean));
    p.series("translated_spread", idx(spread));
    Ok(p)
}
