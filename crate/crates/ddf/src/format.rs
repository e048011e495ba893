//! Self-describing pdf documents (JSON) and grid CSV dumps.

use std::fs;
use std::io::Write;
use std::path::Path;

use ddf_core::hybrid::HybridBelief;
use ddf_core::pdf::{DiscreteDist, Gaussian, GaussianMixture, Grid, GridPdf};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Tolerance on stored probability vectors summing to one.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PdfDoc {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Gm { components: Vec<ComponentDoc> },
    Grid { bounds: Vec<[f64; 2]>, shape: Vec<usize>, mass: Vec<f64> },
    Discrete { probs: Vec<f64> },
    Hybrid { regions: Vec<f64>, conditionals: Vec<PdfDoc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// A parsed and validated pdf.
#[derive(Debug, Clone, PartialEq)]
pub enum Pdf {
    Gaussian(Gaussian),
    Mixture(GaussianMixture),
    Grid(GridPdf),
    Discrete(DiscreteDist),
    Hybrid(HybridBelief),
}

impl Pdf {
    pub fn kind(&self) -> &'static str {
        match self {
            Pdf::Gaussian(_) => "gaussian",
            Pdf::Mixture(_) => "gm",
            Pdf::Grid(_) => "grid",
            Pdf::Discrete(_) => "discrete",
            Pdf::Hybrid(_) => "hybrid",
        }
    }

    /// Views a `gaussian` or `gm` document as a mixture.
    pub fn into_mixture(self) -> Result<GaussianMixture> {
        match self {
            Pdf::Gaussian(g) => Ok(GaussianMixture::single(g)),
            Pdf::Mixture(m) => Ok(m),
            other => Err(Error::field("kind", format!("expected gaussian or gm, found {}", other.kind()))),
        }
    }

    pub fn to_doc(&self) -> PdfDoc {
        match self {
            Pdf::Gaussian(g) => PdfDoc::Gaussian { mean: g.mean().as_slice().to_vec(), cov: cov_rows(g) },
            Pdf::Mixture(m) => PdfDoc::Gm {
                components: m
                    .components()
                    .iter()
                    .map(|c| ComponentDoc {
                        weight: c.weight,
                        mean: c.gaussian.mean().as_slice().to_vec(),
                        cov: cov_rows(&c.gaussian),
                    })
                    .collect(),
            },
            Pdf::Grid(g) => grid_doc(g),
            Pdf::Discrete(d) => PdfDoc::Discrete { probs: d.probs().to_vec() },
            Pdf::Hybrid(h) => PdfDoc::Hybrid {
                regions: h.regions().probs().to_vec(),
                conditionals: h.conditionals().iter().map(grid_doc).collect(),
            },
        }
    }

    pub fn from_doc(doc: &PdfDoc) -> Result<Self> {
        from_doc_at(doc, "")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_doc()).expect("pdf documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let value: Value = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::field(if path == "." { "kind" } else { &path }, e.into_inner().to_string())
        })?;
        Self::from_doc(&parse_doc(value, "")?)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianBody {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GmBody {
    components: Vec<ComponentDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridBody {
    bounds: Vec<[f64; 2]>,
    shape: Vec<usize>,
    mass: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteBody {
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HybridBody {
    regions: Vec<f64>,
    conditionals: Vec<Value>,
}

fn body<T: serde::de::DeserializeOwned>(fields: Map<String, Value>, path: &str) -> Result<T> {
    serde_path_to_error::deserialize(Value::Object(fields)).map_err(|e| {
        let inner = e.path().to_string();
        let at = if inner == "." { path.to_string() } else { join(path, &inner) };
        Error::field(if at.is_empty() { "kind" } else { &at }, e.into_inner().to_string())
    })
}

// Tagged enums buffer their content and lose error paths, so the tag is
// dispatched by hand.
fn parse_doc(value: Value, path: &str) -> Result<PdfDoc> {
    let Value::Object(mut fields) = value else {
        return Err(Error::field(if path.is_empty() { "kind" } else { path }, "expected an object".into()));
    };
    let kind_field = join(path, "kind");
    let kind = match fields.remove("kind") {
        Some(Value::String(k)) => k,
        Some(other) => return Err(Error::field(&kind_field, format!("expected a string, found {other}"))),
        None => return Err(Error::field(&kind_field, "missing pdf kind".into())),
    };
    Ok(match kind.as_str() {
        "gaussian" => {
            let b: GaussianBody = body(fields, path)?;
            PdfDoc::Gaussian { mean: b.mean, cov: b.cov }
        }
        "gm" => PdfDoc::Gm { components: body::<GmBody>(fields, path)?.components },
        "grid" => {
            let b: GridBody = body(fields, path)?;
            PdfDoc::Grid { bounds: b.bounds, shape: b.shape, mass: b.mass }
        }
        "discrete" => PdfDoc::Discrete { probs: body::<DiscreteBody>(fields, path)?.probs },
        "hybrid" => {
            let b: HybridBody = body(fields, path)?;
            let conditionals = b
                .conditionals
                .into_iter()
                .enumerate()
                .map(|(r, c)| parse_doc(c, &format!("{}[{r}]", join(path, "conditionals"))))
                .collect::<Result<Vec<_>>>()?;
            PdfDoc::Hybrid { regions: b.regions, conditionals }
        }
        other => {
            return Err(Error::field(
                &kind_field,
                format!("unknown pdf kind `{other}`, expected one of gaussian, gm, grid, discrete, hybrid"),
            ))
        }
    })
}

impl From<GaussianMixture> for Pdf {
    fn from(m: GaussianMixture) -> Self {
        Pdf::Mixture(m)
    }
}

impl From<GridPdf> for Pdf {
    fn from(g: GridPdf) -> Self {
        Pdf::Grid(g)
    }
}

impl From<HybridBelief> for Pdf {
    fn from(h: HybridBelief) -> Self {
        Pdf::Hybrid(h)
    }
}

fn cov_rows(g: &Gaussian) -> Vec<Vec<f64>> {
    let c = g.cov();
    (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)]).collect()).collect()
}

fn grid_doc(g: &GridPdf) -> PdfDoc {
    PdfDoc::Grid {
        bounds: g.grid().bounds().iter().map(|&(lo, hi)| [lo, hi]).collect(),
        shape: g.grid().shape().to_vec(),
        mass: g.mass().to_vec(),
    }
}

fn join(prefix: &str, field: &str) -> String {
    if prefix.is_empty() {
        field.to_string()
    } else {
        format!("{prefix}.{field}")
    }
}

fn check_sum(path: &str, v: &[f64]) -> Result<()> {
    if let Some(i) = v.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::field(&format!("{path}[{i}]"), format!("{} is not a finite nonnegative number", v[i])));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::field(path, format!("values sum to {total}, expected 1")));
    }
    Ok(())
}

fn gaussian_at(mean: &[f64], cov: &[Vec<f64>], path: &str) -> Result<Gaussian> {
    let d = mean.len();
    if d == 0 {
        return Err(Error::field(&join(path, "mean"), "empty mean".into()));
    }
    if cov.len() != d || cov.iter().any(|row| row.len() != d) {
        return Err(Error::field(&join(path, "cov"), format!("expected a {d} x {d} matrix")));
    }
    let flat: Vec<f64> = cov.iter().flatten().copied().collect();
    Gaussian::from_slices(mean, &flat).map_err(|e| Error::field(&join(path, "cov"), e.to_string()))
}

fn from_doc_at(doc: &PdfDoc, path: &str) -> Result<Pdf> {
    match doc {
        PdfDoc::Gaussian { mean, cov } => Ok(Pdf::Gaussian(gaussian_at(mean, cov, path)?)),
        PdfDoc::Gm { components } => {
            let field = join(path, "components");
            if components.is_empty() {
                return Err(Error::field(&field, "no components".into()));
            }
            let weights: Vec<f64> = components.iter().map(|c| c.weight).collect();
            for (k, w) in weights.iter().enumerate() {
                if !(*w >= 0.0) || !w.is_finite() {
                    return Err(Error::field(&format!("{field}[{k}].weight"), format!("{w} is not a valid weight")));
                }
            }
            let total: f64 = weights.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return Err(Error::field(&format!("{field}[*].weight"), format!("weights sum to {total}, expected 1")));
            }
            let comps = components
                .iter()
                .enumerate()
                .map(|(k, c)| Ok((c.weight, gaussian_at(&c.mean, &c.cov, &format!("{field}[{k}]"))?)))
                .collect::<Result<Vec<_>>>()?;
            GaussianMixture::new(comps).map(Pdf::Mixture).map_err(|e| Error::field(&field, e.to_string()))
        }
        PdfDoc::Grid { bounds, shape, mass } => {
            let grid = Grid::new(bounds.iter().map(|b| (b[0], b[1])).collect(), shape.clone())
                .map_err(|e| Error::field(&join(path, "bounds"), e.to_string()))?;
            let field = join(path, "mass");
            if mass.len() != grid.len() {
                return Err(Error::field(&field, format!("{} values for {} cells", mass.len(), grid.len())));
            }
            check_sum(&field, mass)?;
            GridPdf::from_normalized(grid, mass.clone()).map(Pdf::Grid).map_err(|e| Error::field(&field, e.to_string()))
        }
        PdfDoc::Discrete { probs } => {
            let field = join(path, "probs");
            check_sum(&field, probs)?;
            DiscreteDist::new(probs.clone()).map(Pdf::Discrete).map_err(|e| Error::field(&field, e.to_string()))
        }
        PdfDoc::Hybrid { regions, conditionals } => {
            let field = join(path, "regions");
            check_sum(&field, regions)?;
            let dist = DiscreteDist::new(regions.clone()).map_err(|e| Error::field(&field, e.to_string()))?;
            let conds = conditionals
                .iter()
                .enumerate()
                .map(|(r, c)| {
                    let at = format!("{}[{r}]", join(path, "conditionals"));
                    match from_doc_at(c, &at)? {
                        Pdf::Grid(g) => Ok(g),
                        other => Err(Error::field(&join(&at, "kind"), format!("expected grid, found {}", other.kind()))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            HybridBelief::new(dist, conds)
                .map(Pdf::Hybrid)
                .map_err(|e| Error::field(&join(path, "conditionals"), e.to_string()))
        }
    }
}

pub fn read_pdf(path: &Path) -> Result<Pdf> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Pdf::from_json(&text).map_err(|e| e.in_file(path))
}

pub fn write_pdf(path: &Path, pdf: &Pdf) -> Result<()> {
    fs::write(path, pdf.to_json()).map_err(|e| Error::io(path, e))
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// One row per cell: centre coordinates then mass.
pub fn write_grid_csv<W: Write>(out: W, pdf: &GridPdf) -> Result<()> {
    let grid = pdf.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = AXES[..grid.ndim()].to_vec();
    header.push("mass");
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(grid.ndim() + 1);
    let mut result = Ok(());
    grid.for_each_center(|i, x| {
        if result.is_err() {
            return;
        }
        row.clear();
        row.extend(x.iter().map(|v| v.to_string()));
        row.push(pdf.mass()[i].to_string());
        result = w.write_record(&row);
    });
    result?;
    w.flush().map_err(|e| Error::Io { path: "<grid csv>".into(), source: e })?;
    Ok(())
}

pub fn write_grid_csv_file(path: &Path, pdf: &GridPdf) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_grid_csv(std::io::BufWriter::new(file), pdf)
}
