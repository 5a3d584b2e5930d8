//! On-disk formats: points, isometries, flags, boundary data and chains.
//! Every load validates; NaN and infinities are rejected everywhere.

use hypgrass::boundary::{BoundaryPoint, IsotropicFlag};
use hypgrass::cat0::ConvexSet;
use hypgrass::kfields::{KKind, KStructure};
use hypgrass::{FlatChart, Point, TolProfile, Xpq};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::emit::{digest, Json};

/// Errors carry the process exit code: 2 for input problems.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn from_core(e: hypgrass::Error) -> CliError {
    use hypgrass::Error as E;
    let code = match e {
        E::NonConvergence { .. } | E::AngleClampExceeded { .. } | E::Numerics(_) => 3,
        _ => 2,
    };
    CliError {
        code,
        message: e.to_string(),
    }
}

#[derive(Deserialize)]
pub struct PointFile {
    pub p: usize,
    pub q: usize,
    pub field: String,
    pub frame: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
pub struct IsometryFile {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
pub struct FlagFile {
    pub p: usize,
    pub q: usize,
    pub subspaces: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
pub struct BoundaryFile {
    pub base: PointFile,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainSetFile {
    Ball { center: PointFile, radius: f64 },
    Horoball { xi: BoundaryFile, level: f64 },
}

#[derive(Deserialize)]
pub struct ChainFile {
    pub sets: Vec<ChainSetFile>,
}

pub struct Loaded<T> {
    pub value: T,
    pub digest: Json,
}

pub fn read_file(path: &str) -> CliResult<(String, Json)> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read {path}: {e}")))?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::input(format!("{path} is not valid UTF-8")))?;
    let d = Json::Str(digest(text.as_bytes()));
    Ok((text, d))
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(path: &str, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| {
        CliError::input(format!(
            "{path}: malformed JSON at line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::input(format!("{what}: empty matrix")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::input(format!("{what}: ragged rows")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::input(format!("{what}: non-finite entry")));
    }
    let mut m = DMatrix::zeros(rows.len(), cols);
    for (i, r) in rows.iter().enumerate() {
        for (j, &x) in r.iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    Ok(m)
}

/// A loaded point: real points carry their space, K-points their structure
/// and stacked frame.
pub enum AnyPoint {
    Real { space: Xpq, point: Point },
    K { ks: KStructure, kframe: DMatrix<f64> },
}

impl AnyPoint {
    pub fn require_real(self, what: &str) -> CliResult<(Xpq, Point)> {
        match self {
            AnyPoint::Real { space, point } => Ok((space, point)),
            AnyPoint::K { .. } => Err(CliError::input(format!(
                "{what} requires a real point; realify complex/quaternionic inputs first"
            ))),
        }
    }
}

pub fn load_point(path: &str, tol: &TolProfile) -> CliResult<Loaded<AnyPoint>> {
    let (text, d) = read_file(path)?;
    let pf: PointFile = parse_json(path, &text)?;
    let kind = KKind::from_name(&pf.field)
        .ok_or_else(|| CliError::input(format!("{path}: unknown field {:?}", pf.field)))?;
    let frame = rows_to_matrix(&pf.frame, path)?;
    let dim = (pf.p + pf.q) * kind.d();
    if frame.nrows() != dim || frame.ncols() != pf.p {
        return Err(CliError::input(format!(
            "{path}: frame must be {dim} x {}, got {} x {}",
            pf.p,
            frame.nrows(),
            frame.ncols()
        )));
    }
    let value = match kind {
        KKind::R => {
            let space = Xpq::with_profile(pf.p, pf.q, tol.clone()).map_err(from_core)?;
            let point = space.point_from_frame(frame).map_err(from_core)?;
            AnyPoint::Real { space, point }
        }
        _ => {
            let ks = KStructure::new(kind, pf.p, pf.q).map_err(from_core)?;
            // Validation happens through realification.
            hypgrass::kfields::realify_point(&ks, &frame).map_err(from_core)?;
            AnyPoint::K { ks, kframe: frame }
        }
    };
    Ok(Loaded { value, digest: d })
}

pub fn load_real_point(path: &str, tol: &TolProfile) -> CliResult<Loaded<(Xpq, Point)>> {
    let loaded = load_point(path, tol)?;
    let pair = loaded.value.require_real(path)?;
    Ok(Loaded {
        value: pair,
        digest: loaded.digest,
    })
}

pub fn load_boundary(path: &str, tol: &TolProfile) -> CliResult<Loaded<(Xpq, BoundaryPoint)>> {
    let (text, d) = read_file(path)?;
    let bf: BoundaryFile = parse_json(path, &text)?;
    if bf.base.field != "R" {
        return Err(CliError::input(format!(
            "{path}: boundary data must be over field R"
        )));
    }
    let space = Xpq::with_profile(bf.base.p, bf.base.q, tol.clone()).map_err(from_core)?;
    let base_frame = rows_to_matrix(&bf.base.frame, path)?;
    let base = space.point_from_frame(base_frame).map_err(from_core)?;
    let u = rows_to_matrix(&bf.u, path)?;
    let v = rows_to_matrix(&bf.v, path)?;
    if bf.lambda.iter().any(|x| !x.is_finite()) {
        return Err(CliError::input(format!("{path}: non-finite lambda")));
    }
    let chart = FlatChart { base, u, v };
    let xi = BoundaryPoint::new(&space, chart, DVector::from_vec(bf.lambda.clone()))
        .map_err(from_core)?;
    Ok(Loaded {
        value: (space, xi),
        digest: d,
    })
}

pub fn load_isometry(path: &str) -> CliResult<Loaded<DMatrix<f64>>> {
    let (text, d) = read_file(path)?;
    let mf: IsometryFile = parse_json(path, &text)?;
    let m = rows_to_matrix(&mf.matrix, path)?;
    if m.nrows() != m.ncols() {
        return Err(CliError::input(format!("{path}: matrix must be square")));
    }
    Ok(Loaded { value: m, digest: d })
}

pub fn load_flag(path: &str, tol: &TolProfile) -> CliResult<Loaded<(Xpq, IsotropicFlag)>> {
    let (text, d) = read_file(path)?;
    let ff: FlagFile = parse_json(path, &text)?;
    let space = Xpq::with_profile(ff.p, ff.q, tol.clone()).map_err(from_core)?;
    let frames: Vec<DMatrix<f64>> = ff
        .subspaces
        .iter()
        .map(|rows| rows_to_matrix(rows, path))
        .collect::<CliResult<_>>()?;
    let flag = IsotropicFlag::new(*space.form(), frames).map_err(from_core)?;
    Ok(Loaded {
        value: (space, flag),
        digest: d,
    })
}

pub fn load_chain(path: &str, tol: &TolProfile) -> CliResult<Loaded<(Xpq, Vec<ConvexSet>)>> {
    let (text, d) = read_file(path)?;
    let cf: ChainFile = parse_json(path, &text)?;
    if cf.sets.is_empty() {
        return Err(CliError::input(format!("{path}: chain has no sets")));
    }
    let mut space: Option<Xpq> = None;
    let mut sets = Vec::with_capacity(cf.sets.len());
    for (k, set) in cf.sets.iter().enumerate() {
        match set {
            ChainSetFile::Ball { center, radius } => {
                if center.field != "R" {
                    return Err(CliError::input(format!(
                        "{path}: set {k}: chain points must be real"
                    )));
                }
                let sp = Xpq::with_profile(center.p, center.q, tol.clone()).map_err(from_core)?;
                let frame = rows_to_matrix(&center.frame, path)?;
                let point = sp.point_from_frame(frame).map_err(from_core)?;
                check_same_dims(&mut space, &sp, path, k)?;
                if !radius.is_finite() || *radius < 0.0 {
                    return Err(CliError::input(format!("{path}: set {k}: bad radius")));
                }
                sets.push(ConvexSet::Ball {
                    center: point,
                    radius: *radius,
                });
            }
            ChainSetFile::Horoball { xi, level } => {
                if !level.is_finite() {
                    return Err(CliError::input(format!("{path}: set {k}: bad level")));
                }
                let sp = Xpq::with_profile(xi.base.p, xi.base.q, tol.clone()).map_err(from_core)?;
                let base_frame = rows_to_matrix(&xi.base.frame, path)?;
                let base = sp.point_from_frame(base_frame).map_err(from_core)?;
                let u = rows_to_matrix(&xi.u, path)?;
                let v = rows_to_matrix(&xi.v, path)?;
                let chart = FlatChart { base, u, v };
                let bp = BoundaryPoint::new(&sp, chart, DVector::from_vec(xi.lambda.clone()))
                    .map_err(from_core)?;
                check_same_dims(&mut space, &sp, path, k)?;
                sets.push(ConvexSet::Horoball {
                    xi: bp,
                    level: *level,
                });
            }
        }
    }
    Ok(Loaded {
        value: (space.unwrap(), sets),
        digest: d,
    })
}

fn check_same_dims(space: &mut Option<Xpq>, sp: &Xpq, path: &str, k: usize) -> CliResult<()> {
    match space {
        None => {
            *space = Some(sp.clone());
            Ok(())
        }
        Some(s) if s.p() == sp.p() && s.q() == sp.q() => Ok(()),
        Some(_) => Err(CliError::input(format!(
            "{path}: set {k} has mismatched dimensions"
        ))),
    }
}

/// Emit a point as a PointFile-shaped object.
pub fn point_json(space: &Xpq, point: &Point) -> Json {
    Json::obj(vec![
        ("p", Json::Int(space.p() as i64)),
        ("q", Json::Int(space.q() as i64)),
        ("field", Json::Str("R".into())),
        ("frame", Json::rows(point.frame())),
    ])
}

/// Emit a boundary point as a BoundaryFile-shaped object.
pub fn boundary_json(space: &Xpq, xi: &BoundaryPoint) -> Json {
    Json::obj(vec![
        ("base", point_json(space, &xi.chart().base)),
        ("u", Json::rows(&xi.chart().u)),
        ("v", Json::rows(&xi.chart().v)),
        (
            "lambda",
            Json::nums(xi.lambda().iter().cloned().collect::<Vec<_>>().as_slice()),
        ),
    ])
}

/// Emit a flag as a FlagFile-shaped object.
pub fn flag_json(space: &Xpq, flag: &IsotropicFlag) -> Json {
    Json::obj(vec![
        ("p", Json::Int(space.p() as i64)),
        ("q", Json::Int(space.q() as i64)),
        (
            "subspaces",
            Json::Arr(
                flag.subspaces()
                    .iter()
                    .map(|f| Json::rows(f.matrix()))
                    .collect(),
            ),
        ),
    ])
}
