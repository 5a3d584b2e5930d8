//! Argument grammar and command execution.

use clap::{Parser, Subcommand, ValueEnum};
use hypgrass::boundary::{
    boundary_from_flag, busemann, delta_direction, flag_of, ray_point, stabilizer_check,
    tits_angle,
};
use hypgrass::cat0::{
    center_of_directions, circumcenter, jung_probe, project, ConvexSet, NestedChain,
};
use hypgrass::kfields::{angles_k, distance_k, realify_point};
use hypgrass::{Isometry, TolProfile, Xpq};

use crate::emit::{envelope, Json};
use crate::files::{
    boundary_json, flag_json, from_core, load_boundary, load_chain, load_flag, load_isometry,
    load_point, load_real_point, point_json, read_file, AnyPoint, CliError, CliResult,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Profile {
    Strict,
    Default,
    Loose,
}

impl Profile {
    fn tol(self) -> TolProfile {
        match self {
            Profile::Strict => TolProfile::strict(),
            Profile::Default => TolProfile::default_profile(),
            Profile::Loose => TolProfile::loose(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hypgrass",
    version,
    about = "Hyperbolic principal angles, CAT(0) procedures and boundary data for X_{p,q}"
)]
pub struct Cli {
    /// Tolerance profile (flag overrides the HYPGRASS_TOL_PROFILE variable).
    #[arg(long, value_enum, env = "HYPGRASS_TOL_PROFILE", default_value = "default")]
    pub tol_profile: Profile,

    /// Run every line of the file as a command; one envelope per line.
    #[arg(long, value_name = "FILE", global = true)]
    pub batch: Option<String>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate one or more data files (auto-detected by shape).
    Validate { files: Vec<String> },
    /// Hyperbolic principal angles between two points.
    Angles { a: String, b: String },
    /// Distance between two points.
    Dist { a: String, b: String },
    /// Point on the geodesic from A to B at parameter t in [0, 1].
    Geodesic {
        a: String,
        b: String,
        #[arg(long)]
        t: f64,
    },
    /// Geodesic midpoint of A and B.
    Midpoint { a: String, b: String },
    /// Transvection of arc length t along the geodesic from A toward B.
    Transvect {
        a: String,
        b: String,
        #[arg(long)]
        t: f64,
    },
    /// Witt isometry carrying (E, F) to (E2, F2).
    Witt {
        e: String,
        f: String,
        e2: String,
        f2: String,
    },
    /// Minimax center of a list of points.
    Circumcenter { points: Vec<String> },
    /// Jung-inequality probe with dimension parameter n.
    Jung {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        points: Vec<String>,
    },
    /// Metric projection of X onto a convex set.
    Project {
        x: String,
        #[arg(long, value_name = "CENTER.json", requires = "radius")]
        ball: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_name = "XI.json", requires = "level")]
        horoball: Option<String>,
        #[arg(long)]
        level: Option<f64>,
        /// Project onto the coordinate sub-truncation X_{p, q'}.
        #[arg(long, value_name = "Q_INNER")]
        truncate: Option<usize>,
        /// Project onto an affine subspace of a flat; the chart comes from a
        /// boundary file, the offset and directions are comma/semicolon
        /// separated lambda-coordinates, e.g. --offset 0,0 --dirs "1,0;0,1".
        #[arg(long, value_name = "CHART.json", requires = "offset")]
        subflat: Option<String>,
        #[arg(long)]
        offset: Option<String>,
        #[arg(long)]
        dirs: Option<String>,
    },
    /// Busemann value beta_xi(x, y); y defaults to the chart base.
    Busemann {
        xi: String,
        x: String,
        y: Option<String>,
        #[arg(long, default_value_t = 1e4)]
        tmax: f64,
    },
    /// Tits (angular metric) angle between two boundary points.
    TitsAngle {
        xi: String,
        eta: String,
        #[arg(long)]
        base: Option<String>,
        #[arg(long, default_value_t = 1e3)]
        tmax: f64,
    },
    /// Weyl-canonical direction of the segment from A to B.
    DeltaDir { a: String, b: String },
    /// Isotropic flag of a boundary point.
    FlagOf { xi: String },
    /// Boundary point realizing an isotropic flag.
    FlagToBoundary { flag: String },
    /// Parabolic-stabilizer verdicts for an isometry against a boundary point.
    StabCheck {
        h: String,
        xi: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1.0, 2.0, 4.0, 8.0])]
        t_samples: Vec<f64>,
    },
    /// Center of directions of a nested chain (chain file of balls/horoballs).
    CenterOfDirections {
        chain: String,
        #[arg(long)]
        base: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 10.0, 100.0, 1000.0])]
        t_grid: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        tail: usize,
    },
    /// Realify a complex or quaternionic point into X_{dp, dq}(R).
    Realify { point: String },
    /// Deterministic pseudo-random point of X_{p,q}.
    RandomPoint {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
    },
    /// Polyline/scatter arrays for external plotting.
    PlotData {
        #[command(subcommand)]
        kind: PlotKind,
    },
}

#[derive(Subcommand, Debug)]
pub enum PlotKind {
    /// Arc length and angle spectra along the geodesic from A to B.
    Geodesic {
        a: String,
        b: String,
        #[arg(long, default_value_t = 33)]
        samples: usize,
    },
    /// Spectrum along a ray toward a boundary point.
    Ray {
        xi: String,
        #[arg(long, default_value_t = 20.0)]
        tmax: f64,
        #[arg(long, default_value_t = 17)]
        samples: usize,
    },
}

pub fn dispatch(cli: Cli) -> i32 {
    if let Some(batch) = &cli.batch {
        return run_batch(batch, cli.tol_profile);
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return 64;
    };
    let name = command_name(&command);
    match execute(command, cli.tol_profile.tol()) {
        Ok((line, code)) => {
            println!("{line}");
            code
        }
        Err(e) => {
            report_error(name, &e);
            e.code
        }
    }
}

/// Numerical failures (exit 3) still emit an envelope with the diagnostics;
/// input failures (exit 2) only report on stderr.
fn report_error(command: &str, e: &CliError) {
    eprintln!("error: {}", e.message);
    if e.code == 3 {
        let line = envelope(
            command,
            vec![],
            Json::Null,
            Json::obj(vec![("error", Json::Str(e.message.clone()))]),
        );
        println!("{line}");
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate { .. } => "validate",
        Command::Angles { .. } => "angles",
        Command::Dist { .. } => "dist",
        Command::Geodesic { .. } => "geodesic",
        Command::Midpoint { .. } => "midpoint",
        Command::Transvect { .. } => "transvect",
        Command::Witt { .. } => "witt",
        Command::Circumcenter { .. } => "circumcenter",
        Command::Jung { .. } => "jung",
        Command::Project { .. } => "project",
        Command::Busemann { .. } => "busemann",
        Command::TitsAngle { .. } => "tits-angle",
        Command::DeltaDir { .. } => "delta-dir",
        Command::FlagOf { .. } => "flag-of",
        Command::FlagToBoundary { .. } => "flag-to-boundary",
        Command::StabCheck { .. } => "stab-check",
        Command::CenterOfDirections { .. } => "center-of-directions",
        Command::Realify { .. } => "realify",
        Command::RandomPoint { .. } => "random-point",
        Command::PlotData { .. } => "plot-data",
    }
}

fn run_batch(path: &str, profile: Profile) -> i32 {
    let (text, _) = match read_file(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let mut worst = 0i32;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut argv: Vec<String> = vec!["hypgrass".to_string()];
        argv.extend(line.split_whitespace().map(|s| s.to_string()));
        match Cli::try_parse_from(&argv) {
            Ok(sub) => match sub.command {
                Some(c) => {
                    let name = command_name(&c);
                    match execute(c, profile.tol()) {
                        Ok((l, code)) => {
                            println!("{l}");
                            worst = worst.max(code);
                        }
                        Err(e) => {
                            report_error(name, &e);
                            worst = worst.max(e.code);
                        }
                    }
                }
                None => {
                    eprintln!("error: batch line has no command: {line}");
                    worst = worst.max(64);
                }
            },
            Err(e) => {
                eprintln!("error: {e}");
                worst = worst.max(64);
            }
        }
    }
    worst
}

fn check_same_space(a: &Xpq, b: &Xpq) -> CliResult<()> {
    if a.p() != b.p() || a.q() != b.q() {
        return Err(CliError::input("operands live in different spaces"));
    }
    Ok(())
}

fn spectrum_json(alphas: &[f64]) -> Json {
    Json::nums(alphas)
}

type Outcome = CliResult<(String, i32)>;

fn execute(cmd: Command, tol: TolProfile) -> Outcome {
    match cmd {
        Command::Validate { files } => validate_files(&files, &tol),
        Command::Angles { a, b } => {
            let pa = load_point(&a, &tol)?;
            let pb = load_point(&b, &tol)?;
            let inputs = vec![pa.digest, pb.digest];
            match (pa.value, pb.value) {
                (AnyPoint::Real { space, point: x }, AnyPoint::Real { space: sb, point: y }) => {
                    check_same_space(&space, &sb)?;
                    let spec = space.principal_angles(&x, &y).map_err(from_core)?;
                    let line = envelope(
                        "angles",
                        inputs,
                        spectrum_json(spec.alphas()),
                        Json::obj(vec![("field", Json::Str("R".into()))]),
                    );
                    Ok((line, 0))
                }
                (AnyPoint::K { ks, kframe: x }, AnyPoint::K { ks: kb, kframe: y }) => {
                    if ks.kind() != kb.kind() || ks.p() != kb.p() || ks.q() != kb.q() {
                        return Err(CliError::input("operands live in different spaces"));
                    }
                    let spec = angles_k(&ks, &x, &y).map_err(from_core)?;
                    let line = envelope(
                        "angles",
                        inputs,
                        spectrum_json(spec.alphas()),
                        Json::obj(vec![("field", Json::Str(ks.kind().name().into()))]),
                    );
                    Ok((line, 0))
                }
                _ => Err(CliError::input("mixed fields between operands")),
            }
        }
        Command::Dist { a, b } => {
            let pa = load_point(&a, &tol)?;
            let pb = load_point(&b, &tol)?;
            let inputs = vec![pa.digest, pb.digest];
            let (value, field) = match (pa.value, pb.value) {
                (AnyPoint::Real { space, point: x }, AnyPoint::Real { space: sb, point: y }) => {
                    check_same_space(&space, &sb)?;
                    (space.distance(&x, &y).map_err(from_core)?, "R")
                }
                (AnyPoint::K { ks, kframe: x }, AnyPoint::K { ks: kb, kframe: y }) => {
                    if ks.kind() != kb.kind() || ks.p() != kb.p() || ks.q() != kb.q() {
                        return Err(CliError::input("operands live in different spaces"));
                    }
                    (distance_k(&ks, &x, &y).map_err(from_core)?, ks.kind().name())
                }
                _ => return Err(CliError::input("mixed fields between operands")),
            };
            let line = envelope(
                "dist",
                inputs,
                Json::Num(value),
                Json::obj(vec![("field", Json::Str(field.into()))]),
            );
            Ok((line, 0))
        }
        Command::Geodesic { a, b, t } => {
            let pa = load_real_point(&a, &tol)?;
            let pb = load_real_point(&b, &tol)?;
            let (space, x) = pa.value;
            let (sb, y) = pb.value;
            check_same_space(&space, &sb)?;
            let geo = space.geodesic(&x, &y).map_err(from_core)?;
            let pt = geo.at(&space, t).map_err(from_core)?;
            let line = envelope(
                "geodesic",
                vec![pa.digest, pb.digest],
                point_json(&space, &pt),
                Json::obj(vec![("t", Json::Num(t)), ("length", Json::Num(geo.length))]),
            );
            Ok((line, 0))
        }
        Command::Midpoint { a, b } => {
            let pa = load_real_point(&a, &tol)?;
            let pb = load_real_point(&b, &tol)?;
            let (space, x) = pa.value;
            let (sb, y) = pb.value;
            check_same_space(&space, &sb)?;
            let mid = space.midpoint(&x, &y).map_err(from_core)?;
            let line = envelope(
                "midpoint",
                vec![pa.digest, pb.digest],
                point_json(&space, &mid),
                Json::obj(vec![]),
            );
            Ok((line, 0))
        }
        Command::Transvect { a, b, t } => {
            let pa = load_real_point(&a, &tol)?;
            let pb = load_real_point(&b, &tol)?;
            let (space, x) = pa.value;
            let (sb, y) = pb.value;
            check_same_space(&space, &sb)?;
            let g = space.transvection(&x, &y, t).map_err(from_core)?;
            let line = envelope(
                "transvect",
                vec![pa.digest, pb.digest],
                Json::obj(vec![("matrix", Json::rows(g.matrix()))]),
                Json::obj(vec![
                    ("t", Json::Num(t)),
                    ("form_residual", Json::Num(g.residual())),
                ]),
            );
            Ok((line, 0))
        }
        Command::Witt { e, f, e2, f2 } => {
            let pe = load_real_point(&e, &tol)?;
            let pf = load_real_point(&f, &tol)?;
            let pe2 = load_real_point(&e2, &tol)?;
            let pf2 = load_real_point(&f2, &tol)?;
            let (space, xe) = pe.value;
            let xf = pf.value.1;
            let xe2 = pe2.value.1;
            let xf2 = pf2.value.1;
            let g = space
                .witt_isometry(&xe, &xf, &xe2, &xf2)
                .map_err(from_core)?;
            let ge = space.apply(&g, &xe).map_err(from_core)?;
            let gf = space.apply(&g, &xf).map_err(from_core)?;
            let line = envelope(
                "witt",
                vec![pe.digest, pf.digest, pe2.digest, pf2.digest],
                Json::obj(vec![("matrix", Json::rows(g.matrix()))]),
                Json::obj(vec![
                    ("form_residual", Json::Num(g.residual())),
                    (
                        "image_gap_e",
                        Json::Num(space.subspace_gap(&ge, &xe2).map_err(from_core)?),
                    ),
                    (
                        "image_gap_f",
                        Json::Num(space.subspace_gap(&gf, &xf2).map_err(from_core)?),
                    ),
                ]),
            );
            Ok((line, 0))
        }
        Command::Circumcenter { points } => {
            if points.is_empty() {
                return Err(CliError::input("circumcenter needs at least one point"));
            }
            let mut inputs = Vec::new();
            let mut space: Option<Xpq> = None;
            let mut pts = Vec::new();
            for path in &points {
                let loaded = load_real_point(path, &tol)?;
                inputs.push(loaded.digest);
                let (sp, pt) = loaded.value;
                if let Some(s) = &space {
                    check_same_space(s, &sp)?;
                } else {
                    space = Some(sp);
                }
                pts.push(pt);
            }
            let space = space.unwrap();
            let cc = circumcenter(&space, &pts).map_err(from_core)?;
            let line = envelope(
                "circumcenter",
                inputs,
                Json::obj(vec![
                    ("center", point_json(&space, &cc.center)),
                    ("radius", Json::Num(cc.radius)),
                ]),
                Json::obj(vec![("iterations", Json::Int(cc.iterations as i64))]),
            );
            Ok((line, 0))
        }
        Command::Jung { n, delta, points } => {
            let mut inputs = Vec::new();
            let mut space: Option<Xpq> = None;
            let mut pts = Vec::new();
            for path in &points {
                let loaded = load_real_point(path, &tol)?;
                inputs.push(loaded.digest);
                let (sp, pt) = loaded.value;
                if let Some(s) = &space {
                    check_same_space(s, &sp)?;
                } else {
                    space = Some(sp);
                }
                pts.push(pt);
            }
            let space = space.ok_or_else(|| CliError::input("jung needs points"))?;
            let rep = jung_probe(&space, &pts, n, delta).map_err(from_core)?;
            let line = envelope(
                "jung",
                inputs,
                Json::obj(vec![
                    ("ratio", Json::Num(rep.ratio)),
                    ("bound", Json::Num(rep.bound)),
                    ("pass", Json::Bool(rep.pass)),
                    ("radius", Json::Num(rep.radius)),
                    ("diameter", Json::Num(rep.diameter)),
                ]),
                Json::obj(vec![("n", Json::Int(n as i64)), ("delta", Json::Num(delta))]),
            );
            Ok((line, 0))
        }
        Command::Project {
            x,
            ball,
            radius,
            horoball,
            level,
            truncate,
            subflat,
            offset,
            dirs,
        } => {
            let px = load_real_point(&x, &tol)?;
            let (space, xx) = px.value;
            let mut inputs = vec![px.digest];
            let chosen = [
                ball.is_some(),
                horoball.is_some(),
                truncate.is_some(),
                subflat.is_some(),
            ]
            .iter()
            .filter(|&&b| b)
            .count();
            if chosen != 1 {
                return Err(CliError::input(
                    "choose exactly one of --ball, --horoball, --truncate, --subflat",
                ));
            }
            let set = if let Some(center_path) = ball {
                let pc = load_real_point(&center_path, &tol)?;
                inputs.push(pc.digest);
                let (sc, center) = pc.value;
                check_same_space(&space, &sc)?;
                ConvexSet::Ball {
                    center,
                    radius: radius.unwrap(),
                }
            } else if let Some(xi_path) = horoball {
                let bx = load_boundary(&xi_path, &tol)?;
                inputs.push(bx.digest);
                let (sx, xi) = bx.value;
                check_same_space(&space, &sx)?;
                ConvexSet::Horoball {
                    xi,
                    level: level.unwrap(),
                }
            } else if let Some(chart_path) = subflat {
                let bx = load_boundary(&chart_path, &tol)?;
                inputs.push(bx.digest);
                let (sx, chart_src) = bx.value;
                check_same_space(&space, &sx)?;
                let off = parse_vector(&offset.unwrap(), space.p())?;
                let dmat = parse_directions(dirs.as_deref(), space.p())?;
                ConvexSet::Subflat {
                    chart: chart_src.chart().clone(),
                    offset: off,
                    directions: dmat,
                }
            } else {
                ConvexSet::TotallyGeodesic {
                    q_inner: truncate.unwrap(),
                }
            };
            let proj = project(&space, &set, &xx).map_err(from_core)?;
            let member = set.membership(&space, &proj, 1e-6).map_err(from_core)?;
            let line = envelope(
                "project",
                inputs,
                point_json(&space, &proj),
                Json::obj(vec![
                    ("kind", Json::Str(set.kind().into())),
                    (
                        "moved",
                        Json::Num(space.distance(&xx, &proj).map_err(from_core)?),
                    ),
                    ("membership", Json::Bool(member)),
                ]),
            );
            Ok((line, 0))
        }
        Command::Busemann { xi, x, y, tmax } => {
            let bx = load_boundary(&xi, &tol)?;
            let (space, bxi) = bx.value;
            let px = load_real_point(&x, &tol)?;
            let (sx, xx) = px.value;
            check_same_space(&space, &sx)?;
            let mut inputs = vec![bx.digest, px.digest];
            let yy = match y {
                Some(path) => {
                    let py = load_real_point(&path, &tol)?;
                    inputs.push(py.digest);
                    let (sy, pt) = py.value;
                    check_same_space(&space, &sy)?;
                    pt
                }
                None => bxi.chart().base.clone(),
            };
            let rep = busemann(&space, &bxi, &xx, &yy, tmax).map_err(from_core)?;
            let code = if rep.converged { 0 } else { 3 };
            let line = envelope(
                "busemann",
                inputs,
                Json::Num(rep.value),
                Json::obj(vec![
                    ("converged", Json::Bool(rep.converged)),
                    ("last_delta", Json::Num(rep.last_delta)),
                    ("t_used", Json::Num(rep.t_used)),
                    ("aaf_residual", Json::Num(rep.aaf_residual)),
                ]),
            );
            Ok((line, code))
        }
        Command::TitsAngle {
            xi,
            eta,
            base,
            tmax,
        } => {
            let bx = load_boundary(&xi, &tol)?;
            let (space, bxi) = bx.value;
            let be = load_boundary(&eta, &tol)?;
            let (se, beta) = be.value;
            check_same_space(&space, &se)?;
            let mut inputs = vec![bx.digest, be.digest];
            let base_pt = match base {
                Some(path) => {
                    let pb = load_real_point(&path, &tol)?;
                    inputs.push(pb.digest);
                    let (sb, pt) = pb.value;
                    check_same_space(&space, &sb)?;
                    pt
                }
                None => bxi.chart().base.clone(),
            };
            let rep = tits_angle(&space, &bxi, &beta, &base_pt, tmax).map_err(from_core)?;
            let code = if rep.monotone_ok { 0 } else { 3 };
            let line = envelope(
                "tits-angle",
                inputs,
                Json::Num(rep.value),
                Json::obj(vec![
                    ("route", Json::Str(format!("{:?}", rep.route))),
                    ("monotone_ok", Json::Bool(rep.monotone_ok)),
                    (
                        "slope_residual",
                        rep.slope_residual.map(Json::Num).unwrap_or(Json::Null),
                    ),
                ]),
            );
            Ok((line, code))
        }
        Command::DeltaDir { a, b } => {
            let pa = load_real_point(&a, &tol)?;
            let pb = load_real_point(&b, &tol)?;
            let (space, x) = pa.value;
            let (sb, y) = pb.value;
            check_same_space(&space, &sb)?;
            let d = delta_direction(&space, &x, &y).map_err(from_core)?;
            let comps: Vec<f64> = d.components().iter().cloned().collect();
            let line = envelope(
                "delta-dir",
                vec![pa.digest, pb.digest],
                Json::nums(&comps),
                Json::obj(vec![]),
            );
            Ok((line, 0))
        }
        Command::FlagOf { xi } => {
            let bx = load_boundary(&xi, &tol)?;
            let (space, bxi) = bx.value;
            let flag = flag_of(&space, &bxi).map_err(from_core)?;
            let dims: Vec<Json> = flag.dims().iter().map(|&d| Json::Int(d as i64)).collect();
            let line = envelope(
                "flag-of",
                vec![bx.digest],
                flag_json(&space, &flag),
                Json::obj(vec![("dims", Json::Arr(dims))]),
            );
            Ok((line, 0))
        }
        Command::FlagToBoundary { flag } => {
            let lf = load_flag(&flag, &tol)?;
            let (space, f) = lf.value;
            let xi = boundary_from_flag(&space, &f).map_err(from_core)?;
            let back = flag_of(&space, &xi).map_err(from_core)?;
            let line = envelope(
                "flag-to-boundary",
                vec![lf.digest],
                boundary_json(&space, &xi),
                Json::obj(vec![("round_trip_gap", Json::Num(f.subspace_gap(&back)))]),
            );
            Ok((line, 0))
        }
        Command::StabCheck { h, xi, t_samples } => {
            let mh = load_isometry(&h)?;
            let bx = load_boundary(&xi, &tol)?;
            let (space, bxi) = bx.value;
            if mh.value.nrows() != space.dim() {
                return Err(CliError::input("isometry dimension mismatch"));
            }
            let iso = Isometry::new(*space.form(), mh.value, tol.isometry).map_err(from_core)?;
            let rep = stabilizer_check(&space, &iso, &bxi, &t_samples).map_err(from_core)?;
            let line = envelope(
                "stab-check",
                vec![mh.digest, bx.digest],
                Json::obj(vec![
                    ("block_verdict", Json::Bool(rep.block_verdict)),
                    ("bounded_verdict", Json::Bool(rep.bounded_verdict)),
                ]),
                Json::obj(vec![
                    ("block_residual", Json::Num(rep.block_residual)),
                    ("growth_ratio", Json::Num(rep.growth_ratio)),
                    ("t_samples", Json::nums(&t_samples)),
                ]),
            );
            Ok((line, 0))
        }
        Command::CenterOfDirections {
            chain,
            base,
            t_grid,
            tail,
        } => {
            let lc = load_chain(&chain, &tol)?;
            let (space, sets) = lc.value;
            let pb = load_real_point(&base, &tol)?;
            let (sb, base_pt) = pb.value;
            check_same_space(&space, &sb)?;
            let nested = NestedChain::new(&space, sets).map_err(from_core)?;
            let out =
                center_of_directions(&space, &nested, &base_pt, &t_grid, tail).map_err(from_core)?;
            let code = if out.drift_flagged { 3 } else { 0 };
            let line = envelope(
                "center-of-directions",
                vec![lc.digest, pb.digest],
                boundary_json(&space, &out.xi),
                Json::obj(vec![
                    ("spreads", Json::nums(&out.spreads)),
                    ("drifts", Json::nums(&out.drifts)),
                    ("bounded_case", Json::Bool(out.bounded_case)),
                    ("drift_flagged", Json::Bool(out.drift_flagged)),
                ]),
            );
            Ok((line, code))
        }
        Command::Realify { point } => {
            let lp = load_point(&point, &tol)?;
            match lp.value {
                AnyPoint::Real { .. } => Err(CliError::input(
                    "point is already real; nothing to realify",
                )),
                AnyPoint::K { ks, kframe } => {
                    let pt = realify_point(&ks, &kframe).map_err(from_core)?;
                    let space = ks.real_space();
                    let line = envelope(
                        "realify",
                        vec![lp.digest],
                        point_json(&space, &pt),
                        Json::obj(vec![
                            ("field", Json::Str(ks.kind().name().into())),
                            ("d", Json::Int(ks.d() as i64)),
                        ]),
                    );
                    Ok((line, 0))
                }
            }
        }
        Command::RandomPoint { p, q, seed, spread } => {
            if !spread.is_finite() || spread < 0.0 {
                return Err(CliError::input("spread must be a non-negative number"));
            }
            let space = Xpq::with_profile(p, q, tol).map_err(from_core)?;
            let pt = space.random_point(seed, spread);
            let line = envelope(
                "random-point",
                vec![],
                point_json(&space, &pt),
                Json::obj(vec![
                    ("seed", Json::Int(seed as i64)),
                    ("spread", Json::Num(spread)),
                ]),
            );
            Ok((line, 0))
        }
        Command::PlotData { kind } => plot_data(kind, &tol),
    }
}

fn parse_vector(text: &str, len: usize) -> CliResult<nalgebra::DVector<f64>> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::input(format!("cannot parse vector {text:?}")))?;
    if vals.len() != len || vals.iter().any(|v| !v.is_finite()) {
        return Err(CliError::input(format!(
            "vector {text:?} must have {len} finite entries"
        )));
    }
    Ok(nalgebra::DVector::from_vec(vals))
}

/// Parse semicolon-separated direction columns and orthonormalize them.
fn parse_directions(text: Option<&str>, p: usize) -> CliResult<nalgebra::DMatrix<f64>> {
    let Some(text) = text else {
        // No directions: the subflat is the single offset point.
        return Ok(nalgebra::DMatrix::zeros(p, 0));
    };
    let cols: Vec<nalgebra::DVector<f64>> = text
        .split(';')
        .map(|c| parse_vector(c, p))
        .collect::<CliResult<_>>()?;
    let mut kept: Vec<nalgebra::DVector<f64>> = Vec::new();
    for mut c in cols {
        for w in &kept {
            let coeff = w.dot(&c);
            c -= w * coeff;
        }
        let n = c.norm();
        if n < 1e-9 {
            return Err(CliError::input("subflat directions are dependent"));
        }
        kept.push(c / n);
    }
    let mut m = nalgebra::DMatrix::zeros(p, kept.len());
    for (j, c) in kept.iter().enumerate() {
        m.set_column(j, c);
    }
    Ok(m)
}

fn plot_data(kind: PlotKind, tol: &TolProfile) -> Outcome {
    match kind {
        PlotKind::Geodesic { a, b, samples } => {
            if samples < 2 {
                return Err(CliError::input("need at least 2 samples"));
            }
            let pa = load_real_point(&a, tol)?;
            let pb = load_real_point(&b, tol)?;
            let (space, x) = pa.value;
            let (sb, y) = pb.value;
            check_same_space(&space, &sb)?;
            let geo = space.geodesic(&x, &y).map_err(from_core)?;
            let mut ts = Vec::new();
            let mut arc = Vec::new();
            let mut angles = Vec::new();
            for k in 0..samples {
                let t = k as f64 / (samples - 1) as f64;
                let pt = geo.at(&space, t).map_err(from_core)?;
                let spec = space.principal_angles(&x, &pt).map_err(from_core)?;
                ts.push(t);
                arc.push(t * geo.length);
                angles.push(Json::nums(spec.alphas()));
            }
            let line = envelope(
                "plot-data",
                vec![pa.digest, pb.digest],
                Json::obj(vec![
                    ("kind", Json::Str("geodesic".into())),
                    ("t", Json::nums(&ts)),
                    ("arc", Json::nums(&arc)),
                    ("angles", Json::Arr(angles)),
                ]),
                Json::obj(vec![("samples", Json::Int(samples as i64))]),
            );
            Ok((line, 0))
        }
        PlotKind::Ray { xi, tmax, samples } => {
            if samples < 2 || tmax <= 0.0 {
                return Err(CliError::input("need samples >= 2 and tmax > 0"));
            }
            let bx = load_boundary(&xi, tol)?;
            let (space, bxi) = bx.value;
            let base = bxi.chart().base.clone();
            let mut ts = Vec::new();
            let mut dist = Vec::new();
            let mut angles = Vec::new();
            for k in 0..samples {
                let t = tmax * k as f64 / (samples - 1) as f64;
                let pt = ray_point(&space, &bxi, t).map_err(from_core)?;
                let spec = space.principal_angles(&base, &pt).map_err(from_core)?;
                ts.push(t);
                dist.push(spec.distance());
                angles.push(Json::nums(spec.alphas()));
            }
            let line = envelope(
                "plot-data",
                vec![bx.digest],
                Json::obj(vec![
                    ("kind", Json::Str("ray".into())),
                    ("t", Json::nums(&ts)),
                    ("dist", Json::nums(&dist)),
                    ("angles", Json::Arr(angles)),
                ]),
                Json::obj(vec![
                    ("samples", Json::Int(samples as i64)),
                    ("tmax", Json::Num(tmax)),
                ]),
            );
            Ok((line, 0))
        }
    }
}

fn validate_files(paths: &[String], tol: &TolProfile) -> Outcome {
    if paths.is_empty() {
        return Err(CliError::input("validate needs at least one file"));
    }
    let mut entries = Vec::new();
    let mut inputs = Vec::new();
    let mut all_ok = true;
    for path in paths {
        let (text, d) = read_file(path)?;
        inputs.push(d);
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            CliError::input(format!(
                "{path}: malformed JSON at line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        let (kind, outcome) = if raw.get("frame").is_some() {
            ("point", load_point(path, tol).map(|_| ()))
        } else if raw.get("lambda").is_some() {
            ("boundary", load_boundary(path, tol).map(|_| ()))
        } else if raw.get("subspaces").is_some() {
            ("flag", load_flag(path, tol).map(|_| ()))
        } else if raw.get("matrix").is_some() {
            ("isometry", load_isometry(path).map(|_| ()))
        } else if raw.get("sets").is_some() {
            ("chain", load_chain(path, tol).map(|_| ()))
        } else {
            ("unknown", Err(CliError::input("unrecognized file shape")))
        };
        let (valid, detail) = match outcome {
            Ok(()) => (true, Json::Null),
            Err(e) => {
                all_ok = false;
                (false, Json::Str(e.message))
            }
        };
        entries.push(Json::obj(vec![
            ("path", Json::Str(path.clone())),
            ("type", Json::Str(kind.into())),
            ("valid", Json::Bool(valid)),
            ("detail", detail),
        ]));
    }
    let line = envelope(
        "validate",
        inputs,
        Json::Arr(entries),
        Json::obj(vec![("all_valid", Json::Bool(all_ok))]),
    );
    Ok((line, if all_ok { 0 } else { 2 }))
}
