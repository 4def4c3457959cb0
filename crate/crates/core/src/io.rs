//! Artifact formats: CSV with a JSON metadata line, little-endian binary
//! dumps, PGM rasters and SVG polylines.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bessel::BesselPath;
use crate::driving::{continuation_threshold_time, DrivingFunction, Geometry};
use crate::error::{Error, Result};
use crate::loewner::LoewnerTrace;

pub const BESSEL_MAGIC: &[u8; 4] = b"BESL";
pub const TRACE_MAGIC: &[u8; 4] = b"TRCE";
pub const FORMAT_VERSION: u32 = 1;

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn drive_metadata(drive: &DrivingFunction) -> serde_json::Value {
    let fps = drive.force_points.points();
    json!({
        "geometry": drive.geometry,
        "kappa": drive.kappa,
        "weights": fps.iter().map(|p| p.weight).collect::<Vec<_>>(),
        "positions": fps.iter().map(|p| p.position()).collect::<Vec<_>>(),
        "sides": fps.iter().map(|p| p.side).collect::<Vec<_>>(),
        "dt": drive.dt,
        "seed": drive.seed,
        "threshold_time": continuation_threshold_time(drive),
    })
}

/// Driving function as CSV: a `# {json}` metadata line, then `t,W,V_1..V_n`
/// (chordal) or `t,theta,alpha` (radial).
pub fn write_drive_csv(drive: &DrivingFunction, out: &mut impl Write) -> Result<()> {
    writeln!(out, "# {}", drive_metadata(drive))?;
    match drive.geometry {
        Geometry::Chordal => {
            let mut header = String::from("t,W");
            for j in 1..=drive.v.len() {
                header.push_str(&format!(",V_{j}"));
            }
            writeln!(out, "{header}")?;
            for k in 0..drive.len() {
                write!(out, "{},{}", drive.times[k], drive.w[k])?;
                for v in &drive.v {
                    write!(out, ",{}", v[k])?;
                }
                writeln!(out)?;
            }
        }
        Geometry::Radial => {
            writeln!(out, "t,theta,alpha")?;
            for k in 0..drive.len() {
                writeln!(out, "{},{},{}", drive.times[k], drive.theta[k], drive.alpha[k])?;
            }
        }
    }
    Ok(())
}

pub fn trace_metadata(trace: &LoewnerTrace) -> serde_json::Value {
    json!({
        "kappa": trace.kappa,
        "parameterization": trace.parameterization,
        "dt": trace.dt,
        "seed": trace.seed,
        "points": trace.len(),
        "notes": trace.notes,
    })
}

/// Trace as CSV: metadata line, then `t,re,im`.
pub fn write_trace_csv(trace: &LoewnerTrace, out: &mut impl Write) -> Result<()> {
    writeln!(out, "# {}", trace_metadata(trace))?;
    writeln!(out, "t,re,im")?;
    for (t, z) in trace.times.iter().zip(&trace.points) {
        writeln!(out, "{t},{},{}", z.re, z.im)?;
    }
    Ok(())
}

/// Parses the `t,re,im` rows of a trace CSV.
pub fn read_trace_csv(text: &str) -> Result<Vec<(f64, Complex64)>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with('t') || line.is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parameter(format!("bad CSV field {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if f.len() != 3 {
            return Err(Error::Parameter(format!("expected 3 fields, got {}", f.len())));
        }
        rows.push((f[0], Complex64::new(f[1], f[2])));
    }
    Ok(rows)
}

/// Contents of a Bessel binary dump.
#[derive(Clone, Debug, PartialEq)]
pub struct BesselDump {
    pub dimension: f64,
    pub x0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

/// `BESL`, u32 version, f64 d, f64 x0, f64 dt, u64 N, N f64 values; all
/// little-endian.
pub fn write_bessel_bin(path: &BesselPath, out: &mut impl Write) -> Result<()> {
    out.write_all(BESSEL_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for x in [path.params.dimension, path.params.x0, path.dt] {
        out.write_all(&x.to_le_bytes())?;
    }
    out.write_all(&(path.values.len() as u64).to_le_bytes())?;
    for v in &path.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> io::Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_f64(r: &mut impl Read) -> io::Result<f64> {
    read_array::<8>(r).map(f64::from_le_bytes)
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let m = read_array::<4>(r)?;
    if &m != magic {
        return Err(Error::Parameter(format!("bad magic {m:?}")));
    }
    let v = u32::from_le_bytes(read_array::<4>(r)?);
    if v != FORMAT_VERSION {
        return Err(Error::Unsupported(format!("format version {v}")));
    }
    Ok(())
}

pub fn read_bessel_bin(r: &mut impl Read) -> Result<BesselDump> {
    read_header(r, BESSEL_MAGIC)?;
    let dimension = read_f64(r)?;
    let x0 = read_f64(r)?;
    let dt = read_f64(r)?;
    let n = u64::from_le_bytes(read_array::<8>(r)?);
    let values = (0..n).map(|_| read_f64(r)).collect::<io::Result<_>>()?;
    Ok(BesselDump {
        dimension,
        x0,
        dt,
        values,
    })
}

/// Contents of a trace binary dump.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceDump {
    pub kappa: f64,
    pub dt: f64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
}

/// `TRCE`, u32 version, f64 kappa, f64 dt, u64 seed, u64 N, then N triples
/// `(t, re, im)` of f64; all little-endian.
pub fn write_trace_bin(trace: &LoewnerTrace, out: &mut impl Write) -> Result<()> {
    out.write_all(TRACE_MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&trace.kappa.to_le_bytes())?;
    out.write_all(&trace.dt.to_le_bytes())?;
    out.write_all(&trace.seed.to_le_bytes())?;
    out.write_all(&(trace.len() as u64).to_le_bytes())?;
    for (t, z) in trace.times.iter().zip(&trace.points) {
        for x in [*t, z.re, z.im] {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_trace_bin(r: &mut impl Read) -> Result<TraceDump> {
    read_header(r, TRACE_MAGIC)?;
    let kappa = read_f64(r)?;
    let dt = read_f64(r)?;
    let seed = u64::from_le_bytes(read_array::<8>(r)?);
    let n = u64::from_le_bytes(read_array::<8>(r)?) as usize;
    let mut times = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        times.push(read_f64(r)?);
        let re = read_f64(r)?;
        points.push(Complex64::new(re, read_f64(r)?));
    }
    Ok(TraceDump {
        kappa,
        dt,
        seed,
        times,
        points,
    })
}

/// SVG polyline of `points` with the imaginary axis pointing up.
pub fn trace_svg(points: &[Complex64]) -> String {
    let (mut x0, mut x1, mut y1) = (0.0f64, 0.0f64, 0.0f64);
    for p in points {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y1 = y1.max(p.im);
    }
    let pad = 0.05 * (x1 - x0).max(y1).max(1e-9);
    let (vx, vy, vw, vh) = (x0 - pad, -y1 - pad, x1 - x0 + 2.0 * pad, y1 + 2.0 * pad);
    let stroke = vw.max(vh) / 800.0;
    let coords: Vec<String> = points.iter().map(|p| format!("{},{}", p.re, -p.im)).collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{vx} {vy} {vw} {vh}\">\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"{stroke}\" points=\"{}\"/>\n</svg>\n",
        coords.join(" ")
    )
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{simulate_bessel, BesselParams};
    use crate::driving::{chordal_sle_driving, sle_kappa_rho_driving_euler, ForcePoint, ForcePointConfig};
    use crate::loewner::compute_trace;
    use crate::noise::BrownianPath;
    use proptest::prelude::*;

    #[test]
    fn sha256_of_empty() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn drive_csv_layout() {
        let noise = BrownianPath::sample(0.01, 1e-3, 1).unwrap();
        let fps = ForcePointConfig::new([ForcePoint::right(0.5, 1.0), ForcePoint::left(0.0, 2.0)]).unwrap();
        let drive = sle_kappa_rho_driving_euler(4.0, &fps, &noise).unwrap();
        let mut buf = Vec::new();
        write_drive_csv(&drive, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let meta: serde_json::Value = serde_json::from_str(&lines.next().unwrap()[2..]).unwrap();
        assert_eq!(meta["kappa"], 4.0);
        assert_eq!(lines.next().unwrap(), "t,W,V_1,V_2");
        assert_eq!(lines.count(), drive.len());
    }

    #[test]
    fn trace_csv_round_trip() {
        let noise = BrownianPath::sample(0.1, 1e-3, 2).unwrap();
        let tr = compute_trace(&chordal_sle_driving(3.0, &noise).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &mut buf).unwrap();
        let rows = read_trace_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(rows.len(), tr.len());
        for ((t, z), (t2, z2)) in rows.iter().zip(tr.times.iter().zip(&tr.points)) {
            assert_eq!(t, t2);
            assert_eq!(z, z2);
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = read_trace_bin(&mut &b"XXXX\x01\0\0\0"[..]);
        assert!(matches!(err, Err(Error::Parameter(_))));
    }

    #[test]
    fn svg_has_viewbox() {
        let s = trace_svg(&[Complex64::new(0.0, 0.0), Complex64::new(0.5, 1.0)]);
        assert!(s.contains("viewBox") && s.contains("<polyline"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bessel_bin_round_trip(d in 0.5f64..5.0, x0 in 0.0f64..3.0, seed in 0u64..1000, n in 1usize..200) {
            let noise = BrownianPath::from_increments(1e-3, {
                let p = BrownianPath::sample(n as f64 * 1e-3, 1e-3, seed).unwrap();
                p.increments
            });
            let path = simulate_bessel(&BesselParams::linear(d, x0), &noise).unwrap();
            let mut buf = Vec::new();
            write_bessel_bin(&path, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), 4 + 4 + 24 + 8 + 8 * path.values.len());
            let back = read_bessel_bin(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.dimension.to_bits(), d.to_bits());
            prop_assert_eq!(back.x0.to_bits(), x0.to_bits());
            prop_assert_eq!(back.values, path.values);
        }

        #[test]
        fn trace_bin_round_trip(pts in prop::collection::vec((-10.0f64..10.0, 0.0f64..10.0), 0..100), kappa in 0.0f64..10.0, seed: u64) {
            let tr = LoewnerTrace {
                kappa,
                parameterization: crate::loewner::Parameterization::Capacity,
                times: (0..pts.len()).map(|k| k as f64 * 0.01).collect(),
                points: pts.iter().map(|&(x, y)| Complex64::new(x, y)).collect(),
                seed,
                dt: 0.01,
                capacity_times: vec![],
                degenerate: false,
                notes: vec![],
            };
            let mut buf = Vec::new();
            write_trace_bin(&tr, &mut buf).unwrap();
            let back = read_trace_bin(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.kappa.to_bits(), kappa.to_bits());
            prop_assert_eq!(back.seed, seed);
            prop_assert_eq!(back.times, tr.times);
            prop_assert_eq!(back.points, tr.points);
        }
    }
}
