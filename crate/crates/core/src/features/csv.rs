use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::taps::TapSet;

use super::{Dataset, DatasetMeta, FeatureRecord, Labels};

pub const DATASET_FORMAT_VERSION: u32 = 1;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("`{field}` is not a number")))
}

fn parse_usize(path: &Path, line: usize, field: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| parse_err(path, line, format!("`{field}` is not a non-negative integer")))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::file(path, e))
}

fn dataset_columns(d: usize) -> String {
    let mut cols: Vec<String> = (1..=d).map(|i| format!("lam_db_{i}")).collect();
    cols.extend((1..=d).map(|i| format!("sinr_db_{i}")));
    cols.push("sigma_mdg_db".into());
    cols.push("snr_db".into());
    cols.join(",")
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    let m = &ds.meta;
    let imp = m.snr_imp_db.unwrap_or(f64::INFINITY);
    writeln!(
        w,
        "# D={} K={} snr_imp_db={} seed={} version={}",
        m.total_modes, m.num_sections, imp, m.seed, DATASET_FORMAT_VERSION
    )?;
    writeln!(w, "{}", dataset_columns(m.total_modes))?;
    for r in &ds.records {
        let labels = r
            .labels
            .ok_or_else(|| Error::Format("dataset records must carry labels".into()))?;
        let fields: Vec<String> = r
            .feature_vector()
            .iter()
            .chain([labels.sigma_mdg_db, labels.snr_db].iter())
            .map(|v| v.to_string())
            .collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_dataset(ds, create(path)?)
}

/// Parses a dataset; `path` labels error messages only.
pub fn read_dataset<R: BufRead>(reader: R, path: &Path) -> Result<Dataset> {
    let mut lines = reader.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(parse_err(path, 0, format!("missing {what}"))),
        }
    };
    let (ln, header) = next("metadata header")?;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, ln, "expected `# D=... K=...` metadata line"))?;
    let (mut d, mut k, mut imp, mut seed, mut version) = (None, None, None, None, None);
    for kv in body.split_whitespace() {
        let (key, val) = kv
            .split_once('=')
            .ok_or_else(|| parse_err(path, ln, format!("malformed metadata `{kv}`")))?;
        match key {
            "D" => d = Some(parse_usize(path, ln, val)?),
            "K" => k = Some(parse_usize(path, ln, val)?),
            "snr_imp_db" => imp = Some(parse_f64(path, ln, val)?),
            "seed" => {
                seed = Some(
                    val.parse::<u64>()
                        .map_err(|_| parse_err(path, ln, format!("bad seed `{val}`")))?,
                )
            }
            "version" => version = Some(parse_usize(path, ln, val)?),
            _ => return Err(parse_err(path, ln, format!("unknown metadata key `{key}`"))),
        }
    }
    let missing = |name: &str| parse_err(path, ln, format!("metadata lacks `{name}`"));
    let d = d.ok_or_else(|| missing("D"))?;
    let meta = DatasetMeta {
        total_modes: d,
        num_sections: k.ok_or_else(|| missing("K"))?,
        snr_imp_db: imp.ok_or_else(|| missing("snr_imp_db"))?.is_finite().then(|| imp.unwrap()),
        seed: seed.ok_or_else(|| missing("seed"))?,
    };
    let version = version.ok_or_else(|| missing("version"))?;
    if version != DATASET_FORMAT_VERSION as usize {
        return Err(parse_err(path, ln, format!("unsupported dataset version {version}")));
    }
    if d == 0 {
        return Err(parse_err(path, ln, "D must be positive"));
    }

    let (ln, cols) = next("column header")?;
    if cols.trim() != dataset_columns(d) {
        return Err(parse_err(path, ln, format!("column header does not match D={d}")));
    }

    let mut records = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|f| parse_f64(path, ln, f))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 2 * d + 2 {
            return Err(parse_err(
                path,
                ln,
                format!("expected {} fields, found {}", 2 * d + 2, vals.len()),
            ));
        }
        let labels = Labels {
            sigma_mdg_db: vals[2 * d],
            snr_db: vals[2 * d + 1],
        };
        let rec = FeatureRecord::new(vals[..d].to_vec(), vals[d..2 * d].to_vec(), Some(labels))
            .map_err(|e| parse_err(path, ln, e.to_string()))?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(parse_err(path, 0, "dataset has no records"));
    }
    Dataset::new(meta, records)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(open(path)?, path)
}

pub fn write_taps_csv<W: Write>(taps: &TapSet, mut w: W) -> Result<()> {
    writeln!(w, "stream_out,stream_in,tap_index,re,im")?;
    for o in 0..taps.dim() {
        for i in 0..taps.dim() {
            for (t, m) in taps.taps.iter().enumerate() {
                let v = m[(o, i)];
                writeln!(w, "{o},{i},{t},{},{}", v.re, v.im)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn check_header(path: &Path, first: Option<(usize, std::io::Result<String>)>, expected: &str) -> Result<()> {
    match first {
        Some((_, Ok(line))) if line.trim() == expected => Ok(()),
        Some((_, Err(e))) => Err(e.into()),
        _ => Err(parse_err(path, 1, format!("expected header `{expected}`"))),
    }
}

/// Reads a tap tensor. Missing entries are an error; `spacing_s` is the tap
/// spacing in seconds (not stored in the file).
pub fn read_taps_csv(path: &Path, spacing_s: f64) -> Result<TapSet> {
    let mut lines = open(path)?.lines().enumerate();
    check_header(path, lines.next(), "stream_out,stream_in,tap_index,re,im")?;
    let mut entries = Vec::new();
    let (mut d, mut t) = (0, 0);
    for (i, line) in lines {
        let ln = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(path, ln, format!("expected 5 fields, found {}", f.len())));
        }
        let (o, inp, k) = (parse_usize(path, ln, f[0])?, parse_usize(path, ln, f[1])?, parse_usize(path, ln, f[2])?);
        let v = C64::new(parse_f64(path, ln, f[3])?, parse_f64(path, ln, f[4])?);
        d = d.max(o + 1).max(inp + 1);
        t = t.max(k + 1);
        entries.push((o, inp, k, v, ln));
    }
    if entries.len() != d * d * t || d == 0 {
        return Err(parse_err(
            path,
            0,
            format!("{} entries do not form a complete {d}x{d}x{t} tensor", entries.len()),
        ));
    }
    let mut taps = vec![CMat::zeros(d, d); t];
    let mut seen = vec![false; d * d * t];
    for (o, inp, k, v, ln) in entries {
        let slot = (k * d + o) * d + inp;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(parse_err(path, ln, format!("duplicate entry ({o},{inp},{k})")));
        }
        taps[k][(o, inp)] = v;
    }
    TapSet::new(taps, spacing_s)
}

pub fn write_traces_csv<W: Write>(equalized: &[Vec<C64>], reference: &[Vec<C64>], mut w: W) -> Result<()> {
    if equalized.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            context: "trace streams",
            expected: reference.len(),
            found: equalized.len(),
        });
    }
    writeln!(w, "stream,symbol_index,re_eq,im_eq,re_ref,im_ref")?;
    for (s, (y, x)) in equalized.iter().zip(reference).enumerate() {
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "trace length",
                expected: x.len(),
                found: y.len(),
            });
        }
        for (n, (a, b)) in y.iter().zip(x).enumerate() {
            writeln!(w, "{s},{n},{},{},{},{}", a.re, a.im, b.re, b.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Equalized and reference streams. Symbol indices must be contiguous from 0.
pub fn read_traces_csv(path: &Path) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let mut lines = open(path)?.lines().enumerate();
    check_header(path, lines.next(), "stream,symbol_index,re_eq,im_eq,re_ref,im_ref")?;
    let mut eq: Vec<Vec<C64>> = Vec::new();
    let mut rf: Vec<Vec<C64>> = Vec::new();
    for (i, line) in lines {
        let ln = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(parse_err(path, ln, format!("expected 6 fields, found {}", f.len())));
        }
        let s = parse_usize(path, ln, f[0])?;
        let n = parse_usize(path, ln, f[1])?;
        if s >= eq.len() {
            eq.resize(s + 1, Vec::new());
            rf.resize(s + 1, Vec::new());
        }
        if n != eq[s].len() {
            return Err(parse_err(path, ln, format!("stream {s}: expected symbol index {}, found {n}", eq[s].len())));
        }
        eq[s].push(C64::new(parse_f64(path, ln, f[2])?, parse_f64(path, ln, f[3])?));
        rf[s].push(C64::new(parse_f64(path, ln, f[4])?, parse_f64(path, ln, f[5])?));
    }
    if eq.is_empty() || eq.iter().any(|s| s.len() != eq[0].len()) {
        return Err(parse_err(path, 0, "streams missing or of unequal length"));
    }
    Ok((eq, rf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ModeTopology;
    use crate::features::{generate_dataset, DatasetSpec};

    fn small() -> Dataset {
        generate_dataset(&DatasetSpec {
            topology: ModeTopology::new(2).unwrap(),
            num_sections: 10,
            sigma_mdg_range_db: [0.2, 3.0],
            snr_range_db: [10.0, 20.0],
            snr_points: 3,
            realizations: 4,
            snr_imp_db: Some(18.8),
            seed: 1,
        })
        .unwrap()
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let ds = small();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# D=4 K=10 snr_imp_db=18.8 seed=1 version=1\nlam_db_1,"));
        let back = read_dataset(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.records, ds.records);
        assert_eq!(back.meta, ds.meta);
        let mut again = Vec::new();
        write_dataset(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn dataset_errors_carry_line_numbers() {
        let ds = small();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("1,2,3\n");
        match read_dataset(text.as_bytes(), Path::new("x.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 15),
            other => panic!("{other:?}"),
        }
        let bad = "# D=2 K=1 snr_imp_db=inf seed=0 version=9\n";
        assert!(read_dataset(bad.as_bytes(), Path::new("x")).is_err());
    }

    #[test]
    fn tap_and_trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = |s: f64| CMat::from_fn(2, 2, |i, j| C64::new(s + i as f64, -(j as f64) * 0.1));
        let taps = TapSet::new(vec![m(0.1), m(1.0), m(-0.3)], 1.0 / 60e9).unwrap();
        let p = dir.path().join("taps.csv");
        write_taps_csv(&taps, create(&p).unwrap()).unwrap();
        let back = read_taps_csv(&p, taps.spacing_s).unwrap();
        assert_eq!(back.taps, taps.taps);

        let eq = vec![vec![C64::new(0.1, 0.2); 3], vec![C64::new(-1.0, 0.5); 3]];
        let rf = vec![vec![C64::new(1.0, 0.0); 3], vec![C64::new(0.0, 1.0); 3]];
        let p = dir.path().join("traces.csv");
        write_traces_csv(&eq, &rf, create(&p).unwrap()).unwrap();
        assert_eq!(read_traces_csv(&p).unwrap(), (eq, rf));
    }

    #[test]
    fn incomplete_taps_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "stream_out,stream_in,tap_index,re,im\n0,0,0,1,0\n1,1,0,1,0\n").unwrap();
        assert!(read_taps_csv(&p, 1e-11).is_err());
        assert!(matches!(read_taps_csv(&dir.path().join("none.csv"), 1e-11), Err(Error::File { .. })));
    }
}
