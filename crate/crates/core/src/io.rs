//! Text formats: bitstring counts, result records and plot data.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::basis::format_bits;
use crate::error::{Error, Result};
use crate::rmt::{cue_r_pdf, poisson_r_pdf};
use crate::samples::{SampleSet, MAX_SAMPLE_QUBITS, ORDER_TAG};
use crate::sweep::{ResultRecord, GAP_BINS, PT_BINS, PT_RANGE};

/// Writes `bitstring<TAB>count` rows under `# n` and `# order` headers.
pub fn write_counts(w: &mut impl Write, samples: &SampleSet) -> Result<()> {
    writeln!(w, "# n {}", samples.n())?;
    writeln!(w, "# order {ORDER_TAG}")?;
    for (s, c) in samples.counts() {
        writeln!(w, "{}\t{c}", format_bits(s, samples.n()))?;
    }
    Ok(())
}

pub fn write_counts_file(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_counts(&mut f, samples)?;
    f.flush()?;
    Ok(())
}

/// Parses a counts table; duplicate rows are summed.
pub fn read_counts(r: impl BufRead, path: &Path) -> Result<SampleSet> {
    let err = |line: usize, msg: String| Error::format(path, line, msg);
    let mut n: Option<usize> = None;
    let mut counts: BTreeMap<u128, u64> = BTreeMap::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(header) = text.strip_prefix('#') {
            let mut parts = header.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("n"), Some(v)) => {
                    let v: usize = v.parse().map_err(|_| err(lineno, format!("bad qubit count `{v}`")))?;
                    if v == 0 || v > MAX_SAMPLE_QUBITS {
                        return Err(err(lineno, format!("qubit count {v} outside 1..={MAX_SAMPLE_QUBITS}")));
                    }
                    if n.is_some_and(|old| old != v) {
                        return Err(err(lineno, "conflicting n headers".into()));
                    }
                    n = Some(v);
                }
                (Some("order"), Some(tag)) if tag != ORDER_TAG => {
                    return Err(err(lineno, format!("unsupported qubit order `{tag}` (expected {ORDER_TAG})")));
                }
                _ => {}
            }
            continue;
        }
        let mut cols = text.split('\t');
        let (bits, count) = match (cols.next(), cols.next(), cols.next()) {
            (Some(b), Some(c), None) => (b.trim(), c.trim()),
            _ => return Err(err(lineno, "expected `bitstring<TAB>count`".into())),
        };
        let width = *n.get_or_insert(bits.len());
        if bits.len() != width {
            return Err(err(lineno, format!("bitstring has {} characters, expected {width}", bits.len())));
        }
        if width > MAX_SAMPLE_QUBITS {
            return Err(err(lineno, format!("bitstrings wider than {MAX_SAMPLE_QUBITS} are not supported")));
        }
        let value = bits.bytes().try_fold(0u128, |acc, b| match b {
            b'0' => Ok(acc << 1),
            b'1' => Ok((acc << 1) | 1),
            _ => Err(err(lineno, format!("invalid character `{}` in bitstring", b as char))),
        })?;
        let c: u64 = count.parse().map_err(|_| err(lineno, format!("bad count `{count}`")))?;
        *counts.entry(value).or_insert(0) += c;
    }
    counts.retain(|_, c| *c > 0);
    let n = n.ok_or_else(|| err(0, "no qubit count and no rows".into()))?;
    if counts.is_empty() {
        return Err(err(0, "file holds no samples".into()));
    }
    SampleSet::from_counts(n, &counts)
}

pub fn read_counts_file(path: &Path) -> Result<SampleSet> {
    let f = fs::File::open(path)?;
    read_counts(BufReader::new(f), path)
}

pub fn write_record(path: &Path, record: &ResultRecord) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, record.to_json()?)?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<ResultRecord> {
    let text = fs::read_to_string(path)?;
    ResultRecord::from_json(&text).map_err(|e| Error::format(path, 0, e.to_string()))
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

/// One delimited file per figure family; returns the paths written.
pub fn emit_plot_data(record: &ResultRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |name: String| -> Result<(PathBuf, std::io::BufWriter<fs::File>)> {
        let path = dir.join(name);
        written.push(path.clone());
        Ok((path.clone(), std::io::BufWriter::new(fs::File::create(path)?)))
    };

    // entropy versus J, one file per patch shape
    let mut shapes: Vec<String> = record.config.patches.iter().map(|p| p.shape.clone()).collect();
    shapes.sort();
    shapes.dedup();
    for shape in &shapes {
        let (_, mut w) = open(format!("entropy_vs_j_{shape}.tsv"))?;
        writeln!(w, "# system {}x{}", record.config.lx, record.config.ly)?;
        writeln!(w, "# n_f {}", record.config.n_f)?;
        writeln!(w, "# seed {}", record.config.seed)?;
        writeln!(w, "# base {}", record.config.base.tag())?;
        writeln!(w, "patch\tk\tJ_over_pi\tvalue\tstderr\treference\tin_band")?;
        let labels: Vec<&str> =
            record.patches.iter().filter(|p| &p.shape == shape).map(|p| p.label.as_str()).collect();
        for c in record.curves.iter().filter(|c| labels.contains(&c.name.as_str()) || c.name == format!("{shape}@avg")) {
            for i in 0..c.curve.len() {
                let reference = c.curve.reference.map_or("nan".to_string(), f);
                let band = c.curve.in_band(i).map_or("nan", |b| if b { "1" } else { "0" });
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}\t{reference}\t{band}",
                    c.name,
                    c.k,
                    f(c.curve.j[i] / std::f64::consts::PI),
                    f(c.curve.values[i]),
                    f(c.curve.stderr[i])
                )?;
            }
        }
        w.flush()?;
    }

    let (_, mut w) = open("gap_ratio_hist.tsv".into())?;
    writeln!(w, "J_over_pi\tmean_r\tr\tdensity\tpoisson\tcue")?;
    for s in &record.spectra {
        for (b, d) in s.histogram.iter().enumerate() {
            let r = (b as f64 + 0.5) / GAP_BINS as f64;
            writeln!(w, "{}\t{}\t{}\t{}\t{}\t{}", f(s.j_over_pi), f(s.mean_r), f(r), f(*d), f(poisson_r_pdf(r)), f(cue_r_pdf(r)))?;
        }
    }
    w.flush()?;

    let (_, mut w) = open("porter_thomas_hist.tsv".into())?;
    writeln!(w, "J_over_pi\tdim\tks\tx\tdensity\treference")?;
    for p in &record.porter_thomas {
        for (b, d) in p.histogram.iter().enumerate() {
            let x = (b as f64 + 0.5) * PT_RANGE / PT_BINS as f64;
            writeln!(w, "{}\t{}\t{}\t{}\t{}\t{}", f(p.j_over_pi), p.dim, f(p.ks), f(x), f(*d), f((-x).exp()))?;
        }
    }
    w.flush()?;

    let (_, mut w) = open("weight_hist.tsv".into())?;
    writeln!(w, "J_over_pi\tp\th\tfrequency\tfitted_pmf")?;
    for p in &record.weights {
        let total: u64 = p.histogram.iter().sum();
        for (h, (&c, &q)) in p.histogram.iter().zip(&p.pmf).enumerate() {
            writeln!(w, "{}\t{}\t{h}\t{}\t{}", f(p.j_over_pi), f(p.p), f(c as f64 / total as f64), f(q))?;
        }
    }
    w.flush()?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SampleSet> {
        read_counts(text.as_bytes(), Path::new("mem.tsv"))
    }

    #[test]
    fn reads_simple_files() {
        let s = parse("# n 4\n# order row-major-q0-left\n0110\t3\n").unwrap();
        assert_eq!((s.n(), s.len()), (4, 3));
        let merged = parse("0110\t3\n1001\t1\n0110\t2\n").unwrap();
        assert_eq!(merged.counts(), BTreeMap::from([(0b0110u128, 5u64), (0b1001, 1)]));
    }

    #[test]
    fn positional_errors() {
        let e = parse("# n 4\n0110\t3\n011\t1\n").unwrap_err();
        assert!(matches!(e, Error::DataFormat { line: 3, .. }), "{e:?}");
        let e = parse("0110\tx\n").unwrap_err();
        assert!(matches!(e, Error::DataFormat { line: 1, .. }));
        let e = parse("01a0\t1\n").unwrap_err();
        assert!(matches!(e, Error::DataFormat { line: 1, .. }));
        assert!(parse("# order column-major\n0110\t1\n").is_err());
        assert!(parse("# n 4\n").is_err());
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn round_trip_is_identity() {
        let set = SampleSet::from_shots(5, vec![1, 2, 2, 31, 0, 2]).unwrap();
        let mut buf = Vec::new();
        write_counts(&mut buf, &set).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.counts(), set.counts());
        assert_eq!(back.n(), 5);
    }

    #[test]
    fn wide_strings() {
        let row = "1".repeat(100);
        let s = parse(&format!("{row}\t2\n")).unwrap();
        assert_eq!(s.shots()[0].count_ones(), 100);
    }
}
