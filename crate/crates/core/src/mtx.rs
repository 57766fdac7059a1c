//! Matrix Market text I/O for dense real matrices and vectors.
//!
//! Reads `array` and `coordinate` files with `real` or `integer` fields and
//! `general` or `symmetric` symmetry. Writes `array real general`, entries in
//! column-major order with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A dense matrix read from disk, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseData {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseData> {
    parse_matrix(BufReader::new(File::open(path)?))
}

pub fn parse_matrix<R: Read>(reader: BufReader<R>) -> Result<DenseData> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((i, l)) => (i, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(
            lineno,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        ));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(parse_err(lineno, format!("unsupported format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(lineno, format!("unsupported field '{other}'"))),
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(lineno, format!("unsupported symmetry '{other}'"))),
    };

    let mut data = lines.filter_map(|(i, l)| match l {
        Ok(s) => {
            let t = s.trim().to_string();
            (!t.is_empty() && !t.starts_with('%')).then_some(Ok((i, t)))
        }
        Err(e) => Some(Err(e)),
    });

    let (size_line, size) = data
        .next()
        .transpose()?
        .ok_or_else(|| parse_err(lineno + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(size_line, format!("bad integer '{t}'")))
        })
        .collect::<Result<_>>()?;
    let expected_dims = if layout == Layout::Array { 2 } else { 3 };
    if dims.len() != expected_dims {
        return Err(parse_err(size_line, "wrong number of size fields"));
    }
    let (nrows, ncols) = (dims[0], dims[1]);
    if symmetric && nrows != ncols {
        return Err(parse_err(size_line, "symmetric matrix must be square"));
    }
    let mut entries = vec![0.0; nrows * ncols];

    let parse_f = |line: usize, t: &str| -> Result<f64> {
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(line, format!("bad number '{t}'")))?;
        if !v.is_finite() {
            return Err(parse_err(line, "non-finite value"));
        }
        Ok(v)
    };

    match layout {
        Layout::Array => {
            // column-major; symmetric stores the lower triangle only
            let positions: Vec<(usize, usize)> = (0..ncols)
                .flat_map(|j| {
                    let start = if symmetric { j } else { 0 };
                    (start..nrows).map(move |i| (i, j))
                })
                .collect();
            let mut count = 0;
            for item in data.by_ref() {
                let (line, text) = item?;
                for tok in text.split_whitespace() {
                    let &(i, j) = positions
                        .get(count)
                        .ok_or_else(|| parse_err(line, "too many entries"))?;
                    let v = parse_f(line, tok)?;
                    entries[i * ncols + j] = v;
                    if symmetric {
                        entries[j * ncols + i] = v;
                    }
                    count += 1;
                }
            }
            if count != positions.len() {
                return Err(parse_err(
                    size_line,
                    format!("expected {} entries, found {count}", positions.len()),
                ));
            }
        }
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut count = 0;
            for item in data.by_ref() {
                let (line, text) = item?;
                let f: Vec<&str> = text.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(parse_err(line, "coordinate entry needs 'row col value'"));
                }
                let i: usize = f[0].parse().map_err(|_| parse_err(line, "bad row index"))?;
                let j: usize = f[1]
                    .parse()
                    .map_err(|_| parse_err(line, "bad column index"))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(line, format!("index ({i}, {j}) out of range")));
                }
                let v = parse_f(line, f[2])?;
                entries[(i - 1) * ncols + (j - 1)] += v;
                if symmetric && i != j {
                    entries[(j - 1) * ncols + (i - 1)] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(parse_err(
                    size_line,
                    format!("expected {nnz} entries, found {count}"),
                ));
            }
        }
    }
    Ok(DenseData {
        nrows,
        ncols,
        entries,
    })
}

/// Reads an `n × 1` or `1 × n` matrix as a vector.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.nrows != 1 && m.ncols != 1 {
        return Err(Error::InvalidInput(format!(
            "expected a vector, found a {}x{} matrix",
            m.nrows, m.ncols
        )));
    }
    Ok(m.entries)
}

pub fn write_matrix(
    path: impl AsRef<Path>,
    nrows: usize,
    ncols: usize,
    row_major: &[f64],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    format_matrix(&mut w, nrows, ncols, row_major)?;
    w.flush()?;
    Ok(())
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    write_matrix(path, v.len(), 1, v)
}

pub fn format_matrix<W: Write>(
    w: &mut W,
    nrows: usize,
    ncols: usize,
    row_major: &[f64],
) -> Result<()> {
    assert_eq!(row_major.len(), nrows * ncols);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{nrows} {ncols}")?;
    for j in 0..ncols {
        for i in 0..nrows {
            writeln!(w, "{:.16e}", row_major[i * ncols + j])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<DenseData> {
        parse_matrix(BufReader::new(s.as_bytes()))
    }

    #[test]
    fn array_is_column_major() {
        let m =
            parse("%%MatrixMarket matrix array real general\n% comment\n2 3\n1\n4\n2\n5\n3\n6\n")
                .unwrap();
        assert_eq!((m.nrows, m.ncols), (2, 3));
        assert_eq!(m.entries, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn coordinate_general_and_symmetric() {
        let m = parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.5\n2 1 -2\n")
            .unwrap();
        assert_eq!(m.entries, vec![1.5, 0.0, -2.0, 0.0]);
        let s = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 1 3\n")
            .unwrap();
        assert_eq!(s.entries, vec![1.0, 3.0, 3.0, 0.0]);
    }

    #[test]
    fn symmetric_array_lower_triangle() {
        let s = parse("%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(s.entries, vec![1.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse("").is_err());
        assert!(parse("%%MatrixMarket matrix array complex general\n1 1\n1\n").is_err());
        assert!(parse("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n").is_err());
        assert!(matches!(
            parse("%%MatrixMarket matrix array real general\n1 1\nabc\n"),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn write_then_read_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mtx");
        let vals = [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0, 2.0_f64.sqrt()];
        write_matrix(&path, 2, 3, &vals).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!((back.nrows, back.ncols), (2, 3));
        for (a, b) in back.entries.iter().zip(vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let vpath = dir.path().join("v.mtx");
        write_vector(&vpath, &vals).unwrap();
        assert_eq!(read_vector(&vpath).unwrap().len(), 6);
        assert!(read_vector(&path).is_err());
    }
}
