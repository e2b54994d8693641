use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Observed path of the process: rows `t = 0..=T` of `(y_t, v_t, x_t)`.
///
/// Row 0 is always `(0, 1, 1)`. Synthetic traces may carry the offset that
/// generated them in `a_true`; row 0 repeats the offset of step 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    y: Vec<bool>,
    v: Vec<u64>,
    x: Vec<u64>,
    a_true: Option<Vec<f64>>,
}

impl Trace {
    /// Builds a trace from full columns and checks every row invariant.
    pub fn from_columns(
        y: Vec<bool>,
        v: Vec<u64>,
        x: Vec<u64>,
        a_true: Option<Vec<f64>>,
    ) -> Result<Self> {
        let trace = Self { y, v, x, a_true };
        trace.validate()?;
        Ok(trace)
    }

    /// Builds a trace from the step indicators and leaf counts; vertex counts
    /// are accumulated from `y`.
    pub fn from_steps(y: Vec<bool>, x: Vec<u64>, a_true: Option<Vec<f64>>) -> Result<Self> {
        let mut v = Vec::with_capacity(y.len());
        let mut count = 1u64;
        for (t, &bit) in y.iter().enumerate() {
            if t > 0 {
                count += bit as u64;
            }
            v.push(count);
        }
        Self::from_columns(y, v, x, a_true)
    }

    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 || self.v.len() != n || self.x.len() != n {
            return Err(Error::Config("trace columns must be non-empty and of equal length".into()));
        }
        if let Some(a) = &self.a_true {
            if a.len() != n {
                return Err(Error::Config("a_true column length mismatch".into()));
            }
        }
        if self.y[0] || self.v[0] != 1 || self.x[0] != 1 {
            return Err(Error::Parse {
                line: 2,
                msg: "row t=0 must be (y=0, v=1, x=1)".into(),
            });
        }
        for t in 1..n {
            let line = t as u64 + 2;
            let (v0, v1) = (self.v[t - 1], self.v[t]);
            if v1 != v0 + self.y[t] as u64 {
                return Err(Error::Parse {
                    line,
                    msg: format!("v_t - v_(t-1) must equal y_t at t={t}"),
                });
            }
            let dx = self.x[t] as i64 - self.x[t - 1] as i64;
            if !(-2..=1).contains(&dx) {
                return Err(Error::Parse {
                    line,
                    msg: format!("leaf count jumps by {dx} at t={t}"),
                });
            }
            if self.x[t] > self.v[t] {
                return Err(Error::Parse {
                    line,
                    msg: format!("leaf count {} outside [0, v_t = {}] at t={t}", self.x[t], v1),
                });
            }
        }
        Ok(())
    }

    /// Final time index T.
    pub fn horizon(&self) -> usize {
        self.y.len() - 1
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }

    pub fn v(&self) -> &[u64] {
        &self.v
    }

    pub fn x(&self) -> &[u64] {
        &self.x
    }

    pub fn a_true(&self) -> Option<&[f64]> {
        self.a_true.as_deref()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Never)
            .from_writer(out);
        match &self.a_true {
            Some(_) => w.write_record(["t", "y", "v", "x", "a_true"])?,
            None => w.write_record(["t", "y", "v", "x"])?,
        }
        for t in 0..self.y.len() {
            let mut row = vec![
                t.to_string(),
                (self.y[t] as u8).to_string(),
                self.v[t].to_string(),
                self.x[t].to_string(),
            ];
            if let Some(a) = &self.a_true {
                row.push(a[t].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let with_a = match names.as_slice() {
            ["t", "y", "v", "x"] => false,
            ["t", "y", "v", "x", "a_true"] => true,
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header t,y,v,x[,a_true], found {}", names.join(",")),
                })
            }
        };
        let (mut y, mut v, mut x) = (Vec::new(), Vec::new(), Vec::new());
        let mut a = with_a.then(Vec::new);
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| -> Result<&str> {
                record.get(i).map(str::trim).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing column {}", i + 1),
                })
            };
            let int = |i: usize| -> Result<u64> {
                field(i)?.parse::<u64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("column {}: {e}", i + 1),
                })
            };
            if int(0)? != y.len() as u64 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected t = {}", y.len()),
                });
            }
            y.push(match int(1)? {
                0 => false,
                1 => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("y must be 0 or 1, found {other}"),
                    })
                }
            });
            v.push(int(2)?);
            x.push(int(3)?);
            if let Some(a) = a.as_mut() {
                a.push(field(4)?.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    msg: format!("a_true: {e}"),
                })?);
            }
        }
        Self::from_columns(y, v, x, a)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
