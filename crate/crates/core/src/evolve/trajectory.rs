use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::FieldPair;
use crate::error::{Error, Result};

const BASE_COLUMNS: [&str; 7] = ["t", "l2_u1", "linf_u1", "j_u1", "l2_u2", "linf_u2", "j_u2"];
const ERROR_COLUMNS: [&str; 4] = ["errl2_1", "errlinf_1", "errl2_2", "errlinf_2"];

/// `‖u_j − u_ap,j‖` in L² and L∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileErrors {
    pub errl2_1: f64,
    pub errlinf_1: f64,
    pub errl2_2: f64,
    pub errlinf_2: f64,
}

/// Norms of `u1`, `u2` at one time. `j_*` is `‖J(t) u‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub l2_u1: f64,
    pub linf_u1: f64,
    pub j_u1: f64,
    pub l2_u2: f64,
    pub linf_u2: f64,
    pub j_u2: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub errors: Option<ProfileErrors>,
}

impl Observables {
    pub fn is_finite(&self) -> bool {
        let base = [self.l2_u1, self.linf_u1, self.j_u1, self.l2_u2, self.linf_u2, self.j_u2];
        base.iter().all(|v| v.is_finite())
            && self
                .errors
                .is_none_or(|e| [e.errl2_1, e.errlinf_1, e.errl2_2, e.errlinf_2].iter().all(|v| v.is_finite()))
    }

    /// Named column lookup, for fitting.
    pub fn get(&self, column: &str) -> Option<f64> {
        let e = self.errors;
        match column {
            "t" => Some(self.t),
            "l2_u1" => Some(self.l2_u1),
            "linf_u1" => Some(self.linf_u1),
            "j_u1" => Some(self.j_u1),
            "l2_u2" => Some(self.l2_u2),
            "linf_u2" => Some(self.linf_u2),
            "j_u2" => Some(self.j_u2),
            "errl2_1" => e.map(|e| e.errl2_1),
            "errlinf_1" => e.map(|e| e.errlinf_1),
            "errl2_2" => e.map(|e| e.errl2_2),
            "errlinf_2" => e.map(|e| e.errlinf_2),
            _ => None,
        }
    }
}

/// Observables at the output times of a run, optionally with the fields.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub observables: Vec<Observables>,
    /// Aligned with `observables` when the run stored snapshots, else empty.
    pub snapshots: Vec<FieldPair>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.t).collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        self.observables
            .iter()
            .map(|o| {
                o.get(name)
                    .ok_or_else(|| Error::InvalidInput(format!("trajectory has no column {name:?}")))
            })
            .collect()
    }

    pub fn last(&self) -> Option<&Observables> {
        self.observables.last()
    }

    pub(crate) fn push(&mut self, obs: Observables, snapshot: Option<FieldPair>) -> Result<()> {
        if !obs.is_finite() {
            return Err(Error::NonFinite { t: obs.t });
        }
        self.observables.push(obs);
        if let Some(s) = snapshot {
            self.snapshots.push(s);
        }
        Ok(())
    }

    pub fn has_errors(&self) -> bool {
        !self.observables.is_empty() && self.observables.iter().all(|o| o.errors.is_some())
    }

    /// Header `t,l2_u1,linf_u1,j_u1,l2_u2,linf_u2,j_u2`, plus the four error
    /// columns when every row carries them.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_errors = self.has_errors();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
        if with_errors {
            header.extend(ERROR_COLUMNS);
        }
        w.write_record(&header)?;
        for o in &self.observables {
            let mut row = vec![o.t, o.l2_u1, o.linf_u1, o.j_u1, o.l2_u2, o.linf_u2, o.j_u2];
            if let (true, Some(e)) = (with_errors, o.errors) {
                row.extend([e.errl2_1, e.errlinf_1, e.errl2_2, e.errlinf_2]);
            }
            w.write_record(row.iter().map(f64::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let with_errors = if header == BASE_COLUMNS {
            false
        } else if header.len() == 11 && header[..7] == BASE_COLUMNS && header[7..] == ERROR_COLUMNS {
            true
        } else {
            return Err(Error::InvalidInput(format!(
                "unexpected trajectory header {}",
                header.join(",")
            )));
        };
        let mut out = Trajectory::default();
        for record in r.deserialize::<Vec<f64>>() {
            let v = record?;
            let errors = with_errors.then(|| ProfileErrors {
                errl2_1: v[7],
                errlinf_1: v[8],
                errl2_2: v[9],
                errlinf_2: v[10],
            });
            out.observables.push(Observables {
                t: v[0],
                l2_u1: v[1],
                linf_u1: v[2],
                j_u1: v[3],
                l2_u2: v[4],
                linf_u2: v[5],
                j_u2: v[6],
                errors,
            });
        }
        Ok(out)
    }
}
