use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Operation counts per forward pass, by kind. `comparisons` includes the
/// index concatenations that go with them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Compute {
    pub multiplications: u128,
    pub additions: u128,
    pub comparisons: u128,
}

impl Compute {
    pub fn total(&self) -> u128 {
        self.multiplications + self.additions + self.comparisons
    }
}

impl std::ops::Add for Compute {
    type Output = Compute;

    fn add(self, o: Compute) -> Compute {
        Compute {
            multiplications: self.multiplications + o.multiplications,
            additions: self.additions + o.additions,
            comparisons: self.comparisons + o.comparisons,
        }
    }
}

/// Values loaded per new token: `fixed + per_inp * n_inp`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bandwidth {
    pub fixed: u128,
    pub per_inp: u128,
}

impl Bandwidth {
    pub fn fixed(v: u128) -> Self {
        Bandwidth { fixed: v, per_inp: 0 }
    }

    pub fn at(&self, n_inp: u128) -> u128 {
        self.fixed + self.per_inp * n_inp
    }
}

impl std::ops::Add for Bandwidth {
    type Output = Bandwidth;

    fn add(self, o: Bandwidth) -> Bandwidth {
        Bandwidth {
            fixed: self.fixed + o.fixed,
            per_inp: self.per_inp + o.per_inp,
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.per_inp {
            0 => write!(f, "{}", self.fixed),
            p => write!(f, "{}+{}*n_inp", self.fixed, p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub name: String,
    pub footprint: u128,
    pub bandwidth: Bandwidth,
    pub compute: Compute,
}

/// Footprint, bandwidth and compute of a model, component by component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResourceReport {
    pub title: String,
    /// Context length used to evaluate bandwidth expressions.
    pub n_inp: u128,
    pub components: Vec<Component>,
}

impl ResourceReport {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn footprint(&self) -> u128 {
        self.components.iter().map(|c| c.footprint).sum()
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.components.iter().fold(Bandwidth::default(), |a, c| a + c.bandwidth)
    }

    pub fn compute(&self) -> Compute {
        self.components.iter().fold(Compute::default(), |a, c| a + c.compute)
    }

    /// `(component, metric, value)` rows, components first, then totals.
    pub fn rows(&self) -> Vec<(String, &'static str, String)> {
        let mut out = Vec::new();
        let mut push = |name: &str, footprint: u128, bw: Bandwidth, c: Compute| {
            out.push((name.to_string(), "memory_footprint", footprint.to_string()));
            out.push((name.to_string(), "bandwidth_per_token", bw.to_string()));
            if bw.per_inp != 0 {
                out.push((name.to_string(), "bandwidth_at_n_inp", bw.at(self.n_inp).to_string()));
            }
            out.push((name.to_string(), "multiplications", c.multiplications.to_string()));
            out.push((name.to_string(), "additions", c.additions.to_string()));
            out.push((name.to_string(), "comparisons_and_concatenations", c.comparisons.to_string()));
            out.push((name.to_string(), "compute_total", c.total().to_string()));
        };
        for c in &self.components {
            push(&c.name, c.footprint, c.bandwidth, c.compute);
        }
        push("total", self.footprint(), self.bandwidth(), self.compute());
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["component", "metric", "value"]).map_err(io)?;
        for (c, m, v) in self.rows() {
            w.write_record([c.as_str(), m, v.as_str()]).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let wc = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("component".len());
        let wm = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let wv = rows.iter().map(|r| r.2.len()).max().unwrap_or(0);
        let mut s = format!("{} (n_inp = {})\n", self.title, self.n_inp);
        let _ = writeln!(s, "{:<wc$}  {:<wm$}  {:>wv$}", "component", "metric", "value");
        let _ = writeln!(s, "{}", "-".repeat(wc + wm + wv + 4));
        for (c, m, v) in rows {
            let _ = writeln!(s, "{c:<wc$}  {m:<wm$}  {v:>wv$}");
        }
        s
    }
}
