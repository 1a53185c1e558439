use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{BenchError, Interval, RangeSpec, VarRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Chi2Pdf,
    Ndo,
    Nnn,
    Msb,
    Fhst,
    Bdc,
    Sfl,
    Nomc,
    Ecbg,
    Hhm,
}

impl Problem {
    pub const ALL: [Problem; 10] = [
        Problem::Chi2Pdf,
        Problem::Ndo,
        Problem::Nnn,
        Problem::Msb,
        Problem::Fhst,
        Problem::Bdc,
        Problem::Sfl,
        Problem::Nomc,
        Problem::Ecbg,
        Problem::Hhm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Problem::Chi2Pdf => "chi2pdf",
            Problem::Ndo => "ndo",
            Problem::Nnn => "nnn",
            Problem::Msb => "msb",
            Problem::Fhst => "fhst",
            Problem::Bdc => "bdc",
            Problem::Sfl => "sfl",
            Problem::Nomc => "nomc",
            Problem::Ecbg => "ecbg",
            Problem::Hhm => "hhm",
        }
    }

    pub fn is_synthetic(self) -> bool {
        !matches!(self, Problem::Msb | Problem::Bdc | Problem::Sfl | Problem::Nomc)
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == lower)
            .ok_or_else(|| BenchError::Catalog {
                name: s.to_string(),
                valid: Problem::ALL.iter().map(|p| p.name().to_string()).collect(),
            })
    }
}

/// Published row counts per split; `None` where no count is published.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: Option<usize>,
    pub test_id: Option<usize>,
    pub test_ood: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub problem: Problem,
    pub name: String,
    pub description: String,
    pub domain: String,
    pub var_names: Vec<String>,
    pub target_name: String,
    pub counts: SplitCounts,
    pub agents: usize,
    pub iterations: usize,
    pub hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<RangeSpec>,
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn linear_frame(vars: &[&str]) -> String {
    let mut terms = vec!["p0".to_string()];
    for (i, v) in vars.iter().enumerate() {
        terms.push(format!("p{} * {v}", i + 1));
    }
    terms.join(" + ")
}

#[allow(clippy::too_many_arguments)]
fn entry(
    problem: Problem,
    description: &str,
    domain: &str,
    vars: &[&str],
    target: &str,
    counts: (Option<usize>, Option<usize>, Option<usize>),
    agents: usize,
    iterations: usize,
    ranges: Option<Vec<VarRange>>,
) -> CatalogEntry {
    let ranges = ranges.map(|vars| RangeSpec {
        vars,
        n_train: counts.0.unwrap_or(0),
        n_test_id: counts.1.unwrap_or(0),
        n_test_ood: counts.2.unwrap_or(0),
    });
    CatalogEntry {
        problem,
        name: problem.name().to_string(),
        description: description.to_string(),
        domain: domain.to_string(),
        var_names: names(vars),
        target_name: target.to_string(),
        counts: SplitCounts {
            train: counts.0,
            test_id: counts.1,
            test_ood: counts.2,
        },
        agents,
        iterations,
        hypothesis: linear_frame(vars),
        ranges,
    }
}

fn build() -> Vec<CatalogEntry> {
    use Interval as I;
    vec![
        entry(
            Problem::Chi2Pdf,
            "Probability density of the chi-squared distribution at data point x with k degrees of freedom.",
            "statistics",
            &["x", "k"],
            "density",
            (Some(1000), Some(200), Some(200)),
            50,
            100,
            Some(vec![
                VarRange::new("x", I::left_open(0.0, 10.0)).with_ood(I::left_open(10.0, 20.0)),
                VarRange::new("k", I::integers(1, 10)),
            ]),
        ),
        entry(
            Problem::Ndo,
            "Acceleration a of a forced nonlinear damped oscillator from time t, position x and velocity v.",
            "physics",
            &["t", "x", "v"],
            "a",
            (Some(10_000), Some(10_000), Some(10_000)),
            50,
            100,
            Some(vec![
                VarRange::new("t", I::closed(0.0, 10.0)),
                VarRange::new("x", I::closed(-2.0, 2.0)).with_ood(I::left_open(2.0, 3.0)),
                VarRange::new("v", I::closed(-2.0, 2.0)),
            ]),
        ),
        entry(
            Problem::Nnn,
            "Output y of an unknown fully-connected network with sigmoid activations and inputs x1, x2.",
            "machine learning",
            &["x1", "x2"],
            "y",
            (Some(10_000), Some(2000), Some(2000)),
            50,
            200,
            Some(vec![
                VarRange::new("x1", I::closed(-3.0, 3.0)).with_ood(I::left_open(3.0, 6.0)),
                VarRange::new("x2", I::closed(-3.0, 3.0)),
            ]),
        ),
        entry(
            Problem::Msb,
            "Stress of aluminium 6061-T651 as a function of strain and temperature.",
            "materials science",
            &["strain", "temp"],
            "stress",
            (None, None, None),
            50,
            100,
            None,
        ),
        entry(
            Problem::Fhst,
            "Gibbs free energy of mixing per lattice site from polymer volume fraction phi, chain length N and interaction parameter chi.",
            "polymer science",
            &["phi", "N", "chi"],
            "dG_mix",
            (Some(10_000), Some(2000), Some(2000)),
            100,
            50,
            Some(vec![
                VarRange::new("phi", I::closed(0.05, 0.95)),
                VarRange::new("N", I::integers(1, 100)),
                VarRange::new("chi", I::closed(0.0, 2.0)).with_ood(I::left_open(2.0, 4.0)),
            ]),
        ),
        entry(
            Problem::Bdc,
            "Discharge capacity of a Li-ion cell from cycle index, voltage, current, temperature, load voltage and load current.",
            "materials science",
            &["cycle", "voltage", "current", "temperature", "voltage_load", "current_load"],
            "capacity",
            (Some(334), Some(83), None),
            50,
            100,
            None,
        ),
        entry(
            Problem::Sfl,
            "Fatigue limit of steel from weight percents of C, Si, Mn, P, S, Ni, Cr, Cu, Mo and tempering temperature.",
            "materials science",
            &["C", "Si", "Mn", "P", "S", "Ni", "Cr", "Cu", "Mo", "temper_temp"],
            "fatigue_limit",
            (Some(350), Some(87), None),
            50,
            100,
            None,
        ),
        entry(
            Problem::Nomc,
            "C2 yield of a non-oxidative methane conversion reactor from pressure, temperature, flow rate, H2 feed, reactor length and diameter.",
            "organic chemistry",
            &["pressure", "temperature", "flow_rate", "h2_feed", "length", "diameter"],
            "c2_yield",
            (Some(200), Some(51), None),
            50,
            200,
            None,
        ),
        entry(
            Problem::Ecbg,
            "Growth rate dB/dt of E. coli from population density B, substrate concentration S, temperature T and pH.",
            "mathematical biology",
            &["B", "S", "T", "pH"],
            "dB_dt",
            (Some(7500), Some(2500), Some(2500)),
            50,
            200,
            Some(vec![
                VarRange::new("B", I::closed(0.0, 10.0)),
                VarRange::new("S", I::closed(0.0, 5.0)).with_ood(I::left_open(5.0, 10.0)),
                VarRange::new("T", I::closed(15.0, 45.0)),
                VarRange::new("pH", I::closed(4.0, 10.0)),
            ]),
        ),
        entry(
            Problem::Hhm,
            "Rate of membrane potential change dV/dt from potential V, gating probabilities m, n, h and external current I_ext.",
            "mathematical biology",
            &["V", "m", "n", "h", "I_ext"],
            "dV_dt",
            (Some(10_000), Some(2000), Some(2000)),
            50,
            100,
            Some(vec![
                VarRange::new("V", I::closed(-75.0, 35.0)).with_ood(I::open(-100.0, -75.0)),
                VarRange::new("m", I::closed(0.0, 1.0)),
                VarRange::new("n", I::closed(0.0, 1.0)),
                VarRange::new("h", I::closed(0.0, 1.0)),
                VarRange::new("I_ext", I::closed(0.0, 35.0)).with_ood(I::open(35.0, 50.0)),
            ]),
        ),
    ]
}

pub fn catalog() -> &'static [CatalogEntry] {
    static CATALOG: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    CATALOG.get_or_init(build)
}

pub fn lookup(name: &str) -> Result<&'static CatalogEntry, BenchError> {
    let problem: Problem = name.parse()?;
    Ok(catalog()
        .iter()
        .find(|e| e.problem == problem)
        .expect("every problem has an entry"))
}
