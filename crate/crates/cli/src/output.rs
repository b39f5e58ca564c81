//! Deterministic CSV emission with a fixed, versioned column schema.

use direx_core::behaviour::QubitSetup;
use direx_core::eat::RateReport;

pub const CSV_HEADER: &str =
    "grid_value,theta,angles,asymptotic_rate,eat_rate,beta,eps_v,eps_k,eps_omega,eps_comp,output_length";
pub const CSV_VERSION: &str = "# direx csv v1";

/// Fixed-precision scientific notation keeps reruns byte-identical.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.12e}")
    }
}

pub fn angles_field(setup: Option<&QubitSetup>) -> String {
    match setup {
        None => String::new(),
        Some(s) => {
            let a: Vec<String> = s.alice_angles.iter().map(|&v| fmt(v)).collect();
            let b: Vec<String> = s.bob_angles.iter().map(|&v| fmt(v)).collect();
            format!("{}|{}", a.join(";"), b.join(";"))
        }
    }
}

pub struct CsvRow {
    pub grid_value: f64,
    pub setup: Option<QubitSetup>,
    pub asymptotic_rate: f64,
    pub report: Option<RateReport>,
    pub eps_comp: f64,
}

pub fn render(rows: &[CsvRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_VERSION);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let theta = row.setup.as_ref().map_or(f64::NAN, |s| s.theta);
        let (eat_rate, beta, eps_v, eps_k, eps_omega, output_length) = match &row.report {
            Some(r) => (r.rate_per_round, r.beta, r.eps_v, r.eps_k, r.eps_omega, r.output_length),
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt(row.grid_value),
            fmt(theta),
            angles_field(row.setup.as_ref()),
            fmt(row.asymptotic_rate),
            fmt(eat_rate),
            fmt(beta),
            fmt(eps_v),
            fmt(eps_k),
            fmt(eps_omega),
            fmt(row.eps_comp),
            output_length,
        ));
    }
    out
}
