//! TOML run configuration: flat dotted keys, unknown keys rejected,
//! every section optional with sensible defaults. Command-line flags
//! override keys one-to-one.

use bosegas::scales::Prefactors;
use bosegas::twobody::PotentialSpec;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default = "default_potential")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub scales: ScalesSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub neumann: NeumannSection,
    #[serde(default)]
    pub doubling: DoublingSection,
    #[serde(default)]
    pub certificate: CertificateSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

fn default_seed() -> u64 {
    1
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_potential() -> PotentialSpec {
    PotentialSpec::SquareBarrier { v0: 50.0, r0: 1.0 }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_margin")]
    pub margin_factor: f64,
}

fn default_points() -> usize {
    10_000
}

fn default_margin() -> f64 {
    4.0
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { points: default_points(), margin_factor: default_margin() }
    }
}

impl GridSection {
    pub fn to_spec(&self) -> bosegas::twobody::GridSpec {
        bosegas::twobody::GridSpec {
            points: self.points,
            margin_factor: self.margin_factor,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalesSection {
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_hprime")]
    pub hprime: u32,
    /// Headline-bound constant.
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub prefactors: PrefactorsSection,
}

fn default_rho() -> f64 {
    1e-8
}
fn default_eta() -> f64 {
    0.05
}
fn default_r0() -> f64 {
    1.0
}
fn default_hprime() -> u32 {
    2
}
fn default_c0() -> f64 {
    1.0
}

impl Default for ScalesSection {
    fn default() -> Self {
        ScalesSection {
            rho: default_rho(),
            eta: default_eta(),
            r0: default_r0(),
            hprime: default_hprime(),
            c0: default_c0(),
            prefactors: PrefactorsSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefactorsSection {
    #[serde(default = "one")]
    pub l_minus1: f64,
    #[serde(default = "one")]
    pub l0: f64,
    #[serde(default = "one")]
    pub l1: f64,
    #[serde(default = "one")]
    pub l2: f64,
}

fn one() -> f64 {
    1.0
}

impl PrefactorsSection {
    pub fn to_prefactors(&self) -> Prefactors {
        Prefactors {
            l_minus1: if self.l_minus1 == 0.0 { 1.0 } else { self.l_minus1 },
            l0: if self.l0 == 0.0 { 1.0 } else { self.l0 },
            l1: if self.l1 == 0.0 { 1.0 } else { self.l1 },
            l2: if self.l2 == 0.0 { 1.0 } else { self.l2 },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_strata")]
    pub strata_per_axis: usize,
}

fn default_samples() -> usize {
    100_000
}
fn default_strata() -> usize {
    4
}

impl Default for McSection {
    fn default() -> Self {
        McSection { samples: default_samples(), strata_per_axis: default_strata() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeumannSection {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    10.0
}

impl Default for NeumannSection {
    fn default() -> Self {
        NeumannSection { kappa: default_kappa() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoublingSection {
    /// Number of doublings per axis; the sweep covers steps 1..=3h.
    #[serde(default = "default_h")]
    pub h: u32,
    /// Cap on the merge sweep upper range, as a multiple of K_{s+1}.
    #[serde(default = "default_sweep_factor")]
    pub sweep_factor: f64,
}

fn default_h() -> u32 {
    3
}
fn default_sweep_factor() -> f64 {
    4.0
}

impl Default for DoublingSection {
    fn default() -> Self {
        DoublingSection { h: default_h(), sweep_factor: default_sweep_factor() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    /// Particles inside the cell (environment is drawn at the same
    /// density in the surrounding torus of side 4 l1).
    #[serde(default = "default_cert_n")]
    pub n_particles: usize,
    #[serde(default = "one")]
    pub c_apriori: f64,
    /// Optional configuration snapshot (CSV) to use instead of a seeded
    /// random draw.
    #[serde(default)]
    pub config_csv: Option<String>,
}

fn default_cert_n() -> usize {
    6
}

impl Default for CertificateSection {
    fn default() -> Self {
        CertificateSection {
            n_particles: default_cert_n(),
            c_apriori: 1.0,
            config_csv: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    #[serde(default = "default_oracle_grid")]
    pub grid: usize,
    #[serde(default = "default_bc")]
    pub bc: String,
    #[serde(default = "default_box_side")]
    pub box_side: f64,
    /// "relative-pair" (n = 2 on the torus) or "full".
    #[serde(default = "default_reduction")]
    pub reduction: String,
}

fn default_oracle_n() -> usize {
    2
}
fn default_oracle_grid() -> usize {
    24
}
fn default_bc() -> String {
    "periodic".into()
}
fn default_box_side() -> f64 {
    8.0
}
fn default_reduction() -> String {
    "relative-pair".into()
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            n: default_oracle_n(),
            grid: default_oracle_grid(),
            bc: default_bc(),
            box_side: default_box_side(),
            reduction: default_reduction(),
        }
    }
}
