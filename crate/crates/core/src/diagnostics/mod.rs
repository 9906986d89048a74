//! Verification instruments: empirical Moser–Trudinger checks, concentration
//! detection with `8π` quantization, Morse indices and a Palais–Smale monitor.

mod concentration;
mod monitor;
mod mt;
mod spectrum;

pub use concentration::{
    concentration_of_solution, detect_concentration, normalized_density_log, ConcentrationReport, Peak,
    BLOW_UP_RATIO, PEAK_THRESHOLD,
};
pub use monitor::{continuation_trace, palais_smale_monitor, PalaisSmaleReport};
pub use mt::{
    improved_mt_check, moser_trudinger_check, mt_functional, EmpiricalConstant, ImprovedMtReport, MtReport,
    MtSample, Region, SamplerConfig,
};
pub use spectrum::{morse_index, morse_index_seeded, SpectrumReport, TOL_EIG_REL};
