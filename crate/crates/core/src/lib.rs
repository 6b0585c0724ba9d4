pub mod ainfty;
pub mod bundle;
pub mod cli;
pub mod coeff;
pub mod dgmodel;
pub mod generator;
pub mod isotopy;
pub mod linalg;
pub mod novikov;
pub mod qops;
pub mod rational;
pub mod report;
pub mod signs;
