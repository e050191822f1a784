//! Shared fixtures for the criterion benches.

use mpuforge_core::compiler::{CompileOptions, UniformCompiler};
use mpuforge_core::corpus;
use mpuforge_core::mpu::UniformMpu;

pub fn mcz() -> UniformMpu {
    corpus::mpu_multicontrol_z()
}

pub fn mcz_compiler() -> UniformCompiler {
    UniformCompiler::new(&mcz(), &CompileOptions::default()).expect("mcz compiler")
}
