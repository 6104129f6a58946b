#![allow(dead_code)]

pub mod checks;
pub mod faults;
pub mod golden;
pub mod oracles;
