#![allow(dead_code)]

pub mod histgen;
pub mod oracle;
pub mod scenarios;
