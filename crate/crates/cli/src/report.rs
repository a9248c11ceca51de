//! Report documents. Typed structs with fixed field order plus
//! `serde_json::Value` payloads whose object keys are sorted, so identical
//! inputs serialize to identical bytes. Every number in a report is an
//! exact rational string.

use num::rational::BigRational;
use serde::Serialize;
use serde_json::{json, Value};

use nam_core::characters::CyclotomicElement;
use nam_core::linalg::RationalMatrix;
use nam_core::measures::LocallyConstantFn;
use nam_core::rational::rat_to_string;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioStatus {
    Ok,
    CheckFailed,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub index: usize,
    pub command: String,
    pub status: ScenarioStatus,
    pub checks: Vec<CheckResult>,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    pub all_passed: bool,
    pub scenarios: Vec<ScenarioReport>,
}

impl BatchReport {
    pub fn new(scenarios: Vec<ScenarioReport>) -> Self {
        BatchReport {
            all_passed: scenarios
                .iter()
                .all(|s| s.status == ScenarioStatus::Ok),
            scenarios,
        }
    }

    /// Process exit code: 2 for any input error, else 1 for any failed
    /// check, else 0.
    pub fn exit_code(&self) -> i32 {
        if self
            .scenarios
            .iter()
            .any(|s| s.status == ScenarioStatus::Error)
        {
            2
        } else if self
            .scenarios
            .iter()
            .any(|s| s.status == ScenarioStatus::CheckFailed)
        {
            1
        } else {
            0
        }
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text.into_bytes()
    }
}

pub fn rat_value(r: &BigRational) -> Value {
    Value::String(rat_to_string(r))
}

pub fn rat_list(rs: &[BigRational]) -> Value {
    Value::Array(rs.iter().map(rat_value).collect())
}

pub fn rat_rows(m: &RationalMatrix) -> Value {
    Value::Array(
        m.to_rows()
            .iter()
            .map(|row| Value::Array(row.iter().map(rat_value).collect()))
            .collect(),
    )
}

/// A cyclotomic value as `{level, coeffs}` in the power basis of its own
/// minimal level.
pub fn cyclotomic_value(c: &CyclotomicElement) -> Value {
    json!({
        "level": c.level(),
        "coeffs": rat_list(c.coeffs()),
    })
}

/// A locally constant rational function as explicit cells plus default.
pub fn function_value(f: &LocallyConstantFn<BigRational>) -> Value {
    json!({
        "m": f.m(),
        "default": rat_value(f.default_value()),
        "cells": f
            .entries()
            .map(|(center, v)| {
                json!({
                    "center": rat_list(center),
                    "value": rat_value(v),
                })
            })
            .collect::<Vec<_>>(),
    })
}
