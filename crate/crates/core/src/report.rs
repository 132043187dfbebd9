//! Versioned JSON envelopes shared by the command line and the HTTP service.
//!
//! Every analysis is rendered as
//! `{schema, command, input, parameters, result, diagnostics}`, so the two
//! front ends return byte-identical documents for the same sheet and
//! parameters. Only the full `report` adds `timings`.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::classes::{grow_classes, pattern_outliers, ClassParams, SemanticClass};
use crate::ddg::{build_ddg, Acyclicity, Ddg};
use crate::equivalence::{compare_partitions, constants_report, logical_areas, EqLevel};
use crate::error::Error;
use crate::grid::{load_workbook, CellAddr, Sheet, WorkbookFormat};
use crate::modules::{curate, fault_trace_step, module_boundary_check, recover_modules, ModuleSet, SinkCuration};
use crate::parsed::ParsedSheet;
use crate::srg::{fisheye_expand, srg_of_modules_with, srg_of_units, Srg, SrgMode};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellAddr>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellAddr>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputInfo {
    pub name: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub input: InputInfo,
    pub parameters: Value,
    pub result: Value,
    pub diagnostics: Vec<Diagnostic>,
    /// Milliseconds per stage; only in the full report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Value>,
}

impl Report {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    /// Pretty-printed with a trailing newline.
    pub fn to_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Parameters of an SRG request.
#[derive(Debug, Clone, PartialEq)]
pub struct SrgRequest {
    pub mode: SrgMode,
    /// Modules to expand, applied in order.
    pub fisheye: Vec<String>,
    /// Grouping used in units mode.
    pub classes: ClassParams,
}

/// A loaded sheet with its formulas parsed and its DDG built.
#[derive(Debug, Clone)]
pub struct Analysis {
    parsed: ParsedSheet,
    ddg: Ddg,
}

impl Analysis {
    /// Formulas that fail to parse become diagnostics, not errors.
    pub fn new(sheet: Sheet) -> Self {
        let parsed = ParsedSheet::lenient(sheet);
        let ddg = build_ddg(&parsed);
        Self { parsed, ddg }
    }

    pub fn load(source: &str, format: WorkbookFormat) -> Result<Self, Error> {
        load_workbook(source, format).map(Self::new)
    }

    pub fn parsed(&self) -> &ParsedSheet {
        &self.parsed
    }

    pub fn ddg(&self) -> &Ddg {
        &self.ddg
    }

    pub fn input(&self) -> InputInfo {
        InputInfo {
            name: self.parsed.sheet().name().to_string(),
            digest: self.parsed.digest().to_string(),
        }
    }

    pub fn cycle(&self) -> Option<Vec<CellAddr>> {
        match self.ddg.check_acyclic() {
            Acyclicity::Acyclic { .. } => None,
            Acyclicity::Cyclic { cycle } => Some(cycle),
        }
    }

    /// Parse errors, dropped references and cycles.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out: Vec<Diagnostic> = self
            .parsed
            .parse_errors()
            .iter()
            .map(|e| Diagnostic {
                code: "ParseError",
                cell: Some(e.cell),
                cells: Vec::new(),
                message: format!("position {}: {}", e.error.position, e.error.message),
            })
            .collect();
        out.extend(self.ddg.diagnostics().iter().map(|d| Diagnostic {
            code: "OutOfGrid",
            cell: Some(d.cell),
            cells: Vec::new(),
            message: d.message.clone(),
        }));
        if let Some(cycle) = self.cycle() {
            out.push(cycle_diagnostic(cycle));
        }
        out
    }

    pub fn curation(&self, exclusions: &[CellAddr]) -> Result<SinkCuration, Error> {
        curate(&self.ddg, exclusions)
    }

    fn envelope(&self, command: &str, parameters: Value, result: Value) -> Report {
        self.envelope_with(command, parameters, result, Vec::new())
    }

    fn envelope_with(&self, command: &str, parameters: Value, result: Value, extra: Vec<Diagnostic>) -> Report {
        let mut diagnostics = self.diagnostics();
        diagnostics.extend(extra);
        Report {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            input: self.input(),
            parameters,
            result,
            diagnostics,
            timings: None,
        }
    }

    /// Sheet summary, DDG size and sinks.
    pub fn inspect(&self) -> Report {
        self.envelope("inspect", json!({}), self.inspect_result())
    }

    fn inspect_result(&self) -> Value {
        let sheet = self.parsed.sheet();
        json!({
            "sheet": {
                "name": sheet.name(),
                "extent": sheet.extent(),
                "cells": sheet.len(),
                "formulas": sheet.formula_cells().len(),
            },
            "ddg": {
                "nodes": self.ddg.node_count(),
                "edges": self.ddg.edge_count(),
                "acyclic": self.cycle().is_none(),
            },
            "sinks": self.ddg.sinks(),
        })
    }

    /// Every cell with its kind and field text.
    pub fn grid(&self) -> Report {
        let sheet = self.parsed.sheet();
        let cells: Vec<Value> = sheet
            .cells()
            .map(|(a, c)| json!({ "cell": a, "kind": c.kind(), "value": c.to_field() }))
            .collect();
        let result = json!({ "name": sheet.name(), "extent": sheet.extent(), "cells": cells });
        self.envelope("grid", json!({}), result)
    }

    pub fn areas(&self, level: EqLevel) -> Report {
        let partition = logical_areas(&self.parsed, level);
        self.envelope("areas", json!({ "level": level }), json!(partition))
    }

    pub fn classes(&self, params: &ClassParams) -> Report {
        let classes = grow_classes(&self.parsed, params);
        self.envelope("classes", class_parameters(params), self.classes_result(&classes))
    }

    fn classes_result(&self, classes: &[SemanticClass]) -> Value {
        let highlight: Vec<Value> = {
            let mut rows: Vec<(CellAddr, &str, &str)> = classes
                .iter()
                .flat_map(|k| {
                    k.units
                        .iter()
                        .flat_map(move |u| u.cells.iter().map(move |c| (*c, k.id.as_str(), u.id.as_str())))
                })
                .collect();
            rows.sort();
            rows.into_iter()
                .map(|(cell, class, unit)| json!({ "cell": cell, "class": class, "unit": unit }))
                .collect()
        };
        let outliers: Vec<Value> = classes
            .iter()
            .filter_map(|k| pattern_outliers(k, &self.parsed).ok())
            .map(|r| json!(r))
            .collect();
        json!({ "classes": classes, "highlight": highlight, "outliers": outliers })
    }

    pub fn diff(&self, fine: EqLevel, coarse: EqLevel) -> Result<Report, Error> {
        let report = compare_partitions(&logical_areas(&self.parsed, fine), &logical_areas(&self.parsed, coarse))?;
        let hot_spots = report.hot_spots().count();
        let mut result = json!(report);
        result["hot_spots"] = json!(hot_spots);
        Ok(self.envelope("diff-eq", json!({ "fine": fine, "coarse": coarse }), result))
    }

    pub fn constants(&self) -> Report {
        self.envelope("constants", json!({}), json!(constants_report(&self.parsed)))
    }

    /// The curation state after applying `exclusions` in order.
    pub fn sinks(&self, exclusions: &[CellAddr]) -> Result<Report, Error> {
        let cur = self.curation(exclusions)?;
        Ok(self.sinks_report(&cur))
    }

    pub fn sinks_report(&self, cur: &SinkCuration) -> Report {
        let result = json!({
            "active": cur.active(),
            "excluded": cur.exclusions(),
            "history": cur.history(),
        });
        self.envelope("sinks", exclusion_parameters(cur), result)
    }

    fn module_set(&self, cur: &SinkCuration) -> Result<ModuleSet, Error> {
        recover_modules(&self.ddg, cur.active())
    }

    /// Modules under the curation reached by excluding `exclusions` in order.
    pub fn modules(&self, exclusions: &[CellAddr]) -> Result<Report, Error> {
        let cur = &self.curation(exclusions)?;
        let set = self.module_set(cur)?;
        let orphaned: Vec<CellAddr> = set
            .unassigned
            .iter()
            .copied()
            .filter(|c| !cur.excluded().contains(c))
            .collect();
        let violations = module_boundary_check(&set.modules, &self.ddg);
        let mut extra = Vec::new();
        if !orphaned.is_empty() {
            extra.push(Diagnostic {
                code: "Orphaned",
                cell: None,
                cells: orphaned.clone(),
                message: format!("{} cell(s) reach no remaining result", orphaned.len()),
            });
        }
        let result = json!({
            "results": cur.active(),
            "excluded": cur.exclusions(),
            "modules": set.modules,
            "orphaned": orphaned,
            "violations": violations,
        });
        Ok(self.envelope_with("modules", exclusion_parameters(cur), result, extra))
    }

    /// The SRG itself, for callers that render it (DOT) or walk it.
    /// Exclusions only apply in modules mode.
    pub fn srg_graph(&self, req: &SrgRequest, exclusions: &[CellAddr]) -> Result<Srg, Error> {
        let mut srg = match req.mode {
            SrgMode::Units => srg_of_units(&grow_classes(&self.parsed, &req.classes), &self.ddg, true)?,
            SrgMode::Modules => {
                let cur = self.curation(exclusions)?;
                let set = self.module_set(&cur)?;
                srg_of_modules_with(&set.modules, &self.ddg, &cur.exclusions())?
            }
        };
        for focus in &req.fisheye {
            srg = fisheye_expand(&srg, focus, &self.ddg)?;
        }
        Ok(srg)
    }

    pub fn srg(&self, req: &SrgRequest, exclusions: &[CellAddr]) -> Result<Report, Error> {
        let srg = self.srg_graph(req, exclusions)?;
        let mut parameters = json!({ "mode": req.mode, "fisheye": req.fisheye });
        match req.mode {
            SrgMode::Units => merge(&mut parameters, class_parameters(&req.classes)),
            SrgMode::Modules => merge(&mut parameters, json!({ "exclude": exclusions })),
        }
        Ok(self.envelope("srg", parameters, srg.to_json()))
    }

    /// Predecessor modules of `module` under the current curation.
    pub fn trace(&self, module: &str, exclusions: &[CellAddr]) -> Result<Report, Error> {
        let cur = &self.curation(exclusions)?;
        let set = self.module_set(cur)?;
        let srg = srg_of_modules_with(&set.modules, &self.ddg, &cur.exclusions())?;
        let steps = fault_trace_step(&srg, module)?;
        let mut parameters = json!({ "module": module });
        merge(&mut parameters, exclusion_parameters(cur));
        Ok(self.envelope("trace", parameters, json!(steps)))
    }

    /// Every analysis at once. A cyclic DDG leaves the module sections
    /// `null` and is reported as a diagnostic.
    pub fn full(&self, classes: &ClassParams, exclusions: &[CellAddr]) -> Result<Report, Error> {
        let mut timings = serde_json::Map::new();
        let mut timed = |name: &str, start: Instant| {
            timings.insert(name.to_string(), json!(start.elapsed().as_secs_f64() * 1e3));
        };

        let t = Instant::now();
        let areas: serde_json::Map<String, Value> = EqLevel::ALL
            .iter()
            .map(|l| (l.to_string(), json!(logical_areas(&self.parsed, *l))))
            .collect();
        let diff = [
            (EqLevel::Copy, EqLevel::Logical),
            (EqLevel::Logical, EqLevel::Structural),
        ]
        .iter()
        .map(|(f, c)| {
            compare_partitions(&logical_areas(&self.parsed, *f), &logical_areas(&self.parsed, *c)).map(|d| json!(d))
        })
        .collect::<Result<Vec<_>, _>>()?;
        timed("areas", t);

        let t = Instant::now();
        let class_list = grow_classes(&self.parsed, classes);
        let unit_srg = srg_of_units(&class_list, &self.ddg, true)?;
        let classes_json = self.classes_result(&class_list);
        timed("classes", t);

        let t = Instant::now();
        let (sinks, modules, module_srg) = if self.cycle().is_none() {
            let cur = self.curation(exclusions)?;
            let set = self.module_set(&cur)?;
            let srg = srg_of_modules_with(&set.modules, &self.ddg, &cur.exclusions())?;
            let sinks = json!({ "active": cur.active(), "excluded": cur.exclusions() });
            (sinks, json!(set.modules), srg.to_json())
        } else {
            (Value::Null, Value::Null, Value::Null)
        };
        timed("modules", t);

        let mut parameters = class_parameters(classes);
        merge(&mut parameters, json!({ "exclude": exclusions }));
        let result = json!({
            "inspect": self.inspect_result(),
            "areas": areas,
            "diff": diff,
            "classes": classes_json,
            "constants": constants_report(&self.parsed),
            "sinks": sinks,
            "modules": modules,
            "srg": { "units": unit_srg.to_json(), "modules": module_srg },
        });
        let mut report = self.envelope("report", parameters, result);
        report.timings = Some(Value::Object(timings));
        Ok(report)
    }
}

fn cycle_diagnostic(cycle: Vec<CellAddr>) -> Diagnostic {
    let path: Vec<String> = cycle.iter().map(ToString::to_string).collect();
    Diagnostic {
        code: "CyclicDDG",
        cell: None,
        cells: cycle,
        message: format!("cycle {}", path.join(" -> ")),
    }
}

pub fn class_parameters(p: &ClassParams) -> Value {
    json!({
        "d_h": p.geometry.d_h,
        "d_v": p.geometry.d_v,
        "d_man": p.geometry.d_man,
        "eq_start": p.eq_start,
        "eq_rest": p.eq_rest,
    })
}

fn exclusion_parameters(cur: &SinkCuration) -> Value {
    json!({ "exclude": cur.exclusions() })
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

/// The error body used by the service: `{"error": {"code", "message"}}`.
pub fn error_json(e: &Error) -> Value {
    json!({ "error": { "code": e.code(), "message": e.to_string() } })
}
