use std::collections::BTreeSet;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sheetaudit::{
    build_ddg, grow_classes, load_workbook, logical_areas, recover_modules, srg_of_modules, srg_of_units, Analysis,
    CellAddr, ClassParams, EqLevel, ParsedSheet, WorkbookFormat,
};
use sheetaudit_testkit::{compression_sheet, large_sheet};

const BLOCKS: [u32; 3] = [10, 30, 100];

fn sheet(blocks: u32) -> (String, ParsedSheet) {
    let csv = large_sheet(blocks).to_csv();
    let parsed = ParsedSheet::new(load_workbook(&csv, WorkbookFormat::Csv).unwrap()).unwrap();
    (csv, parsed)
}

fn bench_parse(c: &mut Criterion) {
    let mut group = c.benchmark_group("parse");
    for blocks in BLOCKS {
        let (csv, _) = sheet(blocks);
        group.throughput(Throughput::Elements(u64::from(blocks) * 100));
        group.bench_with_input(BenchmarkId::from_parameter(blocks * 100), &csv, |b, csv| {
            b.iter(|| ParsedSheet::new(load_workbook(black_box(csv), WorkbookFormat::Csv).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn bench_areas(c: &mut Criterion) {
    let mut group = c.benchmark_group("areas");
    let (_, s) = sheet(100);
    for level in EqLevel::ALL {
        group.bench_function(level.as_str(), |b| b.iter(|| logical_areas(black_box(&s), level)));
    }
    group.finish();
}

fn bench_classes(c: &mut Criterion) {
    let mut group = c.benchmark_group("classes");
    let (_, s) = sheet(100);
    group.bench_function("large_sheet", |b| {
        b.iter(|| grow_classes(black_box(&s), &ClassParams::default()))
    });
    let csv = compression_sheet(23, 1200, 7).0.to_csv();
    let templates = ParsedSheet::lenient(load_workbook(&csv, WorkbookFormat::Csv).unwrap());
    group.bench_function("compression_sheet", |b| {
        b.iter(|| grow_classes(black_box(&templates), &ClassParams::default()))
    });
    group.finish();
}

fn bench_graphs(c: &mut Criterion) {
    let mut group = c.benchmark_group("graphs");
    for blocks in BLOCKS {
        let (_, s) = sheet(blocks);
        let ddg = build_ddg(&s);
        let sinks: BTreeSet<CellAddr> = ddg.sinks().into_iter().collect();
        let modules = recover_modules(&ddg, &sinks).unwrap();
        let classes = grow_classes(&s, &ClassParams::default());
        let n = blocks * 100;
        group.bench_with_input(BenchmarkId::new("ddg", n), &s, |b, s| {
            b.iter(|| build_ddg(black_box(s)))
        });
        group.bench_with_input(BenchmarkId::new("modules", n), &ddg, |b, ddg| {
            b.iter(|| recover_modules(black_box(ddg), &sinks).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("srg_modules", n), &ddg, |b, ddg| {
            b.iter(|| srg_of_modules(black_box(&modules.modules), ddg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("srg_units", n), &ddg, |b, ddg| {
            b.iter(|| srg_of_units(black_box(&classes), ddg, true).unwrap())
        });
    }
    group.finish();
}

fn bench_full_report(c: &mut Criterion) {
    let mut group = c.benchmark_group("report");
    group.sample_size(10);
    let (csv, _) = sheet(100);
    group.bench_function("full_10000", |b| {
        b.iter(|| {
            let analysis = Analysis::load(black_box(&csv), WorkbookFormat::Csv).unwrap();
            analysis.full(&ClassParams::default(), &[]).unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_parse,
    bench_areas,
    bench_classes,
    bench_graphs,
    bench_full_report
);
criterion_main!(benches);
