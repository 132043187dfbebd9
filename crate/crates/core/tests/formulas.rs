use std::collections::BTreeMap;

use proptest::prelude::*;
use sheetaudit::{
    fingerprint, load_workbook, logical_areas, parse_a1, parse_formula, sheet_to_json, CellAddr, EqLevel, ParsedSheet,
    WorkbookFormat,
};
use sheetaudit_testkit::{a1, gen_expr, random_sheet, rng, translation_pair};

fn parsed(csv: &str) -> ParsedSheet {
    ParsedSheet::lenient(load_workbook(csv, WorkbookFormat::Csv).unwrap())
}

proptest! {
    #[test]
    fn a1_round_trip(row in 1u32..=1_048_576, col in 1u32..=16_384) {
        let text = a1(row, col);
        let addr = parse_a1(&text).unwrap();
        prop_assert_eq!(addr, CellAddr::new(row, col));
        prop_assert_eq!(addr.to_string(), text);
    }

    #[test]
    fn lowercase_addresses_are_canonicalized(row in 1u32..5000, col in 1u32..800) {
        let text = a1(row, col);
        prop_assert_eq!(parse_a1(&text.to_lowercase()).unwrap(), CellAddr::new(row, col));
    }

    #[test]
    fn copies_normalize_identically(seed in any::<u64>()) {
        let p = translation_pair(&mut rng(seed));
        let o = CellAddr::new(p.origin.0, p.origin.1);
        let t = CellAddr::new(p.target.0, p.target.1);
        let a = parse_formula(&p.source, o).unwrap();
        let b = parse_formula(&p.copy, t).unwrap();
        prop_assert_eq!(&a, &b, "{} at {} vs {} at {}", p.source, o, p.copy, t);
        prop_assert_eq!(fingerprint(&a, EqLevel::Copy), fingerprint(&b, EqLevel::Copy));
    }

    #[test]
    fn render_then_parse_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let expr = gen_expr(&mut r, 4, 30, 30);
        let origin = CellAddr::new(31, 31);
        let Some(src) = expr.formula((origin.row, origin.col)) else { return Ok(()); };
        let ast = parse_formula(&src, origin).unwrap();
        let again = parse_formula(&ast.to_a1(origin).unwrap(), origin).unwrap();
        prop_assert_eq!(ast, again);
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let grid = random_sheet(&mut rng(seed), 12);
        let sheet = load_workbook(&grid.to_csv(), WorkbookFormat::Csv).unwrap();
        let again = load_workbook(&sheet.to_csv(), WorkbookFormat::Csv).unwrap();
        prop_assert_eq!(&sheet, &again);
        let via_json = load_workbook(&sheet_to_json(&sheet).to_string(), WorkbookFormat::Json).unwrap();
        prop_assert_eq!(sheet.cells().collect::<Vec<_>>(), via_json.cells().collect::<Vec<_>>());
    }

    #[test]
    fn formula_cells_strictly_increasing(seed in any::<u64>()) {
        let grid = random_sheet(&mut rng(seed), 20);
        let cells = load_workbook(&grid.to_csv(), WorkbookFormat::Csv).unwrap().formula_cells();
        prop_assert!(cells.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(cells.len(), grid.formula_count());
    }

    #[test]
    fn levels_refine(seed in any::<u64>()) {
        let s = parsed(&random_sheet(&mut rng(seed), 20).to_csv());
        let owner = |l| logical_areas(&s, l).owner_map();
        let (copy, logical, structural) = (owner(EqLevel::Copy), owner(EqLevel::Logical), owner(EqLevel::Structural));
        // an area maps into exactly one coarser area
        for (fine, coarse) in [(&copy, &logical), (&logical, &structural)] {
            let mut image: BTreeMap<usize, usize> = BTreeMap::new();
            for (cell, f) in fine.iter() {
                let c = coarse[cell];
                prop_assert_eq!(*image.entry(*f).or_insert(c), c);
            }
        }
    }

    #[test]
    fn partitions_cover_every_formula_once(seed in any::<u64>()) {
        let s = parsed(&random_sheet(&mut rng(seed), 20).to_csv());
        for level in EqLevel::ALL {
            let p = logical_areas(&s, level);
            let total: usize = p.areas.iter().map(|a| a.members.len()).sum();
            prop_assert_eq!(total, s.formula_count());
            prop_assert_eq!(p.owner_map().len(), s.formula_count());
        }
    }
}

#[test]
fn aa10() {
    // brute-force enumeration of the first 52 labels
    let labels: Vec<String> = (1..=52).map(sheetaudit_testkit::col_label).collect();
    let col = labels.iter().position(|l| l == "AA").unwrap() as u32 + 1;
    assert_eq!(parse_a1("AA10").unwrap(), CellAddr::new(10, col));
}
