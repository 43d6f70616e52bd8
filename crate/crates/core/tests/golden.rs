mod common;

use skgkit::linearize::{linearize_table, parse_table};
use skgkit::prompt::{extract_system_segment, SKG_SYSTEM_PROMPT};
use skgkit::{assemble_prompt, LinearizationConfig, PromptTemplate, Table};

fn finqa_table() -> Table {
    Table::new(
        [
            "",
            "3/31/2007",
            "3/31/2008",
            "3/31/2009",
            "3/31/2010",
            "3/31/2011",
            "3/31/2012",
        ],
        [
            vec!["abiomed inc", "100", "96.19", "35.87", "75.55", "106.37", "162.45"],
            vec![
                "nasdaq composite index",
                "100",
                "94.11",
                "63.12",
                "99.02",
                "114.84",
                "127.66",
            ],
            vec![
                "nasdaq medical equipment sic code 3840-",
                "100",
                "82.91",
                "41.56",
                "77.93",
                "94.54",
                "74.40",
            ],
        ],
    )
}

#[test]
fn prompt_matches_scaffold_byte_for_byte() {
    let expected = std::fs::read_to_string(common::fixture("golden_prompt.txt")).unwrap();
    let got = assemble_prompt("Summarize the table.", "col : a row 1 : v", &PromptTemplate::default());
    assert_eq!(got.as_bytes(), expected.as_bytes());
    assert!(got.contains("analyzing and reasoning\nover structured information"));
}

#[test]
fn system_segment_is_recoverable() {
    let p = assemble_prompt("x", "y", &PromptTemplate::default());
    assert_eq!(extract_system_segment(&p), Some(SKG_SYSTEM_PROMPT));
    // Trailing spaces on the second and third lines are part of the text.
    let lines: Vec<&str> = SKG_SYSTEM_PROMPT.lines().collect();
    assert!(lines[1].ends_with("optionally "));
    assert!(lines[2].ends_with("strictly "));
    assert_eq!(lines.len(), 4);
}

#[test]
fn empty_input_drops_the_separator_space() {
    let p = assemble_prompt("Say hi.", "", &PromptTemplate::default());
    assert!(p.ends_with("<</SYS>>\n\nSay hi. [/INST]"), "{p:?}");
}

#[test]
fn finqa_table_linearizes_exactly() {
    let expected = std::fs::read_to_string(common::fixture("finqa_table.txt")).unwrap();
    let cfg = LinearizationConfig::default();
    let got = linearize_table(&finqa_table(), &cfg).unwrap();
    assert_eq!(got, expected.trim_end_matches('\n'));
    assert!(got.starts_with("col :  | 3/31/2007 | 3/31/2008"));
    assert!(got.contains("row 1 : abiomed inc | 100 | 96.19"));
    assert_eq!(parse_table(&got, &cfg).unwrap(), finqa_table());
}

#[test]
fn smallest_tables() {
    let cfg = LinearizationConfig::default();
    assert_eq!(linearize_table(&Table::default(), &cfg).unwrap(), "col :");
    assert_eq!(
        linearize_table(&Table::new(["a"], [["v"]]), &cfg).unwrap(),
        "col : a row 1 : v"
    );
}
