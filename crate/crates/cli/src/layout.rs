//! Chip layout file IO and the built-in 27-qubit heavy-hex layout.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use qrad_core::chip::{ChipLayout, QubitSite};

/// Nearest-neighbor spacing of the built-in layout, millimeters.
pub const DEFAULT_PITCH_MM: f64 = 1.5;

/// Built-in 27-qubit heavy-hex layout: two ten-qubit rows joined by
/// connector qubits, on a 1.5 mm pitch. Ten of the 27 sites are marked
/// inactive, standing in for qubits excluded from charge sensing.
pub fn default_layout() -> ChipLayout {
    let grid: &[(u32, f64, f64)] = &[
        // top row
        (0, 0.0, 0.0),
        (1, 1.0, 0.0),
        (4, 2.0, 0.0),
        (7, 3.0, 0.0),
        (10, 4.0, 0.0),
        (12, 5.0, 0.0),
        (15, 6.0, 0.0),
        (18, 7.0, 0.0),
        (21, 8.0, 0.0),
        (23, 9.0, 0.0),
        // bottom row
        (3, 0.0, 2.0),
        (5, 1.0, 2.0),
        (8, 2.0, 2.0),
        (11, 3.0, 2.0),
        (14, 4.0, 2.0),
        (16, 5.0, 2.0),
        (19, 6.0, 2.0),
        (22, 7.0, 2.0),
        (25, 8.0, 2.0),
        (26, 9.0, 2.0),
        // connectors between the rows
        (2, 1.0, 1.0),
        (13, 5.0, 1.0),
        (24, 8.0, 1.0),
        // outer connectors
        (6, 3.0, -1.0),
        (17, 7.0, -1.0),
        (9, 2.0, 3.0),
        (20, 6.0, 3.0),
    ];
    let qubits = grid
        .iter()
        .map(|&(id, x, y)| QubitSite { id, x_mm: x * DEFAULT_PITCH_MM, y_mm: y * DEFAULT_PITCH_MM })
        .collect();
    let active = vec![0, 2, 4, 5, 6, 9, 10, 11, 13, 15, 16, 17, 20, 21, 22, 24, 26];
    ChipLayout::new(qubits, active).expect("built-in layout is valid")
}

/// Read a layout CSV with header `qubit_id,x_mm,y_mm,active`.
pub fn read_layout(path: &Path) -> Result<ChipLayout> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading layout {}", path.display()))?;
    let mut qubits = Vec::new();
    let mut active = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("qubit_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            bail!("{}:{}: expected 4 fields, found {}", path.display(), lineno + 1, fields.len());
        }
        let parse_err = |what: &str| format!("{}:{}: bad {what}", path.display(), lineno + 1);
        let id: u32 = fields[0].parse().with_context(|| parse_err("qubit_id"))?;
        let x: f64 = fields[1].parse().with_context(|| parse_err("x_mm"))?;
        let y: f64 = fields[2].parse().with_context(|| parse_err("y_mm"))?;
        let is_active = match fields[3] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => bail!("{}:{}: bad active flag {other:?}", path.display(), lineno + 1),
        };
        qubits.push(QubitSite { id, x_mm: x, y_mm: y });
        if is_active {
            active.push(id);
        }
    }
    ChipLayout::new(qubits, active).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Write a layout CSV in the format [`read_layout`] accepts.
pub fn write_layout(layout: &ChipLayout, path: &Path) -> Result<()> {
    let mut out = String::from("qubit_id,x_mm,y_mm,active\n");
    for q in layout.qubits() {
        let active = layout.active_ids().contains(&q.id) as u8;
        out.push_str(&format!("{},{},{},{}\n", q.id, q.x_mm, q.y_mm, active));
    }
    fs::write(path, out).with_context(|| format!("writing layout {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_shape() {
        let layout = default_layout();
        assert_eq!(layout.qubits().len(), 27);
        assert_eq!(layout.active_ids().len(), 17);
        let (x0, y0, x1, y1) = layout.bounding_box();
        assert_eq!((x1 - x0, y1 - y0), (13.5, 6.0));
    }

    #[test]
    fn layout_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layout.csv");
        let layout = default_layout();
        write_layout(&layout, &path).unwrap();
        let back = read_layout(&path).unwrap();
        assert_eq!(back.qubits(), layout.qubits());
        assert_eq!(back.active_ids(), layout.active_ids());
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layout.csv");
        std::fs::write(&path, "qubit_id,x_mm,y_mm,active\n0,0.0,0.0,1\n1,oops,0.0,1\n").unwrap();
        let err = format!("{:#}", read_layout(&path).unwrap_err());
        assert!(err.contains(":3"), "{err}");
    }
}
