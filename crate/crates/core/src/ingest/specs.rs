use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::IngestError;
use crate::model::{SpecTable, VehicleSpec};

#[derive(Deserialize)]
struct RawSpec {
    target_type: String,
    weight_tons: f64,
    length_m: f64,
    width_m: f64,
    height_m: f64,
    mounted_weapon: bool,
    #[serde(default)]
    qualities: Vec<String>,
}

/// Parses a JSON array of vehicle spec objects.
pub fn parse_vehicle_specs_str(text: &str) -> Result<SpecTable, IngestError> {
    let raw: Vec<RawSpec> =
        serde_json::from_str(text).map_err(|e| IngestError::Format(e.to_string()))?;
    let mut table = SpecTable::new();
    for r in raw {
        if table.contains_key(&r.target_type) {
            return Err(IngestError::DuplicateType(r.target_type));
        }
        let mut qualities = BTreeSet::new();
        for q in r.qualities {
            if !qualities.insert(q.clone()) {
                return Err(IngestError::InvalidSpec(format!(
                    "{}: duplicate quality {q:?}",
                    r.target_type
                )));
            }
        }
        let spec = VehicleSpec {
            target_type: r.target_type,
            weight_tons: r.weight_tons,
            length_m: r.length_m,
            width_m: r.width_m,
            height_m: r.height_m,
            mounted_weapon: r.mounted_weapon,
            qualities,
        };
        spec.validate()
            .map_err(|e| IngestError::InvalidSpec(e.to_string()))?;
        if spec.qualities.is_empty() {
            tracing::warn!(target_type = %spec.target_type, "vehicle spec has no qualities");
        }
        table.insert(spec.target_type.clone(), spec);
    }
    Ok(table)
}

pub fn parse_vehicle_specs(path: impl AsRef<Path>) -> Result<SpecTable, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_vehicle_specs_str(&text)
}

/// Serializes a table in the format [`parse_vehicle_specs_str`] reads.
pub fn vehicle_specs_to_string(table: &SpecTable) -> String {
    let specs: Vec<&VehicleSpec> = table.values().collect();
    serde_json::to_string_pretty(&specs).expect("specs serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_json(t: &str, weight: f64) -> String {
        format!(
            r#"{{"target_type":"{t}","weight_tons":{weight},"length_m":6.9,"width_m":3.5,"height_m":2.2,"mounted_weapon":true,"qualities":["tracked","turret"]}}"#
        )
    }

    #[test]
    fn parses_nine() {
        let types = ["2S1", "BRDM-2", "BTR-60", "D7", "SLICY", "T-62", "T-72", "ZIL-131", "ZSU-23-4"];
        let body: Vec<String> = types.iter().map(|t| spec_json(t, 10.0)).collect();
        let table = parse_vehicle_specs_str(&format!("[{}]", body.join(","))).unwrap();
        assert_eq!(table.len(), 9);
        assert!(table["T-72"].qualities.contains("turret"));
        let again = parse_vehicle_specs_str(&vehicle_specs_to_string(&table)).unwrap();
        assert_eq!(again, table);
    }

    #[test]
    fn negative_weight() {
        let err = parse_vehicle_specs_str(&format!("[{}]", spec_json("T-72", -1.0))).unwrap_err();
        assert!(matches!(err, IngestError::InvalidSpec(_)), "{err}");
    }

    #[test]
    fn duplicate_type() {
        let text = format!("[{},{}]", spec_json("T-72", 41.0), spec_json("T-72", 42.0));
        assert!(matches!(
            parse_vehicle_specs_str(&text),
            Err(IngestError::DuplicateType(t)) if t == "T-72"
        ));
    }

    #[test]
    fn empty_qualities_allowed() {
        let text = r#"[{"target_type":"SLICY","weight_tons":1,"length_m":1,"width_m":1,"height_m":1,"mounted_weapon":false,"qualities":[]}]"#;
        assert!(parse_vehicle_specs_str(text).unwrap()["SLICY"].qualities.is_empty());
    }

    #[test]
    fn duplicate_quality_rejected() {
        let text = r#"[{"target_type":"A","weight_tons":1,"length_m":1,"width_m":1,"height_m":1,"mounted_weapon":false,"qualities":["x","x"]}]"#;
        assert!(parse_vehicle_specs_str(text).is_err());
    }
}
