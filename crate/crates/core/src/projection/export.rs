use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ProjectedPoint, ProjectionError};

/// Writes `id,target_type,x,y` rows with six-decimal coordinates.
pub fn write_points<W: Write>(points: &[ProjectedPoint], out: W) -> Result<(), ProjectionError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "target_type", "x", "y"])?;
    for p in points {
        let (x, y) = (format!("{:.6}", p.x), format!("{:.6}", p.y));
        w.write_record([p.id.as_str(), p.target_type.as_str(), &x, &y])?;
    }
    w.flush().map_err(|e| ProjectionError::Io("csv output".into(), e))?;
    Ok(())
}

pub fn export_points(points: &[ProjectedPoint], path: &Path) -> Result<(), ProjectionError> {
    let file = File::create(path).map_err(|e| ProjectionError::Io(path.display().to_string(), e))?;
    write_points(points, file)
}

pub fn read_points<R: Read>(input: R) -> Result<Vec<ProjectedPoint>, ProjectionError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(ProjectionError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(id: &str, t: &str, x: f64, y: f64) -> ProjectedPoint {
        ProjectedPoint {
            id: id.into(),
            target_type: t.into(),
            x,
            y,
        }
    }

    #[test]
    fn three_points_four_lines() {
        let pts = [
            point("a", "T-72", 1.0, -2.5),
            point("b,2", "BMP-2", 0.1234567, 3.0),
            point("c", "2S1", -0.0000004, 1e3),
        ];
        let mut buf = Vec::new();
        write_points(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next(), Some("id,target_type,x,y"));
        assert_eq!(text.lines().nth(1), Some("a,T-72,1.000000,-2.500000"));
        let back = read_points(buf.as_slice()).unwrap();
        let ids: Vec<&str> = back.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "b,2", "c"]);
        assert_eq!(back[1].target_type, "BMP-2");
        assert_eq!(back[1].x, 0.123457);
    }

    #[test]
    fn empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        export_points(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "id,target_type,x,y\n");
    }
}
