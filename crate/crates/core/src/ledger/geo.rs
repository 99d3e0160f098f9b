use std::fmt;

use serde::{Deserialize, Serialize};

/// Latitude and longitude in integer microdegrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: i64,
    pub lon: i64,
}

impl GeoPoint {
    pub fn from_degrees(lat: f64, lon: f64) -> Self {
        GeoPoint {
            lat: (lat * 1e6).round() as i64,
            lon: (lon * 1e6).round() as i64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Latitude,
    Longitude,
}

/// Axis-aligned rectangle, half-open: the south and west edges belong to the
/// zone, the north and east edges do not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Zone {
    pub south: i64,
    pub west: i64,
    pub north: i64,
    pub east: i64,
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}) x [{}, {})", self.south, self.north, self.west, self.east)
    }
}

impl Zone {
    pub fn new(south: i64, west: i64, north: i64, east: i64) -> Option<Self> {
        (south < north && west < east).then_some(Zone {
            south,
            west,
            north,
            east,
        })
    }

    pub fn from_degrees(south: f64, west: f64, north: f64, east: f64) -> Option<Self> {
        let a = GeoPoint::from_degrees(south, west);
        let b = GeoPoint::from_degrees(north, east);
        Zone::new(a.lat, a.lon, b.lat, b.lon)
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        self.south <= p.lat && p.lat < self.north && self.west <= p.lon && p.lon < self.east
    }

    pub fn height(&self) -> i64 {
        self.north - self.south
    }

    pub fn width(&self) -> i64 {
        self.east - self.west
    }

    pub fn area(&self) -> i128 {
        i128::from(self.height()) * i128::from(self.width())
    }

    pub fn centroid(&self) -> GeoPoint {
        GeoPoint {
            lat: self.south + self.height() / 2,
            lon: self.west + self.width() / 2,
        }
    }

    /// The longer side; ties split along longitude.
    pub fn longer_axis(&self) -> Axis {
        if self.height() > self.width() {
            Axis::Latitude
        } else {
            Axis::Longitude
        }
    }

    pub fn within(&self, outer: &Zone) -> bool {
        outer.south <= self.south && self.north <= outer.north && outer.west <= self.west && self.east <= outer.east
    }

    pub fn overlaps(&self, other: &Zone) -> bool {
        self.south < other.north && other.south < self.north && self.west < other.east && other.west < self.east
    }

    /// Cuts at coordinate `at` on `axis`; `at` must lie strictly inside.
    pub fn split_at(&self, axis: Axis, at: i64) -> Option<(Zone, Zone)> {
        match axis {
            Axis::Latitude if self.south < at && at < self.north => Some((
                Zone { north: at, ..*self },
                Zone { south: at, ..*self },
            )),
            Axis::Longitude if self.west < at && at < self.east => Some((
                Zone { east: at, ..*self },
                Zone { west: at, ..*self },
            )),
            _ => None,
        }
    }

    /// Splits along the longer axis at the median of the given points'
    /// coordinates, falling back to the midpoint when the median sits on an
    /// edge. Returns `None` for zones too thin to split.
    pub fn split_by_median(&self, points: &[GeoPoint]) -> Option<(Zone, Zone)> {
        let axis = self.longer_axis();
        let mut coords: Vec<i64> = points
            .iter()
            .filter(|p| self.contains(p))
            .map(|p| match axis {
                Axis::Latitude => p.lat,
                Axis::Longitude => p.lon,
            })
            .collect();
        coords.sort_unstable();
        let mid = match axis {
            Axis::Latitude => self.south + self.height() / 2,
            Axis::Longitude => self.west + self.width() / 2,
        };
        let median = if coords.is_empty() {
            mid
        } else {
            // upper median, so the lower half keeps floor(k/2) points
            coords[coords.len() / 2]
        };
        self.split_at(axis, median).or_else(|| self.split_at(axis, mid))
    }
}

/// Checks that `children` tile `parent`: each lies inside it, no two
/// overlap, and their areas add up to the parent's.
pub fn audit_partition(parent: &Zone, children: &[Zone]) -> Result<(), String> {
    for c in children {
        if !c.within(parent) {
            return Err(format!("zone {c} leaves its parent {parent}"));
        }
    }
    for (i, a) in children.iter().enumerate() {
        for b in &children[i + 1..] {
            if a.overlaps(b) {
                return Err(format!("zones {a} and {b} overlap"));
            }
        }
    }
    let total: i128 = children.iter().map(Zone::area).sum();
    if total != parent.area() {
        return Err(format!("zones leave a gap in {parent}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(s: i64, w: i64, n: i64, e: i64) -> Zone {
        Zone::new(s, w, n, e).unwrap()
    }

    #[test]
    fn half_open_boundaries() {
        let zone = z(0, 0, 10, 10);
        assert!(zone.contains(&GeoPoint { lat: 0, lon: 0 }));
        assert!(zone.contains(&GeoPoint { lat: 5, lon: 5 }));
        assert!(!zone.contains(&GeoPoint { lat: 10, lon: 5 }));
        assert!(!zone.contains(&GeoPoint { lat: 5, lon: 10 }));
        let (w, e) = zone.split_at(Axis::Longitude, 5).unwrap();
        let edge = GeoPoint { lat: 3, lon: 5 };
        assert!(!w.contains(&edge));
        assert!(e.contains(&edge));
    }

    #[test]
    fn median_split_along_longer_axis() {
        let zone = z(0, 0, 10, 40);
        let pts: Vec<GeoPoint> = [3, 8, 20, 30, 35].iter().map(|&lon| GeoPoint { lat: 1, lon }).collect();
        let (a, b) = zone.split_by_median(&pts).unwrap();
        assert_eq!(a, z(0, 0, 10, 20));
        assert_eq!(b, z(0, 20, 10, 40));
        audit_partition(&zone, &[a, b]).unwrap();
        // no points: midpoint
        let (a, _) = z(0, 0, 30, 10).split_by_median(&[]).unwrap();
        assert_eq!(a, z(0, 0, 15, 10));
        // median on the west edge falls back to the midpoint
        let (a, _) = zone.split_by_median(&[GeoPoint { lat: 1, lon: 0 }]).unwrap();
        assert_eq!(a, z(0, 0, 10, 20));
    }

    #[test]
    fn partition_audit_detects_gaps_and_overlaps() {
        let parent = z(0, 0, 10, 10);
        assert!(audit_partition(&parent, &[z(0, 0, 10, 5), z(0, 5, 10, 10)]).is_ok());
        assert!(audit_partition(&parent, &[z(0, 0, 10, 5), z(0, 6, 10, 10)]).is_err());
        assert!(audit_partition(&parent, &[z(0, 0, 10, 6), z(0, 5, 10, 10)]).is_err());
        assert!(audit_partition(&parent, &[z(0, 0, 10, 5), z(0, 5, 11, 10)]).is_err());
    }

    #[test]
    fn degrees_round_to_micro() {
        assert_eq!(GeoPoint::from_degrees(48.137154, 11.576124), GeoPoint { lat: 48_137_154, lon: 11_576_124 });
    }
}
