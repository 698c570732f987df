use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::MapError;
use crate::geometry::{Rect, Vec2};

/// Object classes of the office detector, in feature-vector order.
pub const DEFAULT_CLASS_VOCABULARY: [&str; 14] = [
    "sink",
    "door",
    "oven",
    "whiteboard",
    "table",
    "cardboard",
    "plant",
    "drawers",
    "sofa",
    "storage",
    "chair",
    "extinguisher",
    "person",
    "desk",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticObject {
    #[serde(rename = "class")]
    pub class_label: String,
    pub rect: Rect,
}

/// Room footprint: a rectangle or a simple polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Rect { rect: Rect },
    Polygon { polygon: Vec<[f64; 2]> },
}

impl Region {
    pub fn area(&self) -> f64 {
        match self {
            Region::Rect { rect } => {
                if rect.is_valid() {
                    rect.area()
                } else {
                    0.0
                }
            }
            Region::Polygon { polygon } => {
                let n = polygon.len();
                if n < 3 {
                    return 0.0;
                }
                let twice: f64 = (0..n)
                    .map(|i| {
                        let a = polygon[i];
                        let b = polygon[(i + 1) % n];
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum();
                0.5 * twice.abs()
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Region::Rect { rect } => rect.contains(p),
            Region::Polygon { polygon } => {
                let n = polygon.len();
                let mut inside = false;
                let mut j = n - 1;
                for i in 0..n {
                    let (xi, yi) = (polygon[i][0], polygon[i][1]);
                    let (xj, yj) = (polygon[j][0], polygon[j][1]);
                    if (yi > p.y) != (yj > p.y) && p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }

    /// Axis-aligned bounds `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self {
            Region::Rect { rect } => (rect.min_x(), rect.min_y(), rect.max_x(), rect.max_y()),
            Region::Polygon { polygon } => polygon.iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(a, b, c, d), p| (a.min(p[0]), b.min(p[1]), c.max(p[0]), d.max(p[1])),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub category: String,
    #[serde(flatten)]
    pub region: Region,
}

/// On-disk layout of a semantic map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticMapDocument {
    pub class_vocabulary: Vec<String>,
    #[serde(default)]
    pub dynamic_classes: Vec<String>,
    /// Optional declared room-category vocabulary. When absent, any category
    /// is accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room_categories: Option<Vec<String>>,
    #[serde(default)]
    pub objects: Vec<SemanticObject>,
    #[serde(default)]
    pub rooms: Vec<Room>,
}

/// Abstract map of labeled object rectangles and categorized rooms.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticWorldMap {
    doc: SemanticMapDocument,
}

impl SemanticWorldMap {
    pub fn new(doc: SemanticMapDocument) -> Result<Self, MapError> {
        let mut seen = HashSet::new();
        for label in &doc.class_vocabulary {
            if label.is_empty() {
                return Err(MapError::EmptyClass);
            }
            if !seen.insert(label.as_str()) {
                return Err(MapError::DuplicateClass(label.clone()));
            }
        }
        for d in &doc.dynamic_classes {
            if !seen.contains(d.as_str()) {
                return Err(MapError::UnknownDynamicClass(d.clone()));
            }
        }
        for (index, o) in doc.objects.iter().enumerate() {
            if !seen.contains(o.class_label.as_str()) {
                return Err(MapError::UnknownClass {
                    index,
                    label: o.class_label.clone(),
                });
            }
            if !o.rect.is_valid() {
                return Err(MapError::DegenerateRegion { what: "object", index });
            }
        }
        let mut names = HashSet::new();
        for (index, room) in doc.rooms.iter().enumerate() {
            if !names.insert(room.name.as_str()) {
                return Err(MapError::DuplicateRoom(room.name.clone()));
            }
            if !(room.region.area() > 0.0) {
                return Err(MapError::DegenerateRegion { what: "room", index });
            }
            if let Some(cats) = &doc.room_categories {
                if !cats.iter().any(|c| *c == room.category) {
                    return Err(MapError::UnknownCategory {
                        room: room.name.clone(),
                        category: room.category.clone(),
                    });
                }
            }
        }
        Ok(Self { doc })
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("semantic map serializes")
    }

    pub fn document(&self) -> &SemanticMapDocument {
        &self.doc
    }

    pub fn objects(&self) -> &[SemanticObject] {
        &self.doc.objects
    }
    pub fn rooms(&self) -> &[Room] {
        &self.doc.rooms
    }
    pub fn class_vocabulary(&self) -> &[String] {
        &self.doc.class_vocabulary
    }
    pub fn dynamic_classes(&self) -> &[String] {
        &self.doc.dynamic_classes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.doc.class_vocabulary.iter().position(|c| c == label)
    }

    pub fn is_dynamic(&self, label: &str) -> bool {
        self.doc.dynamic_classes.iter().any(|c| c == label)
    }

    /// Returns a copy whose dynamic set is extended with `extra` classes
    /// (e.g. the unstable classes from a stability analysis).
    pub fn with_dynamic_classes<I, S>(&self, extra: I) -> Result<Self, MapError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut doc = self.doc.clone();
        for c in extra {
            let c = c.as_ref();
            if !doc.dynamic_classes.iter().any(|d| d == c) {
                doc.dynamic_classes.push(c.to_string());
            }
        }
        Self::new(doc)
    }

    /// Rooms of the given category.
    pub fn rooms_with_category<'a>(&'a self, category: &'a str) -> impl Iterator<Item = &'a Room> + 'a {
        self.doc.rooms.iter().filter(move |r| r.category == category)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(&self.doc).expect("semantic map serializes");
        let mut h = Sha256::new();
        h.update(b"semantic-map-v1");
        h.update(&canonical);
        hex::encode(h.finalize())
    }
}

pub fn load_semantic_map(path: &Path) -> Result<SemanticWorldMap, MapError> {
    let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SemanticWorldMap::from_json(&text)
}
