use serde::{Deserialize, Serialize};

use super::BenchError;

/// The 80 COCO object classes.
pub const COCO_OBJECTS: [&str; 80] = [
    "person",
    "bicycle",
    "car",
    "motorcycle",
    "airplane",
    "bus",
    "train",
    "truck",
    "boat",
    "traffic light",
    "fire hydrant",
    "stop sign",
    "parking meter",
    "bench",
    "bird",
    "cat",
    "dog",
    "horse",
    "sheep",
    "cow",
    "elephant",
    "bear",
    "zebra",
    "giraffe",
    "backpack",
    "umbrella",
    "handbag",
    "tie",
    "suitcase",
    "frisbee",
    "skis",
    "snowboard",
    "sports ball",
    "kite",
    "baseball bat",
    "baseball glove",
    "skateboard",
    "surfboard",
    "tennis racket",
    "bottle",
    "wine glass",
    "cup",
    "fork",
    "knife",
    "spoon",
    "bowl",
    "banana",
    "apple",
    "sandwich",
    "orange",
    "broccoli",
    "carrot",
    "hot dog",
    "pizza",
    "donut",
    "cake",
    "chair",
    "couch",
    "potted plant",
    "bed",
    "dining table",
    "toilet",
    "tv",
    "laptop",
    "mouse",
    "remote",
    "keyboard",
    "cell phone",
    "microwave",
    "oven",
    "toaster",
    "sink",
    "refrigerator",
    "book",
    "clock",
    "vase",
    "scissors",
    "teddy bear",
    "hair drier",
    "toothbrush",
];

/// Default render-text words.
pub const TEXT_WORDS: [&str; 31] = [
    "shop", "open", "cafe", "hello", "exit", "sale", "stop", "love", "welcome", "books", "music",
    "pizza", "hotel", "bakery", "park", "bar", "library", "danger", "coffee", "closed", "news",
    "art", "garden", "market", "taxi", "school", "dream", "peace", "free", "home", "food",
];

/// Plural forms that are not the noun plus "s".
pub const IRREGULAR_PLURALS: [(&str, &str); 14] = [
    ("person", "people"),
    ("bus", "buses"),
    ("bench", "benches"),
    ("sheep", "sheep"),
    ("skis", "skis"),
    ("wine glass", "wine glasses"),
    ("knife", "knives"),
    ("sandwich", "sandwiches"),
    ("broccoli", "broccoli"),
    ("couch", "couches"),
    ("mouse", "mice"),
    ("scissors", "scissors"),
    ("toothbrush", "toothbrushes"),
    ("tv", "tvs"),
];

pub const COUNTS: [u32; 4] = [1, 2, 3, 4];
pub const SPATIAL_RELATIONS: [&str; 6] = ["above", "below", "left", "right", "front", "behind"];
pub const SCALE_RELATIONS: [&str; 3] = ["smaller", "bigger", "same"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub objects: Vec<String>,
    pub counts: Vec<u32>,
    pub spatial_relations: Vec<String>,
    pub scale_relations: Vec<String>,
    pub words: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Vocab {
            objects: owned(&COCO_OBJECTS),
            counts: COUNTS.to_vec(),
            spatial_relations: owned(&SPATIAL_RELATIONS),
            scale_relations: owned(&SCALE_RELATIONS),
            words: owned(&TEXT_WORDS),
        }
    }
}

impl Vocab {
    pub fn validate(&self) -> Result<(), BenchError> {
        let check = |what: &'static str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(BenchError::VocabSize {
                    what,
                    expected: want,
                    actual: got,
                })
            }
        };
        check("objects", self.objects.len(), 80)?;
        check("words", self.words.len(), 31)?;
        check("counts", self.counts.len(), 4)?;
        check("spatial relations", self.spatial_relations.len(), 6)?;
        check("scale relations", self.scale_relations.len(), 3)?;
        let all = self
            .objects
            .iter()
            .chain(&self.words)
            .chain(&self.spatial_relations)
            .chain(&self.scale_relations);
        for w in all {
            if w.trim().is_empty() || *w != w.to_lowercase() {
                return Err(BenchError::VocabEntry(w.clone()));
            }
        }
        Ok(())
    }
}

/// `"an"` before a vowel-initial word, else `"a"`.
pub fn article(word: &str) -> &'static str {
    match word.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Plural used when the count is above one.
pub fn plural(noun: &str) -> String {
    IRREGULAR_PLURALS
        .iter()
        .find(|(s, _)| *s == noun)
        .map(|(_, p)| p.to_string())
        .unwrap_or_else(|| format!("{noun}s"))
}

pub fn number_word(n: u32) -> Option<&'static str> {
    [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ]
    .get(n as usize)
    .copied()
}
