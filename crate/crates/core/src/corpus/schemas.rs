//! Built-in domains used by the generator: a restaurant-booking domain and a
//! movie-ticket domain sharing one act inventory.

use std::collections::BTreeMap;

use super::DomainSchema;

pub const BUILTIN_SCHEMAS: &[&str] = &["restaurant", "movie"];

const USER_ACTS: &[&str] = &[
    "greeting",
    "inform",
    "affirm",
    "negate",
    "dontcare",
    "thank_you",
    "goodbye",
];

const SYSTEM_ACTS: &[&str] = &[
    "greeting",
    "request",
    "offer",
    "confirm",
    "inform",
    "notify_success",
    "goodbye",
];

const ADJECTIVES: &[&str] = &[
    "golden", "silver", "blue", "red", "little", "grand", "happy", "lucky", "royal", "green",
    "hidden", "old", "rustic", "urban", "wild", "velvet", "iron", "crystal", "sunny", "copper",
];

const NOUNS: &[&str] = &[
    "dragon", "lantern", "olive", "oak", "harbor", "garden", "spoon", "table", "fig", "pepper",
    "willow", "anchor", "kettle", "orchard", "bridge", "lotus", "cedar", "canyon", "meadow", "fox",
];

const TITLE_NOUNS: &[&str] = &[
    "storm", "river", "empire", "shadow", "voyage", "legacy", "horizon", "secret", "kingdom",
    "machine", "island", "promise", "signal", "frontier", "mirror", "echo", "summit", "comet",
    "harvest", "circuit",
];

const AREAS: &[&str] = &[
    "downtown", "midtown", "uptown", "north beach", "mission", "soma", "chinatown", "riverside",
    "old town", "west end", "harbor side", "hill district",
];

fn combos(first: &[&str], second: &[&str], n: usize, fmt: impl Fn(&str, &str) -> String) -> Vec<String> {
    // walk diagonals so the first n values mix both word lists
    let mut out = Vec::with_capacity(n);
    let (a, b) = (first.len(), second.len());
    'outer: for shift in 0..b {
        for i in 0..a {
            out.push(fmt(first[i], second[(i + shift) % b]));
            if out.len() == n {
                break 'outer;
            }
        }
    }
    out
}

fn times() -> Vec<String> {
    let mut out = Vec::new();
    for hour in 10..=23u32 {
        let (h, suffix) = if hour < 12 {
            (hour, "am")
        } else if hour == 12 {
            (12, "pm")
        } else {
            (hour - 12, "pm")
        };
        for minute in ["", ":15", ":30", ":45"] {
            out.push(format!("{h}{minute} {suffix}"));
        }
    }
    out
}

fn dates() -> Vec<String> {
    let mut out: Vec<String> = [
        "today", "tomorrow", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday",
        "sunday",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for month in ["march", "april", "may"] {
        for day in 1..=17u32 {
            let suffix = match day {
                1 => "st",
                2 => "nd",
                3 => "rd",
                _ => "th",
            };
            out.push(format!("{month} {day}{suffix}"));
        }
    }
    out
}

fn people() -> Vec<String> {
    let words = ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    words
        .iter()
        .map(|s| s.to_string())
        .chain((1..=10).map(|n| n.to_string()))
        .collect()
}

fn own(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn restaurant_schema() -> DomainSchema {
    let mut s = DomainSchema::new(
        "restaurant",
        &["pricerange", "area", "restaurant", "food", "#people", "meal", "date", "time"],
        USER_ACTS,
        SYSTEM_ACTS,
    );
    let values: BTreeMap<String, Vec<String>> = [
        ("pricerange", own(&["cheap", "moderate", "expensive", "inexpensive", "fancy"])),
        ("area", own(AREAS)),
        ("restaurant", combos(ADJECTIVES, NOUNS, 100, |a, b| format!("{a} {b}"))),
        (
            "food",
            own(&[
                "italian", "chinese", "thai", "indian", "mexican", "french", "greek", "japanese",
                "korean", "vietnamese", "spanish", "turkish", "lebanese", "ethiopian", "peruvian",
                "brazilian", "german", "british", "american", "cuban", "moroccan", "persian",
                "polish", "russian", "nepalese", "malaysian", "indonesian", "afghan", "jamaican",
                "portuguese",
            ]),
        ),
        ("#people", people()),
        ("meal", own(&["breakfast", "brunch", "lunch", "dinner", "late night snack"])),
        ("date", dates()),
        ("time", times()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    s.value_inventory = values;
    s
}

pub fn movie_schema() -> DomainSchema {
    let mut s = DomainSchema::new(
        "movie",
        &["date", "time", "movie", "theatre", "area"],
        USER_ACTS,
        SYSTEM_ACTS,
    );
    let values: BTreeMap<String, Vec<String>> = [
        ("date", dates()),
        ("time", times()),
        ("movie", combos(ADJECTIVES, TITLE_NOUNS, 100, |a, b| format!("the {a} {b}"))),
        ("theatre", combos(NOUNS, &["cinema", "theatre", "playhouse", "pictures"], 40, |a, b| format!("{a} {b}"))),
        ("area", own(AREAS)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    s.value_inventory = values;
    s
}

pub fn builtin_schema(name: &str) -> Option<DomainSchema> {
    match name {
        "restaurant" => Some(restaurant_schema()),
        "movie" => Some(movie_schema()),
        _ => None,
    }
}
