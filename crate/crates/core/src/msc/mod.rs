//! MSC 2020 codes: grammar, the official code list and extraction from prose.

mod code;
mod extract;
mod taxonomy;

pub use code::{parse_code, top_level, Area, Level, MalformedCode, MscCode, TopClass};
pub use extract::{extract_codes, scan, CodeHit, Token};
pub use taxonomy::{LevelCounts, Taxonomy, TaxonomyError, ValidationStatus};
