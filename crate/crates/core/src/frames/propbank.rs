//! PropBank frameset XML.
//!
//! ```xml
//! <frameset>
//!   <predicate lemma="beat">
//!     <roleset id="beat.02" name="push, cause motion">
//!       <roles>
//!         <role n="0" descr="causer of motion"/>
//!         <role n="1" descr="thing moving"/>
//!       </roles>
//!     </roleset>
//!   </predicate>
//! </frameset>
//! ```
//!
//! Roles numbered `m` (modifiers listed on a roleset) are skipped; their
//! descriptions come from the modifier table.

use super::{CoreRole, InventoryBuilder};
use crate::error::{Error, Result};

pub(super) fn add_frameset(builder: &mut InventoryBuilder, file: &str, text: &str) -> Result<()> {
    let doc = roxmltree::Document::parse_with_options(
        text,
        roxmltree::ParsingOptions {
            allow_dtd: true,
            ..Default::default()
        },
    ).map_err(|e| Error::Ingest {
        file: file.to_string(),
        record: "document".to_string(),
        message: e.to_string(),
    })?;

    let rolesets = doc
        .descendants()
        .filter(|n| n.has_tag_name("roleset"));
    for (i, roleset) in rolesets.enumerate() {
        let record = roleset
            .attribute("id")
            .map(str::to_string)
            .unwrap_or_else(|| format!("roleset #{}", i + 1));
        let fail = |message: String| Error::Ingest {
            file: file.to_string(),
            record: record.clone(),
            message,
        };
        let id = roleset
            .attribute("id")
            .ok_or_else(|| fail("roleset without id".to_string()))?;
        let name = roleset.attribute("name").unwrap_or("");

        let mut roles = Vec::new();
        for role in roleset.descendants().filter(|n| n.has_tag_name("role")) {
            let n = role
                .attribute("n")
                .ok_or_else(|| fail("role without n attribute".to_string()))?;
            if n.eq_ignore_ascii_case("m") {
                continue;
            }
            let core = CoreRole::from_frame_number(n)
                .ok_or_else(|| fail(format!("unrecognized role number {n:?}")))?;
            let descr = role.attribute("descr").unwrap_or("");
            roles.push((core, descr.to_string()));
        }
        builder.add_definition(file, &record, id, name, &roles)?;
    }
    Ok(())
}
