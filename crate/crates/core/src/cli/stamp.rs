//! Reproducibility stamp: everything needed to re-run an invocation
//! identically. Deliberately free of timestamps so identical runs write
//! identical stamps.

use std::path::Path;

pub struct Stamp<'a> {
    pub argv: &'a [String],
    pub seed: Option<u64>,
    pub config_snapshot: &'a str,
}

impl Stamp<'_> {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "tool = deepstreets {}\n",
            env!("CARGO_PKG_VERSION")
        ));
        out.push_str(&format!("argv = {}\n", self.argv.join(" ")));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        out.push_str(&format!(
            "manifest_schema_version = {}\n",
            crate::dataset::SCHEMA_VERSION
        ));
        out.push_str(&format!(
            "checkpoint_schema_version = {}\n",
            crate::model::CHECKPOINT_SCHEMA_VERSION
        ));
        if self.config_snapshot.is_empty() {
            out.push_str("config = <none>\n");
        } else {
            out.push_str("config_begin\n");
            out.push_str(self.config_snapshot);
            if !self.config_snapshot.ends_with('\n') {
                out.push('\n');
            }
            out.push_str("config_end\n");
        }
        out
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("run_stamp.txt"), self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamp_is_deterministic() {
        let argv = vec!["deepstreets".to_string(), "split".to_string()];
        let stamp = Stamp {
            argv: &argv,
            seed: Some(17),
            config_snapshot: "manifest = m.jsonl\n",
        };
        assert_eq!(stamp.render(), stamp.render());
        assert!(stamp.render().contains("seed = 17"));
        assert!(stamp.render().contains("manifest_schema_version = 1"));
    }
}
