//! GEXF 1.2 export for Gephi.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, GraphError, SignedBipartiteGraph};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignFilter {
    #[default]
    All,
    Positive,
    Negative,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serialises the graph. Every node is written regardless of the filter;
/// only edges are filtered. User ids are `u{i}`, entity ids `e{j}`.
pub fn to_gexf(g: &SignedBipartiteGraph, filter: SignFilter) -> String {
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    x.push_str("<gexf xmlns=\"http://www.gexf.net/1.2draft\" version=\"1.2\">\n");
    x.push_str("  <meta>\n    <creator>stentconv</creator>\n    <description>signed user-entity stance graph</description>\n  </meta>\n");
    x.push_str("  <graph mode=\"static\" defaultedgetype=\"undirected\">\n");
    x.push_str("    <attributes class=\"node\">\n      <attribute id=\"0\" title=\"kind\" type=\"string\"/>\n    </attributes>\n");
    x.push_str("    <attributes class=\"edge\">\n      <attribute id=\"0\" title=\"sign\" type=\"string\"/>\n      <attribute id=\"1\" title=\"weight\" type=\"double\"/>\n    </attributes>\n");

    x.push_str("    <nodes>\n");
    let nodes = g
        .users()
        .iter()
        .enumerate()
        .map(|(i, u)| (format!("u{i}"), u.as_str(), "user"))
        .chain(
            g.entities()
                .iter()
                .enumerate()
                .map(|(j, e)| (format!("e{j}"), e.as_str(), "entity")),
        );
    for (id, label, kind) in nodes {
        let _ = writeln!(
            x,
            "      <node id=\"{id}\" label=\"{}\">\n        <attvalues><attvalue for=\"0\" value=\"{kind}\"/></attvalues>\n      </node>",
            escape(label)
        );
    }
    x.push_str("    </nodes>\n");

    x.push_str("    <edges>\n");
    let mut selected: Vec<(&Edge, &str)> = Vec::new();
    if filter != SignFilter::Negative {
        selected.extend(g.pos_edges().iter().map(|e| (e, "+")));
    }
    if filter != SignFilter::Positive {
        selected.extend(g.neg_edges().iter().map(|e| (e, "-")));
    }
    for (k, (e, sign)) in selected.into_iter().enumerate() {
        let _ = writeln!(
            x,
            "      <edge id=\"{k}\" source=\"u{}\" target=\"e{}\" weight=\"{w}\">\n        <attvalues><attvalue for=\"0\" value=\"{sign}\"/><attvalue for=\"1\" value=\"{w}\"/></attvalues>\n      </edge>",
            e.user,
            e.entity,
            w = e.weight
        );
    }
    x.push_str("    </edges>\n  </graph>\n</gexf>\n");
    x
}

pub fn export_gexf(g: &SignedBipartiteGraph, path: &Path, filter: SignFilter) -> Result<(), GraphError> {
    crate::io::write_atomic(path, to_gexf(g, filter).as_bytes()).map_err(|e| match e {
        crate::Error::Io { path, source } => GraphError::Io { path, source },
        other => GraphError::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(other.to_string()),
        },
    })
}
