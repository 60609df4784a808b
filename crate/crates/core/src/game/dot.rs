//! Graphviz rendering: Player 1 nodes as boxes, Player 2 nodes as circles,
//! probabilistic nodes as filled boxes.

use std::fmt::Write;

use super::{Game, Node};
use crate::domain::Domain;
use crate::parser::format_probability;

pub fn to_dot<D: Domain>(game: &Game<D::Elem>, domain: &D) -> String {
    let mut out = String::from("digraph game {\n  rankdir=TB;\n");
    for (id, node) in game.nodes().iter().enumerate() {
        let (shape, label) = match node {
            Node::Accept => ("doublecircle", "⊙".to_string()),
            Node::Reject => ("doublecircle", "⊗".to_string()),
            Node::Elem(e) => ("box", domain.render(e)),
            Node::Cmd { action, .. } => ("circle", game.action_name(*action).to_string()),
            Node::Final { .. } => ("circle", "⊙?".to_string()),
            Node::Prob { refined, .. } => ("box", domain.render(refined)),
        };
        let style = match node {
            Node::Prob { .. } => ", style=filled, fillcolor=lightgrey",
            _ if id == game.start() => ", penwidth=2",
            _ => "",
        };
        let _ = writeln!(
            out,
            "  n{id} [shape={shape}, label=\"{}\"{style}];",
            label.replace('"', "\\\"")
        );
    }
    for id in 0..game.len() {
        let dist = game.dist(id);
        if dist.is_empty() {
            for &t in game.succ(id) {
                let _ = writeln!(out, "  n{id} -> n{t};");
            }
        } else {
            for (t, p) in dist {
                let _ = writeln!(out, "  n{id} -> n{t} [label=\"{}\"];", format_probability(p));
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::IntervalDomain;
    use crate::game::{build_game, DelayConfig};
    use crate::parser::parse_program;

    #[test]
    fn shapes_and_probability_labels() {
        let p = parse_program(
            "int x in [0,2] = 0; Flip: (x = 0) -> 1/2:(x' = 1) + 1/2:(x' = 2); reach: (x = 1)",
        )
        .unwrap();
        let d = IntervalDomain::new(p.names().to_vec());
        let g = build_game(&p, &d, &DelayConfig::default(), 100).unwrap();
        let dot = to_dot(&g, &d);
        assert!(dot.starts_with("digraph game {"));
        assert!(dot.contains("shape=box, label=\"x:[0,0]\", penwidth=2"));
        assert!(dot.contains("shape=circle, label=\"Flip\""));
        assert!(dot.contains("style=filled"));
        assert_eq!(dot.matches("label=\"0.5\"").count(), 2);
    }
}
