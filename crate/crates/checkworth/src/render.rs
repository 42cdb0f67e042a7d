//! Attention highlighting for [`Explanation`]s.
//!
//! HTML and ANSI output shade each token by [`shade_bucket`] relative to the
//! sentence's largest weight, so the most attended token is always fully
//! highlighted.

use std::fmt::Write as _;
use std::str::FromStr;

use checkworth_core::analysis::{shade_bucket, Explanation, SHADE_BUCKETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Html,
    Ansi,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "html" => Ok(Format::Html),
            "ansi" => Ok(Format::Ansi),
            "json" => Ok(Format::Json),
            _ => Err(format!(
                "unknown format `{s}` (expected html, ansi or json)"
            )),
        }
    }
}

pub fn render(explanations: &[Explanation], format: Format) -> String {
    match format {
        Format::Html => html(explanations),
        Format::Ansi => ansi(explanations),
        Format::Json => json(explanations),
    }
}

pub fn json(explanations: &[Explanation]) -> String {
    crate::report::to_pretty_json(&explanations)
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn label_text(label: Option<f64>) -> String {
    label.map(|l| l.to_string()).unwrap_or_else(|| "-".into())
}

/// A standalone document with inline styles and no external assets.
pub fn html(explanations: &[Explanation]) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Attention weights</title>\n<style>\n\
         body { font-family: sans-serif; margin: 2em; }\n\
         table { border-collapse: collapse; }\n\
         td, th { padding: 0.3em 0.6em; border-bottom: 1px solid #ddd; text-align: left; vertical-align: top; }\n\
         span.t { padding: 0 0.1em; border-radius: 2px; }\n",
    );
    for b in 0..SHADE_BUCKETS {
        let a = b as f64 / (SHADE_BUCKETS - 1) as f64;
        let _ = writeln!(
            out,
            "span.w{b} {{ background: rgba(214, 39, 40, {a:.3}); }}"
        );
    }
    out.push_str(
        "</style>\n</head>\n<body>\n<table>\n<tr><th>id</th><th>label</th><th>score</th><th>sentence</th></tr>\n",
    );
    for e in explanations {
        let max = e.max_alpha();
        let _ = write!(
            out,
            "<tr><td>{}</td><td>{}</td><td>{:.4}</td><td>",
            escape(&e.id),
            label_text(e.label),
            e.score
        );
        for (i, t) in e.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(
                out,
                "<span class=\"t w{}\" title=\"{:.4}\">{}</span>",
                shade_bucket(t.alpha, max, SHADE_BUCKETS),
                t.alpha,
                escape(&t.text)
            );
        }
        out.push_str("</td></tr>\n");
    }
    out.push_str("</table>\n</body>\n</html>\n");
    out
}

/// 256-colour backgrounds from unshaded to deep red, one per bucket.
const ANSI_SHADES: [u8; SHADE_BUCKETS] = [0, 224, 217, 210, 203, 196, 160, 124];

pub fn ansi(explanations: &[Explanation]) -> String {
    let mut out = String::new();
    for e in explanations {
        let max = e.max_alpha();
        let _ = write!(
            out,
            "{} [{:.4}, label {}] ",
            e.id,
            e.score,
            label_text(e.label)
        );
        for (i, t) in e.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match shade_bucket(t.alpha, max, SHADE_BUCKETS) {
                0 => out.push_str(&t.text),
                b => {
                    let _ = write!(out, "\x1b[48;5;{}m{}\x1b[0m", ANSI_SHADES[b], t.text);
                }
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use checkworth_core::analysis::TokenWeight;

    fn sample() -> Explanation {
        Explanation {
            id: "s<1>".into(),
            score: 0.75,
            label: Some(1.0),
            tokens: vec![
                TokenWeight {
                    text: "taxes".into(),
                    alpha: 0.7,
                },
                TokenWeight {
                    text: "&".into(),
                    alpha: 0.05,
                },
                TokenWeight {
                    text: "jobs".into(),
                    alpha: 0.25,
                },
            ],
        }
    }

    #[test]
    fn html_is_escaped_and_self_contained() {
        let doc = html(&[sample()]);
        assert!(doc.starts_with("<!DOCTYPE html>"));
        assert!(doc.contains("<td>s&lt;1&gt;</td>"));
        assert!(doc.contains("<span class=\"t w7\" title=\"0.7000\">taxes</span>"));
        assert!(doc.contains("<span class=\"t w0\" title=\"0.0500\">&amp;</span>"));
        assert!(doc.contains("<span class=\"t w2\" title=\"0.2500\">jobs</span>"));
        assert!(!doc.contains("http"));
    }

    #[test]
    fn ansi_uses_background_shades() {
        let text = ansi(&[sample()]);
        assert_eq!(
            text,
            "s<1> [0.7500, label 1] \x1b[48;5;124mtaxes\x1b[0m & \x1b[48;5;217mjobs\x1b[0m\n"
        );
    }

    #[test]
    fn json_schema() {
        let v: serde_json::Value = serde_json::from_str(&json(&[sample()])).unwrap();
        let e = &v[0];
        assert_eq!(e["id"], "s<1>");
        assert_eq!(e["score"], 0.75);
        assert_eq!(e["label"], 1.0);
        assert_eq!(e["tokens"][2]["text"], "jobs");
        assert_eq!(e["tokens"][2]["alpha"], 0.25);
        let keys: Vec<&String> = e.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 4);
    }

    #[test]
    fn format_names() {
        assert_eq!("html".parse::<Format>().unwrap(), Format::Html);
        assert!("pdf".parse::<Format>().is_err());
    }
}
