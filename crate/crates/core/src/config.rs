//! INI-style `key = value` files with `#` comments.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Default)]
pub struct IniDoc {
    entries: Vec<(String, String, usize)>,
}

impl IniDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected key = value")))?;
            let key = key.trim();
            if key.is_empty() {
                bail!(Config, "line {line_no}: empty key");
            }
            if entries.iter().any(|(k, _, _)| k == key) {
                bail!(Config, "line {line_no}: duplicate key {key:?}");
            }
            entries.push((key.to_string(), value.trim().to_string(), line_no));
        }
        Ok(IniDoc { entries })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v, _)| (k.as_str(), v.as_str()))
    }

    pub fn parse_value<T>(&self, key: &str, value: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        value
            .parse()
            .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
    }
}

pub fn parse_list<T>(key: &str, value: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|e| Error::Config(format!("{key}: bad entry {p:?}: {e}")))
        })
        .collect()
}

pub fn join_list<T: Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let doc = IniDoc::parse("# header\n a = 1 \n\nb=x,y # trailing\n").unwrap();
        let e: Vec<_> = doc.entries().collect();
        assert_eq!(e, vec![("a", "1"), ("b", "x,y")]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(IniDoc::parse("novalue\n").is_err());
        assert!(IniDoc::parse("a = 1\na = 2\n").is_err());
        assert!(IniDoc::parse(" = 2\n").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<usize>("k", "1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_list::<usize>("k", "1,x").is_err());
        assert_eq!(join_list(&[0.5, 1.0]), "0.5,1");
    }
}
