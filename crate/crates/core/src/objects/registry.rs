use super::{mutate, Program};
use crate::casestudies::{build_hwq, build_tsq};
use crate::lattice::{build_glb, build_lub};
use crate::seqspec::SeqSpec;
use crate::universal::{build_a_spec, build_atomic, build_d_spec, build_u_spec};
use crate::{Error, Result};

pub const MUTATIONS: [&str; 3] = ["swap-E1-E2", "deq-skip-swap", "return-constant"];

/// Base names accepted by [`build_object`]; combinators and mutants are
/// formed from these.
pub fn object_names() -> Vec<&'static str> {
    vec!["hwq", "tsq", "a_spec", "u_spec", "d_spec", "atomic"]
}

/// Splits `head(a, b, ...)` into `head` and its top-level arguments.
pub fn split_call(name: &str) -> Option<(&str, Vec<&str>)> {
    let open = name.find('(')?;
    let inner = name[open + 1..].strip_suffix(')')?;
    let mut args = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return None;
                }
            }
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    args.push(inner[start..].trim());
    Some((name[..open].trim(), args))
}

/// Builds a registered object for `spec`.
///
/// Names: `hwq`, `tsq` (queue only), `a_spec`, `u_spec`, `d_spec`, `atomic`
/// (optionally written `u_spec(queue)` and so on), `lub(x,y)`, `glb(x,y)`, and
/// mutants `x:mutation` for the mutations in [`MUTATIONS`].
pub fn build_object(name: &str, spec: &SeqSpec) -> Result<Program> {
    let name = name.trim();
    if let Some((base, mutation)) = split_mutant(name) {
        return mutate(&build_object(base, spec)?, mutation);
    }
    if let Some((head, args)) = split_call(name) {
        match (head, args.as_slice()) {
            ("lub", [a, b]) => return build_lub(&build_object(a, spec)?, &build_object(b, spec)?),
            ("glb", [a, b]) => return build_glb(&build_object(a, spec)?, &build_object(b, spec)?),
            (base @ ("a_spec" | "u_spec" | "d_spec" | "atomic"), [s]) => {
                if *s != spec.name {
                    return Err(Error::AlphabetMismatch(format!(
                        "{name} requested with specification {}",
                        spec.name
                    )));
                }
                return build_object(base, spec);
            }
            _ => return Err(Error::UnknownObject(name.to_string())),
        }
    }
    let queue_only = |p: Result<Program>| {
        if spec.name == "queue" {
            p
        } else {
            Err(Error::AlphabetMismatch(format!(
                "{name} implements a queue, not {}",
                spec.name
            )))
        }
    };
    match name {
        "hwq" => queue_only(build_hwq()),
        "tsq" => queue_only(build_tsq()),
        "a_spec" => build_a_spec(spec),
        "u_spec" => build_u_spec(spec),
        "d_spec" => build_d_spec(spec),
        "atomic" => build_atomic(spec),
        _ => Err(Error::UnknownObject(name.to_string())),
    }
}

/// `x:mutation` with the colon outside any parentheses.
fn split_mutant(name: &str) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    let mut last = None;
    for (i, ch) in name.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ':' if depth == 0 => last = Some(i),
            _ => {}
        }
    }
    last.map(|i| (&name[..i], &name[i + 1..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_nested_calls() {
        assert_eq!(
            split_call("lub(hwq,tsq)"),
            Some(("lub", vec!["hwq", "tsq"]))
        );
        assert_eq!(
            split_call("glb(lub(a,b), c)"),
            Some(("glb", vec!["lub(a,b)", "c"]))
        );
        assert_eq!(split_call("hwq"), None);
        assert_eq!(split_call("lub(a,b"), None);
    }

    #[test]
    fn mutant_names() {
        assert_eq!(split_mutant("hwq:swap-E1-E2"), Some(("hwq", "swap-E1-E2")));
        assert_eq!(split_mutant("lub(hwq,tsq)"), None);
    }
}
