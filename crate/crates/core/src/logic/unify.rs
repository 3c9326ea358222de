use std::collections::BTreeMap;

use crate::lang::{Literal, Term};

/// Variable bindings, kept fully resolved: no bound variable occurs in any
/// binding's value, so applying the substitution once is enough.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Term)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn apply(&self, term: &Term) -> Term {
        match term {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| term.clone()),
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
            _ => term.clone(),
        }
    }

    pub fn apply_literal(&self, lit: &Literal) -> Literal {
        Literal {
            negated: lit.negated,
            predicate: lit.predicate.clone(),
            args: lit.args.iter().map(|a| self.apply(a)).collect(),
        }
    }

    /// Bind `var` to `term`, failing the occurs check. `term` is resolved
    /// against the current bindings first.
    pub fn bind(&mut self, var: &str, term: &Term) -> bool {
        let term = self.apply(term);
        if let Term::Var(v) = &term {
            if v == var {
                return true;
            }
        }
        if term.occurs(var) {
            return false;
        }
        if let Some(existing) = self.bindings.get(var).cloned() {
            return unify_in_place(&existing, &term, self);
        }
        let single = Substitution {
            bindings: BTreeMap::from([(var.to_string(), term.clone())]),
        };
        for value in self.bindings.values_mut() {
            if value.occurs(var) {
                *value = single.apply(value);
            }
        }
        self.bindings.insert(var.to_string(), term);
        true
    }

    /// Keep only the bindings for `vars`.
    pub fn restrict(&self, vars: &[&str]) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(k, _)| vars.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Compose with bindings from `other` (which must be consistent).
    pub fn merge(&self, other: &Substitution) -> Option<Substitution> {
        let mut out = self.clone();
        for (k, v) in &other.bindings {
            if !out.bind(k, v) {
                return None;
            }
        }
        Some(out)
    }
}

impl FromIterator<(String, Term)> for Substitution {
    /// Builds a substitution by binding each pair in turn; panics if the
    /// pairs are inconsistent.
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (k, v) in iter {
            assert!(s.bind(&k, &v), "inconsistent binding for {k}");
        }
        s
    }
}

impl std::fmt::Display for Substitution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} ↦ {v}")?;
        }
        f.write_str("}")
    }
}

fn unify_in_place(a: &Term, b: &Term, s: &mut Substitution) -> bool {
    let mut work = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = work.pop() {
        let x = s.apply(&x);
        let y = s.apply(&y);
        match (&x, &y) {
            (Term::Wildcard, _) | (_, Term::Wildcard) => {}
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if !s.bind(v, t) {
                    return false;
                }
            }
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return false;
                }
                work.extend(xs.iter().cloned().zip(ys.iter().cloned()).rev());
            }
            (x, y) => {
                if x != y {
                    return false;
                }
            }
        }
    }
    true
}

/// Most general unifier of `a` and `b` extending `s`, with occurs check.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    unify_in_place(a, b, &mut out).then_some(out)
}

/// Unify two literals of the same predicate and arity. Polarity is ignored.
pub fn unify_literals(a: &Literal, b: &Literal, s: &Substitution) -> Option<Substitution> {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return None;
    }
    let mut out = s.clone();
    for (x, y) in a.args.iter().zip(&b.args) {
        if !unify_in_place(x, y, &mut out) {
            return None;
        }
    }
    Some(out)
}

/// Rename every variable of `term` apart by appending `#tag`.
pub fn rename_term(term: &Term, tag: &str) -> Term {
    match term {
        Term::Var(v) => Term::Var(format!("{v}#{tag}")),
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| rename_term(a, tag)).collect()),
        _ => term.clone(),
    }
}

pub fn rename_literal(lit: &Literal, tag: &str) -> Literal {
    Literal {
        negated: lit.negated,
        predicate: lit.predicate.clone(),
        args: lit.args.iter().map(|a| rename_term(a, tag)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_term;

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn subst(pairs: &[(&str, &str)]) -> Substitution {
        pairs.iter().map(|(k, v)| (k.to_string(), t(v))).collect()
    }

    #[test]
    fn binds_variable_to_constant() {
        assert_eq!(
            unify(&t("X"), &t("adopted"), &Substitution::new()),
            Some(subst(&[("X", "adopted")]))
        );
    }

    #[test]
    fn structural_decomposition() {
        let s = unify(
            &t("task_status(T, adopted)"),
            &t("task_status(t1, adopted)"),
            &Substitution::new(),
        );
        assert_eq!(s, Some(subst(&[("T", "t1")])));
    }

    #[test]
    fn occurs_check_fails() {
        assert_eq!(unify(&t("X"), &t("f(X)"), &Substitution::new()), None);
        assert_eq!(unify(&t("f(X, Y)"), &t("f(Y, g(X))"), &Substitution::new()), None);
    }

    #[test]
    fn nested_unifier_makes_both_sides_equal() {
        let (a, b) = (t("f(X, g(Y))"), t("f(h(Z), g(Z))"));
        let s = unify(&a, &b, &Substitution::new()).unwrap();
        assert_eq!(s, subst(&[("X", "h(Z)"), ("Y", "Z")]));
        assert_eq!(s.apply(&a), s.apply(&b));
    }

    #[test]
    fn wildcard_binds_nothing() {
        let s = unify(&t("f(_, _)"), &t("f(a, b)"), &Substitution::new()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn clash_fails() {
        assert_eq!(unify(&t("f(a)"), &t("f(b)"), &Substitution::new()), None);
        assert_eq!(unify(&t("f(a)"), &t("g(a)"), &Substitution::new()), None);
        assert_eq!(unify(&t("\"a\""), &t("a"), &Substitution::new()), None);
    }

    #[test]
    fn extends_existing_bindings() {
        let s0 = subst(&[("X", "a")]);
        assert_eq!(unify(&t("X"), &t("b"), &s0), None);
        assert_eq!(
            unify(&t("f(X, Y)"), &t("f(a, X)"), &s0),
            Some(subst(&[("X", "a"), ("Y", "a")]))
        );
    }
}
