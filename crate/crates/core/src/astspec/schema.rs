use indexmap::IndexMap;

use super::{parse_spec, FieldKind, NodeRef, SpecAst, SpecError};
use crate::span::Pos;

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub name: String,
    pub origin: String,
    pub fields: Vec<Field>,
}

impl Alternative {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Category {
    pub name: String,
    pub origin: String,
    pub alternatives: IndexMap<String, Alternative>,
}

/// Compiled, immutable metamodel of a tree.
///
/// For an extension schema the base categories are carried over verbatim
/// (keeping their base origin) ahead of the extension's own categories.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    tree_id: String,
    base_tree_id: Option<String>,
    categories: IndexMap<String, Category>,
}

impl Schema {
    /// Parses and compiles a base tree specification.
    pub fn compile(text: &str) -> Result<Schema, SpecError> {
        build_schema(&parse_spec(text)?)
    }

    /// Parses an extension specification and merges it over `base`.
    pub fn compile_extension(base: &Schema, text: &str) -> Result<Schema, SpecError> {
        extend_schema(base, &parse_spec(text)?)
    }

    pub fn tree_id(&self) -> &str {
        &self.tree_id
    }

    pub fn base_tree_id(&self) -> Option<&str> {
        self.base_tree_id.as_deref()
    }

    pub fn category(&self, name: &str) -> Option<&Category> {
        self.categories.get(name)
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.categories.values()
    }

    pub fn alternative(&self, category: &str, alternative: &str) -> Option<&Alternative> {
        self.categories.get(category)?.alternatives.get(alternative)
    }

    /// All `(category, alternative)` pairs in declaration order.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &Alternative)> {
        self.categories
            .values()
            .flat_map(|c| c.alternatives.values().map(move |a| (c.name.as_str(), a)))
    }
}

fn compile_categories(
    ast: &SpecAst,
    origin: &str,
    mut resolve: impl FnMut(&NodeRef, Pos) -> Result<NodeRef, SpecError>,
) -> Result<IndexMap<String, Category>, SpecError> {
    let mut out = IndexMap::new();
    for cat in &ast.categories {
        let mut alternatives = IndexMap::new();
        for alt in &cat.alternatives {
            let mut fields = Vec::with_capacity(alt.fields.len());
            for field in &alt.fields {
                let mut kind = field.kind.clone();
                if let Some(r) = kind.node_ref_mut() {
                    *r = resolve(r, field.kind_pos)?;
                }
                fields.push(Field {
                    name: field.name.clone(),
                    kind,
                });
            }
            alternatives.insert(
                alt.name.clone(),
                Alternative {
                    name: alt.name.clone(),
                    origin: origin.to_string(),
                    fields,
                },
            );
        }
        out.insert(
            cat.name.clone(),
            Category {
                name: cat.name.clone(),
                origin: origin.to_string(),
                alternatives,
            },
        );
    }
    Ok(out)
}

/// Compiles a base (non-extension) specification into a schema.
pub fn build_schema(ast: &SpecAst) -> Result<Schema, SpecError> {
    if let Some(base) = &ast.extends {
        return Err(SpecError::MissingBase {
            tree: ast.tree_id.clone(),
            base: base.clone(),
        });
    }
    let declared: Vec<&str> = ast.categories.iter().map(|c| c.name.as_str()).collect();
    let categories = compile_categories(ast, &ast.tree_id, |r, pos| {
        if let Some(q) = &r.tree {
            return Err(SpecError::QualifierWithoutBase {
                qualifier: q.clone(),
                pos,
            });
        }
        if !declared.contains(&r.category.as_str()) {
            return Err(SpecError::UnresolvedReference {
                category: r.category.clone(),
                pos,
            });
        }
        Ok(NodeRef {
            category: r.category.clone(),
            tree: Some(ast.tree_id.clone()),
        })
    })?;
    Ok(Schema {
        tree_id: ast.tree_id.clone(),
        base_tree_id: None,
        categories,
    })
}

/// Merges an extension specification over `base`, returning a new schema.
///
/// Extensions may add categories only; base categories keep their alternatives
/// and fields untouched. Unqualified references resolve against the extension
/// first and the base second; `base::X` (or `<BaseId>::X`) resolves in the base.
pub fn extend_schema(base: &Schema, ext: &SpecAst) -> Result<Schema, SpecError> {
    match &ext.extends {
        Some(id) if id == &base.tree_id => {}
        Some(id) => {
            return Err(SpecError::BaseMismatch {
                expected: id.clone(),
                found: base.tree_id.clone(),
            })
        }
        None => {
            return Err(SpecError::BaseMismatch {
                expected: String::new(),
                found: base.tree_id.clone(),
            })
        }
    }
    if base.base_tree_id.is_some() {
        return Err(SpecError::NestedExtension {
            base: base.tree_id.clone(),
        });
    }
    if ext.tree_id == base.tree_id {
        return Err(SpecError::TreeIdCollision {
            tree: ext.tree_id.clone(),
        });
    }
    for cat in &ext.categories {
        if base.categories.contains_key(&cat.name) {
            return Err(SpecError::IllegalOverride {
                category: cat.name.clone(),
                pos: cat.pos,
            });
        }
    }

    let own: Vec<&str> = ext.categories.iter().map(|c| c.name.as_str()).collect();
    let ext_categories = compile_categories(ext, &ext.tree_id, |r, pos| {
        let in_base = || {
            base.categories.contains_key(&r.category).then(|| NodeRef {
                category: r.category.clone(),
                tree: Some(base.tree_id.clone()),
            })
        };
        let resolved = match &r.tree {
            Some(q) if q == "base" || q == &base.tree_id => in_base(),
            Some(q) => {
                return Err(SpecError::UnknownQualifier {
                    qualifier: q.clone(),
                    base: base.tree_id.clone(),
                    pos,
                })
            }
            None if own.contains(&r.category.as_str()) => Some(NodeRef {
                category: r.category.clone(),
                tree: Some(ext.tree_id.clone()),
            }),
            None => in_base(),
        };
        resolved.ok_or_else(|| SpecError::UnresolvedReference {
            category: r.category.clone(),
            pos,
        })
    })?;

    let mut categories = base.categories.clone();
    categories.extend(ext_categories);
    Ok(Schema {
        tree_id: ext.tree_id.clone(),
        base_tree_id: Some(base.tree_id.clone()),
        categories,
    })
}
