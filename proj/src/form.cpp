#include "mls/form.hpp"

#include <algorithm>
#include <cmath>

namespace mls {

QualifiedName QualifiedName::parse(std::string_view text) {
  if (text.size() > 1) {
    auto slash = text.find('/');
    if (slash != std::string_view::npos && slash > 0 && slash + 1 < text.size()) {
      return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
    }
  }
  return {"", std::string(text)};
}

std::string_view to_string(FormKind kind) {
  switch (kind) {
    case FormKind::Nil: return "nil";
    case FormKind::Boolean: return "boolean";
    case FormKind::Number: return "number";
    case FormKind::String: return "string";
    case FormKind::Symbol: return "symbol";
    case FormKind::Keyword: return "keyword";
    case FormKind::List: return "list";
    case FormKind::Vector: return "vector";
    case FormKind::Map: return "map";
  }
  return "?";
}

Form Form::nil(SourceSpan span) {
  Form f;
  f.span = span;
  return f;
}

Form Form::boolean_of(bool b, SourceSpan span) {
  Form f;
  f.kind = FormKind::Boolean;
  f.boolean = b;
  f.span = span;
  return f;
}

Form Form::number_of(double d, SourceSpan span) {
  Form f;
  f.kind = FormKind::Number;
  f.number = d;
  f.span = span;
  return f;
}

Form Form::string_of(std::string s, SourceSpan span) {
  Form f;
  f.kind = FormKind::String;
  f.text = std::move(s);
  f.span = span;
  return f;
}

Form Form::symbol(QualifiedName n, SourceSpan span) {
  Form f;
  f.kind = FormKind::Symbol;
  f.name = std::move(n);
  f.span = span;
  return f;
}

Form Form::symbol(std::string_view text, SourceSpan span) {
  return symbol(QualifiedName::parse(text), span);
}

Form Form::keyword(QualifiedName n, SourceSpan span) {
  Form f;
  f.kind = FormKind::Keyword;
  f.name = std::move(n);
  f.span = span;
  return f;
}

Form Form::keyword(std::string_view text, SourceSpan span) {
  return keyword(QualifiedName::parse(text), span);
}

Form Form::list(std::vector<Form> items, SourceSpan span) {
  Form f;
  f.kind = FormKind::List;
  f.items = std::move(items);
  f.span = span;
  return f;
}

Form Form::vector(std::vector<Form> items, SourceSpan span) {
  Form f;
  f.kind = FormKind::Vector;
  f.items = std::move(items);
  f.span = span;
  return f;
}

Form Form::map(std::vector<Form> flat_entries, SourceSpan span) {
  Form f;
  f.kind = FormKind::Map;
  f.items = std::move(flat_entries);
  f.span = span;
  return f;
}

bool Form::is_symbol(std::string_view unqualified) const {
  return kind == FormKind::Symbol && name.ns.empty() && name.name == unqualified;
}

namespace {

const Form* flat_get_keyword(const std::vector<Form>& flat, std::string_view keyword) {
  for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
    const Form& k = flat[i];
    if (k.kind == FormKind::Keyword && k.name.ns.empty() && k.name.name == keyword) {
      return &flat[i + 1];
    }
  }
  return nullptr;
}

bool flat_entries_equal(const std::vector<Form>& a, const std::vector<Form>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i + 1 < a.size(); i += 2) {
    bool found = false;
    for (std::size_t j = 0; j + 1 < b.size(); j += 2) {
      if (structurally_equal(a[i], b[j])) {
        if (!structurally_equal(a[i + 1], b[j + 1])) return false;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

const Form* Form::meta_get(std::string_view keyword) const {
  return flat_get_keyword(meta, keyword);
}

const Form* Form::map_get_keyword(std::string_view keyword) const {
  if (kind != FormKind::Map) return nullptr;
  return flat_get_keyword(items, keyword);
}

bool structurally_equal(const Form& a, const Form& b) {
  if (a.kind != b.kind) return false;
  if (!flat_entries_equal(a.meta, b.meta)) return false;
  switch (a.kind) {
    case FormKind::Nil: return true;
    case FormKind::Boolean: return a.boolean == b.boolean;
    case FormKind::Number:
      return a.number == b.number || (std::isnan(a.number) && std::isnan(b.number));
    case FormKind::String: return a.text == b.text;
    case FormKind::Symbol:
    case FormKind::Keyword: return a.name == b.name;
    case FormKind::List:
    case FormKind::Vector:
      return std::equal(a.items.begin(), a.items.end(), b.items.begin(), b.items.end(),
                        [](const Form& x, const Form& y) { return structurally_equal(x, y); });
    case FormKind::Map: return flat_entries_equal(a.items, b.items);
  }
  return false;
}

void stamp_span(Form& form, SourceSpan span) {
  form.span = span;
  for (auto& child : form.items) stamp_span(child, span);
  for (auto& m : form.meta) stamp_span(m, span);
}

LineCol line_col(std::string_view text, std::size_t offset) {
  LineCol lc;
  offset = std::min(offset, text.size());
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++lc.line;
      lc.column = 1;
    } else if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      ++lc.column;
    }
  }
  return lc;
}

}  // namespace mls
