#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mls {

/// Half-open byte range [start, end) into a source buffer.
struct SourceSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t length() const { return end - start; }
  [[nodiscard]] bool contains(const SourceSpan& other) const {
    return start <= other.start && other.end <= end;
  }
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

/// A possibly namespace-qualified name, used for both symbols and keywords.
struct QualifiedName {
  std::string ns;
  std::string name;

  [[nodiscard]] bool qualified() const { return !ns.empty(); }
  [[nodiscard]] std::string str() const { return ns.empty() ? name : ns + "/" + name; }
  friend bool operator==(const QualifiedName&, const QualifiedName&) = default;
  friend auto operator<=>(const QualifiedName&, const QualifiedName&) = default;

  /// Splits "a.b/c" into {a.b, c}. A lone "/" is an unqualified name.
  static QualifiedName parse(std::string_view text);
};

enum class FormKind { Nil, Boolean, Number, String, Symbol, Keyword, List, Vector, Map };

std::string_view to_string(FormKind kind);

/// Syntax tree node. Maps store their entries flattened as key, value, key,
/// value in `items`; metadata uses the same layout in `meta`.
struct Form {
  FormKind kind = FormKind::Nil;
  bool boolean = false;
  double number = 0.0;
  std::string text;  // string contents
  QualifiedName name;  // symbol / keyword
  std::vector<Form> items;
  std::vector<Form> meta;
  SourceSpan span;

  static Form nil(SourceSpan span = {});
  static Form boolean_of(bool b, SourceSpan span = {});
  static Form number_of(double d, SourceSpan span = {});
  static Form string_of(std::string s, SourceSpan span = {});
  static Form symbol(QualifiedName n, SourceSpan span = {});
  static Form symbol(std::string_view text, SourceSpan span = {});
  static Form keyword(QualifiedName n, SourceSpan span = {});
  static Form keyword(std::string_view text, SourceSpan span = {});
  static Form list(std::vector<Form> items, SourceSpan span = {});
  static Form vector(std::vector<Form> items, SourceSpan span = {});
  static Form map(std::vector<Form> flat_entries, SourceSpan span = {});

  [[nodiscard]] bool is(FormKind k) const { return kind == k; }
  [[nodiscard]] bool is_symbol(std::string_view unqualified) const;
  [[nodiscard]] bool is_sequence() const { return kind == FormKind::List || kind == FormKind::Vector; }
  [[nodiscard]] std::size_t map_size() const { return items.size() / 2; }

  /// Metadata lookup by keyword name; nullptr when absent.
  [[nodiscard]] const Form* meta_get(std::string_view keyword) const;
  /// Map lookup by keyword key; nullptr when absent.
  [[nodiscard]] const Form* map_get_keyword(std::string_view keyword) const;
};

/// Structural equality ignoring spans. Maps and metadata compare as unordered
/// sets of entries.
bool structurally_equal(const Form& a, const Form& b);

/// Assigns `span` to `form` and every descendant.
void stamp_span(Form& form, SourceSpan span);

/// Converts a byte offset into 1-based line and column.
struct LineCol {
  std::size_t line = 1;
  std::size_t column = 1;
};
LineCol line_col(std::string_view text, std::size_t offset);

}  // namespace mls
