#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mls/form.hpp"

namespace mls {

class Value;
class Env;
struct EvalContext;
using EnvPtr = std::shared_ptr<Env>;
using ValueVec = std::vector<Value>;
using ValuePairs = std::vector<std::pair<Value, Value>>;

struct Closure {
  std::string name;  // empty for anonymous functions
  std::vector<std::string> params;
  std::string rest_param;  // empty unless declared with `&`
  std::vector<Form> body;
  EnvPtr env;
  SourceSpan span;
};

using NativeFn = std::function<Value(std::span<const Value> args, EvalContext& ctx)>;

struct Native {
  std::string name;
  int min_arity = 0;
  int max_arity = -1;  // -1: variadic
  NativeFn fn;
};

/// Receives the unevaluated call form and returns the form to evaluate in its
/// place. Interactive-syntax extension names are bound to these.
using ExpandFn = std::function<Form(const Form& call, EvalContext& ctx)>;

struct SyntaxTransformer {
  std::string name;
  ExpandFn expand;
};

/// Mutable box; the only mutable value in the language.
struct Cell {
  explicit Cell(Value v);
  std::unique_ptr<Value> value;
};

/// A widget node built by `ui` during rendering. Handler values are callables.
struct ViewValue {
  std::string tag;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<std::pair<std::string, Value>> handlers;  // event kind -> callable
  ValueVec children;
};

class Value {
 public:
  enum class Kind { Nil, Boolean, Number, String, Keyword, Symbol, List, Vector, Map, Closure, Native, Syntax, Cell, View };

  Value() = default;
  static Value boolean(bool b);
  static Value number(double d);
  static Value string(std::string s);
  static Value keyword(QualifiedName n);
  static Value keyword(std::string_view text);
  static Value symbol(QualifiedName n);
  static Value symbol(std::string_view text);
  static Value list(ValueVec items);
  static Value vector(ValueVec items);
  static Value map(ValuePairs entries);
  static Value closure(Closure c);
  static Value native(Native n);
  static Value syntax(SyntaxTransformer t);
  static Value cell(Value initial);
  static Value view(ViewValue v);

  [[nodiscard]] Kind kind() const { return static_cast<Kind>(data_.index()); }
  [[nodiscard]] bool is(Kind k) const { return kind() == k; }
  [[nodiscard]] bool is_nil() const { return kind() == Kind::Nil; }
  [[nodiscard]] bool truthy() const;
  [[nodiscard]] bool is_sequential() const { return is(Kind::List) || is(Kind::Vector); }
  [[nodiscard]] bool is_callable() const;

  [[nodiscard]] bool as_bool() const { return std::get<bool>(data_); }
  [[nodiscard]] double as_number() const { return std::get<double>(data_); }
  [[nodiscard]] const std::string& as_string() const { return std::get<std::string>(data_); }
  [[nodiscard]] const QualifiedName& as_name() const;
  [[nodiscard]] const ValueVec& items() const;
  [[nodiscard]] const ValuePairs& entries() const;
  [[nodiscard]] const Closure& as_closure() const { return *std::get<ClosureRef>(data_).ptr; }
  [[nodiscard]] const Native& as_native() const { return *std::get<NativeRef>(data_).ptr; }
  [[nodiscard]] const SyntaxTransformer& as_syntax() const { return *std::get<SyntaxRef>(data_).ptr; }
  [[nodiscard]] const std::shared_ptr<Cell>& as_cell() const { return std::get<CellRef>(data_).ptr; }
  [[nodiscard]] const ViewValue& as_view() const { return *std::get<ViewRef>(data_).ptr; }

  /// Map lookup; nullptr when absent or when this is not a map.
  [[nodiscard]] const Value* get(const Value& key) const;
  [[nodiscard]] const Value* get_keyword(std::string_view name) const;

  /// Metadata of a list (as read from `^{...}`); nullptr when none. Ignored
  /// by equality and printing.
  [[nodiscard]] const ValuePairs* meta() const;
  /// A list sharing this one's items with `meta` attached.
  [[nodiscard]] Value with_meta(ValuePairs meta) const;

  /// Identity of reference variants (closure, native, cell, ...).
  [[nodiscard]] const void* identity() const;

 private:
  struct ListRef {
    std::shared_ptr<const ValueVec> ptr;
    std::shared_ptr<const ValuePairs> meta;
  };
  struct VectorRef { std::shared_ptr<const ValueVec> ptr; };
  struct MapRef { std::shared_ptr<const ValuePairs> ptr; };
  struct KeywordName { QualifiedName name; };
  struct SymbolName { QualifiedName name; };
  struct ClosureRef { std::shared_ptr<const Closure> ptr; };
  struct NativeRef { std::shared_ptr<const Native> ptr; };
  struct SyntaxRef { std::shared_ptr<const SyntaxTransformer> ptr; };
  struct CellRef { std::shared_ptr<Cell> ptr; };
  struct ViewRef { std::shared_ptr<const ViewValue> ptr; };

  std::variant<std::monostate, bool, double, std::string, KeywordName, SymbolName, ListRef, VectorRef,
               MapRef, ClosureRef, NativeRef, SyntaxRef, CellRef, ViewRef>
      data_;
};

std::string_view to_string(Value::Kind kind);

/// Structural equality; identity for closures, natives, transformers, cells
/// and views.
bool operator==(const Value& a, const Value& b);

/// Members of the serializable subset: nil, booleans, numbers, strings,
/// keywords, symbols, and lists/vectors/maps built from them.
bool is_serializable(const Value& v);

class SerializeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nesting bound for value/form conversion.
inline constexpr std::size_t kMaxDataDepth = 512;

/// Quoting: data form to value. List metadata is kept.
Value form_to_value(const Form& form);

/// Converts serializable data back to syntax. Throws SerializeError for
/// non-serializable values or names that would not read back. Every produced
/// node carries `span`.
Form value_to_form(const Value& v, SourceSpan span = {});

/// Printed representation (the canonical text for serializable values).
std::string print_value(const Value& v);

/// Human-facing string conversion used by `str` and `println`: strings print
/// raw, everything else as print_value.
std::string display_value(const Value& v);

}  // namespace mls
