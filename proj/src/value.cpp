#include "mls/value.hpp"

#include <algorithm>
#include <cmath>

#include "mls/reader.hpp"

namespace mls {

Cell::Cell(Value v) : value(std::make_unique<Value>(std::move(v))) {}

Value Value::boolean(bool b) {
  Value v;
  v.data_ = b;
  return v;
}

Value Value::number(double d) {
  Value v;
  v.data_ = d;
  return v;
}

Value Value::string(std::string s) {
  Value v;
  v.data_ = std::move(s);
  return v;
}

Value Value::keyword(QualifiedName n) {
  Value v;
  v.data_ = KeywordName{std::move(n)};
  return v;
}

Value Value::keyword(std::string_view text) { return keyword(QualifiedName::parse(text)); }

Value Value::symbol(QualifiedName n) {
  Value v;
  v.data_ = SymbolName{std::move(n)};
  return v;
}

Value Value::symbol(std::string_view text) { return symbol(QualifiedName::parse(text)); }

Value Value::list(ValueVec items) {
  Value v;
  v.data_ = ListRef{std::make_shared<const ValueVec>(std::move(items)), nullptr};
  return v;
}

const ValuePairs* Value::meta() const {
  auto* l = std::get_if<ListRef>(&data_);
  return l && l->meta ? l->meta.get() : nullptr;
}

Value Value::with_meta(ValuePairs meta) const {
  Value v;
  v.data_ = ListRef{std::get<ListRef>(data_).ptr, std::make_shared<const ValuePairs>(std::move(meta))};
  return v;
}

Value Value::vector(ValueVec items) {
  Value v;
  v.data_ = VectorRef{std::make_shared<const ValueVec>(std::move(items))};
  return v;
}

Value Value::map(ValuePairs entries) {
  Value v;
  v.data_ = MapRef{std::make_shared<const ValuePairs>(std::move(entries))};
  return v;
}

Value Value::closure(Closure c) {
  Value v;
  v.data_ = ClosureRef{std::make_shared<const Closure>(std::move(c))};
  return v;
}

Value Value::native(Native n) {
  Value v;
  v.data_ = NativeRef{std::make_shared<const Native>(std::move(n))};
  return v;
}

Value Value::syntax(SyntaxTransformer t) {
  Value v;
  v.data_ = SyntaxRef{std::make_shared<const SyntaxTransformer>(std::move(t))};
  return v;
}

Value Value::cell(Value initial) {
  Value v;
  v.data_ = CellRef{std::make_shared<Cell>(std::move(initial))};
  return v;
}

Value Value::view(ViewValue view) {
  Value v;
  v.data_ = ViewRef{std::make_shared<const ViewValue>(std::move(view))};
  return v;
}

bool Value::truthy() const {
  if (is_nil()) return false;
  if (is(Kind::Boolean)) return as_bool();
  return true;
}

bool Value::is_callable() const {
  return is(Kind::Closure) || is(Kind::Native) || is(Kind::Keyword);
}

const QualifiedName& Value::as_name() const {
  if (auto* k = std::get_if<KeywordName>(&data_)) return k->name;
  return std::get<SymbolName>(data_).name;
}

const ValueVec& Value::items() const {
  if (auto* l = std::get_if<ListRef>(&data_)) return *l->ptr;
  return *std::get<VectorRef>(data_).ptr;
}

const ValuePairs& Value::entries() const { return *std::get<MapRef>(data_).ptr; }

const Value* Value::get(const Value& key) const {
  if (!is(Kind::Map)) return nullptr;
  for (const auto& [k, v] : entries()) {
    if (k == key) return &v;
  }
  return nullptr;
}

const Value* Value::get_keyword(std::string_view name) const {
  if (!is(Kind::Map)) return nullptr;
  for (const auto& [k, v] : entries()) {
    if (k.is(Kind::Keyword) && k.as_name().ns.empty() && k.as_name().name == name) return &v;
  }
  return nullptr;
}

const void* Value::identity() const {
  return std::visit(
      [](const auto& d) -> const void* {
        if constexpr (requires { d.ptr; }) {
          return static_cast<const void*>(d.ptr.get());
        } else {
          return nullptr;
        }
      },
      data_);
}

std::string_view to_string(Value::Kind kind) {
  switch (kind) {
    case Value::Kind::Nil: return "nil";
    case Value::Kind::Boolean: return "boolean";
    case Value::Kind::Number: return "number";
    case Value::Kind::String: return "string";
    case Value::Kind::Keyword: return "keyword";
    case Value::Kind::Symbol: return "symbol";
    case Value::Kind::List: return "list";
    case Value::Kind::Vector: return "vector";
    case Value::Kind::Map: return "map";
    case Value::Kind::Closure: return "function";
    case Value::Kind::Native: return "native function";
    case Value::Kind::Syntax: return "syntax transformer";
    case Value::Kind::Cell: return "atom";
    case Value::Kind::View: return "view";
  }
  return "?";
}

bool operator==(const Value& a, const Value& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Value::Kind::Nil: return true;
    case Value::Kind::Boolean: return a.as_bool() == b.as_bool();
    case Value::Kind::Number:
      return a.as_number() == b.as_number() || (std::isnan(a.as_number()) && std::isnan(b.as_number()));
    case Value::Kind::String: return a.as_string() == b.as_string();
    case Value::Kind::Keyword:
    case Value::Kind::Symbol: return a.as_name() == b.as_name();
    case Value::Kind::List:
    case Value::Kind::Vector: {
      if (a.identity() == b.identity()) return true;
      return std::equal(a.items().begin(), a.items().end(), b.items().begin(), b.items().end());
    }
    case Value::Kind::Map: {
      if (a.identity() == b.identity()) return true;
      if (a.entries().size() != b.entries().size()) return false;
      for (const auto& [k, v] : a.entries()) {
        const Value* other = b.get(k);
        if (!other || !(*other == v)) return false;
      }
      return true;
    }
    default: return a.identity() == b.identity();
  }
}

bool is_serializable(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Nil:
    case Value::Kind::Boolean:
    case Value::Kind::Number:
    case Value::Kind::String:
    case Value::Kind::Keyword:
    case Value::Kind::Symbol: return true;
    case Value::Kind::List:
    case Value::Kind::Vector:
      return std::all_of(v.items().begin(), v.items().end(), is_serializable);
    case Value::Kind::Map:
      return std::all_of(v.entries().begin(), v.entries().end(),
                         [](const auto& e) { return is_serializable(e.first) && is_serializable(e.second); });
    default: return false;
  }
}

namespace {

Value form_to_value_at(const Form& f, std::size_t depth) {
  if (depth > kMaxDataDepth) throw SerializeError("data nested too deeply");
  switch (f.kind) {
    case FormKind::Nil: return {};
    case FormKind::Boolean: return Value::boolean(f.boolean);
    case FormKind::Number: return Value::number(f.number);
    case FormKind::String: return Value::string(f.text);
    case FormKind::Symbol: return Value::symbol(f.name);
    case FormKind::Keyword: return Value::keyword(f.name);
    case FormKind::List:
    case FormKind::Vector: {
      ValueVec items;
      items.reserve(f.items.size());
      for (const auto& c : f.items) items.push_back(form_to_value_at(c, depth + 1));
      if (f.kind == FormKind::Vector) return Value::vector(std::move(items));
      Value list = Value::list(std::move(items));
      if (f.meta.empty()) return list;
      ValuePairs meta;
      for (std::size_t i = 0; i + 1 < f.meta.size(); i += 2) {
        meta.emplace_back(form_to_value_at(f.meta[i], depth + 1), form_to_value_at(f.meta[i + 1], depth + 1));
      }
      return list.with_meta(std::move(meta));
    }
    case FormKind::Map: {
      ValuePairs entries;
      entries.reserve(f.items.size() / 2);
      for (std::size_t i = 0; i + 1 < f.items.size(); i += 2) {
        entries.emplace_back(form_to_value_at(f.items[i], depth + 1), form_to_value_at(f.items[i + 1], depth + 1));
      }
      return Value::map(std::move(entries));
    }
  }
  return {};
}

bool name_reads_back(const QualifiedName& n, bool keyword) {
  if (n.ns.empty()) {
    if (n.name == "/") return !keyword;
    return n.name.find('/') == std::string::npos && is_readable_name(n.name, keyword);
  }
  return n.ns.find('/') == std::string::npos && n.name.find('/') == std::string::npos &&
         is_readable_name(n.ns, keyword) && is_readable_name(n.name, true);
}

Form value_to_form_at(const Value& v, SourceSpan span, std::size_t depth) {
  if (depth > kMaxDataDepth) throw SerializeError("data nested too deeply");
  switch (v.kind()) {
    case Value::Kind::Nil: return Form::nil(span);
    case Value::Kind::Boolean: return Form::boolean_of(v.as_bool(), span);
    case Value::Kind::Number: return Form::number_of(v.as_number(), span);
    case Value::Kind::String: return Form::string_of(v.as_string(), span);
    case Value::Kind::Keyword:
      if (!name_reads_back(v.as_name(), true)) {
        throw SerializeError("keyword :" + v.as_name().str() + " cannot be written as text");
      }
      return Form::keyword(v.as_name(), span);
    case Value::Kind::Symbol:
      if (!name_reads_back(v.as_name(), false)) {
        throw SerializeError("symbol " + v.as_name().str() + " cannot be written as text");
      }
      return Form::symbol(v.as_name(), span);
    case Value::Kind::List:
    case Value::Kind::Vector: {
      std::vector<Form> items;
      items.reserve(v.items().size());
      for (const auto& c : v.items()) items.push_back(value_to_form_at(c, span, depth + 1));
      if (v.is(Value::Kind::Vector)) return Form::vector(std::move(items), span);
      Form list = Form::list(std::move(items), span);
      if (const ValuePairs* meta = v.meta()) {
        for (const auto& [k, val] : *meta) {
          if (!k.is(Value::Kind::Keyword)) throw SerializeError("metadata keys must be keywords");
          list.meta.push_back(value_to_form_at(k, span, depth + 1));
          list.meta.push_back(value_to_form_at(val, span, depth + 1));
        }
      }
      return list;
    }
    case Value::Kind::Map: {
      std::vector<Form> flat;
      flat.reserve(v.entries().size() * 2);
      for (const auto& [k, val] : v.entries()) {
        flat.push_back(value_to_form_at(k, span, depth + 1));
        flat.push_back(value_to_form_at(val, span, depth + 1));
      }
      return Form::map(std::move(flat), span);
    }
    default:
      throw SerializeError(std::string("cannot serialize a value of kind ") + std::string(to_string(v.kind())));
  }
}

void print_value_into(std::string& out, const Value& v, std::size_t depth) {
  if (depth > kMaxDataDepth) {
    out += "...";
    return;
  }
  switch (v.kind()) {
    case Value::Kind::Nil: out += "nil"; return;
    case Value::Kind::Boolean: out += v.as_bool() ? "true" : "false"; return;
    case Value::Kind::Number: out += format_number(v.as_number()); return;
    case Value::Kind::String: out += quote_string(v.as_string()); return;
    case Value::Kind::Keyword: out += ":" + v.as_name().str(); return;
    case Value::Kind::Symbol: out += v.as_name().str(); return;
    case Value::Kind::List:
    case Value::Kind::Vector: {
      bool list = v.is(Value::Kind::List);
      out.push_back(list ? '(' : '[');
      bool first = true;
      for (const auto& c : v.items()) {
        if (!first) out.push_back(' ');
        first = false;
        print_value_into(out, c, depth + 1);
      }
      out.push_back(list ? ')' : ']');
      return;
    }
    case Value::Kind::Map: {
      std::vector<std::pair<std::string, std::string>> printed;
      for (const auto& [k, val] : v.entries()) {
        std::string ks, vs;
        print_value_into(ks, k, depth + 1);
        print_value_into(vs, val, depth + 1);
        printed.emplace_back(std::move(ks), std::move(vs));
      }
      std::sort(printed.begin(), printed.end());
      out.push_back('{');
      bool first = true;
      for (const auto& [k, val] : printed) {
        if (!first) out.push_back(' ');
        first = false;
        out += k + " " + val;
      }
      out.push_back('}');
      return;
    }
    case Value::Kind::Closure: {
      const auto& c = v.as_closure();
      out += c.name.empty() ? "#<fn>" : "#<fn " + c.name + ">";
      return;
    }
    case Value::Kind::Native: out += "#<native " + v.as_native().name + ">"; return;
    case Value::Kind::Syntax: out += "#<syntax " + v.as_syntax().name + ">"; return;
    case Value::Kind::Cell:
      out += "#<atom ";
      print_value_into(out, *v.as_cell()->value, depth + 1);
      out += ">";
      return;
    case Value::Kind::View: out += "#<view " + v.as_view().tag + ">"; return;
  }
}

}  // namespace

Value form_to_value(const Form& form) { return form_to_value_at(form, 0); }

Form value_to_form(const Value& v, SourceSpan span) { return value_to_form_at(v, span, 0); }

std::string print_value(const Value& v) {
  std::string out;
  print_value_into(out, v, 0);
  return out;
}

std::string display_value(const Value& v) {
  if (v.is(Value::Kind::String)) return v.as_string();
  return print_value(v);
}

}  // namespace mls
