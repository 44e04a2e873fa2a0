// Root environment: the edit-time and run-time library available to every
// program and extension.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "mls/interp.hpp"
#include "mls/reader.hpp"
#include "mls/view.hpp"

namespace mls {

namespace {

using Args = std::span<const Value>;

[[noreturn]] void type_error(const std::string& fn, const char* expected, const Value& got) {
  throw RuntimeError(fn + ": expected " + expected + ", got " + std::string(to_string(got.kind())));
}

double num(const Value& v, const std::string& fn) {
  if (!v.is(Value::Kind::Number)) type_error(fn, "a number", v);
  return v.as_number();
}

const std::string& str_arg(const Value& v, const std::string& fn) {
  if (!v.is(Value::Kind::String)) type_error(fn, "a string", v);
  return v.as_string();
}

/// Elements of a sequential value, map entries as [k v] vectors, string
/// characters as one-character strings; nil is empty.
ValueVec seq_items(const Value& v, const std::string& fn) {
  switch (v.kind()) {
    case Value::Kind::Nil: return {};
    case Value::Kind::List:
    case Value::Kind::Vector: return v.items();
    case Value::Kind::Map: {
      ValueVec out;
      for (const auto& [k, val] : v.entries()) out.push_back(Value::vector({k, val}));
      return out;
    }
    case Value::Kind::String: {
      ValueVec out;
      const std::string& s = v.as_string();
      for (std::size_t i = 0; i < s.size();) {
        std::size_t len = 1;
        auto c = static_cast<unsigned char>(s[i]);
        if (c >= 0xF0) len = 4;
        else if (c >= 0xE0) len = 3;
        else if (c >= 0xC0) len = 2;
        out.push_back(Value::string(s.substr(i, len)));
        i += len;
      }
      return out;
    }
    default: type_error(fn, "a collection", v);
  }
}

std::size_t seq_size(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::List:
    case Value::Kind::Vector: return v.items().size();
    case Value::Kind::Map: return v.entries().size();
    case Value::Kind::String: return v.as_string().size();
    default: return 0;
  }
}

/// Charges fuel for natives whose work is proportional to data size.
void charge(EvalContext& ctx, std::size_t units) { ctx.fuel.consume(1 + units / 32); }

Value assoc_value(const Value& m, const Value& k, const Value& v) {
  ValuePairs entries = m.is(Value::Kind::Map) ? m.entries() : ValuePairs{};
  auto slot = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == k; });
  if (slot != entries.end()) {
    slot->second = v;
  } else {
    entries.emplace_back(k, v);
  }
  return Value::map(std::move(entries));
}

Value assoc_indexed(const Value& coll, const Value& k, const Value& v, const std::string& fn) {
  if (coll.is(Value::Kind::Vector)) {
    double d = num(k, fn);
    ValueVec items = coll.items();
    auto idx = static_cast<std::size_t>(d);
    if (d < 0 || d != std::floor(d) || idx > items.size()) throw RuntimeError(fn + ": index out of range");
    if (idx == items.size()) {
      items.push_back(v);
    } else {
      items[idx] = v;
    }
    return Value::vector(std::move(items));
  }
  if (!coll.is_nil() && !coll.is(Value::Kind::Map)) type_error(fn, "a map or vector", coll);
  return assoc_value(coll, k, v);
}

Value get_value(const Value& coll, const Value& k) {
  if (coll.is(Value::Kind::Map)) {
    const Value* v = coll.get(k);
    return v ? *v : Value{};
  }
  if (coll.is_sequential() && k.is(Value::Kind::Number)) {
    double d = k.as_number();
    if (d >= 0 && d == std::floor(d) && static_cast<std::size_t>(d) < coll.items().size()) {
      return coll.items()[static_cast<std::size_t>(d)];
    }
  }
  return {};
}

bool numeric_compare(Args args, const std::string& fn, bool (*ok)(double, double)) {
  for (std::size_t i = 0; i + 1 < args.size(); ++i) {
    if (!ok(num(args[i], fn), num(args[i + 1], fn))) return false;
  }
  if (args.size() == 1) num(args[0], fn);
  return true;
}

std::string keyword_or_string(const Value& v, const std::string& fn) {
  if (v.is(Value::Kind::String)) return v.as_string();
  if (v.is(Value::Kind::Keyword) || v.is(Value::Kind::Symbol)) return v.as_name().str();
  type_error(fn, "a keyword or string", v);
}

/// Natural ordering used by `sort`: numbers, then strings, then everything
/// else by printed text.
bool value_less(const Value& a, const Value& b) {
  if (a.is(Value::Kind::Number) && b.is(Value::Kind::Number)) return a.as_number() < b.as_number();
  if (a.is(Value::Kind::String) && b.is(Value::Kind::String)) return a.as_string() < b.as_string();
  if (a.kind() != b.kind()) return a.kind() < b.kind();
  return print_value(a) < print_value(b);
}

class Library {
 public:
  explicit Library(EnvPtr env) : env_(std::move(env)) {}

  void def(const std::string& name, int min, int max, NativeFn fn) {
    env_->define(name, Value::native(Native{name, min, max, std::move(fn)}));
  }

 private:
  EnvPtr env_;
};

void install_arithmetic(Library& lib) {
  lib.def("+", 0, -1, [](Args a, EvalContext&) {
    double s = 0;
    for (const auto& v : a) s += num(v, "+");
    return Value::number(s);
  });
  lib.def("*", 0, -1, [](Args a, EvalContext&) {
    double s = 1;
    for (const auto& v : a) s *= num(v, "*");
    return Value::number(s);
  });
  lib.def("-", 1, -1, [](Args a, EvalContext&) {
    double s = num(a[0], "-");
    if (a.size() == 1) return Value::number(-s);
    for (std::size_t i = 1; i < a.size(); ++i) s -= num(a[i], "-");
    return Value::number(s);
  });
  lib.def("/", 1, -1, [](Args a, EvalContext&) {
    double s = num(a[0], "/");
    if (a.size() == 1) s = 1.0 / s;
    for (std::size_t i = 1; i < a.size(); ++i) {
      double d = num(a[i], "/");
      if (d == 0) throw RuntimeError("/: division by zero");
      s /= d;
    }
    return Value::number(s);
  });
  lib.def("mod", 2, 2, [](Args a, EvalContext&) {
    double x = num(a[0], "mod"), y = num(a[1], "mod");
    if (y == 0) throw RuntimeError("mod: division by zero");
    double r = std::fmod(x, y);
    if (r != 0 && ((r < 0) != (y < 0))) r += y;
    return Value::number(r);
  });
  lib.def("quot", 2, 2, [](Args a, EvalContext&) {
    double y = num(a[1], "quot");
    if (y == 0) throw RuntimeError("quot: division by zero");
    return Value::number(std::trunc(num(a[0], "quot") / y));
  });
  lib.def("inc", 1, 1, [](Args a, EvalContext&) { return Value::number(num(a[0], "inc") + 1); });
  lib.def("dec", 1, 1, [](Args a, EvalContext&) { return Value::number(num(a[0], "dec") - 1); });
  lib.def("min", 1, -1, [](Args a, EvalContext&) {
    double m = num(a[0], "min");
    for (const auto& v : a) m = std::min(m, num(v, "min"));
    return Value::number(m);
  });
  lib.def("max", 1, -1, [](Args a, EvalContext&) {
    double m = num(a[0], "max");
    for (const auto& v : a) m = std::max(m, num(v, "max"));
    return Value::number(m);
  });
  lib.def("abs", 1, 1, [](Args a, EvalContext&) { return Value::number(std::fabs(num(a[0], "abs"))); });
  lib.def("sqrt", 1, 1, [](Args a, EvalContext&) { return Value::number(std::sqrt(num(a[0], "sqrt"))); });
  lib.def("floor", 1, 1, [](Args a, EvalContext&) { return Value::number(std::floor(num(a[0], "floor"))); });
  lib.def("ceil", 1, 1, [](Args a, EvalContext&) { return Value::number(std::ceil(num(a[0], "ceil"))); });
  lib.def("round", 1, 1, [](Args a, EvalContext&) { return Value::number(std::round(num(a[0], "round"))); });
  lib.def("pow", 2, 2, [](Args a, EvalContext&) {
    return Value::number(std::pow(num(a[0], "pow"), num(a[1], "pow")));
  });

  lib.def("=", 1, -1, [](Args a, EvalContext&) {
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      if (!(a[i] == a[i + 1])) return Value::boolean(false);
    }
    return Value::boolean(true);
  });
  // (== x) is a predicate constructor; (== a b ...) compares.
  lib.def("==", 1, -1, [](Args a, EvalContext&) {
    if (a.size() == 1) {
      Value expected = a[0];
      return Value::native(Native{"==", 1, 1, [expected](Args b, EvalContext&) {
                                    return Value::boolean(b[0] == expected);
                                  }});
    }
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      if (!(a[i] == a[i + 1])) return Value::boolean(false);
    }
    return Value::boolean(true);
  });
  lib.def("not=", 1, -1, [](Args a, EvalContext&) {
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      if (!(a[i] == a[i + 1])) return Value::boolean(true);
    }
    return Value::boolean(false);
  });
  lib.def("<", 1, -1, [](Args a, EvalContext&) {
    return Value::boolean(numeric_compare(a, "<", [](double x, double y) { return x < y; }));
  });
  lib.def(">", 1, -1, [](Args a, EvalContext&) {
    return Value::boolean(numeric_compare(a, ">", [](double x, double y) { return x > y; }));
  });
  lib.def("<=", 1, -1, [](Args a, EvalContext&) {
    return Value::boolean(numeric_compare(a, "<=", [](double x, double y) { return x <= y; }));
  });
  lib.def(">=", 1, -1, [](Args a, EvalContext&) {
    return Value::boolean(numeric_compare(a, ">=", [](double x, double y) { return x >= y; }));
  });
  lib.def("not", 1, 1, [](Args a, EvalContext&) { return Value::boolean(!a[0].truthy()); });
}

void install_predicates(Library& lib) {
  auto kind_pred = [&lib](const std::string& name, Value::Kind k) {
    lib.def(name, 1, 1, [k](Args a, EvalContext&) { return Value::boolean(a[0].is(k)); });
  };
  kind_pred("nil?", Value::Kind::Nil);
  kind_pred("number?", Value::Kind::Number);
  kind_pred("string?", Value::Kind::String);
  kind_pred("keyword?", Value::Kind::Keyword);
  kind_pred("symbol?", Value::Kind::Symbol);
  kind_pred("map?", Value::Kind::Map);
  kind_pred("vector?", Value::Kind::Vector);
  kind_pred("list?", Value::Kind::List);
  kind_pred("boolean?", Value::Kind::Boolean);
  lib.def("some?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(!a[0].is_nil()); });
  lib.def("sequential?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(a[0].is_sequential()); });
  lib.def("fn?", 1, 1, [](Args a, EvalContext&) {
    return Value::boolean(a[0].is(Value::Kind::Closure) || a[0].is(Value::Kind::Native));
  });
  lib.def("empty?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(seq_size(a[0]) == 0); });
  lib.def("zero?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(num(a[0], "zero?") == 0); });
  lib.def("pos?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(num(a[0], "pos?") > 0); });
  lib.def("neg?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(num(a[0], "neg?") < 0); });
  lib.def("even?", 1, 1, [](Args a, EvalContext&) { return Value::boolean(std::fmod(num(a[0], "even?"), 2) == 0); });
  lib.def("odd?", 1, 1, [](Args a, EvalContext&) {
    return Value::boolean(std::fabs(std::fmod(num(a[0], "odd?"), 2)) == 1);
  });
  lib.def("any?", 1, 1, [](Args, EvalContext&) { return Value::boolean(true); });
  lib.def("type", 1, 1, [](Args a, EvalContext&) {
    return Value::keyword(QualifiedName{"", std::string(to_string(a[0].kind()))});
  });
}

void install_collections(Library& lib) {
  lib.def("list", 0, -1, [](Args a, EvalContext& ctx) {
    charge(ctx, a.size());
    return Value::list(ValueVec(a.begin(), a.end()));
  });
  lib.def("vector", 0, -1, [](Args a, EvalContext& ctx) {
    charge(ctx, a.size());
    return Value::vector(ValueVec(a.begin(), a.end()));
  });
  lib.def("hash-map", 0, -1, [](Args a, EvalContext& ctx) {
    if (a.size() % 2) throw RuntimeError("hash-map: expected key/value pairs");
    charge(ctx, a.size());
    Value m = Value::map({});
    for (std::size_t i = 0; i < a.size(); i += 2) m = assoc_value(m, a[i], a[i + 1]);
    return m;
  });
  lib.def("vec", 1, 1, [](Args a, EvalContext& ctx) {
    charge(ctx, seq_size(a[0]));
    return Value::vector(seq_items(a[0], "vec"));
  });
  lib.def("get", 2, 3, [](Args a, EvalContext&) {
    Value v = get_value(a[0], a[1]);
    if (v.is_nil() && a.size() == 3) {
      bool present = a[0].is(Value::Kind::Map) && a[0].get(a[1]) != nullptr;
      if (!present) return a[2];
    }
    return v;
  });
  lib.def("get-in", 2, 3, [](Args a, EvalContext&) {
    Value cur = a[0];
    for (const auto& k : seq_items(a[1], "get-in")) {
      cur = get_value(cur, k);
      if (cur.is_nil()) return a.size() == 3 ? a[2] : Value{};
    }
    return cur;
  });
  lib.def("assoc", 3, -1, [](Args a, EvalContext& ctx) {
    if ((a.size() - 1) % 2) throw RuntimeError("assoc: expected key/value pairs");
    charge(ctx, seq_size(a[0]));
    Value m = a[0];
    for (std::size_t i = 1; i < a.size(); i += 2) m = assoc_indexed(m, a[i], a[i + 1], "assoc");
    return m;
  });
  lib.def("assoc-in", 3, 3, [](Args a, EvalContext& ctx) {
    ValueVec path = seq_items(a[1], "assoc-in");
    if (path.empty()) return a[2];
    std::function<Value(const Value&, std::size_t)> go = [&](const Value& coll, std::size_t i) -> Value {
      charge(ctx, seq_size(coll));
      if (i + 1 == path.size()) return assoc_indexed(coll, path[i], a[2], "assoc-in");
      return assoc_indexed(coll, path[i], go(get_value(coll, path[i]), i + 1), "assoc-in");
    };
    return go(a[0], 0);
  });
  lib.def("dissoc", 1, -1, [](Args a, EvalContext& ctx) {
    if (a[0].is_nil()) return Value{};
    if (!a[0].is(Value::Kind::Map)) type_error("dissoc", "a map", a[0]);
    charge(ctx, seq_size(a[0]));
    ValuePairs entries = a[0].entries();
    for (std::size_t i = 1; i < a.size(); ++i) {
      std::erase_if(entries, [&](const auto& e) { return e.first == a[i]; });
    }
    return Value::map(std::move(entries));
  });
  lib.def("update", 3, -1, [](Args a, EvalContext& ctx) {
    ValueVec call{get_value(a[0], a[1])};
    call.insert(call.end(), a.begin() + 3, a.end());
    return assoc_indexed(a[0], a[1], apply(a[2], call, ctx), "update");
  });
  lib.def("update-in", 3, -1, [](Args a, EvalContext& ctx) {
    ValueVec path = seq_items(a[1], "update-in");
    if (path.empty()) throw RuntimeError("update-in: empty path");
    std::function<Value(const Value&, std::size_t)> go = [&](const Value& coll, std::size_t i) -> Value {
      Value cur = get_value(coll, path[i]);
      if (i + 1 == path.size()) {
        ValueVec call{cur};
        call.insert(call.end(), a.begin() + 3, a.end());
        return assoc_indexed(coll, path[i], apply(a[2], call, ctx), "update-in");
      }
      return assoc_indexed(coll, path[i], go(cur, i + 1), "update-in");
    };
    return go(a[0], 0);
  });
  lib.def("merge", 0, -1, [](Args a, EvalContext& ctx) {
    Value m;
    for (const auto& x : a) {
      if (x.is_nil()) continue;
      if (!x.is(Value::Kind::Map)) type_error("merge", "a map", x);
      if (m.is_nil()) m = Value::map({});
      charge(ctx, seq_size(x) + seq_size(m));
      for (const auto& [k, v] : x.entries()) m = assoc_value(m, k, v);
    }
    return m;
  });
  lib.def("conj", 1, -1, [](Args a, EvalContext& ctx) {
    const Value& coll = a[0];
    charge(ctx, seq_size(coll) + a.size());
    if (coll.is_nil() || coll.is(Value::Kind::List)) {
      ValueVec items = coll.is_nil() ? ValueVec{} : coll.items();
      for (std::size_t i = 1; i < a.size(); ++i) items.insert(items.begin(), a[i]);
      return Value::list(std::move(items));
    }
    if (coll.is(Value::Kind::Vector)) {
      ValueVec items = coll.items();
      items.insert(items.end(), a.begin() + 1, a.end());
      return Value::vector(std::move(items));
    }
    if (coll.is(Value::Kind::Map)) {
      Value m = coll;
      for (std::size_t i = 1; i < a.size(); ++i) {
        if (!a[i].is_sequential() || a[i].items().size() != 2) throw RuntimeError("conj: map entries must be [k v]");
        m = assoc_value(m, a[i].items()[0], a[i].items()[1]);
      }
      return m;
    }
    type_error("conj", "a collection", coll);
  });
  lib.def("cons", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec items = seq_items(a[1], "cons");
    charge(ctx, items.size());
    items.insert(items.begin(), a[0]);
    return Value::list(std::move(items));
  });
  lib.def("first", 1, 1, [](Args a, EvalContext&) {
    ValueVec items = seq_items(a[0], "first");
    return items.empty() ? Value{} : items.front();
  });
  lib.def("second", 1, 1, [](Args a, EvalContext&) {
    ValueVec items = seq_items(a[0], "second");
    return items.size() < 2 ? Value{} : items[1];
  });
  lib.def("last", 1, 1, [](Args a, EvalContext&) {
    ValueVec items = seq_items(a[0], "last");
    return items.empty() ? Value{} : items.back();
  });
  lib.def("rest", 1, 1, [](Args a, EvalContext& ctx) {
    ValueVec items = seq_items(a[0], "rest");
    charge(ctx, items.size());
    if (!items.empty()) items.erase(items.begin());
    return Value::vector(std::move(items));
  });
  lib.def("nth", 2, 3, [](Args a, EvalContext&) {
    double d = num(a[1], "nth");
    ValueVec items = seq_items(a[0], "nth");
    if (d < 0 || d != std::floor(d) || static_cast<std::size_t>(d) >= items.size()) {
      if (a.size() == 3) return a[2];
      throw RuntimeError("nth: index " + format_number(d) + " out of range");
    }
    return items[static_cast<std::size_t>(d)];
  });
  lib.def("count", 1, 1, [](Args a, EvalContext&) {
    if (a[0].is(Value::Kind::String)) return Value::number(static_cast<double>(seq_items(a[0], "count").size()));
    if (!a[0].is_nil() && !a[0].is_sequential() && !a[0].is(Value::Kind::Map)) type_error("count", "a collection", a[0]);
    return Value::number(static_cast<double>(seq_size(a[0])));
  });
  lib.def("keys", 1, 1, [](Args a, EvalContext&) {
    ValueVec out;
    if (a[0].is(Value::Kind::Map)) {
      for (const auto& [k, v] : a[0].entries()) out.push_back(k);
    }
    return Value::vector(std::move(out));
  });
  lib.def("vals", 1, 1, [](Args a, EvalContext&) {
    ValueVec out;
    if (a[0].is(Value::Kind::Map)) {
      for (const auto& [k, v] : a[0].entries()) out.push_back(v);
    }
    return Value::vector(std::move(out));
  });
  lib.def("contains?", 2, 2, [](Args a, EvalContext&) {
    if (a[0].is(Value::Kind::Map)) return Value::boolean(a[0].get(a[1]) != nullptr);
    if (a[0].is_sequential()) {
      if (!a[1].is(Value::Kind::Number)) return Value::boolean(false);
      double d = a[1].as_number();
      return Value::boolean(d >= 0 && d == std::floor(d) && static_cast<std::size_t>(d) < a[0].items().size());
    }
    return Value::boolean(false);
  });
  lib.def("includes?", 2, 2, [](Args a, EvalContext&) {
    if (a[0].is(Value::Kind::String)) {
      return Value::boolean(a[0].as_string().find(str_arg(a[1], "includes?")) != std::string::npos);
    }
    ValueVec items = seq_items(a[0], "includes?");
    return Value::boolean(std::find(items.begin(), items.end(), a[1]) != items.end());
  });
  lib.def("index-of", 2, 2, [](Args a, EvalContext&) {
    ValueVec items = seq_items(a[0], "index-of");
    auto it = std::find(items.begin(), items.end(), a[1]);
    return it == items.end() ? Value::number(-1) : Value::number(static_cast<double>(it - items.begin()));
  });
  lib.def("map", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec out;
    for (const auto& x : seq_items(a[1], "map")) {
      Value arg[] = {x};
      out.push_back(apply(a[0], arg, ctx));
    }
    return Value::vector(std::move(out));
  });
  lib.def("map-indexed", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec out;
    double i = 0;
    for (const auto& x : seq_items(a[1], "map-indexed")) {
      Value args[] = {Value::number(i++), x};
      out.push_back(apply(a[0], args, ctx));
    }
    return Value::vector(std::move(out));
  });
  lib.def("mapcat", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec out;
    for (const auto& x : seq_items(a[1], "mapcat")) {
      Value arg[] = {x};
      for (auto& y : seq_items(apply(a[0], arg, ctx), "mapcat")) out.push_back(std::move(y));
    }
    charge(ctx, out.size());
    return Value::vector(std::move(out));
  });
  lib.def("filter", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec out;
    for (const auto& x : seq_items(a[1], "filter")) {
      Value arg[] = {x};
      if (apply(a[0], arg, ctx).truthy()) out.push_back(x);
    }
    return Value::vector(std::move(out));
  });
  lib.def("remove", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec out;
    for (const auto& x : seq_items(a[1], "remove")) {
      Value arg[] = {x};
      if (!apply(a[0], arg, ctx).truthy()) out.push_back(x);
    }
    return Value::vector(std::move(out));
  });
  lib.def("reduce", 2, 3, [](Args a, EvalContext& ctx) {
    ValueVec items = seq_items(a.back(), "reduce");
    std::size_t i = 0;
    Value acc;
    if (a.size() == 3) {
      acc = a[1];
    } else {
      if (items.empty()) {
        return apply(a[0], {}, ctx);
      }
      acc = items[i++];
    }
    for (; i < items.size(); ++i) {
      Value args[] = {acc, items[i]};
      acc = apply(a[0], args, ctx);
    }
    return acc;
  });
  lib.def("some", 2, 2, [](Args a, EvalContext& ctx) {
    for (const auto& x : seq_items(a[1], "some")) {
      Value arg[] = {x};
      Value r = apply(a[0], arg, ctx);
      if (r.truthy()) return r;
    }
    return Value{};
  });
  lib.def("every?", 2, 2, [](Args a, EvalContext& ctx) {
    for (const auto& x : seq_items(a[1], "every?")) {
      Value arg[] = {x};
      if (!apply(a[0], arg, ctx).truthy()) return Value::boolean(false);
    }
    return Value::boolean(true);
  });
  lib.def("concat", 0, -1, [](Args a, EvalContext& ctx) {
    ValueVec out;
    for (const auto& x : a) {
      for (auto& y : seq_items(x, "concat")) out.push_back(std::move(y));
    }
    charge(ctx, out.size());
    return Value::vector(std::move(out));
  });
  lib.def("into", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec items = seq_items(a[1], "into");
    charge(ctx, items.size() + seq_size(a[0]));
    if (a[0].is(Value::Kind::Map) || a[0].is_nil()) {
      Value m = a[0].is_nil() ? Value::map({}) : a[0];
      for (const auto& e : items) {
        if (!e.is_sequential() || e.items().size() != 2) throw RuntimeError("into: map entries must be [k v]");
        m = assoc_value(m, e.items()[0], e.items()[1]);
      }
      return m;
    }
    if (!a[0].is_sequential()) type_error("into", "a collection", a[0]);
    ValueVec out = a[0].items();
    out.insert(out.end(), items.begin(), items.end());
    return a[0].is(Value::Kind::List) ? Value::list(std::move(out)) : Value::vector(std::move(out));
  });
  lib.def("range", 1, 3, [](Args a, EvalContext& ctx) {
    double start = 0, end = 0, step = 1;
    if (a.size() == 1) {
      end = num(a[0], "range");
    } else {
      start = num(a[0], "range");
      end = num(a[1], "range");
      if (a.size() == 3) step = num(a[2], "range");
    }
    if (step == 0) throw RuntimeError("range: step must not be zero");
    double n = std::max(0.0, std::ceil((end - start) / step));
    ctx.fuel.consume(1 + static_cast<std::uint64_t>(std::min(n, 1e15)));
    ValueVec out;
    out.reserve(static_cast<std::size_t>(n));
    for (double i = 0; i < n; ++i) out.push_back(Value::number(start + i * step));
    return Value::vector(std::move(out));
  });
  lib.def("take", 2, 2, [](Args a, EvalContext&) {
    ValueVec items = seq_items(a[1], "take");
    auto n = static_cast<std::size_t>(std::clamp(num(a[0], "take"), 0.0, static_cast<double>(items.size())));
    items.resize(n);
    return Value::vector(std::move(items));
  });
  lib.def("drop", 2, 2, [](Args a, EvalContext&) {
    ValueVec items = seq_items(a[1], "drop");
    auto n = static_cast<std::size_t>(std::clamp(num(a[0], "drop"), 0.0, static_cast<double>(items.size())));
    items.erase(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n));
    return Value::vector(std::move(items));
  });
  lib.def("reverse", 1, 1, [](Args a, EvalContext& ctx) {
    ValueVec items = seq_items(a[0], "reverse");
    charge(ctx, items.size());
    std::reverse(items.begin(), items.end());
    return Value::vector(std::move(items));
  });
  lib.def("distinct", 1, 1, [](Args a, EvalContext& ctx) {
    ValueVec out;
    for (const auto& x : seq_items(a[0], "distinct")) {
      if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
    }
    charge(ctx, out.size() * out.size());
    return Value::vector(std::move(out));
  });
  lib.def("sort", 1, 1, [](Args a, EvalContext& ctx) {
    ValueVec items = seq_items(a[0], "sort");
    charge(ctx, items.size() * 4);
    std::stable_sort(items.begin(), items.end(), value_less);
    return Value::vector(std::move(items));
  });
  lib.def("zipmap", 2, 2, [](Args a, EvalContext& ctx) {
    ValueVec ks = seq_items(a[0], "zipmap");
    ValueVec vs = seq_items(a[1], "zipmap");
    charge(ctx, ks.size());
    Value m = Value::map({});
    for (std::size_t i = 0; i < std::min(ks.size(), vs.size()); ++i) m = assoc_value(m, ks[i], vs[i]);
    return m;
  });
  lib.def("apply", 2, -1, [](Args a, EvalContext& ctx) {
    ValueVec args(a.begin() + 1, a.end() - 1);
    for (auto& x : seq_items(a.back(), "apply")) args.push_back(std::move(x));
    charge(ctx, args.size());
    return apply(a[0], args, ctx);
  });
  lib.def("identity", 1, 1, [](Args a, EvalContext&) { return a[0]; });
  // metadata lives on lists only; it is how elaborators emit nested instances
  lib.def("with-meta", 2, 2, [](Args a, EvalContext&) {
    if (!a[0].is(Value::Kind::List)) type_error("with-meta", "a list", a[0]);
    if (!a[1].is(Value::Kind::Map)) type_error("with-meta", "a map", a[1]);
    return a[0].with_meta(a[1].entries());
  });
  lib.def("meta", 1, 1, [](Args a, EvalContext&) {
    const ValuePairs* m = a[0].meta();
    return m ? Value::map(*m) : Value{};
  });
}

void install_strings(Library& lib) {
  lib.def("str", 0, -1, [](Args a, EvalContext& ctx) {
    std::string out;
    for (const auto& v : a) {
      if (!v.is_nil()) out += display_value(v);
    }
    charge(ctx, out.size());
    return Value::string(std::move(out));
  });
  lib.def("pr-str", 1, 1, [](Args a, EvalContext&) { return Value::string(print_value(a[0])); });
  lib.def("subs", 2, 3, [](Args a, EvalContext&) {
    const std::string& s = str_arg(a[0], "subs");
    double start = num(a[1], "subs");
    double end = a.size() == 3 ? num(a[2], "subs") : static_cast<double>(s.size());
    if (start < 0 || end < start || end > static_cast<double>(s.size())) throw RuntimeError("subs: index out of range");
    return Value::string(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(end - start)));
  });
  lib.def("split", 2, 2, [](Args a, EvalContext& ctx) {
    const std::string& s = str_arg(a[0], "split");
    const std::string& sep = str_arg(a[1], "split");
    if (sep.empty()) throw RuntimeError("split: empty separator");
    ValueVec out;
    std::size_t pos = 0;
    for (;;) {
      auto next = s.find(sep, pos);
      out.push_back(Value::string(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos)));
      if (next == std::string::npos) break;
      pos = next + sep.size();
    }
    charge(ctx, out.size());
    return Value::vector(std::move(out));
  });
  lib.def("join", 1, 2, [](Args a, EvalContext& ctx) {
    std::string sep = a.size() == 2 ? str_arg(a[0], "join") : "";
    std::string out;
    bool first = true;
    for (const auto& x : seq_items(a.back(), "join")) {
      if (!first) out += sep;
      first = false;
      out += display_value(x);
    }
    charge(ctx, out.size());
    return Value::string(std::move(out));
  });
  lib.def("trim", 1, 1, [](Args a, EvalContext&) {
    const std::string& s = str_arg(a[0], "trim");
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return Value::string("");
    auto e = s.find_last_not_of(" \t\r\n");
    return Value::string(s.substr(b, e - b + 1));
  });
  lib.def("starts-with?", 2, 2, [](Args a, EvalContext&) {
    return Value::boolean(str_arg(a[0], "starts-with?").starts_with(str_arg(a[1], "starts-with?")));
  });
  lib.def("name", 1, 1, [](Args a, EvalContext&) {
    if (a[0].is(Value::Kind::String)) return a[0];
    if (a[0].is(Value::Kind::Keyword) || a[0].is(Value::Kind::Symbol)) return Value::string(a[0].as_name().name);
    type_error("name", "a keyword, symbol or string", a[0]);
  });
  lib.def("keyword", 1, 1, [](Args a, EvalContext&) {
    return Value::keyword(QualifiedName::parse(keyword_or_string(a[0], "keyword")));
  });
  lib.def("symbol", 1, 1, [](Args a, EvalContext&) {
    return Value::symbol(QualifiedName::parse(keyword_or_string(a[0], "symbol")));
  });
  lib.def("parse-number", 1, 1, [](Args a, EvalContext&) {
    if (a[0].is(Value::Kind::Number)) return a[0];
    if (!a[0].is(Value::Kind::String)) return Value{};
    std::string s = a[0].as_string();
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return Value{};
    s = s.substr(b, e - b + 1);
    if (!s.empty() && s[0] == '+') s.erase(0, 1);
    double d = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(d)) return Value{};
    return Value::number(d);
  });
  lib.def("read-string", 1, 1, [](Args a, EvalContext&) {
    try {
      return form_to_value(read_one(str_arg(a[0], "read-string")));
    } catch (const ReadError& e) {
      throw RuntimeError(std::string("read-string: ") + e.what() + " at offset " + std::to_string(e.offset()));
    }
  });
}

void install_cells(Library& lib) {
  lib.def("atom", 1, 1, [](Args a, EvalContext&) { return Value::cell(a[0]); });
  lib.def("deref", 1, 1, [](Args a, EvalContext&) {
    if (!a[0].is(Value::Kind::Cell)) type_error("deref", "an atom", a[0]);
    return *a[0].as_cell()->value;
  });
  lib.def("reset!", 2, 2, [](Args a, EvalContext&) {
    if (!a[0].is(Value::Kind::Cell)) type_error("reset!", "an atom", a[0]);
    *a[0].as_cell()->value = a[1];
    return a[1];
  });
  lib.def("swap!", 2, -1, [](Args a, EvalContext& ctx) {
    if (!a[0].is(Value::Kind::Cell)) type_error("swap!", "an atom", a[0]);
    ValueVec args{*a[0].as_cell()->value};
    args.insert(args.end(), a.begin() + 2, a.end());
    Value next = apply(a[1], args, ctx);
    *a[0].as_cell()->value = next;
    return next;
  });
}

void install_io(Library& lib) {
  lib.def("throw", 1, 1, [](Args a, EvalContext&) -> Value {
    RuntimeError err(display_value(a[0]));
    err.thrown = a[0];
    throw err;
  });
  lib.def("println", 0, -1, [](Args a, EvalContext& ctx) {
    if (ctx.out) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) *ctx.out << ' ';
        *ctx.out << display_value(a[i]);
      }
      *ctx.out << '\n';
    }
    return Value{};
  });
  lib.def("print", 0, -1, [](Args a, EvalContext& ctx) {
    if (ctx.out) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) *ctx.out << ' ';
        *ctx.out << display_value(a[i]);
      }
    }
    return Value{};
  });
  lib.def("prn", 0, -1, [](Args a, EvalContext& ctx) {
    if (ctx.out) {
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) *ctx.out << ' ';
        *ctx.out << print_value(a[i]);
      }
      *ctx.out << '\n';
    }
    return Value{};
  });
}

Value point_combination(const Value& from, const Value& to, double weight) {
  if (!from.is_sequential() || !to.is_sequential() || from.items().size() != to.items().size()) {
    throw RuntimeError("compute-mid-points: points must be vectors of equal dimension");
  }
  ValueVec out;
  for (std::size_t i = 0; i < from.items().size(); ++i) {
    double a = num(from.items()[i], "compute-mid-points");
    double b = num(to.items()[i], "compute-mid-points");
    out.push_back(Value::number(a + weight * (b - a)));
  }
  return Value::vector(std::move(out));
}

std::string node_name(const Value& v) {
  if (v.is(Value::Kind::Symbol) || v.is(Value::Kind::Keyword)) return v.as_name().str();
  if (v.is(Value::Kind::String)) return v.as_string();
  throw RuntimeError("compute-mid-points: node names must be symbols or strings");
}

/// (compute-mid-points anchor-names anchor-points derived-specs) where each
/// derived spec is [name from to weight]. Returns derived points in spec
/// order; specs may reference each other in any order.
Value compute_mid_points(Args a, EvalContext& ctx) {
  ValueVec names = seq_items(a[0], "compute-mid-points");
  ValueVec points = seq_items(a[1], "compute-mid-points");
  ValueVec specs = seq_items(a[2], "compute-mid-points");
  if (names.size() != points.size()) {
    throw RuntimeError("compute-mid-points: " + std::to_string(names.size()) + " anchor names but " +
                       std::to_string(points.size()) + " anchor points");
  }
  std::map<std::string, Value> known;
  for (std::size_t i = 0; i < names.size(); ++i) known[node_name(names[i])] = points[i];
  std::vector<bool> done(specs.size(), false);
  std::size_t remaining = specs.size();
  while (remaining > 0) {
    bool progressed = false;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (done[i]) continue;
      ctx.fuel.consume();
      const Value& s = specs[i];
      if (!s.is_sequential() || s.items().size() != 4) {
        throw RuntimeError("compute-mid-points: derived spec must be [name from to weight]");
      }
      auto from = known.find(node_name(s.items()[1]));
      auto to = known.find(node_name(s.items()[2]));
      if (from == known.end() || to == known.end()) continue;
      known[node_name(s.items()[0])] =
          point_combination(from->second, to->second, num(s.items()[3], "compute-mid-points"));
      done[i] = true;
      --remaining;
      progressed = true;
    }
    if (!progressed) throw RuntimeError("compute-mid-points: unresolvable or cyclic node references");
  }
  ValueVec out;
  for (const auto& s : specs) out.push_back(known[node_name(s.items()[0])]);
  return Value::vector(std::move(out));
}

void install_extension_api(Library& lib, const EnvPtr& root) {
  lib.def("compute-mid-points", 3, 3, compute_mid_points);
  lib.def("ui", 1, -1, [](Args a, EvalContext& ctx) { return make_view_value(a, ctx); });
  std::weak_ptr<Env> weak_root = root;
  // Free symbols of a quoted form that the library does not define.
  lib.def("free-symbols", 1, 1, [weak_root](Args a, EvalContext& ctx) {
    Form f;
    try {
      f = value_to_form(a[0]);
    } catch (const SerializeError& e) {
      throw RuntimeError(std::string("free-symbols: ") + e.what());
    }
    auto lib_env = weak_root.lock();
    ValueVec out;
    for (const auto& name : free_symbols(f)) {
      ctx.fuel.consume();
      auto qn = QualifiedName::parse(name);
      if (!qn.qualified() && lib_env && lib_env->lookup(name)) continue;
      out.push_back(Value::symbol(qn));
    }
    return Value::vector(std::move(out));
  });
}

}  // namespace

EnvPtr stdlib() {
  auto root = std::make_shared<Env>();
  Library lib(root);
  install_arithmetic(lib);
  install_predicates(lib);
  install_collections(lib);
  install_strings(lib);
  install_cells(lib);
  install_io(lib);
  install_extension_api(lib, root);
  return root;
}

}  // namespace mls
