#include "mls/interp.hpp"

#include <pthread.h>

#include <algorithm>
#include <array>
#include <set>

#include "mls/reader.hpp"

namespace mls {

const Value* Env::lookup(const std::string& name) const {
  for (const Env* e = this; e; e = e->parent_.get()) {
    auto it = e->bindings_.find(name);
    if (it != e->bindings_.end()) return &it->second;
  }
  return nullptr;
}

const Value* Env::lookup_local(const std::string& name) const {
  auto it = bindings_.find(name);
  return it == bindings_.end() ? nullptr : &it->second;
}

namespace {

constexpr std::array kSpecialForms = {
    "quote", "if", "do", "def", "defn", "fn", "let", "vlet", "and", "or", "when", "cond", "set-field!", "ns",
};

/// Lowest usable address of the calling thread's stack, plus a safety margin.
std::uintptr_t stack_floor() {
  thread_local std::uintptr_t floor = [] {
    constexpr std::uintptr_t kMargin = 256 * 1024;
    pthread_attr_t attr;
    void* base = nullptr;
    std::size_t size = 0;
    if (pthread_getattr_np(pthread_self(), &attr) != 0) return std::uintptr_t{0};
    pthread_attr_getstack(&attr, &base, &size);
    pthread_attr_destroy(&attr);
    return reinterpret_cast<std::uintptr_t>(base) + kMargin;
  }();
  return floor;
}

bool stack_exhausted() {
  char probe = 0;
  return reinterpret_cast<std::uintptr_t>(&probe) < stack_floor();
}

class DepthGuard {
 public:
  DepthGuard(EvalContext& ctx, SourceSpan span) : ctx_(ctx) {
    if (++ctx_.depth > kMaxEvalDepth || stack_exhausted()) {
      --ctx_.depth;
      throw RuntimeError("evaluation nested too deeply", span);
    }
  }
  ~DepthGuard() { --ctx_.depth; }
  DepthGuard(const DepthGuard&) = delete;
  DepthGuard& operator=(const DepthGuard&) = delete;

 private:
  EvalContext& ctx_;
};

[[noreturn]] void fail(const Form& at, const std::string& message) { throw RuntimeError(message, at.span); }

void expect_arity(const Form& form, std::size_t min, std::size_t max, const char* what) {
  std::size_t n = form.items.size() - 1;
  if (n < min || n > max) {
    fail(form, std::string(what) + ": wrong number of arguments (" + std::to_string(n) + ")");
  }
}

const std::string& expect_symbol_name(const Form& f, const char* what) {
  if (f.kind != FormKind::Symbol || f.name.qualified()) fail(f, std::string(what) + ": expected a simple symbol");
  return f.name.name;
}

/// Parses `[a b & rest]` into a closure's parameter list.
void parse_params(const Form& params, Closure& c) {
  if (params.kind != FormKind::Vector) fail(params, "fn: parameter list must be a vector");
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    const std::string& p = expect_symbol_name(params.items[i], "fn");
    if (p == "&") {
      if (i + 2 != params.items.size()) fail(params, "fn: '&' must be followed by exactly one parameter");
      c.rest_param = expect_symbol_name(params.items[i + 1], "fn");
      return;
    }
    c.params.push_back(p);
  }
}

Value make_closure(const Form& form, std::size_t first, std::string name, const EnvPtr& env) {
  if (first >= form.items.size()) fail(form, "fn: missing parameter vector");
  Closure c;
  c.name = std::move(name);
  parse_params(form.items[first], c);
  c.body.assign(form.items.begin() + static_cast<std::ptrdiff_t>(first) + 1, form.items.end());
  c.env = env;
  c.span = form.span;
  return Value::closure(std::move(c));
}

EnvPtr bind_pairs(const Form& bindings, const EnvPtr& env, EvalContext& ctx, const char* what) {
  if (bindings.kind != FormKind::Vector || bindings.items.size() % 2 != 0) {
    fail(bindings, std::string(what) + ": bindings must be a vector of name/value pairs");
  }
  auto frame = Env::child_of(env);
  for (std::size_t i = 0; i < bindings.items.size(); i += 2) {
    const std::string& name = expect_symbol_name(bindings.items[i], what);
    Value v = eval(bindings.items[i + 1], frame, ctx);
    frame->define(name, std::move(v));
  }
  return frame;
}

/// Finds the syntax transformer an application form refers to, if any.
const SyntaxTransformer* transformer_for(const Form& call, const EnvPtr& env, EvalContext& ctx,
                                         std::optional<Value>& holder) {
  if (call.kind != FormKind::List || call.items.empty()) return nullptr;
  const Form& head = call.items.front();
  if (head.kind != FormKind::Symbol) return nullptr;
  if (head.name.qualified()) {
    if (!ctx.hooks) return nullptr;
    holder = ctx.hooks->resolve_qualified(head.name, ctx);
  } else if (const Value* v = env->lookup(head.name.name)) {
    holder = *v;
  } else if (ctx.hooks) {
    holder = ctx.hooks->resolve_unbound(head.name.name, env, ctx);
  }
  if (holder && holder->is(Value::Kind::Syntax)) return &holder->as_syntax();
  return nullptr;
}

Form expand_once(const SyntaxTransformer& t, const Form& call, EvalContext& ctx) {
  if (ctx.expansion_depth >= kMaxExpansionDepth) {
    fail(call, "expansion of " + t.name + " nested deeper than " + std::to_string(kMaxExpansionDepth));
  }
  ++ctx.expansion_depth;
  struct Reset {
    EvalContext& c;
    ~Reset() { --c.expansion_depth; }
  } reset{ctx};
  return t.expand(call, ctx);
}

Value eval_vlet(const Form& form, const EnvPtr& env, EvalContext& ctx) {
  if (form.items.size() < 2 || form.items[1].kind != FormKind::Vector || form.items[1].items.empty()) {
    fail(form, "vlet: expected (vlet [binder-spec anchor-bindings...] body...)");
  }
  const Form& bindings = form.items[1];
  Form spec = bindings.items.front();
  std::optional<Value> holder;
  if (const auto* t = transformer_for(spec, env, ctx, holder)) spec = expand_once(*t, spec, ctx);

  std::vector<std::string> keys;
  Form expr;
  if (spec.kind == FormKind::Map) {
    const Form* k = spec.map_get_keyword("keys");
    const Form* e = spec.map_get_keyword("expr");
    if (!k || !e || k->kind != FormKind::Vector) fail(spec, "vlet: binder spec must be {:keys [symbols...] :expr form}");
    for (const auto& s : k->items) keys.push_back(expect_symbol_name(s, "vlet"));
    expr = *e;
  } else {
    Value v = eval(spec, env, ctx);
    const Value* k = v.get_keyword("keys");
    const Value* e = v.get_keyword("expr");
    if (!k || !e || !k->is_sequential()) fail(spec, "vlet: binder spec must evaluate to {:keys [...] :expr form}");
    for (const auto& s : k->items()) {
      if (!s.is(Value::Kind::Symbol)) fail(spec, "vlet: :keys must hold symbols");
      keys.push_back(s.as_name().str());
    }
    try {
      expr = value_to_form(*e, spec.span);
    } catch (const SerializeError& err) {
      fail(spec, std::string("vlet: :expr is not code: ") + err.what());
    }
  }

  Form anchors = Form::vector({}, bindings.span);
  anchors.items.assign(bindings.items.begin() + 1, bindings.items.end());
  EnvPtr anchor_env = bind_pairs(anchors, env, ctx, "vlet");
  Value produced = eval(expr, anchor_env, ctx);
  if (!produced.is_sequential()) fail(expr, "vlet: binder expression must produce a vector");
  if (produced.items().size() != keys.size()) {
    fail(expr, "vlet: binder expression produced " + std::to_string(produced.items().size()) + " values for " +
                   std::to_string(keys.size()) + " keys");
  }
  auto body_env = Env::child_of(anchor_env);
  for (std::size_t i = 0; i < keys.size(); ++i) body_env->define(keys[i], produced.items()[i]);
  return eval_body(std::span<const Form>(form.items).subspan(2), body_env, ctx);
}

Value eval_special(const std::string& head, const Form& form, const EnvPtr& env, EvalContext& ctx, bool& handled) {
  handled = true;
  const auto& it = form.items;
  if (head == "quote") {
    expect_arity(form, 1, 1, "quote");
    return form_to_value(it[1]);
  }
  if (head == "if") {
    expect_arity(form, 2, 3, "if");
    if (eval(it[1], env, ctx).truthy()) return eval(it[2], env, ctx);
    return it.size() == 4 ? eval(it[3], env, ctx) : Value{};
  }
  if (head == "do") return eval_body(std::span<const Form>(it).subspan(1), env, ctx);
  if (head == "def") {
    expect_arity(form, 1, 2, "def");
    const std::string& name = expect_symbol_name(it[1], "def");
    Value v = it.size() == 3 ? eval(it[2], env, ctx) : Value{};
    env->define(name, std::move(v));
    return {};
  }
  if (head == "defn") {
    if (it.size() < 3) fail(form, "defn: expected (defn name [params] body...)");
    const std::string& name = expect_symbol_name(it[1], "defn");
    std::size_t params_at = (it[2].kind == FormKind::String && it.size() > 3) ? 3 : 2;
    env->define(name, make_closure(form, params_at, name, env));
    return {};
  }
  if (head == "fn") {
    if (it.size() >= 2 && it[1].kind == FormKind::Symbol) {
      return make_closure(form, 2, expect_symbol_name(it[1], "fn"), env);
    }
    return make_closure(form, 1, "", env);
  }
  if (head == "let") {
    if (it.size() < 2) fail(form, "let: missing bindings");
    EnvPtr frame = bind_pairs(it[1], env, ctx, "let");
    return eval_body(std::span<const Form>(it).subspan(2), frame, ctx);
  }
  if (head == "vlet") return eval_vlet(form, env, ctx);
  if (head == "and") {
    Value last = Value::boolean(true);
    for (std::size_t i = 1; i < it.size(); ++i) {
      last = eval(it[i], env, ctx);
      if (!last.truthy()) return last;
    }
    return last;
  }
  if (head == "or") {
    Value last;
    for (std::size_t i = 1; i < it.size(); ++i) {
      last = eval(it[i], env, ctx);
      if (last.truthy()) return last;
    }
    return last;
  }
  if (head == "when") {
    expect_arity(form, 1, static_cast<std::size_t>(-1), "when");
    if (!eval(it[1], env, ctx).truthy()) return {};
    return eval_body(std::span<const Form>(it).subspan(2), env, ctx);
  }
  if (head == "cond") {
    if ((it.size() - 1) % 2 != 0) fail(form, "cond: expected test/expression pairs");
    for (std::size_t i = 1; i < it.size(); i += 2) {
      if (eval(it[i], env, ctx).truthy()) return eval(it[i + 1], env, ctx);
    }
    return {};
  }
  if (head == "set-field!") {
    expect_arity(form, 2, 2, "set-field!");
    const std::string& field = expect_symbol_name(it[1], "set-field!");
    const Value* cell = env->lookup(kStateCellBinding);
    if (!cell || !cell->is(Value::Kind::Cell)) fail(form, "set-field! used outside a render body");
    Value v = eval(it[2], env, ctx);
    const Value& current = *cell->as_cell()->value;
    ValuePairs entries = current.is(Value::Kind::Map) ? current.entries() : ValuePairs{};
    Value key = Value::keyword(QualifiedName{"", field});
    auto slot = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == key; });
    if (slot != entries.end()) {
      slot->second = v;
    } else {
      entries.emplace_back(key, v);
    }
    *cell->as_cell()->value = Value::map(std::move(entries));
    return v;
  }
  if (head == "ns") {
    expect_arity(form, 1, 1, "ns");
    if (it[1].kind != FormKind::Symbol || it[1].name.qualified()) fail(form, "ns: expected a namespace name");
    env->define(kNamespaceBinding, Value::string(it[1].name.name));
    return {};
  }
  handled = false;
  return {};
}

Value eval_symbol(const Form& form, const EnvPtr& env, EvalContext& ctx) {
  if (form.name.qualified()) {
    if (ctx.hooks) {
      if (auto v = ctx.hooks->resolve_qualified(form.name, ctx)) return *v;
    }
    fail(form, "unable to resolve symbol " + form.name.str());
  }
  if (const Value* v = env->lookup(form.name.name)) return *v;
  if (ctx.hooks) {
    if (auto v = ctx.hooks->resolve_unbound(form.name.name, env, ctx)) return *v;
  }
  fail(form, "unable to resolve symbol " + form.name.name);
}

Value eval_list(const Form& form, const EnvPtr& env, EvalContext& ctx) {
  if (form.items.empty()) return Value::list({});
  const Form& head = form.items.front();
  if (head.kind == FormKind::Symbol && !head.name.qualified()) {
    const std::string& name = head.name.name;
    if (is_special_form(name)) {
      bool handled = false;
      Value v = eval_special(name, form, env, ctx, handled);
      if (handled) return v;
    }
    if (ctx.hooks) {
      if (auto v = ctx.hooks->special_form(name, form, env, ctx)) return *v;
    }
  }

  Value fn = eval(head, env, ctx);
  if (fn.is(Value::Kind::Syntax)) {
    Form expanded = expand_once(fn.as_syntax(), form, ctx);
    ++ctx.expansion_depth;
    struct Reset {
      EvalContext& c;
      ~Reset() { --c.expansion_depth; }
    } reset{ctx};
    return eval(expanded, env, ctx);
  }
  ValueVec args;
  args.reserve(form.items.size() - 1);
  for (std::size_t i = 1; i < form.items.size(); ++i) args.push_back(eval(form.items[i], env, ctx));
  return apply(fn, args, ctx, form.span);
}

}  // namespace

bool is_special_form(std::string_view name) {
  return std::find(kSpecialForms.begin(), kSpecialForms.end(), name) != kSpecialForms.end();
}

Value eval(const Form& form, const EnvPtr& env, EvalContext& ctx) {
  ctx.fuel.consume();
  DepthGuard guard(ctx, form.span);
  switch (form.kind) {
    case FormKind::Nil: return {};
    case FormKind::Boolean: return Value::boolean(form.boolean);
    case FormKind::Number: return Value::number(form.number);
    case FormKind::String: return Value::string(form.text);
    case FormKind::Keyword: return Value::keyword(form.name);
    case FormKind::Symbol: return eval_symbol(form, env, ctx);
    case FormKind::Vector: {
      ValueVec items;
      items.reserve(form.items.size());
      for (const auto& c : form.items) items.push_back(eval(c, env, ctx));
      return Value::vector(std::move(items));
    }
    case FormKind::Map: {
      ValuePairs entries;
      entries.reserve(form.items.size() / 2);
      for (std::size_t i = 0; i + 1 < form.items.size(); i += 2) {
        Value k = eval(form.items[i], env, ctx);
        Value v = eval(form.items[i + 1], env, ctx);
        auto slot = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.first == k; });
        if (slot != entries.end()) fail(form.items[i], "duplicate key in map: " + print_value(k));
        entries.emplace_back(std::move(k), std::move(v));
      }
      return Value::map(std::move(entries));
    }
    case FormKind::List:
      try {
        return eval_list(form, env, ctx);
      } catch (RuntimeError& e) {
        e.set_span_if_unset(form.span);
        throw;
      }
  }
  return {};
}

Value eval_body(std::span<const Form> forms, const EnvPtr& env, EvalContext& ctx) {
  Value last;
  for (const auto& f : forms) last = eval(f, env, ctx);
  return last;
}

Value apply(const Value& fn, std::span<const Value> args, EvalContext& ctx, SourceSpan call_site) {
  ctx.fuel.consume();
  switch (fn.kind()) {
    case Value::Kind::Closure: {
      const Closure& c = fn.as_closure();
      bool arity_ok = c.rest_param.empty() ? args.size() == c.params.size() : args.size() >= c.params.size();
      if (!arity_ok) {
        throw RuntimeError("wrong number of arguments (" + std::to_string(args.size()) + ") passed to " +
                               (c.name.empty() ? std::string("fn") : c.name),
                           call_site);
      }
      auto frame = Env::child_of(c.env);
      if (!c.name.empty()) frame->define(c.name, fn);
      for (std::size_t i = 0; i < c.params.size(); ++i) frame->define(c.params[i], args[i]);
      if (!c.rest_param.empty()) {
        frame->define(c.rest_param, Value::vector(ValueVec(args.begin() + static_cast<std::ptrdiff_t>(c.params.size()),
                                                           args.end())));
      }
      try {
        return eval_body(c.body, frame, ctx);
      } catch (RuntimeError& e) {
        e.push_caller(call_site);
        throw;
      }
    }
    case Value::Kind::Native: {
      const Native& n = fn.as_native();
      auto count = static_cast<int>(args.size());
      if (count < n.min_arity || (n.max_arity >= 0 && count > n.max_arity)) {
        throw RuntimeError("wrong number of arguments (" + std::to_string(args.size()) + ") passed to " + n.name,
                           call_site);
      }
      try {
        return n.fn(args, ctx);
      } catch (RuntimeError& e) {
        e.set_span_if_unset(call_site);
        throw;
      } catch (const SerializeError& e) {
        throw RuntimeError(n.name + ": " + e.what(), call_site);
      }
    }
    case Value::Kind::Keyword: {
      if (args.empty() || args.size() > 2) throw RuntimeError("keyword lookup takes 1 or 2 arguments", call_site);
      if (const Value* v = args[0].get(fn)) return *v;
      return args.size() == 2 ? args[1] : Value{};
    }
    default:
      throw RuntimeError("cannot call a value of kind " + std::string(to_string(fn.kind())), call_site);
  }
}

namespace {

void collect_free(const Form& f, std::set<std::string>& bound, std::vector<std::string>& out,
                  std::set<std::string>& seen);

void collect_all(const std::vector<Form>& forms, std::size_t from, std::set<std::string>& bound,
                 std::vector<std::string>& out, std::set<std::string>& seen) {
  for (std::size_t i = from; i < forms.size(); ++i) collect_free(forms[i], bound, out, seen);
}

void bind_param_vector(const Form& params, std::set<std::string>& bound) {
  for (const auto& p : params.items) {
    if (p.kind == FormKind::Symbol && !p.name.qualified()) bound.insert(p.name.name);
  }
}

void collect_free(const Form& f, std::set<std::string>& bound, std::vector<std::string>& out,
                  std::set<std::string>& seen) {
  switch (f.kind) {
    case FormKind::Symbol: {
      std::string name = f.name.str();
      if (!f.name.qualified() && bound.count(name)) return;
      if (seen.insert(name).second) out.push_back(name);
      return;
    }
    case FormKind::Vector:
    case FormKind::Map: collect_all(f.items, 0, bound, out, seen); return;
    case FormKind::List: break;
    default: return;
  }
  if (f.items.empty()) return;
  const Form& head = f.items.front();
  std::string h = head.kind == FormKind::Symbol && !head.name.qualified() ? head.name.name : "";
  if (h == "quote") return;
  if (h == "fn" || h == "defn") {
    std::size_t at = 1;
    std::set<std::string> inner = bound;
    if (at < f.items.size() && f.items[at].kind == FormKind::Symbol) inner.insert(f.items[at++].name.str());
    if (h == "defn" && at < f.items.size() && f.items[at].kind == FormKind::String) ++at;
    if (at < f.items.size() && f.items[at].kind == FormKind::Vector) bind_param_vector(f.items[at++], inner);
    if (h == "defn" && f.items.size() > 1 && f.items[1].kind == FormKind::Symbol) {
      bound.insert(f.items[1].name.str());
    }
    collect_all(f.items, at, inner, out, seen);
    return;
  }
  if ((h == "let" || h == "vlet") && f.items.size() >= 2 && f.items[1].kind == FormKind::Vector) {
    std::set<std::string> inner = bound;
    const auto& b = f.items[1].items;
    std::size_t i = 0;
    const Form* keys = nullptr;
    const Form* expr = nullptr;
    if (h == "vlet" && !b.empty()) {
      keys = b[0].map_get_keyword("keys");
      expr = b[0].map_get_keyword("expr");
      if (!keys || !expr || keys->kind != FormKind::Vector) {
        keys = expr = nullptr;
        collect_free(b[0], inner, out, seen);
      }
      i = 1;
    }
    for (; i + 1 < b.size(); i += 2) {
      collect_free(b[i + 1], inner, out, seen);
      if (b[i].kind == FormKind::Symbol) inner.insert(b[i].name.str());
    }
    if (expr) {
      collect_free(*expr, inner, out, seen);
      bind_param_vector(*keys, inner);
    }
    collect_all(f.items, 2, inner, out, seen);
    return;
  }
  if (h == "def" && f.items.size() >= 2 && f.items[1].kind == FormKind::Symbol) {
    bound.insert(f.items[1].name.str());
    collect_all(f.items, 2, bound, out, seen);
    return;
  }
  if (h == "set-field!") {
    collect_all(f.items, 2, bound, out, seen);
    return;
  }
  if (!h.empty() && is_special_form(h)) {
    collect_all(f.items, 1, bound, out, seen);
    return;
  }
  collect_all(f.items, 0, bound, out, seen);
}

}  // namespace

std::vector<std::string> free_symbols(const Form& form) {
  std::set<std::string> bound;
  std::set<std::string> seen;
  std::vector<std::string> out;
  collect_free(form, bound, out, seen);
  return out;
}

}  // namespace mls
