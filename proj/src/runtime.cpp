#include "mls/runtime.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mls/elaborator.hpp"
#include "mls/reader.hpp"

namespace mls {

std::uint64_t fuel_from_env(std::uint64_t fallback) {
  const char* raw = std::getenv("VISR_FUEL");
  if (!raw || !*raw) return fallback;
  std::uint64_t v = 0;
  std::string_view s(raw);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) return fallback;
  return v;
}

Runtime::Runtime(RuntimeOptions options) : options_(std::move(options)), root_(stdlib()) {}

EnvPtr Runtime::make_env(const std::string& ns) const {
  auto env = Env::child_of(root_);
  env->define(kNamespaceBinding, Value::string(ns));
  return env;
}

std::string Runtime::namespace_of(const EnvPtr& env) {
  const Value* v = env ? env->lookup(kNamespaceBinding) : nullptr;
  return v && v->is(Value::Kind::String) ? v->as_string() : "user";
}

void Runtime::register_definition(DefinitionPtr def) { registry_[def->name.str()] = std::move(def); }

DefinitionPtr Runtime::lookup_definition(const QualifiedName& full) const {
  auto it = registry_.find(full.str());
  return it == registry_.end() ? nullptr : it->second;
}

DefinitionPtr Runtime::resolve_extension(const QualifiedName& ref, const std::string& current_ns, SourceSpan span,
                                         bool allow_load) {
  QualifiedName full = ref.qualified() ? ref : QualifiedName{current_ns, ref.name};
  if (auto def = lookup_definition(full)) return def;
  if (ref.qualified() && allow_load && !module_loaded(ref.ns) && module_file(ref.ns)) {
    load_module(ref.ns, span);
    if (auto def = lookup_definition(full)) return def;
  }
  throw ElaborationError(span, ElaborationPhase::Resolve, "unresolved extension " + full.str());
}

std::optional<std::filesystem::path> Runtime::module_file(const std::string& ns) const {
  std::string rel = ns;
  for (auto& c : rel) {
    if (c == '.') c = '/';
  }
  rel += ".mls";
  for (const auto& dir : options_.search_paths) {
    auto candidate = dir / rel;
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
  }
  return std::nullopt;
}

EnvPtr Runtime::module_env(const std::string& ns) const {
  auto it = modules_.find(ns);
  return it == modules_.end() ? nullptr : it->second;
}

EnvPtr Runtime::load_module(const std::string& ns, SourceSpan requested_at) {
  if (auto env = module_env(ns)) return env;
  if (loading_.count(ns)) {
    throw ElaborationError(requested_at, ElaborationPhase::Resolve, "circular module dependency on " + ns);
  }
  auto file = module_file(ns);
  if (!file) {
    throw ElaborationError(requested_at, ElaborationPhase::Resolve, "no module " + ns + " on the search path");
  }
  std::ifstream in(*file, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  auto where = [&](SourceSpan s) {
    auto [line, col] = line_col(text, s.start);
    return file->string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": ";
  };

  loading_.insert(ns);
  struct Done {
    std::set<std::string>& set;
    std::string name;
    ~Done() { set.erase(name); }
  } done{loading_, ns};

  auto env = make_env(ns);
  Fuel fuel(options_.module_fuel);
  EvalContext ctx(fuel, options_.out, this);
  try {
    Elaborator elab(*this, env, ctx, true);
    elab.elaborate_program(read_all(text));
  } catch (const ReadError& e) {
    throw ElaborationError(requested_at, ElaborationPhase::Resolve,
                           "loading " + ns + ": " + where({e.offset(), e.offset()}) + e.what());
  } catch (const ElaborationError& e) {
    throw ElaborationError(requested_at, e.phase(), "loading " + ns + ": " + where(e.span()) + e.what());
  } catch (const RuntimeError& e) {
    throw ElaborationError(requested_at, ElaborationPhase::Resolve,
                           "loading " + ns + ": " + where(e.span()) + e.what());
  } catch (const FuelExhausted&) {
    throw ElaborationError(requested_at, ElaborationPhase::Resolve, "loading " + ns + ": ran out of fuel");
  }
  modules_[ns] = env;
  return env;
}

Value Runtime::transformer_of(const DefinitionPtr& def) {
  std::weak_ptr<const VisrDefinition> weak = def;
  return Value::syntax(SyntaxTransformer{def->name.str(), [weak](const Form& call, EvalContext& c) -> Form {
                                           auto d = weak.lock();
                                           if (!d) throw RuntimeError("extension definition is gone", call.span);
                                           if (call.items.size() != 2 || call.items[1].kind != FormKind::String) {
                                             throw RuntimeError(d->name.str() + " expects one state string", call.span);
                                           }
                                           return elaborate_instance(*d, call.items[1].text, call.span, c);
                                         }});
}

std::optional<Value> Runtime::resolve_unbound(const std::string& name, const EnvPtr& env, EvalContext&) {
  // extensions defined at top level were erased before the program ran
  if (auto def = lookup_definition({namespace_of(env), name})) return transformer_of(def);
  return std::nullopt;
}

DefinitionPtr Runtime::define_visr(const Form& form, const EnvPtr& env, EvalContext& ctx) {
  DefinitionPtr def = parse_definition(form, env, ctx, namespace_of(env));
  register_definition(def);
  env->define(def->name.name, transformer_of(def));
  return def;
}

std::optional<Value> Runtime::resolve_qualified(const QualifiedName& name, EvalContext&) {
  EnvPtr env;
  try {
    env = load_module(name.ns);
  } catch (const ElaborationError& e) {
    throw RuntimeError(e.what());
  }
  if (const Value* v = env->lookup_local(name.name)) return *v;
  return std::nullopt;
}

std::optional<Value> Runtime::special_form(const std::string& head, const Form& form, const EnvPtr& env,
                                           EvalContext& ctx) {
  if (head != "defvisr") return std::nullopt;
  define_visr(form, env, ctx);
  return Value{};
}

std::optional<Value> SandboxHooks::resolve_qualified(const QualifiedName& name, EvalContext&) {
  auto env = runtime_.module_env(name.ns);
  if (!env) throw RuntimeError("module " + name.ns + " is not loaded");
  if (const Value* v = env->lookup_local(name.name)) return *v;
  return std::nullopt;
}

std::optional<Value> SandboxHooks::special_form(const std::string& head, const Form& form, const EnvPtr&,
                                                EvalContext&) {
  if (head == "defvisr") throw RuntimeError("defvisr is not available at edit time", form.span);
  return std::nullopt;
}

}  // namespace mls
