#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mls/form.hpp"
#include "mls/value.hpp"

namespace mls {

class FuelExhausted : public std::runtime_error {
 public:
  FuelExhausted() : std::runtime_error("fuel exhausted") {}
};

/// Step budget. Every evaluation step consumes at least one unit.
class Fuel {
 public:
  explicit Fuel(std::uint64_t budget) : remaining_(budget) {}

  void consume(std::uint64_t steps = 1) {
    if (remaining_ < steps) {
      remaining_ = 0;
      throw FuelExhausted();
    }
    remaining_ -= steps;
    if (remaining_ == 0) throw FuelExhausted();
  }
  [[nodiscard]] std::uint64_t remaining() const { return remaining_; }

 private:
  std::uint64_t remaining_;
};

inline constexpr std::size_t kMaxCallChain = 32;
inline constexpr std::size_t kMaxEvalDepth = 100000;

class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& message) : std::runtime_error(message) {}
  RuntimeError(const std::string& message, SourceSpan span)
      : std::runtime_error(message), span_(span), has_span_(true) {}

  [[nodiscard]] SourceSpan span() const { return span_; }
  [[nodiscard]] bool has_span() const { return has_span_; }
  void set_span_if_unset(SourceSpan s) {
    if (!has_span_) {
      span_ = s;
      has_span_ = true;
    }
  }
  /// Spans of enclosing calls, innermost first, at most kMaxCallChain.
  [[nodiscard]] const std::vector<SourceSpan>& call_chain() const { return chain_; }
  void push_caller(SourceSpan s) {
    if (chain_.size() < kMaxCallChain) chain_.push_back(s);
  }
  /// Set when the error was raised by `throw`; holds the thrown value.
  std::optional<Value> thrown;

 private:
  SourceSpan span_;
  bool has_span_ = false;
  std::vector<SourceSpan> chain_;
};

/// One lexical frame. Lookup walks outward; `define` only touches this frame.
class Env {
 public:
  explicit Env(EnvPtr parent = nullptr) : parent_(std::move(parent)) {}

  static EnvPtr child_of(const EnvPtr& parent) { return std::make_shared<Env>(parent); }

  void define(const std::string& name, Value v) { bindings_[name] = std::move(v); }
  [[nodiscard]] const Value* lookup(const std::string& name) const;
  [[nodiscard]] const Value* lookup_local(const std::string& name) const;
  [[nodiscard]] const EnvPtr& parent() const { return parent_; }
  [[nodiscard]] const std::unordered_map<std::string, Value>& bindings() const { return bindings_; }

 private:
  std::unordered_map<std::string, Value> bindings_;
  EnvPtr parent_;
};

/// Extension points supplied by the embedding (module system, defvisr).
class EvalHooks {
 public:
  virtual ~EvalHooks() = default;
  /// Resolves `ns/name`; nullopt when unknown.
  virtual std::optional<Value> resolve_qualified(const QualifiedName& name, EvalContext& ctx) = 0;
  /// Fallback for unqualified names missing from `env`.
  virtual std::optional<Value> resolve_unbound(const std::string&, const EnvPtr&, EvalContext&) { return std::nullopt; }
  /// Handles special forms the core does not know (e.g. defvisr). Returns
  /// nullopt when `head` is not one of them.
  virtual std::optional<Value> special_form(const std::string& head, const Form& form, const EnvPtr& env,
                                            EvalContext& ctx) = 0;
};

struct EvalContext {
  EvalContext(Fuel& f, std::ostream* o = nullptr, EvalHooks* h = nullptr) : fuel(f), out(o), hooks(h) {}

  Fuel& fuel;
  std::ostream* out;
  EvalHooks* hooks;
  std::size_t depth = 0;
  /// Current expansion nesting of syntax transformers.
  std::size_t expansion_depth = 0;
};

/// Name under which the current namespace string is bound in a module frame.
inline constexpr const char* kNamespaceBinding = "*ns*";
/// Hidden binding (unreadable as a symbol) holding the state cell inside a
/// render body; `set-field!` writes through it.
inline constexpr const char* kStateCellBinding = " state-cell";
/// Maximum nesting of syntax-transformer expansions.
inline constexpr std::size_t kMaxExpansionDepth = 8;

Value eval(const Form& form, const EnvPtr& env, EvalContext& ctx);

/// Evaluates forms in order, returning the last value (nil when empty).
Value eval_body(std::span<const Form> forms, const EnvPtr& env, EvalContext& ctx);

/// Applies any callable (closure, native, keyword) to evaluated arguments.
Value apply(const Value& fn, std::span<const Value> args, EvalContext& ctx, SourceSpan call_site = {});

/// Root environment holding the standard library.
EnvPtr stdlib();

bool is_special_form(std::string_view name);

/// Symbols referenced by `form` that are not bound inside it (by fn, let,
/// vlet, defn) and not special-form heads. Order of first occurrence.
std::vector<std::string> free_symbols(const Form& form);

}  // namespace mls
