#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mls/interp.hpp"
#include "mls/visr.hpp"

namespace mls {

inline constexpr std::uint64_t kDefaultRenderFuel = 200'000;
inline constexpr std::uint64_t kDefaultElaborationFuel = 1'000'000;
inline constexpr std::uint64_t kDefaultRunFuel = 100'000'000;

/// Budget override from VISR_FUEL; `fallback` when unset or invalid.
std::uint64_t fuel_from_env(std::uint64_t fallback);

struct RuntimeOptions {
  std::vector<std::filesystem::path> search_paths{"."};
  /// Per-module budget for loading (elaboration and top-level evaluation).
  std::uint64_t module_fuel = kDefaultElaborationFuel;
  /// Destination of module top-level output; discarded when null.
  std::ostream* out = nullptr;
};

/// Module loader, extension registry and the evaluation hooks that tie them
/// into the interpreter. One per program run or edit session.
class Runtime : public EvalHooks {
 public:
  explicit Runtime(RuntimeOptions options = {});

  [[nodiscard]] const EnvPtr& root() const { return root_; }
  /// Fresh top-level frame for a program in namespace `ns`.
  [[nodiscard]] EnvPtr make_env(const std::string& ns = "user") const;
  static std::string namespace_of(const EnvPtr& env);

  void register_definition(DefinitionPtr def);
  [[nodiscard]] DefinitionPtr lookup_definition(const QualifiedName& full) const;
  [[nodiscard]] const std::map<std::string, DefinitionPtr>& definitions() const { return registry_; }

  /// Finds the definition an instance refers to. Unqualified references
  /// resolve in `current_ns`. Throws ElaborationError(resolve) at `span`.
  DefinitionPtr resolve_extension(const QualifiedName& ref, const std::string& current_ns, SourceSpan span,
                                  bool allow_load = true);

  /// Loads `ns` from the search path once. Throws ElaborationError(resolve)
  /// at `requested_at` on failure.
  EnvPtr load_module(const std::string& ns, SourceSpan requested_at = {});
  [[nodiscard]] std::optional<std::filesystem::path> module_file(const std::string& ns) const;
  [[nodiscard]] bool module_loaded(const std::string& ns) const { return modules_.count(ns) > 0; }
  [[nodiscard]] EnvPtr module_env(const std::string& ns) const;

  /// The syntax transformer an extension name is bound to.
  static Value transformer_of(const DefinitionPtr& def);
  /// Registers a defvisr form and binds its name in `env` to a syntax
  /// transformer, so an instance evaluated without the elaborator still
  /// elaborates.
  DefinitionPtr define_visr(const Form& form, const EnvPtr& env, EvalContext& ctx);

  std::optional<Value> resolve_qualified(const QualifiedName& name, EvalContext& ctx) override;
  std::optional<Value> resolve_unbound(const std::string& name, const EnvPtr& env, EvalContext& ctx) override;
  std::optional<Value> special_form(const std::string& head, const Form& form, const EnvPtr& env,
                                    EvalContext& ctx) override;

 private:
  RuntimeOptions options_;
  EnvPtr root_;
  std::map<std::string, DefinitionPtr> registry_;
  std::map<std::string, EnvPtr> modules_;
  std::set<std::string> loading_;
};

/// Hooks for edit-time code: qualified names resolve only through modules
/// that are already loaded, and definitions cannot be created or replaced.
class SandboxHooks : public EvalHooks {
 public:
  explicit SandboxHooks(const Runtime& runtime) : runtime_(runtime) {}

  std::optional<Value> resolve_qualified(const QualifiedName& name, EvalContext& ctx) override;
  std::optional<Value> special_form(const std::string& head, const Form& form, const EnvPtr& env,
                                    EvalContext& ctx) override;

 private:
  const Runtime& runtime_;
};

}  // namespace mls
