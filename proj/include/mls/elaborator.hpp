#pragma once

#include <vector>

#include "mls/interp.hpp"
#include "mls/runtime.hpp"
#include "mls/visr.hpp"

namespace mls {

/// Rewrites instances into their elaborated syntax, in textual order.
///
/// Top-level def/defn/ns forms are evaluated in `env` as they are reached so
/// later elaborators can use them; with `evaluate_all` every top-level form
/// is evaluated (module loading).
class Elaborator {
 public:
  Elaborator(Runtime& runtime, EnvPtr env, EvalContext& ctx, bool evaluate_all = false)
      : runtime_(runtime), env_(std::move(env)), ctx_(ctx), evaluate_all_(evaluate_all) {}

  /// Throws ElaborationError at the first failure.
  std::vector<Form> elaborate_program(const std::vector<Form>& forms);

  /// Keeps going after failures; failed top-level forms are dropped from
  /// the result and reported in `errors`.
  std::vector<Form> elaborate_tolerant(const std::vector<Form>& forms, std::vector<ElaborationError>& errors);

  Form elaborate_form(const Form& form) { return walk(form, 0, true); }

 private:
  Form walk(const Form& form, std::size_t nesting, bool top);
  void after_top_level(const Form& elaborated);

  Runtime& runtime_;
  EnvPtr env_;
  EvalContext& ctx_;
  bool evaluate_all_;
};

/// True for def, defn and ns forms.
bool is_definition_form(const Form& form);

}  // namespace mls
