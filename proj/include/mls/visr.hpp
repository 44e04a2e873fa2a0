#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mls/form.hpp"
#include "mls/interp.hpp"
#include "mls/value.hpp"
#include "mls/view.hpp"

namespace mls {

enum class ElaborationPhase { Resolve, Deserialize, ElaborateRun, Splice };

std::string_view to_string(ElaborationPhase phase);

class ElaborationError : public std::runtime_error {
 public:
  ElaborationError(SourceSpan span, ElaborationPhase phase, const std::string& message)
      : std::runtime_error(message), span_(span), phase_(phase) {}

  [[nodiscard]] SourceSpan span() const { return span_; }
  [[nodiscard]] ElaborationPhase phase() const { return phase_; }

 private:
  SourceSpan span_;
  ElaborationPhase phase_;
};

class DeserializeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldSpec {
  std::string name;
  Form init;
  Value init_value;
};

/// One interactive-syntax extension: state schema, render and elaborate.
struct VisrDefinition {
  QualifiedName name;
  std::vector<FieldSpec> schema;
  std::string render_param;  // the state cell, `this` by convention
  std::vector<Form> render_body;
  std::string elaborate_param;  // the state text
  std::vector<Form> elaborate_body;
  EnvPtr env;  // defining environment
  SourceSpan span;

  [[nodiscard]] const FieldSpec* field(std::string_view name) const;
  /// State built from the schema's initial values.
  [[nodiscard]] Value initial_state() const;
};

using DefinitionPtr = std::shared_ptr<const VisrDefinition>;

/// One textual occurrence of an extension.
struct VisrInstance {
  QualifiedName extension_ref;
  std::string state_text;
  SourceSpan span;        // whole form including the metadata prefix
  SourceSpan state_span;  // the string literal, quotes included
  std::string instance_id;
};

/// Canonical text for a state map: sorted keys, shortest numbers.
std::string serialize_state(const Value& state);

/// Reads `text` as a single map literal (no code), fills missing schema
/// fields from their initial values and keeps unknown fields as they are.
Value deserialize_state(std::string_view text, const std::vector<FieldSpec>& schema);

struct Detection {
  std::optional<VisrInstance> instance;
  std::optional<std::string> diagnostic;
};

/// True when the form carries a truthy :visr metadata entry.
bool has_visr_hint(const Form& form);

/// Recognizes `^{:visr ...} (ext-ref "state")`. Never resolves the reference.
Detection detect_visr(const Form& form);

/// Read-only fallback: one text node with the reference and the raw state.
ViewTree default_view(const VisrInstance& instance);

/// The printed instance form for a state, e.g. ^{:visr true} (ns/Ext "{...}").
std::string instance_text(const QualifiedName& ref, const Value& state);

/// Parses and validates a defvisr form. Evaluates field initializers in
/// `env`. Throws ElaborationError on malformed definitions.
DefinitionPtr parse_definition(const Form& form, const EnvPtr& env, EvalContext& ctx, const std::string& ns);

/// Runs the render body with `cell` as the state: field names are bound to
/// the current field values and set-field! writes through the cell.
Value invoke_render(const VisrDefinition& def, const Value& cell, EvalContext& ctx);

/// Runs the elaborate body for a state text; returns the produced value.
/// Throws DeserializeError or RuntimeError/FuelExhausted.
Value invoke_elaborate(const VisrDefinition& def, const std::string& state_text, EvalContext& ctx);

/// Elaborates one instance form into its replacement syntax. Errors carry
/// `call.span`.
Form elaborate_instance(const VisrDefinition& def, const std::string& state_text, SourceSpan span,
                        EvalContext& ctx);

}  // namespace mls
