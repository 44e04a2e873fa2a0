#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mls/runtime.hpp"
#include "mls/view.hpp"
#include "mls/visr.hpp"

namespace mls {

struct Diagnostic {
  SourceSpan span;
  std::string severity;  // error | warning | info
  std::string message;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// Replacement of `span` (in `base_version` coordinates) by `replacement`.
struct TextEdit {
  SourceSpan span;
  std::string replacement;
  std::uint64_t base_version = 0;

  friend bool operator==(const TextEdit&, const TextEdit&) = default;
};

struct UiEvent {
  std::string instance_id;
  std::string handler_id;
  std::map<std::string, std::string> payload;
};

class VersionMismatch : public std::runtime_error {
 public:
  VersionMismatch(std::uint64_t expected, std::uint64_t got)
      : std::runtime_error("edit is based on version " + std::to_string(got) + " but the buffer is at version " +
                           std::to_string(expected)) {}
};

class InvalidEdit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionOptions {
  std::vector<std::filesystem::path> search_paths{"."};
  std::uint64_t render_fuel = kDefaultRenderFuel;
  std::uint64_t elaboration_fuel = kDefaultElaborationFuel;
};

struct InstanceState {
  VisrInstance instance;
  DefinitionPtr definition;  // null when unresolved
  ViewTree view;
  HandlerTable handlers;
  Value cell;         // state cell of the latest successful render
  bool live = false;  // false while showing the default view
};

struct DispatchResult {
  bool accepted = false;  // false for unknown instances and stale handlers
  std::optional<TextEdit> edit;
  ViewTree view;
  std::vector<Diagnostic> diagnostics;
};

/// Edit-time engine for one buffer. Not thread-safe: callers serialize all
/// operations on a session.
class Session {
 public:
  explicit Session(SessionOptions options = {});

  void open(std::string text, std::uint64_t version = 0);

  [[nodiscard]] const std::string& text() const { return text_; }
  [[nodiscard]] std::uint64_t version() const { return version_; }
  [[nodiscard]] const std::vector<InstanceState>& instances() const { return instances_; }
  [[nodiscard]] const InstanceState* find(const std::string& instance_id) const;
  /// Diagnostics from the latest scan and renders.
  [[nodiscard]] const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

  /// Renders again from the instance's current text.
  const ViewTree& render_instance(const std::string& instance_id);

  DispatchResult dispatch_event(const UiEvent& event);

  /// Splices an edit into the buffer and rescans. Instance ids are stable
  /// for instances keeping their reference and ordinal.
  void apply_edit(const TextEdit& edit);

  /// The edit that writes `state` into an instance's state string.
  TextEdit write_back_state(const std::string& instance_id, const Value& state) const;

  [[nodiscard]] Runtime& runtime() { return *runtime_; }
  [[nodiscard]] const SessionOptions& options() const { return options_; }

 private:
  void rescan();
  void render_into(InstanceState& inst, std::vector<Diagnostic>& diags);
  void add_diagnostic(std::vector<Diagnostic>& diags, Diagnostic d);
  InstanceState* find_mut(const std::string& instance_id);

  SessionOptions options_;
  std::unique_ptr<Runtime> runtime_;
  std::unique_ptr<SandboxHooks> sandbox_;
  std::string text_;
  std::uint64_t version_ = 0;
  std::string namespace_ = "user";
  std::vector<InstanceState> instances_;
  std::vector<Diagnostic> diagnostics_;
};

/// Collects every instance in `forms` (document order), reporting malformed
/// :visr-tagged forms in `diags`.
std::vector<VisrInstance> scan_instances(const std::vector<Form>& forms, std::vector<Diagnostic>& diags);

}  // namespace mls
