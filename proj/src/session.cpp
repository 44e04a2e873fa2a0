#include "mls/session.hpp"

#include <algorithm>

#include "mls/elaborator.hpp"
#include "mls/reader.hpp"

namespace mls {

namespace {

void collect(const Form& f, std::vector<VisrInstance>& out, std::vector<Diagnostic>& diags) {
  Detection d = detect_visr(f);
  if (d.instance) {
    out.push_back(std::move(*d.instance));
    return;
  }
  if (d.diagnostic) diags.push_back({f.span, "warning", *d.diagnostic});
  for (const auto& c : f.items) collect(c, out, diags);
}

Value payload_value(const std::map<std::string, std::string>& payload) {
  ValuePairs entries;
  for (const auto& [k, v] : payload) entries.emplace_back(Value::keyword(QualifiedName{"", k}), Value::string(v));
  return Value::map(std::move(entries));
}

}  // namespace

std::vector<VisrInstance> scan_instances(const std::vector<Form>& forms, std::vector<Diagnostic>& diags) {
  std::vector<VisrInstance> out;
  for (const auto& f : forms) collect(f, out, diags);
  std::map<std::string, std::size_t> ordinals;
  for (auto& inst : out) {
    std::string ref = inst.extension_ref.str();
    inst.instance_id = ref + "#" + std::to_string(ordinals[ref]++);
  }
  return out;
}

Session::Session(SessionOptions options) : options_(std::move(options)) {
  RuntimeOptions rt;
  rt.search_paths = options_.search_paths;
  rt.module_fuel = options_.elaboration_fuel;
  runtime_ = std::make_unique<Runtime>(rt);
  sandbox_ = std::make_unique<SandboxHooks>(*runtime_);
}

void Session::open(std::string text, std::uint64_t version) {
  text_ = std::move(text);
  version_ = version;
  rescan();
}

const InstanceState* Session::find(const std::string& instance_id) const {
  for (const auto& i : instances_) {
    if (i.instance.instance_id == instance_id) return &i;
  }
  return nullptr;
}

InstanceState* Session::find_mut(const std::string& instance_id) {
  return const_cast<InstanceState*>(std::as_const(*this).find(instance_id));
}

void Session::add_diagnostic(std::vector<Diagnostic>& diags, Diagnostic d) {
  if (std::find(diags.begin(), diags.end(), d) == diags.end()) diags.push_back(std::move(d));
}

void Session::rescan() {
  std::vector<Diagnostic> diags;
  PartialRead read = read_prefix(text_);
  if (read.error) {
    add_diagnostic(diags, {{read.error->offset(), text_.size()},
                           "error",
                           std::string("unreadable from here on: ") + read.error->what()});
  }

  // Definitions in the buffer (including ones produced by meta-extensions)
  // must be registered before instances can resolve against them.
  auto env = runtime_->make_env();
  Fuel fuel(options_.elaboration_fuel);
  EvalContext ctx(fuel, nullptr, runtime_.get());
  std::vector<ElaborationError> errors;
  Elaborator(*runtime_, env, ctx).elaborate_tolerant(read.forms, errors);
  namespace_ = Runtime::namespace_of(env);
  for (const auto& e : errors) {
    add_diagnostic(diags, {e.span(), "warning", std::string(to_string(e.phase())) + ": " + e.what()});
  }

  std::vector<Diagnostic> shape;
  std::vector<VisrInstance> found = scan_instances(read.forms, shape);
  for (auto& d : shape) add_diagnostic(diags, std::move(d));

  instances_.clear();
  instances_.reserve(found.size());
  for (auto& inst : found) {
    InstanceState s;
    s.instance = std::move(inst);
    render_into(s, diags);
    instances_.push_back(std::move(s));
  }
  diagnostics_ = std::move(diags);
}

void Session::render_into(InstanceState& s, std::vector<Diagnostic>& diags) {
  const VisrInstance& inst = s.instance;
  s.live = false;
  s.handlers.clear();
  s.cell = Value{};
  s.view = default_view(inst);
  try {
    s.definition = runtime_->resolve_extension(inst.extension_ref, namespace_, inst.span);
  } catch (const ElaborationError& e) {
    s.definition = nullptr;
    add_diagnostic(diags, {e.span(), "warning", std::string(to_string(e.phase())) + ": " + e.what()});
    return;
  }
  Value state;
  try {
    state = deserialize_state(inst.state_text, s.definition->schema);
  } catch (const DeserializeError& e) {
    add_diagnostic(diags, {inst.state_span, "info", std::string("state pending: ") + e.what()});
    return;
  }
  Value cell = Value::cell(state);
  Fuel fuel(options_.render_fuel);
  EvalContext ctx(fuel, nullptr, sandbox_.get());
  std::string failure;
  try {
    Value produced = invoke_render(*s.definition, cell, ctx);
    HandlerTable handlers;
    ViewTree tree = to_view_tree(produced, handlers);
    s.view = std::move(tree);
    s.handlers = std::move(handlers);
    s.cell = cell;
    s.live = true;
    return;
  } catch (const FuelExhausted&) {
    failure = "render ran out of fuel (" + std::to_string(options_.render_fuel) + " steps)";
  } catch (const ViewError& e) {
    failure = e.what();
  } catch (const RuntimeError& e) {
    failure = std::string("render failed: ") + e.what();
  } catch (const std::exception& e) {
    failure = std::string("render failed: ") + e.what();
  }
  add_diagnostic(diags, {inst.span, "error", s.definition->name.str() + ": " + failure});
}

const ViewTree& Session::render_instance(const std::string& instance_id) {
  InstanceState* s = find_mut(instance_id);
  if (!s) throw std::out_of_range("unknown instance " + instance_id);
  std::erase_if(diagnostics_, [&](const Diagnostic& d) { return s->instance.span.contains(d.span); });
  render_into(*s, diagnostics_);
  return s->view;
}

TextEdit Session::write_back_state(const std::string& instance_id, const Value& state) const {
  const InstanceState* s = find(instance_id);
  if (!s) throw std::out_of_range("unknown instance " + instance_id);
  return TextEdit{s->instance.state_span, quote_string(serialize_state(state)), version_};
}

DispatchResult Session::dispatch_event(const UiEvent& event) {
  DispatchResult r;
  InstanceState* s = find_mut(event.instance_id);
  if (!s) {
    r.diagnostics.push_back({{}, "error", "unknown instance " + event.instance_id});
    return r;
  }
  auto handler = s->handlers.find(event.handler_id);
  if (!s->live || handler == s->handlers.end()) {
    r.view = s->view;
    r.diagnostics.push_back({s->instance.span, "error", "stale or unknown handler " + event.handler_id});
    return r;
  }
  r.accepted = true;
  r.view = s->view;
  const Value fn = handler->second;
  const Value cell = s->cell;
  const Value before = *cell.as_cell()->value;

  Fuel fuel(options_.render_fuel);
  EvalContext ctx(fuel, nullptr, sandbox_.get());
  std::string failure;
  try {
    bool nullary = fn.is(Value::Kind::Closure) && fn.as_closure().params.empty() && fn.as_closure().rest_param.empty();
    if (nullary) {
      apply(fn, {}, ctx);
    } else {
      Value arg[] = {payload_value(event.payload)};
      apply(fn, arg, ctx);
    }
  } catch (const FuelExhausted&) {
    failure = "handler ran out of fuel (" + std::to_string(options_.render_fuel) + " steps)";
  } catch (const RuntimeError& e) {
    failure = std::string("handler failed: ") + e.what();
  } catch (const std::exception& e) {
    failure = std::string("handler failed: ") + e.what();
  }
  const Value after = *cell.as_cell()->value;
  if (!failure.empty()) {
    *cell.as_cell()->value = before;
    r.diagnostics.push_back({s->instance.span, "error", s->definition->name.str() + ": " + failure});
    return r;
  }
  if (after == before) return r;

  std::string text;
  try {
    text = serialize_state(after);
  } catch (const SerializeError& e) {
    *cell.as_cell()->value = before;
    r.diagnostics.push_back({s->instance.span, "error", s->definition->name.str() + ": " + e.what()});
    return r;
  }
  r.edit = TextEdit{s->instance.state_span, quote_string(text), version_};

  // Render from the written text so the view matches what a rescan yields.
  InstanceState next = *s;
  next.instance.state_text = text;
  std::vector<Diagnostic> diags;
  render_into(next, diags);
  s->view = next.view;
  s->handlers = next.handlers;
  s->cell = next.cell;
  s->live = next.live;
  r.view = s->view;
  r.diagnostics = std::move(diags);
  return r;
}

void Session::apply_edit(const TextEdit& edit) {
  if (edit.base_version != version_) throw VersionMismatch(version_, edit.base_version);
  if (edit.span.start > edit.span.end || edit.span.end > text_.size()) {
    throw InvalidEdit("edit span [" + std::to_string(edit.span.start) + "," + std::to_string(edit.span.end) +
                      ") is outside the buffer");
  }
  text_.replace(edit.span.start, edit.span.length(), edit.replacement);
  ++version_;
  rescan();
}

}  // namespace mls
