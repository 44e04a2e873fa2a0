#include "mls/visr.hpp"

#include <algorithm>
#include <set>

#include "mls/reader.hpp"

namespace mls {

std::string_view to_string(ElaborationPhase phase) {
  switch (phase) {
    case ElaborationPhase::Resolve: return "resolve";
    case ElaborationPhase::Deserialize: return "deserialize";
    case ElaborationPhase::ElaborateRun: return "elaborate-run";
    case ElaborationPhase::Splice: return "splice";
  }
  return "?";
}

const FieldSpec* VisrDefinition::field(std::string_view name) const {
  for (const auto& f : schema) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

Value VisrDefinition::initial_state() const {
  ValuePairs entries;
  for (const auto& f : schema) entries.emplace_back(Value::keyword(QualifiedName{"", f.name}), f.init_value);
  return Value::map(std::move(entries));
}

namespace {

void check_state_value(const Value& v, std::size_t depth) {
  if (depth > kMaxDataDepth) throw SerializeError("state nested too deeply");
  switch (v.kind()) {
    case Value::Kind::Nil:
    case Value::Kind::Boolean:
    case Value::Kind::Number:
    case Value::Kind::String:
    case Value::Kind::Keyword: return;
    case Value::Kind::List:
    case Value::Kind::Vector:
      for (const auto& c : v.items()) check_state_value(c, depth + 1);
      return;
    case Value::Kind::Map:
      for (const auto& [k, val] : v.entries()) {
        check_state_value(k, depth + 1);
        check_state_value(val, depth + 1);
      }
      return;
    default:
      throw SerializeError("state cannot hold a value of kind " + std::string(to_string(v.kind())));
  }
}

void check_literal(const Form& f, std::size_t depth) {
  if (depth > kMaxDataDepth) throw DeserializeError("state nested too deeply");
  if (!f.meta.empty()) throw DeserializeError("state must not carry metadata");
  switch (f.kind) {
    case FormKind::Symbol: throw DeserializeError("state must be literal data, found symbol " + f.name.str());
    case FormKind::List:
    case FormKind::Vector:
    case FormKind::Map:
      for (const auto& c : f.items) check_literal(c, depth + 1);
      return;
    default: return;
  }
}

[[noreturn]] void definition_error(const Form& at, const std::string& message) {
  throw ElaborationError(at.span, ElaborationPhase::Resolve, message);
}

const std::string& simple_symbol(const Form& f, const std::string& what) {
  if (f.kind != FormKind::Symbol || f.name.qualified()) definition_error(f, what + ": expected a simple symbol");
  return f.name.name;
}

void check_set_field_targets(const Form& f, const std::set<std::string>& fields, const std::string& ext) {
  if (f.kind == FormKind::List && !f.items.empty()) {
    const Form& head = f.items.front();
    if (head.is_symbol("quote")) return;
    if (head.is_symbol("set-field!") && f.items.size() >= 2) {
      const Form& target = f.items[1];
      if (target.kind != FormKind::Symbol || target.name.qualified() || !fields.count(target.name.name)) {
        definition_error(target, ext + ": set-field! target " + print_form(target) + " is not a state field");
      }
    }
  }
  for (const auto& c : f.items) check_set_field_targets(c, fields, ext);
}

EnvPtr bind_fields(const VisrDefinition& def, const Value& state) {
  auto frame = Env::child_of(def.env);
  for (const auto& f : def.schema) {
    const Value* v = state.get_keyword(f.name);
    frame->define(f.name, v ? *v : f.init_value);
  }
  return frame;
}

}  // namespace

std::string serialize_state(const Value& state) {
  if (!state.is(Value::Kind::Map)) {
    throw SerializeError("state must be a map, got " + std::string(to_string(state.kind())));
  }
  check_state_value(state, 0);
  return print_value(state);
}

Value deserialize_state(std::string_view text, const std::vector<FieldSpec>& schema) {
  std::vector<Form> forms;
  try {
    forms = read_all(text);
  } catch (const ReadError& e) {
    throw DeserializeError(std::string("state text is not readable: ") + e.what() + " at offset " +
                           std::to_string(e.offset()));
  }
  if (forms.size() != 1 || forms.front().kind != FormKind::Map) {
    throw DeserializeError("state text must be a single map literal");
  }
  check_literal(forms.front(), 0);
  Value state = form_to_value(forms.front());
  ValuePairs entries = state.entries();
  for (const auto& f : schema) {
    Value key = Value::keyword(QualifiedName{"", f.name});
    if (!state.get(key)) entries.emplace_back(std::move(key), f.init_value);
  }
  return Value::map(std::move(entries));
}

bool has_visr_hint(const Form& form) {
  const Form* hint = form.meta_get("visr");
  if (!hint) return false;
  return !(hint->kind == FormKind::Nil || (hint->kind == FormKind::Boolean && !hint->boolean));
}

Detection detect_visr(const Form& form) {
  Detection d;
  if (!has_visr_hint(form)) return d;
  if (form.kind == FormKind::List && form.items.size() == 2 && form.items[0].kind == FormKind::Symbol &&
      form.items[1].kind == FormKind::String) {
    VisrInstance inst;
    inst.extension_ref = form.items[0].name;
    inst.state_text = form.items[1].text;
    inst.span = form.span;
    inst.state_span = form.items[1].span;
    d.instance = std::move(inst);
  } else {
    d.diagnostic = "instance must apply symbol to one string";
  }
  return d;
}

ViewTree default_view(const VisrInstance& instance) {
  ViewTree t;
  t.tag = "text";
  t.attrs["text"] = instance.extension_ref.str() + " " + instance.state_text;
  return t;
}

std::string instance_text(const QualifiedName& ref, const Value& state) {
  Form f = Form::list({Form::symbol(ref), Form::string_of(serialize_state(state))});
  f.meta = {Form::keyword("visr"), Form::boolean_of(true)};
  return print_form(f);
}

DefinitionPtr parse_definition(const Form& form, const EnvPtr& env, EvalContext& ctx, const std::string& ns) {
  if (form.items.size() < 3) definition_error(form, "defvisr: expected (defvisr Name [field init ...] clauses...)");
  auto def = std::make_shared<VisrDefinition>();
  def->name = QualifiedName{ns, simple_symbol(form.items[1], "defvisr")};
  def->env = env;
  def->span = form.span;
  const std::string ext = "defvisr " + def->name.name;

  const Form& fields = form.items[2];
  if (fields.kind != FormKind::Vector || fields.items.size() % 2 != 0) {
    definition_error(fields, ext + ": state must be a vector of field/initial-value pairs");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < fields.items.size(); i += 2) {
    FieldSpec spec;
    spec.name = simple_symbol(fields.items[i], ext);
    if (!names.insert(spec.name).second) definition_error(fields.items[i], ext + ": duplicate field " + spec.name);
    spec.init = fields.items[i + 1];
    try {
      spec.init_value = eval(spec.init, env, ctx);
      check_state_value(spec.init_value, 0);
    } catch (const RuntimeError& e) {
      definition_error(spec.init, ext + ": initial value of " + spec.name + " failed: " + e.what());
    } catch (const SerializeError& e) {
      definition_error(spec.init, ext + ": initial value of " + spec.name + " is not serializable: " + e.what());
    }
    def->schema.push_back(std::move(spec));
  }

  bool has_render = false;
  bool has_elaborate = false;
  for (std::size_t i = 3; i < form.items.size(); ++i) {
    const Form& clause = form.items[i];
    if (clause.kind != FormKind::List || clause.items.size() < 2 || clause.items[0].kind != FormKind::Symbol) {
      definition_error(clause, ext + ": expected (render [this] ...) or (elaborate [state] ...)");
    }
    const std::string kind = clause.items[0].name.str();
    const Form& params = clause.items[1];
    if (params.kind != FormKind::Vector || params.items.size() != 1) {
      definition_error(params, ext + ": " + kind + " takes exactly one parameter");
    }
    const std::string& param = simple_symbol(params.items[0], ext);
    std::vector<Form> body(clause.items.begin() + 2, clause.items.end());
    if (kind == "render") {
      if (has_render) definition_error(clause, ext + ": duplicate render clause");
      has_render = true;
      for (const auto& b : body) check_set_field_targets(b, names, ext);
      def->render_param = param;
      def->render_body = std::move(body);
    } else if (kind == "elaborate") {
      if (has_elaborate) definition_error(clause, ext + ": duplicate elaborate clause");
      has_elaborate = true;
      def->elaborate_param = param;
      def->elaborate_body = std::move(body);
    } else {
      definition_error(clause.items[0], ext + ": unknown clause " + kind);
    }
  }
  if (!has_render) definition_error(form, ext + ": missing render clause");
  if (!has_elaborate) definition_error(form, ext + ": missing elaborate clause");
  return def;
}

Value invoke_render(const VisrDefinition& def, const Value& cell, EvalContext& ctx) {
  auto frame = bind_fields(def, *cell.as_cell()->value);
  frame->define(def.render_param, cell);
  frame->define(kStateCellBinding, cell);
  return eval_body(def.render_body, frame, ctx);
}

Value invoke_elaborate(const VisrDefinition& def, const std::string& state_text, EvalContext& ctx) {
  Value state = deserialize_state(state_text, def.schema);
  auto frame = bind_fields(def, state);
  frame->define(def.elaborate_param, Value::string(state_text));
  return eval_body(def.elaborate_body, frame, ctx);
}

Form elaborate_instance(const VisrDefinition& def, const std::string& state_text, SourceSpan span,
                        EvalContext& ctx) {
  const std::string ext = def.name.str();
  Value produced;
  try {
    produced = invoke_elaborate(def, state_text, ctx);
  } catch (const DeserializeError& e) {
    throw ElaborationError(span, ElaborationPhase::Deserialize, ext + ": " + e.what());
  } catch (const ElaborationError& e) {
    throw ElaborationError(span, e.phase(), ext + ": " + e.what());
  } catch (const RuntimeError& e) {
    throw ElaborationError(span, ElaborationPhase::ElaborateRun, ext + ": " + e.what());
  } catch (const FuelExhausted&) {
    throw ElaborationError(span, ElaborationPhase::ElaborateRun, ext + ": elaboration ran out of fuel");
  }
  try {
    return value_to_form(produced, span);
  } catch (const SerializeError& e) {
    throw ElaborationError(span, ElaborationPhase::Splice, ext + ": elaborate result is not code: " + e.what());
  }
}

}  // namespace mls
