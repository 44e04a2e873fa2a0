#include "mls/elaborator.hpp"

namespace mls {

bool is_definition_form(const Form& form) {
  if (form.kind != FormKind::List || form.items.empty()) return false;
  const Form& head = form.items.front();
  return head.is_symbol("def") || head.is_symbol("defn") || head.is_symbol("ns");
}

namespace {

bool is_defvisr(const Form& f) {
  return f.kind == FormKind::List && !f.items.empty() && f.items.front().is_symbol("defvisr");
}

void strip_visr_meta(Form& f) {
  for (std::size_t i = 0; i + 1 < f.meta.size(); i += 2) {
    if (f.meta[i].kind == FormKind::Keyword && f.meta[i].name == QualifiedName{"", "visr"}) {
      f.meta.erase(f.meta.begin() + static_cast<std::ptrdiff_t>(i), f.meta.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      return;
    }
  }
}

}  // namespace

Form Elaborator::walk(const Form& form, std::size_t nesting, bool top) {
  ctx_.fuel.consume();
  Detection d = detect_visr(form);
  if (d.diagnostic) throw ElaborationError(form.span, ElaborationPhase::Resolve, *d.diagnostic);
  if (d.instance) {
    if (nesting >= kMaxExpansionDepth) {
      throw ElaborationError(form.span, ElaborationPhase::Splice,
                             "instances nested deeper than " + std::to_string(kMaxExpansionDepth) + " levels");
    }
    const VisrInstance& inst = *d.instance;
    DefinitionPtr def = runtime_.resolve_extension(inst.extension_ref, Runtime::namespace_of(env_), inst.span);
    Form produced = elaborate_instance(*def, inst.state_text, inst.span, ctx_);
    try {
      return walk(produced, nesting + 1, top);
    } catch (const ElaborationError& e) {
      if (inst.span.contains(e.span())) throw;
      throw ElaborationError(inst.span, e.phase(), e.what());
    }
  }

  Form out = form;
  strip_visr_meta(out);
  if (form.kind == FormKind::List && !form.items.empty() && form.items.front().is_symbol("quote")) return out;
  // a top-level (do ...) keeps its body at top level
  bool body_top = top && form.kind == FormKind::List && !form.items.empty() && form.items.front().is_symbol("do");
  for (auto& c : out.items) c = walk(c, nesting, body_top);

  // nested definitions are left for evaluation, which rejects them at edit time
  if (top && is_defvisr(out)) {
    try {
      runtime_.define_visr(out, env_, ctx_);
    } catch (const RuntimeError& e) {
      throw ElaborationError(e.has_span() ? e.span() : form.span, ElaborationPhase::ElaborateRun, e.what());
    } catch (const FuelExhausted&) {
      throw ElaborationError(form.span, ElaborationPhase::ElaborateRun, "defvisr ran out of fuel");
    }
    return Form::nil(form.span);
  }
  return out;
}

void Elaborator::after_top_level(const Form& elaborated) {
  if (evaluate_all_) {
    eval(elaborated, env_, ctx_);
    return;
  }
  if (!is_definition_form(elaborated)) return;
  // Failures here resurface when the program runs.
  try {
    eval(elaborated, env_, ctx_);
  } catch (const RuntimeError&) {
  }
}

std::vector<Form> Elaborator::elaborate_program(const std::vector<Form>& forms) {
  std::vector<Form> out;
  out.reserve(forms.size());
  for (const auto& f : forms) {
    Form e;
    try {
      e = walk(f, 0, true);
    } catch (const FuelExhausted&) {
      throw ElaborationError(f.span, ElaborationPhase::ElaborateRun, "elaboration ran out of fuel");
    }
    after_top_level(e);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Form> Elaborator::elaborate_tolerant(const std::vector<Form>& forms,
                                                 std::vector<ElaborationError>& errors) {
  std::vector<Form> out;
  for (const auto& f : forms) {
    try {
      Form e = walk(f, 0, true);
      after_top_level(e);
      out.push_back(std::move(e));
    } catch (const ElaborationError& e) {
      errors.push_back(e);
    } catch (const RuntimeError& e) {
      errors.emplace_back(e.has_span() ? e.span() : f.span, ElaborationPhase::ElaborateRun, e.what());
    } catch (const FuelExhausted&) {
      errors.emplace_back(f.span, ElaborationPhase::ElaborateRun, "elaboration ran out of fuel");
    }
  }
  return out;
}

}  // namespace mls
