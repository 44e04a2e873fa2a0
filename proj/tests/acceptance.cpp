// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "mls/elaborator.hpp"
#include "mls/reader.hpp"
#include "mls/session.hpp"
#include "nfa_oracle.hpp"
#include "support.hpp"

using namespace mls;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and sizes.
constexpr int kRoundTripStates = 1000;
constexpr double kRoundTripSeconds = 30.0;
constexpr int kScriptedEvents = 20;
constexpr int kAdversarialRenders = 100;
constexpr double kAdversarialSeconds = 10.0;
constexpr int kTracesPerMachine = 500;
constexpr int kMaxTraceLength = 12;
constexpr double kBezierTolerance = 1e-9;
constexpr int kBezierTriangles = 100;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> problems;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (problems.size() < 5) problems.push_back(what);
    }
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string text_slice(const std::string& text, SourceSpan s) { return text.substr(s.start, s.length()); }

std::string sample_text(const std::string& entry) { return test::slurp(test::corpus_dir() / entry / "sample.mls"); }

/// Generic payload covering input values and pointer coordinates.
std::map<std::string, std::string> payload_for(const std::string& handler_id) {
  if (handler_id.ends_with(":change")) return {{"value", "7"}};
  if (handler_id.ends_with(":drag")) return {{"x", "60"}, {"y", "120"}};
  return {};
}

std::vector<std::string> handler_ids(const InstanceState& s) {
  std::vector<std::string> out;
  for (const auto& [id, fn] : s.handlers) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// 1. Round trip

struct ExtensionCase {
  std::string name;
  std::string prefix;    // buffer text before the instance
  std::string ref_text;  // reference as written
};

Outcome round_trip() {
  Outcome o;
  std::string builder_text;
  {
    auto forms = read_all(sample_text("formbuilder"));
    std::vector<Diagnostic> d;
    for (const auto& i : scan_instances(forms, d)) {
      if (i.extension_ref.name == "FormBuilder") builder_text = text_slice(sample_text("formbuilder"), i.span);
    }
  }
  std::vector<ExtensionCase> cases = {
      {"Counter", "", "widgets.counter/Counter"},
      {"Diagram", "", "geometry.core/Diagram"},
      {"StateMachine", "", "protocol.statemachine/StateMachine"},
      {"FormBuilder", "", "forms.builder/FormBuilder"},
      {"Grade (generated)", builder_text + "\n", "Grade"},
  };
  std::mt19937 rng(20240601);
  auto t0 = Clock::now();
  int total = 0;
  for (const auto& c : cases) {
    Session s(test::session_options());
    std::string text = c.prefix + "(def x ^{:visr true} (" + c.ref_text + " \"{}\"))\n";
    s.open(text);
    const InstanceState* inst = nullptr;
    for (const auto& i : s.instances()) {
      if (i.instance.extension_ref.str() == c.ref_text) inst = &i;
    }
    o.require(inst && inst->definition, c.name + ": instance did not resolve");
    if (!inst || !inst->definition) continue;
    const std::string id = inst->instance.instance_id;
    const auto schema = inst->definition->schema;
    std::vector<std::string> fields;
    for (const auto& f : schema) fields.push_back(f.name);
    for (int k = 0; k < kRoundTripStates; ++k, ++total) {
      Value state = test::random_state(rng, fields);
      std::string canonical = serialize_state(state);
      o.require(deserialize_state(canonical, schema) == state, c.name + ": deserialize(serialize(s)) != s for " + canonical);
      s.apply_edit(s.write_back_state(id, state));
      const InstanceState* now = s.find(id);
      o.require(now && now->instance.state_text == canonical, c.name + ": write-back lost state " + canonical);
      o.require(now && text_slice(s.text(), now->instance.state_span) == quote_string(canonical),
                c.name + ": buffer text is not the canonical literal");
    }
  }
  double elapsed = seconds_since(t0);
  o.require(elapsed < kRoundTripSeconds, "took " + std::to_string(elapsed) + " s");
  std::ostringstream d;
  d << total << " states over " << cases.size() << " extensions in " << std::fixed << std::setprecision(2) << elapsed
    << " s";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 2. Backwards compatibility

fs::path write_temp(const std::string& name, const std::string& text) {
  fs::path p = fs::temp_directory_path() / ("mls-accept-" + name + ".mls");
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

test::CliResult run_cli_file(const fs::path& p) {
  return test::run_cli({"--path", test::corpus_lib().string(), "run", p.string()});
}

/// The program's observable behaviour in-process: output, or the error.
std::string run_in_process(const std::string& text) {
  try {
    return "ok:" + test::run_text(text, kDefaultRunFuel);
  } catch (const std::exception& e) {
    return "error";
  }
}

Outcome backwards_compatibility() {
  Outcome o;
  int events = 0, edits = 0, restored = 0;
  for (const auto& entry : test::corpus_entries()) {
    fs::path dir = test::corpus_dir() / entry;
    const std::string original = sample_text(entry);
    const std::string expected = test::slurp(dir / "expected.txt");
    auto before = run_cli_file(dir / "sample.mls");
    o.require(before.code == 0 && before.out == expected, entry + ": sample does not run as expected");

    Session s(test::session_options());
    s.open(original);
    std::map<std::string, std::string> original_states;
    for (const auto& i : s.instances()) original_states[i.instance.instance_id] = i.instance.state_text;

    // Scripted GUI session: rotate over instances and their handlers.
    for (int e = 0; e < kScriptedEvents; ++e) {
      std::vector<const InstanceState*> live;
      for (const auto& i : s.instances()) {
        if (i.live && !i.handlers.empty()) live.push_back(&i);
      }
      if (live.empty()) break;
      const InstanceState& target = *live[static_cast<std::size_t>(e) % live.size()];
      auto ids = handler_ids(target);
      const std::string& h = ids[static_cast<std::size_t>(e * 7 + 3) % ids.size()];
      auto r = s.dispatch_event({target.instance.instance_id, h, payload_for(h)});
      ++events;
      if (r.edit) {
        s.apply_edit(*r.edit);
        ++edits;
      }
    }

    // Saved file runs with no server, exactly as the session's buffer does.
    fs::path saved = write_temp(entry + "-saved", s.text());
    auto after = run_cli_file(saved);
    std::string in_process = run_in_process(s.text());
    std::string cli = after.code == 0 ? "ok:" + after.out : "error";
    o.require(after.code == 0 || after.code == 1, entry + ": saved file crashed the runner");
    o.require(cli == in_process, entry + ": saved file runs differently from the buffer");

    // Writing the original states back restores the original program.
    for (const auto& [id, state_text] : original_states) {
      if (!s.find(id)) continue;
      Value v = form_to_value(read_one(state_text));
      s.apply_edit(s.write_back_state(id, v));
    }
    fs::path back = write_temp(entry + "-restored", s.text());
    auto again = run_cli_file(back);
    o.require(again.code == 0 && again.out == expected, entry + ": restored program output differs");
    o.require(s.text() == original, entry + ": restored text differs from the original");
    if (s.text() == original) ++restored;
    fs::remove(saved);
    fs::remove(back);
  }

  // Counter: balanced clicks leave the program's output unchanged.
  {
    Session s(test::session_options());
    s.open(sample_text("counter"));
    for (int e = 0; e < kScriptedEvents; ++e) {
      const auto& inst = s.instances()[0];
      std::string h = e % 2 == 0 ? "0.1:click" : "0.2:click";  // + then -
      auto r = s.dispatch_event({inst.instance.instance_id, h, {}});
      if (r.edit) s.apply_edit(*r.edit);
    }
    fs::path p = write_temp("counter-balanced", s.text());
    auto r = run_cli_file(p);
    o.require(r.code == 0 && r.out == test::slurp(test::corpus_dir() / "counter" / "expected.txt"),
              "counter: balanced clicks changed the output");
    fs::remove(p);
  }

  // Plain programs elaborate to themselves.
  int plain = 0;
  for (const auto& entry : test::corpus_entries()) {
    fs::path oracle = test::corpus_dir() / entry / "oracle.mls";
    auto fmt = test::run_cli({"fmt", oracle.string()});
    auto exp = test::run_cli({"--path", test::corpus_lib().string(), "expand", oracle.string()});
    o.require(fmt.code == 0 && exp.code == 0 && fmt.out == exp.out, entry + ": plain oracle changed under expand");
    ++plain;
  }
  o.detail = std::to_string(events) + " events (" + std::to_string(edits) + " edits) over " +
             std::to_string(test::corpus_entries().size()) + " samples; " + std::to_string(restored) +
             " restored byte-exact; " + std::to_string(plain) + " plain programs unchanged";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Containment

struct Snapshot {
  std::string text;
  std::uint64_t version;
  std::vector<std::string> states;
  std::vector<ViewTree> views;
  std::vector<std::string> cells;
  std::map<std::string, const void*> registry;

  static Snapshot of(Session& s, const std::vector<std::string>& watched) {
    Snapshot snap{s.text(), s.version(), {}, {}, {}, {}};
    for (const auto& id : watched) {
      const InstanceState* i = s.find(id);
      snap.states.push_back(i->instance.state_text);
      snap.views.push_back(i->view);
      snap.cells.push_back(print_value(*i->cell.as_cell()->value));
    }
    for (const auto& [name, def] : s.runtime().definitions()) snap.registry[name] = def.get();
    return snap;
  }
  bool operator==(const Snapshot&) const = default;
};

Outcome containment() {
  Outcome o;
  const std::vector<std::string> bad = {"Churn", "Deep", "Huge", "Wide", "Tall", "Thrower", "NotAView"};
  std::string text = "(def a ^{:visr true} (widgets.counter/Counter \"{:count 3}\"))\n";
  for (const auto& b : bad) text += "(def " + b + "-x ^{:visr true} (adversarial/" + b + " \"{}\"))\n";
  text += "(def d ^{:visr true} (geometry.core/Diagram \"{}\"))\n";
  text += "(def t ^{:visr true} (adversarial/Trap \"{}\"))\n";
  Session s(test::session_options());
  s.open(text);
  const std::vector<std::string> watched = {"widgets.counter/Counter#0", "geometry.core/Diagram#0"};
  for (const auto& id : watched) o.require(s.find(id) && s.find(id)->live, id + " is not live");
  if (!o.pass) return o;
  Snapshot before = Snapshot::of(s, watched);
  const ViewTree counter_view = s.find(watched[0])->view;

  auto t0 = Clock::now();
  int renders = 0;
  for (int k = 0; k < kAdversarialRenders; ++k, ++renders) {
    std::string id = "adversarial/" + bad[static_cast<std::size_t>(k) % bad.size()] + "#0";
    const ViewTree& v = s.render_instance(id);
    o.require(v == default_view(s.find(id)->instance), id + " did not fall back to the default view");
    bool reported = false;
    for (const auto& d : s.diagnostics()) reported |= d.severity == "error" && s.find(id)->instance.span.contains(d.span);
    o.require(reported, id + " left no diagnostic");
    // the next request on a healthy instance is answered correctly
    o.require(s.render_instance(watched[0]) == counter_view, "counter view changed after " + id);
  }
  double elapsed = seconds_since(t0);

  // misbehaving handlers: runaway loop and an attempted definition
  for (const char* h : {"0.0:click", "0.1:click"}) {
    auto r = s.dispatch_event({"adversarial/Trap#0", h, {}});
    o.require(r.accepted && !r.edit && !r.diagnostics.empty(), std::string("Trap handler ") + h + " was not contained");
  }
  Snapshot after = Snapshot::of(s, watched);
  o.require(after == before, "foreign state changed during adversarial renders");
  for (const auto& d : s.diagnostics()) {
    if (d.message.find("Churn") != std::string::npos || d.message.find("Huge") != std::string::npos) {
      o.require(d.message.find("out of fuel (" + std::to_string(kDefaultRenderFuel) + " steps)") != std::string::npos,
                "fuel diagnostic missing: " + d.message);
    }
  }
  o.require(elapsed < kAdversarialSeconds, "adversarial renders took " + std::to_string(elapsed) + " s");
  std::ostringstream d;
  d << renders << " adversarial renders in " << std::fixed << std::setprecision(2) << elapsed
    << " s; snapshots identical";
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 4. MVC reconciliation

Outcome reconciliation() {
  Outcome o;
  int checked = 0, with_edit = 0;
  for (const auto& entry : test::corpus_entries()) {
    const std::string text = sample_text(entry);
    Session probe(test::session_options());
    probe.open(text);
    for (const auto& inst : probe.instances()) {
      for (const auto& h : handler_ids(inst)) {
        for (bool with_payload : {true, false}) {
          Session s(test::session_options());
          s.open(text);
          const std::string id = inst.instance.instance_id;
          auto r = s.dispatch_event({id, h, with_payload ? payload_for(h) : std::map<std::string, std::string>{}});
          o.require(r.accepted, entry + " " + id + " " + h + " rejected");
          if (r.edit) {
            ++with_edit;
            s.apply_edit(*r.edit);
          }
          const InstanceState* now = s.find(id);
          o.require(now != nullptr, entry + " " + id + " vanished after " + h);
          if (now) {
            o.require(now->view == r.view, entry + " " + id + " " + h + ": re-rendered view differs");
            if (r.edit) {
              Session fresh(test::session_options());
              fresh.open(s.text());
              o.require(fresh.find(id) && fresh.find(id)->view == r.view,
                        entry + " " + id + " " + h + ": fresh session renders differently");
            }
          }
          ++checked;
        }
      }
    }
  }
  o.require(with_edit > 0, "no handler produced an edit");
  o.detail = std::to_string(checked) + " dispatches (" + std::to_string(with_edit) + " with edits) over every corpus handler";
  return o;
}

// ---------------------------------------------------------------------------
// 5. State machines

oracle::Datum to_datum(const Value& v) {
  if (v.is(Value::Kind::String)) return {v.as_string()};
  if (v.is(Value::Kind::Number)) return {v.as_number()};
  return {};
}

Value from_datum(const oracle::Datum& d) {
  if (auto* s = std::get_if<std::string>(&d.v)) return Value::string(*s);
  if (auto* n = std::get_if<double>(&d.v)) return Value::number(*n);
  return {};
}

std::optional<std::string> opt_text(const Value* v) {
  if (!v || v->is_nil()) return std::nullopt;
  return v->as_string();
}

oracle::Machine machine_of(const Value& state) {
  oracle::Machine m;
  for (const auto& s : state.get_keyword("states")->items()) {
    std::string name = s.get_keyword("name")->as_string();
    if (const Value* st = s.get_keyword("start"); st && st->truthy()) m.start = name;
    if (const Value* acc = s.get_keyword("accepting"); acc && acc->truthy()) m.accepting.insert(name);
  }
  for (const auto& t : state.get_keyword("transitions")->items()) {
    oracle::Transition tr;
    tr.from = t.get_keyword("from")->as_string();
    tr.to = t.get_keyword("to")->as_string();
    tr.method = t.get_keyword("method")->as_string();
    if (const Value* args = t.get_keyword("args")) {
      for (const auto& a : args->items()) tr.args.push_back(a.is_nil() ? std::nullopt : std::optional(a.as_string()));
    }
    tr.result = opt_text(t.get_keyword("result"));
    tr.binds = opt_text(t.get_keyword("binds"));
    m.transitions.push_back(tr);
  }
  return m;
}

/// Half the traces are walks through the machine that satisfy every guard
/// and stop in an accepting state; the other half get one random mutation
/// (method, arity, a value or a bound token), which may or may not reject.
std::vector<oracle::Event> random_trace(std::mt19937& rng, const oracle::Machine& m) {
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const std::vector<oracle::Datum> pool = {{std::string("t1")}, {std::string("t2")}, {std::string("/a")},
                                           {1.0}, {7.0}, {}};
  auto random_datum = [&] { return pool[pick(pool.size())]; };

  std::vector<oracle::Event> trace;
  std::size_t length = std::uniform_int_distribution<std::size_t>(0, kMaxTraceLength)(rng);
  std::string state = m.start;
  oracle::Bindings env;
  auto satisfying = [&](const std::optional<std::string>& g) -> oracle::Datum {
    if (!g) return random_datum();
    if (*g == "string?") return {std::string(coin(0.5) ? "t" : "/x") + std::to_string(pick(3))};
    if (*g == "number?") return {static_cast<double>(pick(9))};
    if (g->rfind("(==", 0) == 0) {
      auto it = env.find(oracle::trim(g->substr(3, g->size() - 4)));
      return it == env.end() ? oracle::Datum{} : it->second;
    }
    return random_datum();
  };
  while (trace.size() < static_cast<std::size_t>(kMaxTraceLength)) {
    if (trace.size() >= length && m.accepting.count(state)) break;
    std::vector<const oracle::Transition*> out;
    for (const auto& t : m.transitions) {
      if (t.from == state) out.push_back(&t);
    }
    if (out.empty()) break;
    const oracle::Transition& t = *out[pick(out.size())];
    oracle::Event ev;
    ev.method = t.method;
    for (const auto& g : t.args) ev.args.push_back(satisfying(g));
    ev.result = satisfying(t.result);
    if (t.binds) env[*t.binds] = ev.result;
    state = t.to;
    trace.push_back(std::move(ev));
  }
  if (trace.empty() || coin(0.5)) return trace;

  oracle::Event& ev = trace[pick(trace.size())];
  switch (pick(4)) {
    case 0: ev.method = m.transitions[pick(m.transitions.size())].method; break;
    case 1: ev.args.push_back(random_datum()); break;
    case 2:
      if (!ev.args.empty()) ev.args[pick(ev.args.size())] = random_datum();
      break;
    default: ev.result = random_datum(); break;
  }
  return trace;
}

Value trace_value(const std::vector<oracle::Event>& trace) {
  ValueVec events;
  for (const auto& e : trace) {
    ValueVec args;
    for (const auto& a : e.args) args.push_back(from_datum(a));
    events.push_back(Value::map({{Value::keyword("method"), Value::string(e.method)},
                                 {Value::keyword("args"), Value::vector(std::move(args))},
                                 {Value::keyword("result"), from_datum(e.result)}}));
  }
  return Value::vector(std::move(events));
}

struct Compiled {
  std::unique_ptr<Runtime> runtime;
  Value predicate;
};

Compiled compile_machine(const std::string& instance) {
  Compiled c;
  RuntimeOptions opts;
  opts.search_paths = {test::corpus_lib()};
  c.runtime = std::make_unique<Runtime>(opts);
  auto env = c.runtime->make_env();
  Fuel fuel(kDefaultElaborationFuel);
  EvalContext ctx(fuel, nullptr, c.runtime.get());
  auto forms = Elaborator(*c.runtime, env, ctx).elaborate_program(read_all("(def p " + instance + ")"));
  auto run_env = c.runtime->make_env();
  Fuel rfuel(kDefaultRunFuel);
  EvalContext rctx(rfuel, nullptr, c.runtime.get());
  for (const auto& f : forms) eval(f, run_env, rctx);
  c.predicate = *run_env->lookup("p");
  return c;
}

Outcome state_machines() {
  Outcome o;
  std::mt19937 rng(77);
  std::ostringstream detail;
  for (const std::string entry : {"auth-protocol", "mediaplayer"}) {
    std::string text = sample_text(entry);
    std::vector<Diagnostic> diags;
    auto instances = scan_instances(read_all(text), diags);
    if (instances.size() != 1) {
      o.require(false, entry + ": expected one instance");
      continue;
    }
    Value state = deserialize_state(instances[0].state_text, {});
    oracle::Machine machine = machine_of(state);
    Compiled c = compile_machine(text_slice(text, instances[0].span));
    int agree = 0, accepted = 0, with_binding = 0;
    for (int k = 0; k < kTracesPerMachine; ++k) {
      auto trace = random_trace(rng, machine);
      bool expected = oracle::accepts(machine, trace);
      Fuel fuel(kDefaultRunFuel);
      EvalContext ctx(fuel, nullptr, c.runtime.get());
      Value args[] = {trace_value(trace)};
      bool got = apply(c.predicate, args, ctx).truthy();
      if (got == expected) ++agree;
      o.require(got == expected, entry + ": verdict differs on trace " + print_value(args[0]));
      accepted += expected;
      bool binds = false;
      for (const auto& t : machine.transitions) binds |= t.binds.has_value();
      with_binding += binds && trace.size() > 1;
    }
    o.require(accepted > kTracesPerMachine / 10 && accepted < kTracesPerMachine * 9 / 10,
              entry + ": traces are too one-sided (" + std::to_string(accepted) + " accepted)");
    detail << entry << " " << agree << "/" << kTracesPerMachine << " agree (" << accepted << " accepted); ";
  }

  // guard on the first transition using a variable bound later
  std::string bad =
      "(def p ^{:visr true} (protocol.statemachine/StateMachine \"{:states [{:name \\\"start\\\" :start true} {:name "
      "\\\"good\\\" :accepting true}] :transitions [{:from \\\"start\\\" :to \\\"good\\\" :method \\\"auth\\\" :args "
      "[\\\"(== t)\\\"] :binds \\\"t\\\"}]}\"))";
  SourceSpan instance_span = read_all(bad)[0].items[2].span;
  try {
    RuntimeOptions opts;
    opts.search_paths = {test::corpus_lib()};
    Runtime rt(opts);
    Fuel fuel(kDefaultElaborationFuel);
    EvalContext ctx(fuel, nullptr, &rt);
    Elaborator(rt, rt.make_env(), ctx).elaborate_program(read_all(bad));
    o.require(false, "scope error was not raised");
  } catch (const ElaborationError& e) {
    o.require(e.span() == instance_span, "scope error span is not the instance span");
    o.require(std::string(e.what()).find("not bound") != std::string::npos, "scope error message: " + std::string(e.what()));
    detail << "scope error at [" << e.span().start << "," << e.span().end << ")";
  }
  o.detail = detail.str();
  return o;
}

// ---------------------------------------------------------------------------
// 6. Meta-extension pipeline

Outcome meta_pipeline() {
  Outcome o;
  std::string text = sample_text("formbuilder");
  try {
    std::string out = test::run_text(text);
    o.require(out == test::slurp(test::corpus_dir() / "formbuilder" / "expected.txt"), "pipeline output: " + out);
  } catch (const std::exception& e) {
    o.require(false, std::string("pipeline failed: ") + e.what());
  }
  // a value outside the declared range fails at the generated extension
  std::string bad = text;
  auto at = bad.find(":score 95");
  bad.replace(at, 9, ":score 200");
  SourceSpan generated_instance;
  {
    std::vector<Diagnostic> d;
    for (const auto& i : scan_instances(read_all(bad), d)) {
      if (i.extension_ref.name == "Grade" && i.state_text.find("200") != std::string::npos) generated_instance = i.span;
    }
  }
  try {
    test::run_text(bad);
    o.require(false, "constraint violation was not reported");
  } catch (const ElaborationError& e) {
    o.require(e.phase() == ElaborationPhase::ElaborateRun, "wrong phase " + std::string(to_string(e.phase())));
    o.require(e.span() == generated_instance, "error is not at the generated extension's instance");
    o.require(std::string(e.what()).find("grades/Grade") != std::string::npos, std::string("message: ") + e.what());
    o.detail = "dictionary produced; violation reported as: " + std::string(e.what());
  }
  return o;
}

// ---------------------------------------------------------------------------
// 7. Bezier

std::vector<std::array<double, 2>> de_casteljau(std::array<double, 2> a, std::array<double, 2> b,
                                                std::array<double, 2> c, int depth) {
  std::vector<std::array<double, 2>> out;
  int n = 1 << depth;
  for (int k = 0; k <= n; ++k) {
    double t = static_cast<double>(k) / n;
    std::array<double, 2> p{};
    for (int i = 0; i < 2; ++i) {
      double ab = a[i] + t * (b[i] - a[i]);
      double bc = b[i] + t * (c[i] - b[i]);
      p[i] = ab + t * (bc - ab);
    }
    out.push_back(p);
  }
  return out;
}

Outcome bezier() {
  Outcome o;
  std::string text = sample_text("bezier");
  // definitions only: drop the final printing form
  auto cut = text.rfind("(reduce");
  std::string defs = text.substr(0, cut);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> coord(-100, 100);
  std::string calls;
  std::vector<std::vector<std::array<double, 2>>> expected;
  auto fmt = [](double d) { return format_number(d); };
  for (int k = 0; k < kBezierTriangles; ++k) {
    std::array<double, 2> a{coord(rng), coord(rng)}, b{coord(rng), coord(rng)}, c{coord(rng), coord(rng)};
    if (k == 0) a = {0, 0}, b = {1, 3}, c = {4, 1};
    expected.push_back(de_casteljau(a, b, c, 3));
    calls += "(println (bezier-points [" + fmt(a[0]) + " " + fmt(a[1]) + "] [" + fmt(b[0]) + " " + fmt(b[1]) + "] [" +
             fmt(c[0]) + " " + fmt(c[1]) + "] 3))\n";
  }
  std::string out;
  try {
    out = test::run_text(defs + calls);
  } catch (const std::exception& e) {
    o.require(false, std::string("bezier program failed: ") + e.what());
    return o;
  }
  std::istringstream lines(out);
  std::string line;
  double worst = 0;
  for (int k = 0; k < kBezierTriangles && std::getline(lines, line); ++k) {
    Value pts = form_to_value(read_one(line));
    o.require(pts.items().size() == expected[static_cast<std::size_t>(k)].size(), "wrong point count: " + line);
    for (std::size_t i = 0; i < std::min(pts.items().size(), expected[static_cast<std::size_t>(k)].size()); ++i) {
      for (std::size_t d = 0; d < 2; ++d) {
        double err = std::fabs(pts.items()[i].items()[d].as_number() - expected[static_cast<std::size_t>(k)][i][d]);
        worst = std::max(worst, err);
      }
    }
  }
  o.require(worst <= kBezierTolerance, "max deviation " + std::to_string(worst));
  auto sample = test::run_cli({"--path", test::corpus_lib().string(), "run",
                               (test::corpus_dir() / "bezier" / "sample.mls").string()});
  o.require(sample.code == 0, "bezier sample did not run");
  std::ostringstream d;
  d << kBezierTriangles << " triangles at depth 3, max deviation " << std::scientific << std::setprecision(1) << worst;
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 8. Workflow

Outcome workflow() {
  Outcome o;
  int pasted = 0, searched = 0, formatted = 0;
  for (const auto& entry : test::corpus_entries()) {
    std::string text = sample_text(entry);
    Session source(test::session_options());
    source.open(text);
    std::string meta_prefix;
    for (const auto& i : source.instances()) {
      if (i.instance.extension_ref.name == "FormBuilder") meta_prefix += text_slice(text, i.instance.span) + "\n";
    }
    for (const auto& i : source.instances()) {
      // copy the instance text into an unrelated buffer
      std::string copied = text_slice(text, i.instance.span);
      Session target(test::session_options());
      target.open(meta_prefix + "(def pasted [1 2 " + copied + "])\n");
      const InstanceState* p = nullptr;
      for (const auto& t : target.instances()) {
        if (t.instance.extension_ref == i.instance.extension_ref && t.instance.state_text == i.instance.state_text &&
            text_slice(target.text(), t.instance.span) == copied) {
          p = &t;
        }
      }
      o.require(p && p->live && p->view == i.view, entry + ": pasted " + i.instance.instance_id + " is not live");
      ++pasted;

      // plain-text search on the saved file
      std::string ref = i.instance.extension_ref.str();
      o.require(text.find(ref) != std::string::npos, entry + ": reference not found by search");
      o.require(text.find(quote_string(i.instance.state_text)) != std::string::npos,
                entry + ": state not found by search");
      ++searched;
    }
    // after a GUI edit the new state is what a search finds
    for (const auto& i : source.instances()) {
      if (!i.live || i.handlers.empty()) continue;
      auto ids = handler_ids(i);
      auto r = source.dispatch_event({i.instance.instance_id, ids.front(), payload_for(ids.front())});
      if (r.edit) {
        source.apply_edit(*r.edit);
        fs::path saved = write_temp(entry + "-grep", source.text());
        std::string cmd = "grep -F -q -- " + std::string("'") + i.instance.extension_ref.name + "' " + saved.string();
        o.require(std::system(cmd.c_str()) == 0, entry + ": grep missed the reference");
        o.require(test::slurp(saved).find(r.edit->replacement) != std::string::npos, entry + ": edit not in file");
        fs::remove(saved);
      }
      break;
    }
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(test::corpus_dir())) {
    if (e.path().extension() == ".mls") files.push_back(e.path());
  }
  for (const auto& f : files) {
    auto once = test::run_cli({"fmt", f.string()});
    fs::path tmp = write_temp("fmt-" + f.stem().string(), once.out);
    auto twice = test::run_cli({"fmt", tmp.string()});
    o.require(once.code == 0 && twice.out == once.out, f.string() + ": fmt is not idempotent");
    ++formatted;
    fs::remove(tmp);
  }
  o.detail = std::to_string(pasted) + " instances pasted live, " + std::to_string(searched) + " found by search, " +
             std::to_string(formatted) + " files fmt-idempotent";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "state round trip", round_trip},
      {2, "backwards compatibility", backwards_compatibility},
      {3, "containment", containment},
      {4, "MVC reconciliation", reconciliation},
      {5, "state-machine oracle equivalence", state_machines},
      {6, "meta-extension pipeline", meta_pipeline},
      {7, "Bezier reproduction", bezier},
      {8, "workflow properties", workflow},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.problems.push_back(std::string("unexpected exception: ") + e.what());
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.number << "] " << c.name;
    if (!o.detail.empty()) std::cout << ": " << o.detail;
    std::cout << '\n';
    for (const auto& p : o.problems) std::cout << "    " << p << '\n';
    std::cout.flush();
    failures += o.pass ? 0 : 1;
  }
  return failures;
}
