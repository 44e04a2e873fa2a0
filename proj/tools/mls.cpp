// mls: run, expand, check, format and serve hybrid programs.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mls/elaborator.hpp"
#include "mls/protocol.hpp"
#include "mls/reader.hpp"
#include "mls/runtime.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitProgramError = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::vector<std::string> paths;
  std::uint64_t fuel = 0;  // 0: defaults

  [[nodiscard]] std::vector<std::filesystem::path> search_paths() const {
    std::vector<std::filesystem::path> out(paths.begin(), paths.end());
    if (out.empty()) out.emplace_back(".");
    return out;
  }
  [[nodiscard]] std::uint64_t budget(std::uint64_t fallback) const {
    return fuel ? fuel : mls::fuel_from_env(fallback);
  }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string location(const std::string& file, const std::string& text, mls::SourceSpan span) {
  auto lc = mls::line_col(text, span.start);
  return file + ":" + std::to_string(lc.line) + ":" + std::to_string(lc.column);
}

struct Loaded {
  std::string text;
  std::vector<mls::Form> forms;
};

std::optional<Loaded> load(const std::string& file) {
  Loaded l{slurp(file), {}};
  try {
    l.forms = mls::read_all(l.text);
  } catch (const mls::ReadError& e) {
    std::cerr << location(file, l.text, {e.offset(), e.offset()}) << ": error [read]: " << e.what() << '\n';
    return std::nullopt;
  }
  return l;
}

void report(const std::string& file, const std::string& text, const mls::ElaborationError& e) {
  std::cerr << location(file, text, e.span()) << ": error [" << mls::to_string(e.phase()) << "]: " << e.what()
            << '\n';
}

struct Elaborated {
  std::unique_ptr<mls::Runtime> runtime;
  std::vector<mls::Form> forms;
  std::string ns;
};

std::optional<Elaborated> elaborate(const Globals& g, const std::string& file, const Loaded& l) {
  mls::RuntimeOptions opts;
  opts.search_paths = g.search_paths();
  opts.module_fuel = g.budget(mls::kDefaultElaborationFuel);
  opts.out = &std::cout;
  Elaborated out;
  out.runtime = std::make_unique<mls::Runtime>(opts);
  auto env = out.runtime->make_env();
  mls::Fuel fuel(g.budget(mls::kDefaultElaborationFuel));
  mls::EvalContext ctx(fuel, nullptr, out.runtime.get());
  try {
    out.forms = mls::Elaborator(*out.runtime, env, ctx).elaborate_program(l.forms);
  } catch (const mls::ElaborationError& e) {
    report(file, l.text, e);
    return std::nullopt;
  }
  out.ns = mls::Runtime::namespace_of(env);
  return out;
}

int cmd_run(const Globals& g, const std::string& file) {
  auto l = load(file);
  if (!l) return kExitProgramError;
  auto e = elaborate(g, file, *l);
  if (!e) return kExitProgramError;
  auto env = e->runtime->make_env(e->ns);
  mls::Fuel fuel(g.budget(mls::kDefaultRunFuel));
  mls::EvalContext ctx(fuel, &std::cout, e->runtime.get());
  try {
    for (const auto& f : e->forms) mls::eval(f, env, ctx);
  } catch (const mls::RuntimeError& err) {
    std::cout.flush();
    std::cerr << location(file, l->text, err.span()) << ": error: " << err.what() << '\n';
    const auto& chain = err.call_chain();
    for (std::size_t i = 0; i < chain.size();) {
      std::size_t j = i;
      while (j < chain.size() && chain[j] == chain[i]) ++j;
      std::cerr << "  called from " << location(file, l->text, chain[i]);
      if (j - i > 1) std::cerr << " (" << j - i << " times)";
      std::cerr << '\n';
      i = j;
    }
    return kExitProgramError;
  } catch (const mls::ElaborationError& err) {
    std::cout.flush();
    report(file, l->text, err);
    return kExitProgramError;
  } catch (const mls::FuelExhausted&) {
    std::cout.flush();
    std::cerr << file << ": error: program ran out of fuel\n";
    return kExitProgramError;
  }
  return kExitOk;
}

int cmd_expand(const Globals& g, const std::string& file) {
  auto l = load(file);
  if (!l) return kExitProgramError;
  auto e = elaborate(g, file, *l);
  if (!e) return kExitProgramError;
  std::cout << mls::print_program(e->forms);
  return kExitOk;
}

int cmd_check(const Globals& g, const std::string& file) {
  auto l = load(file);
  if (!l) return kExitProgramError;
  mls::RuntimeOptions opts;
  opts.search_paths = g.search_paths();
  opts.module_fuel = g.budget(mls::kDefaultElaborationFuel);
  mls::Runtime runtime(opts);
  auto env = runtime.make_env();
  mls::Fuel fuel(g.budget(mls::kDefaultElaborationFuel));
  mls::EvalContext ctx(fuel, nullptr, &runtime);
  std::vector<mls::ElaborationError> errors;
  mls::Elaborator(runtime, env, ctx).elaborate_tolerant(l->forms, errors);
  for (const auto& err : errors) report(file, l->text, err);
  return errors.empty() ? kExitOk : kExitProgramError;
}

int cmd_fmt(const std::string& file, bool write) {
  auto l = load(file);
  if (!l) return kExitProgramError;
  std::string text = mls::print_program(l->forms);
  if (write) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << text;
    return out ? kExitOk : kExitProgramError;
  }
  std::cout << text;
  return kExitOk;
}

int cmd_serve(const Globals& g, bool stdio, const std::string& listen) {
  mls::SessionOptions opts;
  opts.search_paths = g.search_paths();
  opts.render_fuel = g.budget(mls::kDefaultRenderFuel);
  opts.elaboration_fuel = g.budget(mls::kDefaultElaborationFuel);
  if (stdio == !listen.empty()) throw UsageError("serve needs exactly one of --stdio or --listen ADDR");
  if (stdio) {
    mls::serve_stream(std::cin, std::cout, opts);
    return kExitOk;
  }
  std::string host = "127.0.0.1";
  std::string port_text = listen;
  if (auto colon = listen.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = listen.substr(0, colon);
    port_text = listen.substr(colon + 1);
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size() || port < 0 || port > 65535) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw UsageError("invalid listen address " + listen);
  }
  return mls::serve_tcp(host, port, opts, nullptr, [](int bound) {
    std::cerr << "listening on port " << bound << std::endl;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid S-expression language: run, expand, check, format and serve programs"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--path", g.paths, "Module search directory (repeatable, default .)")->allow_extra_args(false);
  app.add_option("--fuel", g.fuel, "Step budget for each evaluation (overrides VISR_FUEL)")->check(CLI::PositiveNumber);

  std::string file;
  bool write = false;
  bool stdio = false;
  std::string listen;
  auto* run = app.add_subcommand("run", "Elaborate then evaluate a program");
  run->add_option("file", file)->required();
  auto* expand = app.add_subcommand("expand", "Print the elaborated program as canonical text");
  expand->add_option("file", file)->required();
  auto* check = app.add_subcommand("check", "Elaborate only and report diagnostics");
  check->add_option("file", file)->required();
  auto* fmt = app.add_subcommand("fmt", "Reprint a file canonically");
  fmt->add_option("file", file)->required();
  fmt->add_flag("-w,--write", write, "Rewrite the file in place");
  auto* serve = app.add_subcommand("serve", "Speak the editor protocol");
  serve->add_flag("--stdio", stdio, "Use standard input and output");
  serve->add_option("--listen", listen, "Listen on HOST:PORT");
  for (auto* sub : {run, expand, check, fmt, serve}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(g, file);
    if (*expand) return cmd_expand(g, file);
    if (*check) return cmd_check(g, file);
    if (*fmt) return cmd_fmt(file, write);
    if (*serve) return cmd_serve(g, stdio, listen);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
