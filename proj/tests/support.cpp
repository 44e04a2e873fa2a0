#include "support.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mls/elaborator.hpp"
#include "mls/reader.hpp"
#include "mls/runtime.hpp"

namespace mls::test {

namespace fs = std::filesystem;

fs::path source_dir() { return MLS_SOURCE_DIR; }
fs::path corpus_dir() { return source_dir() / "corpus"; }
fs::path corpus_lib() { return corpus_dir() / "lib"; }
fs::path data_dir() { return source_dir() / "tests" / "data"; }
fs::path mls_binary() { return MLS_BINARY; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> corpus_entries() {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(corpus_dir())) {
    if (e.is_directory() && fs::exists(e.path() / "sample.mls")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

SessionOptions session_options() {
  SessionOptions o;
  o.search_paths = {corpus_lib(), data_dir()};
  return o;
}

std::string run_text(const std::string& text, std::uint64_t fuel) {
  RuntimeOptions opts;
  opts.search_paths = {corpus_lib(), data_dir()};
  Runtime runtime(opts);
  auto compile_env = runtime.make_env();
  Fuel efuel(kDefaultElaborationFuel);
  EvalContext ectx(efuel, nullptr, &runtime);
  auto forms = Elaborator(runtime, compile_env, ectx).elaborate_program(read_all(text));
  auto env = runtime.make_env(Runtime::namespace_of(compile_env));
  std::ostringstream out;
  Fuel rfuel(fuel);
  EvalContext ctx(rfuel, &out, &runtime);
  for (const auto& f : forms) eval(f, env, ctx);
  return out.str();
}

CliResult run_cli(const std::vector<std::string>& args) {
  char out_name[] = "/tmp/mls-out-XXXXXX";
  char err_name[] = "/tmp/mls-err-XXXXXX";
  int out_fd = ::mkstemp(out_name);
  int err_fd = ::mkstemp(err_name);
  CliResult r;
  pid_t pid = ::fork();
  if (pid == 0) {
    ::dup2(out_fd, 1);
    ::dup2(err_fd, 2);
    int null_fd = ::open("/dev/null", O_RDONLY);
    ::dup2(null_fd, 0);
    std::vector<std::string> full{mls_binary().string()};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : full) argv.push_back(a.data());
    argv.push_back(nullptr);
    ::execv(argv[0], argv.data());
    ::_exit(127);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  ::close(out_fd);
  ::close(err_fd);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_name);
  r.err = slurp(err_name);
  fs::remove(out_name);
  fs::remove(err_name);
  return r;
}

namespace {

int pick(std::mt19937& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

std::string random_name(std::mt19937& rng) {
  static const std::string first = "abcdefghijklmnopqrstuvwxyzABCXYZ*+!-_?<>=";
  static const std::string rest = "abcdefghijklmnopqrstuvwxyz0123456789*+!-_?<>=.";
  for (;;) {
    std::string s(1, first[static_cast<std::size_t>(pick(rng, static_cast<int>(first.size())))]);
    int len = pick(rng, 6);
    for (int i = 0; i < len; ++i) s += rest[static_cast<std::size_t>(pick(rng, static_cast<int>(rest.size())))];
    if (is_readable_name(s)) return s;
  }
}

QualifiedName random_qname(std::mt19937& rng) {
  QualifiedName n;
  if (pick(rng, 4) == 0) n.ns = random_name(rng) + "." + random_name(rng);
  n.name = random_name(rng);
  if (!is_readable_name(n.str())) return {"", "x"};
  return n;
}

std::string random_text(std::mt19937& rng) {
  static const std::vector<std::string> pieces = {"a", "Z", " ", "\n", "\t", "\"", "\\", "{", ")", ";", "^",
                                                  "é", "λ", "→", "0", ":k", "\r"};
  std::string s;
  int len = pick(rng, 8);
  for (int i = 0; i < len; ++i) s += pieces[static_cast<std::size_t>(pick(rng, static_cast<int>(pieces.size())))];
  return s;
}

double random_number(std::mt19937& rng) {
  switch (pick(rng, 4)) {
    case 0: return pick(rng, 2001) - 1000;
    case 1: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    case 2: return std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng), pick(rng, 200) - 100);
    default: return pick(rng, 100) / 8.0;
  }
}

template <typename T, typename Gen, typename Eq>
std::vector<T> distinct_keys(std::mt19937& rng, int n, Gen gen, Eq eq) {
  std::vector<T> keys;
  for (int i = 0; i < n; ++i) {
    T k = gen(rng);
    bool dup = std::any_of(keys.begin(), keys.end(), [&](const T& o) { return eq(o, k); });
    if (!dup) keys.push_back(std::move(k));
  }
  return keys;
}

Form random_atom(std::mt19937& rng) {
  switch (pick(rng, 7)) {
    case 0: return Form::nil();
    case 1: return Form::boolean_of(pick(rng, 2) == 1);
    case 2: return Form::number_of(random_number(rng));
    case 3: return Form::string_of(random_text(rng));
    case 4: return Form::symbol(random_qname(rng));
    case 5: return Form::keyword(random_qname(rng));
    default: return Form::number_of(pick(rng, 10));
  }
}

}  // namespace

Form random_form(std::mt19937& rng, int depth) {
  Form f;
  if (depth <= 0 || pick(rng, 3) == 0) {
    f = random_atom(rng);
  } else {
    int n = pick(rng, 5);
    switch (pick(rng, 3)) {
      case 0:
      case 1: {
        std::vector<Form> items;
        for (int i = 0; i < n; ++i) items.push_back(random_form(rng, depth - 1));
        f = pick(rng, 2) ? Form::list(std::move(items)) : Form::vector(std::move(items));
        break;
      }
      default: {
        auto keys = distinct_keys<Form>(
            rng, n, [&](std::mt19937& r) { return random_form(r, depth - 2); },
            [](const Form& a, const Form& b) { return structurally_equal(a, b); });
        std::vector<Form> flat;
        for (auto& k : keys) {
          flat.push_back(std::move(k));
          flat.push_back(random_form(rng, depth - 1));
        }
        f = Form::map(std::move(flat));
      }
    }
  }
  if (pick(rng, 6) == 0) {
    auto keys = distinct_keys<QualifiedName>(
        rng, 1 + pick(rng, 2), [](std::mt19937& r) { return random_qname(r); },
        [](const QualifiedName& a, const QualifiedName& b) { return a == b; });
    for (auto& k : keys) {
      f.meta.push_back(Form::keyword(k));
      f.meta.push_back(random_form(rng, 1));
    }
  }
  return f;
}

Value random_value(std::mt19937& rng, int depth) {
  if (depth <= 0 || pick(rng, 3) == 0) {
    switch (pick(rng, 5)) {
      case 0: return Value{};
      case 1: return Value::boolean(pick(rng, 2) == 1);
      case 2: return Value::number(random_number(rng));
      case 3: return Value::string(random_text(rng));
      default: return Value::keyword(random_qname(rng));
    }
  }
  int n = pick(rng, 4);
  switch (pick(rng, 3)) {
    case 0: {
      ValueVec items;
      for (int i = 0; i < n; ++i) items.push_back(random_value(rng, depth - 1));
      return Value::vector(std::move(items));
    }
    case 1: {
      ValueVec items;
      for (int i = 0; i < n; ++i) items.push_back(random_value(rng, depth - 1));
      return Value::list(std::move(items));
    }
    default: {
      auto keys = distinct_keys<Value>(
          rng, n, [&](std::mt19937& r) { return random_value(r, depth - 2); },
          [](const Value& a, const Value& b) { return a == b; });
      ValuePairs entries;
      for (auto& k : keys) entries.emplace_back(std::move(k), random_value(rng, depth - 1));
      return Value::map(std::move(entries));
    }
  }
}

Value random_state(std::mt19937& rng, const std::vector<std::string>& fields) {
  ValuePairs entries;
  for (const auto& f : fields) entries.emplace_back(Value::keyword(QualifiedName{"", f}), random_value(rng, 3));
  if (pick(rng, 4) == 0) entries.emplace_back(Value::keyword(QualifiedName{"", "extra-field"}), random_value(rng, 2));
  return Value::map(std::move(entries));
}

}  // namespace mls::test
