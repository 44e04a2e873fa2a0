#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mls/form.hpp"
#include "mls/session.hpp"
#include "mls/value.hpp"

namespace mls::test {

std::filesystem::path source_dir();
std::filesystem::path corpus_dir();
std::filesystem::path corpus_lib();
std::filesystem::path data_dir();
std::filesystem::path mls_binary();

std::string slurp(const std::filesystem::path& p);

/// Corpus entry directory names, sorted.
std::vector<std::string> corpus_entries();

/// Session options with the corpus library and test data on the path.
SessionOptions session_options();

/// Elaborates and evaluates `text` in-process; returns what it printed.
/// Throws whatever the pipeline throws.
std::string run_text(const std::string& text, std::uint64_t fuel = 10'000'000);

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

/// Runs the mls binary with `args` (already split), stdin from /dev/null.
CliResult run_cli(const std::vector<std::string>& args);

/// Random syntax trees covering every form kind, metadata included.
Form random_form(std::mt19937& rng, int depth = 3);

/// Random member of the serializable value subset.
Value random_value(std::mt19937& rng, int depth = 3);

/// Random state map: every schema field plus sometimes an extra one.
Value random_state(std::mt19937& rng, const std::vector<std::string>& fields);

}  // namespace mls::test
