#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mls/form.hpp"

namespace mls {

class ReadError : public std::runtime_error {
 public:
  ReadError(std::size_t offset, const std::string& message)
      : std::runtime_error(message), offset_(offset) {}
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Nesting deeper than this is rejected by the reader.
inline constexpr std::size_t kMaxReadDepth = 1024;

/// Reads every top-level form. Throws ReadError on the first malformed form.
std::vector<Form> read_all(std::string_view text);

/// Like read_all, but keeps the complete top-level forms that precede a read
/// error instead of throwing.
struct PartialRead {
  std::vector<Form> forms;
  std::optional<ReadError> error;
};
PartialRead read_prefix(std::string_view text);

/// Reads text that must contain exactly one form.
Form read_one(std::string_view text);

/// Canonical single-line text: sorted map keys, shortest round-trip numbers,
/// metadata as a `^{...} ` prefix.
std::string print_form(const Form& form);

/// Top-level forms joined by blank lines, with a trailing newline.
std::string print_program(const std::vector<Form>& forms);

/// Quotes and escapes `s` as a string literal.
std::string quote_string(std::string_view s);

/// True when `text` reads back as a single symbol (or keyword body) with
/// the same name, i.e. it is safe to print unquoted.
bool is_readable_name(std::string_view text, bool keyword = false);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double d);

}  // namespace mls
