#include "mls/reader.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <utility>

namespace mls {

namespace {

bool is_whitespace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',' || c == '\f' || c == '\v';
}

bool is_delimiter(char c) {
  return is_whitespace(c) || c == '(' || c == ')' || c == '[' || c == ']' || c == '{' ||
         c == '}' || c == '"' || c == ';' || c == '^';
}

bool is_symbol_char(char c) {
  auto u = static_cast<unsigned char>(c);
  if (u >= 0x80) return true;  // UTF-8 continuation or lead byte
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) return true;
  switch (c) {
    case '*': case '+': case '!': case '-': case '_': case '\'': case '?':
    case '<': case '>': case '=': case '/': case '.': case '%': case '&':
    case '$': case '|':
      return true;
    default:
      return false;
  }
}

void append_utf8(std::string& out, unsigned cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {
    if (text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
  }

  /// Returns false at end of input.
  bool next_top_level(Form& out) {
    skip_trivia();
    if (at_end()) return false;
    if (is_closer(peek())) {
      throw ReadError(pos_, std::string("unexpected '") + peek() + "'");
    }
    out = read_form(0);
    return true;
  }

 private:
  static bool is_closer(char c) { return c == ')' || c == ']' || c == '}'; }

  [[nodiscard]] bool at_end() const { return pos_ >= text_.size(); }
  [[nodiscard]] char peek() const { return text_[pos_]; }

  void skip_trivia() {
    while (!at_end()) {
      char c = peek();
      if (is_whitespace(c)) {
        ++pos_;
      } else if (c == ';') {
        while (!at_end() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Form read_form(std::size_t depth) {
    if (depth > kMaxReadDepth) throw ReadError(pos_, "nesting too deep");
    skip_trivia();
    if (at_end()) throw ReadError(pos_, "unexpected end of input");
    std::size_t start = pos_;
    char c = peek();
    switch (c) {
      case '(': return read_sequence(FormKind::List, ')', depth);
      case '[': return read_sequence(FormKind::Vector, ']', depth);
      case '{': return read_map(depth);
      case '"': return read_string();
      case '^': return read_with_meta(depth);
      case ')': case ']': case '}':
        throw ReadError(start, std::string("unexpected '") + c + "'");
      default: return read_atom();
    }
  }

  Form read_sequence(FormKind kind, char closer, std::size_t depth) {
    std::size_t start = pos_++;
    std::vector<Form> items;
    for (;;) {
      skip_trivia();
      if (at_end()) throw ReadError(pos_, std::string("expected '") + closer + "' before end of input");
      char c = peek();
      if (c == closer) {
        ++pos_;
        break;
      }
      if (is_closer(c)) {
        throw ReadError(pos_, std::string("mismatched '") + c + "', expected '" + closer + "'");
      }
      items.push_back(read_form(depth + 1));
    }
    Form f;
    f.kind = kind;
    f.items = std::move(items);
    f.span = {start, pos_};
    return f;
  }

  Form read_map(std::size_t depth) {
    Form f = read_sequence(FormKind::Map, '}', depth);
    if (f.items.size() % 2 != 0) {
      throw ReadError(f.items.back().span.start, "map literal must contain an even number of forms");
    }
    for (std::size_t i = 0; i < f.items.size(); i += 2) {
      for (std::size_t j = 0; j < i; j += 2) {
        if (structurally_equal(f.items[i], f.items[j])) {
          throw ReadError(f.items[i].span.start, "duplicate key in map literal");
        }
      }
    }
    return f;
  }

  Form read_string() {
    std::size_t start = pos_++;
    std::string value;
    for (;;) {
      if (at_end()) throw ReadError(pos_, "unterminated string literal");
      char c = text_[pos_];
      if (c == '"') {
        ++pos_;
        break;
      }
      if (c != '\\') {
        value.push_back(c);
        ++pos_;
        continue;
      }
      std::size_t escape_at = pos_++;
      if (at_end()) throw ReadError(pos_, "unterminated string literal");
      char e = text_[pos_++];
      switch (e) {
        case 'n': value.push_back('\n'); break;
        case 't': value.push_back('\t'); break;
        case 'r': value.push_back('\r'); break;
        case '"': value.push_back('"'); break;
        case '\\': value.push_back('\\'); break;
        case 'u': {
          if (pos_ + 4 > text_.size()) throw ReadError(escape_at, "bad unicode escape");
          unsigned cp = 0;
          auto digits = text_.substr(pos_, 4);
          auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + 4, cp, 16);
          if (ec != std::errc() || ptr != digits.data() + 4 || (cp >= 0xD800 && cp <= 0xDFFF)) {
            throw ReadError(escape_at, "bad unicode escape");
          }
          append_utf8(value, cp);
          pos_ += 4;
          break;
        }
        default:
          throw ReadError(escape_at, std::string("bad escape '\\") + e + "'");
      }
    }
    return Form::string_of(std::move(value), {start, pos_});
  }

  Form read_with_meta(std::size_t depth) {
    std::size_t start = pos_++;
    skip_trivia();
    if (at_end() || is_closer(peek())) throw ReadError(start, "dangling metadata prefix");
    Form meta_form = read_form(depth + 1);
    std::vector<Form> entries;
    if (meta_form.kind == FormKind::Keyword) {
      entries.push_back(meta_form);
      entries.push_back(Form::boolean_of(true, meta_form.span));
    } else if (meta_form.kind == FormKind::Map) {
      entries = std::move(meta_form.items);
      for (std::size_t i = 0; i < entries.size(); i += 2) {
        if (entries[i].kind != FormKind::Keyword) {
          throw ReadError(entries[i].span.start, "metadata keys must be keywords");
        }
      }
    } else {
      throw ReadError(meta_form.span.start, "metadata must be a keyword or a map");
    }
    skip_trivia();
    if (at_end() || is_closer(peek())) throw ReadError(start, "dangling metadata prefix");
    Form target = read_form(depth + 1);
    // Outer prefix entries override inner ones with the same key.
    for (std::size_t i = 0; i < entries.size(); i += 2) {
      bool replaced = false;
      for (std::size_t j = 0; j < target.meta.size(); j += 2) {
        if (structurally_equal(target.meta[j], entries[i])) {
          target.meta[j + 1] = entries[i + 1];
          replaced = true;
          break;
        }
      }
      if (!replaced) {
        target.meta.push_back(entries[i]);
        target.meta.push_back(entries[i + 1]);
      }
    }
    target.span.start = start;
    return target;
  }

  Form read_atom() {
    std::size_t start = pos_;
    while (!at_end() && !is_delimiter(peek())) ++pos_;
    std::string_view tok = text_.substr(start, pos_ - start);
    SourceSpan span{start, pos_};
    if (tok == "nil") return Form::nil(span);
    if (tok == "true") return Form::boolean_of(true, span);
    if (tok == "false") return Form::boolean_of(false, span);
    if (tok == "##NaN") return Form::number_of(std::numeric_limits<double>::quiet_NaN(), span);
    if (tok == "##Inf") return Form::number_of(std::numeric_limits<double>::infinity(), span);
    if (tok == "##-Inf") return Form::number_of(-std::numeric_limits<double>::infinity(), span);

    char first = tok[0];
    bool signed_digit = (first == '+' || first == '-') && tok.size() > 1 &&
                        (tok[1] >= '0' && tok[1] <= '9');
    if ((first >= '0' && first <= '9') || signed_digit) {
      std::string_view digits = first == '+' ? tok.substr(1) : tok;
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      if (ec == std::errc::result_out_of_range) {
        throw ReadError(start, "number out of range: " + std::string(tok));
      }
      if (ec != std::errc() || ptr != digits.data() + digits.size()) {
        throw ReadError(start, "invalid number: " + std::string(tok));
      }
      return Form::number_of(value, span);
    }

    bool keyword = first == ':';
    std::string_view body = keyword ? tok.substr(1) : tok;
    if (body.empty()) throw ReadError(start, "empty keyword");
    if (body[0] == ':') throw ReadError(start, "auto-resolved keywords are not supported");
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (!is_symbol_char(body[i])) {
        throw ReadError(start + (keyword ? 1 : 0) + i,
                        std::string("invalid character '") + body[i] + "' in token");
      }
    }
    if (!keyword && body[0] == '\'') throw ReadError(start, "quote shorthand is not supported; use (quote ...)");
    auto name = QualifiedName::parse(body);
    return keyword ? Form::keyword(std::move(name), span) : Form::symbol(std::move(name), span);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void print_into(std::string& out, const Form& form);

void print_flat_entries(std::string& out, const std::vector<Form>& flat) {
  std::vector<std::pair<std::string, std::string>> entries;
  entries.reserve(flat.size() / 2);
  for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
    entries.emplace_back(print_form(flat[i]), print_form(flat[i + 1]));
  }
  std::sort(entries.begin(), entries.end());
  out.push_back('{');
  bool first = true;
  for (const auto& [k, v] : entries) {
    if (!first) out.push_back(' ');
    first = false;
    out += k;
    out.push_back(' ');
    out += v;
  }
  out.push_back('}');
}

void print_into(std::string& out, const Form& form) {
  if (!form.meta.empty()) {
    out.push_back('^');
    print_flat_entries(out, form.meta);
    out.push_back(' ');
  }
  switch (form.kind) {
    case FormKind::Nil: out += "nil"; break;
    case FormKind::Boolean: out += form.boolean ? "true" : "false"; break;
    case FormKind::Number: out += format_number(form.number); break;
    case FormKind::String: out += quote_string(form.text); break;
    case FormKind::Symbol: out += form.name.str(); break;
    case FormKind::Keyword:
      out.push_back(':');
      out += form.name.str();
      break;
    case FormKind::List:
    case FormKind::Vector: {
      bool list = form.kind == FormKind::List;
      out.push_back(list ? '(' : '[');
      for (std::size_t i = 0; i < form.items.size(); ++i) {
        if (i) out.push_back(' ');
        print_into(out, form.items[i]);
      }
      out.push_back(list ? ')' : ']');
      break;
    }
    case FormKind::Map: print_flat_entries(out, form.items); break;
  }
}

}  // namespace

std::vector<Form> read_all(std::string_view text) {
  Reader reader(text);
  std::vector<Form> forms;
  Form f;
  while (reader.next_top_level(f)) forms.push_back(std::move(f));
  return forms;
}

PartialRead read_prefix(std::string_view text) {
  PartialRead result;
  Reader reader(text);
  try {
    Form f;
    while (reader.next_top_level(f)) result.forms.push_back(std::move(f));
  } catch (const ReadError& e) {
    result.error = e;
  }
  return result;
}

Form read_one(std::string_view text) {
  auto forms = read_all(text);
  if (forms.size() != 1) {
    throw ReadError(forms.empty() ? text.size() : forms[1].span.start,
                    "expected exactly one form, found " + std::to_string(forms.size()));
  }
  return std::move(forms.front());
}

bool is_readable_name(std::string_view text, bool keyword) {
  if (text.empty()) return false;
  if (keyword) return text[0] != ':' && std::all_of(text.begin(), text.end(), is_symbol_char);
  if (text == "nil" || text == "true" || text == "false") return false;
  if (text[0] == ':' || text[0] == '\'' || text[0] == '#') return false;
  if (text[0] >= '0' && text[0] <= '9') return false;
  if ((text[0] == '+' || text[0] == '-') && text.size() > 1 && text[1] >= '0' && text[1] <= '9') return false;
  return std::all_of(text.begin(), text.end(), is_symbol_char);
}

std::string format_number(double d) {
  if (std::isnan(d)) return "##NaN";
  if (std::isinf(d)) return d > 0 ? "##Inf" : "##-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, ptr);
}

std::string quote_string(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          static constexpr char kHex[] = "0123456789abcdef";
          out += "\\u00";
          out.push_back(kHex[(c >> 4) & 0xF]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
  return out;
}

std::string print_form(const Form& form) {
  std::string out;
  print_into(out, form);
  return out;
}

std::string print_program(const std::vector<Form>& forms) {
  std::string out;
  for (std::size_t i = 0; i < forms.size(); ++i) {
    if (i) out += "\n";
    out += print_form(forms[i]);
    out += "\n";
  }
  return out;
}

}  // namespace mls
