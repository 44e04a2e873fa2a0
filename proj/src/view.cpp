#include "mls/view.hpp"

#include <algorithm>
#include <array>

#include "mls/interp.hpp"
#include "mls/reader.hpp"

namespace mls {

namespace {

constexpr std::array<std::string_view, 12> kWidgetTags = {
    "box", "row", "column", "text", "button", "input", "slider", "svg", "svg-circle", "svg-line", "svg-path", "select"};

std::string attr_key(const Value& k) {
  if (k.is(Value::Kind::Keyword) || k.is(Value::Kind::Symbol)) return k.as_name().str();
  if (k.is(Value::Kind::String)) return k.as_string();
  throw RuntimeError("ui: attribute keys must be keywords or strings");
}

std::string attr_text(const Value& v) {
  if (v.is(Value::Kind::Keyword)) return v.as_name().str();
  if (v.is_nil()) return "";
  return display_value(v);
}

Value text_node(std::string text) {
  ViewValue node;
  node.tag = "text";
  node.attrs.emplace_back("text", std::move(text));
  return Value::view(std::move(node));
}

void add_children(ValueVec& out, const Value& child, EvalContext& ctx) {
  ctx.fuel.consume();
  switch (child.kind()) {
    case Value::Kind::Nil: return;
    case Value::Kind::View: out.push_back(child); return;
    case Value::Kind::List:
    case Value::Kind::Vector:
      for (const auto& c : child.items()) add_children(out, c, ctx);
      return;
    case Value::Kind::String: out.push_back(text_node(child.as_string())); return;
    case Value::Kind::Number: out.push_back(text_node(format_number(child.as_number()))); return;
    default:
      throw RuntimeError("ui: child must be a view, string, number or sequence, got " +
                         std::string(to_string(child.kind())));
  }
}

void convert(const Value& v, const std::string& path, std::size_t depth, std::size_t& count, ViewTree& out,
             HandlerTable& handlers) {
  if (!v.is(Value::Kind::View)) {
    throw ViewError("render must return a view (found " + std::string(to_string(v.kind())) + ")");
  }
  if (depth > kMaxViewDepth) throw ViewError("view exceeds depth limit of " + std::to_string(kMaxViewDepth));
  if (++count > kMaxViewNodes) throw ViewError("view exceeds node limit of " + std::to_string(kMaxViewNodes));
  const ViewValue& node = v.as_view();
  out.tag = node.tag;
  for (const auto& [k, val] : node.attrs) out.attrs[k] = val;
  for (const auto& [event, fn] : node.handlers) {
    std::string id = path + ":" + event;
    out.handlers[event] = id;
    handlers[id] = fn;
  }
  out.children.resize(node.children.size());
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    convert(node.children[i], path + "." + std::to_string(i), depth + 1, count, out.children[i], handlers);
  }
}

void describe_into(std::string& out, const ViewTree& t) {
  out += "(" + t.tag;
  for (const auto& [k, v] : t.attrs) out += " " + k + "=" + quote_string(v);
  for (const auto& [k, v] : t.handlers) out += " on-" + k + "=" + v;
  for (const auto& c : t.children) {
    out += " ";
    describe_into(out, c);
  }
  out += ")";
}

}  // namespace

bool is_widget_tag(std::string_view tag) {
  return std::find(kWidgetTags.begin(), kWidgetTags.end(), tag) != kWidgetTags.end();
}

Value make_view_value(std::span<const Value> args, EvalContext& ctx) {
  ViewValue node;
  if (args[0].is(Value::Kind::Keyword)) {
    node.tag = args[0].as_name().str();
  } else if (args[0].is(Value::Kind::String)) {
    node.tag = args[0].as_string();
  } else {
    throw RuntimeError("ui: tag must be a keyword or string");
  }
  if (!is_widget_tag(node.tag)) throw RuntimeError("ui: unknown widget tag " + node.tag);
  std::size_t first_child = 1;
  if (args.size() > 1 && (args[1].is(Value::Kind::Map) || args[1].is_nil())) {
    first_child = 2;
    if (args[1].is(Value::Kind::Map)) {
      for (const auto& [k, v] : args[1].entries()) {
        std::string key = attr_key(k);
        if (key.starts_with("on-") && key.size() > 3) {
          if (!v.is_callable()) throw RuntimeError("ui: handler " + key + " must be a function");
          node.handlers.emplace_back(key.substr(3), v);
        } else {
          node.attrs.emplace_back(std::move(key), attr_text(v));
        }
      }
      std::sort(node.attrs.begin(), node.attrs.end());
      std::sort(node.handlers.begin(), node.handlers.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
    }
  }
  for (std::size_t i = first_child; i < args.size(); ++i) add_children(node.children, args[i], ctx);
  return Value::view(std::move(node));
}

ViewTree to_view_tree(const Value& root, HandlerTable& handlers) {
  ViewTree out;
  std::size_t count = 0;
  HandlerTable collected;
  convert(root, "0", 1, count, out, collected);
  handlers = std::move(collected);
  return out;
}

std::size_t count_nodes(const ViewTree& tree) {
  std::size_t n = 1;
  for (const auto& c : tree.children) n += count_nodes(c);
  return n;
}

std::size_t tree_depth(const ViewTree& tree) {
  std::size_t d = 0;
  for (const auto& c : tree.children) d = std::max(d, tree_depth(c));
  return d + 1;
}

std::string describe(const ViewTree& tree) {
  std::string out;
  describe_into(out, tree);
  return out;
}

}  // namespace mls
