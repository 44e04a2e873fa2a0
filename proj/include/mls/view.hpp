#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mls/value.hpp"

namespace mls {

inline constexpr std::size_t kMaxViewNodes = 10000;
inline constexpr std::size_t kMaxViewDepth = 64;

/// Transport-neutral widget tree shipped to the editor.
struct ViewTree {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::map<std::string, std::string> handlers;  // event kind -> handler id
  std::vector<ViewTree> children;

  friend bool operator==(const ViewTree&, const ViewTree&) = default;
};

bool is_widget_tag(std::string_view tag);

/// Implementation of `(ui tag attrs? & children)`.
Value make_view_value(std::span<const Value> args, EvalContext& ctx);

class ViewError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Callables behind the handler ids of one rendered tree.
using HandlerTable = std::map<std::string, Value>;

/// Converts a rendered view value into a ViewTree, assigning handler ids
/// "<path>:<event>" where path is the dot-separated child index path ("0" is
/// the root). Throws ViewError on non-view values and cap violations.
ViewTree to_view_tree(const Value& root, HandlerTable& handlers);

std::size_t count_nodes(const ViewTree& tree);
std::size_t tree_depth(const ViewTree& tree);

/// Printed one-line outline used by tests and the CLI.
std::string describe(const ViewTree& tree);

}  // namespace mls
