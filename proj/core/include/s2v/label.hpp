#pragma once

#include <optional>
#include <string_view>

namespace s2v {

enum class Label { healthy, faulty };

constexpr std::string_view to_string(Label label) noexcept {
  return label == Label::healthy ? "healthy" : "faulty";
}

constexpr std::optional<Label> parse_label(std::string_view text) noexcept {
  if (text == "healthy") return Label::healthy;
  if (text == "faulty") return Label::faulty;
  return std::nullopt;
}

}  // namespace s2v
